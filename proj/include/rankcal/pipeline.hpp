#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rankcal/monotone_fit.hpp"
#include "rankcal/rank_solver.hpp"
#include "rankcal/types.hpp"

namespace rankcal {

struct CalibrationConfig {
    RankSettings rank;
    FitConfig fit;
    int lattice_resolution = 5;
    double lattice_mu = 1e-3;
    std::uint64_t seed = 0;
    std::string camera_id = "unknown";
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

/// Full forward and backward calibration. Stage failures are rethrown with the
/// stage name prefixed and the original error code kept.
PipelineModel calibrate(const PixelPairSet& pairs, const CalibrationConfig& cfg,
                        std::vector<StageTiming>* timings = nullptr);

/// LUT(f(clamp01(M raw))), clamped to the unit cube.
RgbTriple apply_forward(const PipelineModel& model, const RgbTriple& raw);

/// LUT(clamp01(M^-1 f^-1(rendered))), clamped to the unit cube.
RgbTriple apply_backward(const PipelineModel& model, const RgbTriple& rendered);

}  // namespace rankcal
