#include "rankcal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <string>

#include "rankcal/error.hpp"
#include "rankcal/gamut.hpp"

namespace rankcal {

namespace {

constexpr std::size_t kMinUsablePairs = 30;
constexpr std::size_t kMinDistinctLevels = 10;

Eigen::Vector3d clamp01(const Eigen::Vector3d& v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

class StageRunner {
public:
    explicit StageRunner(std::vector<StageTiming>* timings) : timings_(timings) {}

    template <typename Fn>
    auto run(const char* stage, Fn&& fn) {
        const auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                record(stage, start);
            } else {
                auto result = fn();
                record(stage, start);
                return result;
            }
        } catch (const Error& e) {
            throw Error(e.code(), std::string(stage) + ": " + e.message());
        }
    }

private:
    void record(const char* stage, std::chrono::steady_clock::time_point start) {
        if (timings_ == nullptr) return;
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        timings_->push_back({stage, elapsed.count()});
    }

    std::vector<StageTiming>* timings_;
};

void check_preconditions(const PixelPairSet& usable) {
    if (usable.size() < kMinUsablePairs) {
        throw Error(ErrorCode::InsufficientData, "calibration needs at least " + std::to_string(kMinUsablePairs) +
                                                     " unsaturated pairs, got " + std::to_string(usable.size()));
    }
    for (int c = 0; c < 3; ++c) {
        std::set<double> levels;
        for (const PixelPair& p : usable) levels.insert(p.rendered[c]);
        if (levels.size() < kMinDistinctLevels) {
            throw Error(ErrorCode::InsufficientData, "channel " + std::to_string(c) + " has only " +
                                                         std::to_string(levels.size()) + " distinct rendered values");
        }
    }
}

// Uniform factor bringing every mapped usable raw into [0, 1]; a common factor keeps
// the achromatic balance set by the rescale.
ColorMatrix fit_range(const ColorMatrix& m, const PixelPairSet& usable) {
    double peak = 0.0;
    for (const PixelPair& p : usable) peak = std::max(peak, m.apply(p.raw.vec()).maxCoeff());
    if (peak <= 1.0) return m;
    return ColorMatrix(m.matrix() / peak);
}

Eigen::Vector3d tone(const std::array<ToneCurve, 3>& curves, const Eigen::Vector3d& v) {
    return {curves[0](v[0]), curves[1](v[1]), curves[2](v[2])};
}

}  // namespace

PipelineModel calibrate(const PixelPairSet& pairs, const CalibrationConfig& cfg, std::vector<StageTiming>* timings) {
    cfg.fit.validate();
    if (cfg.lattice_resolution < 2) throw Error(ErrorCode::InvalidArgument, "lattice resolution must be >= 2");
    const PixelPairSet usable = usable_pairs(pairs);
    check_preconditions(usable);

    StageRunner runner(timings);
    PipelineModel model;

    const SphereSample sphere = runner.run("sphere", [&] { return sample_sphere(cfg.rank.sphere_points); });
    const ColorMatrix directions = runner.run("matrix", [&] {
        Eigen::Vector3d rows[3];
        for (int k = 0; k < 3; ++k) {
            const std::uint64_t seed = cfg.seed + 1000003ULL * static_cast<std::uint64_t>(k);
            rows[k] = estimate_row(usable, k, sphere, cfg.rank, seed);
        }
        return ColorMatrix::from_rows(rows[0], rows[1], rows[2]);
    });
    model.matrix = runner.run("achromatic", [&] {
        const ColorMatrix scaled = fit_range(rescale_achromatic(directions, usable), usable);
        if (!scaled.invertible()) throw Error(ErrorCode::SingularMatrix, "colour matrix is singular");
        return scaled;
    });

    model.forward_tones = runner.run("forward_tone", [&] { return fit_forward_tones(model.matrix, usable, cfg.fit); });
    model.forward_lut = runner.run("forward_lut", [&] {
        std::vector<Eigen::Vector3d> inputs;
        std::vector<RgbTriple> targets;
        for (const PixelPair& p : usable) {
            inputs.push_back(clamp01(tone(model.forward_tones, clamp01(model.matrix.apply(p.raw.vec())))));
            targets.push_back(p.rendered);
        }
        return fit_lattice(inputs, targets, cfg.lattice_resolution, cfg.lattice_mu);
    });

    model.inverse_tones = runner.run("inverse_tone", [&] { return fit_inverse_tones(model.matrix, usable, cfg.fit); });
    model.backward_lut = runner.run("backward_lut", [&] {
        const Eigen::Matrix3d inverse = model.matrix.matrix().inverse();
        std::vector<Eigen::Vector3d> inputs;
        std::vector<RgbTriple> targets;
        for (const PixelPair& p : usable) {
            inputs.push_back(clamp01(inverse * tone(model.inverse_tones, p.rendered.vec())));
            targets.push_back(p.raw);
        }
        return fit_lattice(inputs, targets, cfg.lattice_resolution, cfg.lattice_mu);
    });

    ModelMetadata& meta = model.metadata;
    meta.camera_id = cfg.camera_id;
    meta.sample_count = usable.size();
    meta.seed = cfg.seed;
    meta.sphere_points = cfg.rank.sphere_points;
    meta.trials = cfg.rank.trials;
    meta.max_colors = cfg.rank.max_colors;
    meta.degree = cfg.fit.degree;
    meta.lambda = cfg.fit.lambda;
    meta.constraint_grid = cfg.fit.constraint_grid;
    meta.lattice_resolution = cfg.lattice_resolution;
    meta.lattice_mu = cfg.lattice_mu;
    return model;
}

RgbTriple apply_forward(const PipelineModel& model, const RgbTriple& raw) {
    const Eigen::Vector3d toned = tone(model.forward_tones, clamp01(model.matrix.apply(raw.vec())));
    return RgbTriple::from(clamp01(apply_lattice(model.forward_lut, toned).vec()));
}

RgbTriple apply_backward(const PipelineModel& model, const RgbTriple& rendered) {
    const Eigen::Vector3d linear = model.matrix.matrix().inverse() * tone(model.inverse_tones, rendered.vec());
    return RgbTriple::from(clamp01(apply_lattice(model.backward_lut, clamp01(linear)).vec()));
}

}  // namespace rankcal
