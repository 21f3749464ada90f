#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rankcal/types.hpp"

namespace rankcal {

/// Rendered differences below two JPEG levels are not used as rank evidence.
inline constexpr double kRankTieThreshold = 2.0 / 255.0;

struct SphereSample {
    std::vector<Eigen::Vector3d> points;
    std::size_t count() const { return points.size(); }
};

/// Oriented difference vectors d = raw_a - raw_b with rendered_a > rendered_b.
struct HalfSpaceSet {
    std::vector<Eigen::Vector3d> differences;
    std::size_t size() const { return differences.size(); }
};

struct RankSettings {
    int sphere_points = 100000;
    int trials = 25;
    int max_colors = 50;
    double tie_threshold = kRankTieThreshold;
};

/// Fibonacci spiral over the whole sphere; n == 6 yields the six axis directions.
SphereSample sample_sphere(int n);

/// Draws up to max_colors unique raw triples from the usable pairs and keeps every
/// pair whose rendered channel values differ by at least tie_threshold.
/// Throws DegenerateChannel when no rank evidence remains.
HalfSpaceSet build_half_spaces(const PixelPairSet& pairs, int channel, int max_colors, std::uint64_t seed,
                               double tie_threshold = kRankTieThreshold);

/// Number of constraints with m . d > 0.
int score_candidate(const Eigen::Vector3d& m, const HalfSpaceSet& hs);

struct BestDirections {
    int score = 0;
    std::vector<std::size_t> indices;  // every sphere point attaining `score`
};

/// Exhaustive scan of the sphere; identical to scoring every point with score_candidate.
BestDirections best_sphere_points(const SphereSample& sphere, const HalfSpaceSet& hs);

/// RMS residual of the pool-adjacent-violators fit of rendered channel values on m . raw.
double monotonicity_score(const PixelPairSet& pairs, const Eigen::Vector3d& m, int channel);

/// Least-squares non-decreasing fit of y in the given order.
std::vector<double> isotonic_fit(std::span<const double> y);

/// Unit row direction for one channel; trials use seeds seed, seed + 1, ...
Eigen::Vector3d estimate_row(const PixelPairSet& pairs, int channel, const SphereSample& sphere,
                             const RankSettings& settings, std::uint64_t seed);

/// Rows rescaled so the matrix maps the most central near-grey raw onto its rendered value.
/// Throws NoAchromaticSample or SingularMatrix.
ColorMatrix rescale_achromatic(const ColorMatrix& m, const PixelPairSet& pairs);

}  // namespace rankcal
