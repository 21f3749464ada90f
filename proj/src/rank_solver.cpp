#include "rankcal/rank_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "rankcal/error.hpp"

namespace rankcal {

namespace {

// Shared by score_candidate and the sphere scan so both count exactly the same way.
inline double dot3(double mx, double my, double mz, double dx, double dy, double dz) {
    return mx * dx + my * dy + mz * dz;
}

void check_channel(int channel) {
    if (channel < 0 || channel > 2) throw Error(ErrorCode::InvalidArgument, "channel must be 0, 1 or 2");
}

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

SphereSample sample_sphere(int n) {
    if (n < 6) throw Error(ErrorCode::InvalidArgument, "sphere sample needs at least 6 points");
    SphereSample s;
    s.points.reserve(static_cast<std::size_t>(n));
    if (n == 6) {
        for (int axis = 0; axis < 3; ++axis) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[axis] = 1.0;
            s.points.push_back(e);
            s.points.push_back(-e);
        }
        return s;
    }
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double radius = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * i;
        s.points.emplace_back(Eigen::Vector3d(radius * std::cos(phi), radius * std::sin(phi), z).normalized());
    }
    return s;
}

HalfSpaceSet build_half_spaces(const PixelPairSet& pairs, int channel, int max_colors, std::uint64_t seed,
                               double tie_threshold) {
    check_channel(channel);
    if (max_colors < 2) throw Error(ErrorCode::InvalidArgument, "max_colors must be >= 2");

    std::vector<const PixelPair*> unique;
    std::set<std::array<double, 3>> seen;
    for (const PixelPair& p : pairs) {
        if (!usable_for_estimation(p)) continue;
        if (seen.insert({p.raw.r, p.raw.g, p.raw.b}).second) unique.push_back(&p);
    }
    if (unique.size() < 2) {
        throw Error(ErrorCode::DegenerateChannel, "fewer than 2 distinct unsaturated raw colours");
    }

    std::vector<const PixelPair*> chosen;
    if (unique.size() > static_cast<std::size_t>(max_colors)) {
        std::mt19937_64 rng(seed);
        std::sample(unique.begin(), unique.end(), std::back_inserter(chosen), max_colors, rng);
    } else {
        chosen = unique;
    }

    HalfSpaceSet hs;
    hs.differences.reserve(chosen.size() * (chosen.size() - 1) / 2);
    for (std::size_t a = 0; a < chosen.size(); ++a) {
        for (std::size_t b = a + 1; b < chosen.size(); ++b) {
            const double delta = chosen[a]->rendered[channel] - chosen[b]->rendered[channel];
            if (std::abs(delta) < tie_threshold) continue;
            const Eigen::Vector3d d = chosen[a]->raw.vec() - chosen[b]->raw.vec();
            hs.differences.push_back(delta > 0.0 ? d : Eigen::Vector3d(-d));
        }
    }
    if (hs.differences.empty()) {
        throw Error(ErrorCode::DegenerateChannel,
                    "channel " + std::to_string(channel) + " has no rendered differences above the tie threshold");
    }
    return hs;
}

int score_candidate(const Eigen::Vector3d& m, const HalfSpaceSet& hs) {
    int count = 0;
    for (const Eigen::Vector3d& d : hs.differences) {
        if (dot3(m.x(), m.y(), m.z(), d.x(), d.y(), d.z()) > 0.0) ++count;
    }
    return count;
}

BestDirections best_sphere_points(const SphereSample& sphere, const HalfSpaceSet& hs) {
    const std::size_t total = hs.size();
    std::vector<double> dx(total), dy(total), dz(total);
    for (std::size_t j = 0; j < total; ++j) {
        dx[j] = hs.differences[j].x();
        dy[j] = hs.differences[j].y();
        dz[j] = hs.differences[j].z();
    }

    // A point is abandoned once it can no longer reach the best score seen so far,
    // so the tied set matches a full scan exactly.
    constexpr std::size_t kBlock = 128;
    BestDirections best;
    best.score = -1;
    for (std::size_t i = 0; i < sphere.points.size(); ++i) {
        const double mx = sphere.points[i].x();
        const double my = sphere.points[i].y();
        const double mz = sphere.points[i].z();
        int count = 0;
        bool abandoned = false;
        for (std::size_t start = 0; start < total; start += kBlock) {
            const std::size_t end = std::min(total, start + kBlock);
            int block_count = 0;
            for (std::size_t j = start; j < end; ++j) block_count += dot3(mx, my, mz, dx[j], dy[j], dz[j]) > 0.0;
            count += block_count;
            if (count + static_cast<int>(total - end) < best.score) {
                abandoned = true;
                break;
            }
        }
        if (abandoned) continue;
        if (count > best.score) {
            best.score = count;
            best.indices.clear();
        }
        if (count == best.score) best.indices.push_back(i);
    }
    return best;
}

std::vector<double> isotonic_fit(std::span<const double> y) {
    struct Block {
        double sum;
        double weight;
        std::size_t length;
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (double v : y) {
        blocks.push_back({v, 1.0, 1});
        while (blocks.size() > 1) {
            const Block& last = blocks.back();
            const Block& prev = blocks[blocks.size() - 2];
            if (prev.sum / prev.weight <= last.sum / last.weight) break;
            const Block merged{prev.sum + last.sum, prev.weight + last.weight, prev.length + last.length};
            blocks.pop_back();
            blocks.back() = merged;
        }
    }
    std::vector<double> fit;
    fit.reserve(y.size());
    for (const Block& b : blocks) fit.insert(fit.end(), b.length, b.sum / b.weight);
    return fit;
}

double monotonicity_score(const PixelPairSet& pairs, const Eigen::Vector3d& m, int channel) {
    check_channel(channel);
    if (m.squaredNorm() == 0.0) throw Error(ErrorCode::InvalidArgument, "candidate row is zero");
    std::vector<std::pair<double, double>> xy;
    xy.reserve(pairs.size());
    for (const PixelPair& p : pairs) {
        if (usable_for_estimation(p)) xy.emplace_back(m.dot(p.raw.vec()), p.rendered[channel]);
    }
    if (xy.empty()) throw Error(ErrorCode::InsufficientData, "no unsaturated pairs to score");
    std::sort(xy.begin(), xy.end());

    std::vector<double> y(xy.size());
    std::transform(xy.begin(), xy.end(), y.begin(), [](const auto& v) { return v.second; });
    const std::vector<double> fit = isotonic_fit(y);
    double sq = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sq += (y[i] - fit[i]) * (y[i] - fit[i]);
    return std::sqrt(sq / static_cast<double>(y.size()));
}

Eigen::Vector3d estimate_row(const PixelPairSet& pairs, int channel, const SphereSample& sphere,
                             const RankSettings& settings, std::uint64_t seed) {
    check_channel(channel);
    if (settings.trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
    if (sphere.points.empty()) throw Error(ErrorCode::InvalidArgument, "empty sphere sample");

    Eigen::Vector3d best_row = Eigen::Vector3d::Zero();
    double best_score = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < settings.trials; ++trial) {
        const HalfSpaceSet hs = build_half_spaces(pairs, channel, settings.max_colors,
                                                  seed + static_cast<std::uint64_t>(trial), settings.tie_threshold);
        const BestDirections tied = best_sphere_points(sphere, hs);

        Eigen::Vector3d candidate = sphere.points[tied.indices.front()];
        if (tied.indices.size() > 1) {
            Eigen::Vector3d median;
            for (int axis = 0; axis < 3; ++axis) {
                std::vector<double> values;
                values.reserve(tied.indices.size());
                for (std::size_t idx : tied.indices) values.push_back(sphere.points[idx][axis]);
                median[axis] = median_of(std::move(values));
            }
            if (median.norm() > 1e-12) candidate = median.normalized();
        }

        const double score = monotonicity_score(pairs, candidate, channel);
        if (score < best_score) {
            best_score = score;
            best_row = candidate;
        }
    }
    return best_row;
}

ColorMatrix rescale_achromatic(const ColorMatrix& m, const PixelPairSet& pairs) {
    const Eigen::Vector3d mid(0.5, 0.5, 0.5);
    const PixelPair* reference = nullptr;
    double best_distance = std::numeric_limits<double>::infinity();
    for (const PixelPair& p : pairs) {
        if (!usable_for_estimation(p)) continue;
        const Eigen::Vector3d rendered = p.rendered.vec();
        const double spread = rendered.maxCoeff() - rendered.minCoeff();
        const double brightness = rendered.mean();
        if (spread > 0.04 || brightness < 0.25 || brightness > 0.75) continue;
        const double distance = (rendered - mid).norm();
        if (distance < best_distance) {
            best_distance = distance;
            reference = &p;
        }
    }
    if (reference == nullptr) {
        throw Error(ErrorCode::NoAchromaticSample, "no unsaturated near-grey rendered sample in [0.25, 0.75]");
    }

    const Eigen::Vector3d mapped = m.apply(reference->raw.vec());
    Eigen::Matrix3d scaled = m.matrix();
    for (int k = 0; k < 3; ++k) {
        if (!(mapped[k] > 0.0)) {
            throw Error(ErrorCode::SingularMatrix,
                        "row " + std::to_string(k) + " maps the achromatic reference to a non-positive value");
        }
        scaled.row(k) *= reference->rendered[k] / mapped[k];
    }
    ColorMatrix out(scaled);
    if (!out.invertible()) throw Error(ErrorCode::SingularMatrix, "rescaled colour matrix is singular");
    return out;
}

}  // namespace rankcal
