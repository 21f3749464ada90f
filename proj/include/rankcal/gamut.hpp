#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rankcal/types.hpp"

namespace rankcal {

/// v -> T v + o, fitted so every fitted point lands in the unit cube.
struct AffineGamutMap {
    Eigen::Matrix3d transform = Eigen::Matrix3d::Identity();
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& v) const { return transform * v + offset; }
};

/// Closest affine map (least squares over the points) whose outputs stay inside
/// [0, 1]^3. Throws DegenerateGeometry for fewer than 4 or coplanar points.
AffineGamutMap solve_affine_gamut(std::span<const Eigen::Vector3d> points);

/// sum_i |T p_i + o - p_i|^2
double affine_gamut_objective(const AffineGamutMap& map, std::span<const Eigen::Vector3d> points);

struct TrilinearWeights {
    std::array<std::size_t, 8> nodes{};
    std::array<double, 8> weights{};
};

/// Enclosing nodes and weights for v clamped to the unit cube.
TrilinearWeights trilinear_weights(int resolution, const Eigen::Vector3d& v);

/// Trilinear interpolation of the lattice at v (clamped to [0, 1]^3).
RgbTriple apply_lattice(const Lattice3& lut, const Eigen::Vector3d& v);

inline constexpr double kDefaultLatticeMu = 1e-3;

/// Lattice regression: interpolation data term, plus mu times the 6-neighbour
/// graph Laplacian of the node offsets from the identity, plus mu times an anchor
/// pulling nodes whose incident cells hold no samples back to the identity.
Lattice3 fit_lattice(std::span<const Eigen::Vector3d> inputs, std::span<const RgbTriple> targets,
                     int resolution = 5, double mu = kDefaultLatticeMu);

}  // namespace rankcal
