#pragma once

#include <array>
#include <span>

#include "rankcal/types.hpp"

namespace rankcal {

struct FitConfig {
    int degree = 7;
    double lambda = 1e-5;      // weight of the integrated squared second derivative
    int constraint_grid = 257; // uniform points on [0, 1] where f' >= 0 is imposed

    void validate() const;
};

/// Minimizes sum_i (f(x_i) - y_i)^2 + lambda * int_0^1 f''(t)^2 dt subject to
/// f'(t_g) >= 0 on the constraint grid, as a single quadratic program.
/// Throws InsufficientData (fewer than degree + 1 samples) or DegenerateSpan
/// (x range below 0.2).
ToneCurve fit_monotone(std::span<const double> x, std::span<const double> y, const FitConfig& cfg,
                       ToneDirection direction = ToneDirection::Forward, int channel = 0);

/// f_k fitted on (clamp01(M_k raw), rendered_k) over the usable pairs.
std::array<ToneCurve, 3> fit_forward_tones(const ColorMatrix& m, const PixelPairSet& pairs, const FitConfig& cfg);

/// f_k^-1 fitted on (rendered_k, M_k raw) over the usable pairs.
std::array<ToneCurve, 3> fit_inverse_tones(const ColorMatrix& m, const PixelPairSet& pairs, const FitConfig& cfg);

/// Exact quadratic form R with int_0^1 f''(t)^2 dt = a' R a for power-basis coefficients a.
Eigen::MatrixXd curvature_gram(int degree);

}  // namespace rankcal
