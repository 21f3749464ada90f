#include "rankcal/monotone_fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rankcal/error.hpp"
#include "rankcal/qp.hpp"

namespace rankcal {

void FitConfig::validate() const {
    if (degree < 1) throw Error(ErrorCode::InvalidArgument, "degree must be >= 1");
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (constraint_grid < degree + 1) throw Error(ErrorCode::InvalidArgument, "constraint_grid must be >= degree + 1");
}

Eigen::MatrixXd curvature_gram(int degree) {
    // f'' = sum_j j (j - 1) a_j t^(j-2), so the integral over [0, 1] pairs terms as
    // i (i - 1) j (j - 1) / (i + j - 3).
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(degree + 1, degree + 1);
    for (int i = 2; i <= degree; ++i) {
        for (int j = 2; j <= degree; ++j) {
            r(i, j) = static_cast<double>(i * (i - 1) * j * (j - 1)) / static_cast<double>(i + j - 3);
        }
    }
    return r;
}

namespace {

// -f'(t) <= 0 at each grid point.
void append_slope_constraints(Eigen::MatrixXd& a, int degree, int grid) {
    const Eigen::Index first = a.rows();
    a.conservativeResize(first + grid, degree + 1);
    for (int g = 0; g < grid; ++g) {
        const double t = static_cast<double>(g) / (grid - 1);
        a(first + g, 0) = 0.0;
        double power = 1.0;  // t^(j-1)
        for (int j = 1; j <= degree; ++j) {
            a(first + g, j) = -static_cast<double>(j) * power;
            power *= t;
        }
    }
}

// Column j holds the power-basis coefficients of the shifted Legendre polynomial
// P_j(2t - 1); the fit is solved in that basis, where the normal matrix and the
// slope rows are far better conditioned.
Eigen::MatrixXd legendre_to_power(int degree) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(degree + 1, degree + 1);
    for (int j = 0; j <= degree; ++j) {
        double binom_jk = 1.0;   // C(j, k)
        double binom_jkk = 1.0;  // C(j + k, k)
        for (int k = 0; k <= j; ++k) {
            t(k, j) = ((j + k) % 2 == 0 ? 1.0 : -1.0) * binom_jk * binom_jkk;
            binom_jk = binom_jk * (j - k) / (k + 1);
            binom_jkk = binom_jkk * (j + k + 1) / (k + 1);
        }
    }
    return t;
}

}  // namespace

ToneCurve fit_monotone(std::span<const double> x, std::span<const double> y, const FitConfig& cfg,
                       ToneDirection direction, int channel) {
    cfg.validate();
    if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "x and y differ in length");
    const auto n = static_cast<Eigen::Index>(x.size());
    if (n < cfg.degree + 1) {
        throw Error(ErrorCode::InsufficientData, std::to_string(n) + " samples for a degree " +
                                                     std::to_string(cfg.degree) + " curve");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error(ErrorCode::InvalidArgument, "non-finite sample");
        if (x[i] < -1e-12 || x[i] > 1.0 + 1e-12) throw Error(ErrorCode::InvalidArgument, "x outside [0, 1]");
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (*hi - *lo < 0.2) throw Error(ErrorCode::DegenerateSpan, "x values span less than 0.2");

    const int cols = cfg.degree + 1;
    Eigen::MatrixXd vander(n, cols);
    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double power = 1.0;
        for (int j = 0; j < cols; ++j) {
            vander(i, j) = power;
            power *= x[i];
        }
        target[i] = y[i];
    }

    const Eigen::MatrixXd basis = legendre_to_power(cfg.degree);
    const Eigen::MatrixXd design = vander * basis;
    QuadProgram qp;
    qp.Q = 2.0 * (design.transpose() * design + cfg.lambda * basis.transpose() * curvature_gram(cfg.degree) * basis);
    qp.Q = 0.5 * (qp.Q + qp.Q.transpose());
    qp.c = -2.0 * design.transpose() * target;

    ToneCurve curve;
    curve.direction = direction;
    curve.channel = channel;

    // f(t) = t has unit slope everywhere, so no constraint is active at the start.
    Eigen::VectorXd identity = Eigen::VectorXd::Zero(cols);
    identity[1] = 1.0;
    const Eigen::VectorXd start = basis.triangularView<Eigen::Upper>().solve(identity);

    // The grid constraint can leave tiny dips between grid points; tighten with the
    // validation grid and then a denser one if that ever happens.
    Eigen::MatrixXd slopes(0, cols);
    append_slope_constraints(slopes, cfg.degree, cfg.constraint_grid);
    for (const int extra : {0, 1024, 4096}) {
        if (extra > 0) append_slope_constraints(slopes, cfg.degree, extra);
        qp.A = slopes * basis;
        for (Eigen::Index r = 0; r < qp.A.rows(); ++r) qp.A.row(r).normalize();
        qp.b = Eigen::VectorXd::Zero(qp.A.rows());
        const QpSolution sol = solve_qp(qp, kDefaultQpTolerance, start);
        const Eigen::VectorXd power = basis * sol.x;
        curve.coefficients.assign(power.data(), power.data() + cols);
        if (curve.is_monotone()) return curve;
    }
    throw Error(ErrorCode::InvalidArgument, "monotone fit could not satisfy the monotonicity grid");
}

namespace {

std::array<ToneCurve, 3> fit_tones(const ColorMatrix& m, const PixelPairSet& pairs, const FitConfig& cfg,
                                   ToneDirection direction) {
    m.validate();
    const PixelPairSet usable = usable_pairs(pairs);
    std::array<ToneCurve, 3> tones;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> x, y;
        x.reserve(usable.size());
        y.reserve(usable.size());
        const Eigen::Vector3d row = m.row(k);
        for (const PixelPair& p : usable) {
            const double corrected = row.dot(p.raw.vec());
            if (direction == ToneDirection::Forward) {
                x.push_back(std::clamp(corrected, 0.0, 1.0));
                y.push_back(p.rendered[k]);
            } else {
                x.push_back(p.rendered[k]);
                y.push_back(corrected);
            }
        }
        try {
            tones[k] = fit_monotone(x, y, cfg, direction, k);
        } catch (const Error& e) {
            throw Error(e.code(), "channel " + std::to_string(k) + ": " + e.message());
        }
    }
    return tones;
}

}  // namespace

std::array<ToneCurve, 3> fit_forward_tones(const ColorMatrix& m, const PixelPairSet& pairs, const FitConfig& cfg) {
    return fit_tones(m, pairs, cfg, ToneDirection::Forward);
}

std::array<ToneCurve, 3> fit_inverse_tones(const ColorMatrix& m, const PixelPairSet& pairs, const FitConfig& cfg) {
    return fit_tones(m, pairs, cfg, ToneDirection::Inverse);
}

}  // namespace rankcal
