#pragma once

#include <optional>

#include <Eigen/Dense>

namespace rankcal {

inline constexpr double kDefaultQpTolerance = 1e-8;
inline constexpr double kSingularLift = 1e-10;

/// minimize 0.5 x'Qx + c'x  subject to  A x <= b
struct QuadProgram {
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;
    Eigen::MatrixXd A;  // m x n, m may be zero
    Eigen::VectorXd b;

    int variables() const { return static_cast<int>(c.size()); }
    int constraints() const { return static_cast<int>(b.size()); }
    double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(Q * x) + c.dot(x); }

    /// Dimension, symmetry and PSD checks; throws InvalidArgument.
    void validate() const;
};

struct QpSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd multipliers;  // one per constraint, zero when inactive
    double objective = 0.0;
    int iterations = 0;
};

/// Primal active-set method. The KKT system of the working set is lifted by
/// 1e-10 I whenever Q is singular on the active manifold, so the result is a
/// deterministic function of the inputs.
///
/// `start` is used as the initial iterate when it is feasible; otherwise a
/// phase-1 program finds a feasible point. Throws Infeasible or MaxIterations
/// (after 50 (n + m) steps).
QpSolution solve_qp(const QuadProgram& program, double tol = kDefaultQpTolerance,
                    const std::optional<Eigen::VectorXd>& start = std::nullopt);

}  // namespace rankcal
