#include "rankcal/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rankcal/error.hpp"

namespace rankcal {

void QuadProgram::validate() const {
    const Eigen::Index n = c.size();
    const Eigen::Index m = b.size();
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "quadratic program has no variables");
    if (Q.rows() != n || Q.cols() != n) throw Error(ErrorCode::InvalidArgument, "Q must be n x n");
    if (A.rows() != m || (m > 0 && A.cols() != n)) throw Error(ErrorCode::InvalidArgument, "A must be m x n");
    if (!Q.allFinite() || !c.allFinite() || !A.allFinite() || !b.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "quadratic program has non-finite data");
    }
    const double scale = std::max(Q.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw Error(ErrorCode::InvalidArgument, "Q is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8 * scale) {
        throw Error(ErrorCode::InvalidArgument, "Q is not positive semidefinite");
    }
}

namespace {

Eigen::MatrixXd gather_rows_transposed(const Eigen::MatrixXd& a, const std::vector<int>& rows) {
    Eigen::MatrixXd out(a.cols(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = a.row(rows[i]).transpose();
    return out;
}

// Minimizer of 0.5 p'Qp + g'p over the null space of the working-set rows. The
// null space comes from a rank-revealing QR, so nearly parallel rows do no harm;
// the reduced Hessian is lifted by 1e-10 I when it is singular.
Eigen::VectorXd working_set_step(const QuadProgram& p, const std::vector<int>& working, const Eigen::VectorXd& gradient) {
    const Eigen::Index n = p.c.size();
    Eigen::MatrixXd z;
    if (working.empty()) {
        z = Eigen::MatrixXd::Identity(n, n);
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gather_rows_transposed(p.A, working));
        qr.setThreshold(1e-10);
        const Eigen::Index rank = qr.rank();
        if (rank == n) return Eigen::VectorXd::Zero(n);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
        z = q.rightCols(n - rank);
    }
    Eigen::MatrixXd reduced = z.transpose() * p.Q * z;
    reduced = 0.5 * (reduced + reduced.transpose());
    const Eigen::VectorXd rhs = -(z.transpose() * gradient);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced);
    const double scale = std::max(1.0, reduced.cwiseAbs().maxCoeff());
    const bool singular = ldlt.info() != Eigen::Success ||
                          ldlt.vectorD().minCoeff() <= std::numeric_limits<double>::epsilon() * scale;
    if (singular) {
        reduced.diagonal().array() += kSingularLift;
        ldlt.compute(reduced);
    }
    return z * ldlt.solve(rhs);
}

// Lawson-Hanson: minimize |E l - f| subject to l >= 0.
Eigen::VectorXd nonnegative_least_squares(const Eigen::MatrixXd& e, const Eigen::VectorXd& f) {
    const Eigen::Index k = e.cols();
    Eigen::VectorXd l = Eigen::VectorXd::Zero(k);
    std::vector<char> passive(static_cast<std::size_t>(k), 0);
    const double tol = 1e-13 * std::max(1.0, e.cwiseAbs().maxCoeff()) * std::max(1.0, f.cwiseAbs().maxCoeff());
    const auto solve_passive = [&] {
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
        }
        Eigen::MatrixXd ep(e.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) ep.col(static_cast<Eigen::Index>(j)) = e.col(cols[j]);
        const Eigen::VectorXd sp = ep.colPivHouseholderQr().solve(f);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
        for (std::size_t j = 0; j < cols.size(); ++j) s[cols[j]] = sp[static_cast<Eigen::Index>(j)];
        return s;
    };

    for (Eigen::Index outer = 0; outer < 3 * k + 3; ++outer) {
        const Eigen::VectorXd w = e.transpose() * (f - e * l);
        Eigen::Index best = -1;
        double best_value = tol;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w[j] > best_value) {
                best_value = w[j];
                best = j;
            }
        }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = 1;
        for (Eigen::Index inner = 0; inner <= k; ++inner) {
            const Eigen::VectorXd s = solve_passive();
            double alpha = 1.0;
            Eigen::Index limiting = -1;
            for (Eigen::Index j = 0; j < k; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) {
                    const double denom = l[j] - s[j];
                    const double ratio = denom > 0.0 ? l[j] / denom : 0.0;
                    if (limiting < 0 || ratio < alpha) {
                        alpha = ratio;
                        limiting = j;
                    }
                }
            }
            if (limiting < 0) {
                l = s;
                break;
            }
            l += alpha * (s - l);
            l[limiting] = 0.0;
            const double zero = 1e-14 * std::max(1.0, l.cwiseAbs().maxCoeff());
            for (Eigen::Index j = 0; j < k; ++j) {
                if (passive[static_cast<std::size_t>(j)] && l[j] <= zero) {
                    passive[static_cast<std::size_t>(j)] = 0;
                    l[j] = 0.0;
                }
            }
        }
    }
    return l;
}

struct RatioTest {
    double alpha;
    int blocking = -1;
};

// Longest step along d, capped at alpha_max, keeping every constraint outside
// `skip` satisfied; ties go to the lowest index.
RatioTest ratio_test(const QuadProgram& p, const Eigen::VectorXd& x, const Eigen::VectorXd& d, double alpha_max,
                     const std::vector<char>& skip) {
    RatioTest out{alpha_max};
    const double d_norm = d.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < p.b.size(); ++i) {
        if (skip[static_cast<std::size_t>(i)]) continue;
        const double ad = p.A.row(i).dot(d);
        if (ad <= 1e-14 * p.A.row(i).norm() * d_norm) continue;
        const double ratio = std::max(0.0, p.b[i] - p.A.row(i).dot(x)) / ad;
        if (ratio < out.alpha) {
            out.alpha = ratio;
            out.blocking = static_cast<int>(i);
        }
    }
    return out;
}

QpSolution active_set(const QuadProgram& p, Eigen::VectorXd x, double tol) {
    const Eigen::Index n = p.c.size();
    const Eigen::Index m = p.b.size();
    const int max_iterations = 50 * static_cast<int>(n + m);

    std::vector<int> working;
    std::vector<char> in_working(static_cast<std::size_t>(m), 0);
    bool at_subspace_minimum = false;

    for (int iter = 0; iter < max_iterations; ++iter) {
        const Eigen::VectorXd gradient = p.Q * x + p.c;
        const double x_scale = std::max(1.0, x.cwiseAbs().maxCoeff());

        if (!at_subspace_minimum) {
            const Eigen::VectorXd step = working_set_step(p, working, gradient);
            if (step.cwiseAbs().maxCoeff() > 1e-13 * x_scale) {
                const RatioTest rt = ratio_test(p, x, step, 1.0, in_working);
                x += rt.alpha * step;
                if (rt.blocking >= 0) {
                    working.push_back(rt.blocking);
                    in_working[static_cast<std::size_t>(rt.blocking)] = 1;
                } else {
                    at_subspace_minimum = true;
                }
                continue;
            }
            at_subspace_minimum = true;
        }

        // Stationary on the working set. Non-negative multipliers over every active
        // constraint either certify optimality or leave a residual r for which -r
        // keeps all of them satisfied and strictly lowers the objective, so the
        // iteration cannot cycle at a degenerate vertex.
        std::vector<int> active;
        std::vector<char> in_active(static_cast<std::size_t>(m), 0);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double slack = p.b[i] - p.A.row(i).dot(x);
            const double scale = std::max({1.0, std::abs(p.b[i]), p.A.row(i).cwiseAbs().maxCoeff() * x_scale});
            if (in_working[static_cast<std::size_t>(i)] || slack <= 1e-12 * scale) {
                active.push_back(static_cast<int>(i));
                in_active[static_cast<std::size_t>(i)] = 1;
            }
        }
        const Eigen::MatrixXd at = gather_rows_transposed(p.A, active);
        const Eigen::VectorXd lambda =
            active.empty() ? Eigen::VectorXd() : nonnegative_least_squares(at, -gradient);
        const Eigen::VectorXd residual = active.empty() ? gradient : Eigen::VectorXd(gradient + at * lambda);
        const double mult_tol = tol * std::max(1.0, gradient.cwiseAbs().maxCoeff());
        if (residual.cwiseAbs().maxCoeff() <= mult_tol) {
            QpSolution out;
            out.x = std::move(x);
            out.multipliers = Eigen::VectorXd::Zero(m);
            for (std::size_t j = 0; j < active.size(); ++j) out.multipliers[active[j]] = lambda[static_cast<Eigen::Index>(j)];
            out.objective = p.objective(out.x);
            out.iterations = iter + 1;
            return out;
        }

        const Eigen::VectorXd direction = -residual;
        const double curvature = direction.dot(p.Q * direction);
        const double exact = curvature > 0.0 ? -gradient.dot(direction) / curvature : std::numeric_limits<double>::infinity();
        const RatioTest rt = ratio_test(p, x, direction, exact, in_active);
        if (!std::isfinite(rt.alpha)) throw Error(ErrorCode::InvalidArgument, "quadratic program is unbounded below");
        x += rt.alpha * direction;

        std::fill(in_working.begin(), in_working.end(), 0);
        working.clear();
        for (std::size_t j = 0; j < active.size(); ++j) {
            if (lambda[static_cast<Eigen::Index>(j)] > 0.0) {
                working.push_back(active[j]);
                in_working[static_cast<std::size_t>(active[j])] = 1;
            }
        }
        if (rt.blocking >= 0) {
            working.push_back(rt.blocking);
            in_working[static_cast<std::size_t>(rt.blocking)] = 1;
        }
        at_subspace_minimum = false;
    }
    throw Error(ErrorCode::MaxIterations,
                "active-set solver exceeded " + std::to_string(max_iterations) + " iterations");
}

double max_violation(const QuadProgram& p, const Eigen::VectorXd& x) {
    if (p.b.size() == 0) return 0.0;
    return (p.A * x - p.b).maxCoeff();
}

// Phase 1: minimize s subject to A x - s <= b and s >= -1, started from
// (x0, max violation). The vertex it ends on is feasible to rounding.
Eigen::VectorXd find_feasible_point(const QuadProgram& p, const Eigen::VectorXd& x0, double tol) {
    const Eigen::Index n = p.c.size();
    const Eigen::Index m = p.b.size();
    QuadProgram phase1;
    phase1.Q = Eigen::MatrixXd::Zero(n + 1, n + 1);
    phase1.c = Eigen::VectorXd::Zero(n + 1);
    phase1.c[n] = 1.0;
    phase1.A = Eigen::MatrixXd::Zero(m + 1, n + 1);
    phase1.A.topLeftCorner(m, n) = p.A;
    phase1.A.col(n).head(m).setConstant(-1.0);
    phase1.A(m, n) = -1.0;
    phase1.b.resize(m + 1);
    phase1.b.head(m) = p.b;
    phase1.b[m] = 1.0;

    Eigen::VectorXd z(n + 1);
    z.head(n) = x0;
    z[n] = std::max(0.0, max_violation(p, x0));
    const QpSolution sol = active_set(phase1, z, tol);
    if (sol.x[n] > tol) {
        throw Error(ErrorCode::Infeasible, "no feasible point; minimum violation " + std::to_string(sol.x[n]));
    }
    return sol.x.head(n);
}

}  // namespace

QpSolution solve_qp(const QuadProgram& program, double tol, const std::optional<Eigen::VectorXd>& start) {
    program.validate();
    const Eigen::Index n = program.c.size();
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    if (start) {
        if (start->size() != n) throw Error(ErrorCode::InvalidArgument, "start point has wrong dimension");
        x0 = *start;
    }
    if (max_violation(program, x0) > tol) x0 = find_feasible_point(program, x0, tol);
    return active_set(program, std::move(x0), tol);
}

}  // namespace rankcal
