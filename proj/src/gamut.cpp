#include "rankcal/gamut.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankcal/error.hpp"
#include "rankcal/qp.hpp"

namespace rankcal {

AffineGamutMap solve_affine_gamut(std::span<const Eigen::Vector3d> points) {
    const auto n = static_cast<Eigen::Index>(points.size());
    if (n < 4) throw Error(ErrorCode::DegenerateGeometry, "affine gamut map needs at least 4 points");
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : points) {
        if (!p.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite gamut point");
        mean += p;
    }
    mean /= static_cast<double>(n);
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto& p : points) scatter += (p - mean) * (p - mean).transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues()[0] <= 1e-18 * std::max(1.0, eig.eigenvalues()[2])) {
        throw Error(ErrorCode::DegenerateGeometry, "gamut points are coplanar");
    }

    // Output channel c depends only on row c of T and o_c, in both the objective and
    // the box constraints, so the 12-unknown program splits into three 4-unknown ones.
    Eigen::MatrixXd design(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) design.row(i) << points[i].x(), points[i].y(), points[i].z(), 1.0;
    const Eigen::MatrixXd gram = 2.0 * design.transpose() * design;

    AffineGamutMap map;
    for (int c = 0; c < 3; ++c) {
        QuadProgram qp;
        qp.Q = gram;
        Eigen::VectorXd target(n);
        for (Eigen::Index i = 0; i < n; ++i) target[i] = points[i][c];
        qp.c = -2.0 * design.transpose() * target;
        qp.A.resize(2 * n, 4);
        qp.A.topRows(n) = design;
        qp.A.bottomRows(n) = -design;
        qp.b.resize(2 * n);
        qp.b.head(n).setOnes();
        qp.b.tail(n).setZero();

        Eigen::VectorXd start = Eigen::VectorXd::Zero(4);
        start[3] = 0.5;  // T = 0, o = 1/2 is always feasible
        const QpSolution sol = solve_qp(qp, kDefaultQpTolerance, start);
        map.transform.row(c) = sol.x.head(3).transpose();
        map.offset[c] = sol.x[3];
    }
    return map;
}

double affine_gamut_objective(const AffineGamutMap& map, std::span<const Eigen::Vector3d> points) {
    double total = 0.0;
    for (const auto& p : points) total += (map.apply(p) - p).squaredNorm();
    return total;
}

TrilinearWeights trilinear_weights(int resolution, const Eigen::Vector3d& v) {
    const int cells = resolution - 1;
    std::array<int, 3> base{};
    std::array<double, 3> frac{};
    for (int a = 0; a < 3; ++a) {
        const double u = std::clamp(v[a], 0.0, 1.0) * cells;
        base[a] = std::min(static_cast<int>(std::floor(u)), cells - 1);
        frac[a] = u - base[a];
    }
    TrilinearWeights w;
    const auto r = static_cast<std::size_t>(resolution);
    for (int corner = 0; corner < 8; ++corner) {
        const int di = (corner >> 2) & 1;
        const int dj = (corner >> 1) & 1;
        const int dk = corner & 1;
        w.nodes[corner] = (static_cast<std::size_t>(base[0] + di) * r + static_cast<std::size_t>(base[1] + dj)) * r +
                          static_cast<std::size_t>(base[2] + dk);
        w.weights[corner] = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                            (dk ? frac[2] : 1.0 - frac[2]);
    }
    return w;
}

RgbTriple apply_lattice(const Lattice3& lut, const Eigen::Vector3d& v) {
    const TrilinearWeights w = trilinear_weights(lut.resolution, v);
    Eigen::Vector3d out = Eigen::Vector3d::Zero();
    for (int corner = 0; corner < 8; ++corner) out += w.weights[corner] * lut.nodes[w.nodes[corner]];
    return RgbTriple::from(out);
}

namespace {

std::size_t cell_of(int resolution, const Eigen::Vector3d& v) {
    const int cells = resolution - 1;
    std::array<std::size_t, 3> idx{};
    for (int a = 0; a < 3; ++a) {
        idx[a] = static_cast<std::size_t>(std::min(static_cast<int>(std::floor(std::clamp(v[a], 0.0, 1.0) * cells)),
                                                   cells - 1));
    }
    const auto c = static_cast<std::size_t>(cells);
    return (idx[0] * c + idx[1]) * c + idx[2];
}

}  // namespace

Lattice3 fit_lattice(std::span<const Eigen::Vector3d> inputs, std::span<const RgbTriple> targets, int resolution,
                     double mu) {
    if (inputs.size() != targets.size()) throw Error(ErrorCode::LengthMismatch, "inputs and targets differ in length");
    if (inputs.empty()) throw Error(ErrorCode::InsufficientData, "lattice regression needs at least one sample");
    if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "lattice resolution must be >= 2");
    if (!(mu > 0.0)) throw Error(ErrorCode::InvalidArgument, "lattice regularization mu must be > 0");

    const Lattice3 identity = Lattice3::identity(resolution);
    const auto node_count = static_cast<Eigen::Index>(identity.nodes.size());
    const int cells = resolution - 1;

    // Unknowns are node offsets from the identity lattice, solved per output channel
    // against a shared normal matrix.
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(node_count, node_count);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(node_count, 3);
    std::vector<char> populated(static_cast<std::size_t>(cells * cells * cells), 0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].allFinite() || !targets[i].finite()) {
            throw Error(ErrorCode::InvalidArgument, "non-finite lattice sample " + std::to_string(i));
        }
        const TrilinearWeights w = trilinear_weights(resolution, inputs[i]);
        populated[cell_of(resolution, inputs[i])] = 1;
        const Eigen::Vector3d residual = targets[i].vec() - apply_lattice(identity, inputs[i]).vec();
        for (int a = 0; a < 8; ++a) {
            const auto na = static_cast<Eigen::Index>(w.nodes[a]);
            rhs.row(na) += w.weights[a] * residual.transpose();
            for (int b = 0; b < 8; ++b) normal(na, static_cast<Eigen::Index>(w.nodes[b])) += w.weights[a] * w.weights[b];
        }
    }

    const auto r = static_cast<std::size_t>(resolution);
    for (int i = 0; i < resolution; ++i) {
        for (int j = 0; j < resolution; ++j) {
            for (int k = 0; k < resolution; ++k) {
                const auto a = static_cast<Eigen::Index>(identity.index(i, j, k));
                const std::array<std::array<int, 3>, 3> forward{{{i + 1, j, k}, {i, j + 1, k}, {i, j, k + 1}}};
                for (const auto& nb : forward) {
                    if (nb[0] >= resolution || nb[1] >= resolution || nb[2] >= resolution) continue;
                    const auto b = static_cast<Eigen::Index>(identity.index(nb[0], nb[1], nb[2]));
                    normal(a, a) += mu;
                    normal(b, b) += mu;
                    normal(a, b) -= mu;
                    normal(b, a) -= mu;
                }
                bool touches_data = false;
                for (int ci = std::max(0, i - 1); ci <= std::min(cells - 1, i) && !touches_data; ++ci) {
                    for (int cj = std::max(0, j - 1); cj <= std::min(cells - 1, j) && !touches_data; ++cj) {
                        for (int ck = std::max(0, k - 1); ck <= std::min(cells - 1, k); ++ck) {
                            const std::size_t cell = (static_cast<std::size_t>(ci) * (r - 1) + static_cast<std::size_t>(cj)) *
                                                         (r - 1) +
                                                     static_cast<std::size_t>(ck);
                            if (populated[cell]) {
                                touches_data = true;
                                break;
                            }
                        }
                    }
                }
                if (!touches_data) normal(a, a) += mu;
            }
        }
    }

    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    const Eigen::MatrixXd offsets = ldlt.solve(rhs);

    Lattice3 lut = identity;
    for (Eigen::Index n = 0; n < node_count; ++n) lut.nodes[static_cast<std::size_t>(n)] += offsets.row(n).transpose();
    return lut;
}

}  // namespace rankcal
