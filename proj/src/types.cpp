#include "rankcal/types.hpp"

#include <algorithm>
#include <cmath>

#include "rankcal/error.hpp"

namespace rankcal {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::MaxIterations: return "MaxIterations";
        case ErrorCode::DegenerateChannel: return "DegenerateChannel";
        case ErrorCode::NoAchromaticSample: return "NoAchromaticSample";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::DegenerateSpan: return "DegenerateSpan";
        case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::InsufficientVariety: return "InsufficientVariety";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

bool RgbTriple::finite() const {
    return std::isfinite(r) && std::isfinite(g) && std::isfinite(b);
}

bool is_saturated(const RgbTriple& raw, const RgbTriple& rendered) {
    for (int c = 0; c < 3; ++c) {
        const double jpeg = rendered[c] * 255.0;
        if (jpeg <= 0.0 || jpeg >= 255.0) return true;
        if (raw[c] >= kSaturationLevel) return true;
    }
    return false;
}

bool usable_for_estimation(const PixelPair& pair) {
    if (pair.saturated) return false;
    for (int c = 0; c < 3; ++c) {
        if (pair.raw[c] >= kSaturationLevel || pair.rendered[c] >= kSaturationLevel) return false;
    }
    return pair.raw.finite() && pair.rendered.finite();
}

PixelPairSet usable_pairs(const PixelPairSet& pairs) {
    PixelPairSet out;
    out.reserve(pairs.size());
    std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(out), usable_for_estimation);
    return out;
}

// ─── ColorMatrix ────────────────────────────────────────────────────────

ColorMatrix ColorMatrix::from_rows(const Eigen::Vector3d& r0, const Eigen::Vector3d& r1,
                                   const Eigen::Vector3d& r2) {
    Eigen::Matrix3d m;
    m.row(0) = r0.transpose();
    m.row(1) = r1.transpose();
    m.row(2) = r2.transpose();
    return ColorMatrix(m);
}

bool ColorMatrix::invertible() const {
    return std::abs(m_.determinant()) > kMinDeterminant;
}

void ColorMatrix::validate() const {
    if (!m_.allFinite()) throw Error(ErrorCode::InvalidArgument, "colour matrix has non-finite entries");
    for (int k = 0; k < 3; ++k) {
        if (m_.row(k).squaredNorm() == 0.0) {
            throw Error(ErrorCode::InvalidArgument, "colour matrix row " + std::to_string(k) + " is zero");
        }
    }
}

// ─── ToneCurve ──────────────────────────────────────────────────────────

ToneCurve ToneCurve::identity(ToneDirection direction, int channel, int degree) {
    ToneCurve curve;
    curve.coefficients.assign(static_cast<std::size_t>(degree) + 1, 0.0);
    curve.coefficients[1] = 1.0;
    curve.direction = direction;
    curve.channel = channel;
    return curve;
}

double ToneCurve::operator()(double t) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * t + *it;
    return acc;
}

double ToneCurve::derivative(double t) const {
    double acc = 0.0;
    for (std::size_t j = coefficients.size(); j-- > 1;) acc = acc * t + static_cast<double>(j) * coefficients[j];
    return acc;
}

bool ToneCurve::is_monotone(int grid, double tolerance) const {
    double prev = (*this)(0.0);
    for (int i = 1; i < grid; ++i) {
        const double cur = (*this)(static_cast<double>(i) / (grid - 1));
        if (cur < prev - tolerance) return false;
        prev = cur;
    }
    return true;
}

// ─── Lattice3 ───────────────────────────────────────────────────────────

Lattice3 Lattice3::identity(int resolution) {
    if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "lattice resolution must be >= 2");
    Lattice3 lut;
    lut.resolution = resolution;
    const std::size_t count = static_cast<std::size_t>(resolution) * resolution * resolution;
    lut.nodes.resize(count);
    for (std::size_t n = 0; n < count; ++n) lut.nodes[n] = lut.grid_position(n);
    return lut;
}

Eigen::Vector3d Lattice3::grid_position(std::size_t node) const {
    const auto r = static_cast<std::size_t>(resolution);
    const double step = 1.0 / (resolution - 1);
    return {static_cast<double>(node / (r * r)) * step,
            static_cast<double>((node / r) % r) * step,
            static_cast<double>(node % r) * step};
}

void Lattice3::validate() const {
    if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "lattice resolution must be >= 2");
    const std::size_t expected = static_cast<std::size_t>(resolution) * resolution * resolution;
    if (nodes.size() != expected) {
        throw Error(ErrorCode::InvalidArgument, "lattice has " + std::to_string(nodes.size()) +
                                                    " nodes, expected " + std::to_string(expected));
    }
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        if (!nodes[n].allFinite()) {
            throw Error(ErrorCode::InvalidArgument, "lattice node " + std::to_string(n) + " is not finite");
        }
    }
}

// ─── PipelineModel ──────────────────────────────────────────────────────

PipelineModel PipelineModel::identity(int lattice_resolution, int degree) {
    PipelineModel model;
    for (int k = 0; k < 3; ++k) {
        model.forward_tones[k] = ToneCurve::identity(ToneDirection::Forward, k, degree);
        model.inverse_tones[k] = ToneCurve::identity(ToneDirection::Inverse, k, degree);
    }
    model.forward_lut = Lattice3::identity(lattice_resolution);
    model.backward_lut = Lattice3::identity(lattice_resolution);
    model.metadata.camera_id = "identity";
    model.metadata.degree = degree;
    model.metadata.lattice_resolution = lattice_resolution;
    return model;
}

namespace {

void validate_tones(const std::array<ToneCurve, 3>& tones, ToneDirection direction, const char* name) {
    for (int k = 0; k < 3; ++k) {
        const ToneCurve& curve = tones[k];
        const std::string where = std::string(name) + "[" + std::to_string(k) + "]";
        if (curve.coefficients.size() < 2) throw Error(ErrorCode::InvalidArgument, where + " has degree < 1");
        if (curve.channel != k || curve.direction != direction) {
            throw Error(ErrorCode::InvalidArgument, where + " has mismatched channel or direction");
        }
        for (double c : curve.coefficients) {
            if (!std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, where + " has non-finite coefficient");
        }
        if (!curve.is_monotone()) throw Error(ErrorCode::InvalidArgument, where + " is not monotone");
    }
}

}  // namespace

void PipelineModel::validate() const {
    matrix.validate();
    if (!matrix.invertible()) throw Error(ErrorCode::InvalidArgument, "colour matrix is singular");
    validate_tones(forward_tones, ToneDirection::Forward, "forward_tone");
    validate_tones(inverse_tones, ToneDirection::Inverse, "inverse_tone");
    forward_lut.validate();
    backward_lut.validate();
}

std::size_t parameter_count(const PipelineModel& model) {
    std::size_t count = 9;
    for (const auto& curve : model.forward_tones) count += curve.coefficients.size();
    return count + 3 * model.forward_lut.nodes.size();
}

std::size_t backward_parameter_count(const PipelineModel& model) {
    std::size_t count = 0;
    for (const auto& curve : model.inverse_tones) count += curve.coefficients.size();
    return count + 3 * model.backward_lut.nodes.size();
}

double tone_consistency_error(const ToneCurve& forward, const ToneCurve& inverse, double min_slope) {
    double worst = 0.0;
    for (int i = 0; i < 256; ++i) {
        const double t = static_cast<double>(i) / 255.0;
        if (forward.derivative(t) < min_slope) continue;
        worst = std::max(worst, std::abs(inverse(forward(t)) - t));
    }
    return worst;
}

}  // namespace rankcal
