#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rankcal {

/// Normalized colour: raw values over the sensor white level, rendered values over 255.
struct RgbTriple {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    double operator[](int channel) const { return channel == 0 ? r : (channel == 1 ? g : b); }
    Eigen::Vector3d vec() const { return {r, g, b}; }
    static RgbTriple from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
    bool finite() const;

    friend bool operator==(const RgbTriple&, const RgbTriple&) = default;
};

struct PairTags {
    std::string camera;
    std::string illuminant;
    std::string exposure;
    std::string patch;

    friend bool operator==(const PairTags&, const PairTags&) = default;
};

struct PixelPair {
    RgbTriple raw;
    RgbTriple rendered;
    PairTags tags;
    double white_level = 1.0;  // only used to write raw values back in file units
    bool saturated = false;
};

using PixelPairSet = std::vector<PixelPair>;

// Components at or above this level are treated as clipped.
inline constexpr double kSaturationLevel = 0.995;

/// Ingestion clipping rule: any rendered component at 0 or 255, or any raw
/// component at or above 0.995 of white level.
bool is_saturated(const RgbTriple& raw, const RgbTriple& rendered);

/// True when a pair may feed matrix or tone-curve estimation.
bool usable_for_estimation(const PixelPair& pair);

PixelPairSet usable_pairs(const PixelPairSet& pairs);

class ColorMatrix {
public:
    ColorMatrix() : m_(Eigen::Matrix3d::Identity()) {}
    explicit ColorMatrix(const Eigen::Matrix3d& m) : m_(m) {}

    static ColorMatrix from_rows(const Eigen::Vector3d& r0, const Eigen::Vector3d& r1,
                                 const Eigen::Vector3d& r2);

    const Eigen::Matrix3d& matrix() const { return m_; }
    Eigen::Vector3d row(int k) const { return m_.row(k).transpose(); }
    double operator()(int r, int c) const { return m_(r, c); }

    Eigen::Vector3d apply(const Eigen::Vector3d& v) const { return m_ * v; }
    bool invertible() const;

    /// Throws InvalidArgument on zero rows or non-finite entries.
    void validate() const;

private:
    Eigen::Matrix3d m_;
};

inline constexpr double kMinDeterminant = 1e-8;

enum class ToneDirection { Forward, Inverse };

/// Power-basis polynomial over [0, 1]; coefficients[j] multiplies t^j.
struct ToneCurve {
    std::vector<double> coefficients;
    ToneDirection direction = ToneDirection::Forward;
    int channel = 0;

    static ToneCurve identity(ToneDirection direction, int channel, int degree = 7);

    double operator()(double t) const;
    double derivative(double t) const;
    int degree() const { return static_cast<int>(coefficients.size()) - 1; }

    /// Non-decreasing on a uniform grid: f(t[i+1]) >= f(t[i]) - tolerance.
    bool is_monotone(int grid = 1024, double tolerance = 1e-9) const;
};

/// Regular resolution^3 grid of RGB nodes over the unit cube.
/// Node (i, j, k) sits at (i, j, k) / (resolution - 1) and is stored at (i * R + j) * R + k.
struct Lattice3 {
    int resolution = 5;
    std::vector<Eigen::Vector3d> nodes;

    static Lattice3 identity(int resolution = 5);

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * resolution + j) * resolution + k;
    }
    Eigen::Vector3d grid_position(std::size_t node) const;
    void validate() const;
};

struct ModelMetadata {
    std::string camera_id = "unknown";
    std::size_t sample_count = 0;
    std::uint64_t seed = 0;
    int sphere_points = 100000;
    int trials = 25;
    int max_colors = 50;
    int degree = 7;
    double lambda = 1e-5;
    int constraint_grid = 257;
    int lattice_resolution = 5;
    double lattice_mu = 1e-3;
};

struct PipelineModel {
    ColorMatrix matrix;
    std::array<ToneCurve, 3> forward_tones;
    Lattice3 forward_lut;
    std::array<ToneCurve, 3> inverse_tones;
    Lattice3 backward_lut;
    ModelMetadata metadata;

    static PipelineModel identity(int lattice_resolution = 5, int degree = 7);

    /// Structural checks: finite values, matching sizes, monotone tone curves,
    /// invertible matrix. Throws InvalidArgument naming the offending part.
    void validate() const;
};

/// Matrix + forward tone curves + forward LUT scalars (408 for the default model).
std::size_t parameter_count(const PipelineModel& model);

/// Inverse tone curves + backward LUT; the matrix is shared with the forward model.
std::size_t backward_parameter_count(const PipelineModel& model);

/// max |inv(fwd(t)) - t| over a 256-point grid, restricted to points where the
/// forward slope is at least min_slope.
double tone_consistency_error(const ToneCurve& forward, const ToneCurve& inverse,
                              double min_slope = 0.05);

}  // namespace rankcal
