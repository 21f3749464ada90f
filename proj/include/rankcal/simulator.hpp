#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rankcal/gamut.hpp"
#include "rankcal/types.hpp"

namespace rankcal {

enum class ToneFamily { Gamma, Srgb, Filmic };

/// Strictly increasing curve on [0, 1] with f(0) = 0 and f(1) = 1.
struct ToneSpec {
    ToneFamily family = ToneFamily::Gamma;
    double parameter = 1.0 / 2.2;  // exponent for Gamma, contrast for Filmic, unused for Srgb

    double operator()(double x) const;
};

enum class GamutMode { None, Affine, Warped };

// Peak magnitude of the smooth warp added on top of the affine map in Warped mode.
inline constexpr double kWarpAmplitude = 0.02;

struct SyntheticCamera {
    std::string id = "synthetic";
    ColorMatrix matrix;
    ToneSpec tone;
    GamutMode gamut_mode = GamutMode::None;
    AffineGamutMap gamut;
    double noise_sigma = 0.0;  // rendered-domain Gaussian noise
    bool quantize = false;     // round rendered values to 1/255 steps

    /// Colour-corrected value after gamut mapping, clamped to the cube.
    Eigen::Vector3d gamut_mapped(const Eigen::Vector3d& raw) const;

    /// Raw triple rendered as (level, level, level), if it lies inside the raw cube.
    std::optional<RgbTriple> neutral_raw(double level) const;
};

struct CameraOptions {
    std::string id = "synthetic";
    double perturbation = 0.3;  // off-diagonal scale, clamped to [0, 0.4]
    ToneSpec tone;
    GamutMode gamut = GamutMode::None;
    double noise_sigma = 0.0;
    bool quantize = false;
};

/// Row-sum-normalized, diagonally dominant matrix; the affine gamut map is solved
/// over a 5x5x5 raw grid so every raw in the unit cube maps inside the cube.
SyntheticCamera make_camera(const CameraOptions& options, std::uint64_t seed);

/// Noise-free rendering f(gamut(M raw)).
RgbTriple render(const SyntheticCamera& camera, const RgbTriple& raw);

/// Rendering with the camera's noise and quantization applied.
RgbTriple render(const SyntheticCamera& camera, const RgbTriple& raw, std::mt19937_64& noise_rng);

/// Illuminant 0 is neutral; the rest are seeded diagonal gains in [0.6, 1.3].
std::vector<Eigen::Vector3d> default_illuminants(int count, std::uint64_t seed);

/// Exposure j is a gain of 2^(-j/4).
std::vector<double> default_exposures(int count);

/// Every patch under every illuminant and exposure. One patch in ten is a grey that
/// the camera renders neutral under the reference illuminant.
PixelPairSet make_corpus(const SyntheticCamera& camera, int n_patches, std::span<const Eigen::Vector3d> illuminants,
                         std::span<const double> exposures, std::uint64_t seed);

/// Single synthetic image, row-major: shaded colour tiles above a neutral ramp.
PixelPairSet make_image(const SyntheticCamera& camera, int width, int height, std::uint64_t seed);

/// Keyed text description of the camera, written next to simulated corpora.
std::string describe_camera(const SyntheticCamera& camera);

}  // namespace rankcal
