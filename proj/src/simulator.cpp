#include "rankcal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rankcal/error.hpp"
#include "rankcal/model_io.hpp"

namespace rankcal {

double ToneSpec::operator()(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    switch (family) {
        case ToneFamily::Gamma:
            return std::pow(x, parameter);
        case ToneFamily::Srgb:
            return x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
        case ToneFamily::Filmic: {
            const double u = std::pow(x, 1.0 / 2.2);
            const double a = std::pow(u, parameter);
            const double b = std::pow(1.0 - u, parameter);
            return a + b > 0.0 ? a / (a + b) : 0.0;
        }
    }
    return x;
}

Eigen::Vector3d SyntheticCamera::gamut_mapped(const Eigen::Vector3d& raw) const {
    Eigen::Vector3d v = matrix.apply(raw);
    if (gamut_mode != GamutMode::None) v = gamut.apply(v);
    v = v.cwiseMax(0.0).cwiseMin(1.0);
    if (gamut_mode == GamutMode::Warped) {
        // Vanishes on the cube faces and has slope above -1, so the cube maps into itself.
        Eigen::Vector3d warped;
        for (int k = 0; k < 3; ++k) {
            warped[k] = v[k] + kWarpAmplitude * std::sin(std::numbers::pi * v[k]) *
                                   std::sin(std::numbers::pi * v[(k + 1) % 3]);
        }
        v = warped.cwiseMax(0.0).cwiseMin(1.0);
    }
    return v;
}

std::optional<RgbTriple> SyntheticCamera::neutral_raw(double level) const {
    Eigen::Vector3d target = Eigen::Vector3d::Constant(level);
    if (gamut_mode != GamutMode::None) {
        if (std::abs(gamut.transform.determinant()) < 1e-12) return std::nullopt;
        target = gamut.transform.inverse() * (target - gamut.offset);
    }
    const Eigen::Vector3d raw = matrix.matrix().inverse() * target;
    if ((raw.array() < 0.0).any() || (raw.array() >= kSaturationLevel).any()) return std::nullopt;
    return RgbTriple::from(raw);
}

SyntheticCamera make_camera(const CameraOptions& options, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double delta = std::clamp(options.perturbation, 0.0, 0.4);

    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            if (r != c) m(r, c) = delta * unit(rng);
        }
        m.row(r) /= m.row(r).sum();
    }

    SyntheticCamera camera;
    camera.id = options.id;
    camera.matrix = ColorMatrix(m);
    camera.tone = options.tone;
    camera.gamut_mode = options.gamut;
    camera.noise_sigma = options.noise_sigma;
    camera.quantize = options.quantize;

    if (options.gamut != GamutMode::None) {
        std::vector<Eigen::Vector3d> corrected;
        constexpr int kGrid = 5;
        for (int i = 0; i < kGrid; ++i) {
            for (int j = 0; j < kGrid; ++j) {
                for (int k = 0; k < kGrid; ++k) {
                    const Eigen::Vector3d raw(i / (kGrid - 1.0), j / (kGrid - 1.0), k / (kGrid - 1.0));
                    corrected.push_back(m * raw);
                }
            }
        }
        camera.gamut = solve_affine_gamut(corrected);
    }
    return camera;
}

RgbTriple render(const SyntheticCamera& camera, const RgbTriple& raw) {
    const Eigen::Vector3d v = camera.gamut_mapped(raw.vec());
    return {camera.tone(v[0]), camera.tone(v[1]), camera.tone(v[2])};
}

RgbTriple render(const SyntheticCamera& camera, const RgbTriple& raw, std::mt19937_64& noise_rng) {
    Eigen::Vector3d out = render(camera, raw).vec();
    if (camera.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, camera.noise_sigma);
        for (int k = 0; k < 3; ++k) out[k] += noise(noise_rng);
    }
    out = out.cwiseMax(0.0).cwiseMin(1.0);
    if (camera.quantize) {
        for (int k = 0; k < 3; ++k) out[k] = std::round(out[k] * 255.0) / 255.0;
    }
    return RgbTriple::from(out);
}

std::vector<Eigen::Vector3d> default_illuminants(int count, std::uint64_t seed) {
    std::vector<Eigen::Vector3d> out;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> gain(0.6, 1.3);
    for (int i = 0; i < count; ++i) {
        if (i == 0) {
            out.emplace_back(1.0, 1.0, 1.0);
        } else {
            const double r = gain(rng);
            const double g = gain(rng);
            const double b = gain(rng);
            out.emplace_back(r, g, b);
        }
    }
    return out;
}

std::vector<double> default_exposures(int count) {
    std::vector<double> out;
    for (int j = 0; j < count; ++j) out.push_back(std::pow(2.0, -0.25 * j));
    return out;
}

namespace {

// Nearest value that survives the corpus encoding (times 255 on write, divided by
// 255 on read) unchanged, so written corpora load back bit for bit.
double corpus_exact(double v) {
    for (int i = 0; i < 4; ++i) {
        const double back = (v * 255.0) / 255.0;
        if (back == v) break;
        v = back;
    }
    return v;
}

PixelPair make_pair(const SyntheticCamera& camera, const Eigen::Vector3d& raw, std::mt19937_64& noise_rng,
                    PairTags tags) {
    PixelPair p;
    p.raw = RgbTriple::from(raw.cwiseMax(0.0).cwiseMin(1.0));
    const RgbTriple rendered = render(camera, p.raw, noise_rng);
    p.rendered = {corpus_exact(rendered.r), corpus_exact(rendered.g), corpus_exact(rendered.b)};
    p.tags = std::move(tags);
    p.saturated = is_saturated(p.raw, p.rendered);
    return p;
}

}  // namespace

PixelPairSet make_corpus(const SyntheticCamera& camera, int n_patches, std::span<const Eigen::Vector3d> illuminants,
                         std::span<const double> exposures, std::uint64_t seed) {
    if (n_patches < 1) throw Error(ErrorCode::InvalidArgument, "n_patches must be >= 1");
    if (illuminants.empty() || exposures.empty()) {
        throw Error(ErrorCode::InvalidArgument, "need at least one illuminant and one exposure");
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> reflectance(0.03, 0.92);
    const int greys = (n_patches + 9) / 10;
    std::vector<Eigen::Vector3d> patches;
    patches.reserve(static_cast<std::size_t>(n_patches));
    for (int i = 0; i < n_patches; ++i) {
        Eigen::Vector3d patch;
        patch.x() = reflectance(rng);
        patch.y() = reflectance(rng);
        patch.z() = reflectance(rng);
        if (i % 10 == 0) {
            const int step = i / 10;
            const double level = greys > 1 ? 0.15 + 0.7 * step / (greys - 1.0) : 0.5;
            if (const auto grey = camera.neutral_raw(level)) patch = grey->vec();
        }
        patches.push_back(patch);
    }

    std::mt19937_64 noise_rng(seed ^ 0xd1b54a32d192ed03ULL);
    PixelPairSet out;
    out.reserve(patches.size() * illuminants.size() * exposures.size());
    for (std::size_t il = 0; il < illuminants.size(); ++il) {
        for (std::size_t ex = 0; ex < exposures.size(); ++ex) {
            for (std::size_t pi = 0; pi < patches.size(); ++pi) {
                const Eigen::Vector3d raw = illuminants[il].cwiseProduct(patches[pi]) * exposures[ex];
                out.push_back(make_pair(camera, raw, noise_rng,
                                        {camera.id, std::to_string(il), std::to_string(ex), std::to_string(pi)}));
            }
        }
    }
    return out;
}

PixelPairSet make_image(const SyntheticCamera& camera, int width, int height, std::uint64_t seed) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> reflectance(0.03, 0.92);

    constexpr int kTilesX = 12;
    constexpr int kTilesY = 8;
    std::vector<Eigen::Vector3d> tiles(kTilesX * kTilesY);
    for (auto& t : tiles) {
        t.x() = reflectance(rng);
        t.y() = reflectance(rng);
        t.z() = reflectance(rng);
    }

    const int ramp_top = height - std::max(1, height / 6);
    std::mt19937_64 noise_rng(seed ^ 0xd1b54a32d192ed03ULL);
    PixelPairSet out;
    out.reserve(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            Eigen::Vector3d raw;
            if (y >= ramp_top) {
                const double level = 0.1 + 0.8 * (width > 1 ? x / (width - 1.0) : 0.5);
                const auto grey = camera.neutral_raw(level);
                raw = grey ? grey->vec() : Eigen::Vector3d::Constant(level * level);
            } else {
                const int tx = std::min(kTilesX - 1, x * kTilesX / width);
                const int ty = std::min(kTilesY - 1, y * kTilesY / std::max(1, ramp_top));
                // Smooth illumination falloff across each tile.
                const double fx = (x + 0.5) / width - 0.5;
                const double fy = (y + 0.5) / height - 0.5;
                const double shade = 1.0 - 0.6 * (fx * fx + fy * fy);
                raw = tiles[static_cast<std::size_t>(ty * kTilesX + tx)] * shade;
            }
            const std::size_t index = static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                                      static_cast<std::size_t>(x);
            out.push_back(make_pair(camera, raw, noise_rng, {camera.id, "0", "0", std::to_string(index)}));
        }
    }
    return out;
}

std::string describe_camera(const SyntheticCamera& camera) {
    std::ostringstream out;
    auto put = [&out](const std::string& key, const std::string& value) { out << key << " = " << value << '\n'; };
    put("format.name", "rankcal-camera");
    put("format.version", "1");
    put("camera.id", camera.id);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) put("camera.m" + std::to_string(r) + std::to_string(c), format_scalar(camera.matrix(r, c)));
    }
    static constexpr const char* kFamilies[] = {"gamma", "srgb", "filmic"};
    put("camera.tone.family", kFamilies[static_cast<int>(camera.tone.family)]);
    put("camera.tone.parameter", format_scalar(camera.tone.parameter));
    static constexpr const char* kModes[] = {"none", "affine", "warped"};
    put("camera.gamut.mode", kModes[static_cast<int>(camera.gamut_mode)]);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            put("camera.gamut.t" + std::to_string(r) + std::to_string(c), format_scalar(camera.gamut.transform(r, c)));
        }
    }
    for (int r = 0; r < 3; ++r) put("camera.gamut.o" + std::to_string(r), format_scalar(camera.gamut.offset[r]));
    put("camera.noise_sigma", format_scalar(camera.noise_sigma));
    put("camera.quantize", camera.quantize ? "1" : "0");
    return out.str();
}

}  // namespace rankcal
