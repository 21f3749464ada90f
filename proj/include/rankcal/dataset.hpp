#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rankcal/types.hpp"

namespace rankcal {

inline constexpr std::string_view kCorpusHeader =
    "camera,illuminant,exposure,patch,raw_r,raw_g,raw_b,jpeg_r,jpeg_g,jpeg_b,white_level";

/// Raw columns are divided by white_level and jpeg columns by 255. Blank lines and
/// lines starting with '#' are skipped. Throws ParseError with the line number,
/// or EmptyCorpus.
PixelPairSet parse_corpus(std::istream& in);
PixelPairSet load_corpus(const std::filesystem::path& path);

/// Writes raw values scaled back by each pair's white level, 17 significant digits.
void write_corpus(std::ostream& out, const PixelPairSet& pairs);
void save_corpus(const std::filesystem::path& path, const PixelPairSet& pairs);

struct SubsetSpec {
    enum class Kind { All, Uniform, ExposuresIlluminants };
    Kind kind = Kind::All;
    std::size_t count = 0;  // Uniform
    int exposures = 1;      // ExposuresIlluminants
    int illuminants = 1;
    std::uint64_t seed = 0;

    static SubsetSpec all();
    static SubsetSpec uniform(std::size_t k, std::uint64_t seed);
    static SubsetSpec exposures_illuminants(int n_exposures, int n_illuminants, std::uint64_t seed);

    /// "all", "uniform:8000" or "exp:10,illu:1".
    static SubsetSpec parse(std::string_view text, std::uint64_t seed);
};

/// Uniform draws without replacement in drawn order; the exposure/illuminant form
/// draws the requested ids and keeps every entry matching both. Throws
/// InsufficientVariety when more items or ids are requested than exist.
PixelPairSet select_subset(const PixelPairSet& corpus, const SubsetSpec& spec);

enum class RmseDomain { Rendered255, Raw01 };

/// sqrt of the mean squared error over all samples and channels, scaled by 255 in
/// the rendered domain.
double rmse(std::span<const RgbTriple> predictions, std::span<const RgbTriple> truth, RmseDomain domain);

/// Per-sample RMSE over the three channels, in the domain's units.
std::vector<double> per_sample_rmse(std::span<const RgbTriple> predictions, std::span<const RgbTriple> truth,
                                    RmseDomain domain);

struct ErrorMap {
    int width = 0;
    int height = 0;
    double scale = 0.0;                 // error mapped to full white
    std::vector<std::uint8_t> grey;     // row-major, one byte per pixel
};

/// Linear grey ramp from 0 to the largest error (or 1 when every error is zero).
/// Throws InvalidArgument when width * height differs from the number of errors.
ErrorMap make_error_map(std::span<const double> errors, int width, int height);

/// Binary P6 with equal RGB channels.
void write_ppm(const std::filesystem::path& path, const ErrorMap& map);

}  // namespace rankcal
