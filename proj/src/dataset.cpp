#include "rankcal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <vector>

#include "rankcal/error.hpp"
#include "rankcal/model_io.hpp"

namespace rankcal {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

double parse_number(std::string_view field, std::size_t line_no, const char* column) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad " + column + " value '" +
                                               std::string(field) + "'");
    }
    return value;
}

void check_id(const std::string& id) {
    if (id.find_first_of(",\n\r") != std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "identifier '" + id + "' contains a separator");
    }
}

}  // namespace

PixelPairSet parse_corpus(std::istream& in) {
    static constexpr const char* kColumns[] = {"camera", "illuminant", "exposure", "patch", "raw_r", "raw_g",
                                               "raw_b",  "jpeg_r",     "jpeg_g",   "jpeg_b", "white_level"};
    PixelPairSet out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        if (!header_seen) {
            if (view != kCorpusHeader) {
                throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected header '" +
                                                       std::string(kCorpusHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        const auto fields = split_fields(view);
        if (fields.size() != 11) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 11 fields, found " +
                                                   std::to_string(fields.size()));
        }
        double values[11] = {};
        for (int f = 4; f < 11; ++f) values[f] = parse_number(fields[f], line_no, kColumns[f]);
        const double white = values[10];
        if (!(white > 0.0)) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": white_level must be positive");
        }
        PixelPair p;
        p.tags = {std::string(fields[0]), std::string(fields[1]), std::string(fields[2]), std::string(fields[3])};
        p.white_level = white;
        p.raw = {values[4] / white, values[5] / white, values[6] / white};
        p.rendered = {values[7] / 255.0, values[8] / 255.0, values[9] / 255.0};
        for (int c = 0; c < 3; ++c) {
            if (p.raw[c] < 0.0 || p.rendered[c] < 0.0 || p.rendered[c] > 1.0) {
                throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": value out of range");
            }
        }
        p.saturated = is_saturated(p.raw, p.rendered);
        out.push_back(std::move(p));
    }
    if (out.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no data rows");
    return out;
}

PixelPairSet load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open corpus '" + path.string() + "'");
    return parse_corpus(in);
}

void write_corpus(std::ostream& out, const PixelPairSet& pairs) {
    out << kCorpusHeader << '\n';
    for (const PixelPair& p : pairs) {
        check_id(p.tags.camera);
        check_id(p.tags.illuminant);
        check_id(p.tags.exposure);
        check_id(p.tags.patch);
        out << p.tags.camera << ',' << p.tags.illuminant << ',' << p.tags.exposure << ',' << p.tags.patch;
        for (int c = 0; c < 3; ++c) out << ',' << format_scalar(p.raw[c] * p.white_level);
        for (int c = 0; c < 3; ++c) out << ',' << format_scalar(p.rendered[c] * 255.0);
        out << ',' << format_scalar(p.white_level) << '\n';
    }
}

void save_corpus(const std::filesystem::path& path, const PixelPairSet& pairs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    write_corpus(out, pairs);
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

// ─── Subsets ────────────────────────────────────────────────────────────

SubsetSpec SubsetSpec::all() { return {}; }

SubsetSpec SubsetSpec::uniform(std::size_t k, std::uint64_t seed) {
    SubsetSpec s;
    s.kind = Kind::Uniform;
    s.count = k;
    s.seed = seed;
    return s;
}

SubsetSpec SubsetSpec::exposures_illuminants(int n_exposures, int n_illuminants, std::uint64_t seed) {
    SubsetSpec s;
    s.kind = Kind::ExposuresIlluminants;
    s.exposures = n_exposures;
    s.illuminants = n_illuminants;
    s.seed = seed;
    return s;
}

SubsetSpec SubsetSpec::parse(std::string_view text, std::uint64_t seed) {
    auto bad = [&text]() { return Error(ErrorCode::InvalidArgument, "bad subset spec '" + std::string(text) + "'"); };
    auto read_int = [&bad](std::string_view s) {
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || v < 1) throw bad();
        return v;
    };
    text = trim(text);
    if (text == "all") return all();
    if (text.starts_with("uniform:")) {
        return uniform(static_cast<std::size_t>(read_int(text.substr(8))), seed);
    }
    if (text.starts_with("exp:")) {
        const auto comma = text.find(',');
        if (comma == std::string_view::npos) throw bad();
        const std::string_view illu = trim(text.substr(comma + 1));
        if (!illu.starts_with("illu:")) throw bad();
        return exposures_illuminants(static_cast<int>(read_int(trim(text.substr(4, comma - 4)))),
                                     static_cast<int>(read_int(illu.substr(5))), seed);
    }
    throw bad();
}

namespace {

std::vector<std::string> draw_ids(const std::set<std::string>& available, int count, std::mt19937_64& rng,
                                  const char* what) {
    if (count < 1 || static_cast<std::size_t>(count) > available.size()) {
        throw Error(ErrorCode::InsufficientVariety, "requested " + std::to_string(count) + " " + what + " ids, corpus has " +
                                                        std::to_string(available.size()));
    }
    std::vector<std::string> ids(available.begin(), available.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(static_cast<std::size_t>(count));
    return ids;
}

}  // namespace

PixelPairSet select_subset(const PixelPairSet& corpus, const SubsetSpec& spec) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot subset an empty corpus");
    std::mt19937_64 rng(spec.seed);
    switch (spec.kind) {
        case SubsetSpec::Kind::All:
            return corpus;
        case SubsetSpec::Kind::Uniform: {
            if (spec.count < 1 || spec.count > corpus.size()) {
                throw Error(ErrorCode::InsufficientVariety, "requested " + std::to_string(spec.count) +
                                                                " entries from a corpus of " +
                                                                std::to_string(corpus.size()));
            }
            std::vector<std::size_t> order(corpus.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            PixelPairSet out;
            out.reserve(spec.count);
            for (std::size_t i = 0; i < spec.count; ++i) out.push_back(corpus[order[i]]);
            return out;
        }
        case SubsetSpec::Kind::ExposuresIlluminants: {
            std::set<std::string> exposures, illuminants;
            for (const PixelPair& p : corpus) {
                exposures.insert(p.tags.exposure);
                illuminants.insert(p.tags.illuminant);
            }
            const auto exp_ids = draw_ids(exposures, spec.exposures, rng, "exposure");
            const auto illu_ids = draw_ids(illuminants, spec.illuminants, rng, "illuminant");
            const std::set<std::string> exp_set(exp_ids.begin(), exp_ids.end());
            const std::set<std::string> illu_set(illu_ids.begin(), illu_ids.end());
            PixelPairSet out;
            for (const PixelPair& p : corpus) {
                if (exp_set.contains(p.tags.exposure) && illu_set.contains(p.tags.illuminant)) out.push_back(p);
            }
            return out;
        }
    }
    return corpus;
}

double rmse(std::span<const RgbTriple> predictions, std::span<const RgbTriple> truth, RmseDomain domain) {
    if (predictions.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                   std::to_string(truth.size()) + " truth values");
    }
    if (predictions.empty()) throw Error(ErrorCode::InvalidArgument, "rmse of an empty set");
    const double scale = domain == RmseDomain::Rendered255 ? 255.0 : 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const double e = (predictions[i][c] - truth[i][c]) * scale;
            sum += e * e;
        }
    }
    return std::sqrt(sum / (3.0 * static_cast<double>(predictions.size())));
}

std::vector<double> per_sample_rmse(std::span<const RgbTriple> predictions, std::span<const RgbTriple> truth,
                                    RmseDomain domain) {
    if (predictions.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                   std::to_string(truth.size()) + " truth values");
    }
    std::vector<double> out;
    out.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) out.push_back(rmse({&predictions[i], 1}, {&truth[i], 1}, domain));
    return out;
}

ErrorMap make_error_map(std::span<const double> errors, int width, int height) {
    if (width < 1 || height < 1 ||
        static_cast<std::size_t>(width) * static_cast<std::size_t>(height) != errors.size()) {
        throw Error(ErrorCode::InvalidArgument, "error map " + std::to_string(width) + "x" + std::to_string(height) +
                                                    " does not match " + std::to_string(errors.size()) + " rows");
    }
    ErrorMap map;
    map.width = width;
    map.height = height;
    const double peak = *std::max_element(errors.begin(), errors.end());
    map.scale = peak > 0.0 ? peak : 1.0;
    map.grey.reserve(errors.size());
    for (const double e : errors) {
        map.grey.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(e / map.scale, 0.0, 1.0) * 255.0)));
    }
    return map;
}

void write_ppm(const std::filesystem::path& path, const ErrorMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out << "P6\n" << map.width << ' ' << map.height << "\n255\n";
    for (const std::uint8_t g : map.grey) {
        const char px[3] = {static_cast<char>(g), static_cast<char>(g), static_cast<char>(g)};
        out.write(px, 3);
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

}  // namespace rankcal
