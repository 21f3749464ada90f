#include "rankcal/model_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rankcal/error.hpp"

namespace rankcal {

std::string format_scalar(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

constexpr std::string_view kFormatName = "rankcal-pipeline";
constexpr const char* kChannelNames[3] = {"r", "g", "b"};

class Writer {
public:
    void put(const std::string& key, const std::string& value) { out_ << key << " = " << value << '\n'; }
    void put(const std::string& key, double value) { put(key, format_scalar(value)); }
    void put_int(const std::string& key, long long value) { put(key, std::to_string(value)); }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

std::string sanitize_id(const std::string& id) {
    std::string out = id;
    for (char& ch : out) {
        if (ch == '\n' || ch == '\r') ch = '_';
    }
    return out.empty() ? "unknown" : out;
}

void write_tones(Writer& w, const std::string& section, const std::array<ToneCurve, 3>& tones) {
    for (int k = 0; k < 3; ++k) {
        const std::string prefix = section + "." + std::to_string(k) + ".";
        w.put_int(prefix + "degree", tones[k].degree());
        for (std::size_t j = 0; j < tones[k].coefficients.size(); ++j) {
            w.put(prefix + "c" + std::to_string(j), tones[k].coefficients[j]);
        }
    }
}

void write_lattice(Writer& w, const std::string& section, const Lattice3& lut) {
    w.put_int(section + ".resolution", lut.resolution);
    for (std::size_t n = 0; n < lut.nodes.size(); ++n) {
        const std::string prefix = section + ".node." + std::to_string(n) + ".";
        for (int c = 0; c < 3; ++c) w.put(prefix + kChannelNames[c], lut.nodes[n][c]);
    }
}

// ─── Parsing ────────────────────────────────────────────────────────────

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

class KeyedDocument {
public:
    explicit KeyedDocument(std::string_view text) {
        std::size_t line_no = 0;
        while (!text.empty()) {
            const auto eol = text.find('\n');
            std::string_view line = text.substr(0, eol);
            text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
            ++line_no;
            line = trim(line);
            if (line.empty() || line.front() == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 'key = value'");
            }
            std::string key(trim(line.substr(0, eq)));
            if (key.empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty key");
            if (!entries_.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
                throw Error(ErrorCode::ParseError, key + ": duplicate key");
            }
        }
    }

    const std::string& text(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw Error(ErrorCode::ParseError, key + ": missing field");
        used_.emplace(key, true);
        return it->second;
    }

    double real(const std::string& key) {
        const std::string& value = text(key);
        double out = 0.0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
        if (ec != std::errc{} || ptr != value.data() + value.size()) {
            throw Error(ErrorCode::ParseError, key + ": malformed number '" + value + "'");
        }
        if (!std::isfinite(out)) throw Error(ErrorCode::ParseError, key + ": non-finite value");
        return out;
    }

    long long integer(const std::string& key) {
        const std::string& value = text(key);
        long long out = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
        if (ec != std::errc{} || ptr != value.data() + value.size()) {
            throw Error(ErrorCode::ParseError, key + ": malformed integer '" + value + "'");
        }
        return out;
    }

    std::size_t count_prefix(const std::string& prefix) const {
        std::size_t n = 0;
        for (auto it = entries_.lower_bound(prefix); it != entries_.end() && it->first.starts_with(prefix); ++it) ++n;
        return n;
    }

    void reject_unused() const {
        for (const auto& [key, value] : entries_) {
            if (!used_.contains(key)) throw Error(ErrorCode::ParseError, key + ": unknown field");
        }
    }

private:
    std::map<std::string, std::string> entries_;
    std::map<std::string, bool> used_;
};

std::array<ToneCurve, 3> read_tones(KeyedDocument& doc, const std::string& section, ToneDirection direction) {
    std::array<ToneCurve, 3> tones;
    for (int k = 0; k < 3; ++k) {
        const std::string prefix = section + "." + std::to_string(k) + ".";
        const long long degree = doc.integer(prefix + "degree");
        if (degree < 1 || degree > 20) throw Error(ErrorCode::ParseError, prefix + "degree: out of range");
        tones[k].direction = direction;
        tones[k].channel = k;
        tones[k].coefficients.resize(static_cast<std::size_t>(degree) + 1);
        for (std::size_t j = 0; j < tones[k].coefficients.size(); ++j) {
            tones[k].coefficients[j] = doc.real(prefix + "c" + std::to_string(j));
        }
        if (!tones[k].is_monotone()) throw Error(ErrorCode::ParseError, prefix + "c0: tone curve is not monotone");
    }
    return tones;
}

Lattice3 read_lattice(KeyedDocument& doc, const std::string& section) {
    Lattice3 lut;
    const long long res = doc.integer(section + ".resolution");
    if (res < 2 || res > 64) throw Error(ErrorCode::ParseError, section + ".resolution: out of range");
    lut.resolution = static_cast<int>(res);
    const std::size_t count = static_cast<std::size_t>(res * res * res);
    const std::size_t found = doc.count_prefix(section + ".node.");
    if (found != 3 * count) {
        throw Error(ErrorCode::ParseError, section + ".node: found " + std::to_string(found) + " scalars, expected " +
                                               std::to_string(3 * count));
    }
    lut.nodes.resize(count);
    for (std::size_t n = 0; n < count; ++n) {
        const std::string prefix = section + ".node." + std::to_string(n) + ".";
        for (int c = 0; c < 3; ++c) lut.nodes[n][c] = doc.real(prefix + kChannelNames[c]);
    }
    return lut;
}

}  // namespace

std::string serialize_model(const PipelineModel& model) {
    model.validate();
    Writer w;
    const ModelMetadata& md = model.metadata;
    w.put("format.name", std::string(kFormatName));
    w.put_int("format.version", kModelFormatVersion);
    w.put("metadata.camera_id", sanitize_id(md.camera_id));
    w.put_int("metadata.sample_count", static_cast<long long>(md.sample_count));
    w.put("metadata.seed", std::to_string(md.seed));
    w.put_int("metadata.sphere_points", md.sphere_points);
    w.put_int("metadata.trials", md.trials);
    w.put_int("metadata.max_colors", md.max_colors);
    w.put_int("metadata.degree", md.degree);
    w.put("metadata.lambda", md.lambda);
    w.put_int("metadata.constraint_grid", md.constraint_grid);
    w.put_int("metadata.lattice_resolution", md.lattice_resolution);
    w.put("metadata.lattice_mu", md.lattice_mu);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) w.put("matrix.m" + std::to_string(r) + std::to_string(c), model.matrix(r, c));
    }
    write_tones(w, "forward_tone", model.forward_tones);
    write_lattice(w, "forward_lut", model.forward_lut);
    write_tones(w, "inverse_tone", model.inverse_tones);
    write_lattice(w, "backward_lut", model.backward_lut);
    return w.str();
}

PipelineModel deserialize_model(std::string_view text) {
    KeyedDocument doc(text);
    if (doc.text("format.name") != kFormatName) throw Error(ErrorCode::ParseError, "format.name: unknown format");
    const long long version = doc.integer("format.version");
    if (version != kModelFormatVersion) {
        throw Error(ErrorCode::ParseError, "format.version: unknown version " + std::to_string(version));
    }

    PipelineModel model;
    ModelMetadata& md = model.metadata;
    md.camera_id = doc.text("metadata.camera_id");
    md.sample_count = static_cast<std::size_t>(doc.integer("metadata.sample_count"));
    {
        const std::string& seed = doc.text("metadata.seed");
        const auto [ptr, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), md.seed);
        if (ec != std::errc{} || ptr != seed.data() + seed.size()) {
            throw Error(ErrorCode::ParseError, "metadata.seed: malformed integer '" + seed + "'");
        }
    }
    md.sphere_points = static_cast<int>(doc.integer("metadata.sphere_points"));
    md.trials = static_cast<int>(doc.integer("metadata.trials"));
    md.max_colors = static_cast<int>(doc.integer("metadata.max_colors"));
    md.degree = static_cast<int>(doc.integer("metadata.degree"));
    md.lambda = doc.real("metadata.lambda");
    md.constraint_grid = static_cast<int>(doc.integer("metadata.constraint_grid"));
    md.lattice_resolution = static_cast<int>(doc.integer("metadata.lattice_resolution"));
    md.lattice_mu = doc.real("metadata.lattice_mu");

    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m(r, c) = doc.real("matrix.m" + std::to_string(r) + std::to_string(c));
    }
    model.matrix = ColorMatrix(m);
    model.forward_tones = read_tones(doc, "forward_tone", ToneDirection::Forward);
    model.forward_lut = read_lattice(doc, "forward_lut");
    model.inverse_tones = read_tones(doc, "inverse_tone", ToneDirection::Inverse);
    model.backward_lut = read_lattice(doc, "backward_lut");
    doc.reject_unused();

    if (!model.matrix.invertible()) throw Error(ErrorCode::ParseError, "matrix: singular colour matrix");
    return model;
}

void save_model(const std::filesystem::path& path, const PipelineModel& model) {
    const std::string text = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

PipelineModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open model file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace rankcal
