// rankcal command-line front end: simulate, calibrate, apply, evaluate.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rankcal/dataset.hpp"
#include "rankcal/error.hpp"
#include "rankcal/model_io.hpp"
#include "rankcal/pipeline.hpp"
#include "rankcal/simulator.hpp"

namespace {

using namespace rankcal;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct SimulateArgs {
    std::string out;
    int patches = 140;
    int illuminants = 1;
    int exposures = 1;
    double gamma = 1.0 / 2.2;
    std::string gamut = "affine";
    double noise = 0.0;
    bool quantize = false;
    double perturbation = 0.3;
    std::string camera_id = "synthetic";
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> data_seed;
};

struct CalibrateArgs {
    std::string data;
    std::string subset = "all";
    std::string out;
    std::uint64_t seed = 0;
    int sphere_points = 100000;
    int trials = 25;
};

struct ApplyArgs {
    std::string model;
    std::string direction;
    std::string in;
    std::string out;
};

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string direction;
    std::string report;
    std::string errormap;
    int width = 0;
    int height = 0;
    std::optional<double> reference;
};

std::string printf_string(const char* fmt, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, value);
    return buf;
}

GamutMode parse_gamut(const std::string& name) {
    if (name == "none") return GamutMode::None;
    if (name == "warped") return GamutMode::Warped;
    return GamutMode::Affine;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

int run_simulate(const SimulateArgs& a) {
    CameraOptions options;
    options.id = a.camera_id;
    options.perturbation = a.perturbation;
    options.tone = {ToneFamily::Gamma, a.gamma};
    options.gamut = parse_gamut(a.gamut);
    options.noise_sigma = a.noise / 255.0;
    options.quantize = a.quantize;
    const SyntheticCamera camera = make_camera(options, a.seed);
    const auto illuminants = default_illuminants(a.illuminants, a.seed);
    const auto exposures = default_exposures(a.exposures);
    const PixelPairSet corpus = make_corpus(camera, a.patches, illuminants, exposures, a.data_seed.value_or(a.seed));
    save_corpus(a.out, corpus);
    write_text(a.out + ".camera", describe_camera(camera));
    std::cerr << "wrote " << corpus.size() << " pairs to " << a.out << '\n';
    return 0;
}

int run_calibrate(const CalibrateArgs& a) {
    const PixelPairSet corpus = load_corpus(a.data);
    const PixelPairSet training = select_subset(corpus, SubsetSpec::parse(a.subset, a.seed));
    CalibrationConfig cfg;
    cfg.seed = a.seed;
    cfg.rank.sphere_points = a.sphere_points;
    cfg.rank.trials = a.trials;
    if (!training.empty()) cfg.camera_id = training.front().tags.camera;

    std::vector<StageTiming> timings;
    const PipelineModel model = calibrate(training, cfg, &timings);
    save_model(a.out, model);

    double total = 0.0;
    for (const StageTiming& t : timings) {
        std::cerr << "stage " << t.stage << ": " << printf_string("%.3f", t.seconds) << " s\n";
        total += t.seconds;
    }
    std::cerr << "total: " << printf_string("%.3f", total) << " s\n";
    std::cout << "parameters: " << parameter_count(model) << '\n';
    return 0;
}

bool is_forward(const std::string& direction) { return direction == "forward"; }

int run_apply(const ApplyArgs& a) {
    const PipelineModel model = load_model(a.model);
    const PixelPairSet rows = load_corpus(a.in);
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + a.out + "' for writing");

    const bool forward = is_forward(a.direction);
    out << kCorpusHeader << ",pred_r,pred_g,pred_b\n";
    for (const PixelPair& p : rows) {
        out << p.tags.camera << ',' << p.tags.illuminant << ',' << p.tags.exposure << ',' << p.tags.patch;
        for (int c = 0; c < 3; ++c) out << ',' << format_scalar(p.raw[c] * p.white_level);
        for (int c = 0; c < 3; ++c) out << ',' << format_scalar(p.rendered[c] * 255.0);
        out << ',' << format_scalar(p.white_level);
        const RgbTriple pred = forward ? apply_forward(model, p.raw) : apply_backward(model, p.rendered);
        const double unit = forward ? 255.0 : p.white_level;
        for (int c = 0; c < 3; ++c) out << ',' << format_scalar(pred[c] * unit);
        out << '\n';
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing '" + a.out + "'");
    return 0;
}

int run_evaluate(const EvaluateArgs& a) {
    const PipelineModel model = load_model(a.model);
    const PixelPairSet rows = load_corpus(a.data);
    const bool want_map = !a.errormap.empty();
    if (want_map && static_cast<std::size_t>(a.width) * static_cast<std::size_t>(a.height) != rows.size()) {
        throw Error(ErrorCode::InvalidArgument, "errormap " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                                                    " does not match " + std::to_string(rows.size()) + " rows");
    }

    const bool forward = is_forward(a.direction);
    const RmseDomain domain = forward ? RmseDomain::Rendered255 : RmseDomain::Raw01;
    std::vector<RgbTriple> predictions, truth;
    predictions.reserve(rows.size());
    truth.reserve(rows.size());
    for (const PixelPair& p : rows) {
        predictions.push_back(forward ? apply_forward(model, p.raw) : apply_backward(model, p.rendered));
        truth.push_back(forward ? p.rendered : p.raw);
    }
    const double error = rmse(predictions, truth, domain);

    std::string report;
    report += "direction: " + a.direction + '\n';
    report += std::string("units: ") + (forward ? "rendered 0-255" : "normalized raw") + '\n';
    report += "samples: " + std::to_string(rows.size()) + '\n';
    report += "rmse: " + printf_string("%.3f", error) + '\n';
    report += "rmse_exact: " + format_scalar(error) + '\n';
    if (a.reference) {
        const double ratio = error / *a.reference;
        report += "reference_rmse: " + printf_string("%.3f", *a.reference) + '\n';
        report += std::string("within_25_percent: ") + (std::abs(ratio - 1.0) <= 0.25 ? "yes" : "no") +
                  " (informative)\n";
    }
    if (want_map) {
        const ErrorMap map = make_error_map(per_sample_rmse(predictions, truth, domain), a.width, a.height);
        write_ppm(a.errormap, map);
        report += "errormap: " + a.errormap + '\n';
        report += "errormap_scale: grey 255 = rmse " + format_scalar(map.scale) + '\n';
    }
    write_text(a.report, report);
    std::cerr << report;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radiometric calibration from RAW/rendered pixel pairs"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Write a synthetic corpus and its camera description");
    simulate->add_option("--out", sim.out, "Output corpus CSV")->required();
    simulate->add_option("--patches", sim.patches, "Number of patches")->check(CLI::PositiveNumber);
    simulate->add_option("--illuminants", sim.illuminants, "Number of illuminants")->check(CLI::PositiveNumber);
    simulate->add_option("--exposures", sim.exposures, "Number of exposures")->check(CLI::PositiveNumber);
    simulate->add_option("--gamma", sim.gamma, "Tone curve exponent")->check(CLI::PositiveNumber);
    simulate->add_option("--gamut", sim.gamut, "Gamut mode")->check(CLI::IsMember({"none", "affine", "warped"}));
    simulate->add_option("--noise", sim.noise, "Rendered noise sigma in 0-255 units")->check(CLI::NonNegativeNumber);
    simulate->add_flag("--quantize", sim.quantize, "Round rendered values to 8 bits");
    simulate->add_option("--perturbation", sim.perturbation, "Off-diagonal matrix scale")->check(CLI::Range(0.0, 0.4));
    simulate->add_option("--camera-id", sim.camera_id, "Camera tag written to every row");
    simulate->add_option("--seed", sim.seed, "Random seed");
    simulate->add_option("--data-seed", sim.data_seed, "Seed for patches and noise, defaults to --seed");

    CalibrateArgs cal;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit a forward and backward model");
    calibrate_cmd->add_option("--data", cal.data, "Corpus CSV")->required();
    calibrate_cmd->add_option("--subset", cal.subset, "all | uniform:K | exp:E,illu:I");
    calibrate_cmd->add_option("--out", cal.out, "Output model file")->required();
    calibrate_cmd->add_option("--seed", cal.seed, "Random seed");
    calibrate_cmd->add_option("--sphere-points", cal.sphere_points, "Candidate row directions")
        ->check(CLI::PositiveNumber);
    calibrate_cmd->add_option("--trials", cal.trials, "Random colour subsets per row")->check(CLI::PositiveNumber);

    ApplyArgs app_args;
    auto* apply = app.add_subcommand("apply", "Map every row of a corpus through a model");
    apply->add_option("--model", app_args.model, "Model file")->required();
    apply->add_option("--direction", app_args.direction, "forward or backward")
        ->required()
        ->check(CLI::IsMember({"forward", "backward"}));
    apply->add_option("--in", app_args.in, "Input corpus CSV")->required();
    apply->add_option("--out", app_args.out, "Output CSV with pred_r, pred_g, pred_b")->required();

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "RMSE of a model against a corpus");
    evaluate->add_option("--model", ev.model, "Model file")->required();
    evaluate->add_option("--data", ev.data, "Corpus CSV")->required();
    evaluate->add_option("--direction", ev.direction, "forward or backward")
        ->required()
        ->check(CLI::IsMember({"forward", "backward"}));
    evaluate->add_option("--report", ev.report, "Report file")->required();
    auto* errormap = evaluate->add_option("--errormap", ev.errormap, "PPM error map, one pixel per row");
    evaluate->add_option("--width", ev.width, "Error map width")->check(CLI::PositiveNumber)->needs(errormap);
    evaluate->add_option("--height", ev.height, "Error map height")->check(CLI::PositiveNumber)->needs(errormap);
    evaluate->add_option("--reference", ev.reference, "Published RMSE for an informative comparison");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    if (evaluate->parsed() && !ev.errormap.empty() && (ev.width == 0 || ev.height == 0)) {
        std::cerr << "--errormap requires --width and --height\n";
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim);
        if (calibrate_cmd->parsed()) return run_calibrate(cal);
        if (apply->parsed()) return run_apply(app_args);
        if (evaluate->parsed()) return run_evaluate(ev);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
