// One PASS/FAIL line per acceptance criterion. Exits non-zero when a gating
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "oracles.hpp"
#include "rankcal/dataset.hpp"
#include "rankcal/gamut.hpp"
#include "rankcal/model_io.hpp"
#include "rankcal/monotone_fit.hpp"
#include "rankcal/pipeline.hpp"
#include "rankcal/qp.hpp"
#include "rankcal/rank_solver.hpp"
#include "rankcal/simulator.hpp"
#include "test_support.hpp"

using namespace rankcal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, value);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_cli(const std::string& args, std::string* out = nullptr) {
    const std::string command = std::string(RANKCAL_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(command.c_str(), "r");
    if (pipe == nullptr) return -1;
    char buffer[4096];
    while (std::fgets(buffer, sizeof buffer, pipe) != nullptr) {
        if (out != nullptr) *out += buffer;
    }
    const int status = pclose(pipe);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path artifacts_dir() {
    const fs::path dir = fs::current_path() / "acceptance_artifacts";
    fs::create_directories(dir);
    return dir;
}

PixelPairSet training_corpus(const SyntheticCamera& cam, int patches, std::uint64_t seed) {
    return make_corpus(cam, patches, default_illuminants(1, seed), default_exposures(1), seed);
}

double worst_row_angle(const PipelineModel& model, const SyntheticCamera& cam) {
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) worst = std::max(worst, oracle::angle_deg(model.matrix.row(k), cam.matrix.row(k)));
    return worst;
}

Outcome dataset_reference() {
    // The real dataset is not shipped; check the reporting path that would score it.
    const fs::path dir = artifacts_dir() / "reference";
    fs::create_directories(dir);
    const std::string corpus = (dir / "corpus.csv").string();
    const std::string model = (dir / "identity.txt").string();
    save_model(model, PipelineModel::identity(5));
    if (run_cli("simulate --out " + corpus + " --patches 40 --seed 5") != 0) return {false, "simulate failed"};
    bool ok = true;
    for (const char* direction : {"forward", "backward"}) {
        const std::string report = (dir / (std::string(direction) + ".txt")).string();
        if (run_cli("evaluate --model " + model + " --data " + corpus + " --direction " + direction + " --report " +
                    report + " --reference 2.56") != 0) {
            return {false, std::string("evaluate ") + direction + " failed"};
        }
        const std::string text = slurp(report);
        const char* units = std::string(direction) == "forward" ? "units: rendered 0-255" : "units: normalized raw";
        ok &= text.find(units) != std::string::npos && text.find("within_25_percent: ") != std::string::npos &&
              text.find("(informative)") != std::string::npos;
    }
    return {ok, "informative only, dataset not supplied; evaluate reports 0-255 and raw units with the +-25% "
                "reference check"};
}

struct SyntheticRun {
    double forward = 0.0;
    double backward = 0.0;
    double seconds = 0.0;
    std::size_t parameters = 0;
};

SyntheticRun synthetic_oracle_run(std::uint64_t seed) {
    CameraOptions o;
    o.gamut = GamutMode::Affine;
    const SyntheticCamera cam = make_camera(o, seed);
    const auto train = training_corpus(cam, 140, seed);
    const auto held_out = training_corpus(cam, 1000, seed + 777);
    CalibrationConfig cfg;
    cfg.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    const PipelineModel model = calibrate(train, cfg);
    SyntheticRun run;
    run.seconds = seconds_since(start);
    run.parameters = parameter_count(model);
    std::vector<RgbTriple> pf, tf, pb, tb;
    for (const PixelPair& p : held_out) {
        const RgbTriple clean = render(cam, p.raw);
        pf.push_back(apply_forward(model, p.raw));
        tf.push_back(clean);
        pb.push_back(apply_backward(model, clean));
        tb.push_back(p.raw);
    }
    run.forward = rmse(pf, tf, RmseDomain::Rendered255);
    run.backward = rmse(pb, tb, RmseDomain::Raw01);
    return run;
}

std::vector<SyntheticRun> g_synthetic_runs;

Outcome synthetic_suite() {
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const SyntheticRun r = synthetic_oracle_run(seed);
        g_synthetic_runs.push_back(r);
        ok &= r.forward <= 3.0 && r.backward <= 0.012 && r.seconds <= 60.0;
        detail += "seed " + std::to_string(seed) + " forward " + fmt("%.3f", r.forward) + " backward " +
                  fmt("%.5f", r.backward) + " time " + fmt("%.1f", r.seconds) + " s; ";
    }
    return {ok, detail + "limits 3.0 / 0.012 / 60 s"};
}

Outcome matrix_recovery() {
    bool ok = true;
    std::string detail;
    for (double sigma : {0.0, 2.0 / 255.0}) {
        const double limit = sigma == 0.0 ? 1.2 : 3.0;
        double worst = 0.0;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            CameraOptions o;
            o.noise_sigma = sigma;
            const SyntheticCamera cam = make_camera(o, seed);
            CalibrationConfig cfg;
            cfg.seed = seed;
            worst = std::max(worst, worst_row_angle(calibrate(training_corpus(cam, 140, seed), cfg), cam));
        }
        ok &= worst <= limit;
        detail += (sigma == 0.0 ? "noise-free worst " : "sigma 2/255 worst ") + fmt("%.2f", worst) + " deg <= " +
                  fmt("%.1f", limit) + "; ";
    }
    return {ok, detail + "gamut-free cameras, seeds 1-3"};
}

Outcome sphere_sampling() {
    const SphereSample s = sample_sphere(100000);
    const double gap = oracle::max_nearest_neighbour_gap(s.points);
    return {gap <= 1.15, "n 100000, max nearest-neighbour gap " + fmt("%.4f", gap) + " deg <= 1.15"};
}

Outcome parameter_budget() {
    bool ok = !g_synthetic_runs.empty();
    for (const SyntheticRun& r : g_synthetic_runs) ok &= r.parameters == 408;
    const std::size_t first = g_synthetic_runs.empty() ? 0 : g_synthetic_runs.front().parameters;
    return {ok, "calibrated models report " + std::to_string(first) + " forward parameters, expected 408"};
}

Outcome qp_kernel() {
    std::mt19937_64 rng(2024);
    double worst_kkt = 0.0, worst_gap = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 10);
        const int m = static_cast<int>(rng() % 21);
        const auto p = testing_support::random_program(rng, n, m);
        const QpSolution sol = solve_qp(p.qp);
        const oracle::DualResult ref = oracle::dual_projected_gradient(p.qp.Q, p.qp.c, p.qp.A, p.qp.b);
        worst_kkt = std::max(worst_kkt, testing_support::kkt_residual(p.qp, sol));
        worst_gap = std::max(worst_gap, std::abs(sol.objective - ref.objective));
    }
    return {worst_kkt <= 1e-8 && worst_gap <= 1e-5, "200 programs, worst KKT residual " + fmt("%.2e", worst_kkt) +
                                                        " <= 1e-8, worst objective gap " + fmt("%.2e", worst_gap) +
                                                        " <= 1e-5"};
}

Outcome monotone_fit_check() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    int monotone = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 10 + 5 * (trial % 40);
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = u(rng);
        for (int i = 0; i < n; ++i) {
            switch (trial % 6) {
                case 0: y[i] = u(rng); break;
                case 1: y[i] = 1.0 - x[i] + 0.1 * normal(rng); break;
                case 2: y[i] = 1.0 - x[i]; break;
                case 3: y[i] = std::sin(12.0 * x[i]); break;
                case 4: y[i] = x[i] < 0.5 ? 1.0 : 0.0; break;
                default: y[i] = std::pow(x[i], 0.3) + 0.05 * normal(rng);
            }
        }
        if (fit_monotone(x, y, FitConfig{}).is_monotone(1024)) ++monotone;
    }

    // The unconstrained degree-7 least-squares residual bounds what any fit in the family can reach.
    double worst_rms = 0.0, worst_floor = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 srng(seed);
        std::vector<double> x(140), y(140);
        Eigen::MatrixXd v(140, 8);
        for (int i = 0; i < 140; ++i) {
            x[i] = u(srng);
            y[i] = std::pow(x[i], 1.0 / 2.2);
            for (int j = 0; j < 8; ++j) v(i, j) = std::pow(x[i], j);
        }
        const ToneCurve f = fit_monotone(x, y, FitConfig{});
        double sq = 0.0;
        for (int i = 0; i < 140; ++i) sq += std::pow(f(x[i]) - y[i], 2);
        worst_rms = std::max(worst_rms, std::sqrt(sq / 140.0));
        const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), 140);
        const Eigen::VectorXd ls = v.colPivHouseholderQr().solve(target);
        worst_floor = std::max(worst_floor, (v * ls - target).norm() / std::sqrt(140.0));
    }
    return {monotone == 500 && worst_rms <= 2e-3, std::to_string(monotone) +
                                                     "/500 fits monotone on the 1024-point grid; gamma 1/2.2 at 140 "
                                                     "samples worst RMS " +
                                                     fmt("%.2e", worst_rms) + " <= 2e-3 (unconstrained degree-7 "
                                                     "least-squares floor " + fmt("%.2e", worst_floor) + ")"};
}

Outcome lattice_check() {
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);

    Lattice3 random_lut = Lattice3::identity(5);
    for (auto& node : random_lut.nodes) node = Eigen::Vector3d(sym(rng), sym(rng), sym(rng));
    double node_error = 0.0;
    for (std::size_t n = 0; n < random_lut.nodes.size(); ++n) {
        node_error = std::max(node_error,
                              (apply_lattice(random_lut, random_lut.grid_position(n)).vec() - random_lut.nodes[n]).norm());
    }

    double unity_error = 0.0;
    const Lattice3 identity = Lattice3::identity(5);
    double identity_error = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Eigen::Vector3d v(u(rng), u(rng), u(rng));
        const TrilinearWeights w = trilinear_weights(5, v);
        double sum = 0.0;
        for (double x : w.weights) sum += x;
        unity_error = std::max(unity_error, std::abs(sum - 1.0));
        identity_error = std::max(identity_error, (apply_lattice(identity, v).vec() - v).norm());
    }

    Lattice3 truth = Lattice3::identity(5);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    for (auto& node : truth.nodes) node += Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng));
    std::vector<Eigen::Vector3d> in;
    for (int ci = 0; ci < 4; ++ci) {
        for (int cj = 0; cj < 4; ++cj) {
            for (int ck = 0; ck < 4; ++ck) {
                for (int s = 0; s < 20; ++s) {
                    in.emplace_back((ci + u(rng)) / 4.0, (cj + u(rng)) / 4.0, (ck + u(rng)) / 4.0);
                }
            }
        }
    }
    std::vector<RgbTriple> out;
    for (const auto& v : in) out.push_back(apply_lattice(truth, v));
    const Lattice3 fitted = fit_lattice(in, out, 5, 1e-6);
    double recover_error = 0.0;
    for (std::size_t n = 0; n < truth.nodes.size(); ++n) {
        recover_error = std::max(recover_error, (fitted.nodes[n] - truth.nodes[n]).cwiseAbs().maxCoeff());
    }

    const bool ok = node_error <= 1e-12 && unity_error <= 1e-12 && identity_error <= 1e-12 && recover_error <= 1e-4;
    return {ok, "node reproduction " + fmt("%.1e", node_error) + ", partition of unity " + fmt("%.1e", unity_error) +
                    ", identity " + fmt("%.1e", identity_error) + " (all <= 1e-12); generate-and-recover " +
                    fmt("%.1e", recover_error) + " <= 1e-4 (mu 1e-6, all 64 cells populated)"};
}

Outcome one_shot() {
    bool ok = true;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        CameraOptions o;
        o.gamut = GamutMode::Affine;
        o.quantize = true;
        const SyntheticCamera cam = make_camera(o, seed);
        const int width = 120, height = 80;
        const PixelPairSet image = make_image(cam, width, height, seed);
        const PixelPairSet shot = select_subset(usable_pairs(image), SubsetSpec::uniform(140, seed));
        const PixelPairSet big = make_corpus(cam, 400, default_illuminants(4, seed), default_exposures(8), seed + 1);
        const PixelPairSet train8k = select_subset(usable_pairs(big), SubsetSpec::uniform(8000, seed));
        CalibrationConfig cfg;
        cfg.seed = seed;
        const PipelineModel from_shot = calibrate(shot, cfg);
        const PipelineModel from_8k = calibrate(train8k, cfg);

        std::vector<RgbTriple> p1, p2, truth;
        for (const PixelPair& p : image) {
            p1.push_back(apply_backward(from_shot, p.rendered));
            p2.push_back(apply_backward(from_8k, p.rendered));
            truth.push_back(p.raw);
        }
        const double a = rmse(p1, truth, RmseDomain::Raw01);
        const double b = rmse(p2, truth, RmseDomain::Raw01);
        const fs::path ppm = artifacts_dir() / ("one_shot_seed" + std::to_string(seed) + ".ppm");
        write_ppm(ppm, make_error_map(per_sample_rmse(p1, truth, RmseDomain::Raw01), width, height));
        const bool written = fs::exists(ppm) && fs::file_size(ppm) > static_cast<std::uintmax_t>(width * height * 3);
        ok &= written && a <= 1.5 * b;
        detail += "seed " + std::to_string(seed) + " one-shot " + fmt("%.4f", a) + " vs 8000 pairs " + fmt("%.4f", b) +
                  " ratio " + fmt("%.2f", a / b) + (written ? "" : " (no PPM)") + "; ";
    }
    return {ok, detail + "limit 1.5, error maps in acceptance_artifacts/"};
}

Outcome determinism() {
    const fs::path dir = artifacts_dir() / "determinism";
    fs::create_directories(dir);
    const std::string corpus = (dir / "corpus.csv").string();
    if (run_cli("simulate --out " + corpus + " --patches 140 --seed 9") != 0) return {false, "simulate failed"};
    std::string models[2], reports[2];
    for (int i = 0; i < 2; ++i) {
        const std::string model = (dir / ("model" + std::to_string(i) + ".txt")).string();
        const std::string report = (dir / ("report" + std::to_string(i) + ".txt")).string();
        if (run_cli("calibrate --data " + corpus + " --out " + model + " --seed 9") != 0) {
            return {false, "calibrate failed"};
        }
        if (run_cli("evaluate --model " + model + " --data " + corpus + " --direction backward --report " + report) !=
            0) {
            return {false, "evaluate failed"};
        }
        models[i] = slurp(model);
        reports[i] = slurp(report);
    }
    const bool ok = !models[0].empty() && models[0] == models[1] && !reports[0].empty() && reports[0] == reports[1];
    return {ok, std::string("model files ") + (models[0] == models[1] ? "identical" : "differ") + ", reports " +
                    (reports[0] == reports[1] ? "identical" : "differ") + " across two CLI runs"};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        bool gating;
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria{
        {1, "published dataset reference", false, dataset_reference},
        {2, "synthetic oracle suite", true, synthetic_suite},
        {3, "matrix recovery", true, matrix_recovery},
        {4, "sphere sampling", true, sphere_sampling},
        {5, "parameter budget", true, parameter_budget},
        {6, "QP kernel", true, qp_kernel},
        {7, "monotone fit", true, monotone_fit_check},
        {8, "lattice", true, lattice_check},
        {9, "one-shot protocol", true, one_shot},
        {10, "determinism", true, determinism},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        Outcome outcome;
        const auto start = std::chrono::steady_clock::now();
        try {
            outcome = c.check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        if (!outcome.pass && c.gating) ++failures;
        std::printf("%s criterion %d (%s)%s: %s [%.1f s]\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                    c.gating ? "" : " [informative]", outcome.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
    }
    return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
