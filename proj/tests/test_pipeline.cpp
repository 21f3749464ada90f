#include <chrono>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rankcal/dataset.hpp"
#include "rankcal/model_io.hpp"
#include "rankcal/pipeline.hpp"
#include "rankcal/simulator.hpp"
#include "test_support.hpp"

using namespace rankcal;
using testing_support::error_code;
using testing_support::error_message;

namespace {

struct Calibrated {
    SyntheticCamera camera;
    PixelPairSet train;
    PixelPairSet held_out;
    PipelineModel model;
};

Calibrated calibrate_synthetic(const CameraOptions& options, std::uint64_t seed) {
    Calibrated out;
    out.camera = make_camera(options, seed);
    const auto ill = default_illuminants(1, seed);
    const auto exp = default_exposures(1);
    out.train = make_corpus(out.camera, 140, ill, exp, seed);
    out.held_out = make_corpus(out.camera, 1000, ill, exp, seed + 777);
    CalibrationConfig cfg;
    cfg.seed = seed;
    out.model = calibrate(out.train, cfg);
    return out;
}

class AffineCameraPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        CameraOptions o;
        o.gamut = GamutMode::Affine;
        shared_ = new Calibrated(calibrate_synthetic(o, 1));
    }
    static void TearDownTestSuite() {
        delete shared_;
        shared_ = nullptr;
    }
    static Calibrated* shared_;
};

Calibrated* AffineCameraPipeline::shared_ = nullptr;

PixelPairSet small_training_set(std::uint64_t seed) {
    return make_corpus(make_camera(CameraOptions{}, seed), 140, default_illuminants(1, seed), default_exposures(1),
                       seed);
}

CalibrationConfig fast_config(std::uint64_t seed) {
    CalibrationConfig cfg;
    cfg.seed = seed;
    cfg.rank.sphere_points = 20000;
    return cfg;
}

}  // namespace

TEST_F(AffineCameraPipeline, HeldOutErrorsWithinBudget) {
    const Calibrated& c = *shared_;
    std::vector<RgbTriple> pf, tf, pb, tb;
    for (const PixelPair& p : c.held_out) {
        const RgbTriple clean = render(c.camera, p.raw);
        pf.push_back(apply_forward(c.model, p.raw));
        tf.push_back(clean);
        pb.push_back(apply_backward(c.model, clean));
        tb.push_back(p.raw);
    }
    EXPECT_LE(rmse(pf, tf, RmseDomain::Rendered255), 3.0);
    EXPECT_LE(rmse(pb, tb, RmseDomain::Raw01), 0.012);
}

TEST_F(AffineCameraPipeline, OutputsStayInCube) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    for (int i = 0; i < 1000; ++i) {
        const RgbTriple in{u(rng), u(rng), u(rng)};
        for (const RgbTriple& out : {apply_forward(shared_->model, in), apply_backward(shared_->model, in)}) {
            for (int c = 0; c < 3; ++c) {
                EXPECT_GE(out[c], 0.0);
                EXPECT_LE(out[c], 1.0);
            }
        }
    }
}

TEST_F(AffineCameraPipeline, BlackRawRendersNearBlackLevel) {
    const RgbTriple black = render(shared_->camera, {0.0, 0.0, 0.0});
    const RgbTriple predicted = apply_forward(shared_->model, {0.0, 0.0, 0.0});
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(predicted[c], black[c], 4.0 / 255.0) << "channel " << c;
}

TEST_F(AffineCameraPipeline, ForwardThenBackwardRecoversRaw) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.05, 0.9);
    for (int i = 0; i < 500; ++i) {
        const RgbTriple raw{u(rng), u(rng), u(rng)};
        const RgbTriple back = apply_backward(shared_->model, apply_forward(shared_->model, raw));
        EXPECT_LE((back.vec() - raw.vec()).cwiseAbs().maxCoeff(), 0.02);
    }
}

TEST_F(AffineCameraPipeline, ModelShapeAndMetadata) {
    const PipelineModel& m = shared_->model;
    EXPECT_EQ(parameter_count(m), 408u);
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(m.metadata.seed, 1u);
    EXPECT_EQ(m.metadata.sample_count, usable_pairs(shared_->train).size());
    EXPECT_TRUE(m.matrix.invertible());
}

TEST(Pipeline, IdentityCameraRecoversIdentity) {
    CameraOptions o;
    o.perturbation = 0.0;
    o.tone = {ToneFamily::Gamma, 1.0};
    const std::uint64_t seed = 21;
    const SyntheticCamera cam = make_camera(o, seed);
    const auto train = make_corpus(cam, 140, default_illuminants(1, seed), default_exposures(1), seed);
    const PipelineModel model = calibrate(train, fast_config(seed));
    for (int k = 0; k < 3; ++k) {
        EXPECT_LE(oracle::angle_deg(model.matrix.row(k), Eigen::Vector3d::Unit(k)), 1.2) << "row " << k;
    }
    for (int c = 0; c < 3; ++c) {
        for (int i = 1; i < 20; ++i) {
            const double t = 0.05 * i;
            EXPECT_NEAR(model.forward_tones[c](t), t, 0.02) << "channel " << c << " t " << t;
            EXPECT_NEAR(model.inverse_tones[c](t), t, 0.02) << "channel " << c << " t " << t;
        }
    }
    const Lattice3 identity = Lattice3::identity(5);
    for (std::size_t i = 0; i < identity.nodes.size(); ++i) {
        EXPECT_LE((model.forward_lut.nodes[i] - identity.nodes[i]).cwiseAbs().maxCoeff(), 0.05);
        EXPECT_LE((model.backward_lut.nodes[i] - identity.nodes[i]).cwiseAbs().maxCoeff(), 0.05);
    }
}

TEST(Pipeline, NoisyCorpusWithinTimeBudget) {
    CameraOptions o;
    o.gamut = GamutMode::Affine;
    o.noise_sigma = 2.0 / 255.0;
    o.quantize = true;
    const SyntheticCamera cam = make_camera(o, 31);
    const auto train = make_corpus(cam, 140, default_illuminants(1, 31), default_exposures(1), 31);
    CalibrationConfig cfg;
    cfg.seed = 31;
    std::vector<StageTiming> timings;
    const auto start = std::chrono::steady_clock::now();
    const PipelineModel model = calibrate(train, cfg, &timings);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(seconds, 60.0);
    EXPECT_EQ(parameter_count(model), 408u);
    ASSERT_EQ(timings.size(), 7u);
    EXPECT_EQ(timings.front().stage, "sphere");
    EXPECT_EQ(timings.back().stage, "backward_lut");
}

TEST(Pipeline, IdentityModelAppliesAsIdentity) {
    const PipelineModel m = PipelineModel::identity(5);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const RgbTriple in{u(rng), u(rng), u(rng)};
        EXPECT_LE((apply_forward(m, in).vec() - in.vec()).norm(), 1e-12);
        EXPECT_LE((apply_backward(m, in).vec() - in.vec()).norm(), 1e-12);
    }
}

TEST(Pipeline, RandomModelOutputsStayInCube) {
    const PipelineModel m = testing_support::random_model(6);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    for (int i = 0; i < 500; ++i) {
        const RgbTriple in{u(rng), u(rng), u(rng)};
        for (const RgbTriple& out : {apply_forward(m, in), apply_backward(m, in)}) {
            EXPECT_GE(out.vec().minCoeff(), 0.0);
            EXPECT_LE(out.vec().maxCoeff(), 1.0);
        }
    }
}

TEST(Pipeline, DeterministicForFixedSeed) {
    const auto train = small_training_set(41);
    const std::string a = serialize_model(calibrate(train, fast_config(41)));
    const std::string b = serialize_model(calibrate(train, fast_config(41)));
    EXPECT_EQ(a, b);
}

TEST(Pipeline, PreconditionsReported) {
    const auto train = small_training_set(51);
    const PixelPairSet few(train.begin(), train.begin() + 20);
    EXPECT_EQ(error_code([&] { calibrate(few, fast_config(1)); }), ErrorCode::InsufficientData);

    PixelPairSet flat = train;
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i].rendered.g = (i % 5) / 10.0 + 0.2;
    EXPECT_EQ(error_code([&] { calibrate(flat, fast_config(1)); }), ErrorCode::InsufficientData);
    EXPECT_NE(error_message([&] { calibrate(flat, fast_config(1)); }).find("channel 1"), std::string::npos);

    CalibrationConfig bad = fast_config(1);
    bad.lattice_resolution = 1;
    EXPECT_EQ(error_code([&] { calibrate(train, bad); }), ErrorCode::InvalidArgument);
}

TEST(Pipeline, StageFailuresNameTheStage) {
    PixelPairSet no_grey;
    for (const PixelPair& p : small_training_set(61)) {
        const Eigen::Vector3d r = p.rendered.vec();
        if (r.maxCoeff() - r.minCoeff() <= 0.04) continue;
        no_grey.push_back(p);
    }
    ASSERT_GE(no_grey.size(), 30u);
    EXPECT_EQ(error_code([&] { calibrate(no_grey, fast_config(1)); }), ErrorCode::NoAchromaticSample);
    EXPECT_EQ(error_message([&] { calibrate(no_grey, fast_config(1)); }).rfind("NoAchromaticSample: achromatic: ", 0),
              0u);

    CalibrationConfig tiny = fast_config(1);
    tiny.rank.sphere_points = 3;
    EXPECT_NE(error_message([&] { calibrate(small_training_set(61), tiny); }).find("sphere: "), std::string::npos);
}
