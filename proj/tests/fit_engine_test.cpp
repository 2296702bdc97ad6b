/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: tests/fit_engine_test.cpp
 *
 * Copyright 2026 The audioear authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "audioear/fitting/adam.hpp"
#include "audioear/fitting/fit.hpp"
#include "audioear/fitting/gradient.hpp"
#include "audioear/loss/losses.hpp"
#include "audioear/morphable/standin.hpp"
#include "audioear/pipeline/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace audioear {
namespace {

using fitting::FitConfig;
using fitting::FitInput;

const morphable::EarShapeModel& shape_model()
{
    static const auto model = morphable::make_standin_shape_model();
    return model;
}

render::CameraParams known_camera()
{
    render::CameraParams cam;
    cam.scale = 3.5;
    cam.rotation = core::Vec3(3.0, -0.8, 0.15);
    cam.translation = core::Vec2(250.0, 260.0);
    return cam;
}

Eigen::VectorXd draw_beta(std::uint64_t seed)
{
    core::Random rng(seed);
    Eigen::VectorXd beta(shape_model().dim());
    for (Eigen::Index i = 0; i < beta.size(); ++i)
    {
        beta[i] = rng.normal();
    }
    return beta;
}

FitInput landmarks_input(const Eigen::VectorXd& beta, const render::CameraParams& cam)
{
    FitInput in;
    in.landmarks = pipeline::project_model_landmarks(shape_model(), beta, cam);
    return in;
}

FitConfig geometric_config()
{
    FitConfig c;
    c.weights.photo = 0.0;
    c.weights.sim = 0.0;
    return c;
}

double fitted_landmark_loss(const fitting::FitResult& r, const FitInput& in)
{
    const auto pred = pipeline::project_model_landmarks(shape_model(), r.latent.shape, r.camera);
    return loss::landmark_loss(pred.points, in.landmarks);
}

double mean_pairwise_cosine(const std::vector<fitting::FitResult>& results)
{
    std::vector<Eigen::VectorXd> betas;
    for (const auto& r : results)
    {
        betas.push_back(r.latent.shape);
    }
    return loss::similarity_loss(betas);
}

TEST(AdamStep, ZeroGradientLeavesParamsUnchanged)
{
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 0.5;
    const Eigen::VectorXd before = x;
    fitting::AdamState state(3);
    for (int i = 0; i < 5; ++i)
    {
        fitting::adam_step(x, Eigen::VectorXd::Zero(3), state, 0.1);
    }
    EXPECT_EQ(x, before);
    EXPECT_EQ(state.timestep, 5);
}

TEST(AdamStep, FirstStepFromFreshState)
{
    Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd g(4);
    g << 3.0, -0.5, 1e-3, 250.0;
    fitting::AdamState state(4);
    const double lr = 0.1;
    const fitting::AdamOptions opts;
    fitting::adam_step(x, g, state, lr, opts);
    for (Eigen::Index i = 0; i < 4; ++i)
    {
        const double expected = -lr * g[i] / (std::abs(g[i]) + opts.epsilon);
        EXPECT_NEAR(x[i], expected, 1e-15);
        EXPECT_NEAR(std::abs(x[i]), lr, 1e-5 * lr);
    }
}

TEST(AdamStep, IdenticalRunsAreBitwiseEqual)
{
    auto run = [] {
        Eigen::VectorXd x(2);
        x << -1.2, 1.0;
        fitting::AdamState state;
        for (int i = 0; i < 200; ++i)
        {
            Eigen::VectorXd g(2);
            g << -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0]);
            fitting::adam_step(x, g, state, 0.01);
        }
        return x;
    };
    const Eigen::VectorXd a = run();
    const Eigen::VectorXd b = run();
    EXPECT_EQ(a[0], b[0]);
    EXPECT_EQ(a[1], b[1]);
}

TEST(AdamStep, ShapeMismatchThrows)
{
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    fitting::AdamState state(3);
    EXPECT_THROW(fitting::adam_step(x, Eigen::VectorXd::Zero(2), state, 0.1), std::invalid_argument);
    fitting::AdamState other(4);
    EXPECT_THROW(fitting::adam_step(x, Eigen::VectorXd::Zero(3), other, 0.1), std::invalid_argument);
}

TEST(Gradient, QuadraticClosedForm)
{
    const fitting::LossFunction f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g)
        {
            *g = 2.0 * x;
        }
        return x.squaredNorm();
    };
    Eigen::VectorXd x(4);
    x << 0.3, -1.7, 2.5, 10.0;
    const Eigen::VectorXd analytic = fitting::gradient(f, x, fitting::GradientMode::analytic);
    const Eigen::VectorXd fd = fitting::gradient(f, x, fitting::GradientMode::finite_difference);
    EXPECT_EQ(analytic, Eigen::VectorXd(2.0 * x));
    EXPECT_LT(fitting::relative_error(analytic, fd), 1e-6);
}

TEST(Gradient, NonFiniteLossThrows)
{
    const fitting::LossFunction f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g)
        {
            *g = x;
        }
        return std::log(x[0]);
    };
    EXPECT_THROW(fitting::gradient(f, Eigen::VectorXd::Constant(1, -1.0), fitting::GradientMode::analytic),
                 std::runtime_error);
    EXPECT_THROW(fitting::gradient(f, Eigen::VectorXd::Constant(1, -1.0), fitting::GradientMode::finite_difference),
                 std::runtime_error);
}

TEST(Gradient, ModeNamesRoundTrip)
{
    for (auto m : {fitting::GradientMode::analytic, fitting::GradientMode::finite_difference})
    {
        EXPECT_EQ(fitting::gradient_mode_from_string(fitting::to_string(m)), m);
    }
    EXPECT_EQ(fitting::gradient_mode_from_string("fd"), fitting::GradientMode::finite_difference);
    EXPECT_THROW(fitting::gradient_mode_from_string("newton"), std::invalid_argument);
}

TEST(Gradient, RangeLossInteriorIsFlat)
{
    double g = 1.0;
    EXPECT_EQ(loss::range_loss(1.3, 0.5, 4.0, &g), 0.0);
    EXPECT_EQ(g, 0.0);
    loss::CameraLossGradient cg;
    EXPECT_EQ(loss::camera_loss(known_camera(), &cg), 0.0);
    EXPECT_EQ(cg.scale, 0.0);
    EXPECT_EQ(cg.yaw, 0.0);
}

TEST(Gradient, LandmarkLossTranslationMatchesCentralDifferences)
{
    core::Random rng(101);
    FitConfig cfg = geometric_config();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(shape_model().dim());
    for (int trial = 0; trial < 100; ++trial)
    {
        render::CameraParams truth = known_camera();
        truth.rotation += core::Vec3(rng.normal(0.0, 0.1), rng.normal(0.0, 0.1), rng.normal(0.0, 0.1));
        const FitInput in = landmarks_input(draw_beta(500 + trial), truth);
        const fitting::FitProblem problem(shape_model(), nullptr, in, cfg);
        render::CameraParams cam = truth;
        cam.translation += core::Vec2(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0));
        const Eigen::VectorXd x = fitting::pack(cam, zero, Eigen::VectorXd());

        Eigen::VectorXd g;
        problem.evaluate(x, 1, &g, nullptr);
        const fitting::LossFunction f = [&](const Eigen::VectorXd& p, Eigen::VectorXd*) {
            double v = 0.0;
            problem.evaluate(p, 1, nullptr, &v);
            return v;
        };
        const Eigen::VectorXd fd = fitting::finite_difference_gradient(f, x, 1e-7);
        EXPECT_LT(fitting::relative_error(g.segment<2>(4), fd.segment<2>(4)), 1e-4) << "trial " << trial;
    }
}

TEST(Gradient, FullObjectiveMatchesCentralDifferences)
{
    core::Random rng(202);
    FitConfig cfg = geometric_config();
    cfg.contour_samples = 128;
    for (int trial = 0; trial < 100; ++trial)
    {
        const FitInput in = landmarks_input(draw_beta(900 + trial), known_camera());
        const fitting::FitProblem problem(shape_model(), nullptr, in, cfg);
        render::CameraParams cam = known_camera();
        cam.scale *= rng.uniform(0.9, 1.1);
        cam.rotation += core::Vec3(rng.normal(0.0, 0.05), rng.normal(0.0, 0.05), rng.normal(0.0, 0.05));
        cam.translation += core::Vec2(rng.normal(0.0, 5.0), rng.normal(0.0, 5.0));
        Eigen::VectorXd beta(shape_model().dim());
        for (Eigen::Index i = 0; i < beta.size(); ++i)
        {
            beta[i] = rng.normal();
        }
        for (int stage : {1, 2})
        {
            const Eigen::VectorXd x = fitting::pack(cam, beta, Eigen::VectorXd());
            Eigen::VectorXd g;
            problem.evaluate(x, stage, &g, nullptr);
            const fitting::LossFunction f = [&](const Eigen::VectorXd& p, Eigen::VectorXd*) {
                double v = 0.0;
                problem.evaluate(p, stage, nullptr, &v);
                return v;
            };
            Eigen::VectorXd fd = fitting::finite_difference_gradient(f, x, 1e-8);
            if (stage == 1)
            {
                fd.tail(fd.size() - fitting::camera_parameter_count).setZero();
            }
            EXPECT_LT(fitting::relative_error(g, fd), 1e-4) << "trial " << trial << " stage " << stage;
        }
    }
}

TEST(FitImage, MeanShapeSelfConsistency)
{
    const FitInput in = landmarks_input(Eigen::VectorXd::Zero(shape_model().dim()), known_camera());
    const auto r = fitting::fit_image(in, shape_model(), nullptr, geometric_config());
    EXPECT_LT(fitted_landmark_loss(r, in), 1e-3);
    EXPECT_LT(r.latent.shape.norm(), 0.5);
    EXPECT_LT(fitting::reprojection_error(r, shape_model(), in.landmarks), 0.1);
}

class ShapeRoundTrip : public ::testing::TestWithParam<std::uint64_t>
{
};

TEST_P(ShapeRoundTrip, ReprojectsWithinHalfPixel)
{
    const FitInput in = landmarks_input(draw_beta(GetParam()), known_camera());
    FitConfig cfg = geometric_config();
    cfg.weights.reg = 1e-6;
    cfg.total_iterations = 1200;
    const auto r = fitting::fit_image(in, shape_model(), nullptr, cfg);
    // The synthetic image is 512 px wide; the ear spans about half of it.
    EXPECT_LT(fitting::reprojection_error(r, shape_model(), in.landmarks), 0.5);
}

INSTANTIATE_TEST_SUITE_P(Draws, ShapeRoundTrip, ::testing::Values(11, 12, 13));

TEST(FitImage, StageOneNeverMovesLatents)
{
    const FitInput in = landmarks_input(draw_beta(7), known_camera());
    FitConfig cfg = geometric_config();
    cfg.total_iterations = 100;
    cfg.stage1_fraction = 0.5;
    const auto r = fitting::fit_image(in, shape_model(), nullptr, cfg);
    ASSERT_EQ(r.loss_trace.size(), 100u);
    const double smooth0 = r.loss_trace.front().smooth;
    int stage1_rows = 0;
    for (const auto& t : r.loss_trace)
    {
        if (t.stage == 1)
        {
            ++stage1_rows;
            EXPECT_EQ(t.reg, 0.0);
            EXPECT_EQ(t.smooth, smooth0);
        }
    }
    EXPECT_EQ(stage1_rows, 50);
    EXPECT_EQ(r.loss_trace.back().stage, 2);
}

TEST(FitImage, DeterministicGivenInputsAndConfig)
{
    const FitInput in = landmarks_input(draw_beta(8), known_camera());
    FitConfig cfg = geometric_config();
    cfg.total_iterations = 150;
    const auto a = fitting::fit_image(in, shape_model(), nullptr, cfg);
    const auto b = fitting::fit_image(in, shape_model(), nullptr, cfg);
    ASSERT_EQ(a.loss_trace.size(), b.loss_trace.size());
    for (std::size_t i = 0; i < a.loss_trace.size(); ++i)
    {
        EXPECT_EQ(a.loss_trace[i].total, b.loss_trace[i].total);
    }
    EXPECT_EQ(a.latent.shape, b.latent.shape);
    EXPECT_EQ(a.camera.rotation, b.camera.rotation);
    EXPECT_EQ(fitting::to_json(a).dump(), fitting::to_json(b).dump());
}

TEST(FitImage, LossDecreasesOnNoiselessInput)
{
    const FitInput in = landmarks_input(draw_beta(9), known_camera());
    FitConfig cfg = geometric_config();
    cfg.total_iterations = 300;
    const auto r = fitting::fit_image(in, shape_model(), nullptr, cfg);
    EXPECT_LE(r.best_loss, r.loss_trace.front().total);
    EXPECT_LT(fitted_landmark_loss(r, in), r.loss_trace.front().lmk);
    EXPECT_GE(r.best_iteration, 0);
    EXPECT_LE(r.best_iteration, cfg.total_iterations);
}

TEST(FitImage, FiniteDifferenceModeAlsoDescends)
{
    const FitInput in = landmarks_input(draw_beta(10), known_camera());
    FitConfig cfg = geometric_config();
    cfg.total_iterations = 40;
    cfg.contour_samples = 64;
    cfg.gradient_mode = fitting::GradientMode::finite_difference;
    const auto r = fitting::fit_image(in, shape_model(), nullptr, cfg);
    EXPECT_LT(fitted_landmark_loss(r, in), r.loss_trace.front().lmk);
}

TEST(FitImage, DivergenceCarriesTrace)
{
    const FitInput in = landmarks_input(draw_beta(3), known_camera());
    FitConfig cfg = geometric_config();
    cfg.total_iterations = 50;
    cfg.learning_rates.scale = 1e9;
    cfg.learning_rates.translation = 1e9;
    try
    {
        fitting::fit_image(in, shape_model(), nullptr, cfg);
        FAIL() << "expected divergence";
    } catch (const fitting::FitDivergence& e)
    {
        EXPECT_FALSE(e.trace().empty());
        EXPECT_TRUE(!std::isfinite(e.trace().back().total) || e.trace().back().total > 1e12);
    }
}

TEST(FitImage, PhotometricNeedsImageAndTexture)
{
    const FitInput in = landmarks_input(draw_beta(4), known_camera());
    FitConfig cfg;
    cfg.weights.sim = 0.0;
    const auto texture = morphable::make_standin_texture_model(16, 4);
    EXPECT_THROW(fitting::fit_image(in, shape_model(), &texture, cfg), std::invalid_argument);
}

TEST(FitImage, PhotometricPathRuns)
{
    const auto texture = morphable::make_standin_texture_model(16, 4);
    morphable::LatentCode latent{draw_beta(5), Eigen::VectorXd::Constant(4, 0.5)};
    render::CameraParams cam = known_camera();
    cam.scale = 0.8;
    cam.translation = core::Vec2(60.0, 64.0);
    const auto sample = pipeline::render_sample(shape_model(), texture, latent, cam, 128, 128);
    FitInput in;
    in.landmarks = sample.landmarks;
    in.image = sample.image;
    FitConfig cfg;
    cfg.weights.sim = 0.0;
    cfg.total_iterations = 6;
    cfg.stage1_fraction = 0.5;
    cfg.contour_samples = 64;
    const auto r = fitting::fit_image(in, shape_model(), &texture, cfg);
    ASSERT_EQ(r.loss_trace.size(), 6u);
    EXPECT_GT(r.loss_trace.front().photo, 0.0);
    EXPECT_EQ(r.latent.texture.size(), 4);
    EXPECT_LE(r.best_loss, r.loss_trace.front().total);
}

TEST(FitBatch, SimilarityLossSpreadsIdenticalInputs)
{
    const FitInput in = landmarks_input(draw_beta(21), known_camera());
    const std::vector<FitInput> batch(3, in);
    FitConfig with = geometric_config();
    with.total_iterations = 300;
    with.contour_samples = 128;
    with.weights.sim = 1.0;
    FitConfig without = with;
    without.weights.sim = 0.0;
    const auto a = fitting::fit_batch(batch, shape_model(), nullptr, with);
    const auto b = fitting::fit_batch(batch, shape_model(), nullptr, without);
    EXPECT_LT(mean_pairwise_cosine(a), mean_pairwise_cosine(b));
}

TEST(FitBatch, SingleImageIgnoresSimilarity)
{
    const FitInput in = landmarks_input(draw_beta(22), known_camera());
    FitConfig cfg = geometric_config();
    cfg.total_iterations = 60;
    const auto a = fitting::fit_image(in, shape_model(), nullptr, cfg);
    cfg.weights.sim = 5.0;
    const auto b = fitting::fit_image(in, shape_model(), nullptr, cfg);
    EXPECT_EQ(a.latent.shape, b.latent.shape);
    for (const auto& t : b.loss_trace)
    {
        EXPECT_EQ(t.sim, 0.0);
    }
}

TEST(FitConfigJson, RoundTripAndDefaults)
{
    FitConfig c;
    c.weights.contour = 7.0;
    c.total_iterations = 42;
    c.learning_rates.shape = 0.3;
    c.gradient_mode = fitting::GradientMode::finite_difference;
    c.seed = 99;
    c.initial_rotation = core::Vec3(3.0, -0.9, 0.1);
    const auto back = fitting::fit_config_from_json(fitting::to_json(c));
    EXPECT_EQ(fitting::to_json(back), fitting::to_json(c));

    const auto partial = fitting::fit_config_from_json(nlohmann::json{{"total_iterations", 10}});
    EXPECT_EQ(partial.total_iterations, 10);
    EXPECT_EQ(partial.weights.lmk, loss::LossWeights{}.lmk);
    EXPECT_DOUBLE_EQ(partial.stage1_fraction, 0.2);
}

TEST(FitConfigJson, RejectsInvalidSchedules)
{
    EXPECT_THROW(fitting::fit_config_from_json(nlohmann::json{{"stage1_fraction", 1.0}}), std::invalid_argument);
    EXPECT_THROW(fitting::fit_config_from_json(nlohmann::json{{"total_iterations", 0}}), std::invalid_argument);
    EXPECT_THROW(fitting::fit_config_from_json(nlohmann::json{{"weights", {{"lmk", -1.0}}}}), std::invalid_argument);
    EXPECT_THROW(fitting::fit_config_from_json(nlohmann::json{{"gradient_mode", "newton"}}), std::invalid_argument);
}

TEST(FitInputs, RejectsBadLandmarks)
{
    FitInput in = landmarks_input(draw_beta(1), known_camera());
    in.landmarks.points.pop_back();
    EXPECT_THROW(fitting::fit_image(in, shape_model(), nullptr, geometric_config()), std::invalid_argument);
    EXPECT_THROW(fitting::fit_batch({}, shape_model(), nullptr, geometric_config()), std::invalid_argument);
}

TEST(Synthetic, SampledCameraFramesTheEar)
{
    core::Random rng(17);
    for (int i = 0; i < 20; ++i)
    {
        const auto cam = pipeline::sample_camera(rng, shape_model(), 512, 512);
        const auto lm = pipeline::project_model_landmarks(shape_model(), Eigen::VectorXd::Zero(shape_model().dim()), cam);
        for (const auto& p : lm.points)
        {
            EXPECT_GT(p.x(), 0.0);
            EXPECT_LT(p.x(), 512.0);
            EXPECT_GT(p.y(), 0.0);
            EXPECT_LT(p.y(), 512.0);
        }
        EXPECT_EQ(loss::camera_loss(cam), 0.0);
    }
}

} // namespace
} // namespace audioear
