/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: tests/registration_eval_test.cpp
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

#include "audioear/core/geometry.hpp"
#include "audioear/morphable/standin.hpp"
#include "audioear/registration/registration.hpp"
#include "audioear/render/camera.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace audioear {
namespace {

using registration::KeyPoints;
using registration::Mode;
using registration::RegistrationConfig;
using registration::Similarity;

const morphable::EarShapeModel& shape_model()
{
    static const auto model = morphable::make_standin_shape_model();
    return model;
}

core::TriMesh mean_mesh()
{
    return morphable::mean_mesh(shape_model());
}

Similarity make_similarity(double scale, double angle, const core::Vec3& axis, const core::Vec3& t)
{
    return {scale, Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), t};
}

core::PointCloud surface_scan(const core::TriMesh& mesh, const Similarity& t, std::size_t n, std::uint64_t seed)
{
    core::Random rng(seed);
    core::PointCloud scan = core::sample_surface_points(mesh, n, rng);
    for (auto& p : scan.points)
    {
        p = t.apply(p);
    }
    return scan;
}

KeyPoints scan_keys_for(const core::PointCloud& scan, const core::TriMesh& mesh, const Similarity& t)
{
    const KeyPoints mk = registration::default_key_points(morphable::to_points(shape_model().mean));
    std::array<core::Vec3, 4> targets;
    for (int k = 0; k < 4; ++k)
    {
        targets[k] = t.apply(mesh.vertices[mk[k]]);
    }
    return registration::nearest_scan_key_points(scan, targets);
}

double translation_error(const registration::RegistrationResult& r, const Similarity& truth)
{
    return (r.translation - truth.translation).norm();
}

TEST(EulerAngles, InvertsEulerRotation)
{
    core::Random rng(3);
    for (int i = 0; i < 200; ++i)
    {
        const core::Vec3 a(rng.uniform(-3.0, 3.0), rng.uniform(-1.5, 1.5), rng.uniform(-3.0, 3.0));
        const Eigen::Matrix3d r = render::euler_rotation(a);
        const Eigen::Matrix3d back = render::euler_rotation(render::euler_angles(r));
        EXPECT_LT((back - r).cwiseAbs().maxCoeff(), 1e-12);
    }
    const Eigen::Matrix3d lock = render::euler_rotation(core::Vec3(0.4, std::numbers::pi / 2, -0.3));
    EXPECT_LT((render::euler_rotation(render::euler_angles(lock)) - lock).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitSimilarity, RecoversExactTransform)
{
    const Similarity t = make_similarity(1.3, 0.35, {0.2, 1.0, -0.4}, {5.0, -3.0, 2.0});
    std::vector<core::Vec3> src = {{0, 0, 0}, {10, 0, 0}, {0, 7, 0}, {1, 2, 5}}, dst;
    for (const auto& p : src) dst.push_back(t.apply(p));
    const Similarity s = registration::fit_similarity(src, dst);
    EXPECT_NEAR(s.scale, 1.3, 1e-12);
    EXPECT_LT((s.rotation - t.rotation).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((s.translation - t.translation).norm(), 1e-10);
    EXPECT_THROW(registration::fit_similarity(std::vector<core::Vec3>(2), std::vector<core::Vec3>(2)),
                 std::invalid_argument);
}

TEST(Similarity, ComposeAndInverse)
{
    const Similarity a = make_similarity(1.3, 0.3, {1, 2, 3}, {1, 2, 3});
    const Similarity b = make_similarity(0.7, -1.1, {0, 1, 0}, {-4, 0, 2});
    const core::Vec3 x(3.0, -2.0, 8.0);
    EXPECT_LT((a.compose(b).apply(x) - a.apply(b.apply(x))).norm(), 1e-12);
    EXPECT_LT((a.inverse().apply(a.apply(x)) - x).norm(), 1e-12);
}

TEST(Register, IdentityTransformOracle)
{
    const auto mesh = mean_mesh();
    const Similarity id;
    const auto scan = surface_scan(mesh, id, 5000, 1);
    RegistrationConfig cfg;
    const auto r = registration::register_mesh(mesh, scan, cfg);
    EXPECT_NEAR(r.scale, 1.0, 0.01);
    EXPECT_LT(translation_error(r, id), 0.1);
    EXPECT_LT(r.final_s2m, 0.05);
}

TEST(Register, KnownSimilarityTransform)
{
    const auto mesh = mean_mesh();
    const Similarity truth =
        make_similarity(1.3, 20.0 * std::numbers::pi / 180.0, {0.3, 1.0, 0.2}, {5.0, -3.0, 2.0});
    const auto scan = surface_scan(mesh, truth, 5000, 2);
    RegistrationConfig cfg;
    cfg.scan_key_points = scan_keys_for(scan, mesh, truth);
    const auto r = registration::register_mesh(mesh, scan, cfg);
    EXPECT_LT(std::abs(r.scale - 1.3) / 1.3, 0.01);
    EXPECT_LT(translation_error(r, truth), 0.1);
    EXPECT_LT(r.final_s2m, 0.1);
    const Eigen::Matrix3d dr = r.transform().rotation * truth.rotation.transpose();
    EXPECT_LT(Eigen::AngleAxisd(dr).angle(), 1e-2);
}

class ShapeRegistration : public ::testing::TestWithParam<std::uint64_t>
{
};

TEST_P(ShapeRegistration, GroundTruthQuality)
{
    core::Random rng(GetParam());
    Eigen::VectorXd beta(shape_model().dim());
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = rng.normal();
    const auto mesh = morphable::decode_shape(shape_model(), beta);
    const Similarity truth = make_similarity(rng.uniform(0.9, 1.1), rng.uniform(-0.4, 0.4),
                                             {rng.normal(), rng.normal(), rng.normal()},
                                             {rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8)});
    const auto scan = surface_scan(mesh, truth, 5000, GetParam() + 1);
    RegistrationConfig cfg;
    cfg.mode = Mode::rigid_scale_shape;
    cfg.scan_key_points = scan_keys_for(scan, mesh, truth);
    const auto r = registration::register_model(shape_model(), scan, cfg);
    ASSERT_TRUE(r.beta.has_value());
    EXPECT_EQ(r.beta->size(), shape_model().dim());
    EXPECT_LE(r.final_s2m, 0.15);
    EXPECT_NEAR(core::scan_to_mesh(scan, registration::registered_mesh(r, shape_model())), r.final_s2m, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Draws, ShapeRegistration, ::testing::Values(31, 32, 33));

TEST(Register, ShapeCodeFrozenInRigidMode)
{
    const auto mesh = mean_mesh();
    const auto scan = surface_scan(mesh, Similarity{}, 2000, 4);
    RegistrationConfig cfg;
    const auto r = registration::register_model(shape_model(), scan, cfg);
    EXPECT_FALSE(r.beta.has_value());
    cfg.mode = Mode::rigid_scale_shape;
    EXPECT_THROW(registration::register_mesh(mesh, scan, cfg), std::invalid_argument);
}

TEST(Register, StageBoundariesNeverIncreaseSurfaceDistance)
{
    core::Random rng(8);
    Eigen::VectorXd beta(shape_model().dim());
    for (Eigen::Index i = 0; i < beta.size(); ++i) beta[i] = rng.normal();
    const auto mesh = morphable::decode_shape(shape_model(), beta);
    const Similarity truth = make_similarity(1.1, 0.3, {1, 0, 1}, {2, 2, 2});
    const auto scan = surface_scan(mesh, truth, 3000, 9);
    for (Mode mode : {Mode::rigid_scale, Mode::rigid_scale_shape})
    {
        RegistrationConfig cfg;
        cfg.mode = mode;
        cfg.scan_key_points = scan_keys_for(scan, mesh, truth);
        const auto r = registration::register_model(shape_model(), scan, cfg);
        EXPECT_LE(r.stage_end_s2m[1], r.stage_end_s2m[0]);
        EXPECT_LE(r.stage_end_s2m[2], r.stage_end_s2m[1]);
        for (const auto& trace : r.stage_losses)
        {
            EXPECT_EQ(trace.size(), 166u);
        }
    }
}

TEST(Register, EquivariantUnderScanRotation)
{
    const auto mesh = mean_mesh();
    const Similarity truth = make_similarity(1.05, 0.2, {0, 0, 1}, {1, -1, 0.5});
    const auto scan = surface_scan(mesh, truth, 3000, 10);
    RegistrationConfig cfg;
    cfg.scan_key_points = scan_keys_for(scan, mesh, truth);
    const auto a = registration::register_mesh(mesh, scan, cfg);

    const Similarity q = make_similarity(1.0, 1.1, {1.0, -2.0, 0.5}, core::Vec3::Zero());
    core::PointCloud rotated = scan;
    for (auto& p : rotated.points) p = q.apply(p);
    const auto b = registration::register_mesh(mesh, rotated, cfg);

    EXPECT_NEAR(a.final_s2m, b.final_s2m, 1e-6);
    const Similarity composed = q.compose(a.transform());
    EXPECT_NEAR(b.scale, composed.scale, 1e-6);
    EXPECT_LT((b.transform().rotation - composed.rotation).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((b.translation - composed.translation).norm(), 1e-6);
}

TEST(Register, FinalDistanceIgnoresScanOrder)
{
    const auto mesh = mean_mesh();
    const auto scan = surface_scan(mesh, make_similarity(1.0, 0.1, {0, 1, 0}, {1, 0, 0}), 3000, 11);
    const auto r = registration::register_mesh(mesh, scan, RegistrationConfig{});
    const auto placed = registration::registered_mesh(r, mesh);
    core::PointCloud shuffled = scan;
    std::reverse(shuffled.points.begin(), shuffled.points.end());
    std::rotate(shuffled.points.begin(), shuffled.points.begin() + 1234, shuffled.points.end());
    EXPECT_NEAR(core::scan_to_mesh(shuffled, placed), r.final_s2m, 1e-12);
    EXPECT_NEAR(core::scan_to_mesh(scan, placed), r.final_s2m, 1e-12);
}

TEST(Register, DeterministicPerSeed)
{
    const auto mesh = mean_mesh();
    const auto scan = surface_scan(mesh, make_similarity(0.95, 0.25, {1, 1, 0}, {0, 3, 0}), 3000, 12);
    RegistrationConfig cfg;
    cfg.seed = 5;
    const auto a = registration::register_mesh(mesh, scan, cfg);
    const auto b = registration::register_mesh(mesh, scan, cfg);
    EXPECT_EQ(registration::to_json(a).dump(), registration::to_json(b).dump());
    cfg.seed = 6;
    const auto c = registration::register_mesh(mesh, scan, cfg);
    EXPECT_NE(a.stage_losses[1], c.stage_losses[1]);
}

TEST(Register, RejectsBadInputs)
{
    const auto mesh = mean_mesh();
    const auto scan = surface_scan(mesh, Similarity{}, 100, 13);
    RegistrationConfig cfg;
    cfg.mesh_key_points = KeyPoints{0, 1, 2, static_cast<int>(mesh.vertices.size())};
    EXPECT_THROW(registration::register_mesh(mesh, scan, cfg), std::invalid_argument);
    cfg = {};
    cfg.scan_key_points = KeyPoints{0, 1, 2, -1};
    EXPECT_THROW(registration::register_mesh(mesh, scan, cfg), std::invalid_argument);
    core::PointCloud tiny;
    tiny.points.assign(scan.points.begin(), scan.points.begin() + 3);
    EXPECT_THROW(registration::register_mesh(mesh, tiny, RegistrationConfig{}), std::invalid_argument);
    cfg = {};
    cfg.stage_iterations = 0;
    EXPECT_THROW(registration::register_mesh(mesh, scan, cfg), std::invalid_argument);
    cfg = {};
    cfg.lr_decay_per_stage = 1.5;
    EXPECT_THROW(registration::register_mesh(mesh, scan, cfg), std::invalid_argument);
}

TEST(Register, NonFiniteLossReportsStage)
{
    const auto mesh = mean_mesh();
    const auto scan = surface_scan(mesh, Similarity{}, 500, 14);
    RegistrationConfig cfg;
    cfg.initial_lr = 1e308;
    try
    {
        registration::register_mesh(mesh, scan, cfg);
        FAIL() << "expected a registration error";
    } catch (const registration::RegistrationError& e)
    {
        EXPECT_GE(e.stage(), 1);
        EXPECT_LE(e.stage(), 3);
        EXPECT_GE(e.iteration(), 0);
    }
}

TEST(RegistrationConfigJson, RoundTrip)
{
    RegistrationConfig c;
    c.mode = Mode::rigid_scale_shape;
    c.stage_iterations = 12;
    c.seed = 77;
    c.mesh_key_points = KeyPoints{1, 2, 3, 4};
    const auto back = registration::registration_config_from_json(registration::to_json(c));
    EXPECT_EQ(registration::to_json(back), registration::to_json(c));
    const auto defaults = registration::registration_config_from_json(nlohmann::json::object());
    EXPECT_EQ(defaults.stage_iterations, 166);
    EXPECT_DOUBLE_EQ(defaults.initial_lr, 0.45);
    EXPECT_DOUBLE_EQ(defaults.lr_decay_per_stage, 0.1);
    EXPECT_EQ(defaults.scan_subsample, 1000u);
    EXPECT_THROW(registration::registration_config_from_json(nlohmann::json{{"mode", "affine"}}),
                 std::invalid_argument);
}

std::vector<registration::ScanSample> perturbed_scans(int n, std::vector<core::TriMesh>* generators)
{
    std::vector<registration::ScanSample> scans;
    for (int i = 0; i < n; ++i)
    {
        core::Random rng(400 + i);
        Eigen::VectorXd beta(shape_model().dim());
        for (Eigen::Index j = 0; j < beta.size(); ++j) beta[j] = rng.normal();
        const auto mesh = morphable::decode_shape(shape_model(), beta);
        generators->push_back(mesh);
        const Similarity t = make_similarity(1.0, 0.15, {rng.normal(), rng.normal(), rng.normal()}, {1, 2, 3});
        auto scan = surface_scan(mesh, t, 3000, 500 + i);
        registration::ScanSample s{"s" + std::to_string(i), scan, registration::Laterality::right, {}};
        s.scan_key_points = scan_keys_for(scan, mesh, t);
        scans.push_back(std::move(s));
    }
    return scans;
}

TEST(EvaluateDataset, SelfEvaluationAndMeanShapeBaseline)
{
    std::vector<core::TriMesh> generators;
    const auto scans = perturbed_scans(4, &generators);
    const auto self = registration::evaluate_dataset(generators, scans, RegistrationConfig{});
    ASSERT_EQ(self.samples.size(), 4u);
    EXPECT_LT(self.mean_s2m, 0.05);
    const std::vector<core::TriMesh> mean(4, mean_mesh());
    const auto avg = registration::evaluate_dataset(mean, scans, RegistrationConfig{});
    EXPECT_GT(avg.mean_s2m, self.mean_s2m);

    const std::string csv = registration::to_csv(self);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    const auto j = registration::to_json(self);
    EXPECT_EQ(j["samples"].size(), 4u);
    EXPECT_DOUBLE_EQ(j["mean_s2m_mm"].get<double>(), self.mean_s2m);
}

TEST(EvaluateDataset, LeftScansAreMirrored)
{
    const auto mesh = mean_mesh();
    const auto left = core::reflect_sagittal(mesh);
    const auto scan = surface_scan(left, Similarity{}, 3000, 15);
    registration::ScanSample s{"left", scan, registration::Laterality::left, {}};
    const auto report = registration::evaluate_dataset({mesh}, {s}, RegistrationConfig{});
    EXPECT_LT(report.samples[0].s2m, 0.05);
    EXPECT_EQ(report.samples[0].laterality, registration::Laterality::left);
}

TEST(EvaluateDataset, ReflectionIsAnIsometry)
{
    const auto mesh = mean_mesh();
    const auto scan = surface_scan(mesh, make_similarity(1.0, 0.2, {1, 0, 0}, {0.5, 0, 0}), 2000, 16);
    EXPECT_NEAR(core::scan_to_mesh(core::reflect_sagittal(scan), mesh),
                core::scan_to_mesh(scan, core::reflect_sagittal(mesh)), 1e-12);
}

TEST(EvaluateDataset, LengthMismatchThrows)
{
    std::vector<core::TriMesh> generators;
    const auto scans = perturbed_scans(2, &generators);
    generators.pop_back();
    EXPECT_THROW(registration::evaluate_dataset(generators, scans, RegistrationConfig{}), std::invalid_argument);
    const auto empty = registration::evaluate_dataset({}, {}, RegistrationConfig{});
    EXPECT_TRUE(empty.samples.empty());
}

TEST(Laterality, Names)
{
    EXPECT_EQ(registration::laterality_from_string("left"), registration::Laterality::left);
    EXPECT_EQ(registration::laterality_from_string("R"), registration::Laterality::right);
    EXPECT_THROW(registration::laterality_from_string("up"), std::invalid_argument);
}

} // namespace
} // namespace audioear
