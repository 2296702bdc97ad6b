/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: tests/loss_suite_test.cpp
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

#include "audioear/core/primitives.hpp"
#include "audioear/fitting/gradient.hpp"
#include "audioear/loss/landmarks.hpp"
#include "audioear/loss/losses.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace audioear;
using core::Vec2;
using core::Vec3;

namespace {

/// 55 landmarks on four smooth open curves, grouped 20/15/10/10.
loss::LandmarkSet2D curvy_landmarks(core::Random& rng)
{
    loss::LandmarkSet2D lm;
    const int sizes[4] = {20, 15, 10, 10};
    int idx = 0;
    for (int g = 0; g < 4; ++g)
    {
        std::vector<int> group;
        const Vec2 c(rng.uniform(150, 350), rng.uniform(150, 350));
        const double r = rng.uniform(40, 120);
        const double a0 = rng.uniform(0, 6.28);
        for (int i = 0; i < sizes[g]; ++i)
        {
            const double a = a0 + 2.5 * i / sizes[g];
            lm.points.push_back(c + r * Vec2(std::cos(a), std::sin(a)) + Vec2(rng.uniform(-2, 2), rng.uniform(-2, 2)));
            group.push_back(idx++);
        }
        lm.groups.push_back(group);
    }
    return lm;
}

/// Four straight horizontal contours, each group's points evenly spaced.
loss::LandmarkSet2D straight_landmarks()
{
    loss::LandmarkSet2D lm;
    const int sizes[4] = {20, 15, 10, 10};
    int idx = 0;
    for (int g = 0; g < 4; ++g)
    {
        std::vector<int> group;
        for (int i = 0; i < sizes[g]; ++i)
        {
            lm.points.emplace_back(10.0 + 100.0 * i / (sizes[g] - 1), 50.0 * (g + 1));
            group.push_back(idx++);
        }
        lm.groups.push_back(group);
    }
    return lm;
}

std::vector<Vec2> perturbed(const std::vector<Vec2>& pts, core::Random& rng, double sigma)
{
    std::vector<Vec2> out = pts;
    for (auto& p : out) p += Vec2(rng.normal(0, sigma), rng.normal(0, sigma));
    return out;
}

Eigen::VectorXd flatten(const std::vector<Vec2>& pts)
{
    Eigen::VectorXd x(2 * pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) x.segment<2>(2 * i) = pts[i];
    return x;
}

std::vector<Vec2> unflatten(const Eigen::VectorXd& x)
{
    std::vector<Vec2> pts(x.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = x.segment<2>(2 * i);
    return pts;
}

} // namespace

TEST(ContourLoss, IdenticalIsZero)
{
    core::Random rng(1);
    const auto gt = curvy_landmarks(rng);
    EXPECT_EQ(loss::contour_loss(gt, gt), 0.0);
}

TEST(ContourLoss, PerpendicularShiftConvergesToOffset)
{
    const auto gt = straight_landmarks();
    const double d = 3.0;
    auto pred = gt;
    for (auto& p : pred.points) p.y() += d;
    EXPECT_NEAR(loss::contour_loss(pred, gt, 128), d, 0.01 * d);
    EXPECT_NEAR(loss::contour_loss(pred, gt, 2048), d, 1e-9);
}

TEST(ContourLoss, TangentialSlideIsNearlyFree)
{
    const auto gt = straight_landmarks();
    for (double slide : {1.0, 2.0, 4.0})
    {
        // Interior landmarks slid along the line, endpoints fixed.
        auto pred = gt;
        for (const auto& group : gt.groups)
        {
            for (std::size_t k = 1; k + 1 < group.size(); ++k)
            {
                const double room = std::min(pred.points[group[k]].x() - pred.points[group[k - 1]].x(), 5.0);
                pred.points[group[k]].x() += std::min(slide, room * 0.9);
            }
        }
        double d_slide = 0;
        for (std::size_t i = 0; i < gt.points.size(); ++i) d_slide = std::max(d_slide, (pred.points[i] - gt.points[i]).norm());
        EXPECT_LT(loss::contour_loss(pred, gt), 0.05 * d_slide) << slide;
        EXPECT_GT(loss::landmark_loss(pred.points, gt), 0.0);
    }
    // Landmark loss grows linearly with a uniform slide of interior points.
    double prev_ratio = -1;
    for (double slide : {0.5, 1.0, 2.0})
    {
        auto pred = gt;
        for (const auto& group : gt.groups)
            for (std::size_t k = 1; k + 1 < group.size(); ++k) pred.points[group[k]].x() += slide;
        const double ratio = loss::landmark_loss(pred.points, gt) / slide;
        if (prev_ratio > 0) EXPECT_NEAR(ratio, prev_ratio, 1e-12);
        prev_ratio = ratio;
    }
}

TEST(ContourLoss, ReversalInvariant)
{
    core::Random rng(2);
    auto gt = curvy_landmarks(rng);
    loss::LandmarkSet2D pred = gt;
    pred.points = perturbed(gt.points, rng, 3.0);
    const double base = loss::contour_loss(pred, gt);
    auto rev_gt = gt, rev_pred = pred;
    std::reverse(rev_gt.groups[1].begin(), rev_gt.groups[1].end());
    rev_pred.groups = rev_gt.groups;
    EXPECT_NEAR(loss::contour_loss(rev_pred, rev_gt), base, 1e-9);
}

TEST(ContourLoss, ZeroLengthPolylineIsRepeatedPoint)
{
    loss::LandmarkSet2D gt;
    gt.points = {{0, 0}, {0, 0}, {3, 4}, {3, 4}};
    gt.groups = {{0, 1}, {2, 3}};
    auto pred = gt;
    pred.points = {{3, 4}, {3, 4}, {3, 4}, {3, 4}};
    EXPECT_NEAR(loss::contour_loss(pred, gt, 16), 2.5, 1e-12);
}

TEST(ContourLoss, StructureMismatchThrows)
{
    core::Random rng(3);
    const auto gt = curvy_landmarks(rng);
    auto pred = gt;
    std::swap(pred.groups[0], pred.groups[1]);
    EXPECT_THROW(loss::contour_loss(pred, gt), std::invalid_argument);
    EXPECT_THROW(loss::contour_loss(gt, gt, 1), std::invalid_argument);
}

TEST(Resample, EndpointsAndUniformSpacing)
{
    const std::vector<Vec2> poly = {{0, 0}, {3, 0}, {3, 4}};
    const auto s = loss::resample_polyline(poly, 8);
    EXPECT_EQ(s.front(), poly.front());
    EXPECT_LT((s.back() - poly.back()).norm(), 1e-12);
    // Arclength 7, spacing 1.
    EXPECT_LT((s[3] - Vec2(3, 0)).norm(), 1e-12);
    EXPECT_LT((s[5] - Vec2(3, 2)).norm(), 1e-12);
}

TEST(SimilarityLoss, Examples)
{
    const std::vector<Eigen::VectorXd> same = {Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)};
    EXPECT_NEAR(loss::similarity_loss(same), 1.0, 1e-15);
    const std::vector<Eigen::VectorXd> ortho = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
    EXPECT_NEAR(loss::similarity_loss(ortho), 0.0, 1e-15);
    const std::vector<Eigen::VectorXd> three = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1),
                                                Eigen::Vector2d(1, 1) / std::sqrt(2.0)};
    EXPECT_NEAR(loss::similarity_loss(three), 2.0 * (0.0 + 2.0 / std::sqrt(2.0)) / 6.0, 1e-15);
    EXPECT_NEAR(loss::similarity_loss(three), 0.4714, 1e-4);
}

TEST(SimilarityLoss, ErrorsAndInvariants)
{
    const std::vector<Eigen::VectorXd> one = {Eigen::Vector2d(1, 0)};
    EXPECT_THROW(loss::similarity_loss(one), std::invalid_argument);
    const std::vector<Eigen::VectorXd> zero = {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 0)};
    EXPECT_THROW(loss::similarity_loss(zero), std::invalid_argument);
    core::Random rng(4);
    for (int trial = 0; trial < 100; ++trial)
    {
        std::vector<Eigen::VectorXd> batch(2 + rng.below(5));
        for (auto& b : batch)
        {
            b = Eigen::VectorXd(6);
            for (int i = 0; i < 6; ++i) b[i] = rng.normal();
        }
        const double v = loss::similarity_loss(batch);
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
        auto scaled = batch;
        for (auto& b : scaled) b *= rng.uniform(0.1, 10.0);
        EXPECT_NEAR(loss::similarity_loss(scaled), v, 1e-12);
    }
}

TEST(RangeLoss, Examples)
{
    EXPECT_EQ(loss::range_loss(3, 0.5, 4), 0.0);
    EXPECT_EQ(loss::range_loss(5, 0.5, 4), 1.0);
    EXPECT_EQ(loss::range_loss(0, 0.5, 4), 0.25);
    double g = 1.0;
    loss::range_loss(2, 0.5, 4, &g);
    EXPECT_EQ(g, 0.0);
    EXPECT_THROW(loss::range_loss(0, 2, 1), std::invalid_argument);
}

TEST(RangeLoss, ContinuouslyDifferentiableAtBounds)
{
    for (double bound : {0.5, 4.0})
    {
        double gl = 0, gr = 0;
        const double h = 1e-9;
        const double vl = loss::range_loss(bound - h, 0.5, 4, &gl);
        const double vr = loss::range_loss(bound + h, 0.5, 4, &gr);
        EXPECT_NEAR(vl, vr, 1e-15);
        EXPECT_NEAR(gl, gr, 1e-8);
    }
}

TEST(CameraLoss, Examples)
{
    render::CameraParams cam;
    cam.scale = 1;
    cam.rotation = Vec3(0.3, -1, 2.0);
    EXPECT_EQ(loss::camera_loss(cam), 0.0);
    cam.scale = 5;
    EXPECT_EQ(loss::camera_loss(cam), 1.0);
    cam.scale = 1;
    cam.rotation.y() = 0;
    EXPECT_EQ(loss::camera_loss(cam), 0.25);
    cam.rotation = Vec3(17.0, -1.0, -9.0);
    cam.translation = Vec2(1e5, -1e5);
    EXPECT_EQ(loss::camera_loss(cam), 0.0);
}

TEST(LandmarkLoss, Examples)
{
    core::Random rng(5);
    const auto gt = curvy_landmarks(rng);
    EXPECT_EQ(loss::landmark_loss(gt.points, gt), 0.0);
    // Box 60 x 80 -> diagonal 100.
    std::vector<Vec2> g = {{0, 0}, {60, 80}, {30, 40}};
    std::vector<Vec2> p = g;
    for (auto& q : p) q += Vec2(3, 4);
    EXPECT_NEAR(loss::landmark_loss(std::span<const Vec2>(p), std::span<const Vec2>(g)), 0.05, 1e-15);
    const std::vector<Vec2> flat = {{1, 1}, {1, 1}};
    EXPECT_THROW(loss::landmark_loss(std::span<const Vec2>(flat), std::span<const Vec2>(flat)), std::invalid_argument);
}

TEST(LandmarkLoss, ScaleAndRigidInvariance)
{
    core::Random rng(6);
    for (int trial = 0; trial < 50; ++trial)
    {
        const auto gt = curvy_landmarks(rng);
        const auto pred = perturbed(gt.points, rng, 4.0);
        const double base = loss::landmark_loss(pred, gt);
        const double c = rng.uniform(0.2, 5.0);
        const double a = rng.uniform(-3, 3);
        const Vec2 centre(rng.uniform(-100, 100), rng.uniform(-100, 100));
        const Vec2 t(rng.uniform(-100, 100), rng.uniform(-100, 100));
        Eigen::Matrix2d r;
        r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        std::vector<Vec2> sp, sg, rp, rg;
        for (std::size_t i = 0; i < pred.size(); ++i)
        {
            sp.push_back(centre + c * (pred[i] - centre));
            sg.push_back(centre + c * (gt.points[i] - centre));
            rp.push_back(r * pred[i] + t);
            rg.push_back(r * gt.points[i] + t);
        }
        EXPECT_NEAR(loss::landmark_loss(std::span<const Vec2>(sp), std::span<const Vec2>(sg)), base, 1e-12);
        // Rigid motion changes the axis-aligned box, so only translations keep D_gt; rotations by
        // multiples of pi/2 keep it exactly.
        Eigen::Matrix2d quarter;
        quarter << 0, -1, 1, 0;
        std::vector<Vec2> qp, qg;
        for (std::size_t i = 0; i < pred.size(); ++i)
        {
            qp.push_back(quarter * pred[i] + t);
            qg.push_back(quarter * gt.points[i] + t);
        }
        EXPECT_NEAR(loss::landmark_loss(std::span<const Vec2>(qp), std::span<const Vec2>(qg)), base, 1e-12);
        // Numerator is rigid-invariant for any rotation.
        const double num = base * pred.size() * loss::bounding_box_diagonal(gt.points);
        const double num_r = loss::landmark_loss(std::span<const Vec2>(rp), std::span<const Vec2>(rg)) * pred.size() *
                             loss::bounding_box_diagonal(rg);
        EXPECT_NEAR(num_r, num, 1e-9 * num);
    }
}

TEST(PhotometricLoss, Examples)
{
    const int w = 16, h = 12;
    core::Image img(w, h, 3), mask(w, h, 1);
    render::RenderOutput r{core::Image(w, h, 3), core::Image(w, h, 1), core::Image(w, h, 1)};
    EXPECT_EQ(loss::photometric_loss(img, r, mask), 0.0);
    const float c = 0.6f;
    int masked = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
        {
            for (int ch = 0; ch < 3; ++ch) img(x, y, ch) = c;
            if (x > 3 && x < 11 && y > 2 && y < 9)
            {
                mask(x, y) = 1.0f;
                ++masked;
            }
        }
    EXPECT_NEAR(loss::photometric_loss(img, r, mask), c * std::sqrt(3.0 * masked / (w * h)), 1e-6);
    // Rendered equals masked input.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask(x, y) > 0.5f)
            {
                r.mask(x, y) = 1.0f;
                for (int ch = 0; ch < 3; ++ch) r.rgb(x, y, ch) = c;
            }
    EXPECT_EQ(loss::photometric_loss(img, r, mask), 0.0);
    EXPECT_THROW(loss::photometric_loss(core::Image(3, 3, 3), r, mask), std::invalid_argument);
}

TEST(RegLoss, Examples)
{
    const Eigen::VectorXd b0 = Eigen::VectorXd::Zero(236), t0 = Eigen::VectorXd::Zero(50);
    EXPECT_EQ(loss::reg_loss(b0, t0, 236, 50), 0.0);
    EXPECT_EQ(loss::reg_loss(Eigen::VectorXd::Ones(236), t0, 236, 50), 1.0);
    Eigen::VectorXd alt(50);
    for (int i = 0; i < 50; ++i) alt[i] = (i % 2) ? 2.0 : -2.0;
    EXPECT_EQ(loss::reg_loss(b0, alt, 236, 50), 2.0);
    EXPECT_THROW(loss::reg_loss(Eigen::VectorXd::Zero(235), t0, 236, 50), std::invalid_argument);
}

TEST(TotalLoss, ExamplesAndLinearity)
{
    const loss::LossWeights w;
    loss::LossComponents zero{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    EXPECT_EQ(loss::total_loss(zero, w), 0.0);
    loss::LossComponents ones{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    EXPECT_NEAR(loss::total_loss(ones, w), 321.005, 1e-12);
    auto one = zero;
    one.lmk = 2.5;
    EXPECT_NEAR(loss::total_loss(one, w), 25.0, 1e-12);
    auto more = one;
    more.lmk = 5.0;
    EXPECT_NEAR(loss::total_loss(more, w) - loss::total_loss(one, w), w.lmk * 2.5, 1e-12);
    loss::LossWeights neg;
    neg.smooth = -1;
    EXPECT_THROW(loss::total_loss(ones, neg), std::invalid_argument);
    auto missing = ones;
    missing.sim.reset();
    EXPECT_THROW(loss::total_loss(missing, w), std::invalid_argument);
    loss::LossWeights no_sim;
    no_sim.sim = 0;
    EXPECT_NEAR(loss::total_loss(missing, no_sim), 320.005, 1e-12);
}

TEST(LandmarkIo, JsonRoundTripAndValidation)
{
    test::TempDir dir;
    core::Random rng(7);
    auto lm = curvy_landmarks(rng);
    lm.occlusion = loss::Occlusion::earring;
    loss::save_landmarks(lm, dir / "lm.json");
    const auto back = loss::load_landmarks(dir / "lm.json");
    EXPECT_EQ(back.points, lm.points);
    EXPECT_EQ(back.groups, lm.groups);
    EXPECT_EQ(back.occlusion, loss::Occlusion::earring);
    auto bad = lm;
    bad.groups[0].push_back(bad.groups[1][0]);
    EXPECT_THROW(loss::validate(bad), std::invalid_argument);
}

// Analytic gradients against central differences on random instances.

TEST(LossGradients, ContourMatchesFiniteDifferences)
{
    core::Random rng(100);
    for (int trial = 0; trial < 100; ++trial)
    {
        const auto gt = curvy_landmarks(rng);
        const auto pred = perturbed(gt.points, rng, 5.0);
        const fitting::LossFunction f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            std::vector<Vec2> grad;
            const double v = loss::contour_loss(unflatten(x), gt, 128, g ? &grad : nullptr);
            if (g) *g = flatten(grad);
            return v;
        };
        const Eigen::VectorXd x = flatten(pred);
        const auto ga = fitting::gradient(f, x, fitting::GradientMode::analytic);
        // Chamfer matching is piecewise smooth; a small step keeps the stencil off the kinks.
        const auto gf = fitting::finite_difference_gradient(f, x, 1e-9);
        EXPECT_LT(fitting::relative_error(ga, gf), 1e-4) << trial;
    }
}

TEST(LossGradients, LandmarkMatchesFiniteDifferences)
{
    core::Random rng(101);
    for (int trial = 0; trial < 100; ++trial)
    {
        const auto gt = curvy_landmarks(rng);
        const fitting::LossFunction f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            std::vector<Vec2> grad;
            const double v = loss::landmark_loss(unflatten(x), gt, g ? &grad : nullptr);
            if (g) *g = flatten(grad);
            return v;
        };
        const Eigen::VectorXd x = flatten(perturbed(gt.points, rng, 5.0));
        const auto ga = fitting::gradient(f, x, fitting::GradientMode::analytic);
        // Pixel-scale coordinates: a step well below the residual keeps truncation error small.
        const auto gf = fitting::finite_difference_gradient(f, x, 1e-7);
        EXPECT_LT(fitting::relative_error(ga, gf), 1e-4) << trial;
    }
}

TEST(LossGradients, SimilarityMatchesFiniteDifferences)
{
    core::Random rng(102);
    for (int trial = 0; trial < 100; ++trial)
    {
        const int bs = 2 + static_cast<int>(rng.below(4)), dim = 8;
        const fitting::LossFunction f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            std::vector<Eigen::VectorXd> batch(bs);
            for (int i = 0; i < bs; ++i) batch[i] = x.segment(i * dim, dim);
            std::vector<Eigen::VectorXd> grad;
            const double v = loss::similarity_loss(batch, g ? &grad : nullptr);
            if (g)
            {
                g->resize(x.size());
                for (int i = 0; i < bs; ++i) g->segment(i * dim, dim) = grad[i];
            }
            return v;
        };
        Eigen::VectorXd x(bs * dim);
        for (int i = 0; i < x.size(); ++i) x[i] = rng.normal();
        const auto ga = fitting::gradient(f, x, fitting::GradientMode::analytic);
        const auto gf = fitting::gradient(f, x, fitting::GradientMode::finite_difference);
        EXPECT_LT(fitting::relative_error(ga, gf), 1e-4) << trial;
    }
}

TEST(LossGradients, SmoothMatchesFiniteDifferences)
{
    const auto sphere = core::make_icosphere(5.0, 1);
    const auto nbrs = core::vertex_neighbors(sphere);
    core::Random rng(103);
    for (int trial = 0; trial < 100; ++trial)
    {
        std::vector<Vec3> v = sphere.vertices;
        for (auto& p : v) p += test::random_vec3(rng, -0.5, 0.5);
        const fitting::LossFunction f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            std::vector<Vec3> pts(x.size() / 3);
            for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = x.segment<3>(3 * i);
            std::vector<Vec3> grad;
            const double val = loss::smooth_loss(pts, nbrs, g ? &grad : nullptr);
            if (g)
            {
                g->resize(x.size());
                for (std::size_t i = 0; i < pts.size(); ++i) g->segment<3>(3 * i) = grad[i];
            }
            return val;
        };
        Eigen::VectorXd x(3 * v.size());
        for (std::size_t i = 0; i < v.size(); ++i) x.segment<3>(3 * i) = v[i];
        const auto ga = fitting::gradient(f, x, fitting::GradientMode::analytic);
        const auto gf = fitting::gradient(f, x, fitting::GradientMode::finite_difference);
        EXPECT_LT(fitting::relative_error(ga, gf), 1e-4) << trial;
    }
}

TEST(LossGradients, RangeAndRegMatchFiniteDifferences)
{
    core::Random rng(104);
    for (int trial = 0; trial < 100; ++trial)
    {
        const fitting::LossFunction range = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            double d = 0;
            const double v = loss::range_loss(x[0], 0.5, 4.0, &d);
            if (g) *g = Eigen::VectorXd::Constant(1, d);
            return v;
        };
        Eigen::VectorXd x = Eigen::VectorXd::Constant(1, rng.uniform(-3, 8));
        EXPECT_LT(fitting::relative_error(fitting::gradient(range, x, fitting::GradientMode::analytic),
                                              fitting::gradient(range, x, fitting::GradientMode::finite_difference)),
                  1e-4);
        const fitting::LossFunction reg = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
            Eigen::VectorXd gb, gt;
            const double v = loss::reg_loss(x.head(8), x.tail(5), g ? &gb : nullptr, g ? &gt : nullptr);
            if (g)
            {
                g->resize(13);
                *g << gb, gt;
            }
            return v;
        };
        Eigen::VectorXd y(13);
        for (int i = 0; i < 13; ++i) y[i] = rng.uniform(0.1, 2.0) * (rng.uniform() < 0.5 ? -1 : 1);
        EXPECT_LT(fitting::relative_error(fitting::gradient(reg, y, fitting::GradientMode::analytic),
                                              fitting::gradient(reg, y, fitting::GradientMode::finite_difference)),
                  1e-4);
    }
}

TEST(LossGradients, InteriorRangeGradientIsZero)
{
    double g = 1;
    loss::range_loss(2.0, 0.5, 4.0, &g);
    EXPECT_EQ(g, 0.0);
}
