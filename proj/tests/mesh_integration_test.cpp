/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: tests/mesh_integration_test.cpp
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
#include "audioear/stitch/stitch.hpp"
#include "stitch_fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <set>

namespace {

using namespace audioear;
using stitch::Triangle;
using stitch::Vec2;
using core::TriMesh;
using core::Vec3;

constexpr double pi = std::numbers::pi;

std::set<std::pair<int, int>> boundary_half_edges(const TriMesh& m)
{
    const auto counts = core::edge_face_counts(m);
    std::set<std::pair<int, int>> out;
    for (const auto& f : m.faces)
    {
        for (int e = 0; e < 3; ++e)
        {
            const int a = f[e], b = f[(e + 1) % 3];
            if (counts.at(std::minmax(a, b)) == 1)
            {
                out.emplace(a, b);
            }
        }
    }
    return out;
}

TriMesh without_faces(const TriMesh& m, const std::function<bool(const Vec3&)>& drop)
{
    TriMesh out;
    out.vertices = m.vertices;
    for (const auto& f : m.faces)
    {
        const Vec3 c = (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
        if (!drop(c))
        {
            out.faces.push_back(f);
        }
    }
    return out;
}

/// Sorted geometric triangles, rounded, so loops with different numbering compare equal.
std::set<std::array<long long, 6>> geometric(const std::vector<Vec2>& pts, const std::vector<Triangle>& tris)
{
    std::set<std::array<long long, 6>> out;
    for (const auto& t : tris)
    {
        std::array<std::pair<long long, long long>, 3> v;
        for (int i = 0; i < 3; ++i)
        {
            v[i] = {std::llround(pts[t[i]].x() * 1e9), std::llround(pts[t[i]].y() * 1e9)};
        }
        std::sort(v.begin(), v.end());
        out.insert({v[0].first, v[0].second, v[1].first, v[1].second, v[2].first, v[2].second});
    }
    return out;
}

std::vector<Vec2> concat(const std::vector<Vec2>& a, const std::vector<Vec2>& b)
{
    std::vector<Vec2> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

double triangles_area(const std::vector<Vec2>& pts, const std::vector<Triangle>& tris)
{
    double a = 0.0;
    for (const auto& t : tris)
    {
        const Vec2 u = pts[t[1]] - pts[t[0]], w = pts[t[2]] - pts[t[0]];
        a += 0.5 * (u.x() * w.y() - u.y() * w.x());
    }
    return a;
}

/// Star-shaped loop with random radii, counter-clockwise.
std::vector<Vec2> star_loop(core::Random& rng, int n, double r0, double spread, double phase)
{
    std::vector<Vec2> p;
    for (int k = 0; k < n; ++k)
    {
        const double t = 2.0 * pi * (k + phase) / n;
        const double r = r0 * (1.0 + rng.uniform(-spread, spread));
        p.emplace_back(r * std::cos(t), r * std::sin(t));
    }
    return p;
}

// ---------------------------------------------------------------- loops

TEST(BoundaryLoops, ClosedSphereHasNone)
{
    EXPECT_TRUE(stitch::extract_boundary_loops(core::make_icosphere(1.0, 2)).empty());
}

TEST(BoundaryLoops, SingleTriangleFollowsWinding)
{
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 2}};
    const auto loops = stitch::extract_boundary_loops(m);
    ASSERT_EQ(loops.size(), 1u);
    EXPECT_EQ(loops[0].vertices, (std::vector<int>{0, 1, 2}));
    EXPECT_NEAR(loops[0].length, 2.0 + std::sqrt(2.0), 1e-12);
}

TEST(BoundaryLoops, PlaneWithTwoHolesMatchesEdgeCounting)
{
    const TriMesh grid = core::make_grid(10, 10, 1.0);
    const TriMesh m = without_faces(grid, [](const Vec3& c) {
        return (c.x() > 2 && c.x() < 4 && c.y() > 2 && c.y() < 4) || (c.x() > 6 && c.x() < 7 && c.y() > 5 && c.y() < 7);
    });
    const auto loops = stitch::extract_boundary_loops(m);
    ASSERT_EQ(loops.size(), 3u);
    EXPECT_NEAR(loops[0].length, 40.0, 1e-12);
    EXPECT_NEAR(loops[1].length, 8.0, 1e-12);
    EXPECT_NEAR(loops[2].length, 6.0, 1e-12);

    std::set<std::pair<int, int>> chained;
    std::set<int> seen;
    for (const auto& loop : loops)
    {
        for (std::size_t i = 0; i < loop.vertices.size(); ++i)
        {
            EXPECT_TRUE(seen.insert(loop.vertices[i]).second);
            chained.emplace(loop.vertices[i], loop.vertices[(i + 1) % loop.vertices.size()]);
        }
    }
    EXPECT_EQ(chained, boundary_half_edges(m));
}

TEST(BoundaryLoops, NonManifoldEdgeIsNamed)
{
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
    m.faces = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
    try
    {
        stitch::extract_boundary_loops(m);
        FAIL() << "expected NonManifoldEdge";
    } catch (const stitch::NonManifoldEdge& e)
    {
        EXPECT_EQ(e.edge(), std::make_pair(0, 1));
    }
}

// ---------------------------------------------------------------- plane

TEST(ProjectionPlane, FlatLoopLiesInPlane)
{
    TriMesh m = core::make_grid(4, 3, 0.5);
    for (auto& v : m.vertices)
    {
        v.z() = 2.0;
    }
    const auto loops = stitch::extract_boundary_loops(m);
    const auto plane = stitch::fit_projection_plane(m, loops[0]);
    EXPECT_NEAR((plane.normal - Vec3::UnitZ()).norm(), 0.0, 1e-12);
    EXPECT_NEAR((plane.origin - Vec3(1.0, 0.75, 2.0)).norm(), 0.0, 1e-12);
    EXPECT_NEAR(plane.u.dot(plane.v), 0.0, 1e-12);
    EXPECT_NEAR(plane.u.cross(plane.v).dot(plane.normal), 1.0, 1e-12);
    for (int v : loops[0].vertices)
    {
        EXPECT_NEAR((m.vertices[v] - plane.origin).dot(plane.normal), 0.0, 1e-12);
    }
}

// Documented bound: curvature times the farthest loop vertex distance from the apex at most 0.25.
TEST(ProjectionPlane, GentlyCurvedPatchStaysWithinFifteenDegrees)
{
    const double half = 5.0;
    for (double kappa : {0.01, 0.02, 0.25 / (half * std::sqrt(2.0))})
    {
        TriMesh m = core::make_grid(20, 20, 2.0 * half / 20);
        for (auto& v : m.vertices)
        {
            v.x() -= half;
            v.y() -= half;
            v.z() = 0.5 * kappa * (v.x() * v.x() + v.y() * v.y());
        }
        const auto loops = stitch::extract_boundary_loops(m);
        const auto plane = stitch::fit_projection_plane(m, loops[0]);
        std::set<int> on_loop(loops[0].vertices.begin(), loops[0].vertices.end());
        for (const auto& f : m.faces)
        {
            if (on_loop.count(f[0]) || on_loop.count(f[1]) || on_loop.count(f[2]))
            {
                const Vec3 n = core::face_normal_unnormalized(m, f).normalized();
                EXPECT_LT(std::acos(std::min(1.0, n.dot(plane.normal))) * 180.0 / pi, 15.0) << kappa;
            }
        }
    }
}

TEST(ProjectionPlane, CancellingNormalsThrow)
{
    TriMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, 1, 0}};
    m.faces = {{0, 1, 2}, {1, 0, 3}};
    const auto loops = stitch::extract_boundary_loops(m);
    ASSERT_EQ(loops.size(), 1u);
    EXPECT_THROW(stitch::fit_projection_plane(m, loops[0]), std::invalid_argument);
}

// ---------------------------------------------------------------- triangulation

TEST(TriangulateAnnulus, SquareGivesTwoRightTriangles)
{
    const std::vector<Vec2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const auto tris = stitch::triangulate_annulus(sq);
    ASSERT_EQ(tris.size(), 2u);
    EXPECT_NEAR(fixtures::min_angle_deg(sq, tris), 45.0, 1e-9);
}

// Aligned 16-gons: every inner edge needs an outer apex, and the best one
// sees the inner chord under atan2 of the triangle's own geometry.
TEST(TriangulateAnnulus, AlignedSixteenGonsReachTheMaxMinAngle)
{
    const auto outer = fixtures::regular_polygon(16, 2.0);
    const auto inner = fixtures::regular_polygon(16, 1.0);
    const auto pts = concat(outer, inner);
    const auto tris = stitch::triangulate_annulus(outer, inner);
    ASSERT_EQ(tris.size(), 32u);
    const auto cons = fixtures::loop_constraints(16, 16);
    EXPECT_EQ(fixtures::constrained_delaunay_violations(pts, cons, tris), 0);

    // Apex angle at outer vertex B over the inner chord ab, with a and B adjacent in angle.
    const Vec2 a = inner[0], b = inner[1], apex = outer[1];
    const Vec2 u = a - apex, w = b - apex;
    const double optimum = std::atan2(std::abs(u.x() * w.y() - u.y() * w.x()), u.dot(w)) * 180.0 / pi;
    EXPECT_NEAR(fixtures::min_angle_deg(pts, tris), optimum, 1e-9);
    EXPECT_NEAR(triangles_area(pts, tris), stitch::polygon_area(outer) - stitch::polygon_area(inner), 1e-12);
}

TEST(TriangulateAnnulus, HalfStepSixteenGonsKeepTwentyDegreesAndArea)
{
    const auto outer = fixtures::regular_polygon(16, 2.0);
    const auto inner = fixtures::regular_polygon(16, 1.0, 0.5);
    const auto pts = concat(outer, inner);
    const auto tris = stitch::triangulate_annulus(outer, inner);
    ASSERT_EQ(tris.size(), 32u);
    EXPECT_GE(fixtures::min_angle_deg(pts, tris), 20.0);
    EXPECT_EQ(fixtures::constrained_delaunay_violations(pts, fixtures::loop_constraints(16, 16), tris), 0);
    EXPECT_NEAR(triangles_area(pts, tris), stitch::polygon_area(outer) - stitch::polygon_area(inner), 1e-12);
}

TEST(TriangulateAnnulus, RandomAnnuliAreConstrainedDelaunay)
{
    core::Random rng(5);
    for (int trial = 0; trial < 40; ++trial)
    {
        const int n = 6 + trial % 17, m = 3 + (trial * 7) % 19;
        const auto outer = star_loop(rng, n, 3.0, 0.25, rng.uniform(0.0, 1.0));
        auto inner = star_loop(rng, m, 1.2, 0.3, rng.uniform(0.0, 1.0));
        for (auto& p : inner)
        {
            p += Vec2(0.3, -0.2);
        }
        const auto pts = concat(outer, inner);
        const auto tris = stitch::triangulate_annulus(outer, inner);
        EXPECT_EQ(static_cast<int>(tris.size()), n + m) << trial;
        EXPECT_NEAR(triangles_area(pts, tris), stitch::polygon_area(outer) - stitch::polygon_area(inner), 1e-9)
            << trial;
        EXPECT_EQ(fixtures::constrained_delaunay_violations(pts, fixtures::loop_constraints(n, m), tris), 0) << trial;
        for (const auto& t : tris)
        {
            const Vec2 u = pts[t[1]] - pts[t[0]], w = pts[t[2]] - pts[t[0]];
            EXPECT_GT(u.x() * w.y() - u.y() * w.x(), 0.0);
        }
    }
}

TEST(TriangulateAnnulus, IndependentOfStartVertexAndOrientation)
{
    core::Random rng(8);
    for (int trial = 0; trial < 20; ++trial)
    {
        const auto outer = trial < 2 ? fixtures::regular_polygon(16, 2.0) : star_loop(rng, 13, 3.0, 0.2, 0.0);
        const auto inner = trial < 2 ? fixtures::regular_polygon(16, 1.0, 0.5 * trial) : star_loop(rng, 9, 1.0, 0.2, 0.3);
        const auto ref = geometric(concat(outer, inner), stitch::triangulate_annulus(outer, inner));

        auto o2 = outer;
        std::rotate(o2.begin(), o2.begin() + 1 + trial % 5, o2.end());
        auto i2 = inner;
        std::reverse(i2.begin(), i2.end());
        std::rotate(i2.begin(), i2.begin() + trial % 3, i2.end());
        if (trial % 2)
        {
            std::reverse(o2.begin(), o2.end());
        }
        EXPECT_EQ(geometric(concat(o2, i2), stitch::triangulate_annulus(o2, i2)), ref) << trial;
    }
}

TEST(TriangulateAnnulus, IntersectingLoopsReportSegments)
{
    const auto outer = fixtures::regular_polygon(8, 2.0);
    auto inner = fixtures::regular_polygon(8, 1.0);
    inner[0] = Vec2(2.5, 0.0);
    try
    {
        stitch::triangulate_annulus(outer, inner);
        FAIL() << "expected TriangulationError";
    } catch (const stitch::TriangulationError& e)
    {
        EXPECT_GE(e.first_segment(), 0);
        EXPECT_GE(e.second_segment(), 8);
    }
}

TEST(TriangulateAnnulus, InnerOutsideOrSelfCrossingRejected)
{
    const auto outer = fixtures::regular_polygon(8, 2.0);
    auto far = fixtures::regular_polygon(5, 0.5);
    for (auto& p : far)
    {
        p += Vec2(10.0, 0.0);
    }
    EXPECT_THROW(stitch::triangulate_annulus(outer, far), stitch::TriangulationError);
    const std::vector<Vec2> bowtie{{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    EXPECT_THROW(stitch::triangulate_annulus(bowtie), stitch::TriangulationError);
    EXPECT_THROW(stitch::triangulate_annulus(std::vector<Vec2>{{0, 0}, {1, 0}}), std::invalid_argument);
}

// ---------------------------------------------------------------- stitch


TEST(Stitch, CylinderAndCapBecomeWatertight)
{
    const auto pair = fixtures::cylinder_and_cap(0.5);
    const auto res = stitch::stitch(pair.ear, pair.body);
    EXPECT_TRUE(fixtures::watertight(res.mesh));
    EXPECT_EQ(fixtures::euler_characteristic(res.mesh), 2);
    EXPECT_EQ(res.quality.boundary_edge_count, 0u);
    EXPECT_EQ(res.seam_faces.size(), 32u + 24u);
    EXPECT_EQ(res.seam_min_angles.size(), res.seam_faces.size());
    EXPECT_GE(res.quality.min_angle, 10.0);
    EXPECT_GT(core::signed_volume(res.mesh), 0.0);
    EXPECT_NEAR(res.plane.normal.z(), 1.0, 1e-9);
}

TEST(Stitch, LiftedSeamAreaTracksPlanarAnnulus)
{
    for (double lift : {0.0, 1.0, 3.0})
    {
        const auto pair = fixtures::cylinder_and_cap(lift);
        stitch::StitchConfig cfg;
        cfg.smoothing_iterations = 0;
        const auto res = stitch::stitch(pair.ear, pair.body, cfg);
        double lifted = 0.0;
        for (int f : res.seam_faces)
        {
            lifted += core::face_area(res.mesh, res.mesh.faces[f]);
        }
        const auto outer = fixtures::regular_polygon(32, 20.0);
        const auto inner = fixtures::regular_polygon(24, 12.0, 0.5);
        const double planar = stitch::polygon_area(outer) - stitch::polygon_area(inner);
        EXPECT_NEAR(lifted / planar, 1.0, 0.10) << lift;
    }
}

TEST(Stitch, DeskScaleConcentricBodiesKeepTenDegrees)
{
    for (int body_segments : {24, 32, 40})
    {
        for (int cap_segments : {16, 24})
        {
            const auto pair = fixtures::cylinder_and_cap(0.5, body_segments, cap_segments);
            const auto res = stitch::stitch(pair.ear, pair.body);
            EXPECT_GE(res.quality.min_angle, 10.0) << body_segments << " " << cap_segments;
            EXPECT_EQ(res.quality.sliver_count, 0u);
        }
    }
}

TEST(Stitch, CutAndRestitchReproducesTheClosedMesh)
{
    const auto profile = fixtures::capped_cylinder_profile(20.0, 30.0, 10, 6);
    const TriMesh original = fixtures::revolution(profile, 24, 30.0, 0.0);
    // ear: pole plus cap rings 0..3; gap strip between rings 3 and 4; body: the rest.
    const std::vector<fixtures::Ring> ear_rings(profile.begin(), profile.begin() + 4);
    const std::vector<fixtures::Ring> body_rings(profile.begin() + 4, profile.end());
    const TriMesh ear = fixtures::revolution(ear_rings, 24, 30.0, std::nullopt);
    const TriMesh body = fixtures::revolution(body_rings, 24, std::nullopt, 0.0);
    ASSERT_EQ(stitch::extract_boundary_loops(ear).size(), 1u);

    const auto res = stitch::stitch(ear, body);
    EXPECT_EQ(res.quality.boundary_edge_count, 0u);
    EXPECT_TRUE(fixtures::watertight(res.mesh));
    EXPECT_EQ(fixtures::euler_characteristic(res.mesh), 2);
    EXPECT_LT(fixtures::hausdorff(res.mesh, original), 1e-6);
    EXPECT_NEAR(core::signed_volume(res.mesh), core::signed_volume(original), 1e-6);
}

TEST(Stitch, SmoothingStaysNearTheSeam)
{
    const auto pair = fixtures::cylinder_and_cap(2.0);
    stitch::StitchConfig rough;
    rough.smoothing_iterations = 0;
    const auto a = stitch::stitch(pair.ear, pair.body, rough);
    const auto b = stitch::stitch(pair.ear, pair.body);
    const auto loops_b = stitch::extract_boundary_loops(pair.body);
    std::vector<int> seeds = loops_b[0].vertices;
    const auto loops_e = stitch::extract_boundary_loops(pair.ear);
    for (int v : loops_e[0].vertices)
    {
        seeds.push_back(static_cast<int>(pair.body.vertices.size()) + v);
    }
    const auto near = stitch::vertex_rings(a.mesh, seeds, 2);
    int moved = 0;
    for (std::size_t i = 0; i < a.mesh.vertices.size(); ++i)
    {
        const double d = (a.mesh.vertices[i] - b.mesh.vertices[i]).norm();
        if (!near[i])
        {
            EXPECT_EQ(d, 0.0) << i;
        } else if (d > 0.0)
        {
            ++moved;
        }
    }
    EXPECT_GT(moved, 0);
}

TEST(Stitch, Rejections)
{
    const auto pair = fixtures::cylinder_and_cap(0.5);
    stitch::StitchConfig cfg;
    cfg.hole_loop = 3;
    EXPECT_THROW(stitch::stitch(pair.ear, pair.body, cfg), std::invalid_argument);

    stitch::StitchConfig far;
    far.placement.translation = Vec3(100.0, 0.0, 0.0);
    EXPECT_THROW(stitch::stitch(pair.ear, pair.body, far), stitch::TriangulationError);

    const auto closed = core::make_icosphere(5.0, 1);
    EXPECT_THROW(stitch::stitch(closed, pair.body), std::invalid_argument);

    TriMesh flipped = pair.ear;
    for (auto& f : flipped.faces)
    {
        std::swap(f[1], f[2]);
    }
    EXPECT_THROW(stitch::stitch(flipped, pair.body), std::invalid_argument);

    stitch::StitchConfig bad;
    bad.smoothing_step = 0.0;
    EXPECT_THROW(stitch::stitch(pair.ear, pair.body, bad), std::invalid_argument);
}

TEST(Stitch, AlignLoopsRecoversAPlacement)
{
    // Elliptic cap so the loop has a distinct major axis.
    auto pair = fixtures::cylinder_and_cap(0.0);
    for (auto& v : pair.ear.vertices)
    {
        v.x() *= 1.3;
        v.y() *= 0.9;
    }
    const Eigen::Matrix3d r = render::euler_rotation(Vec3(0.4, -0.7, 1.1));
    const TriMesh moved = core::transformed(pair.ear, 1.0, r, Vec3(40.0, -15.0, 7.0));
    const auto p = stitch::align_loops(moved, pair.body);
    stitch::StitchConfig cfg;
    cfg.placement = p;
    const TriMesh placed = core::transformed(moved, 1.0, p.rotation_matrix(), p.translation);
    const auto ear_loop = stitch::extract_boundary_loops(placed)[0];
    const auto body_loop = stitch::extract_boundary_loops(pair.body)[0];
    const auto ear_plane = stitch::fit_projection_plane(placed, ear_loop);
    Vec3 body_centre = Vec3::Zero();
    for (int v : body_loop.vertices)
    {
        body_centre += pair.body.vertices[v];
    }
    body_centre /= static_cast<double>(body_loop.vertices.size());
    EXPECT_LT((ear_plane.origin - body_centre).norm(), 1e-9);
    EXPECT_GT(ear_plane.normal.z(), 1.0 - 1e-9);
    const auto res = stitch::stitch(moved, pair.body, cfg);
    EXPECT_TRUE(fixtures::watertight(res.mesh));
}

TEST(StitchConfig, JsonRoundTripAndValidation)
{
    stitch::StitchConfig c;
    c.hole_loop = 1;
    c.placement.scale = 1.1;
    c.placement.rotation = Vec3(0.1, 0.2, 0.3);
    c.placement.translation = Vec3(1, 2, 3);
    c.smoothing_iterations = 5;
    const auto back = stitch::stitch_config_from_json(stitch::to_json(c));
    EXPECT_EQ(back.hole_loop, c.hole_loop);
    EXPECT_EQ(back.placement.scale, 1.1);
    EXPECT_EQ(back.placement.rotation, c.placement.rotation);
    EXPECT_EQ(back.placement.translation, c.placement.translation);
    EXPECT_EQ(back.smoothing_iterations, 5);
    EXPECT_FALSE(stitch::stitch_config_from_json(nlohmann::json::object()).hole_loop.has_value());
    EXPECT_THROW(stitch::stitch_config_from_json({{"smoothing_rings", -1}}), std::invalid_argument);
    EXPECT_THROW(stitch::stitch_config_from_json({{"placement", {{"translation", {1, 2}}}}}), std::invalid_argument);

    const auto pair = fixtures::cylinder_and_cap(0.5);
    const auto j = stitch::to_json(stitch::stitch(pair.ear, pair.body));
    EXPECT_EQ(j.at("quality").at("boundary_edge_count"), 0);
}

} // namespace
