/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/stitch/stitch.hpp
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

#pragma once

#ifndef AUDIOEAR_STITCH_STITCH_HPP
#define AUDIOEAR_STITCH_STITCH_HPP

#include "audioear/core/geometry.hpp"
#include "audioear/core/mesh.hpp"
#include "audioear/render/camera.hpp"
#include "audioear/stitch/triangulate.hpp"

#include "Eigen/Core"
#include "Eigen/Eigenvalues"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace audioear {
namespace stitch {

using core::Face;
using core::TriMesh;
using core::Vec3;

/// A closed chain of boundary edges of some mesh, by vertex index.
struct BoundaryLoop
{
    std::vector<int> vertices;
    double length = 0.0; ///< perimeter, mm
};

/// Raised for an edge shared by more than two faces.
class NonManifoldEdge : public std::invalid_argument
{
public:
    NonManifoldEdge(int a, int b, int count)
        : std::invalid_argument("non-manifold edge (" + std::to_string(a) + ", " + std::to_string(b) + ") shared by " +
                                std::to_string(count) + " faces"),
          edge_(a, b)
    {
    }

    std::pair<int, int> edge() const noexcept { return edge_; }

private:
    std::pair<int, int> edge_;
};

/**
 * All boundary loops, longest perimeter first. Each loop follows the winding
 * of its adjacent faces, so the faces lie on the left of the walk when seen
 * against the face normals and the hole on the right. Loops start at their
 * smallest vertex index.
 */
inline std::vector<BoundaryLoop> extract_boundary_loops(const TriMesh& mesh)
{
    std::map<std::pair<int, int>, int> counts;
    for (const Face& f : mesh.faces)
    {
        for (int e = 0; e < 3; ++e)
        {
            ++counts[std::minmax(f[e], f[(e + 1) % 3])];
        }
    }
    for (const auto& [edge, count] : counts)
    {
        if (count > 2)
        {
            throw NonManifoldEdge(edge.first, edge.second, count);
        }
    }
    std::map<int, int> next;
    for (const Face& f : mesh.faces)
    {
        for (int e = 0; e < 3; ++e)
        {
            const int a = f[e], b = f[(e + 1) % 3];
            if (counts[std::minmax(a, b)] == 1)
            {
                if (!next.emplace(a, b).second)
                {
                    throw std::invalid_argument("extract_boundary_loops: vertex " + std::to_string(a) +
                                                " starts two boundary edges");
                }
            }
        }
    }
    std::vector<BoundaryLoop> loops;
    std::set<int> used;
    for (const auto& [start, unused] : next)
    {
        if (used.count(start))
        {
            continue;
        }
        BoundaryLoop loop;
        int v = start;
        do
        {
            if (!used.insert(v).second)
            {
                throw std::invalid_argument("extract_boundary_loops: boundary chain revisits vertex " +
                                            std::to_string(v));
            }
            loop.vertices.push_back(v);
            const auto it = next.find(v);
            if (it == next.end())
            {
                throw std::invalid_argument("extract_boundary_loops: open boundary chain at vertex " +
                                            std::to_string(v));
            }
            loop.length += (mesh.vertices[it->second] - mesh.vertices[v]).norm();
            v = it->second;
        } while (v != start);
        loops.push_back(std::move(loop));
    }
    std::stable_sort(loops.begin(), loops.end(), [](const BoundaryLoop& a, const BoundaryLoop& b) {
        if (a.length != b.length)
        {
            return a.length > b.length;
        }
        return a.vertices.size() > b.vertices.size();
    });
    return loops;
}

/// Plane through `origin` with normal `normal`; (u, v, normal) is a right-handed orthonormal frame.
struct ProjectionPlane
{
    Vec3 origin = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    Vec3 u = Vec3::UnitX();
    Vec3 v = Vec3::UnitY();

    Vec2 project(const Vec3& p) const
    {
        const Vec3 d = p - origin;
        return {d.dot(u), d.dot(v)};
    }
};

/// A loop together with the mesh its indices refer to.
struct LoopRef
{
    const TriMesh* mesh;
    const BoundaryLoop* loop;
};

/**
 * Plane from the area-weighted mean normal of all faces touching any loop
 * vertex, through the centroid of all loop vertices.
 */
inline ProjectionPlane fit_projection_plane(std::span<const LoopRef> loops)
{
    Vec3 weighted = Vec3::Zero();
    double area = 0.0;
    Vec3 centroid = Vec3::Zero();
    std::size_t count = 0;
    for (const LoopRef& ref : loops)
    {
        const TriMesh& mesh = *ref.mesh;
        std::vector<bool> on_loop(mesh.vertices.size(), false);
        for (int v : ref.loop->vertices)
        {
            on_loop.at(v) = true;
            centroid += mesh.vertices[v];
            ++count;
        }
        for (const Face& f : mesh.faces)
        {
            if (on_loop[f[0]] || on_loop[f[1]] || on_loop[f[2]])
            {
                const Vec3 n = core::face_normal_unnormalized(mesh, f);
                weighted += n;
                area += n.norm();
            }
        }
    }
    if (count == 0 || !(area > 0.0))
    {
        throw std::invalid_argument("fit_projection_plane: no faces adjacent to the loop");
    }
    const Vec3 mean = weighted / area;
    if (mean.norm() < 1e-9)
    {
        throw std::invalid_argument("fit_projection_plane: adjacent face normals cancel");
    }
    ProjectionPlane plane;
    plane.origin = centroid / static_cast<double>(count);
    plane.normal = mean.normalized();
    Eigen::Index axis = 0;
    plane.normal.cwiseAbs().minCoeff(&axis);
    plane.u = plane.normal.cross(Vec3::Unit(axis)).normalized();
    plane.v = plane.normal.cross(plane.u);
    return plane;
}

inline ProjectionPlane fit_projection_plane(const TriMesh& mesh, const BoundaryLoop& loop)
{
    const LoopRef ref{&mesh, &loop};
    return fit_projection_plane(std::span<const LoopRef>(&ref, 1));
}

/// Similarity applied to the ear before stitching: x -> scale * R(rotation) x + translation.
struct Placement
{
    double scale = 1.0;
    Vec3 rotation = Vec3::Zero(); ///< Euler angles, radians (render::euler_rotation)
    Vec3 translation = Vec3::Zero();

    Eigen::Matrix3d rotation_matrix() const { return render::euler_rotation(rotation); }
};

struct StitchConfig
{
    std::optional<int> hole_loop; ///< index into the body's loops; default the longest
    Placement placement;
    int smoothing_rings = 2;
    int smoothing_iterations = 3;
    double smoothing_step = 0.5;
    double sliver_threshold_deg = 10.0;

    void validate() const
    {
        if (hole_loop && *hole_loop < 0)
        {
            throw std::invalid_argument("StitchConfig: hole_loop must be non-negative");
        }
        if (!(placement.scale > 0.0) || !placement.rotation.allFinite() || !placement.translation.allFinite())
        {
            throw std::invalid_argument("StitchConfig: placement must be finite with positive scale");
        }
        if (smoothing_rings < 0 || smoothing_iterations < 0)
        {
            throw std::invalid_argument("StitchConfig: smoothing rings and iterations must be non-negative");
        }
        if (!(smoothing_step > 0.0 && smoothing_step <= 1.0))
        {
            throw std::invalid_argument("StitchConfig: smoothing_step must lie in (0, 1]");
        }
        if (!(sliver_threshold_deg >= 0.0 && sliver_threshold_deg <= 60.0))
        {
            throw std::invalid_argument("StitchConfig: sliver_threshold_deg must lie in [0, 60]");
        }
    }
};

struct StitchResult
{
    TriMesh mesh; ///< body vertices first, then the placed ear
    core::MeshQualityReport quality; ///< angles over seam faces; boundary edges over the whole mesh
    std::vector<int> seam_faces;
    std::vector<double> seam_min_angles; ///< degrees, one per seam face
    ProjectionPlane plane;
};

/// Everything within `rings` edge hops of the seed vertices.
inline std::vector<bool> vertex_rings(const TriMesh& mesh, std::span<const int> seeds, int rings)
{
    const auto nbrs = core::vertex_neighbors(mesh);
    std::vector<bool> mark(mesh.vertices.size(), false);
    std::vector<int> frontier;
    for (int s : seeds)
    {
        if (!mark.at(s))
        {
            mark[s] = true;
            frontier.push_back(s);
        }
    }
    for (int r = 0; r < rings; ++r)
    {
        std::vector<int> grown;
        for (int v : frontier)
        {
            for (int w : nbrs[v])
            {
                if (!mark[w])
                {
                    mark[w] = true;
                    grown.push_back(w);
                }
            }
        }
        frontier = std::move(grown);
    }
    return mark;
}

/**
 * Places the ear, fills the annulus between the body's hole loop and the
 * ear's boundary with a constrained Delaunay seam, and smooths vertices near
 * the seam. Throws if the seam is not closed.
 */
inline StitchResult stitch(const TriMesh& ear, const TriMesh& body, const StitchConfig& config = {})
{
    config.validate();
    core::validate(ear);
    core::validate(body);
    const TriMesh placed = core::transformed(ear, config.placement.scale, config.placement.rotation_matrix(),
                                             config.placement.translation);
    const auto ear_loops = extract_boundary_loops(placed);
    if (ear_loops.size() != 1)
    {
        throw std::invalid_argument("stitch: ear must have exactly one boundary loop, found " +
                                    std::to_string(ear_loops.size()));
    }
    const auto body_loops = extract_boundary_loops(body);
    const int hole = config.hole_loop.value_or(0);
    if (hole >= static_cast<int>(body_loops.size()))
    {
        throw std::invalid_argument("stitch: body has " + std::to_string(body_loops.size()) +
                                    " boundary loops, hole_loop " + std::to_string(hole) + " requested");
    }
    const BoundaryLoop& outer = body_loops[hole];
    const BoundaryLoop& inner = ear_loops[0];

    StitchResult result;
    const std::array<LoopRef, 2> refs{LoopRef{&body, &outer}, LoopRef{&placed, &inner}};
    result.plane = fit_projection_plane(refs);
    std::vector<Vec2> outer2d, inner2d;
    for (int v : outer.vertices)
    {
        outer2d.push_back(result.plane.project(body.vertices[v]));
    }
    for (int v : inner.vertices)
    {
        inner2d.push_back(result.plane.project(placed.vertices[v]));
    }
    const auto tris = triangulate_annulus(outer2d, inner2d);

    const int nb = static_cast<int>(body.vertices.size());
    const int n = static_cast<int>(outer.vertices.size());
    TriMesh& mesh = result.mesh;
    mesh.vertices = body.vertices;
    mesh.vertices.insert(mesh.vertices.end(), placed.vertices.begin(), placed.vertices.end());
    mesh.faces = body.faces;
    for (const Face& f : placed.faces)
    {
        mesh.faces.push_back({f[0] + nb, f[1] + nb, f[2] + nb});
    }
    const auto global = [&](int k) { return k < n ? outer.vertices[k] : nb + inner.vertices[k - n]; };
    std::vector<Face> seam;
    std::set<std::pair<int, int>> seam_half;
    for (const Triangle& t : tris)
    {
        const Face f{global(t[0]), global(t[1]), global(t[2])};
        seam.push_back(f);
        for (int e = 0; e < 3; ++e)
        {
            seam_half.emplace(f[e], f[(e + 1) % 3]);
        }
    }
    // Seam faces must traverse each loop edge against the adjacent mesh face.
    const int a0 = outer.vertices[0], b0 = outer.vertices[1 % n];
    const bool flip = seam_half.count({a0, b0}) > 0;
    if (flip)
    {
        for (Face& f : seam)
        {
            std::swap(f[1], f[2]);
        }
    }
    const int c0 = nb + inner.vertices[0], d0 = nb + inner.vertices[1 % inner.vertices.size()];
    if (seam_half.count(flip ? std::pair{d0, c0} : std::pair{c0, d0}))
    {
        throw std::invalid_argument("stitch: ear and body orientations disagree across the seam");
    }
    const int first_seam = static_cast<int>(mesh.faces.size());
    for (std::size_t i = 0; i < seam.size(); ++i)
    {
        mesh.faces.push_back(seam[i]);
        result.seam_faces.push_back(first_seam + static_cast<int>(i));
    }

    std::vector<int> seam_vertices(outer.vertices.begin(), outer.vertices.end());
    for (int v : inner.vertices)
    {
        seam_vertices.push_back(nb + v);
    }
    std::vector<bool> is_seam(mesh.vertices.size(), false);
    for (int v : seam_vertices)
    {
        is_seam[v] = true;
    }
    for (const auto& [edge, count] : core::edge_face_counts(mesh))
    {
        if (count > 2 || (count == 1 && (is_seam[edge.first] || is_seam[edge.second])))
        {
            throw std::runtime_error("stitch: seam is not watertight at edge (" + std::to_string(edge.first) + ", " +
                                     std::to_string(edge.second) + ")");
        }
    }

    if (config.smoothing_iterations > 0)
    {
        const auto movable = vertex_rings(mesh, seam_vertices, config.smoothing_rings);
        mesh = core::laplacian_smooth(std::move(mesh), config.smoothing_iterations, config.smoothing_step, movable);
    }
    result.quality = core::mesh_quality(mesh, config.sliver_threshold_deg, result.seam_faces);
    for (int fi : result.seam_faces)
    {
        const Face& f = mesh.faces[fi];
        const auto ang = core::triangle_angles(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
        result.seam_min_angles.push_back(*std::min_element(ang.begin(), ang.end()));
    }
    return result;
}

namespace detail {

inline Vec3 vector_area(const TriMesh& mesh, const BoundaryLoop& loop)
{
    Vec3 a = Vec3::Zero();
    for (std::size_t i = 0; i < loop.vertices.size(); ++i)
    {
        a += mesh.vertices[loop.vertices[i]].cross(mesh.vertices[loop.vertices[(i + 1) % loop.vertices.size()]]);
    }
    return 0.5 * a;
}

/// Centroid and principal axes (columns: major, minor, normal) of a loop.
inline std::pair<Vec3, Eigen::Matrix3d> loop_frame(const TriMesh& mesh, const BoundaryLoop& loop, const Vec3& normal_hint)
{
    Vec3 c = Vec3::Zero();
    for (int v : loop.vertices)
    {
        c += mesh.vertices[v];
    }
    c /= static_cast<double>(loop.vertices.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int v : loop.vertices)
    {
        const Vec3 d = mesh.vertices[v] - c;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Vec3 normal = eig.eigenvectors().col(0);
    Vec3 major = eig.eigenvectors().col(2);
    if (normal.dot(normal_hint) < 0.0)
    {
        normal = -normal;
    }
    double skew = 0.0;
    for (int v : loop.vertices)
    {
        skew += std::pow((mesh.vertices[v] - c).dot(major), 3);
    }
    if (skew < 0.0)
    {
        major = -major;
    }
    Eigen::Matrix3d frame;
    frame.col(0) = major;
    frame.col(1) = normal.cross(major);
    frame.col(2) = normal;
    return {c, frame};
}

} /* namespace detail */

/**
 * Initial placement that moves the ear's loop centroid onto the body hole's
 * centroid and aligns the loops' principal axes, at unit scale. The ear's
 * outward side is matched to the body's.
 */
inline Placement align_loops(const TriMesh& ear, const TriMesh& body, int hole_loop = 0)
{
    const auto ear_loops = extract_boundary_loops(ear);
    const auto body_loops = extract_boundary_loops(body);
    if (ear_loops.size() != 1)
    {
        throw std::invalid_argument("align_loops: ear must have exactly one boundary loop");
    }
    if (hole_loop < 0 || hole_loop >= static_cast<int>(body_loops.size()))
    {
        throw std::invalid_argument("align_loops: hole_loop out of range");
    }
    const auto [ce, fe] = detail::loop_frame(ear, ear_loops[0], detail::vector_area(ear, ear_loops[0]));
    const auto [cb, fb] = detail::loop_frame(body, body_loops[hole_loop], -detail::vector_area(body, body_loops[hole_loop]));
    const Eigen::Matrix3d r = fb * fe.transpose();
    Placement p;
    p.rotation = render::euler_angles(r);
    p.translation = cb - r * ce;
    return p;
}

inline nlohmann::json to_json(const Placement& p)
{
    return {{"scale", p.scale},
            {"rotation", {p.rotation.x(), p.rotation.y(), p.rotation.z()}},
            {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

inline nlohmann::json to_json(const StitchConfig& c)
{
    nlohmann::json j = {{"placement", to_json(c.placement)},
                        {"smoothing_rings", c.smoothing_rings},
                        {"smoothing_iterations", c.smoothing_iterations},
                        {"smoothing_step", c.smoothing_step},
                        {"sliver_threshold_deg", c.sliver_threshold_deg}};
    j["hole_loop"] = c.hole_loop ? nlohmann::json(*c.hole_loop) : nlohmann::json(nullptr);
    return j;
}

/// Missing keys keep their defaults; the result is validated.
inline StitchConfig stitch_config_from_json(const nlohmann::json& j)
{
    StitchConfig c;
    if (j.contains("hole_loop") && !j.at("hole_loop").is_null())
    {
        c.hole_loop = j.at("hole_loop").get<int>();
    }
    if (j.contains("placement"))
    {
        const auto& p = j.at("placement");
        c.placement.scale = p.value("scale", c.placement.scale);
        const auto vec = [&](const char* key, Vec3& out) {
            if (p.contains(key))
            {
                const auto a = p.at(key).get<std::vector<double>>();
                if (a.size() != 3)
                {
                    throw std::invalid_argument(std::string("StitchConfig: placement.") + key + " needs 3 values");
                }
                out = Vec3(a[0], a[1], a[2]);
            }
        };
        vec("rotation", c.placement.rotation);
        vec("translation", c.placement.translation);
    }
    c.smoothing_rings = j.value("smoothing_rings", c.smoothing_rings);
    c.smoothing_iterations = j.value("smoothing_iterations", c.smoothing_iterations);
    c.smoothing_step = j.value("smoothing_step", c.smoothing_step);
    c.sliver_threshold_deg = j.value("sliver_threshold_deg", c.sliver_threshold_deg);
    c.validate();
    return c;
}

inline nlohmann::json to_json(const core::MeshQualityReport& r)
{
    return {{"min_angle", r.min_angle},
            {"max_angle", r.max_angle},
            {"sliver_count", r.sliver_count},
            {"boundary_edge_count", r.boundary_edge_count}};
}

inline nlohmann::json to_json(const StitchResult& r)
{
    return {{"quality", to_json(r.quality)},
            {"seam_faces", r.seam_faces.size()},
            {"vertices", r.mesh.vertices.size()},
            {"faces", r.mesh.faces.size()},
            {"plane_normal", {r.plane.normal.x(), r.plane.normal.y(), r.plane.normal.z()}}};
}

} /* namespace stitch */
} /* namespace audioear */

#endif /* AUDIOEAR_STITCH_STITCH_HPP */
