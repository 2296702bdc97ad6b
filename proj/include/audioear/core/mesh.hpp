/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/core/mesh.hpp
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

#ifndef AUDIOEAR_CORE_MESH_HPP
#define AUDIOEAR_CORE_MESH_HPP

#include "Eigen/Core"
#include "Eigen/Geometry"

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace core {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

/// Faces with area at or below this (mm^2) are treated as degenerate.
inline constexpr double degenerate_face_area = 1e-12;

/**
 * A triangle mesh in millimetres.
 *
 * Canonical frame: x runs from the subject's left to right, y from down to
 * up, z from back to front. The sagittal plane is x = 0.
 */
struct TriMesh
{
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<Vec2> uv; ///< Optional; empty or one entry per vertex.

    bool has_uv() const noexcept { return !uv.empty(); }
    std::size_t num_vertices() const noexcept { return vertices.size(); }
    std::size_t num_faces() const noexcept { return faces.size(); }
};

/// A point set, e.g. a structured-light scan (mm).
struct PointCloud
{
    std::vector<Vec3> points;
    std::vector<Eigen::Vector3f> colors; ///< Optional, in [0,1].

    bool has_colors() const noexcept { return !colors.empty(); }
    std::size_t size() const noexcept { return points.size(); }
};

/// Summary of triangle shape quality, used to audit seams before BEM.
struct MeshQualityReport
{
    double min_angle = 60.0; ///< degrees
    double max_angle = 60.0; ///< degrees
    std::size_t sliver_count = 0;
    std::size_t boundary_edge_count = 0;
};

inline Vec3 face_normal_unnormalized(const TriMesh& mesh, const Face& f)
{
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    return (b - a).cross(c - a);
}

inline double face_area(const TriMesh& mesh, const Face& f)
{
    return 0.5 * face_normal_unnormalized(mesh, f).norm();
}

/**
 * Checks the TriMesh invariants: indices in range, no degenerate faces, and
 * uv either absent or one per vertex. Throws std::invalid_argument naming the
 * first offending element.
 */
inline void validate(const TriMesh& mesh)
{
    const auto n = static_cast<int>(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.faces.size(); ++i)
    {
        const Face& f = mesh.faces[i];
        for (int idx : f)
        {
            if (idx < 0 || idx >= n)
            {
                throw std::invalid_argument("face " + std::to_string(i) + " references vertex " + std::to_string(idx) +
                                            " but the mesh has " + std::to_string(n) + " vertices");
            }
        }
        if (face_area(mesh, f) <= degenerate_face_area)
        {
            throw std::invalid_argument("face " + std::to_string(i) + " is degenerate (area <= 1e-12 mm^2)");
        }
    }
    if (!mesh.uv.empty() && mesh.uv.size() != mesh.vertices.size())
    {
        throw std::invalid_argument("uv count " + std::to_string(mesh.uv.size()) + " does not match vertex count " +
                                    std::to_string(mesh.vertices.size()));
    }
}

inline void validate(const PointCloud& cloud)
{
    if (cloud.points.empty())
    {
        throw std::invalid_argument("point cloud is empty");
    }
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
    {
        if (!cloud.points[i].allFinite())
        {
            throw std::invalid_argument("point " + std::to_string(i) + " has non-finite coordinates");
        }
    }
    if (!cloud.colors.empty() && cloud.colors.size() != cloud.points.size())
    {
        throw std::invalid_argument("color count does not match point count");
    }
}

/// Signed volume enclosed by a closed, consistently oriented mesh (positive for outward normals).
inline double signed_volume(const TriMesh& mesh)
{
    double volume = 0.0;
    for (const Face& f : mesh.faces)
    {
        volume += mesh.vertices[f[0]].dot(mesh.vertices[f[1]].cross(mesh.vertices[f[2]]));
    }
    return volume / 6.0;
}

inline double surface_area(const TriMesh& mesh)
{
    double area = 0.0;
    for (const Face& f : mesh.faces)
    {
        area += face_area(mesh, f);
    }
    return area;
}

/// Applies x' = scale * R * x + t to every vertex. Winding is untouched (det R > 0).
inline TriMesh transformed(TriMesh mesh, double scale, const Eigen::Matrix3d& rotation, const Vec3& translation)
{
    for (Vec3& v : mesh.vertices)
    {
        v = scale * (rotation * v) + translation;
    }
    return mesh;
}

inline PointCloud transformed(PointCloud cloud, double scale, const Eigen::Matrix3d& rotation, const Vec3& translation)
{
    for (Vec3& p : cloud.points)
    {
        p = scale * (rotation * p) + translation;
    }
    return cloud;
}

} /* namespace core */
} /* namespace audioear */

#endif /* AUDIOEAR_CORE_MESH_HPP */
