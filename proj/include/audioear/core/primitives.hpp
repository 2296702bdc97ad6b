/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/core/primitives.hpp
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

#ifndef AUDIOEAR_CORE_PRIMITIVES_HPP
#define AUDIOEAR_CORE_PRIMITIVES_HPP

#include "audioear/core/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace audioear {
namespace core {

/**
 * Geodesic sphere: a subdivided icosahedron with 20 * 4^subdivisions faces,
 * outward-oriented, vertices projected onto the sphere.
 */
inline TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero())
{
    if (!(radius > 0.0) || subdivisions < 0)
    {
        throw std::invalid_argument("make_icosphere: radius must be positive and subdivisions >= 0");
    }
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh mesh;
    mesh.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                     {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                  {3, 8, 9},   {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (Vec3& v : mesh.vertices)
    {
        v.normalize();
    }
    for (int level = 0; level < subdivisions; ++level)
    {
        std::map<std::pair<int, int>, int> midpoints;
        const auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoints.find(key);
            if (it != midpoints.end())
            {
                return it->second;
            }
            mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
            const int idx = static_cast<int>(mesh.vertices.size()) - 1;
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<Face> faces;
        faces.reserve(mesh.faces.size() * 4);
        for (const Face& f : mesh.faces)
        {
            const int ab = midpoint(f[0], f[1]);
            const int bc = midpoint(f[1], f[2]);
            const int ca = midpoint(f[2], f[0]);
            faces.push_back({f[0], ab, ca});
            faces.push_back({f[1], bc, ab});
            faces.push_back({f[2], ca, bc});
            faces.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(faces);
    }
    for (Vec3& v : mesh.vertices)
    {
        v = center + radius * v;
    }
    return mesh;
}

/**
 * Geodesic sphere from an icosahedron whose faces are split into
 * frequency^2 triangles each (20 * frequency^2 faces), outward-oriented.
 */
inline TriMesh make_geodesic_sphere(double radius, int frequency, const Vec3& center = Vec3::Zero())
{
    if (!(radius > 0.0) || frequency < 1)
    {
        throw std::invalid_argument("make_geodesic_sphere: radius must be positive and frequency >= 1");
    }
    const TriMesh ico = make_icosphere(1.0, 0);
    TriMesh mesh;
    std::map<std::vector<std::pair<int, int>>, int> ids;
    const int f = frequency;
    const auto vertex = [&](const Face& face, int i, int j) {
        // barycentric weights (f - i - j, i, j) over the face corners
        std::vector<std::pair<int, int>> key;
        const int w[3] = {f - i - j, i, j};
        for (int c = 0; c < 3; ++c)
        {
            if (w[c] > 0)
            {
                key.emplace_back(face[c], w[c]);
            }
        }
        std::sort(key.begin(), key.end());
        const auto it = ids.find(key);
        if (it != ids.end())
        {
            return it->second;
        }
        Vec3 p = Vec3::Zero();
        for (const auto& [v, wt] : key)
        {
            p += (static_cast<double>(wt) / f) * ico.vertices[v];
        }
        mesh.vertices.push_back(center + radius * p.normalized());
        const int idx = static_cast<int>(mesh.vertices.size()) - 1;
        ids.emplace(std::move(key), idx);
        return idx;
    };
    for (const Face& face : ico.faces)
    {
        for (int i = 0; i < f; ++i)
        {
            for (int j = 0; i + j < f; ++j)
            {
                mesh.faces.push_back({vertex(face, i, j), vertex(face, i + 1, j), vertex(face, i, j + 1)});
                if (i + j + 2 <= f)
                {
                    mesh.faces.push_back({vertex(face, i + 1, j), vertex(face, i + 1, j + 1), vertex(face, i, j + 1)});
                }
            }
        }
    }
    return mesh;
}

/// Regular triangulated grid on z = 0 spanning [0, nx*h] x [0, ny*h], normals along +z.
inline TriMesh make_grid(int nx, int ny, double h)
{
    if (nx < 1 || ny < 1 || !(h > 0.0))
    {
        throw std::invalid_argument("make_grid: need at least one cell and a positive spacing");
    }
    TriMesh mesh;
    for (int j = 0; j <= ny; ++j)
    {
        for (int i = 0; i <= nx; ++i)
        {
            mesh.vertices.emplace_back(i * h, j * h, 0.0);
        }
    }
    const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
    {
        for (int i = 0; i < nx; ++i)
        {
            mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return mesh;
}

} /* namespace core */
} /* namespace audioear */

#endif /* AUDIOEAR_CORE_PRIMITIVES_HPP */
