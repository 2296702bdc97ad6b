/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/render/rasterizer.hpp
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

#ifndef AUDIOEAR_RENDER_RASTERIZER_HPP
#define AUDIOEAR_RENDER_RASTERIZER_HPP

#include "audioear/core/image.hpp"
#include "audioear/core/mesh.hpp"
#include "audioear/render/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace audioear {
namespace render {

/// Rendered colour, depth (rotated-frame z, +inf where empty) and coverage.
struct RenderOutput
{
    core::Image rgb;   ///< 3 channels, zero where not covered
    core::Image depth; ///< 1 channel
    core::Image mask;  ///< 1 channel, 1 where covered
};

/// Nearest-texel lookup; uv (0,0) is the bottom-left of the map.
inline Eigen::Vector3f sample_nearest(const core::Image& texture, const Vec2& uv)
{
    const int tx = std::clamp(static_cast<int>(std::floor(uv.x() * texture.width)), 0, texture.width - 1);
    const int ty = std::clamp(static_cast<int>(std::floor((1.0 - uv.y()) * texture.height)), 0, texture.height - 1);
    return {texture(tx, ty, 0), texture(tx, ty, 1), texture(tx, ty, 2)};
}

/**
 * Z-buffer rasterizer. A pixel is covered by a triangle when its centre lies
 * inside or on the projected triangle. UV is interpolated linearly in screen
 * space and the texture sampled at the nearest texel. No culling and no
 * lighting; depth ties go to the lower face index.
 */
inline RenderOutput rasterize(const core::TriMesh& mesh, const CameraParams& cam, const core::Image& texture,
                              int width, int height)
{
    if (!mesh.has_uv())
    {
        throw std::invalid_argument("rasterize: mesh has no uv coordinates");
    }
    if (width < 1 || height < 1)
    {
        throw std::invalid_argument("rasterize: resolution must be at least 1x1");
    }
    if (texture.channels != 3 || texture.width < 1 || texture.height < 1)
    {
        throw std::invalid_argument("rasterize: texture must be a non-empty RGB map");
    }
    const double inf = std::numeric_limits<double>::infinity();
    RenderOutput out{core::Image(width, height, 3), core::Image(width, height, 1, static_cast<float>(inf)),
                     core::Image(width, height, 1)};
    std::vector<double> zbuf(static_cast<std::size_t>(width) * height, inf);

    const Eigen::Matrix3d r = cam.rotation_matrix();
    std::vector<Vec2> screen(mesh.vertices.size());
    std::vector<double> depth(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    {
        const Vec3 q = r * mesh.vertices[i];
        screen[i] = cam.scale * q.head<2>() + cam.translation;
        depth[i] = q.z();
    }

    for (const core::Face& f : mesh.faces)
    {
        const Vec2& a = screen[f[0]];
        const Vec2& b = screen[f[1]];
        const Vec2& c = screen[f[2]];
        const double area = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        if (area == 0.0)
        {
            continue;
        }
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
        for (int py = y0; py <= y1; ++py)
        {
            for (int px = x0; px <= x1; ++px)
            {
                const Vec2 p(px + 0.5, py + 0.5);
                const double w0 = ((b - p).x() * (c - p).y() - (b - p).y() * (c - p).x()) / area;
                const double w1 = ((c - p).x() * (a - p).y() - (c - p).y() * (a - p).x()) / area;
                const double w2 = 1.0 - w0 - w1;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0)
                {
                    continue;
                }
                const double z = w0 * depth[f[0]] + w1 * depth[f[1]] + w2 * depth[f[2]];
                const std::size_t idx = static_cast<std::size_t>(py) * width + px;
                if (!(z < zbuf[idx]))
                {
                    continue;
                }
                zbuf[idx] = z;
                const Vec2 uv = w0 * mesh.uv[f[0]] + w1 * mesh.uv[f[1]] + w2 * mesh.uv[f[2]];
                const Eigen::Vector3f color = sample_nearest(texture, uv);
                for (int ch = 0; ch < 3; ++ch)
                {
                    out.rgb(px, py, ch) = color[ch];
                }
                out.depth(px, py) = static_cast<float>(z);
                out.mask(px, py) = 1.0f;
            }
        }
    }
    return out;
}

} /* namespace render */
} /* namespace audioear */

#endif /* AUDIOEAR_RENDER_RASTERIZER_HPP */
