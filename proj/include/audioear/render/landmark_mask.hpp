/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/render/landmark_mask.hpp
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

#ifndef AUDIOEAR_RENDER_LANDMARK_MASK_HPP
#define AUDIOEAR_RENDER_LANDMARK_MASK_HPP

#include "audioear/core/image.hpp"
#include "audioear/loss/landmarks.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace audioear {
namespace render {

/**
 * Fills a closed polygon (even-odd rule) into a binary mask. A pixel is set
 * when its centre is inside the polygon or on its boundary.
 */
inline core::Image polygon_mask(std::span<const core::Vec2> polygon, int width, int height)
{
    if (polygon.size() < 3)
    {
        throw std::invalid_argument("polygon_mask: polygon needs at least 3 points");
    }
    double twice_area = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i)
    {
        const auto& p = polygon[i];
        const auto& q = polygon[(i + 1) % polygon.size()];
        twice_area += p.x() * q.y() - q.x() * p.y();
    }
    if (std::abs(twice_area) < 1e-12)
    {
        throw std::invalid_argument("polygon_mask: polygon is degenerate (zero area)");
    }
    core::Image mask(width, height, 1);
    const std::size_t n = polygon.size();
    std::vector<double> xs;
    for (int py = 0; py < height; ++py)
    {
        const double y = py + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < n; ++i)
        {
            const auto& p = polygon[i];
            const auto& q = polygon[(i + 1) % n];
            if (p.y() == q.y())
            {
                // Horizontal edge on this scanline: its pixel centres are boundary pixels.
                if (p.y() == y)
                {
                    const double lo = std::min(p.x(), q.x()), hi = std::max(p.x(), q.x());
                    for (int px = std::max(0, static_cast<int>(std::ceil(lo - 0.5)));
                         px < width && px + 0.5 <= hi; ++px)
                    {
                        mask(px, py) = 1.0f;
                    }
                }
                continue;
            }
            // Half-open in y so shared vertices are counted once.
            const bool crosses = (p.y() <= y && y < q.y()) || (q.y() <= y && y < p.y());
            const double t = (y - p.y()) / (q.y() - p.y());
            const double x = p.x() + t * (q.x() - p.x());
            if (crosses)
            {
                xs.push_back(x);
            } else if ((y == p.y() || y == q.y()) && x >= 0.0)
            {
                // Scanline through the upper endpoint: still a boundary point.
                const int px = static_cast<int>(std::floor(x));
                if (px < width && px + 0.5 == x)
                {
                    mask(px, py) = 1.0f;
                }
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2)
        {
            const int start = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
            for (int px = start; px < width && px + 0.5 <= xs[k + 1]; ++px)
            {
                mask(px, py) = 1.0f;
            }
        }
    }
    return mask;
}

/// Ear mask from the outer contour (groups[0]) of the landmarks.
inline core::Image landmark_mask(const loss::LandmarkSet2D& landmarks, int width, int height)
{
    if (landmarks.groups.empty() || landmarks.groups.front().size() < 3)
    {
        throw std::invalid_argument("landmark_mask: outer contour needs at least 3 landmarks");
    }
    std::vector<core::Vec2> polygon;
    for (int idx : landmarks.groups.front())
    {
        polygon.push_back(landmarks.points.at(idx));
    }
    return polygon_mask(polygon, width, height);
}

} /* namespace render */
} /* namespace audioear */

#endif /* AUDIOEAR_RENDER_LANDMARK_MASK_HPP */
