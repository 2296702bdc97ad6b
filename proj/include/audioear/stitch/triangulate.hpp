/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/stitch/triangulate.hpp
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

#ifndef AUDIOEAR_STITCH_TRIANGULATE_HPP
#define AUDIOEAR_STITCH_TRIANGULATE_HPP

#include "Eigen/Core"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace audioear {
namespace stitch {

using Vec2 = Eigen::Vector2d;
using Triangle = std::array<int, 3>;

/**
 * Invalid annulus input. Segments are numbered over the union vertex set:
 * segment k joins vertex k to its successor in the same loop. -1 marks an
 * absent partner (e.g. an inner vertex outside the outer loop).
 */
class TriangulationError : public std::invalid_argument
{
public:
    TriangulationError(const std::string& what, int first_segment, int second_segment)
        : std::invalid_argument(what), first_(first_segment), second_(second_segment)
    {
    }

    int first_segment() const noexcept { return first_; }
    int second_segment() const noexcept { return second_; }

private:
    int first_;
    int second_;
};

/// Signed shoelace area; positive for counter-clockwise loops.
inline double polygon_area(std::span<const Vec2> loop)
{
    double a = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i)
    {
        const Vec2& p = loop[i];
        const Vec2& q = loop[(i + 1) % loop.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

/// Even-odd point-in-polygon test.
inline bool point_in_polygon(const Vec2& p, std::span<const Vec2> loop)
{
    bool inside = false;
    for (std::size_t i = 0, j = loop.size() - 1; i < loop.size(); j = i++)
    {
        const Vec2& a = loop[i];
        const Vec2& b = loop[j];
        if ((a.y() > p.y()) != (b.y() > p.y()))
        {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x)
            {
                inside = !inside;
            }
        }
    }
    return inside;
}

namespace detail {

inline double orient(const Vec2& a, const Vec2& b, const Vec2& c)
{
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

/// Closed segment intersection with a tolerance on the orientation tests.
inline bool segments_touch(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double eps)
{
    const double d1 = orient(c, d, a), d2 = orient(c, d, b);
    const double d3 = orient(a, b, c), d4 = orient(a, b, d);
    if (((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps)))
    {
        return true;
    }
    const auto on_segment = [eps](const Vec2& p, const Vec2& q, const Vec2& r, double o) {
        return std::abs(o) <= eps && std::min(p.x(), q.x()) - 1e-12 <= r.x() && r.x() <= std::max(p.x(), q.x()) + 1e-12 &&
               std::min(p.y(), q.y()) - 1e-12 <= r.y() && r.y() <= std::max(p.y(), q.y()) + 1e-12;
    };
    return on_segment(c, d, a, d1) || on_segment(c, d, b, d2) || on_segment(a, b, c, d3) || on_segment(a, b, d, d4);
}

/**
 * Lifted-orientation test: positive when d lies inside the circumcircle of
 * the counter-clockwise triangle abc. Heights carry a tiny cubic term so that
 * cocircular ties break the same way regardless of vertex order.
 */
inline double in_circle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    constexpr double eps = 1e-9;
    const auto h = [](const Vec2& p) {
        return p.squaredNorm() + eps * (p.x() * p.x() * p.x() + 1.4142135623730951 * p.y() * p.y() * p.y());
    };
    const double hd = h(d);
    const double ax = a.x() - d.x(), ay = a.y() - d.y(), ah = h(a) - hd;
    const double bx = b.x() - d.x(), by = b.y() - d.y(), bh = h(b) - hd;
    const double cx = c.x() - d.x(), cy = c.y() - d.y(), ch = h(c) - hd;
    return ax * (by * ch - bh * cy) - ay * (bx * ch - bh * cx) + ah * (bx * cy - by * cx);
}

inline bool in_triangle_closed(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c, double eps)
{
    return orient(a, b, p) >= -eps && orient(b, c, p) >= -eps && orient(c, a, p) >= -eps;
}

/// Ear clipping of a weakly simple counter-clockwise polygon given as vertex ids.
inline std::vector<Triangle> ear_clip(std::vector<int> poly, const std::vector<Vec2>& pts, double eps)
{
    std::vector<Triangle> out;
    const auto pass = [&](double threshold) {
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i)
        {
            const int p = poly[(i + n - 1) % n], c = poly[i], q = poly[(i + 1) % n];
            if (orient(pts[p], pts[c], pts[q]) <= threshold)
            {
                continue;
            }
            bool blocked = false;
            for (std::size_t j = 0; j < n && !blocked; ++j)
            {
                const int v = poly[j];
                if (v == p || v == c || v == q)
                {
                    continue;
                }
                blocked = in_triangle_closed(pts[v], pts[p], pts[c], pts[q], eps);
            }
            if (!blocked)
            {
                out.push_back({p, c, q});
                poly.erase(poly.begin() + static_cast<std::ptrdiff_t>(i));
                return true;
            }
        }
        return false;
    };
    while (poly.size() > 3)
    {
        if (!pass(eps) && !pass(0.0))
        {
            throw std::runtime_error("triangulate_annulus: ear clipping found no ear");
        }
    }
    if (orient(pts[poly[0]], pts[poly[1]], pts[poly[2]]) <= 0.0)
    {
        throw std::runtime_error("triangulate_annulus: degenerate final triangle");
    }
    out.push_back({poly[0], poly[1], poly[2]});
    return out;
}

/// Lawson flips on unconstrained interior edges until every edge is locally Delaunay.
inline void legalize(std::vector<Triangle>& tris, const std::vector<Vec2>& pts,
                     const std::vector<std::pair<int, int>>& constraints)
{
    std::map<std::pair<int, int>, int> half; // directed edge -> triangle
    const auto insert = [&](int t) {
        for (int e = 0; e < 3; ++e)
        {
            half[{tris[t][e], tris[t][(e + 1) % 3]}] = t;
        }
    };
    const auto erase = [&](int t) {
        for (int e = 0; e < 3; ++e)
        {
            half.erase({tris[t][e], tris[t][(e + 1) % 3]});
        }
    };
    for (int t = 0; t < static_cast<int>(tris.size()); ++t)
    {
        insert(t);
    }
    std::map<std::pair<int, int>, bool> fixed;
    for (auto [a, b] : constraints)
    {
        fixed[std::minmax(a, b)] = true;
    }
    std::deque<std::pair<int, int>> queue;
    for (const auto& [edge, t] : half)
    {
        if (edge.first < edge.second)
        {
            queue.push_back(edge);
        }
    }
    const auto third = [&](int t, int a, int b) {
        for (int v : tris[t])
        {
            if (v != a && v != b)
            {
                return v;
            }
        }
        return -1;
    };
    const std::size_t limit = 64 * pts.size() * pts.size() + 1024;
    std::size_t flips = 0;
    while (!queue.empty())
    {
        const auto [a, b] = queue.front();
        queue.pop_front();
        if (fixed.count(std::minmax(a, b)))
        {
            continue;
        }
        const auto i1 = half.find({a, b});
        const auto i2 = half.find({b, a});
        if (i1 == half.end() || i2 == half.end())
        {
            continue;
        }
        const int t1 = i1->second, t2 = i2->second;
        const int c = third(t1, a, b); // t1 = (a, b, c)
        const int d = third(t2, b, a); // t2 = (b, a, d)
        if (in_circle(pts[a], pts[b], pts[c], pts[d]) <= 0.0)
        {
            continue;
        }
        if (orient(pts[a], pts[d], pts[c]) <= 0.0 || orient(pts[d], pts[b], pts[c]) <= 0.0)
        {
            continue;
        }
        if (++flips > limit)
        {
            throw std::runtime_error("triangulate_annulus: edge flipping did not terminate");
        }
        erase(t1);
        erase(t2);
        tris[t1] = {a, d, c};
        tris[t2] = {d, b, c};
        insert(t1);
        insert(t2);
        for (auto e : {std::pair{a, d}, std::pair{d, b}, std::pair{b, c}, std::pair{c, a}})
        {
            queue.emplace_back(std::min(e.first, e.second), std::max(e.first, e.second));
        }
    }
}

} /* namespace detail */

/**
 * Constrained Delaunay triangulation of the region between two loops, using
 * only the loop vertices. Vertex ids: outer loop 0..n-1, inner loop n..n+m-1.
 * An empty inner loop triangulates the outer polygon. Loops may be given in
 * either orientation; output triangles are counter-clockwise in the plane,
 * each rotated to start at its smallest id, and sorted.
 */
inline std::vector<Triangle> triangulate_annulus(std::span<const Vec2> outer, std::span<const Vec2> inner = {})
{
    const int n = static_cast<int>(outer.size());
    const int m = static_cast<int>(inner.size());
    if (n < 3 || (m != 0 && m < 3))
    {
        throw std::invalid_argument("triangulate_annulus: loops need at least 3 vertices");
    }
    std::vector<Vec2> pts(outer.begin(), outer.end());
    pts.insert(pts.end(), inner.begin(), inner.end());
    for (const Vec2& p : pts)
    {
        if (!p.allFinite())
        {
            throw std::invalid_argument("triangulate_annulus: non-finite vertex");
        }
    }
    // Work in coordinates centred on the centroid with unit RMS radius.
    Vec2 centre = Vec2::Zero();
    for (const Vec2& p : pts)
    {
        centre += p;
    }
    centre /= static_cast<double>(pts.size());
    double rms = 0.0;
    for (const Vec2& p : pts)
    {
        rms += (p - centre).squaredNorm();
    }
    rms = std::sqrt(rms / static_cast<double>(pts.size()));
    if (!(rms > 0.0))
    {
        throw std::invalid_argument("triangulate_annulus: all vertices coincide");
    }
    for (Vec2& p : pts)
    {
        p = (p - centre) / rms;
    }
    const double eps = 1e-12;

    const std::span<const Vec2> out_pts(pts.data(), static_cast<std::size_t>(n));
    const std::span<const Vec2> in_pts(pts.data() + n, static_cast<std::size_t>(m));
    const double outer_area = polygon_area(out_pts);
    if (std::abs(outer_area) <= eps)
    {
        throw TriangulationError("triangulate_annulus: outer loop has zero area", 0, -1);
    }
    if (m > 0 && std::abs(polygon_area(in_pts)) <= eps)
    {
        throw TriangulationError("triangulate_annulus: inner loop has zero area", n, -1);
    }

    // Segments over the union vertex set, then pairwise intersection checks.
    std::vector<std::pair<int, int>> segments;
    for (int i = 0; i < n; ++i)
    {
        segments.emplace_back(i, (i + 1) % n);
    }
    for (int i = 0; i < m; ++i)
    {
        segments.emplace_back(n + i, n + (i + 1) % m);
    }
    for (std::size_t i = 0; i < segments.size(); ++i)
    {
        for (std::size_t j = i + 1; j < segments.size(); ++j)
        {
            const auto [a, b] = segments[i];
            const auto [c, d] = segments[j];
            if (a == c || a == d || b == c || b == d)
            {
                continue;
            }
            if (detail::segments_touch(pts[a], pts[b], pts[c], pts[d], eps))
            {
                throw TriangulationError("triangulate_annulus: segment " + std::to_string(a) + " intersects segment " +
                                             std::to_string(c),
                                         a, c);
            }
        }
    }
    for (int i = 0; i < m; ++i)
    {
        if (!point_in_polygon(pts[n + i], out_pts))
        {
            throw TriangulationError("triangulate_annulus: inner vertex " + std::to_string(n + i) +
                                         " lies outside the outer loop",
                                     n + i, -1);
        }
    }

    // Outer loop counter-clockwise, inner loop clockwise.
    std::vector<int> outer_ids(n), inner_ids(m);
    for (int i = 0; i < n; ++i)
    {
        outer_ids[i] = i;
    }
    for (int i = 0; i < m; ++i)
    {
        inner_ids[i] = n + i;
    }
    if (outer_area < 0.0)
    {
        std::reverse(outer_ids.begin(), outer_ids.end());
    }
    if (m > 0 && polygon_area(in_pts) > 0.0)
    {
        std::reverse(inner_ids.begin(), inner_ids.end());
    }

    std::vector<int> poly;
    if (m == 0)
    {
        poly = outer_ids;
    } else
    {
        // Bridge from the rightmost inner vertex to the nearest visible outer vertex.
        std::vector<int> inner_order(m);
        for (int i = 0; i < m; ++i)
        {
            inner_order[i] = i;
        }
        std::sort(inner_order.begin(), inner_order.end(), [&](int a, int b) {
            const Vec2& p = pts[inner_ids[a]];
            const Vec2& q = pts[inner_ids[b]];
            return p.x() != q.x() ? p.x() > q.x() : p.y() > q.y();
        });
        const auto visible = [&](int u, int v) {
            for (const auto& [a, b] : segments)
            {
                if (a == u || b == u || a == v || b == v)
                {
                    continue;
                }
                if (detail::segments_touch(pts[u], pts[v], pts[a], pts[b], eps))
                {
                    return false;
                }
            }
            const Vec2 mid = 0.5 * (pts[u] + pts[v]);
            return point_in_polygon(mid, out_pts) && !point_in_polygon(mid, in_pts);
        };
        int bridge_inner = -1, bridge_outer = -1;
        for (int k : inner_order)
        {
            const int u = inner_ids[k];
            std::vector<int> order(n);
            for (int i = 0; i < n; ++i)
            {
                order[i] = i;
            }
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                return (pts[outer_ids[a]] - pts[u]).squaredNorm() < (pts[outer_ids[b]] - pts[u]).squaredNorm();
            });
            for (int i : order)
            {
                if (visible(u, outer_ids[i]))
                {
                    bridge_inner = k;
                    bridge_outer = i;
                    break;
                }
            }
            if (bridge_inner >= 0)
            {
                break;
            }
        }
        if (bridge_inner < 0)
        {
            throw std::runtime_error("triangulate_annulus: no visible bridge between the loops");
        }
        for (int i = 0; i <= n; ++i)
        {
            poly.push_back(outer_ids[(bridge_outer + i) % n]);
        }
        for (int i = 0; i <= m; ++i)
        {
            poly.push_back(inner_ids[(bridge_inner + i) % m]);
        }
    }

    auto tris = detail::ear_clip(std::move(poly), pts, eps);
    detail::legalize(tris, pts, segments);
    for (Triangle& t : tris)
    {
        std::rotate(t.begin(), std::min_element(t.begin(), t.end()), t.end());
    }
    std::sort(tris.begin(), tris.end());
    return tris;
}

} /* namespace stitch */
} /* namespace audioear */

#endif /* AUDIOEAR_STITCH_TRIANGULATE_HPP */
