/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/core/geometry.hpp
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

#ifndef AUDIOEAR_CORE_GEOMETRY_HPP
#define AUDIOEAR_CORE_GEOMETRY_HPP

#include "audioear/core/mesh.hpp"
#include "audioear/core/random.hpp"
#include "audioear/core/reduction.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace audioear {
namespace core {

/// Closest point on a triangle together with its barycentric coordinates (weights of a, b, c).
struct TrianglePoint
{
    Vec3 point;
    Vec3 barycentric;
};

/**
 * Exact closest point on triangle (a, b, c) to p, handling the interior, the
 * three edges and the three vertices (Voronoi-region walk).
 */
inline TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0)
    {
        return {a, Vec3(1.0, 0.0, 0.0)};
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3)
    {
        return {b, Vec3(0.0, 1.0, 0.0)};
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0)
    {
        const double v = d1 / (d1 - d3);
        return {a + v * ab, Vec3(1.0 - v, v, 0.0)};
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6)
    {
        return {c, Vec3(0.0, 0.0, 1.0)};
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0)
    {
        const double w = d2 / (d2 - d6);
        return {a + w * ac, Vec3(1.0 - w, 0.0, w)};
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {b + w * (c - b), Vec3(0.0, 1.0 - w, w)};
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return {a + ab * v + ac * w, Vec3(1.0 - v - w, v, w)};
}

struct ClosestPoint
{
    double distance = std::numeric_limits<double>::infinity();
    int face = -1;
    Vec3 point = Vec3::Zero();
    Vec3 barycentric = Vec3::Zero();
};

/**
 * Axis-aligned bounding-box hierarchy over the faces of a mesh for exact
 * closest-point queries. The tree stores a copy of the geometry it was built
 * from; rebuild it when the vertices move.
 */
class FaceTree
{
public:
    explicit FaceTree(const TriMesh& mesh) : vertices(mesh.vertices), faces(mesh.faces)
    {
        if (faces.empty())
        {
            throw std::invalid_argument("cannot query distances against a mesh without faces");
        }
        order.resize(faces.size());
        std::iota(order.begin(), order.end(), 0);
        centroids.reserve(faces.size());
        for (const Face& f : faces)
        {
            centroids.push_back((vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 3.0);
        }
        nodes.reserve(2 * faces.size());
        build(0, static_cast<int>(faces.size()));
    }

    ClosestPoint closest(const Vec3& p) const
    {
        ClosestPoint best;
        double best_sq = std::numeric_limits<double>::infinity();
        // Explicit stack; children visited nearest-box first.
        std::vector<int> stack;
        stack.reserve(64);
        stack.push_back(0);
        while (!stack.empty())
        {
            const int idx = stack.back();
            stack.pop_back();
            const Node& node = nodes[idx];
            if (box_distance_sq(node, p) > best_sq)
            {
                continue;
            }
            if (node.left < 0)
            {
                for (int k = node.begin; k < node.end; ++k)
                {
                    const int fi = order[k];
                    const Face& f = faces[fi];
                    const TrianglePoint tp = closest_point_on_triangle(p, vertices[f[0]], vertices[f[1]], vertices[f[2]]);
                    const double d2 = (p - tp.point).squaredNorm();
                    if (d2 < best_sq || (d2 == best_sq && fi < best.face))
                    {
                        best_sq = d2;
                        best.face = fi;
                        best.point = tp.point;
                        best.barycentric = tp.barycentric;
                    }
                }
                continue;
            }
            const double dl = box_distance_sq(nodes[node.left], p);
            const double dr = box_distance_sq(nodes[node.right], p);
            if (dl < dr)
            {
                stack.push_back(node.right);
                stack.push_back(node.left);
            } else
            {
                stack.push_back(node.left);
                stack.push_back(node.right);
            }
        }
        best.distance = std::sqrt(best_sq);
        return best;
    }

private:
    struct Node
    {
        Eigen::Vector3d lo;
        Eigen::Vector3d hi;
        int left = -1;
        int right = -1;
        int begin = 0;
        int end = 0;
    };

    static double box_distance_sq(const Node& node, const Vec3& p)
    {
        const Vec3 d = (node.lo - p).cwiseMax(Vec3::Zero()).cwiseMax(p - node.hi);
        return d.squaredNorm();
    }

    int build(int begin, int end)
    {
        const int idx = static_cast<int>(nodes.size());
        nodes.emplace_back();
        Node node;
        node.begin = begin;
        node.end = end;
        node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        node.hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
        Vec3 clo = node.lo;
        Vec3 chi = node.hi;
        for (int k = begin; k < end; ++k)
        {
            const Face& f = faces[order[k]];
            for (int v : f)
            {
                node.lo = node.lo.cwiseMin(vertices[v]);
                node.hi = node.hi.cwiseMax(vertices[v]);
            }
            clo = clo.cwiseMin(centroids[order[k]]);
            chi = chi.cwiseMax(centroids[order[k]]);
        }
        constexpr int leaf_size = 4;
        if (end - begin > leaf_size)
        {
            int axis = 0;
            (chi - clo).maxCoeff(&axis);
            const int mid = (begin + end) / 2;
            std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end, [&](int a, int b) {
                const double ca = centroids[a][axis];
                const double cb = centroids[b][axis];
                return ca < cb || (ca == cb && a < b);
            });
            node.left = build(begin, mid);
            node.right = build(mid, end);
        }
        nodes[idx] = node;
        return idx;
    }

    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<Vec3> centroids;
    std::vector<int> order;
    std::vector<Node> nodes;
};

/// Distance from p to the closest triangle of the mesh (mm). Throws on a mesh without faces.
inline double point_to_mesh_distance(const Vec3& p, const TriMesh& mesh)
{
    if (mesh.faces.empty())
    {
        throw std::invalid_argument("point_to_mesh_distance: mesh has no faces");
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Face& f : mesh.faces)
    {
        const TrianglePoint tp = closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
        best = std::min(best, (p - tp.point).squaredNorm());
    }
    return std::sqrt(best);
}

/// Per-point distances from a point set to the mesh surface, computed with a FaceTree.
inline std::vector<double> point_distances(std::span<const Vec3> points, const FaceTree& tree)
{
    std::vector<double> dist(points.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.size()); ++i)
    {
        dist[i] = tree.closest(points[i]).distance;
    }
    return dist;
}

/**
 * Scan-to-mesh distance (S2M): the mean over scan points of the distance to
 * the closest mesh triangle, in mm. The mean uses pairwise summation, so the
 * result does not depend on the thread count.
 */
inline double scan_to_mesh(const PointCloud& scan, const TriMesh& mesh)
{
    if (scan.points.empty())
    {
        throw std::invalid_argument("scan_to_mesh: scan is empty");
    }
    if (mesh.faces.empty())
    {
        throw std::invalid_argument("scan_to_mesh: mesh has no faces");
    }
    const FaceTree tree(mesh);
    const std::vector<double> dist = point_distances(scan.points, tree);
    return pairwise_mean(dist);
}

/// Index and distance of one neighbour.
struct Neighbor
{
    int index;
    double distance;
};

/**
 * The k nearest points to the query, ascending by distance, ties broken by
 * lower index. Exact (exhaustive).
 */
template <typename Point>
std::vector<Neighbor> knn(const Point& query, std::span<const Point> points, std::size_t k)
{
    if (k > points.size())
    {
        throw std::invalid_argument("knn: k = " + std::to_string(k) + " exceeds the number of points (" +
                                    std::to_string(points.size()) + ")");
    }
    std::vector<std::pair<double, int>> d(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        d[i] = {(points[i] - query).squaredNorm(), static_cast<int>(i)};
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<Neighbor> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
    {
        out.push_back({d[i].second, std::sqrt(d[i].first)});
    }
    return out;
}

/// Index of the nearest point in `points` for each element of `queries` (ties to the lower index).
template <typename Point>
std::vector<Neighbor> nearest_neighbors(std::span<const Point> queries, std::span<const Point> points)
{
    std::vector<Neighbor> out(queries.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.size()); ++i)
    {
        double best = std::numeric_limits<double>::infinity();
        int best_j = -1;
        for (std::size_t j = 0; j < points.size(); ++j)
        {
            const double d = (points[j] - queries[i]).squaredNorm();
            if (d < best)
            {
                best = d;
                best_j = static_cast<int>(j);
            }
        }
        out[i] = {best_j, std::sqrt(best)};
    }
    return out;
}

/**
 * Symmetric chamfer distance: half the sum of the mean nearest-neighbour
 * distance a->b and b->a. Works for any fixed-size Eigen point type.
 */
template <typename Point>
double chamfer_distance(std::span<const Point> a, std::span<const Point> b)
{
    if (a.empty() || b.empty())
    {
        throw std::invalid_argument("chamfer_distance: point sets must be non-empty");
    }
    const auto ab = nearest_neighbors<Point>(a, b);
    const auto ba = nearest_neighbors<Point>(b, a);
    std::vector<double> dab(ab.size());
    std::vector<double> dba(ba.size());
    std::transform(ab.begin(), ab.end(), dab.begin(), [](const Neighbor& n) { return n.distance; });
    std::transform(ba.begin(), ba.end(), dba.begin(), [](const Neighbor& n) { return n.distance; });
    return 0.5 * (pairwise_mean(dab) + pairwise_mean(dba));
}

template <typename Point>
double chamfer_distance(const std::vector<Point>& a, const std::vector<Point>& b)
{
    return chamfer_distance<Point>(std::span<const Point>(a), std::span<const Point>(b));
}

/// Sorted, de-duplicated 1-ring neighbours of every vertex.
inline std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh)
{
    std::vector<std::vector<int>> nbrs(mesh.vertices.size());
    for (const Face& f : mesh.faces)
    {
        for (int e = 0; e < 3; ++e)
        {
            nbrs[f[e]].push_back(f[(e + 1) % 3]);
            nbrs[f[e]].push_back(f[(e + 2) % 3]);
        }
    }
    for (auto& n : nbrs)
    {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return nbrs;
}

/**
 * Uniform Laplacian: for every vertex, the centroid of its 1-ring neighbours
 * minus the vertex. Throws if any vertex has no neighbours.
 */
inline std::vector<Vec3> uniform_laplacian(std::span<const Vec3> vertices, const std::vector<std::vector<int>>& neighbors)
{
    std::vector<Vec3> lap(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i)
    {
        const auto& n = neighbors[i];
        if (n.empty())
        {
            throw std::invalid_argument("uniform_laplacian: vertex " + std::to_string(i) + " is isolated");
        }
        Vec3 c = Vec3::Zero();
        for (int j : n)
        {
            c += vertices[j];
        }
        lap[i] = c / static_cast<double>(n.size()) - vertices[i];
    }
    return lap;
}

inline std::vector<Vec3> uniform_laplacian(const TriMesh& mesh)
{
    return uniform_laplacian(mesh.vertices, vertex_neighbors(mesh));
}

/// Mean Laplacian vector norm over all vertices (the mesh smoothing loss).
inline double smooth_loss(const TriMesh& mesh)
{
    const auto lap = uniform_laplacian(mesh);
    std::vector<double> norms(lap.size());
    std::transform(lap.begin(), lap.end(), norms.begin(), [](const Vec3& v) { return v.norm(); });
    return pairwise_mean(norms);
}

/**
 * Explicit uniform Laplacian smoothing: every iteration moves each vertex by
 * step times its Laplacian vector (simultaneous update). If `movable` is
 * non-empty, only vertices flagged true move.
 */
inline TriMesh laplacian_smooth(TriMesh mesh, int iterations, double step, const std::vector<bool>& movable = {})
{
    if (!(step > 0.0 && step <= 1.0))
    {
        throw std::invalid_argument("laplacian_smooth: step must lie in (0, 1]");
    }
    if (iterations < 0)
    {
        throw std::invalid_argument("laplacian_smooth: iterations must be non-negative");
    }
    if (!movable.empty() && movable.size() != mesh.vertices.size())
    {
        throw std::invalid_argument("laplacian_smooth: movable mask size mismatch");
    }
    if (iterations == 0)
    {
        return mesh;
    }
    const auto nbrs = vertex_neighbors(mesh);
    for (int it = 0; it < iterations; ++it)
    {
        const auto lap = uniform_laplacian(mesh.vertices, nbrs);
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        {
            if (movable.empty() || movable[i])
            {
                mesh.vertices[i] += step * lap[i];
            }
        }
    }
    return mesh;
}

/// Mirror through the sagittal plane x = 0; face winding is reversed so normals stay outward.
inline TriMesh reflect_sagittal(TriMesh mesh)
{
    for (Vec3& v : mesh.vertices)
    {
        v.x() = -v.x();
    }
    for (Face& f : mesh.faces)
    {
        std::swap(f[1], f[2]);
    }
    return mesh;
}

inline PointCloud reflect_sagittal(PointCloud cloud)
{
    for (Vec3& p : cloud.points)
    {
        p.x() = -p.x();
    }
    return cloud;
}

/**
 * Uniform random subset of n points without replacement (partial
 * Fisher-Yates), deterministic for a given seed. The output keeps the order
 * in which points were drawn.
 */
inline PointCloud downsample_random(const PointCloud& cloud, std::size_t n, std::uint64_t seed)
{
    if (n > cloud.points.size())
    {
        throw std::invalid_argument("downsample_random: requested " + std::to_string(n) + " points from a cloud of " +
                                    std::to_string(cloud.points.size()));
    }
    std::vector<std::size_t> idx(cloud.points.size());
    std::iota(idx.begin(), idx.end(), 0);
    Random rng(seed);
    PointCloud out;
    out.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.points.push_back(cloud.points[idx[i]]);
        if (cloud.has_colors())
        {
            out.colors.push_back(cloud.colors[idx[i]]);
        }
    }
    return out;
}

/// A point on the mesh surface identified by its face and barycentric weights.
struct SurfaceSample
{
    int face;
    Vec3 barycentric;
};

/// Area-weighted uniform samples on the surface.
inline std::vector<SurfaceSample> sample_surface(const TriMesh& mesh, std::size_t count, Random& rng)
{
    if (mesh.faces.empty())
    {
        throw std::invalid_argument("sample_surface: mesh has no faces");
    }
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i)
    {
        total += face_area(mesh, mesh.faces[i]);
        cumulative[i] = total;
    }
    std::vector<SurfaceSample> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s)
    {
        const double r = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        if (it == cumulative.end())
        {
            --it;
        }
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        out.push_back({static_cast<int>(it - cumulative.begin()), Vec3(1.0 - r1, r1 * (1.0 - r2), r1 * r2)});
    }
    return out;
}

inline Vec3 surface_point(const TriMesh& mesh, const SurfaceSample& s)
{
    const Face& f = mesh.faces[s.face];
    return s.barycentric[0] * mesh.vertices[f[0]] + s.barycentric[1] * mesh.vertices[f[1]] +
           s.barycentric[2] * mesh.vertices[f[2]];
}

inline PointCloud sample_surface_points(const TriMesh& mesh, std::size_t count, Random& rng)
{
    PointCloud cloud;
    for (const SurfaceSample& s : sample_surface(mesh, count, rng))
    {
        cloud.points.push_back(surface_point(mesh, s));
    }
    return cloud;
}

/// Undirected edge -> number of incident faces.
inline std::map<std::pair<int, int>, int> edge_face_counts(const TriMesh& mesh)
{
    std::map<std::pair<int, int>, int> counts;
    for (const Face& f : mesh.faces)
    {
        for (int e = 0; e < 3; ++e)
        {
            const int a = f[e];
            const int b = f[(e + 1) % 3];
            ++counts[{std::min(a, b), std::max(a, b)}];
        }
    }
    return counts;
}

/// Internal angles of a triangle, in degrees.
inline std::array<double, 3> triangle_angles(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const auto angle = [](const Vec3& p, const Vec3& q, const Vec3& r) {
        const Vec3 u = q - p;
        const Vec3 v = r - p;
        return std::atan2(u.cross(v).norm(), u.dot(v)) * 180.0 / std::numbers::pi;
    };
    return {angle(a, b, c), angle(b, c, a), angle(c, a, b)};
}

/**
 * Angle statistics over the given faces (all faces if `face_subset` is empty)
 * and the number of boundary edges of the whole mesh.
 */
inline MeshQualityReport mesh_quality(const TriMesh& mesh, double sliver_threshold_deg = 10.0,
                                      const std::vector<int>& face_subset = {})
{
    MeshQualityReport report;
    const auto visit = [&](const Face& f) {
        const auto ang = triangle_angles(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
        const double lo = *std::min_element(ang.begin(), ang.end());
        const double hi = *std::max_element(ang.begin(), ang.end());
        report.min_angle = std::min(report.min_angle, lo);
        report.max_angle = std::max(report.max_angle, hi);
        if (lo < sliver_threshold_deg)
        {
            ++report.sliver_count;
        }
    };
    if (face_subset.empty())
    {
        for (const Face& f : mesh.faces)
        {
            visit(f);
        }
    } else
    {
        for (int fi : face_subset)
        {
            visit(mesh.faces.at(fi));
        }
    }
    for (const auto& [edge, count] : edge_face_counts(mesh))
    {
        if (count == 1)
        {
            ++report.boundary_edge_count;
        }
    }
    return report;
}

} /* namespace core */
} /* namespace audioear */

#endif /* AUDIOEAR_CORE_GEOMETRY_HPP */
