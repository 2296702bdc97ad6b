/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/morphable/standin.hpp
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

#ifndef AUDIOEAR_MORPHABLE_STANDIN_HPP
#define AUDIOEAR_MORPHABLE_STANDIN_HPP

#include "audioear/core/random.hpp"
#include "audioear/morphable/model.hpp"

#include "Eigen/SVD"

#include <cmath>
#include <numbers>
#include <vector>

namespace audioear {
namespace morphable {

/**
 * Parameters of the synthetic stand-in models. The real ear and texture
 * models are licensed assets; the stand-ins have the same structure and are
 * small enough for unit tests.
 */
struct StandinOptions
{
    int rings = 7;    ///< Vertex rings around the apex; N = 1 + rings * segments.
    int segments = 7; ///< Vertices per ring.
    int components = 8;
    int training_shapes = 64;
    std::uint64_t seed = 1;
};

namespace detail {

// Ear-like shallow cap on an ellipsoid, apex pointing along +x (the lateral
// direction of a right ear in the canonical frame).
struct CapGeometry
{
    double ax = 10.0, ay = 30.0, az = 18.0;
    double polar_max = 0.45 * std::numbers::pi;
};

inline Vec3 cap_point(const CapGeometry& g, double rho, double phi, const Vec3& scale, double bump)
{
    const double psi = rho * g.polar_max;
    const Vec3 p(g.ax * scale.x() * std::cos(psi), g.ay * scale.y() * std::sin(psi) * std::cos(phi),
                 g.az * scale.z() * std::sin(psi) * std::sin(phi));
    const Vec3 n = Vec3(p.x() / (g.ax * g.ax), p.y() / (g.ay * g.ay), p.z() / (g.az * g.az)).normalized();
    return p + bump * n;
}

inline std::vector<Eigen::Vector2d> cap_parameters(const StandinOptions& o)
{
    std::vector<Eigen::Vector2d> params;
    params.emplace_back(0.0, 0.0);
    for (int r = 1; r <= o.rings; ++r)
    {
        for (int s = 0; s < o.segments; ++s)
        {
            params.emplace_back(static_cast<double>(r) / o.rings, 2.0 * std::numbers::pi * s / o.segments);
        }
    }
    return params;
}

inline std::vector<Face> cap_faces(const StandinOptions& o)
{
    const auto vid = [&](int r, int s) { return r == 0 ? 0 : 1 + (r - 1) * o.segments + (s % o.segments); };
    std::vector<Face> faces;
    for (int s = 0; s < o.segments; ++s)
    {
        faces.push_back({0, vid(1, s + 1), vid(1, s)});
    }
    for (int r = 1; r < o.rings; ++r)
    {
        for (int s = 0; s < o.segments; ++s)
        {
            faces.push_back({vid(r, s), vid(r, s + 1), vid(r + 1, s + 1)});
            faces.push_back({vid(r, s), vid(r + 1, s + 1), vid(r + 1, s)});
        }
    }
    return faces;
}

// Planar embedding of the parameter domain on the unit disk.
inline Eigen::Vector2d disk_point(double rho, double phi)
{
    return {rho * std::cos(phi), rho * std::sin(phi)};
}

inline core::SurfaceSample locate_on_disk(const std::vector<Eigen::Vector2d>& disk, const std::vector<Face>& faces,
                                          const Eigen::Vector2d& q)
{
    int best_face = -1;
    Vec3 best_bary;
    double best_violation = 1e300;
    for (std::size_t fi = 0; fi < faces.size(); ++fi)
    {
        const auto& a = disk[faces[fi][0]];
        const auto& b = disk[faces[fi][1]];
        const auto& c = disk[faces[fi][2]];
        const double det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        const double l1 = ((q - a).x() * (c - a).y() - (q - a).y() * (c - a).x()) / det;
        const double l2 = ((b - a).x() * (q - a).y() - (b - a).y() * (q - a).x()) / det;
        const Vec3 bary(1.0 - l1 - l2, l1, l2);
        const double violation = -std::min(0.0, bary.minCoeff());
        if (violation < best_violation)
        {
            best_violation = violation;
            best_face = static_cast<int>(fi);
            best_bary = bary;
        }
    }
    return {best_face, best_bary};
}

} /* namespace detail */

/**
 * Builds the stand-in shape model: PCA over procedurally deformed ellipsoidal
 * caps. Eigenvalues are per-component standard deviations, so latent entries
 * are unit-variance. Also embeds 55 landmarks in 4 contour groups.
 */
inline EarShapeModel make_standin_shape_model(const StandinOptions& options = {})
{
    const detail::CapGeometry geom;
    const auto params = detail::cap_parameters(options);
    const auto n = static_cast<Eigen::Index>(params.size());
    core::Random rng(options.seed);

    Eigen::MatrixXd samples(3 * n, options.training_shapes);
    for (int t = 0; t < options.training_shapes; ++t)
    {
        const Vec3 scale(1.0 + 0.12 * rng.normal(), 1.0 + 0.10 * rng.normal(), 1.0 + 0.10 * rng.normal());
        double coeff[4][2][2];
        for (auto& m : coeff)
            for (auto& p : m)
                for (double& c : p)
                    c = rng.normal(0.0, 0.8);
        const double shear = 0.08 * rng.normal();
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const double rho = params[i].x();
            const double phi = params[i].y();
            double bump = 0.0;
            for (int m = 0; m < 4; ++m)
            {
                for (int p = 0; p < 2; ++p)
                {
                    const double radial = std::pow(rho, p + 1);
                    bump += radial * (coeff[m][p][0] * std::cos(m * phi) + coeff[m][p][1] * std::sin(m * phi));
                }
            }
            Vec3 v = detail::cap_point(geom, rho, phi, scale, bump);
            v.z() += shear * v.y();
            samples.block<3, 1>(3 * i, t) = v;
        }
    }

    EarShapeModel model;
    model.mean = samples.rowwise().mean();
    const Eigen::MatrixXd centered = samples.colwise() - model.mean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
    const int k = options.components;
    model.basis = svd.matrixU().leftCols(k);
    model.eigenvalues = svd.singularValues().head(k) / std::sqrt(options.training_shapes - 1.0);
    for (int c = 0; c < k; ++c)
    {
        Eigen::Index arg;
        model.basis.col(c).cwiseAbs().maxCoeff(&arg);
        if (model.basis(arg, c) < 0.0)
        {
            model.basis.col(c) *= -1.0;
        }
    }

    model.faces = detail::cap_faces(options);
    // Orient faces along the outward ellipsoid normal of the mean shape.
    const auto mean_pts = to_points(model.mean);
    for (Face& f : model.faces)
    {
        const Vec3 c = (mean_pts[f[0]] + mean_pts[f[1]] + mean_pts[f[2]]) / 3.0;
        const Vec3 outward(c.x() / (geom.ax * geom.ax), c.y() / (geom.ay * geom.ay), c.z() / (geom.az * geom.az));
        const Vec3 normal = (mean_pts[f[1]] - mean_pts[f[0]]).cross(mean_pts[f[2]] - mean_pts[f[0]]);
        if (normal.dot(outward) < 0.0)
        {
            std::swap(f[1], f[2]);
        }
    }

    std::vector<Eigen::Vector2d> disk;
    for (const auto& p : params)
    {
        disk.push_back(detail::disk_point(p.x(), p.y()));
        model.uv.emplace_back(0.5 + 0.5 * disk.back().x(), 0.5 + 0.5 * disk.back().y());
    }

    // Four ordered contours: rim, inner ridge, a radial line and an inner arc.
    const double pi = std::numbers::pi;
    struct Arc
    {
        int count;
        double rho0, rho1, phi0, phi1;
    };
    const Arc arcs[num_contours] = {
        {20, 0.95, 0.95, 0.10 * pi, 1.90 * pi},
        {15, 0.70, 0.70, 0.30 * pi, 1.70 * pi},
        {10, 0.15, 0.85, 0.05 * pi, 0.05 * pi},
        {10, 0.40, 0.40, 0.80 * pi, 1.60 * pi},
    };
    int next = 0;
    for (const Arc& arc : arcs)
    {
        std::vector<int> group;
        for (int i = 0; i < arc.count; ++i)
        {
            const double t = static_cast<double>(i) / (arc.count - 1);
            const double rho = arc.rho0 + t * (arc.rho1 - arc.rho0);
            const double phi = arc.phi0 + t * (arc.phi1 - arc.phi0);
            model.landmarks.points.push_back(detail::locate_on_disk(disk, model.faces, detail::disk_point(rho, phi)));
            group.push_back(next++);
        }
        model.landmarks.groups.push_back(group);
    }
    validate(model);
    return model;
}

/// Smooth procedural texture model with `components` basis maps (default 50).
inline TextureModel make_standin_texture_model(int size = 32, int components = reference_texture_dim,
                                               std::uint64_t seed = 2)
{
    TextureModel model;
    model.width = size;
    model.height = size;
    const auto rows = static_cast<Eigen::Index>(size) * size * 3;
    model.mean.resize(rows);
    model.basis.resize(rows, components);
    const double skin[3] = {0.85, 0.64, 0.55};
    for (int y = 0; y < size; ++y)
    {
        for (int x = 0; x < size; ++x)
        {
            const double u = (x + 0.5) / size - 0.5;
            const double v = (y + 0.5) / size - 0.5;
            const double shade = 1.0 - 0.35 * std::exp(-(u * u + v * v) / 0.04);
            for (int c = 0; c < 3; ++c)
            {
                model.mean[(static_cast<Eigen::Index>(y) * size + x) * 3 + c] = skin[c] * shade;
            }
        }
    }
    core::Random rng(seed);
    for (int k = 0; k < components; ++k)
    {
        const double fx = 1 + static_cast<double>(rng.below(4));
        const double fy = 1 + static_cast<double>(rng.below(4));
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double color[3] = {rng.normal(), rng.normal(), rng.normal()};
        for (int y = 0; y < size; ++y)
        {
            for (int x = 0; x < size; ++x)
            {
                const double u = (x + 0.5) / size;
                const double v = (y + 0.5) / size;
                const double pattern = std::cos(std::numbers::pi * (fx * u + fy * v) + phase);
                for (int c = 0; c < 3; ++c)
                {
                    model.basis((static_cast<Eigen::Index>(y) * size + x) * 3 + c, k) = 0.02 * pattern * color[c];
                }
            }
        }
    }
    return model;
}

} /* namespace morphable */
} /* namespace audioear */

#endif /* AUDIOEAR_MORPHABLE_STANDIN_HPP */
