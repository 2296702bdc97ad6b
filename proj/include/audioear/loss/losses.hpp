/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/loss/losses.hpp
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

#ifndef AUDIOEAR_LOSS_LOSSES_HPP
#define AUDIOEAR_LOSS_LOSSES_HPP

#include "audioear/core/geometry.hpp"
#include "audioear/core/image.hpp"
#include "audioear/core/mesh.hpp"
#include "audioear/loss/landmarks.hpp"
#include "audioear/render/camera.hpp"
#include "audioear/render/rasterizer.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace loss {

using core::Vec2;
using core::Vec3;

/// Default number of arclength samples per contour.
inline constexpr int default_contour_samples = 128;

/**
 * Resamples a polyline at `n` points uniformly spaced in arclength, both
 * endpoints included. A polyline of zero length yields n copies of its first
 * point.
 */
inline std::vector<Vec2> resample_polyline(std::span<const Vec2> points, int n)
{
    if (points.empty() || n < 2)
    {
        throw std::invalid_argument("resample_polyline: need a non-empty polyline and n >= 2");
    }
    std::vector<double> cumulative(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i)
    {
        cumulative[i] = cumulative[i - 1] + (points[i] - points[i - 1]).norm();
    }
    const double total = cumulative.back();
    std::vector<Vec2> out(static_cast<std::size_t>(n), points.front());
    if (total <= 0.0)
    {
        return out;
    }
    std::size_t seg = 0;
    for (int j = 0; j < n; ++j)
    {
        const double s = total * j / (n - 1);
        while (seg + 2 < points.size() && cumulative[seg + 1] < s)
        {
            ++seg;
        }
        // Skip zero-length segments.
        while (seg + 2 < points.size() && cumulative[seg + 1] == cumulative[seg])
        {
            ++seg;
        }
        const double len = cumulative[seg + 1] - cumulative[seg];
        const double t = len > 0.0 ? std::clamp((s - cumulative[seg]) / len, 0.0, 1.0) : 0.0;
        out[static_cast<std::size_t>(j)] = points[seg] + t * (points[seg + 1] - points[seg]);
    }
    return out;
}

/**
 * Back-propagates gradients on resampled points to the polyline vertices,
 * including the dependence of every sample's arclength position on all
 * segment lengths.
 */
inline std::vector<Vec2> resample_polyline_backward(std::span<const Vec2> points, int n,
                                                    std::span<const Vec2> grad_samples)
{
    std::vector<Vec2> grad(points.size(), Vec2::Zero());
    const std::size_t m = points.size();
    std::vector<double> len(m > 0 ? m - 1 : 0);
    std::vector<Vec2> unit(len.size(), Vec2::Zero());
    std::vector<double> cumulative(m, 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i)
    {
        const Vec2 d = points[i + 1] - points[i];
        len[i] = d.norm();
        if (len[i] > 0.0)
        {
            unit[i] = d / len[i];
        }
        cumulative[i + 1] = cumulative[i] + len[i];
    }
    const double total = cumulative.back();
    if (total <= 0.0)
    {
        for (const Vec2& g : grad_samples)
        {
            grad[0] += g;
        }
        return grad;
    }
    // dL/d(len_i): accumulated from the sample positions.
    std::vector<double> grad_len(len.size(), 0.0);
    std::size_t seg = 0;
    for (int j = 0; j < n; ++j)
    {
        const double frac = static_cast<double>(j) / (n - 1);
        const double s = total * frac;
        while (seg + 2 < m && cumulative[seg + 1] < s)
        {
            ++seg;
        }
        while (seg + 2 < m && cumulative[seg + 1] == cumulative[seg])
        {
            ++seg;
        }
        const Vec2& g = grad_samples[static_cast<std::size_t>(j)];
        const double l = len[seg];
        if (l <= 0.0)
        {
            grad[seg] += g;
            continue;
        }
        const double raw_t = (s - cumulative[seg]) / l;
        const double t = std::clamp(raw_t, 0.0, 1.0);
        const Vec2 d = points[seg + 1] - points[seg];
        grad[seg] += (1.0 - t) * g;
        grad[seg + 1] += t * g;
        if (raw_t < 0.0 || raw_t > 1.0)
        {
            continue;
        }
        // t = (frac * total - C_seg) / l
        const double g_t = g.dot(d);
        for (std::size_t k = 0; k < len.size(); ++k)
        {
            double dt = frac / l;
            if (k < seg)
            {
                dt -= 1.0 / l;
            }
            if (k == seg)
            {
                dt -= t / l;
            }
            grad_len[k] += g_t * dt;
        }
    }
    for (std::size_t k = 0; k < len.size(); ++k)
    {
        grad[k] -= grad_len[k] * unit[k];
        grad[k + 1] += grad_len[k] * unit[k];
    }
    return grad;
}

/**
 * Symmetric chamfer distance between 2D point sets with the gradient with
 * respect to the first set (accumulated into `grad_a` when non-null).
 */
inline double chamfer_distance_2d(std::span<const Vec2> a, std::span<const Vec2> b, std::vector<Vec2>* grad_a)
{
    const auto ab = core::nearest_neighbors<Vec2>(a, b);
    const auto ba = core::nearest_neighbors<Vec2>(b, a);
    std::vector<double> dab(ab.size()), dba(ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i)
    {
        dab[i] = ab[i].distance;
    }
    for (std::size_t i = 0; i < ba.size(); ++i)
    {
        dba[i] = ba[i].distance;
    }
    if (grad_a)
    {
        grad_a->assign(a.size(), Vec2::Zero());
        const double wa = 0.5 / static_cast<double>(a.size());
        const double wb = 0.5 / static_cast<double>(b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            if (ab[i].distance > 0.0)
            {
                (*grad_a)[i] += wa * (a[i] - b[ab[i].index]) / ab[i].distance;
            }
        }
        for (std::size_t j = 0; j < b.size(); ++j)
        {
            if (ba[j].distance > 0.0)
            {
                (*grad_a)[ba[j].index] += wb * (a[ba[j].index] - b[j]) / ba[j].distance;
            }
        }
    }
    return 0.5 * (core::pairwise_mean(dab) + core::pairwise_mean(dba));
}

/**
 * Contour loss: for each landmark group, resample the predicted and the
 * ground-truth polylines at `samples` points and take the chamfer distance;
 * the result is the mean over groups. `pred` holds all predicted landmarks,
 * indexed like `gt.points`. Optional gradient with respect to `pred`.
 */
inline double contour_loss(std::span<const Vec2> pred, const LandmarkSet2D& gt, int samples = default_contour_samples,
                           std::vector<Vec2>* grad = nullptr)
{
    if (pred.size() != gt.points.size())
    {
        throw std::invalid_argument("contour_loss: predicted and ground-truth landmark counts differ");
    }
    if (gt.groups.empty())
    {
        throw std::invalid_argument("contour_loss: no contour groups");
    }
    if (samples < 2)
    {
        throw std::invalid_argument("contour_loss: need at least 2 samples per contour");
    }
    if (grad)
    {
        grad->assign(pred.size(), Vec2::Zero());
    }
    const double inv_groups = 1.0 / static_cast<double>(gt.groups.size());
    double total = 0.0;
    for (const auto& group : gt.groups)
    {
        std::vector<Vec2> p, g;
        for (int idx : group)
        {
            p.push_back(pred[idx]);
            g.push_back(gt.points[idx]);
        }
        const auto ps = resample_polyline(p, samples);
        const auto gs = resample_polyline(g, samples);
        std::vector<Vec2> grad_samples;
        total += chamfer_distance_2d(ps, gs, grad ? &grad_samples : nullptr);
        if (grad)
        {
            const auto gp = resample_polyline_backward(p, samples, grad_samples);
            for (std::size_t k = 0; k < group.size(); ++k)
            {
                (*grad)[group[k]] += inv_groups * gp[k];
            }
        }
    }
    return total * inv_groups;
}

/// Contour loss between two landmark sets with identical group structure.
inline double contour_loss(const LandmarkSet2D& pred, const LandmarkSet2D& gt, int samples = default_contour_samples)
{
    if (pred.groups != gt.groups)
    {
        throw std::invalid_argument("contour_loss: landmark sets have different group structure");
    }
    return contour_loss(pred.points, gt, samples);
}

/**
 * Mean pairwise cosine similarity over ordered pairs i != j of the batch.
 * Optional gradient with respect to every vector.
 */
inline double similarity_loss(std::span<const Eigen::VectorXd> batch, std::vector<Eigen::VectorXd>* grad = nullptr)
{
    const std::size_t bs = batch.size();
    if (bs < 2)
    {
        throw std::invalid_argument("similarity_loss: batch size must be at least 2");
    }
    std::vector<double> norms(bs);
    for (std::size_t i = 0; i < bs; ++i)
    {
        norms[i] = batch[i].norm();
        if (norms[i] == 0.0)
        {
            throw std::invalid_argument("similarity_loss: latent " + std::to_string(i) + " is the zero vector");
        }
        if (i > 0 && batch[i].size() != batch[0].size())
        {
            throw std::invalid_argument("similarity_loss: latent dimensions differ");
        }
    }
    const double scale = 1.0 / (static_cast<double>(bs) * static_cast<double>(bs - 1));
    if (grad)
    {
        grad->assign(bs, Eigen::VectorXd::Zero(batch[0].size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < bs; ++i)
    {
        for (std::size_t j = 0; j < bs; ++j)
        {
            if (i == j)
            {
                continue;
            }
            const double cos_ij = batch[i].dot(batch[j]) / (norms[i] * norms[j]);
            sum += cos_ij;
            if (grad)
            {
                // d cos_ij / d beta_i; the (j, i) term supplies the beta_j part.
                (*grad)[i] += 2.0 * scale *
                              (batch[j] / (norms[i] * norms[j]) - cos_ij * batch[i] / (norms[i] * norms[i]));
            }
        }
    }
    return scale * sum;
}

/// Squared distance of x outside [lo, hi], zero inside. `grad` receives d/dx.
inline double range_loss(double x, double lo, double hi, double* grad = nullptr)
{
    if (lo > hi)
    {
        throw std::invalid_argument("range_loss: lower bound exceeds upper bound");
    }
    double g = 0.0, v = 0.0;
    if (x < lo)
    {
        v = (lo - x) * (lo - x);
        g = -2.0 * (lo - x);
    } else if (x > hi)
    {
        v = (x - hi) * (x - hi);
        g = 2.0 * (x - hi);
    }
    if (grad)
    {
        *grad = g;
    }
    return v;
}

inline constexpr double camera_scale_min = 0.5;
inline constexpr double camera_scale_max = 4.0;
inline constexpr double camera_yaw_min = -1.5;
inline constexpr double camera_yaw_max = -0.5;

struct CameraLossGradient
{
    double scale = 0.0;
    double yaw = 0.0; ///< d/d r_y
};

/// Keeps the camera scale in [0.5, 4] and r_y in [-1.5, -0.5]; other angles are unconstrained.
inline double camera_loss(const render::CameraParams& cam, CameraLossGradient* grad = nullptr)
{
    double gs = 0.0, gy = 0.0;
    const double v = range_loss(cam.scale, camera_scale_min, camera_scale_max, &gs) +
                     range_loss(cam.rotation.y(), camera_yaw_min, camera_yaw_max, &gy);
    if (grad)
    {
        *grad = {gs, gy};
    }
    return v;
}

/**
 * Normalized landmark loss: sum_i |gt_i - pred_i| / (n * D_gt), D_gt the
 * diagonal of the ground-truth bounding box.
 */
inline double landmark_loss(std::span<const Vec2> pred, std::span<const Vec2> gt, std::vector<Vec2>* grad = nullptr)
{
    if (pred.size() != gt.size() || gt.empty())
    {
        throw std::invalid_argument("landmark_loss: landmark counts differ or are zero");
    }
    const double diag = bounding_box_diagonal(std::vector<Vec2>(gt.begin(), gt.end()));
    if (!(diag > 0.0))
    {
        throw std::invalid_argument("landmark_loss: ground-truth bounding box is degenerate");
    }
    const double denom = static_cast<double>(gt.size()) * diag;
    std::vector<double> err(gt.size());
    if (grad)
    {
        grad->assign(pred.size(), Vec2::Zero());
    }
    for (std::size_t i = 0; i < gt.size(); ++i)
    {
        const Vec2 d = pred[i] - gt[i];
        err[i] = d.norm();
        if (grad && err[i] > 0.0)
        {
            (*grad)[i] = d / (err[i] * denom);
        }
    }
    return core::pairwise_sum(err) / denom;
}

inline double landmark_loss(std::span<const Vec2> pred, const LandmarkSet2D& gt, std::vector<Vec2>* grad = nullptr)
{
    return landmark_loss(pred, std::span<const Vec2>(gt.points), grad);
}

/**
 * Photometric loss: || mask * image - rendered ||_2 over all pixels and
 * channels, divided by sqrt(width * height) so the value does not grow with
 * resolution. Rendered colour is zero outside its coverage.
 */
inline double photometric_loss(const core::Image& image, const render::RenderOutput& rendered, const core::Image& mask)
{
    if (image.channels != 3 || !image.same_shape(rendered.rgb) || mask.width != image.width ||
        mask.height != image.height || mask.channels != 1)
    {
        throw std::invalid_argument("photometric_loss: image, render and mask resolutions differ");
    }
    std::vector<double> sq(image.data.size());
    for (int y = 0; y < image.height; ++y)
    {
        for (int x = 0; x < image.width; ++x)
        {
            const double m = mask(x, y) > 0.5f ? 1.0 : 0.0;
            const double covered = rendered.mask(x, y) > 0.5f ? 1.0 : 0.0;
            for (int c = 0; c < 3; ++c)
            {
                const double d = m * image(x, y, c) - covered * rendered.rgb(x, y, c);
                sq[image.index(x, y, c)] = d * d;
            }
        }
    }
    return std::sqrt(core::pairwise_sum(sq) / (static_cast<double>(image.width) * image.height));
}

/// Mean absolute shape latent plus mean absolute texture latent. Gradients use sign(0) = 0.
inline double reg_loss(const Eigen::VectorXd& beta, const Eigen::VectorXd& theta, Eigen::VectorXd* grad_beta = nullptr,
                       Eigen::VectorXd* grad_theta = nullptr)
{
    if (beta.size() == 0 || theta.size() == 0)
    {
        throw std::invalid_argument("reg_loss: latent codes must be non-empty");
    }
    if (grad_beta)
    {
        *grad_beta = beta.array().sign().matrix() / static_cast<double>(beta.size());
    }
    if (grad_theta)
    {
        *grad_theta = theta.array().sign().matrix() / static_cast<double>(theta.size());
    }
    return beta.cwiseAbs().mean() + theta.cwiseAbs().mean();
}

/// reg_loss with an explicit check of the expected latent dimensions.
inline double reg_loss(const Eigen::VectorXd& beta, const Eigen::VectorXd& theta, int shape_dim, int texture_dim)
{
    if (beta.size() != shape_dim || theta.size() != texture_dim)
    {
        throw std::invalid_argument("reg_loss: expected latent dimensions " + std::to_string(shape_dim) + " and " +
                                    std::to_string(texture_dim) + ", got " + std::to_string(beta.size()) + " and " +
                                    std::to_string(theta.size()));
    }
    return reg_loss(beta, theta);
}

/**
 * Mesh smoothing loss: mean uniform-Laplacian norm over vertices, with the
 * gradient with respect to every vertex position.
 */
inline double smooth_loss(std::span<const Vec3> vertices, const std::vector<std::vector<int>>& neighbors,
                          std::vector<Vec3>* grad = nullptr)
{
    const auto lap = core::uniform_laplacian(vertices, neighbors);
    std::vector<double> norms(lap.size());
    for (std::size_t i = 0; i < lap.size(); ++i)
    {
        norms[i] = lap[i].norm();
    }
    if (grad)
    {
        const double inv_n = 1.0 / static_cast<double>(vertices.size());
        grad->assign(vertices.size(), Vec3::Zero());
        for (std::size_t i = 0; i < lap.size(); ++i)
        {
            if (norms[i] == 0.0)
            {
                continue;
            }
            const Vec3 u = inv_n * lap[i] / norms[i];
            (*grad)[i] -= u;
            const double w = 1.0 / static_cast<double>(neighbors[i].size());
            for (int j : neighbors[i])
            {
                (*grad)[j] += w * u;
            }
        }
    }
    return core::pairwise_mean(norms);
}

/// Loss weights; the defaults are the published values.
struct LossWeights
{
    double contour = 100.0;
    double sim = 1.0;
    double cam = 100.0;
    double lmk = 10.0;
    double photo = 100.0;
    double smooth = 10.0;
    double reg = 0.005;
};

inline void validate(const LossWeights& w)
{
    for (double v : {w.contour, w.sim, w.cam, w.lmk, w.photo, w.smooth, w.reg})
    {
        if (!(v >= 0.0) || !std::isfinite(v))
        {
            throw std::invalid_argument("loss weights must be finite and non-negative");
        }
    }
}

/// The seven loss terms. A term may be left empty only when its weight is zero.
struct LossComponents
{
    std::optional<double> contour, sim, cam, lmk, photo, smooth, reg;
};

/// Weighted sum of the seven loss terms.
inline double total_loss(const LossComponents& c, const LossWeights& w)
{
    validate(w);
    const auto term = [](const char* name, const std::optional<double>& value, double weight) {
        if (!value)
        {
            if (weight != 0.0)
            {
                throw std::invalid_argument(std::string("total_loss: component '") + name +
                                            "' is missing but its weight is non-zero");
            }
            return 0.0;
        }
        return weight * *value;
    };
    return term("contour", c.contour, w.contour) + term("sim", c.sim, w.sim) + term("cam", c.cam, w.cam) +
           term("lmk", c.lmk, w.lmk) + term("photo", c.photo, w.photo) + term("smooth", c.smooth, w.smooth) +
           term("reg", c.reg, w.reg);
}

} /* namespace loss */
} /* namespace audioear */

#endif /* AUDIOEAR_LOSS_LOSSES_HPP */
