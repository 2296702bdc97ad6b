/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/fitting/fit.hpp
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

#ifndef AUDIOEAR_FITTING_FIT_HPP
#define AUDIOEAR_FITTING_FIT_HPP

#include "audioear/core/geometry.hpp"
#include "audioear/core/image.hpp"
#include "audioear/core/random.hpp"
#include "audioear/fitting/adam.hpp"
#include "audioear/fitting/gradient.hpp"
#include "audioear/loss/landmarks.hpp"
#include "audioear/loss/losses.hpp"
#include "audioear/morphable/model.hpp"
#include "audioear/render/camera.hpp"
#include "audioear/render/landmark_mask.hpp"
#include "audioear/render/rasterizer.hpp"

#include "Eigen/Core"
#include "json.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace fitting {

using core::Vec2;
using core::Vec3;

/// Per-group Adam step sizes.
struct LearningRates
{
    double scale = 0.02;
    double rotation = 0.02;
    double translation = 0.5;
    double shape = 0.1;
    double texture = 0.02;
};

struct FitConfig
{
    loss::LossWeights weights;
    double stage1_fraction = 0.2;
    int total_iterations = 600;
    LearningRates learning_rates;
    double final_lr_factor = 0.3;  ///< step sizes decay geometrically to this factor within each stage
    AdamOptions adam;
    GradientMode gradient_mode = GradientMode::analytic;
    double fd_step = default_fd_step;
    std::uint64_t seed = 0;
    int contour_samples = 512; ///< fit-side resampling density per contour
    Vec3 initial_rotation = Vec3(std::numbers::pi, -1.0, 0.0);
    double convergence_tolerance = 1e-6;
    int convergence_window = 20;
    double batch_jitter = 1e-2; ///< sigma of the seeded shape perturbation that breaks batch symmetry
};

inline void validate(const FitConfig& c)
{
    loss::validate(c.weights);
    if (!(c.stage1_fraction >= 0.0 && c.stage1_fraction < 1.0))
    {
        throw std::invalid_argument("fit config: stage1_fraction must lie in [0, 1)");
    }
    if (c.total_iterations < 1)
    {
        throw std::invalid_argument("fit config: total_iterations must be at least 1");
    }
    if (!(c.final_lr_factor > 0.0) || c.contour_samples < 2 || c.convergence_window < 1 || !(c.fd_step > 0.0))
    {
        throw std::invalid_argument("fit config: invalid optimizer settings");
    }
}

/// One row of the loss trace. `total` is always the full weighted objective.
struct LossTrace
{
    int iteration = 0;
    int stage = 1;
    double contour = 0.0, sim = 0.0, cam = 0.0, lmk = 0.0, photo = 0.0, smooth = 0.0, reg = 0.0;
    double total = 0.0;
};

struct FitResult
{
    morphable::LatentCode latent;
    render::CameraParams camera;
    std::vector<LossTrace> loss_trace;
    bool converged = false;
    int best_iteration = 0;
    double best_loss = 0.0;
};

/// Thrown when the objective blows up; carries the trace so far.
class FitDivergence : public std::runtime_error
{
public:
    FitDivergence(const std::string& what, std::vector<LossTrace> trace)
        : std::runtime_error(what), trace_(std::move(trace))
    {
    }
    const std::vector<LossTrace>& trace() const noexcept { return trace_; }

private:
    std::vector<LossTrace> trace_;
};

struct FitInput
{
    loss::LandmarkSet2D landmarks;
    std::optional<core::Image> image;
};

inline constexpr int camera_parameter_count = 6;

/// Packs (s, r_x, r_y, r_z, t_x, t_y) followed by beta and theta.
inline Eigen::VectorXd pack(const render::CameraParams& cam, const Eigen::VectorXd& beta, const Eigen::VectorXd& theta)
{
    Eigen::VectorXd x(camera_parameter_count + beta.size() + theta.size());
    x << cam.scale, cam.rotation, cam.translation, beta, theta;
    return x;
}

inline render::CameraParams unpack_camera(const Eigen::VectorXd& x)
{
    render::CameraParams cam;
    cam.scale = x[0];
    cam.rotation = x.segment<3>(1);
    cam.translation = x.segment<2>(4);
    return cam;
}

/**
 * The fitting objective of one image as a function of the packed parameters.
 * Analytic gradients cover every term except the photometric one, which is
 * always differentiated by central differences because rasterization is
 * piecewise constant.
 */
class FitProblem
{
public:
    FitProblem(const morphable::EarShapeModel& model, const morphable::TextureModel* texture, FitInput input,
               const FitConfig& config)
        : model_(model), texture_(texture), input_(std::move(input)), config_(config)
    {
        loss::validate(input_.landmarks, model.landmarks.points.size(), 0);
        if (input_.landmarks.groups.empty())
        {
            throw std::invalid_argument("fit: landmarks have no contour groups");
        }
        const std::size_t n = model.landmarks.points.size();
        const Eigen::Index k = model.dim();
        lm_mean_.resize(static_cast<Eigen::Index>(3 * n));
        lm_basis_.resize(static_cast<Eigen::Index>(3 * n), k);
        for (std::size_t i = 0; i < n; ++i)
        {
            const auto& s = model.landmarks.points[i];
            const auto& f = model.faces.at(static_cast<std::size_t>(s.face));
            lm_mean_.segment<3>(3 * static_cast<Eigen::Index>(i)).setZero();
            lm_basis_.middleRows<3>(3 * static_cast<Eigen::Index>(i)).setZero();
            for (int c = 0; c < 3; ++c)
            {
                lm_mean_.segment<3>(3 * static_cast<Eigen::Index>(i)) +=
                    s.barycentric[c] * model.mean.segment<3>(3 * f[c]);
                lm_basis_.middleRows<3>(3 * static_cast<Eigen::Index>(i)) +=
                    s.barycentric[c] * model.basis.middleRows<3>(3 * f[c]);
            }
        }
        core::TriMesh topology;
        topology.vertices = morphable::to_points(model.mean);
        topology.faces = model.faces;
        neighbors_ = core::vertex_neighbors(topology);
        if (config.weights.photo > 0.0)
        {
            if (!input_.image)
            {
                throw std::invalid_argument("fit: an image is required when the photometric weight is non-zero");
            }
            if (!texture_ || model.uv.empty())
            {
                throw std::invalid_argument("fit: photometric fitting needs a texture model and a uv layout");
            }
            mask_ = render::landmark_mask(input_.landmarks, input_.image->width, input_.image->height);
        }
    }

    Eigen::Index shape_dim() const { return model_.dim(); }
    Eigen::Index texture_dim() const { return texture_ ? texture_->dim() : 0; }
    Eigen::Index size() const { return camera_parameter_count + shape_dim() + texture_dim(); }
    const FitInput& input() const { return input_; }

    /// Model landmarks projected with the given parameters.
    std::vector<Vec2> project_landmarks(const Eigen::VectorXd& x) const
    {
        const auto cam = unpack_camera(x);
        const Eigen::VectorXd lm = landmark_vector(x);
        const Eigen::Matrix3d r = cam.rotation_matrix();
        std::vector<Vec2> out(static_cast<std::size_t>(lm.size() / 3));
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            out[i] = cam.scale * (r * lm.segment<3>(3 * static_cast<Eigen::Index>(i))).head<2>() + cam.translation;
        }
        return out;
    }

    /**
     * Evaluates the weighted terms. In stage 1 only the landmark and
     * regularization terms enter `value`; the returned trace always holds the
     * full objective in `total`. `grad` (if non-null) is the gradient of the
     * stage objective.
     */
    LossTrace evaluate(const Eigen::VectorXd& x, int stage, Eigen::VectorXd* grad, double* value) const
    {
        const loss::LossWeights& w = config_.weights;
        const auto cam = unpack_camera(x);
        const Eigen::VectorXd beta = x.segment(camera_parameter_count, shape_dim());
        const Eigen::VectorXd theta = x.tail(texture_dim());
        const Eigen::VectorXd lm = landmark_vector(x);
        const std::size_t n = static_cast<std::size_t>(lm.size() / 3);
        const Eigen::Matrix3d r = cam.rotation_matrix();
        std::vector<Vec3> rotated(n);
        std::vector<Vec2> pred(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            rotated[i] = r * lm.segment<3>(3 * static_cast<Eigen::Index>(i));
            pred[i] = cam.scale * rotated[i].head<2>() + cam.translation;
        }

        LossTrace t;
        t.stage = stage;
        std::vector<Vec2> g_lmk, g_contour;
        t.lmk = loss::landmark_loss(pred, input_.landmarks, grad ? &g_lmk : nullptr);
        t.contour = loss::contour_loss(pred, input_.landmarks, config_.contour_samples, grad ? &g_contour : nullptr);
        loss::CameraLossGradient g_cam;
        t.cam = loss::camera_loss(cam, &g_cam);
        Eigen::VectorXd g_beta_reg, g_theta_reg;
        t.reg = beta.cwiseAbs().mean() + (theta.size() ? theta.cwiseAbs().mean() : 0.0);
        g_beta_reg = beta.array().sign().matrix() / static_cast<double>(beta.size());
        g_theta_reg = theta.size() ? Eigen::VectorXd(theta.array().sign().matrix() / static_cast<double>(theta.size()))
                                   : Eigen::VectorXd();
        const Eigen::VectorXd flat = morphable::decode_shape_vector(model_, beta);
        const std::vector<Vec3> vertices = morphable::to_points(flat);
        std::vector<Vec3> g_smooth;
        t.smooth = loss::smooth_loss(vertices, neighbors_, grad ? &g_smooth : nullptr);
        if (w.photo > 0.0)
        {
            t.photo = photometric(x);
        }
        t.total = w.contour * t.contour + w.cam * t.cam + w.lmk * t.lmk + w.photo * t.photo + w.smooth * t.smooth +
                  w.reg * t.reg;
        const bool full = stage != 1;
        if (value)
        {
            *value = full ? t.total : w.lmk * t.lmk + w.reg * t.reg;
        }
        if (!grad)
        {
            return t;
        }

        grad->setZero(size());
        // d/d pred: landmark and contour terms.
        std::vector<Vec2> g_pred(n, Vec2::Zero());
        for (std::size_t i = 0; i < n; ++i)
        {
            g_pred[i] = w.lmk * g_lmk[i];
            if (full)
            {
                g_pred[i] += w.contour * g_contour[i];
            }
        }
        const auto dr = render::euler_rotation_derivatives(cam.rotation);
        Eigen::VectorXd g_lm = Eigen::VectorXd::Zero(lm.size());
        for (std::size_t i = 0; i < n; ++i)
        {
            const Vec3 p = lm.segment<3>(3 * static_cast<Eigen::Index>(i));
            (*grad)[0] += g_pred[i].dot(rotated[i].head<2>());
            for (int a = 0; a < 3; ++a)
            {
                (*grad)[1 + a] += cam.scale * g_pred[i].dot((dr[a] * p).head<2>());
            }
            (*grad).segment<2>(4) += g_pred[i];
            g_lm.segment<3>(3 * static_cast<Eigen::Index>(i)) = cam.scale * r.topRows<2>().transpose() * g_pred[i];
        }
        if (full)
        {
            (*grad)[0] += w.cam * g_cam.scale;
            (*grad)[2] += w.cam * g_cam.yaw;
        }
        Eigen::VectorXd g_beta = w.reg * g_beta_reg;
        if (full)
        {
            g_beta += model_.eigenvalues.cwiseProduct(lm_basis_.transpose() * g_lm);
            Eigen::VectorXd g_flat(flat.size());
            for (std::size_t v = 0; v < g_smooth.size(); ++v)
            {
                g_flat.segment<3>(3 * static_cast<Eigen::Index>(v)) = g_smooth[v];
            }
            g_beta += w.smooth * model_.eigenvalues.cwiseProduct(model_.basis.transpose() * g_flat);
        }
        grad->segment(camera_parameter_count, shape_dim()) = g_beta;
        if (texture_dim() > 0)
        {
            grad->tail(texture_dim()) = w.reg * g_theta_reg;
        }
        if (full && w.photo > 0.0)
        {
            const LossFunction photo = [this](const Eigen::VectorXd& p, Eigen::VectorXd*) { return photometric(p); };
            *grad += w.photo * finite_difference_gradient(photo, x, config_.fd_step);
        }
        if (stage == 1)
        {
            grad->tail(size() - camera_parameter_count).setZero();
        }
        return t;
    }

    /// Photometric loss of the rendered model against the masked input image.
    double photometric(const Eigen::VectorXd& x) const
    {
        const auto cam = unpack_camera(x);
        const Eigen::VectorXd beta = x.segment(camera_parameter_count, shape_dim());
        const Eigen::VectorXd theta = x.tail(texture_dim());
        const core::TriMesh mesh = morphable::decode_shape(model_, beta);
        const core::Image tex = morphable::decode_texture(*texture_, theta);
        const auto rendered = render::rasterize(mesh, cam, tex, input_.image->width, input_.image->height);
        return loss::photometric_loss(*input_.image, rendered, mask_);
    }

    /// Scale and translation that align the projected mean landmarks with the annotation.
    render::CameraParams initial_camera(const Vec3& rotation) const
    {
        render::CameraParams cam;
        cam.rotation = rotation;
        Eigen::VectorXd x = pack(cam, Eigen::VectorXd::Zero(shape_dim()), Eigen::VectorXd::Zero(texture_dim()));
        const auto proj = project_landmarks(x);
        const double d_proj = loss::bounding_box_diagonal(proj);
        const double d_gt = loss::bounding_box_diagonal(input_.landmarks.points);
        if (!(d_proj > 0.0) || !(d_gt > 0.0))
        {
            throw std::invalid_argument("fit: degenerate landmark configuration");
        }
        cam.scale = d_gt / d_proj;
        Vec2 c_proj = Vec2::Zero(), c_gt = Vec2::Zero();
        for (std::size_t i = 0; i < proj.size(); ++i)
        {
            c_proj += proj[i];
            c_gt += input_.landmarks.points[i];
        }
        c_proj /= static_cast<double>(proj.size());
        c_gt /= static_cast<double>(proj.size());
        cam.translation = c_gt - cam.scale * c_proj;
        return cam;
    }

private:
    Eigen::VectorXd landmark_vector(const Eigen::VectorXd& x) const
    {
        const Eigen::VectorXd beta = x.segment(camera_parameter_count, shape_dim());
        return lm_mean_ + lm_basis_ * model_.eigenvalues.cwiseProduct(beta);
    }

    const morphable::EarShapeModel& model_;
    const morphable::TextureModel* texture_;
    FitInput input_;
    FitConfig config_;
    Eigen::VectorXd lm_mean_;
    Eigen::MatrixXd lm_basis_;
    std::vector<std::vector<int>> neighbors_;
    core::Image mask_;
};

/**
 * Mean pairwise cosine similarity of the shape codes in a batch. Returns 0
 * with zero gradient while any code is exactly zero.
 */
inline double batch_similarity(const std::vector<Eigen::VectorXd>& betas, std::vector<Eigen::VectorXd>* grad)
{
    for (const auto& b : betas)
    {
        if (b.norm() == 0.0)
        {
            if (grad)
            {
                grad->assign(betas.size(), Eigen::VectorXd::Zero(b.size()));
            }
            return 0.0;
        }
    }
    return loss::similarity_loss(betas, grad);
}

namespace detail {

inline Eigen::VectorXd step_sizes(const FitConfig& c, Eigen::Index shape_dim, Eigen::Index texture_dim, int stage)
{
    Eigen::VectorXd lr(camera_parameter_count + shape_dim + texture_dim);
    const auto& r = c.learning_rates;
    lr << r.scale, r.rotation, r.rotation, r.rotation, r.translation, r.translation,
        Eigen::VectorXd::Constant(shape_dim, stage == 1 ? 0.0 : r.shape),
        Eigen::VectorXd::Constant(texture_dim, stage == 1 ? 0.0 : r.texture);
    return lr;
}

inline void check_finite(const LossTrace& t, const std::vector<LossTrace>& trace)
{
    if (!std::isfinite(t.total) || t.total > 1e12)
    {
        throw FitDivergence("fit diverged at iteration " + std::to_string(t.iteration) + " (stage " +
                                std::to_string(t.stage) + ", total loss " + std::to_string(t.total) + ")",
                            trace);
    }
}

} /* namespace detail */

/**
 * Fits a batch of images jointly. The samples are coupled only through the
 * similarity term, which is active when the batch holds two or more images.
 * Stage 1 moves the cameras only, against the landmark and regularization
 * terms; stage 2 moves everything against the full objective. Each sample
 * returns its best iterate by the batch objective.
 */
inline std::vector<FitResult> fit_batch(const std::vector<FitInput>& inputs, const morphable::EarShapeModel& model,
                                        const morphable::TextureModel* texture, const FitConfig& config)
{
    validate(config);
    if (inputs.empty())
    {
        throw std::invalid_argument("fit: empty batch");
    }
    const std::size_t bs = inputs.size();
    std::vector<FitProblem> problems;
    problems.reserve(bs);
    for (const auto& in : inputs)
    {
        problems.emplace_back(model, texture, in, config);
    }
    const Eigen::Index k = problems[0].shape_dim();
    const Eigen::Index tdim = problems[0].texture_dim();
    const Eigen::Index per = problems[0].size();
    const bool coupled = bs >= 2;
    const double w_sim = coupled ? config.weights.sim : 0.0;

    std::vector<Eigen::VectorXd> params(bs);
    for (std::size_t i = 0; i < bs; ++i)
    {
        params[i] = pack(problems[i].initial_camera(config.initial_rotation), Eigen::VectorXd::Zero(k),
                         Eigen::VectorXd::Zero(tdim));
    }
    std::vector<AdamState> states(bs, AdamState(per));

    const int stage1_iterations = static_cast<int>(std::floor(config.stage1_fraction * config.total_iterations));
    const int stage2_iterations = config.total_iterations - stage1_iterations;

    std::vector<std::vector<LossTrace>> traces(bs);
    std::vector<double> batch_totals;
    std::vector<Eigen::VectorXd> best = params;
    double best_total = std::numeric_limits<double>::infinity();
    int best_iteration = 0;

    core::Random jitter_root(config.seed);
    for (int it = 0; it < config.total_iterations; ++it)
    {
        const int stage = it < stage1_iterations ? 1 : 2;
        if (coupled && it == stage1_iterations && config.batch_jitter > 0.0)
        {
            for (std::size_t i = 0; i < bs; ++i)
            {
                core::Random rng = jitter_root.fork(i);
                for (Eigen::Index j = 0; j < k; ++j)
                {
                    params[i][camera_parameter_count + j] += rng.normal(0.0, config.batch_jitter);
                }
            }
        }
        std::vector<Eigen::VectorXd> grads(bs);
        std::vector<LossTrace> rows(bs);
        std::vector<std::string> errors(bs);
        const bool fd = config.gradient_mode == GradientMode::finite_difference;
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(bs); ++i)
        {
            try
            {
                double value = 0.0;
                rows[i] = problems[i].evaluate(params[i], stage, fd ? nullptr : &grads[i], &value);
                if (fd)
                {
                    const LossFunction f = [&, i](const Eigen::VectorXd& p, Eigen::VectorXd*) {
                        double v = 0.0;
                        problems[i].evaluate(p, stage, nullptr, &v);
                        return v;
                    };
                    grads[i] = finite_difference_gradient(f, params[i], config.fd_step);
                    if (stage == 1)
                    {
                        grads[i].tail(per - camera_parameter_count).setZero();
                    }
                }
            } catch (const std::exception& e)
            {
                errors[i] = e.what();
            }
        }
        for (std::size_t i = 0; i < bs; ++i)
        {
            if (!errors[i].empty())
            {
                throw FitDivergence("fit failed at iteration " + std::to_string(it) + ": " + errors[i], traces[i]);
            }
        }
        double sim = 0.0;
        std::vector<Eigen::VectorXd> g_sim;
        if (coupled)
        {
            std::vector<Eigen::VectorXd> betas(bs);
            for (std::size_t i = 0; i < bs; ++i)
            {
                betas[i] = params[i].segment(camera_parameter_count, k);
            }
            sim = batch_similarity(betas, &g_sim);
        }
        double batch_total = 0.0;
        for (std::size_t i = 0; i < bs; ++i)
        {
            rows[i].iteration = it;
            rows[i].sim = sim;
            rows[i].total += w_sim * sim;
            batch_total += rows[i].total - w_sim * sim;
            traces[i].push_back(rows[i]);
            detail::check_finite(rows[i], traces[i]);
        }
        batch_total += w_sim * sim;
        batch_totals.push_back(batch_total);
        if (batch_total < best_total)
        {
            best_total = batch_total;
            best = params;
            best_iteration = it;
        }

        const int stage_start = stage == 1 ? 0 : stage1_iterations;
        const int stage_length = stage == 1 ? stage1_iterations : stage2_iterations;
        const double progress = stage_length > 1 ? static_cast<double>(it - stage_start) / (stage_length - 1) : 0.0;
        const double decay = std::pow(config.final_lr_factor, progress);
        const Eigen::VectorXd lr = decay * detail::step_sizes(config, k, tdim, stage);
        for (std::size_t i = 0; i < bs; ++i)
        {
            if (coupled && stage == 2 && w_sim > 0.0)
            {
                grads[i].segment(camera_parameter_count, k) += w_sim * g_sim[i];
            }
            adam_step(params[i], grads[i], states[i], lr, config.adam);
        }
    }

    // The final parameters are a candidate too.
    {
        double batch_total = 0.0;
        std::vector<Eigen::VectorXd> betas(bs);
        for (std::size_t i = 0; i < bs; ++i)
        {
            batch_total += problems[i].evaluate(params[i], 2, nullptr, nullptr).total;
            betas[i] = params[i].segment(camera_parameter_count, k);
        }
        if (coupled)
        {
            batch_total += w_sim * batch_similarity(betas, nullptr);
        }
        if (std::isfinite(batch_total) && batch_total < best_total)
        {
            best_total = batch_total;
            best = params;
            best_iteration = config.total_iterations;
        }
    }

    bool converged = false;
    const auto w = static_cast<std::size_t>(config.convergence_window);
    if (batch_totals.size() > w && stage2_iterations > config.convergence_window)
    {
        const double last = batch_totals.back();
        const double earlier = batch_totals[batch_totals.size() - 1 - w];
        converged = std::abs(last - earlier) <= config.convergence_tolerance * std::max(std::abs(earlier), 1e-12);
    }

    std::vector<FitResult> results(bs);
    for (std::size_t i = 0; i < bs; ++i)
    {
        FitResult& r = results[i];
        r.camera = unpack_camera(best[i]);
        r.latent.shape = best[i].segment(camera_parameter_count, k);
        r.latent.texture = best[i].tail(tdim);
        r.loss_trace = std::move(traces[i]);
        r.converged = converged;
        r.best_iteration = best_iteration;
        r.best_loss = best_total;
    }
    return results;
}

/// Fits one image. The similarity term does not apply.
inline FitResult fit_image(const FitInput& input, const morphable::EarShapeModel& model,
                           const morphable::TextureModel* texture, const FitConfig& config)
{
    return fit_batch({input}, model, texture, config).front();
}

/// Mean distance in pixels between the fitted model landmarks and the annotation.
inline double reprojection_error(const FitResult& result, const morphable::EarShapeModel& model,
                                 const loss::LandmarkSet2D& landmarks)
{
    const auto mesh = morphable::decode_shape(model, result.latent.shape);
    const auto pts = render::project_orthographic(morphable::landmark_positions(model.landmarks, mesh), result.camera);
    if (pts.size() != landmarks.points.size())
    {
        throw std::invalid_argument("reprojection_error: landmark counts differ");
    }
    std::vector<double> d(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        d[i] = (pts[i] - landmarks.points[i]).norm();
    }
    return core::pairwise_mean(d);
}

inline nlohmann::json to_json(const loss::LossWeights& w)
{
    return {{"contour", w.contour}, {"sim", w.sim},       {"cam", w.cam}, {"lmk", w.lmk},
            {"photo", w.photo},     {"smooth", w.smooth}, {"reg", w.reg}};
}

inline loss::LossWeights weights_from_json(const nlohmann::json& j, loss::LossWeights w = {})
{
    w.contour = j.value("contour", w.contour);
    w.sim = j.value("sim", w.sim);
    w.cam = j.value("cam", w.cam);
    w.lmk = j.value("lmk", w.lmk);
    w.photo = j.value("photo", w.photo);
    w.smooth = j.value("smooth", w.smooth);
    w.reg = j.value("reg", w.reg);
    loss::validate(w);
    return w;
}

inline nlohmann::json to_json(const FitConfig& c)
{
    const auto& r = c.learning_rates;
    return {{"weights", to_json(c.weights)},
            {"stage1_fraction", c.stage1_fraction},
            {"total_iterations", c.total_iterations},
            {"learning_rates",
             {{"scale", r.scale}, {"rotation", r.rotation}, {"translation", r.translation}, {"shape", r.shape},
              {"texture", r.texture}}},
            {"final_lr_factor", c.final_lr_factor},
            {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
            {"gradient_mode", to_string(c.gradient_mode)},
            {"fd_step", c.fd_step},
            {"seed", c.seed},
            {"contour_samples", c.contour_samples},
            {"initial_rotation", {c.initial_rotation.x(), c.initial_rotation.y(), c.initial_rotation.z()}},
            {"convergence_tolerance", c.convergence_tolerance},
            {"convergence_window", c.convergence_window},
            {"batch_jitter", c.batch_jitter}};
}

/// Missing keys keep their defaults.
inline FitConfig fit_config_from_json(const nlohmann::json& j)
{
    FitConfig c;
    if (j.contains("weights"))
    {
        c.weights = weights_from_json(j.at("weights"));
    }
    c.stage1_fraction = j.value("stage1_fraction", c.stage1_fraction);
    c.total_iterations = j.value("total_iterations", c.total_iterations);
    if (j.contains("learning_rates"))
    {
        const auto& l = j.at("learning_rates");
        auto& r = c.learning_rates;
        r.scale = l.value("scale", r.scale);
        r.rotation = l.value("rotation", r.rotation);
        r.translation = l.value("translation", r.translation);
        r.shape = l.value("shape", r.shape);
        r.texture = l.value("texture", r.texture);
    }
    c.final_lr_factor = j.value("final_lr_factor", c.final_lr_factor);
    if (j.contains("adam"))
    {
        const auto& a = j.at("adam");
        c.adam.beta1 = a.value("beta1", c.adam.beta1);
        c.adam.beta2 = a.value("beta2", c.adam.beta2);
        c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    }
    if (j.contains("gradient_mode"))
    {
        c.gradient_mode = gradient_mode_from_string(j.at("gradient_mode").get<std::string>());
    }
    c.fd_step = j.value("fd_step", c.fd_step);
    c.seed = j.value("seed", c.seed);
    c.contour_samples = j.value("contour_samples", c.contour_samples);
    if (j.contains("initial_rotation"))
    {
        const auto v = j.at("initial_rotation").get<std::vector<double>>();
        if (v.size() != 3)
        {
            throw std::invalid_argument("fit config: initial_rotation needs 3 angles");
        }
        c.initial_rotation = Vec3(v[0], v[1], v[2]);
    }
    c.convergence_tolerance = j.value("convergence_tolerance", c.convergence_tolerance);
    c.convergence_window = j.value("convergence_window", c.convergence_window);
    c.batch_jitter = j.value("batch_jitter", c.batch_jitter);
    validate(c);
    return c;
}

inline nlohmann::json to_json(const FitResult& r)
{
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : r.loss_trace)
    {
        trace.push_back({{"iteration", t.iteration}, {"stage", t.stage},   {"contour", t.contour},
                         {"sim", t.sim},             {"cam", t.cam},       {"lmk", t.lmk},
                         {"photo", t.photo},         {"smooth", t.smooth}, {"reg", t.reg},
                         {"total", t.total}});
    }
    return {{"latent",
             {{"shape", std::vector<double>(r.latent.shape.data(), r.latent.shape.data() + r.latent.shape.size())},
              {"texture",
               std::vector<double>(r.latent.texture.data(), r.latent.texture.data() + r.latent.texture.size())}}},
            {"camera",
             {{"scale", r.camera.scale},
              {"rotation", {r.camera.rotation.x(), r.camera.rotation.y(), r.camera.rotation.z()}},
              {"translation", {r.camera.translation.x(), r.camera.translation.y()}}}},
            {"converged", r.converged},
            {"best_iteration", r.best_iteration},
            {"best_loss", r.best_loss},
            {"loss_trace", trace}};
}

} /* namespace fitting */
} /* namespace audioear */

#endif /* AUDIOEAR_FITTING_FIT_HPP */
