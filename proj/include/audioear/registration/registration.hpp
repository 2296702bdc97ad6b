/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/registration/registration.hpp
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

#ifndef AUDIOEAR_REGISTRATION_REGISTRATION_HPP
#define AUDIOEAR_REGISTRATION_REGISTRATION_HPP

#include "audioear/core/geometry.hpp"
#include "audioear/core/mesh.hpp"
#include "audioear/core/random.hpp"
#include "audioear/core/reduction.hpp"
#include "audioear/fitting/adam.hpp"
#include "audioear/morphable/model.hpp"
#include "audioear/render/camera.hpp"

#include "Eigen/Core"
#include "Eigen/Geometry"
#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace registration {

using core::Vec3;
using KeyPoints = std::array<int, 4>;

enum class Mode { rigid_scale, rigid_scale_shape };

inline std::string to_string(Mode m)
{
    return m == Mode::rigid_scale ? "rigid_scale" : "rigid_scale_shape";
}

inline Mode mode_from_string(const std::string& s)
{
    if (s == "rigid_scale") return Mode::rigid_scale;
    if (s == "rigid_scale_shape") return Mode::rigid_scale_shape;
    throw std::invalid_argument("unknown registration mode '" + s + "'");
}

struct RegistrationConfig
{
    Mode mode = Mode::rigid_scale;
    int stage_iterations = 166;
    double initial_lr = 0.45;       ///< mm of surface displacement per step
    double lr_decay_per_stage = 0.1;
    std::size_t scan_subsample = 1000;
    std::size_t surface_samples = 1000;
    std::optional<KeyPoints> mesh_key_points; ///< default: extremes of the template
    std::optional<KeyPoints> scan_key_points; ///< default: extremes of the scan along the mesh key axes
    std::uint64_t seed = 0;
    fitting::AdamOptions adam;
    double convergence_tolerance = 1e-3; ///< relative change of the stage-3 loss, floored at 1 mm
    int convergence_window = 20;
};

inline void validate(const RegistrationConfig& c)
{
    if (c.stage_iterations < 1)
    {
        throw std::invalid_argument("registration config: stage_iterations must be at least 1");
    }
    if (!(c.lr_decay_per_stage > 0.0 && c.lr_decay_per_stage <= 1.0))
    {
        throw std::invalid_argument("registration config: lr_decay_per_stage must lie in (0, 1]");
    }
    if (c.scan_subsample < 4 || c.surface_samples < 1)
    {
        throw std::invalid_argument("registration config: scan_subsample must be at least 4");
    }
    if (!(c.initial_lr > 0.0) || c.convergence_window < 1)
    {
        throw std::invalid_argument("registration config: invalid optimizer settings");
    }
}

/// x -> scale * R * x + translation.
struct Similarity
{
    double scale = 1.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
    Similarity inverse() const
    {
        Similarity inv;
        inv.scale = 1.0 / scale;
        inv.rotation = rotation.transpose();
        inv.translation = -inv.scale * (inv.rotation * translation);
        return inv;
    }
    /// (*this) after `first`.
    Similarity compose(const Similarity& first) const
    {
        Similarity out;
        out.scale = scale * first.scale;
        out.rotation = rotation * first.rotation;
        out.translation = apply(first.translation);
        return out;
    }
};

struct RegistrationResult
{
    double scale = 1.0;
    Vec3 rotation = Vec3::Zero(); ///< Euler angles, render convention
    Vec3 translation = Vec3::Zero(); ///< mm
    std::optional<Eigen::VectorXd> beta;
    std::array<std::vector<double>, 3> stage_losses; ///< mm^2 for stage 1, mm afterwards
    std::array<double, 3> stage_end_s2m{};           ///< mm, subsampled scan after each stage
    double final_s2m = 0.0;                          ///< mm, full scan
    bool converged = false;
    KeyPoints mesh_key_points{};
    KeyPoints scan_key_points{};

    Similarity transform() const { return {scale, render::euler_rotation(rotation), translation}; }
};

/// Thrown on a non-finite objective.
class RegistrationError : public std::runtime_error
{
public:
    RegistrationError(const std::string& what, int stage, int iteration)
        : std::runtime_error(what), stage_(stage), iteration_(iteration)
    {
    }
    int stage() const noexcept { return stage_; }
    int iteration() const noexcept { return iteration_; }

private:
    int stage_;
    int iteration_;
};

/**
 * Default template key points: superior (max y), inferior (min y), anterior
 * (max z) and posterior (min z) vertices. Ties go to the lower index.
 */
inline KeyPoints default_key_points(std::span<const Vec3> vertices)
{
    if (vertices.empty())
    {
        throw std::invalid_argument("default_key_points: empty vertex set");
    }
    KeyPoints k{0, 0, 0, 0};
    for (std::size_t i = 1; i < vertices.size(); ++i)
    {
        const int ii = static_cast<int>(i);
        if (vertices[i].y() > vertices[k[0]].y()) k[0] = ii;
        if (vertices[i].y() < vertices[k[1]].y()) k[1] = ii;
        if (vertices[i].z() > vertices[k[2]].z()) k[2] = ii;
        if (vertices[i].z() < vertices[k[3]].z()) k[3] = ii;
    }
    return k;
}

/**
 * Scan key points picked as the scan's extreme points along the directions
 * from the template centroid to its key points. Assumes the scan is roughly
 * in the template's canonical orientation.
 */
inline KeyPoints auto_scan_key_points(std::span<const Vec3> template_vertices, const KeyPoints& mesh_keys,
                                      std::span<const Vec3> scan)
{
    Vec3 cm = Vec3::Zero(), cs = Vec3::Zero();
    for (const Vec3& v : template_vertices) cm += v;
    for (const Vec3& q : scan) cs += q;
    cm /= static_cast<double>(template_vertices.size());
    cs /= static_cast<double>(scan.size());
    KeyPoints out{};
    for (int k = 0; k < 4; ++k)
    {
        const Vec3 axis = (template_vertices[mesh_keys[k]] - cm).normalized();
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < scan.size(); ++i)
        {
            const double d = (scan[i] - cs).dot(axis);
            if (d > best)
            {
                best = d;
                out[k] = static_cast<int>(i);
            }
        }
    }
    return out;
}

/// Indices of the scan points nearest to four key-point coordinates.
inline KeyPoints nearest_scan_key_points(const core::PointCloud& scan, const std::array<Vec3, 4>& targets)
{
    if (scan.points.empty())
    {
        throw std::invalid_argument("nearest_scan_key_points: empty scan");
    }
    KeyPoints out{};
    for (int k = 0; k < 4; ++k)
    {
        out[k] = core::knn<Vec3>(targets[k], scan.points, 1).front().index;
    }
    return out;
}

/// Least-squares similarity mapping `src` onto `dst` (closed form).
inline Similarity fit_similarity(std::span<const Vec3> src, std::span<const Vec3> dst)
{
    if (src.size() != dst.size() || src.size() < 3)
    {
        throw std::invalid_argument("fit_similarity: need at least 3 paired points");
    }
    Eigen::Matrix3Xd a(3, src.size()), b(3, dst.size());
    for (std::size_t i = 0; i < src.size(); ++i)
    {
        a.col(static_cast<Eigen::Index>(i)) = src[i];
        b.col(static_cast<Eigen::Index>(i)) = dst[i];
    }
    const Eigen::Matrix4d t = Eigen::umeyama(a, b, true);
    Similarity s;
    const Eigen::Matrix3d sr = t.topLeftCorner<3, 3>();
    s.scale = std::cbrt(sr.determinant());
    s.rotation = sr / s.scale;
    s.translation = t.topRightCorner<3, 1>();
    if (!(s.scale > 0.0) || !s.rotation.allFinite() || !s.translation.allFinite())
    {
        throw std::invalid_argument("fit_similarity: degenerate key points");
    }
    return s;
}

namespace detail {

/// Template geometry: base vertices plus an optional linear shape basis (columns pre-scaled by sigma).
struct Template
{
    std::vector<Vec3> base;
    std::vector<core::Face> faces;
    Eigen::MatrixXd basis; ///< 3V x k, empty in rigid mode
};

class Registrar
{
public:
    Registrar(Template tpl, const core::PointCloud& scan, const RegistrationConfig& config)
        : tpl_(std::move(tpl)), config_(config)
    {
        validate(config);
        core::validate(scan);
        if (scan.size() < 4)
        {
            throw std::invalid_argument("register: the scan needs at least 4 points");
        }
        if (tpl_.faces.empty())
        {
            throw std::invalid_argument("register: template mesh has no faces");
        }
        const int nv = static_cast<int>(tpl_.base.size());
        mesh_keys_ = config.mesh_key_points ? *config.mesh_key_points : default_key_points(tpl_.base);
        for (int k : mesh_keys_)
        {
            if (k < 0 || k >= nv)
            {
                throw std::invalid_argument("register: mesh key point index " + std::to_string(k) +
                                            " out of range [0, " + std::to_string(nv) + ")");
            }
        }
        scan_keys_ = config.scan_key_points ? *config.scan_key_points
                                            : auto_scan_key_points(tpl_.base, mesh_keys_, scan.points);
        for (int k : scan_keys_)
        {
            if (k < 0 || k >= static_cast<int>(scan.size()))
            {
                throw std::invalid_argument("register: scan key point index " + std::to_string(k) +
                                            " out of range [0, " + std::to_string(scan.size()) + ")");
            }
        }

        centroid_ = Vec3::Zero();
        for (const Vec3& v : tpl_.base) centroid_ += v;
        centroid_ /= static_cast<double>(nv);
        double r2 = 0.0;
        for (const Vec3& v : tpl_.base) r2 += (v - centroid_).squaredNorm();
        length_ = std::sqrt(r2 / nv);
        if (!(length_ > 0.0))
        {
            throw std::invalid_argument("register: degenerate template");
        }
        const Eigen::Index k = tpl_.basis.cols();
        mode_length_ = Eigen::VectorXd::Ones(k);
        for (Eigen::Index n = 0; n < k; ++n)
        {
            const double rms = tpl_.basis.col(n).norm() / std::sqrt(static_cast<double>(nv));
            mode_length_[n] = rms > 0.0 ? rms : 1.0;
        }

        // Key-point similarity; the optimization runs in the frame it defines.
        std::vector<Vec3> src, dst;
        for (int i = 0; i < 4; ++i)
        {
            src.push_back(tpl_.base[mesh_keys_[i]]);
            dst.push_back(scan.points[scan_keys_[i]]);
        }
        init_ = fit_similarity(src, dst);
        const Similarity to_local = init_.inverse();
        const std::size_t n_sub = std::min(config.scan_subsample, scan.size());
        const core::PointCloud sub = core::downsample_random(scan, n_sub, config.seed);
        for (const Vec3& q : sub.points) sub_.push_back(to_local.apply(q));
        for (int i = 0; i < 4; ++i) keys_local_[i] = to_local.apply(scan.points[scan_keys_[i]]);
    }

    Eigen::Index size() const { return 7 + tpl_.basis.cols(); }

    /// Current local-frame vertices for packed parameters.
    std::vector<Vec3> vertices(const Eigen::VectorXd& p) const
    {
        const double s = std::exp(p[0] / length_);
        const Eigen::Matrix3d r = render::euler_rotation(p.segment<3>(1) / length_);
        const Vec3 t = p.segment<3>(4);
        const Eigen::VectorXd disp = shape_displacement(p);
        std::vector<Vec3> out(tpl_.base.size());
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            Vec3 u = tpl_.base[i] - centroid_;
            if (disp.size())
            {
                u += disp.segment<3>(3 * static_cast<Eigen::Index>(i));
            }
            out[i] = s * (r * u) + centroid_ + t;
        }
        return out;
    }

    /// Stage loss in local units with its gradient wrt the packed parameters.
    double loss(int stage, const Eigen::VectorXd& p, Eigen::VectorXd* grad, core::Random* rng) const
    {
        const std::vector<Vec3> w = vertices(p);
        std::vector<Vec3> g(w.size(), Vec3::Zero());
        double value = 0.0;
        if (stage == 0)
        {
            std::array<double, 4> d2{};
            for (int i = 0; i < 4; ++i)
            {
                const Vec3 diff = w[mesh_keys_[i]] - keys_local_[i];
                d2[i] = diff.squaredNorm();
                g[mesh_keys_[i]] += 0.5 * diff;
            }
            value = core::pairwise_mean(d2);
        } else if (stage == 1)
        {
            core::TriMesh mesh{w, tpl_.faces, {}};
            const auto samples = core::sample_surface(mesh, config_.surface_samples, *rng);
            std::vector<Vec3> x(samples.size());
            for (std::size_t j = 0; j < samples.size(); ++j) x[j] = core::surface_point(mesh, samples[j]);
            const auto xs = core::nearest_neighbors<Vec3>(x, sub_);
            const auto sx = core::nearest_neighbors<Vec3>(sub_, x);
            std::vector<double> a(xs.size()), b(sx.size());
            std::vector<Vec3> gx(x.size(), Vec3::Zero());
            const double wa = 0.5 / static_cast<double>(x.size());
            const double wb = 0.5 / static_cast<double>(sub_.size());
            for (std::size_t j = 0; j < x.size(); ++j)
            {
                a[j] = xs[j].distance;
                if (a[j] > 0.0) gx[j] += wa * (x[j] - sub_[xs[j].index]) / a[j];
            }
            for (std::size_t q = 0; q < sub_.size(); ++q)
            {
                b[q] = sx[q].distance;
                if (b[q] > 0.0) gx[sx[q].index] += wb * (x[sx[q].index] - sub_[q]) / b[q];
            }
            value = 0.5 * (core::pairwise_mean(a) + core::pairwise_mean(b));
            for (std::size_t j = 0; j < x.size(); ++j)
            {
                const auto& f = tpl_.faces[samples[j].face];
                for (int c = 0; c < 3; ++c) g[f[c]] += samples[j].barycentric[c] * gx[j];
            }
        } else
        {
            const core::FaceTree tree(core::TriMesh{w, tpl_.faces, {}});
            std::vector<core::ClosestPoint> cp(sub_.size());
#pragma omp parallel for schedule(static)
            for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(sub_.size()); ++q)
            {
                cp[q] = tree.closest(sub_[q]);
            }
            std::vector<double> d(sub_.size());
            const double inv_n = 1.0 / static_cast<double>(sub_.size());
            for (std::size_t q = 0; q < sub_.size(); ++q)
            {
                d[q] = cp[q].distance;
                if (d[q] > 0.0)
                {
                    const Vec3 u = inv_n * (cp[q].point - sub_[q]) / d[q];
                    const auto& f = tpl_.faces[cp[q].face];
                    for (int c = 0; c < 3; ++c) g[f[c]] += cp[q].barycentric[c] * u;
                }
            }
            value = core::pairwise_mean(d);
        }
        if (grad)
        {
            *grad = chain(p, g);
            if (stage == 0 || tpl_.basis.cols() == 0)
            {
                grad->tail(tpl_.basis.cols()).setZero();
            }
        }
        return value;
    }

    /// Local parameters composed with the key-point frame.
    Similarity world_transform(const Eigen::VectorXd& p) const
    {
        const double s = std::exp(p[0] / length_);
        const Eigen::Matrix3d r = render::euler_rotation(p.segment<3>(1) / length_);
        Similarity local;
        local.scale = s;
        local.rotation = r;
        local.translation = centroid_ + p.segment<3>(4) - s * (r * centroid_);
        return init_.compose(local);
    }

    Eigen::VectorXd beta(const Eigen::VectorXd& p) const
    {
        return p.tail(tpl_.basis.cols()).cwiseQuotient(mode_length_);
    }

    /// Displacement field of the shape parameters in world-scaled template units.
    Eigen::VectorXd shape_displacement(const Eigen::VectorXd& p) const
    {
        if (tpl_.basis.cols() == 0)
        {
            return {};
        }
        return tpl_.basis * beta(p);
    }

    double frame_scale() const { return init_.scale; }
    const KeyPoints& mesh_keys() const { return mesh_keys_; }
    const KeyPoints& scan_keys() const { return scan_keys_; }

private:
    Eigen::VectorXd chain(const Eigen::VectorXd& p, const std::vector<Vec3>& g) const
    {
        const double s = std::exp(p[0] / length_);
        const Vec3 omega = p.segment<3>(1) / length_;
        const Eigen::Matrix3d r = render::euler_rotation(omega);
        const auto dr = render::euler_rotation_derivatives(omega);
        const Eigen::VectorXd disp = shape_displacement(p);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
        Eigen::VectorXd g_u(3 * static_cast<Eigen::Index>(g.size()));
        for (std::size_t i = 0; i < g.size(); ++i)
        {
            Vec3 u = tpl_.base[i] - centroid_;
            if (disp.size())
            {
                u += disp.segment<3>(3 * static_cast<Eigen::Index>(i));
            }
            out[0] += g[i].dot(r * u) * s / length_;
            for (int a = 0; a < 3; ++a)
            {
                out[1 + a] += s * g[i].dot(dr[a] * u) / length_;
            }
            out.segment<3>(4) += g[i];
            g_u.segment<3>(3 * static_cast<Eigen::Index>(i)) = s * (r.transpose() * g[i]);
        }
        if (tpl_.basis.cols() > 0)
        {
            out.tail(tpl_.basis.cols()) = (tpl_.basis.transpose() * g_u).cwiseQuotient(mode_length_);
        }
        return out;
    }

    Template tpl_;
    RegistrationConfig config_;
    KeyPoints mesh_keys_{};
    KeyPoints scan_keys_{};
    Vec3 centroid_ = Vec3::Zero();
    double length_ = 1.0;
    Eigen::VectorXd mode_length_;
    Similarity init_;
    std::vector<Vec3> sub_;
    std::array<Vec3, 4> keys_local_{};
};

inline RegistrationResult run(Template tpl, const core::PointCloud& scan, const RegistrationConfig& config)
{
    const bool shape = tpl.basis.cols() > 0;
    core::TriMesh world{tpl.base, tpl.faces, {}};
    const Registrar reg(std::move(tpl), scan, config);
    RegistrationResult result;
    result.mesh_key_points = reg.mesh_keys();
    result.scan_key_points = reg.scan_keys();

    Eigen::VectorXd p = Eigen::VectorXd::Zero(reg.size());
    const core::Random root(config.seed);
    const double fs = reg.frame_scale();
    for (int stage = 0; stage < 3; ++stage)
    {
        const double lr = config.initial_lr * std::pow(config.lr_decay_per_stage, stage);
        const double unit = stage == 0 ? fs * fs : fs;
        core::Random rng = root.fork(static_cast<std::uint64_t>(stage));
        fitting::AdamState state(reg.size());
        const Eigen::VectorXd input = p;
        Eigen::VectorXd best = p;
        double best_value = std::numeric_limits<double>::infinity();
        auto& trace = result.stage_losses[static_cast<std::size_t>(stage)];
        for (int it = 0; it <= config.stage_iterations; ++it)
        {
            const bool last = it == config.stage_iterations;
            Eigen::VectorXd g;
            const double v = reg.loss(stage, p, last ? nullptr : &g, &rng);
            if (!std::isfinite(v) || (!last && !g.allFinite()))
            {
                throw RegistrationError("registration diverged in stage " + std::to_string(stage + 1) +
                                            " at iteration " + std::to_string(it),
                                        stage + 1, it);
            }
            if (v < best_value)
            {
                best_value = v;
                best = p;
            }
            if (!last)
            {
                trace.push_back(unit * v);
                fitting::adam_step(p, g, state, lr, config.adam);
            }
        }
        // A stage never hands on a worse surface distance than it received.
        if (stage > 0 && reg.loss(2, best, nullptr, nullptr) > reg.loss(2, input, nullptr, nullptr))
        {
            best = input;
        }
        p = best;
        result.stage_end_s2m[static_cast<std::size_t>(stage)] = fs * reg.loss(2, p, nullptr, nullptr);
    }

    const Similarity t = reg.world_transform(p);
    result.scale = t.scale;
    result.rotation = render::euler_angles(t.rotation);
    result.translation = t.translation;
    const Eigen::VectorXd disp = reg.shape_displacement(p);
    if (shape)
    {
        result.beta = reg.beta(p);
    }
    for (std::size_t i = 0; i < world.vertices.size(); ++i)
    {
        Vec3 v = world.vertices[i];
        if (disp.size())
        {
            v += disp.segment<3>(3 * static_cast<Eigen::Index>(i));
        }
        world.vertices[i] = t.apply(v);
    }
    result.final_s2m = core::scan_to_mesh(scan, world);

    const auto& last = result.stage_losses[2];
    const auto w = static_cast<std::size_t>(config.convergence_window);
    if (last.size() > w)
    {
        const double a = last[last.size() - 1 - w], b = last.back();
        result.converged = std::abs(a - b) <= config.convergence_tolerance * std::max(std::abs(a), 1.0);
    }
    return result;
}

inline Template model_template(const morphable::EarShapeModel& model, bool with_shape)
{
    Template tpl;
    tpl.base = morphable::to_points(model.mean);
    tpl.faces = model.faces;
    if (with_shape)
    {
        tpl.basis = model.basis * model.eigenvalues.asDiagonal();
    }
    return tpl;
}

} /* namespace detail */


/// Registers a fixed mesh to a scan; only rigid_scale mode applies.
inline RegistrationResult register_mesh(const core::TriMesh& mesh, const core::PointCloud& scan,
                                        const RegistrationConfig& config)
{
    if (config.mode != Mode::rigid_scale)
    {
        throw std::invalid_argument("register: rigid_scale_shape mode needs a shape model, not a mesh");
    }
    core::validate(mesh);
    return detail::run(detail::Template{mesh.vertices, mesh.faces, {}}, scan, config);
}

/**
 * Registers the shape model to a scan. In rigid_scale mode the mean shape is
 * moved rigidly; in rigid_scale_shape mode the shape code is optimized too,
 * from the second stage on.
 */
inline RegistrationResult register_model(const morphable::EarShapeModel& model, const core::PointCloud& scan,
                                         const RegistrationConfig& config)
{
    morphable::validate(model);
    return detail::run(detail::model_template(model, config.mode == Mode::rigid_scale_shape), scan, config);
}

/// The template mesh placed by a registration result.
inline core::TriMesh registered_mesh(const RegistrationResult& r, core::TriMesh mesh)
{
    const Similarity t = r.transform();
    for (Vec3& v : mesh.vertices)
    {
        v = t.apply(v);
    }
    return mesh;
}

inline core::TriMesh registered_mesh(const RegistrationResult& r, const morphable::EarShapeModel& model)
{
    const Eigen::VectorXd beta = r.beta ? *r.beta : Eigen::VectorXd::Zero(model.dim());
    return registered_mesh(r, morphable::decode_shape(model, beta));
}


enum class Laterality { right, left };

inline std::string to_string(Laterality l)
{
    return l == Laterality::left ? "left" : "right";
}

inline Laterality laterality_from_string(const std::string& s)
{
    if (s == "right" || s == "R") return Laterality::right;
    if (s == "left" || s == "L") return Laterality::left;
    throw std::invalid_argument("unknown laterality '" + s + "'");
}

struct ScanSample
{
    std::string id;
    core::PointCloud scan;
    Laterality laterality = Laterality::right;
    std::optional<KeyPoints> scan_key_points;
};

struct SampleReport
{
    std::string id;
    Laterality laterality = Laterality::right;
    double s2m = 0.0; ///< mm
    bool converged = false;
};

struct DatasetReport
{
    std::vector<SampleReport> samples;
    double mean_s2m = 0.0;   ///< mm
    double median_s2m = 0.0; ///< mm
};

/**
 * Registers each prediction to its scan and reports S2M. Left scans are
 * mirrored through the sagittal plane first. Samples run concurrently; each
 * uses the config seed, so results do not depend on the worker count.
 */
inline DatasetReport evaluate_dataset(const std::vector<core::TriMesh>& predictions,
                                      const std::vector<ScanSample>& scans, const RegistrationConfig& config)
{
    if (predictions.size() != scans.size())
    {
        throw std::invalid_argument("evaluate_dataset: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(scans.size()) + " scans");
    }
    validate(config);
    DatasetReport report;
    report.samples.resize(scans.size());
    std::vector<std::string> errors(scans.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(scans.size()); ++i)
    {
        const ScanSample& s = scans[i];
        try
        {
            RegistrationConfig c = config;
            if (s.scan_key_points)
            {
                c.scan_key_points = s.scan_key_points;
            }
            const core::PointCloud scan = s.laterality == Laterality::left ? core::reflect_sagittal(s.scan) : s.scan;
            const RegistrationResult r = register_mesh(predictions[i], scan, c);
            report.samples[i] = {s.id, s.laterality, r.final_s2m, r.converged};
        } catch (const std::exception& e)
        {
            errors[i] = s.id + ": " + e.what();
        }
    }
    for (const auto& e : errors)
    {
        if (!e.empty())
        {
            throw std::runtime_error("evaluate_dataset: " + e);
        }
    }
    if (!report.samples.empty())
    {
        std::vector<double> d;
        for (const auto& r : report.samples) d.push_back(r.s2m);
        report.mean_s2m = core::pairwise_mean(d);
        std::sort(d.begin(), d.end());
        const std::size_t n = d.size();
        report.median_s2m = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    }
    return report;
}

inline nlohmann::json to_json(const DatasetReport& r)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : r.samples)
    {
        rows.push_back({{"id", s.id}, {"laterality", to_string(s.laterality)}, {"s2m_mm", s.s2m},
                        {"converged", s.converged}});
    }
    return {{"samples", rows}, {"mean_s2m_mm", r.mean_s2m}, {"median_s2m_mm", r.median_s2m}};
}

/// CSV with header `sample_id,laterality,s2m_mm,converged`.
inline std::string to_csv(const DatasetReport& r)
{
    std::ostringstream out;
    out.precision(17);
    out << "sample_id,laterality,s2m_mm,converged\n";
    for (const auto& s : r.samples)
    {
        out << s.id << ',' << to_string(s.laterality) << ',' << s.s2m << ',' << (s.converged ? 1 : 0) << '\n';
    }
    return out.str();
}

inline nlohmann::json to_json(const RegistrationConfig& c)
{
    nlohmann::json j = {{"mode", to_string(c.mode)},
                        {"stage_iterations", c.stage_iterations},
                        {"initial_lr", c.initial_lr},
                        {"lr_decay_per_stage", c.lr_decay_per_stage},
                        {"scan_subsample", c.scan_subsample},
                        {"surface_samples", c.surface_samples},
                        {"seed", c.seed},
                        {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
                        {"convergence_tolerance", c.convergence_tolerance},
                        {"convergence_window", c.convergence_window}};
    if (c.mesh_key_points) j["mesh_key_points"] = *c.mesh_key_points;
    if (c.scan_key_points) j["scan_key_points"] = *c.scan_key_points;
    return j;
}

/// Missing keys keep their defaults.
inline RegistrationConfig registration_config_from_json(const nlohmann::json& j)
{
    RegistrationConfig c;
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    c.stage_iterations = j.value("stage_iterations", c.stage_iterations);
    c.initial_lr = j.value("initial_lr", c.initial_lr);
    c.lr_decay_per_stage = j.value("lr_decay_per_stage", c.lr_decay_per_stage);
    c.scan_subsample = j.value("scan_subsample", c.scan_subsample);
    c.surface_samples = j.value("surface_samples", c.surface_samples);
    c.seed = j.value("seed", c.seed);
    if (j.contains("adam"))
    {
        const auto& a = j.at("adam");
        c.adam.beta1 = a.value("beta1", c.adam.beta1);
        c.adam.beta2 = a.value("beta2", c.adam.beta2);
        c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    }
    c.convergence_tolerance = j.value("convergence_tolerance", c.convergence_tolerance);
    c.convergence_window = j.value("convergence_window", c.convergence_window);
    if (j.contains("mesh_key_points")) c.mesh_key_points = j.at("mesh_key_points").get<KeyPoints>();
    if (j.contains("scan_key_points")) c.scan_key_points = j.at("scan_key_points").get<KeyPoints>();
    validate(c);
    return c;
}

inline nlohmann::json to_json(const RegistrationResult& r)
{
    nlohmann::json j = {{"scale", r.scale},
                        {"rotation", {r.rotation.x(), r.rotation.y(), r.rotation.z()}},
                        {"translation_mm", {r.translation.x(), r.translation.y(), r.translation.z()}},
                        {"stage_end_s2m_mm", r.stage_end_s2m},
                        {"final_s2m_mm", r.final_s2m},
                        {"converged", r.converged},
                        {"mesh_key_points", r.mesh_key_points},
                        {"scan_key_points", r.scan_key_points},
                        {"stage_losses", {r.stage_losses[0], r.stage_losses[1], r.stage_losses[2]}}};
    if (r.beta) j["beta"] = std::vector<double>(r.beta->data(), r.beta->data() + r.beta->size());
    return j;
}

} /* namespace registration */
} /* namespace audioear */

#endif /* AUDIOEAR_REGISTRATION_REGISTRATION_HPP */
