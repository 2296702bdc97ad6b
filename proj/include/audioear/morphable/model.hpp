/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/morphable/model.hpp
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

#ifndef AUDIOEAR_MORPHABLE_MODEL_HPP
#define AUDIOEAR_MORPHABLE_MODEL_HPP

#include "audioear/core/geometry.hpp"
#include "audioear/core/image.hpp"
#include "audioear/core/mesh.hpp"
#include "audioear/core/random.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace morphable {

using core::Face;
using core::TriMesh;
using core::Vec2;
using core::Vec3;

/// Reference dimensions of the full-size ear shape model.
inline constexpr int reference_num_vertices = 2800;
inline constexpr int reference_shape_dim = 236;
inline constexpr int reference_texture_dim = 50;
inline constexpr int num_landmarks = 55;
inline constexpr int num_contours = 4;

/**
 * Where the annotated image landmarks live on the model surface: one
 * (face, barycentric) point per landmark, plus the ordered contour groups
 * used by the contour loss.
 */
struct LandmarkEmbedding
{
    std::vector<core::SurfaceSample> points;
    std::vector<std::vector<int>> groups;

    bool empty() const noexcept { return points.empty(); }
};

/**
 * Linear PCA shape model. A latent code beta decodes to
 *
 *     vertices = mean + basis * (eigenvalues .* beta)
 *
 * reshaped to N x 3 (x, y, z interleaved per vertex). All decoded meshes share
 * `faces` and `uv`.
 */
struct EarShapeModel
{
    Eigen::VectorXd mean;        ///< 3N
    Eigen::MatrixXd basis;       ///< 3N x K, one eigenvector per column
    Eigen::VectorXd eigenvalues; ///< K, strictly positive
    std::vector<Face> faces;
    std::vector<Vec2> uv; ///< Optional, N entries.
    LandmarkEmbedding landmarks;

    int num_vertices() const noexcept { return static_cast<int>(mean.size() / 3); }
    int dim() const noexcept { return static_cast<int>(eigenvalues.size()); }
};

/// Throws std::invalid_argument if the model's arrays are inconsistent.
inline void validate(const EarShapeModel& model)
{
    if (model.mean.size() == 0 || model.mean.size() % 3 != 0)
    {
        throw std::invalid_argument("shape model: mean size must be a positive multiple of 3");
    }
    if (model.basis.rows() != model.mean.size())
    {
        throw std::invalid_argument("shape model: basis has " + std::to_string(model.basis.rows()) +
                                    " rows, expected " + std::to_string(model.mean.size()));
    }
    if (model.basis.cols() != model.eigenvalues.size())
    {
        throw std::invalid_argument("shape model: eigenvector count " + std::to_string(model.basis.cols()) +
                                    " differs from eigenvalue count " + std::to_string(model.eigenvalues.size()));
    }
    if ((model.eigenvalues.array() <= 0.0).any())
    {
        throw std::invalid_argument("shape model: eigenvalues must be positive");
    }
    if (!model.uv.empty() && static_cast<int>(model.uv.size()) != model.num_vertices())
    {
        throw std::invalid_argument("shape model: uv count does not match vertex count");
    }
    const int n = model.num_vertices();
    for (const Face& f : model.faces)
    {
        for (int i : f)
        {
            if (i < 0 || i >= n)
            {
                throw std::invalid_argument("shape model: face index out of range");
            }
        }
    }
    for (const auto& s : model.landmarks.points)
    {
        if (s.face < 0 || s.face >= static_cast<int>(model.faces.size()))
        {
            throw std::invalid_argument("shape model: landmark face index out of range");
        }
    }
}

/// Vertex offsets basis * (eigenvalues .* beta) added to the mean, as a flat 3N vector.
inline Eigen::VectorXd decode_shape_vector(const EarShapeModel& model, const Eigen::VectorXd& beta)
{
    if (beta.size() != model.dim())
    {
        throw std::invalid_argument("decode_shape: latent has " + std::to_string(beta.size()) +
                                    " entries, model expects " + std::to_string(model.dim()));
    }
    return model.mean + model.basis * model.eigenvalues.cwiseProduct(beta);
}

inline std::vector<Vec3> to_points(const Eigen::VectorXd& flat)
{
    std::vector<Vec3> pts(static_cast<std::size_t>(flat.size() / 3));
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        pts[i] = flat.segment<3>(3 * static_cast<Eigen::Index>(i));
    }
    return pts;
}

/// M(beta): the decoded ear mesh, sharing the model's topology and uv.
inline TriMesh decode_shape(const EarShapeModel& model, const Eigen::VectorXd& beta)
{
    TriMesh mesh;
    mesh.vertices = to_points(decode_shape_vector(model, beta));
    mesh.faces = model.faces;
    mesh.uv = model.uv;
    return mesh;
}

inline TriMesh mean_mesh(const EarShapeModel& model)
{
    return decode_shape(model, Eigen::VectorXd::Zero(model.dim()));
}

/// 3D positions of the model landmarks on a decoded mesh.
inline std::vector<Vec3> landmark_positions(const LandmarkEmbedding& embedding, const TriMesh& mesh)
{
    std::vector<Vec3> out;
    out.reserve(embedding.points.size());
    for (const auto& s : embedding.points)
    {
        out.push_back(core::surface_point(mesh, s));
    }
    return out;
}

/**
 * Linear texture model over h x w RGB maps: mean + sum_i theta_i * basis_i,
 * clamped to [0, 1]. Maps are stored flattened in Image layout.
 */
struct TextureModel
{
    int width = 0;
    int height = 0;
    Eigen::VectorXd mean;  ///< h*w*3
    Eigen::MatrixXd basis; ///< h*w*3 x |theta|

    int dim() const noexcept { return static_cast<int>(basis.cols()); }
};

inline void validate(const TextureModel& model)
{
    const auto expected = static_cast<Eigen::Index>(model.width) * model.height * 3;
    if (model.width <= 0 || model.height <= 0 || model.mean.size() != expected || model.basis.rows() != expected)
    {
        throw std::invalid_argument("texture model: inconsistent map dimensions");
    }
}

inline core::Image decode_texture(const TextureModel& model, const Eigen::VectorXd& theta)
{
    if (theta.size() != model.dim())
    {
        throw std::invalid_argument("decode_texture: latent has " + std::to_string(theta.size()) +
                                    " entries, model expects " + std::to_string(model.dim()));
    }
    const Eigen::VectorXd flat = (model.mean + model.basis * theta).cwiseMax(0.0).cwiseMin(1.0);
    core::Image map(model.width, model.height, 3);
    for (Eigen::Index i = 0; i < flat.size(); ++i)
    {
        map.data[static_cast<std::size_t>(i)] = static_cast<float>(flat[i]);
    }
    return map;
}

/**
 * Transfers per-vertex uv from a donor mesh to target vertices. Each target
 * takes the inverse-distance weighted mean of the uv of its k nearest donor
 * vertices, w_i = (1/D_i) / sum_j (1/D_j); a donor closer than 1e-9 mm is
 * copied exactly. The two geometries must already be aligned.
 */
inline std::vector<Vec2> transfer_uv(std::span<const Vec3> target_vertices, const TriMesh& donor, std::size_t k = 3)
{
    if (!donor.has_uv())
    {
        throw std::invalid_argument("transfer_uv: donor mesh has no uv coordinates");
    }
    if (k == 0)
    {
        throw std::invalid_argument("transfer_uv: k must be positive");
    }
    const std::span<const Vec3> donor_pts(donor.vertices);
    std::vector<Vec2> out(target_vertices.size());
    for (std::size_t i = 0; i < target_vertices.size(); ++i)
    {
        const auto nn = core::knn<Vec3>(target_vertices[i], donor_pts, k);
        if (nn.front().distance < 1e-9)
        {
            out[i] = donor.uv[nn.front().index];
            continue;
        }
        double wsum = 0.0;
        Vec2 acc = Vec2::Zero();
        for (const auto& n : nn)
        {
            const double w = 1.0 / n.distance;
            acc += w * donor.uv[n.index];
            wsum += w;
        }
        out[i] = acc / wsum;
    }
    return out;
}

struct LatentCode
{
    Eigen::VectorXd shape;   ///< beta
    Eigen::VectorXd texture; ///< theta
};

/**
 * Draws i.i.d. zero-mean Gaussian latent codes. Code i uses its own stream
 * forked from the seed, so prefixes of the list do not depend on `count`.
 */
inline std::vector<LatentCode> sample_latents(std::uint64_t seed, std::size_t count, double shape_sigma,
                                              double texture_sigma, int shape_dim = reference_shape_dim,
                                              int texture_dim = reference_texture_dim)
{
    if (!(shape_sigma > 0.0) || !(texture_sigma > 0.0))
    {
        throw std::invalid_argument("sample_latents: sigmas must be positive");
    }
    const core::Random root(seed);
    std::vector<LatentCode> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        core::Random rng = root.fork(i);
        LatentCode code{Eigen::VectorXd(shape_dim), Eigen::VectorXd(texture_dim)};
        for (int j = 0; j < shape_dim; ++j)
        {
            code.shape[j] = rng.normal(0.0, shape_sigma);
        }
        for (int j = 0; j < texture_dim; ++j)
        {
            code.texture[j] = rng.normal(0.0, texture_sigma);
        }
        out.push_back(std::move(code));
    }
    return out;
}

} /* namespace morphable */
} /* namespace audioear */

#endif /* AUDIOEAR_MORPHABLE_MODEL_HPP */
