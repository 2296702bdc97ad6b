/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/pipeline/synthetic.hpp
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

#ifndef AUDIOEAR_PIPELINE_SYNTHETIC_HPP
#define AUDIOEAR_PIPELINE_SYNTHETIC_HPP

#include "audioear/core/image.hpp"
#include "audioear/core/random.hpp"
#include "audioear/loss/landmarks.hpp"
#include "audioear/morphable/model.hpp"
#include "audioear/render/camera.hpp"
#include "audioear/render/rasterizer.hpp"

#include "Eigen/Core"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace audioear {
namespace pipeline {

/// Model landmarks of shape `beta` projected with `camera`, carrying the model's contour groups.
inline loss::LandmarkSet2D project_model_landmarks(const morphable::EarShapeModel& model, const Eigen::VectorXd& beta,
                                                   const render::CameraParams& camera)
{
    const auto mesh = morphable::decode_shape(model, beta);
    loss::LandmarkSet2D out;
    out.points = render::project_orthographic(morphable::landmark_positions(model.landmarks, mesh), camera);
    out.groups = model.landmarks.groups;
    return out;
}

/// Ranges for random synthetic viewpoints. Angles in radians.
struct ViewSampling
{
    double roll_sigma = 0.08;  ///< spread of r_x around pi and of r_z around 0
    double yaw_min = -1.2;
    double yaw_max = -0.8;
    double fill = 0.28;        ///< landmark bounding-box diagonal as a fraction of the image diagonal
    double jitter = 0.05;      ///< centre offset as a fraction of the image size
};

/**
 * Draws an upright camera that frames the mean shape's landmarks inside a
 * width x height image.
 */
inline render::CameraParams sample_camera(core::Random& rng, const morphable::EarShapeModel& model, int width,
                                          int height, const ViewSampling& view = {})
{
    if (width < 1 || height < 1)
    {
        throw std::invalid_argument("sample_camera: image size must be positive");
    }
    render::CameraParams cam;
    const double rx = std::numbers::pi + rng.normal(0.0, view.roll_sigma);
    const double ry = rng.uniform(view.yaw_min, view.yaw_max);
    const double rz = rng.normal(0.0, view.roll_sigma);
    cam.rotation = core::Vec3(rx, ry, rz);
    cam.scale = 1.0;
    cam.translation = core::Vec2::Zero();
    const auto unit = project_model_landmarks(model, Eigen::VectorXd::Zero(model.dim()), cam).points;
    const double diag = loss::bounding_box_diagonal(unit);
    if (!(diag > 0.0))
    {
        throw std::invalid_argument("sample_camera: degenerate model landmarks");
    }
    cam.scale = view.fill * std::hypot(width, height) / diag;
    core::Vec2 centroid = core::Vec2::Zero();
    for (const auto& p : unit)
    {
        centroid += p;
    }
    centroid /= static_cast<double>(unit.size());
    const core::Vec2 target(0.5 * width + view.jitter * width * rng.uniform(-1.0, 1.0),
                            0.5 * height + view.jitter * height * rng.uniform(-1.0, 1.0));
    cam.translation = target - cam.scale * centroid;
    return cam;
}

struct SyntheticSample
{
    morphable::LatentCode latent;
    render::CameraParams camera;
    core::Image image; ///< RGB in [0, 1]
    core::Image depth; ///< rotated-frame z, +inf off the ear
    loss::LandmarkSet2D landmarks;
};

/// Renders one sample from a latent code and a camera.
inline SyntheticSample render_sample(const morphable::EarShapeModel& shape_model,
                                     const morphable::TextureModel& texture_model, const morphable::LatentCode& latent,
                                     const render::CameraParams& camera, int width, int height)
{
    SyntheticSample s;
    s.latent = latent;
    s.camera = camera;
    const auto mesh = morphable::decode_shape(shape_model, latent.shape);
    const auto tex = morphable::decode_texture(texture_model, latent.texture);
    auto rendered = render::rasterize(mesh, camera, tex, width, height);
    s.image = std::move(rendered.rgb);
    s.depth = std::move(rendered.depth);
    s.landmarks = project_model_landmarks(shape_model, latent.shape, camera);
    return s;
}

} /* namespace pipeline */
} /* namespace audioear */

#endif /* AUDIOEAR_PIPELINE_SYNTHETIC_HPP */
