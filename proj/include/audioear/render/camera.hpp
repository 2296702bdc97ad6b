/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/render/camera.hpp
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

#ifndef AUDIOEAR_RENDER_CAMERA_HPP
#define AUDIOEAR_RENDER_CAMERA_HPP

#include "audioear/core/mesh.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace audioear {
namespace render {

using core::Vec2;
using core::Vec3;

/**
 * Euler angles (radians), applied as intrinsic rotations about X, then the
 * new Y, then the new Z: R = Rx(a) * Ry(b) * Rz(c). Registration uses the
 * same convention.
 */
inline Eigen::Matrix3d euler_rotation(const Vec3& angles)
{
    return (Eigen::AngleAxisd(angles.x(), Vec3::UnitX()) * Eigen::AngleAxisd(angles.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(angles.z(), Vec3::UnitZ()))
        .toRotationMatrix();
}

/// Angles (a, b, c) with euler_rotation(a, b, c) == r; b in [-pi/2, pi/2].
inline Vec3 euler_angles(const Eigen::Matrix3d& r)
{
    const double b = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
    if (std::abs(r(0, 2)) < 1.0 - 1e-12)
    {
        return {std::atan2(-r(1, 2), r(2, 2)), b, std::atan2(-r(0, 1), r(0, 0))};
    }
    // Gimbal lock: only a +/- c is determined; put it all in a.
    return {std::atan2(r(2, 1), r(1, 1)), b, 0.0};
}

/// dR/d(angle_i) for i = 0, 1, 2.
inline std::array<Eigen::Matrix3d, 3> euler_rotation_derivatives(const Vec3& angles)
{
    const auto rot = [](int axis, double a) -> Eigen::Matrix3d {
        return Eigen::AngleAxisd(a, Vec3::Unit(axis)).toRotationMatrix();
    };
    const auto drot = [](int axis, double a) -> Eigen::Matrix3d {
        const double c = std::cos(a), s = std::sin(a);
        Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
        const int i = (axis + 1) % 3, j = (axis + 2) % 3;
        d(i, i) = -s;
        d(i, j) = -c;
        d(j, i) = c;
        d(j, j) = -s;
        return d;
    };
    const Eigen::Matrix3d rx = rot(0, angles.x()), ry = rot(1, angles.y()), rz = rot(2, angles.z());
    return {drot(0, angles.x()) * ry * rz, rx * drot(1, angles.y()) * rz, rx * ry * drot(2, angles.z())};
}

/**
 * Scaled orthographic camera. Image-plane coordinates are pixel coordinates
 * (origin at the top-left image corner, y down); the view direction is +z in
 * the rotated frame, so smaller rotated z is nearer.
 */
struct CameraParams
{
    double scale = 1.0;            ///< image units per mm
    Vec3 rotation = Vec3::Zero();  ///< (r_x, r_y, r_z)
    Vec2 translation = Vec2::Zero();

    Eigen::Matrix3d rotation_matrix() const { return euler_rotation(rotation); }
};

/// s * (R p).xy + t for every point.
inline std::vector<Vec2> project_orthographic(std::span<const Vec3> points, const CameraParams& cam)
{
    const Eigen::Matrix3d r = cam.rotation_matrix();
    std::vector<Vec2> out;
    out.reserve(points.size());
    for (const Vec3& p : points)
    {
        out.push_back(cam.scale * (r * p).head<2>() + cam.translation);
    }
    return out;
}

inline Vec2 project_orthographic(const Vec3& point, const CameraParams& cam)
{
    return cam.scale * (cam.rotation_matrix() * point).head<2>() + cam.translation;
}

} /* namespace render */
} /* namespace audioear */

#endif /* AUDIOEAR_RENDER_CAMERA_HPP */
