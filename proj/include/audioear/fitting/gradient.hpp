/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/fitting/gradient.hpp
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

#ifndef AUDIOEAR_FITTING_GRADIENT_HPP
#define AUDIOEAR_FITTING_GRADIENT_HPP

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace audioear {
namespace fitting {

enum class GradientMode { analytic, finite_difference };

inline std::string to_string(GradientMode mode)
{
    return mode == GradientMode::analytic ? "analytic" : "finite_difference";
}

inline GradientMode gradient_mode_from_string(const std::string& s)
{
    if (s == "analytic") return GradientMode::analytic;
    if (s == "finite_difference" || s == "fd") return GradientMode::finite_difference;
    throw std::invalid_argument("unknown gradient mode '" + s + "'");
}

/// Returns the loss at x and, when `grad` is non-null, writes the analytic gradient.
using LossFunction = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

/// Default relative step for central differences.
inline constexpr double default_fd_step = 1e-4;

/**
 * Central differences with step h * max(1, |x_i|) per coordinate.
 */
inline Eigen::VectorXd finite_difference_gradient(const LossFunction& f, const Eigen::VectorXd& x,
                                                  double relative_step = default_fd_step)
{
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        const double h = relative_step * std::max(1.0, std::abs(x[i]));
        probe[i] = x[i] + h;
        const double up = f(probe, nullptr);
        probe[i] = x[i] - h;
        const double down = f(probe, nullptr);
        probe[i] = x[i];
        if (!std::isfinite(up) || !std::isfinite(down))
        {
            throw std::runtime_error("finite_difference_gradient: non-finite loss near coordinate " +
                                     std::to_string(i));
        }
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Gradient of f at x in the requested mode. Throws if f(x) is not finite.
inline Eigen::VectorXd gradient(const LossFunction& f, const Eigen::VectorXd& x, GradientMode mode,
                                double relative_step = default_fd_step)
{
    Eigen::VectorXd g;
    const double value = f(x, mode == GradientMode::analytic ? &g : nullptr);
    if (!std::isfinite(value))
    {
        throw std::runtime_error("gradient: loss is not finite at the evaluation point");
    }
    if (mode == GradientMode::finite_difference)
    {
        return finite_difference_gradient(f, x, relative_step);
    }
    if (g.size() != x.size())
    {
        throw std::logic_error("gradient: loss function returned a gradient of the wrong size");
    }
    return g;
}

/// |a - b| / max(|a|, |b|, floor), the relative error of two gradient vectors.
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-12)
{
    return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

} /* namespace fitting */
} /* namespace audioear */

#endif /* AUDIOEAR_FITTING_GRADIENT_HPP */
