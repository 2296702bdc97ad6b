/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/fitting/adam.hpp
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

#ifndef AUDIOEAR_FITTING_ADAM_HPP
#define AUDIOEAR_FITTING_ADAM_HPP

#include "Eigen/Core"

#include <cmath>
#include <stdexcept>

namespace audioear {
namespace fitting {

struct AdamOptions
{
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates and the step counter.
struct AdamState
{
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long timestep = 0;

    AdamState() = default;
    explicit AdamState(Eigen::Index size) : m(Eigen::VectorXd::Zero(size)), v(Eigen::VectorXd::Zero(size)) {}
};

/**
 * One bias-corrected Adam update, in place. `lr` holds one step size per
 * parameter.
 */
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
                      const Eigen::VectorXd& lr, const AdamOptions& options = {})
{
    if (grads.size() != params.size() || lr.size() != params.size())
    {
        throw std::invalid_argument("adam_step: parameter, gradient and step size shapes differ");
    }
    if (state.m.size() == 0 && state.timestep == 0)
    {
        state = AdamState(params.size());
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
    {
        throw std::invalid_argument("adam_step: optimizer state does not match the parameters");
    }
    ++state.timestep;
    const double t = static_cast<double>(state.timestep);
    const double c1 = 1.0 - std::pow(options.beta1, t);
    const double c2 = 1.0 - std::pow(options.beta2, t);
    for (Eigen::Index i = 0; i < params.size(); ++i)
    {
        state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * grads[i];
        state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr[i] * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
}

inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
                      const AdamOptions& options = {})
{
    adam_step(params, grads, state, Eigen::VectorXd::Constant(params.size(), lr), options);
}

} /* namespace fitting */
} /* namespace audioear */

#endif /* AUDIOEAR_FITTING_ADAM_HPP */
