/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/acoustics/sphere.hpp
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

#ifndef AUDIOEAR_ACOUSTICS_SPHERE_HPP
#define AUDIOEAR_ACOUSTICS_SPHERE_HPP

#include "audioear/core/mesh.hpp"

#include "Eigen/Core"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace acoustics {

using Complex = std::complex<double>;
using core::Vec3;

/// e^{ikR} / (4 pi R); time dependence e^{-i omega t}.
inline Complex free_field(double k, const Vec3& source, const Vec3& x)
{
    const double r = (x - source).norm();
    return std::exp(Complex(0.0, k * r)) / (4.0 * std::numbers::pi * r);
}

/**
 * Total pressure around a rigid sphere (radius a, centred at `centre`) for a
 * monopole of strength `amplitude` at `source`: the free field plus the
 * partial-wave scattered series, summed until the terms fall below 1e-10 of
 * the running total.
 */
inline std::vector<Complex> rigid_sphere_reference(double a, double k, const Vec3& source,
                                                   std::span<const Vec3> points, Complex amplitude = 1.0,
                                                   const Vec3& centre = Vec3::Zero())
{
    if (!(a > 0.0) || !(k > 0.0))
    {
        throw std::invalid_argument("rigid_sphere_reference: radius and wavenumber must be positive");
    }
    const Vec3 s = source - centre;
    const double rs = s.norm();
    if (rs < a * (1.0 - 1e-12))
    {
        throw std::invalid_argument("rigid_sphere_reference: source inside the sphere");
    }
    const auto dj = [](unsigned n, double x) { return n * std::sph_bessel(n, x) / x - std::sph_bessel(n + 1, x); };
    const auto dy = [](unsigned n, double x) { return n * std::sph_neumann(n, x) / x - std::sph_neumann(n + 1, x); };
    const double ka = k * a;
    std::vector<Complex> out;
    out.reserve(points.size());
    for (const Vec3& p : points)
    {
        const Vec3 q = p - centre;
        const double r = q.norm();
        if (r < a * (1.0 - 1e-12))
        {
            throw std::invalid_argument("rigid_sphere_reference: evaluation point inside the sphere");
        }
        const double cosg = std::clamp(q.dot(s) / (r * rs), -1.0, 1.0);
        Complex sum = 0.0;
        int small = 0;
        for (unsigned n = 0; n < 400; ++n)
        {
            const Complex hp(dj(n, ka), dy(n, ka));
            const Complex hs(std::sph_bessel(n, k * rs), std::sph_neumann(n, k * rs));
            const Complex hr(std::sph_bessel(n, k * r), std::sph_neumann(n, k * r));
            const Complex term = (2.0 * n + 1.0) * (dj(n, ka) / hp) * hs * hr * std::legendre(n, cosg);
            sum += term;
            if (!std::isfinite(std::abs(sum)))
            {
                throw std::runtime_error("rigid_sphere_reference: series overflow");
            }
            small = (std::abs(term) <= 1e-10 * std::abs(sum) && n > ka) ? small + 1 : 0;
            if (small >= 3)
            {
                break;
            }
        }
        const Complex scattered = -Complex(0.0, k) / (4.0 * std::numbers::pi) * sum;
        out.push_back(amplitude * (free_field(k, source, p) + scattered));
    }
    return out;
}

} /* namespace acoustics */
} /* namespace audioear */

#endif /* AUDIOEAR_ACOUSTICS_SPHERE_HPP */
