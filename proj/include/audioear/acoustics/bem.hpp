/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/acoustics/bem.hpp
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

#ifndef AUDIOEAR_ACOUSTICS_BEM_HPP
#define AUDIOEAR_ACOUSTICS_BEM_HPP

#include "audioear/acoustics/sphere.hpp"
#include "audioear/core/geometry.hpp"
#include "audioear/core/mesh.hpp"

#include "Eigen/Core"
#include "Eigen/LU"
#include "boost/math/quadrature/gauss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace acoustics {

using core::Face;
using core::TriMesh;

inline constexpr double default_speed_of_sound = 343.0; ///< m/s
inline constexpr double reference_pressure = 20e-6;     ///< Pa

inline double wavenumber(double frequency_hz, double speed_of_sound = default_speed_of_sound)
{
    return 2.0 * std::numbers::pi * frequency_hz / speed_of_sound;
}

/// Combined-field (coupling i/k) or plain collocation of the surface equation.
enum class Formulation { burton_miller, conventional };

inline std::string to_string(Formulation f)
{
    return f == Formulation::burton_miller ? "burton_miller" : "conventional";
}

inline Formulation formulation_from_string(const std::string& s)
{
    if (s == "burton_miller")
    {
        return Formulation::burton_miller;
    }
    if (s == "conventional")
    {
        return Formulation::conventional;
    }
    throw std::invalid_argument("unknown BEM formulation '" + s + "'");
}

struct Monopole
{
    Vec3 position = Vec3::Zero();
    Complex amplitude = 1.0;
};

/// Rigid closed surface in metres, outward normals.
struct BemProblem
{
    TriMesh surface;
    double wavenumber = 1.0; ///< 1/m
    Monopole source;
    Formulation formulation = Formulation::burton_miller;
};

/// Raised when the dense solve is singular or inaccurate.
class BemSolveError : public std::runtime_error
{
public:
    BemSolveError(const std::string& what, double rcond) : std::runtime_error(what), rcond_(rcond) {}
    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

namespace detail {

struct QuadPoint
{
    Vec3 y;
    double w; ///< includes the area
};

/// 7-point symmetric rule, degree 5.
inline void triangle_rule(const Vec3& a, const Vec3& b, const Vec3& c, std::vector<QuadPoint>& out)
{
    static constexpr std::array<std::array<double, 4>, 7> rule{{
        {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225},
        {0.059715871789770, 0.470142064105115, 0.470142064105115, 0.132394152788506},
        {0.470142064105115, 0.059715871789770, 0.470142064105115, 0.132394152788506},
        {0.470142064105115, 0.470142064105115, 0.059715871789770, 0.132394152788506},
        {0.797426985353087, 0.101286507323456, 0.101286507323456, 0.125939180544827},
        {0.101286507323456, 0.797426985353087, 0.101286507323456, 0.125939180544827},
        {0.101286507323456, 0.101286507323456, 0.797426985353087, 0.125939180544827},
    }};
    const double area = 0.5 * (b - a).cross(c - a).norm();
    for (const auto& q : rule)
    {
        out.push_back({q[0] * a + q[1] * b + q[2] * c, q[3] * area});
    }
}

/// The rule on each of the 4^level midpoint sub-triangles.
inline void subdivided_rule(const Vec3& a, const Vec3& b, const Vec3& c, int level, std::vector<QuadPoint>& out)
{
    if (level == 0)
    {
        triangle_rule(a, b, c, out);
        return;
    }
    const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    subdivided_rule(a, ab, ca, level - 1, out);
    subdivided_rule(ab, b, bc, level - 1, out);
    subdivided_rule(ca, bc, c, level - 1, out);
    subdivided_rule(ab, bc, ca, level - 1, out);
}

/// Subdivision depth for a target at distance d from an element of diameter h.
inline int near_level(double d, double h)
{
    if (d > 3.0 * h)
    {
        return 0;
    }
    if (d > 1.5 * h)
    {
        return 1;
    }
    if (d > 0.75 * h)
    {
        return 2;
    }
    return 3;
}

struct Kernels
{
    Complex dg_dny;     ///< dG/dn_y
    Complex d2g_dnxdny; ///< d2G/dn_x dn_y
};

inline Kernels kernels(double k, const Vec3& x, const Vec3& nx, const Vec3& y, const Vec3& ny)
{
    const Vec3 d = y - x;
    const double r = d.norm();
    const Complex ikr(0.0, k * r);
    const Complex e = std::exp(ikr) / (4.0 * std::numbers::pi);
    const Complex g1 = e * (ikr - 1.0) / (r * r);
    const Complex g2 = e * (2.0 - 2.0 * ikr - k * k * r * r) / (r * r * r);
    const double dny = d.dot(ny), dnx = d.dot(nx);
    Kernels out;
    out.dg_dny = g1 * dny / r;
    out.d2g_dnxdny = g2 * (-dnx / r) * (dny / r) + g1 * (-nx.dot(ny) / r + dny * dnx / (r * r * r));
    return out;
}

/**
 * Finite-part integral of d2G/dn_x dn_y over a flat triangle for a point x
 * inside it. The static 1/(4 pi r^3) part is integrated in closed form in
 * polar coordinates; the bounded remainder by Gauss-Legendre.
 */
inline Complex hypersingular_self(double k, const Vec3& x, const Vec3& a, const Vec3& b, const Vec3& c)
{
    using boost::math::quadrature::gauss;
    const Vec3 n = (b - a).cross(c - a).normalized();
    const std::array<Vec3, 3> v{a, b, c};
    const auto remainder = [k](double rho) -> Complex {
        const double t = k * rho;
        if (t < 1e-3)
        {
            return k * k * Complex(0.5 - t * t / 8.0, t / 3.0) / (4.0 * std::numbers::pi);
        }
        return (std::exp(Complex(0.0, t)) * Complex(1.0, -t) - 1.0) / (4.0 * std::numbers::pi * rho * rho);
    };
    Complex total = 0.0;
    for (int e = 0; e < 3; ++e)
    {
        const Vec3 pa = v[e] - x, pb = v[(e + 1) % 3] - x;
        const Vec3 e1 = pa.normalized();
        const Vec3 e2 = n.cross(e1);
        const double theta = std::atan2(pb.dot(e2), pb.dot(e1));
        const Vec3 edge = pb - pa;
        // foot of the perpendicular from x onto the edge line
        const Vec3 foot = pa - edge * (pa.dot(edge) / edge.squaredNorm());
        const double h = foot.norm();
        const double phi0 = std::atan2(foot.dot(e2), foot.dot(e1));
        total += -(std::sin(theta - phi0) + std::sin(phi0)) / (4.0 * std::numbers::pi * h);
        const auto radial = [&](double th) {
            const double reach = h / std::cos(th - phi0);
            const auto re = gauss<double, 10>::integrate([&](double rho) { return remainder(rho).real(); }, 0.0, reach);
            const auto im = gauss<double, 10>::integrate([&](double rho) { return remainder(rho).imag(); }, 0.0, reach);
            return Complex(re, im);
        };
        const double re = gauss<double, 10>::integrate([&](double th) { return radial(th).real(); }, 0.0, theta);
        const double im = gauss<double, 10>::integrate([&](double th) { return radial(th).imag(); }, 0.0, theta);
        total += Complex(re, im);
    }
    return total;
}

/// Generalized winding number of a closed surface around p (1 inside, 0 outside).
inline double winding_number(const TriMesh& mesh, const Vec3& p)
{
    double omega = 0.0;
    for (const Face& f : mesh.faces)
    {
        const Vec3 a = mesh.vertices[f[0]] - p, b = mesh.vertices[f[1]] - p, c = mesh.vertices[f[2]] - p;
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        omega += 2.0 * std::atan2(a.dot(b.cross(c)), la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la);
    }
    return omega / (4.0 * std::numbers::pi);
}

inline double max_edge_length(const TriMesh& mesh, const Face& f)
{
    return std::max({(mesh.vertices[f[0]] - mesh.vertices[f[1]]).norm(),
                     (mesh.vertices[f[1]] - mesh.vertices[f[2]]).norm(),
                     (mesh.vertices[f[2]] - mesh.vertices[f[0]]).norm()});
}

} /* namespace detail */

/// Collocation data and the dense system A p = b of a rigid surface at one wavenumber.
struct BemSystem
{
    Eigen::MatrixXcd matrix;
    std::vector<Vec3> centroids;
    std::vector<Vec3> normals;
    double wavenumber = 0.0;
    Complex coupling = 0.0; ///< weight of the normal-derivative equation
    std::vector<std::string> warnings;

    /// p_inc(x_i) + coupling * dp_inc/dn(x_i) for every collocation point.
    Eigen::VectorXcd rhs(const Monopole& source) const
    {
        Eigen::VectorXcd b(static_cast<Eigen::Index>(centroids.size()));
        for (std::size_t i = 0; i < centroids.size(); ++i)
        {
            const Vec3 d = centroids[i] - source.position;
            const double r = d.norm();
            const Complex ikr(0.0, wavenumber * r);
            const Complex g = std::exp(ikr) / (4.0 * std::numbers::pi * r);
            const Complex dg = g * (ikr - 1.0) / r * (d.dot(normals[i]) / r);
            b[static_cast<Eigen::Index>(i)] = source.amplitude * (g + coupling * dg);
        }
        return b;
    }
};

/// Throws unless every edge of the surface is shared by exactly two faces.
inline void require_closed(const TriMesh& surface)
{
    for (const auto& [edge, count] : core::edge_face_counts(surface))
    {
        if (count != 2)
        {
            throw std::invalid_argument("BEM surface is not closed: edge (" + std::to_string(edge.first) + ", " +
                                        std::to_string(edge.second) + ") has " + std::to_string(count) + " faces");
        }
    }
}

/**
 * Constant-element collocation at face centroids:
 * A = I/2 - K - coupling * H, with K the double-layer and H the
 * hypersingular operator.
 */
inline BemSystem assemble_bem(const TriMesh& surface, double k, Formulation formulation = Formulation::burton_miller)
{
    if (!(k > 0.0) || !std::isfinite(k))
    {
        throw std::invalid_argument("assemble_bem: wavenumber must be positive");
    }
    core::validate(surface);
    require_closed(surface);
    const auto n = static_cast<Eigen::Index>(surface.faces.size());
    BemSystem sys;
    sys.wavenumber = k;
    sys.coupling = formulation == Formulation::burton_miller ? Complex(0.0, 1.0 / k) : Complex(0.0);
    std::vector<double> sizes(surface.faces.size());
    std::vector<std::vector<detail::QuadPoint>> rules(surface.faces.size());
    double largest = 0.0;
    for (std::size_t j = 0; j < surface.faces.size(); ++j)
    {
        const Face& f = surface.faces[j];
        const Vec3 &a = surface.vertices[f[0]], &b = surface.vertices[f[1]], &c = surface.vertices[f[2]];
        sys.centroids.push_back((a + b + c) / 3.0);
        sys.normals.push_back((b - a).cross(c - a).normalized());
        sizes[j] = detail::max_edge_length(surface, f);
        largest = std::max(largest, sizes[j]);
        detail::triangle_rule(a, b, c, rules[j]);
    }
    const double lambda = 2.0 * std::numbers::pi / k;
    if (largest > lambda / 6.0)
    {
        std::ostringstream msg;
        msg << "element size " << largest << " m exceeds lambda/6 = " << lambda / 6.0 << " m";
        sys.warnings.push_back(msg.str());
    }
    sys.matrix.resize(n, n);
#pragma omp parallel for schedule(dynamic, 8)
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const Vec3& x = sys.centroids[i];
        const Vec3& nx = sys.normals[i];
        std::vector<detail::QuadPoint> fine;
        for (Eigen::Index j = 0; j < n; ++j)
        {
            const Face& f = surface.faces[j];
            Complex kij = 0.0, hij = 0.0;
            if (i == j)
            {
                hij = detail::hypersingular_self(k, x, surface.vertices[f[0]], surface.vertices[f[1]],
                                                 surface.vertices[f[2]]);
            } else
            {
                const int level = detail::near_level((sys.centroids[j] - x).norm(), sizes[j]);
                const std::vector<detail::QuadPoint>* rule = &rules[j];
                if (level > 0)
                {
                    fine.clear();
                    detail::subdivided_rule(surface.vertices[f[0]], surface.vertices[f[1]], surface.vertices[f[2]],
                                            level, fine);
                    rule = &fine;
                }
                for (const auto& q : *rule)
                {
                    const auto kern = detail::kernels(k, x, nx, q.y, sys.normals[j]);
                    kij += q.w * kern.dg_dny;
                    hij += q.w * kern.d2g_dnxdny;
                }
            }
            sys.matrix(i, j) = (i == j ? Complex(0.5) : Complex(0.0)) - kij - sys.coupling * hij;
        }
    }
    if (!sys.matrix.allFinite())
    {
        throw std::runtime_error("assemble_bem: non-finite matrix entry");
    }
    return sys;
}

struct SurfaceSolution
{
    Eigen::VectorXcd pressure;   ///< total pressure per face
    double relative_residual = 0.0;
    double rcond = 0.0;          ///< reciprocal condition estimate (1-norm)
    std::vector<std::string> warnings;
};

/// Dense LU solve for one source. Singular or inaccurate systems throw BemSolveError.
inline SurfaceSolution solve(const BemSystem& sys, const Monopole& source)
{
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(sys.matrix);
    SurfaceSolution out;
    out.warnings = sys.warnings;
    out.rcond = lu.rcond();
    if (!(out.rcond > 1e-14))
    {
        throw BemSolveError("BEM system is singular (rcond " + std::to_string(out.rcond) + ")", out.rcond);
    }
    const Eigen::VectorXcd b = sys.rhs(source);
    out.pressure = lu.solve(b);
    const double bn = b.norm();
    out.relative_residual = bn > 0.0 ? (sys.matrix * out.pressure - b).norm() / bn : (sys.matrix * out.pressure).norm();
    if (!(out.relative_residual < 1e-8))
    {
        throw BemSolveError("BEM solve residual " + std::to_string(out.relative_residual) + " exceeds 1e-8", out.rcond);
    }
    return out;
}

/// Surface pressure for a problem; rejects sources inside the body.
inline SurfaceSolution solve_exterior(const BemProblem& problem)
{
    if (detail::winding_number(problem.surface, problem.source.position) > 0.5)
    {
        throw std::invalid_argument("solve_exterior: source lies inside the surface");
    }
    return solve(assemble_bem(problem.surface, problem.wavenumber, problem.formulation), problem.source);
}

/// Exterior field p(x) = p_inc(x) + sum_j p_j * integral of dG/dn_y over face j.
inline std::vector<Complex> evaluate_field(const TriMesh& surface, double k, const Eigen::VectorXcd& pressure,
                                           const Monopole& source, std::span<const Vec3> points)
{
    if (pressure.size() != static_cast<Eigen::Index>(surface.faces.size()))
    {
        throw std::invalid_argument("evaluate_field: one pressure value per face required");
    }
    for (const Vec3& p : points)
    {
        if (detail::winding_number(surface, p) > 0.5)
        {
            throw std::invalid_argument("evaluate_field: field point lies inside the surface");
        }
    }
    std::vector<Complex> out(points.size());
    std::vector<Vec3> centroids, normals;
    std::vector<double> sizes;
    for (const Face& f : surface.faces)
    {
        const Vec3 &a = surface.vertices[f[0]], &b = surface.vertices[f[1]], &c = surface.vertices[f[2]];
        centroids.push_back((a + b + c) / 3.0);
        normals.push_back((b - a).cross(c - a).normalized());
        sizes.push_back(detail::max_edge_length(surface, f));
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(points.size()); ++i)
    {
        const Vec3& x = points[i];
        Complex sum = source.amplitude * free_field(k, source.position, x);
        std::vector<detail::QuadPoint> rule;
        for (std::size_t j = 0; j < surface.faces.size(); ++j)
        {
            const Face& f = surface.faces[j];
            rule.clear();
            detail::subdivided_rule(surface.vertices[f[0]], surface.vertices[f[1]], surface.vertices[f[2]],
                                    detail::near_level((centroids[j] - x).norm(), sizes[j]), rule);
            Complex kj = 0.0;
            for (const auto& q : rule)
            {
                kj += q.w * detail::kernels(k, x, normals[j], q.y, normals[j]).dg_dny;
            }
            sum += pressure[static_cast<Eigen::Index>(j)] * kj;
        }
        out[i] = sum;
    }
    return out;
}

} /* namespace acoustics */
} /* namespace audioear */

#endif /* AUDIOEAR_ACOUSTICS_BEM_HPP */
