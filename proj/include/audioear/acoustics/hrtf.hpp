/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/acoustics/hrtf.hpp
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

#ifndef AUDIOEAR_ACOUSTICS_HRTF_HPP
#define AUDIOEAR_ACOUSTICS_HRTF_HPP

#include "audioear/acoustics/bem.hpp"
#include "audioear/core/geometry.hpp"
#include "audioear/core/mesh.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace acoustics {

inline constexpr double metres_per_millimetre = 1e-3;

/// Copy of a millimetre mesh in metres.
inline TriMesh to_metres(TriMesh mesh)
{
    for (Vec3& v : mesh.vertices)
    {
        v *= metres_per_millimetre;
    }
    return mesh;
}

/**
 * Unit direction of a horizontal-plane azimuth in degrees: 0 is the front
 * (+z), 90 the subject's left (-x), 270 the right (+x).
 */
inline Vec3 azimuth_direction(double degrees)
{
    const double t = degrees * std::numbers::pi / 180.0;
    return {-std::sin(t), 0.0, std::cos(t)};
}

inline double spl_db(Complex p, double p_ref = reference_pressure)
{
    return 20.0 * std::log10(std::abs(p) / p_ref);
}

struct HrtfConfig
{
    std::vector<double> frequencies{1033.6, 2067.5, 3962.1}; ///< Hz
    double radius = 1.2;                                      ///< field radius, m
    int azimuth_count = 361;                                  ///< 0..360 inclusive
    Vec3 centre = Vec3::Zero();                               ///< field circle centre; the plane is y = centre.y
    double speed_of_sound = default_speed_of_sound;
    Formulation formulation = Formulation::burton_miller;
    double receiver_standoff = 0.005;  ///< m; receivers closer to the surface are pushed out to this distance
    double receiver_tolerance = 0.01;  ///< m; farther receivers draw a warning

    void validate() const
    {
        if (frequencies.empty())
        {
            throw std::invalid_argument("HrtfConfig: at least one frequency required");
        }
        for (double f : frequencies)
        {
            if (!(f > 0.0) || !std::isfinite(f))
            {
                throw std::invalid_argument("HrtfConfig: frequencies must be positive");
            }
        }
        if (!(radius > 0.0) || azimuth_count < 2 || !(speed_of_sound > 0.0) || !(receiver_standoff >= 0.0) ||
            !(receiver_tolerance >= 0.0) || !centre.allFinite())
        {
            throw std::invalid_argument("HrtfConfig: radius, speed of sound and azimuth_count must be valid");
        }
    }
};

struct HrtfResult
{
    std::vector<double> azimuths;    ///< degrees
    std::vector<double> frequencies; ///< Hz
    std::vector<std::vector<double>> spl;        ///< [frequency][azimuth], dB re 20 uPa
    std::vector<std::vector<Complex>> pressure;  ///< [frequency][azimuth], Pa
    Vec3 receiver = Vec3::Zero();                ///< point where the monopole was placed
    Vec3 centre = Vec3::Zero();
    double radius = 0.0;
    std::vector<std::string> warnings;
};

/// Evenly spaced azimuths covering [0, 360] with both ends included.
inline std::vector<double> azimuth_grid(int count)
{
    if (count < 2)
    {
        throw std::invalid_argument("azimuth_grid: need at least two azimuths");
    }
    std::vector<double> az(count);
    for (int i = 0; i < count; ++i)
    {
        az[i] = 360.0 * i / (count - 1);
    }
    return az;
}

/// Receiver moved out along the surface normal when it sits closer than `standoff`.
inline Vec3 standoff_receiver(const TriMesh& surface, const Vec3& receiver, double standoff)
{
    const core::FaceTree tree(surface);
    const auto cp = tree.closest(receiver);
    if (cp.distance >= standoff)
    {
        return receiver;
    }
    Vec3 dir = receiver - cp.point;
    const Vec3 normal = core::face_normal_unnormalized(surface, surface.faces[cp.face]).normalized();
    if (dir.norm() < 1e-12 || dir.dot(normal) <= 0.0)
    {
        dir = normal;
    }
    return cp.point + standoff * dir.normalized();
}

/**
 * Horizontal-plane HRTF of a rigid body (metres) by reciprocity: a unit
 * monopole at the receiver, one solve per frequency, pressure sampled on the
 * field circle. The 360 degree entry repeats the 0 degree one.
 */
inline HrtfResult simulate_hrtf(const TriMesh& body, const Vec3& receiver, const HrtfConfig& config = {})
{
    config.validate();
    core::validate(body);
    require_closed(body);
    HrtfResult out;
    out.frequencies = config.frequencies;
    out.azimuths = azimuth_grid(config.azimuth_count);
    out.centre = config.centre;
    out.radius = config.radius;
    const core::FaceTree tree(body);
    const double gap = tree.closest(receiver).distance;
    if (gap > config.receiver_tolerance)
    {
        std::ostringstream msg;
        msg << "receiver is " << gap << " m from the surface (tolerance " << config.receiver_tolerance << " m)";
        out.warnings.push_back(msg.str());
    }
    out.receiver = standoff_receiver(body, receiver, config.receiver_standoff);
    if (detail::winding_number(body, out.receiver) > 0.5)
    {
        throw std::invalid_argument("simulate_hrtf: receiver lies inside the body");
    }
    std::vector<Vec3> points;
    for (std::size_t i = 0; i + 1 < out.azimuths.size(); ++i)
    {
        points.push_back(config.centre + config.radius * azimuth_direction(out.azimuths[i]));
    }
    const Monopole source{out.receiver, 1.0};
    for (double f : config.frequencies)
    {
        const double k = wavenumber(f, config.speed_of_sound);
        const BemSystem sys = assemble_bem(body, k, config.formulation);
        const SurfaceSolution sol = solve(sys, source);
        for (const auto& w : sol.warnings)
        {
            out.warnings.push_back(std::to_string(f) + " Hz: " + w);
        }
        auto p = evaluate_field(body, k, sol.pressure, source, points);
        p.push_back(p.front());
        std::vector<double> level;
        for (const Complex& v : p)
        {
            level.push_back(spl_db(v));
        }
        out.pressure.push_back(std::move(p));
        out.spl.push_back(std::move(level));
    }
    return out;
}

struct SplErrorStats
{
    double frequency = 0.0; ///< Hz
    double mean_db = 0.0;
    double std_db = 0.0;    ///< population standard deviation over azimuths

    double mean_db_x10() const { return 10.0 * mean_db; }
    double std_db_x10() const { return 10.0 * std_db; }
};

inline void require_same_grid(const HrtfResult& a, const HrtfResult& b)
{
    if (a.frequencies != b.frequencies || a.azimuths != b.azimuths || a.spl.size() != a.frequencies.size() ||
        b.spl.size() != b.frequencies.size())
    {
        throw std::invalid_argument("spl_error: frequency or azimuth grids differ");
    }
    for (std::size_t f = 0; f < a.spl.size(); ++f)
    {
        if (a.spl[f].size() != a.azimuths.size() || b.spl[f].size() != b.azimuths.size())
        {
            throw std::invalid_argument("spl_error: SPL table does not match the azimuth grid");
        }
    }
}

/// Per frequency, mean and standard deviation of |spl_pred - spl_gt| over all azimuths.
inline std::vector<SplErrorStats> spl_error(const HrtfResult& pred, const HrtfResult& gt)
{
    require_same_grid(pred, gt);
    std::vector<SplErrorStats> out;
    for (std::size_t f = 0; f < pred.frequencies.size(); ++f)
    {
        const std::size_t n = pred.azimuths.size();
        double sum = 0.0, sq = 0.0;
        for (std::size_t a = 0; a < n; ++a)
        {
            const double d = std::abs(pred.spl[f][a] - gt.spl[f][a]);
            sum += d;
            sq += d * d;
        }
        SplErrorStats s;
        s.frequency = pred.frequencies[f];
        s.mean_db = sum / static_cast<double>(n);
        s.std_db = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - s.mean_db * s.mean_db));
        out.push_back(s);
    }
    return out;
}

struct PolarRow
{
    double frequency;
    double azimuth;
    double value;
};

inline std::vector<PolarRow> polar_rows(const HrtfResult& r)
{
    std::vector<PolarRow> rows;
    for (std::size_t f = 0; f < r.frequencies.size(); ++f)
    {
        for (std::size_t a = 0; a < r.azimuths.size(); ++a)
        {
            rows.push_back({r.frequencies[f], r.azimuths[a], r.spl.at(f).at(a)});
        }
    }
    return rows;
}

/// |spl_pred - spl_gt| per grid point.
inline std::vector<PolarRow> error_polar_rows(const HrtfResult& pred, const HrtfResult& gt)
{
    require_same_grid(pred, gt);
    auto rows = polar_rows(pred);
    std::size_t i = 0;
    for (std::size_t f = 0; f < pred.frequencies.size(); ++f)
    {
        for (std::size_t a = 0; a < pred.azimuths.size(); ++a, ++i)
        {
            rows[i].value = std::abs(pred.spl[f][a] - gt.spl[f][a]);
        }
    }
    return rows;
}

inline void write_polar_csv(std::ostream& os, const std::vector<PolarRow>& rows)
{
    os << "frequency_hz,azimuth_deg,value_db\n";
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : rows)
    {
        os << r.frequency << ',' << r.azimuth << ',' << r.value << '\n';
    }
}

inline std::vector<PolarRow> read_polar_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != "frequency_hz,azimuth_deg,value_db")
    {
        throw std::invalid_argument("read_polar_csv: missing header");
    }
    std::vector<PolarRow> rows;
    while (std::getline(is, line))
    {
        if (line.empty())
        {
            continue;
        }
        std::istringstream ss(line);
        PolarRow r{};
        char c1 = 0, c2 = 0;
        if (!(ss >> r.frequency >> c1 >> r.azimuth >> c2 >> r.value) || c1 != ',' || c2 != ',')
        {
            throw std::invalid_argument("read_polar_csv: malformed row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

inline nlohmann::json to_json(const HrtfConfig& c)
{
    return {{"frequencies", c.frequencies},
            {"radius", c.radius},
            {"azimuth_count", c.azimuth_count},
            {"centre", {c.centre.x(), c.centre.y(), c.centre.z()}},
            {"speed_of_sound", c.speed_of_sound},
            {"formulation", to_string(c.formulation)},
            {"receiver_standoff", c.receiver_standoff},
            {"receiver_tolerance", c.receiver_tolerance}};
}

/// Missing keys keep their defaults; the result is validated.
inline HrtfConfig hrtf_config_from_json(const nlohmann::json& j)
{
    HrtfConfig c;
    c.frequencies = j.value("frequencies", c.frequencies);
    c.radius = j.value("radius", c.radius);
    c.azimuth_count = j.value("azimuth_count", c.azimuth_count);
    if (j.contains("centre"))
    {
        const auto v = j.at("centre").get<std::vector<double>>();
        if (v.size() != 3)
        {
            throw std::invalid_argument("HrtfConfig: centre needs 3 values");
        }
        c.centre = Vec3(v[0], v[1], v[2]);
    }
    c.speed_of_sound = j.value("speed_of_sound", c.speed_of_sound);
    if (j.contains("formulation"))
    {
        c.formulation = formulation_from_string(j.at("formulation").get<std::string>());
    }
    c.receiver_standoff = j.value("receiver_standoff", c.receiver_standoff);
    c.receiver_tolerance = j.value("receiver_tolerance", c.receiver_tolerance);
    c.validate();
    return c;
}

inline nlohmann::json to_json(const HrtfResult& r)
{
    nlohmann::json spl = nlohmann::json::array();
    for (const auto& row : r.spl)
    {
        spl.push_back(row);
    }
    return {{"azimuths", r.azimuths},
            {"frequencies", r.frequencies},
            {"spl_db", spl},
            {"receiver", {r.receiver.x(), r.receiver.y(), r.receiver.z()}},
            {"centre", {r.centre.x(), r.centre.y(), r.centre.z()}},
            {"radius", r.radius},
            {"warnings", r.warnings}};
}

/// Reads the grid and SPL table written by to_json (pressures are not stored).
inline HrtfResult hrtf_result_from_json(const nlohmann::json& j)
{
    HrtfResult r;
    r.azimuths = j.at("azimuths").get<std::vector<double>>();
    r.frequencies = j.at("frequencies").get<std::vector<double>>();
    r.spl = j.at("spl_db").get<std::vector<std::vector<double>>>();
    const auto rec = j.at("receiver").get<std::vector<double>>();
    const auto cen = j.at("centre").get<std::vector<double>>();
    if (rec.size() != 3 || cen.size() != 3)
    {
        throw std::invalid_argument("HrtfResult: receiver and centre need 3 values");
    }
    r.receiver = Vec3(rec[0], rec[1], rec[2]);
    r.centre = Vec3(cen[0], cen[1], cen[2]);
    r.radius = j.at("radius").get<double>();
    r.warnings = j.value("warnings", std::vector<std::string>{});
    require_same_grid(r, r);
    return r;
}

inline nlohmann::json to_json(const std::vector<SplErrorStats>& stats)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : stats)
    {
        out.push_back({{"frequency_hz", s.frequency},
                       {"mean_db", s.mean_db},
                       {"std_db", s.std_db},
                       {"mean_db_x10", s.mean_db_x10()},
                       {"std_db_x10", s.std_db_x10()}});
    }
    return out;
}

/**
 * Suggested receiver for an ear mesh: the interior vertex lying deepest
 * below the centroid of its boundary, measured against the loop's outward side.
 */
inline Vec3 suggest_receiver(const TriMesh& ear)
{
    const auto counts = core::edge_face_counts(ear);
    Vec3 centroid = Vec3::Zero();
    Vec3 area = Vec3::Zero();
    int boundary = 0;
    std::vector<bool> on_loop(ear.vertices.size(), false);
    for (const auto& f : ear.faces)
    {
        for (int e = 0; e < 3; ++e)
        {
            const int a = f[e], b = f[(e + 1) % 3];
            if (counts.at({std::min(a, b), std::max(a, b)}) == 1)
            {
                centroid += ear.vertices[a];
                on_loop[a] = true;
                area += ear.vertices[a].cross(ear.vertices[b]);
                ++boundary;
            }
        }
    }
    if (boundary == 0 || area.norm() == 0.0)
    {
        throw std::invalid_argument("suggest_receiver: ear mesh has no boundary loop");
    }
    centroid /= boundary;
    const Vec3 outward = area.normalized();
    int best = -1;
    double depth = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ear.vertices.size(); ++i)
    {
        if (on_loop[i])
        {
            continue;
        }
        const double h = (ear.vertices[i] - centroid).dot(outward);
        if (h < depth)
        {
            depth = h;
            best = static_cast<int>(i);
        }
    }
    if (best < 0)
    {
        throw std::invalid_argument("suggest_receiver: ear mesh has no interior vertex");
    }
    return ear.vertices[best];
}

} /* namespace acoustics */
} /* namespace audioear */

#endif /* AUDIOEAR_ACOUSTICS_HRTF_HPP */
