/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/loss/landmarks.hpp
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

#ifndef AUDIOEAR_LOSS_LANDMARKS_HPP
#define AUDIOEAR_LOSS_LANDMARKS_HPP

#include "audioear/core/mesh.hpp"

#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace loss {

using core::Vec2;

enum class Occlusion { clean, hair, earring };

inline std::string to_string(Occlusion o)
{
    switch (o)
    {
    case Occlusion::hair: return "hair";
    case Occlusion::earring: return "earring";
    default: return "clean";
    }
}

inline Occlusion occlusion_from_string(const std::string& s)
{
    if (s == "clean") return Occlusion::clean;
    if (s == "hair") return Occlusion::hair;
    if (s == "earring") return Occlusion::earring;
    throw std::invalid_argument("unknown occlusion label '" + s + "'");
}

/**
 * Annotated 2D ear landmarks (pixel coordinates) and their partition into
 * ordered contour groups. The group assignment comes from the data; groups[0]
 * is taken as the outer contour when building the ear mask.
 */
struct LandmarkSet2D
{
    std::vector<Vec2> points;
    std::vector<std::vector<int>> groups;
    Occlusion occlusion = Occlusion::clean;
};

/**
 * Checks that groups are disjoint, cover every landmark index, and have at
 * least two points each. `expected_count` of 0 skips the size check.
 */
inline void validate(const LandmarkSet2D& lm, std::size_t expected_count = 55, std::size_t expected_groups = 4)
{
    if (expected_count != 0 && lm.points.size() != expected_count)
    {
        throw std::invalid_argument("landmarks: expected " + std::to_string(expected_count) + " points, got " +
                                    std::to_string(lm.points.size()));
    }
    if (expected_groups != 0 && lm.groups.size() != expected_groups)
    {
        throw std::invalid_argument("landmarks: expected " + std::to_string(expected_groups) + " groups, got " +
                                    std::to_string(lm.groups.size()));
    }
    std::vector<int> seen(lm.points.size(), 0);
    for (std::size_t g = 0; g < lm.groups.size(); ++g)
    {
        if (lm.groups[g].size() < 2)
        {
            throw std::invalid_argument("landmarks: group " + std::to_string(g) + " has fewer than 2 points");
        }
        for (int idx : lm.groups[g])
        {
            if (idx < 0 || idx >= static_cast<int>(lm.points.size()))
            {
                throw std::invalid_argument("landmarks: group " + std::to_string(g) + " index " +
                                            std::to_string(idx) + " out of range");
            }
            if (seen[idx]++)
            {
                throw std::invalid_argument("landmarks: index " + std::to_string(idx) + " appears in several groups");
            }
        }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
    {
        if (!seen[i])
        {
            throw std::invalid_argument("landmarks: index " + std::to_string(i) + " is not in any group");
        }
    }
    for (const Vec2& p : lm.points)
    {
        if (!p.allFinite())
        {
            throw std::invalid_argument("landmarks: non-finite coordinate");
        }
    }
}

inline nlohmann::json to_json(const LandmarkSet2D& lm)
{
    nlohmann::json j;
    j["points"] = nlohmann::json::array();
    for (const Vec2& p : lm.points)
    {
        j["points"].push_back({p.x(), p.y()});
    }
    j["groups"] = lm.groups;
    j["occlusion"] = to_string(lm.occlusion);
    return j;
}

/// Parses the landmark JSON schema: {"points": [[x,y]...], "groups": [[idx...]...], "occlusion": "..."}.
inline LandmarkSet2D landmarks_from_json(const nlohmann::json& j)
{
    LandmarkSet2D lm;
    for (const auto& p : j.at("points"))
    {
        if (!p.is_array() || p.size() != 2)
        {
            throw std::invalid_argument("landmarks: every point must be an [x, y] pair");
        }
        lm.points.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    lm.groups = j.at("groups").get<std::vector<std::vector<int>>>();
    lm.occlusion = occlusion_from_string(j.value("occlusion", "clean"));
    return lm;
}

inline LandmarkSet2D load_landmarks(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw std::runtime_error("cannot open landmark file " + path.string());
    }
    try
    {
        LandmarkSet2D lm = landmarks_from_json(nlohmann::json::parse(in));
        validate(lm);
        return lm;
    } catch (const std::exception& e)
    {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

inline void save_landmarks(const LandmarkSet2D& lm, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << to_json(lm).dump(2) << '\n';
}

/// Diagonal length of the axis-aligned bounding box of the points.
inline double bounding_box_diagonal(const std::vector<Vec2>& points)
{
    if (points.empty())
    {
        return 0.0;
    }
    Vec2 lo = points.front(), hi = points.front();
    for (const Vec2& p : points)
    {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

} /* namespace loss */
} /* namespace audioear */

#endif /* AUDIOEAR_LOSS_LANDMARKS_HPP */
