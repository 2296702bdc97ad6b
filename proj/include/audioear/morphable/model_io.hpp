/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/morphable/model_io.hpp
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

#ifndef AUDIOEAR_MORPHABLE_MODEL_IO_HPP
#define AUDIOEAR_MORPHABLE_MODEL_IO_HPP

#include "audioear/morphable/model.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

namespace audioear {
namespace morphable {

/*
 * Model container
 * ---------------
 * A model is stored as two files: `<name>.bin` with the numeric arrays and
 * `<name>.bin.json` with dimensions and provenance. The binary file is
 * little-endian:
 *
 *   char[8]  magic      "AEARSHP1" (shape) or "AEARTEX1" (texture)
 *   float64  arrays in the order listed by the sidecar's "arrays" field
 *   int32    integer arrays (faces, landmark faces) after all float64 arrays
 *
 * Shape arrays: mean (3N), basis (3N*K, column-major), eigenvalues (K),
 * uv (2N, optional), landmark_barycentric (3L, optional); integer arrays:
 * faces (3F), landmark_faces (L, optional).
 * Texture arrays: mean (h*w*3), basis (h*w*3*T, column-major).
 */

namespace detail {

inline std::filesystem::path sidecar_path(const std::filesystem::path& path)
{
    return std::filesystem::path(path.string() + ".json");
}

inline void write_doubles(std::ofstream& out, const double* data, std::size_t n)
{
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::ifstream& in, double* data, std::size_t n, const std::string& what)
{
    if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double))))
    {
        throw std::runtime_error("model container truncated while reading " + what);
    }
}

inline void read_ints(std::ifstream& in, std::int32_t* data, std::size_t n, const std::string& what)
{
    if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(std::int32_t))))
    {
        throw std::runtime_error("model container truncated while reading " + what);
    }
}

inline nlohmann::json read_sidecar(const std::filesystem::path& path, const std::string& expected_kind)
{
    std::ifstream in(sidecar_path(path));
    if (!in)
    {
        throw std::runtime_error("missing model sidecar " + sidecar_path(path).string());
    }
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("kind", "") != expected_kind)
    {
        throw std::runtime_error(sidecar_path(path).string() + ": expected kind '" + expected_kind + "'");
    }
    return j;
}

inline std::ifstream open_container(const std::filesystem::path& path, const char* magic)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw std::runtime_error("cannot open model container " + path.string());
    }
    char buf[8];
    if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0)
    {
        throw std::runtime_error(path.string() + ": bad magic, not a " + std::string(magic, 8) + " container");
    }
    return in;
}

} /* namespace detail */

inline void save_shape_model(const EarShapeModel& model, const std::filesystem::path& path,
                             const std::string& provenance = "")
{
    validate(model);
    const auto n3 = static_cast<std::size_t>(model.mean.size());
    const auto k = static_cast<std::size_t>(model.dim());
    const std::size_t l = model.landmarks.points.size();
    nlohmann::json j;
    j["kind"] = "shape";
    j["version"] = 1;
    j["num_vertices"] = model.num_vertices();
    j["num_components"] = model.dim();
    j["num_faces"] = model.faces.size();
    j["has_uv"] = !model.uv.empty();
    j["num_landmarks"] = l;
    j["landmark_groups"] = model.landmarks.groups;
    j["provenance"] = provenance;
    j["arrays"] = {"mean", "basis", "eigenvalues", "uv", "landmark_barycentric", "faces", "landmark_faces"};
    {
        std::ofstream js(detail::sidecar_path(path));
        js << j.dump(2) << '\n';
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write("AEARSHP1", 8);
    detail::write_doubles(out, model.mean.data(), n3);
    detail::write_doubles(out, model.basis.data(), n3 * k);
    detail::write_doubles(out, model.eigenvalues.data(), k);
    for (const Vec2& t : model.uv)
    {
        detail::write_doubles(out, t.data(), 2);
    }
    for (const auto& s : model.landmarks.points)
    {
        detail::write_doubles(out, s.barycentric.data(), 3);
    }
    for (const Face& f : model.faces)
    {
        const std::int32_t idx[3] = {f[0], f[1], f[2]};
        out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
    for (const auto& s : model.landmarks.points)
    {
        const std::int32_t fi = s.face;
        out.write(reinterpret_cast<const char*>(&fi), sizeof(fi));
    }
}

inline EarShapeModel load_shape_model(const std::filesystem::path& path)
{
    const nlohmann::json j = detail::read_sidecar(path, "shape");
    std::ifstream in = detail::open_container(path, "AEARSHP1");
    const std::size_t n = j.at("num_vertices").get<std::size_t>();
    const std::size_t k = j.at("num_components").get<std::size_t>();
    const std::size_t f = j.at("num_faces").get<std::size_t>();
    const std::size_t l = j.value("num_landmarks", std::size_t{0});
    EarShapeModel model;
    model.mean.resize(static_cast<Eigen::Index>(3 * n));
    model.basis.resize(static_cast<Eigen::Index>(3 * n), static_cast<Eigen::Index>(k));
    model.eigenvalues.resize(static_cast<Eigen::Index>(k));
    detail::read_doubles(in, model.mean.data(), 3 * n, "mean");
    detail::read_doubles(in, model.basis.data(), 3 * n * k, "basis");
    detail::read_doubles(in, model.eigenvalues.data(), k, "eigenvalues");
    if (j.value("has_uv", false))
    {
        model.uv.resize(n);
        for (auto& t : model.uv)
        {
            detail::read_doubles(in, t.data(), 2, "uv");
        }
    }
    model.landmarks.points.resize(l);
    for (auto& s : model.landmarks.points)
    {
        detail::read_doubles(in, s.barycentric.data(), 3, "landmark_barycentric");
    }
    model.faces.resize(f);
    for (auto& face : model.faces)
    {
        std::int32_t idx[3];
        detail::read_ints(in, idx, 3, "faces");
        face = {idx[0], idx[1], idx[2]};
    }
    for (auto& s : model.landmarks.points)
    {
        std::int32_t fi;
        detail::read_ints(in, &fi, 1, "landmark_faces");
        s.face = fi;
    }
    model.landmarks.groups = j.value("landmark_groups", std::vector<std::vector<int>>{});
    validate(model);
    return model;
}

inline void save_texture_model(const TextureModel& model, const std::filesystem::path& path,
                               const std::string& provenance = "")
{
    validate(model);
    nlohmann::json j;
    j["kind"] = "texture";
    j["version"] = 1;
    j["width"] = model.width;
    j["height"] = model.height;
    j["num_components"] = model.dim();
    j["provenance"] = provenance;
    j["arrays"] = {"mean", "basis"};
    {
        std::ofstream js(detail::sidecar_path(path));
        js << j.dump(2) << '\n';
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write("AEARTEX1", 8);
    detail::write_doubles(out, model.mean.data(), static_cast<std::size_t>(model.mean.size()));
    detail::write_doubles(out, model.basis.data(), static_cast<std::size_t>(model.basis.size()));
}

inline TextureModel load_texture_model(const std::filesystem::path& path)
{
    const nlohmann::json j = detail::read_sidecar(path, "texture");
    std::ifstream in = detail::open_container(path, "AEARTEX1");
    TextureModel model;
    model.width = j.at("width").get<int>();
    model.height = j.at("height").get<int>();
    const auto rows = static_cast<Eigen::Index>(model.width) * model.height * 3;
    const auto cols = j.at("num_components").get<Eigen::Index>();
    model.mean.resize(rows);
    model.basis.resize(rows, cols);
    detail::read_doubles(in, model.mean.data(), static_cast<std::size_t>(rows), "mean");
    detail::read_doubles(in, model.basis.data(), static_cast<std::size_t>(rows * cols), "basis");
    validate(model);
    return model;
}

} /* namespace morphable */
} /* namespace audioear */

#endif /* AUDIOEAR_MORPHABLE_MODEL_IO_HPP */
