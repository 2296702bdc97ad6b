/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/core/mesh_io.hpp
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

#ifndef AUDIOEAR_CORE_MESH_IO_HPP
#define AUDIOEAR_CORE_MESH_IO_HPP

#include "audioear/core/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace core {

/// Malformed input file. `line()` is the 1-based line (or element record) where parsing failed.
class ParseError : public std::runtime_error
{
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct MeshReadOptions
{
    /// Fan-triangulate polygons with more than three corners; otherwise they are a parse error.
    bool triangulate_polygons = true;
};

enum class PlyEncoding { ascii, binary_little_endian };

namespace detail {

inline std::string lower_extension(const std::filesystem::path& path)
{
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

inline void add_polygon(TriMesh& mesh, const std::vector<int>& poly, const MeshReadOptions& options,
                        const std::string& file, std::size_t line)
{
    if (poly.size() < 3)
    {
        throw ParseError(file, line, "face with fewer than 3 vertices");
    }
    if (poly.size() > 3 && !options.triangulate_polygons)
    {
        throw ParseError(file, line, "non-triangular face (" + std::to_string(poly.size()) + " vertices)");
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k)
    {
        mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
}

inline void check_indices(const TriMesh& mesh, const std::vector<std::size_t>& face_lines, const std::string& file)
{
    const auto n = static_cast<int>(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.faces.size(); ++i)
    {
        for (int idx : mesh.faces[i])
        {
            if (idx < 0 || idx >= n)
            {
                throw ParseError(file, face_lines[i], "vertex index " + std::to_string(idx) + " out of range");
            }
        }
    }
}

inline TriMesh read_obj(const std::filesystem::path& path, const MeshReadOptions& options)
{
    std::ifstream in(path);
    if (!in)
    {
        throw std::runtime_error("cannot open " + path.string());
    }
    const std::string file = path.string();
    TriMesh mesh;
    std::vector<Vec2> texcoords;
    std::vector<std::size_t> face_lines;
    bool vt_matches_v = true;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#')
        {
            continue;
        }
        if (tag == "v")
        {
            Vec3 v;
            if (!(ss >> v.x() >> v.y() >> v.z()))
            {
                throw ParseError(file, lineno, "malformed vertex");
            }
            mesh.vertices.push_back(v);
        } else if (tag == "vt")
        {
            Vec2 t;
            if (!(ss >> t.x() >> t.y()))
            {
                throw ParseError(file, lineno, "malformed texture coordinate");
            }
            texcoords.push_back(t);
        } else if (tag == "f")
        {
            std::vector<int> poly;
            std::string tok;
            while (ss >> tok)
            {
                const auto slash = tok.find('/');
                int vi = 0;
                try
                {
                    vi = std::stoi(tok.substr(0, slash));
                } catch (const std::exception&)
                {
                    throw ParseError(file, lineno, "malformed face index '" + tok + "'");
                }
                vi = vi < 0 ? static_cast<int>(mesh.vertices.size()) + vi : vi - 1;
                if (slash != std::string::npos && slash + 1 < tok.size() && tok[slash + 1] != '/')
                {
                    const auto second = tok.find('/', slash + 1);
                    const int ti = std::stoi(tok.substr(slash + 1, second - slash - 1)) - 1;
                    if (ti != vi)
                    {
                        vt_matches_v = false;
                    }
                }
                poly.push_back(vi);
            }
            add_polygon(mesh, poly, options, file, lineno);
            face_lines.resize(mesh.faces.size(), lineno);
        }
    }
    check_indices(mesh, face_lines, file);
    if (vt_matches_v && !texcoords.empty() && texcoords.size() == mesh.vertices.size())
    {
        mesh.uv = std::move(texcoords);
    }
    return mesh;
}

inline void write_obj(const TriMesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << std::setprecision(17);
    for (const Vec3& v : mesh.vertices)
    {
        out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const Vec2& t : mesh.uv)
    {
        out << "vt " << t.x() << ' ' << t.y() << '\n';
    }
    for (const Face& f : mesh.faces)
    {
        out << 'f';
        for (int i : f)
        {
            out << ' ' << i + 1;
            if (mesh.has_uv())
            {
                out << '/' << i + 1;
            }
        }
        out << '\n';
    }
}

struct PlyProperty
{
    std::string name;
    std::string type;       // scalar type, or list item type
    std::string count_type; // non-empty for list properties
};

struct PlyElement
{
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

inline std::size_t ply_type_size(const std::string& t)
{
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

template <typename T>
T load_le(const char* p)
{
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

inline double ply_binary_value(const std::string& t, const char* p)
{
    if (t == "char" || t == "int8") return load_le<std::int8_t>(p);
    if (t == "uchar" || t == "uint8") return load_le<std::uint8_t>(p);
    if (t == "short" || t == "int16") return load_le<std::int16_t>(p);
    if (t == "ushort" || t == "uint16") return load_le<std::uint16_t>(p);
    if (t == "int" || t == "int32") return load_le<std::int32_t>(p);
    if (t == "uint" || t == "uint32") return load_le<std::uint32_t>(p);
    if (t == "float" || t == "float32") return load_le<float>(p);
    return load_le<double>(p);
}

struct PlyData
{
    TriMesh mesh;
    std::vector<Eigen::Vector3f> colors;
};

inline PlyData read_ply(const std::filesystem::path& path, const MeshReadOptions& options)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw std::runtime_error("cannot open " + path.string());
    }
    const std::string file = path.string();
    std::string line;
    std::size_t lineno = 0;
    std::getline(in, line);
    ++lineno;
    if (line.rfind("ply", 0) != 0)
    {
        throw ParseError(file, lineno, "missing 'ply' magic");
    }
    std::vector<PlyElement> elements;
    bool binary = false;
    while (std::getline(in, line))
    {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "format")
        {
            std::string fmt;
            ss >> fmt;
            if (fmt == "binary_little_endian")
            {
                binary = true;
            } else if (fmt != "ascii")
            {
                throw ParseError(file, lineno, "unsupported PLY format '" + fmt + "'");
            }
        } else if (tag == "element")
        {
            PlyElement e;
            if (!(ss >> e.name >> e.count))
            {
                throw ParseError(file, lineno, "malformed element declaration");
            }
            elements.push_back(e);
        } else if (tag == "property")
        {
            if (elements.empty())
            {
                throw ParseError(file, lineno, "property before any element");
            }
            PlyProperty p;
            std::string t;
            ss >> t;
            if (t == "list")
            {
                ss >> p.count_type >> p.type >> p.name;
            } else
            {
                p.type = t;
                ss >> p.name;
            }
            if (ply_type_size(p.type) == 0 || (!p.count_type.empty() && ply_type_size(p.count_type) == 0))
            {
                throw ParseError(file, lineno, "unknown PLY property type");
            }
            elements.back().properties.push_back(p);
        } else if (tag == "end_header")
        {
            break;
        }
    }

    PlyData data;
    std::vector<std::size_t> face_lines;
    for (const PlyElement& e : elements)
    {
        const bool is_vertex = e.name == "vertex";
        const bool is_face = e.name == "face";
        for (std::size_t r = 0; r < e.count; ++r)
        {
            std::vector<double> scalars(e.properties.size(), 0.0);
            std::vector<int> list;
            std::istringstream ss;
            if (!binary)
            {
                if (!std::getline(in, line))
                {
                    throw ParseError(file, lineno + 1, "unexpected end of file in element '" + e.name + "'");
                }
                ++lineno;
                ss.str(line);
            }
            const std::size_t record = binary ? r + 1 : lineno;
            for (std::size_t pi = 0; pi < e.properties.size(); ++pi)
            {
                const PlyProperty& p = e.properties[pi];
                const auto read_one = [&](const std::string& type) -> double {
                    if (binary)
                    {
                        char buf[8];
                        if (!in.read(buf, static_cast<std::streamsize>(ply_type_size(type))))
                        {
                            throw ParseError(file, record, "unexpected end of binary data in element '" + e.name + "'");
                        }
                        return ply_binary_value(type, buf);
                    }
                    double v;
                    if (!(ss >> v))
                    {
                        throw ParseError(file, record, "malformed value in element '" + e.name + "'");
                    }
                    return v;
                };
                if (p.count_type.empty())
                {
                    scalars[pi] = read_one(p.type);
                } else
                {
                    const auto n = static_cast<std::size_t>(read_one(p.count_type));
                    std::vector<int> items(n);
                    for (std::size_t k = 0; k < n; ++k)
                    {
                        items[k] = static_cast<int>(read_one(p.type));
                    }
                    if (p.name == "vertex_indices" || p.name == "vertex_index")
                    {
                        list = std::move(items);
                    }
                }
            }
            if (is_vertex)
            {
                Vec3 v = Vec3::Zero();
                Eigen::Vector3f c = Eigen::Vector3f::Zero();
                Vec2 t = Vec2::Zero();
                bool has_c = false, has_t = false;
                for (std::size_t pi = 0; pi < e.properties.size(); ++pi)
                {
                    const std::string& n = e.properties[pi].name;
                    const double s = scalars[pi];
                    const bool byte_color = ply_type_size(e.properties[pi].type) == 1;
                    if (n == "x") v.x() = s;
                    else if (n == "y") v.y() = s;
                    else if (n == "z") v.z() = s;
                    else if (n == "red") { c.x() = static_cast<float>(byte_color ? s / 255.0 : s); has_c = true; }
                    else if (n == "green") { c.y() = static_cast<float>(byte_color ? s / 255.0 : s); has_c = true; }
                    else if (n == "blue") { c.z() = static_cast<float>(byte_color ? s / 255.0 : s); has_c = true; }
                    else if (n == "u" || n == "s" || n == "texture_u") { t.x() = s; has_t = true; }
                    else if (n == "v" || n == "t" || n == "texture_v") { t.y() = s; has_t = true; }
                }
                data.mesh.vertices.push_back(v);
                if (has_c) data.colors.push_back(c);
                if (has_t) data.mesh.uv.push_back(t);
            } else if (is_face)
            {
                add_polygon(data.mesh, list, options, file, record);
                face_lines.resize(data.mesh.faces.size(), record);
            }
        }
    }
    check_indices(data.mesh, face_lines, file);
    return data;
}

inline void write_ply(const std::vector<Vec3>& points, const std::vector<Face>& faces, const std::vector<Vec2>& uv,
                      const std::vector<Eigen::Vector3f>& colors, const std::filesystem::path& path,
                      PlyEncoding encoding)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    const bool binary = encoding == PlyEncoding::binary_little_endian;
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
    out << "element vertex " << points.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (!uv.empty())
    {
        out << "property double u\nproperty double v\n";
    }
    if (!colors.empty())
    {
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    }
    if (!faces.empty())
    {
        out << "element face " << faces.size() << "\nproperty list uchar int vertex_indices\n";
    }
    out << "end_header\n";
    const auto to_byte = [](float c) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(c * 255.0f), 0l, 255l));
    };
    out << std::setprecision(17);
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        if (binary)
        {
            out.write(reinterpret_cast<const char*>(points[i].data()), 3 * sizeof(double));
            if (!uv.empty())
            {
                out.write(reinterpret_cast<const char*>(uv[i].data()), 2 * sizeof(double));
            }
            if (!colors.empty())
            {
                const std::uint8_t rgb[3] = {to_byte(colors[i].x()), to_byte(colors[i].y()), to_byte(colors[i].z())};
                out.write(reinterpret_cast<const char*>(rgb), 3);
            }
        } else
        {
            out << points[i].x() << ' ' << points[i].y() << ' ' << points[i].z();
            if (!uv.empty())
            {
                out << ' ' << uv[i].x() << ' ' << uv[i].y();
            }
            if (!colors.empty())
            {
                out << ' ' << int(to_byte(colors[i].x())) << ' ' << int(to_byte(colors[i].y())) << ' '
                    << int(to_byte(colors[i].z()));
            }
            out << '\n';
        }
    }
    for (const Face& f : faces)
    {
        if (binary)
        {
            const std::uint8_t n = 3;
            out.write(reinterpret_cast<const char*>(&n), 1);
            out.write(reinterpret_cast<const char*>(f.data()), 3 * sizeof(int));
        } else
        {
            out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
        }
    }
}

} /* namespace detail */

/// Loads an OBJ or PLY mesh; the format is chosen from the file extension.
inline TriMesh load_mesh(const std::filesystem::path& path, const MeshReadOptions& options = {})
{
    const std::string ext = detail::lower_extension(path);
    if (ext == ".obj")
    {
        return detail::read_obj(path, options);
    }
    if (ext == ".ply")
    {
        return detail::read_ply(path, options).mesh;
    }
    throw std::invalid_argument("unsupported mesh format '" + ext + "' (expected .obj or .ply)");
}

/// Saves a mesh as OBJ or PLY (by extension). PLY is written as binary little-endian unless requested otherwise.
inline void save_mesh(const TriMesh& mesh, const std::filesystem::path& path,
                      PlyEncoding encoding = PlyEncoding::binary_little_endian)
{
    const std::string ext = detail::lower_extension(path);
    if (ext == ".obj")
    {
        detail::write_obj(mesh, path);
    } else if (ext == ".ply")
    {
        detail::write_ply(mesh.vertices, mesh.faces, mesh.uv, {}, path, encoding);
    } else
    {
        throw std::invalid_argument("unsupported mesh format '" + ext + "' (expected .obj or .ply)");
    }
}

/// Loads the vertices (and colours, if any) of a PLY file as a point cloud. Faces are ignored.
inline PointCloud load_point_cloud(const std::filesystem::path& path)
{
    if (detail::lower_extension(path) != ".ply")
    {
        throw std::invalid_argument("point clouds must be PLY files: " + path.string());
    }
    auto data = detail::read_ply(path, {});
    PointCloud cloud;
    cloud.points = std::move(data.mesh.vertices);
    if (data.colors.size() == cloud.points.size())
    {
        cloud.colors = std::move(data.colors);
    }
    return cloud;
}

inline void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                             PlyEncoding encoding = PlyEncoding::binary_little_endian)
{
    detail::write_ply(cloud.points, {}, {}, cloud.colors, path, encoding);
}

} /* namespace core */
} /* namespace audioear */

#endif /* AUDIOEAR_CORE_MESH_IO_HPP */
