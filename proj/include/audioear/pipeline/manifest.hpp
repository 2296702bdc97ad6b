/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/pipeline/manifest.hpp
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

#ifndef AUDIOEAR_PIPELINE_MANIFEST_HPP
#define AUDIOEAR_PIPELINE_MANIFEST_HPP

#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace pipeline {

inline constexpr const char* tool_version = "0.1.0";

/// Lower-case hex SHA-256 of a byte string.
inline std::string sha256_hex(const std::string& bytes)
{
    std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    {
        throw std::runtime_error("sha256: digest failed");
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i)
    {
        out += digits[md[i] >> 4];
        out += digits[md[i] & 15];
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw std::runtime_error("cannot read " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size())))
    {
        throw std::runtime_error("cannot write " + path.string());
    }
}

/**
 * Record of one command run: what went in, how long each stage took, and a
 * content hash for every file written.
 */
struct RunManifest
{
    std::string command;
    std::string config_sha256;
    nlohmann::json inputs = nlohmann::json::object();  ///< path -> sha256
    nlohmann::json stages = nlohmann::json::array();   ///< {name, seconds}
    nlohmann::json outputs = nlohmann::json::object(); ///< relative path -> sha256

    void add_input(const std::filesystem::path& path) { inputs[path.generic_string()] = sha256_file(path); }

    void add_stage(const std::string& name, double seconds) { stages.push_back({{"name", name}, {"seconds", seconds}}); }
};

inline nlohmann::json to_json(const RunManifest& m)
{
    return {{"tool", "audioear"},     {"version", tool_version}, {"command", m.command},
            {"config_sha256", m.config_sha256}, {"inputs", m.inputs}, {"stages", m.stages},
            {"outputs", m.outputs}};
}

/// Wall-clock timer for manifest stages.
class StageTimer
{
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

/**
 * Scratch directory inside the output directory. Nothing appears in the
 * output directory until commit(); an uncommitted staging area is removed on
 * destruction.
 */
class Staging
{
public:
    explicit Staging(std::filesystem::path out_dir) : out_(std::move(out_dir))
    {
        std::filesystem::create_directories(out_);
        std::random_device rd;
        dir_ = out_ / (".staging-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(dir_);
    }
    ~Staging()
    {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    Staging(const Staging&) = delete;
    Staging& operator=(const Staging&) = delete;

    const std::filesystem::path& path() const { return dir_; }
    std::filesystem::path operator/(const std::string& rel) const { return dir_ / rel; }

    /// Every regular file under the staging area, as sorted relative paths.
    std::vector<std::filesystem::path> files() const
    {
        std::vector<std::filesystem::path> out;
        for (const auto& e : std::filesystem::recursive_directory_iterator(dir_))
        {
            if (e.is_regular_file())
            {
                out.push_back(std::filesystem::relative(e.path(), dir_));
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Moves each top-level entry into the output directory, replacing what was there.
    void commit()
    {
        std::vector<std::filesystem::path> entries;
        for (const auto& e : std::filesystem::directory_iterator(dir_))
        {
            entries.push_back(e.path());
        }
        for (const auto& src : entries)
        {
            const auto dst = out_ / src.filename();
            std::filesystem::remove_all(dst);
            std::filesystem::rename(src, dst);
        }
    }

private:
    std::filesystem::path out_;
    std::filesystem::path dir_;
};

} /* namespace pipeline */
} /* namespace audioear */

#endif /* AUDIOEAR_PIPELINE_MANIFEST_HPP */
