/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/core/random.hpp
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

#ifndef AUDIOEAR_CORE_RANDOM_HPP
#define AUDIOEAR_CORE_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace audioear {
namespace core {

/**
 * Reproducible random stream: a 64-bit Mersenne Twister (std::mt19937_64)
 * with explicitly defined conversions. Uniforms take the top 53 bits of one
 * draw; normals use the Box-Muller transform and cache the second variate.
 * Unlike the std distributions, the output is identical across standard
 * library implementations.
 *
 * Independent streams for the same seed are derived with fork(stream_id).
 */
class Random
{
public:
    explicit Random(std::uint64_t seed) : engine(seed), seed_(seed) {}

    std::uint64_t next_u64() { return engine(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
        std::uint64_t x = engine();
        while (x >= limit)
        {
            x = engine();
        }
        return x % n;
    }

    double normal()
    {
        if (has_spare)
        {
            has_spare = false;
            return spare;
        }
        double u1 = uniform();
        while (u1 <= 0.0)
        {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        spare = r * std::sin(phi);
        has_spare = true;
        return r * std::cos(phi);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    /// A new stream that depends only on this stream's seed and the id (SplitMix64 mixing).
    Random fork(std::uint64_t stream_id) const
    {
        std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * (stream_id + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Random(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine;
    std::uint64_t seed_;
    double spare = 0.0;
    bool has_spare = false;
};

} /* namespace core */
} /* namespace audioear */

#endif /* AUDIOEAR_CORE_RANDOM_HPP */
