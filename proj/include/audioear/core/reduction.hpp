/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/core/reduction.hpp
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

#ifndef AUDIOEAR_CORE_REDUCTION_HPP
#define AUDIOEAR_CORE_REDUCTION_HPP

#include <cstddef>
#include <span>

namespace audioear {
namespace core {

/**
 * Pairwise (tree) summation. The reduction order depends only on the length of
 * the input, so per-element results computed in parallel reduce to bitwise
 * identical totals regardless of thread count.
 */
inline double pairwise_sum(std::span<const double> values)
{
    constexpr std::size_t leaf = 8;
    if (values.size() <= leaf)
    {
        double s = 0.0;
        for (double v : values)
        {
            s += v;
        }
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double pairwise_mean(std::span<const double> values)
{
    return values.empty() ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size());
}

} /* namespace core */
} /* namespace audioear */

#endif /* AUDIOEAR_CORE_REDUCTION_HPP */
