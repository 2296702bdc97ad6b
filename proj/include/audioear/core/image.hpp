/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/core/image.hpp
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

#ifndef AUDIOEAR_CORE_IMAGE_HPP
#define AUDIOEAR_CORE_IMAGE_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace audioear {
namespace core {

/// Row-major float image with interleaved channels; (0,0) is the top-left pixel.
struct Image
{
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int width, int height, int channels, float fill = 0.0f)
        : width(width), height(height), channels(channels),
          data(static_cast<std::size_t>(width) * height * channels, fill)
    {
        if (width < 0 || height < 0 || channels < 1)
        {
            throw std::invalid_argument("Image: invalid dimensions");
        }
    }

    std::size_t index(int x, int y, int c = 0) const
    {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float& operator()(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    float operator()(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    bool same_shape(const Image& other) const
    {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

} /* namespace core */
} /* namespace audioear */

#endif /* AUDIOEAR_CORE_IMAGE_HPP */
