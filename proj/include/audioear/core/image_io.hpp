/*
 * audioear - personalized 3D ear reconstruction and HRTF simulation.
 *
 * File: include/audioear/core/image_io.hpp
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

#ifndef AUDIOEAR_CORE_IMAGE_IO_HPP
#define AUDIOEAR_CORE_IMAGE_IO_HPP

// Requires linking libpng and libtiff.

#include "audioear/core/image.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace audioear {
namespace core {

/// Writes a 1- or 3-channel image with values in [0,1] as an 8-bit PNG.
inline void save_png(const Image& image, const std::filesystem::path& path)
{
    if (image.channels != 1 && image.channels != 3)
    {
        throw std::invalid_argument("save_png: only gray and RGB images are supported");
    }
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(image.width) * image.channels);
    for (int y = 0; y < image.height; ++y)
    {
        for (int x = 0; x < image.width; ++x)
        {
            for (int c = 0; c < image.channels; ++c)
            {
                const float v = std::clamp(image(x, y, c), 0.0f, 1.0f);
                row[static_cast<std::size_t>(x) * image.channels + c] = static_cast<png_byte>(std::lround(v * 255.0f));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Reads an 8-bit PNG into [0,1] floats (gray, gray+alpha, RGB or RGBA; alpha is dropped).
inline Image load_png(const std::filesystem::path& path)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    {
        throw std::runtime_error("cannot read PNG " + path.string() + ": " + img.message);
    }
    const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
    img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr))
    {
        throw std::runtime_error("cannot decode PNG " + path.string() + ": " + img.message);
    }
    Image out(static_cast<int>(img.width), static_cast<int>(img.height), gray ? 1 : 3);
    for (std::size_t i = 0; i < buffer.size(); ++i)
    {
        out.data[i] = buffer[i] / 255.0f;
    }
    return out;
}

/// Writes a 1-channel float image as a 32-bit IEEE float TIFF (uncompressed, strip per row).
inline void save_float_tiff(const Image& image, const std::filesystem::path& path)
{
    if (image.channels != 1)
    {
        throw std::invalid_argument("save_float_tiff: expected a single-channel image");
    }
    std::unique_ptr<TIFF, void (*)(TIFF*)> tif(TIFFOpen(path.string().c_str(), "w"), &TIFFClose);
    if (!tif)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(image.width));
    TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(image.height));
    TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
    TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, 32);
    TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_IEEEFP);
    TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
    TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, 1);
    std::vector<float> row(static_cast<std::size_t>(image.width));
    for (int y = 0; y < image.height; ++y)
    {
        std::copy_n(image.data.begin() + static_cast<std::ptrdiff_t>(image.index(0, y)), image.width, row.begin());
        if (TIFFWriteScanline(tif.get(), row.data(), static_cast<std::uint32_t>(y), 0) < 0)
        {
            throw std::runtime_error("libtiff failed writing " + path.string());
        }
    }
}

inline Image load_float_tiff(const std::filesystem::path& path)
{
    std::unique_ptr<TIFF, void (*)(TIFF*)> tif(TIFFOpen(path.string().c_str(), "r"), &TIFFClose);
    if (!tif)
    {
        throw std::runtime_error("cannot read TIFF " + path.string());
    }
    std::uint32_t w = 0, h = 0;
    std::uint16_t bits = 0, format = SAMPLEFORMAT_UINT, spp = 1;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    TIFFGetField(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
    if (bits != 32 || format != SAMPLEFORMAT_IEEEFP || spp != 1)
    {
        throw std::runtime_error(path.string() + ": expected a single-channel 32-bit float TIFF");
    }
    Image out(static_cast<int>(w), static_cast<int>(h), 1);
    std::vector<float> row(w);
    for (std::uint32_t y = 0; y < h; ++y)
    {
        if (TIFFReadScanline(tif.get(), row.data(), y, 0) < 0)
        {
            throw std::runtime_error("libtiff failed reading " + path.string());
        }
        std::copy(row.begin(), row.end(), out.data.begin() + static_cast<std::ptrdiff_t>(out.index(0, static_cast<int>(y))));
    }
    return out;
}

/// Portable float map (little-endian, bottom-to-top rows as the format requires).
inline void save_pfm(const Image& image, const std::filesystem::path& path)
{
    if (image.channels != 1 && image.channels != 3)
    {
        throw std::invalid_argument("save_pfm: expected 1 or 3 channels");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << (image.channels == 3 ? "PF" : "Pf") << '\n' << image.width << ' ' << image.height << "\n-1.0\n";
    const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = image.height - 1; y >= 0; --y)
    {
        out.write(reinterpret_cast<const char*>(image.data.data() + image.index(0, y)),
                  static_cast<std::streamsize>(row * sizeof(float)));
    }
}

inline Image load_pfm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    if (!(in >> magic >> w >> h >> scale) || (magic != "PF" && magic != "Pf") || scale >= 0.0)
    {
        throw std::runtime_error(path.string() + ": not a little-endian PFM file");
    }
    in.get();
    Image out(w, h, magic == "PF" ? 3 : 1);
    const std::size_t row = static_cast<std::size_t>(w) * out.channels;
    for (int y = h - 1; y >= 0; --y)
    {
        if (!in.read(reinterpret_cast<char*>(out.data.data() + out.index(0, y)),
                     static_cast<std::streamsize>(row * sizeof(float))))
        {
            throw std::runtime_error(path.string() + ": truncated PFM data");
        }
    }
    return out;
}

} /* namespace core */
} /* namespace audioear */

#endif /* AUDIOEAR_CORE_IMAGE_IO_HPP */
