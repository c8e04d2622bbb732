// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cfenv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "emogen/codebook.hpp"

namespace emogen {

/// [0, 1] -> 0..255 with round-half-to-even.
inline std::uint8_t quantize_channel(double v) {
    const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
    // nearbyint honours the current rounding mode; pin it to nearest-even.
    const int saved = std::fegetround();
    std::fesetround(FE_TONEAREST);
    const double q = std::nearbyint(scaled);
    std::fesetround(saved);
    return static_cast<std::uint8_t>(q);
}

inline std::vector<std::uint8_t> to_rgb8(const ImageBuffer& img) {
    std::vector<std::uint8_t> out(img.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize_channel(img.pixels[i]);
    return out;
}

inline std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
    if (img.height < 1 || img.width < 1) throw std::invalid_argument("encode_png: empty image");
    auto rgb = to_rgb8(img);
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr))
        throw std::runtime_error(std::string("encode_png: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr))
        throw std::runtime_error(std::string("encode_png: ") + image.message);
    out.resize(size);
    return out;
}

inline void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
    const auto bytes = encode_png(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_png: cannot open " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write_png: write failed for " + path.string());
}

/// Reads any PNG libpng understands, converted to 8-bit RGB, scaled to [0, 1].
inline ImageBuffer read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw std::runtime_error("read_png: " + path.string() + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
        png_image_free(&image);
        throw std::runtime_error("read_png: " + path.string() + ": " + image.message);
    }
    ImageBuffer img(static_cast<int>(image.height), static_cast<int>(image.width));
    for (std::size_t i = 0; i < rgb.size(); ++i) img.pixels[i] = rgb[i] / 255.0;
    return img;
}

}  // namespace emogen
