// Copyright (C) 2026 The emogen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "emogen/codebook.hpp"

namespace emogen {

// Codebook file layout:
//   line 1: JSON header terminated by '\n'
//     {"format":"emogen-codebook","version":1,"num_codes":K,"code_dim":D,
//      "patch_size":P,"blob":["codes","decode_weights","decode_bias"]}
//   rest:   little-endian float32 blob, row-major, sections in "blob" order
//     codes          K x D
//     decode_weights (P*P*3) x D
//     decode_bias    P*P*3
// Values round-trip through float32.

namespace detail {

inline void put_f32_le(std::ostream& os, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff),
                           static_cast<char>((bits >> 24) & 0xff)};
    os.write(bytes, 4);
}

inline std::vector<double> get_f32_le(std::istream& is, std::size_t count, const char* section) {
    std::vector<double> out(count);
    unsigned char b[4];
    for (std::size_t i = 0; i < count; ++i) {
        if (!is.read(reinterpret_cast<char*>(b), 4))
            throw std::runtime_error(std::string("codebook: truncated blob in section ") + section);
        const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                   (static_cast<std::uint32_t>(b[1]) << 8) |
                                   (static_cast<std::uint32_t>(b[2]) << 16) |
                                   (static_cast<std::uint32_t>(b[3]) << 24);
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
}

}  // namespace detail

inline void write_codebook(std::ostream& os, const Codebook& cb) {
    nlohmann::json header = {
        {"format", "emogen-codebook"},
        {"version", 1},
        {"num_codes", cb.num_codes()},
        {"code_dim", cb.code_dim()},
        {"patch_size", cb.patch_size()},
        {"blob", {"codes", "decode_weights", "decode_bias"}},
    };
    os << header.dump() << '\n';
    for (double v : cb.codes()) detail::put_f32_le(os, v);
    for (double v : cb.decode_weights()) detail::put_f32_le(os, v);
    for (double v : cb.decode_bias()) detail::put_f32_le(os, v);
}

inline Codebook read_codebook(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("codebook: missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("codebook: bad header: ") + e.what());
    }
    if (header.value("format", "") != "emogen-codebook")
        throw std::runtime_error("codebook: unrecognized format tag");
    if (header.value("version", 0) != 1) throw std::runtime_error("codebook: unsupported version");
    const int k = header.at("num_codes").get<int>();
    const int d = header.at("code_dim").get<int>();
    const int p = header.at("patch_size").get<int>();
    if (k < 2 || d < 1 || p < 1) throw std::runtime_error("codebook: invalid dimensions in header");
    const auto pv = static_cast<std::size_t>(p) * p * 3;
    auto codes = detail::get_f32_le(is, static_cast<std::size_t>(k) * d, "codes");
    auto weights = detail::get_f32_le(is, pv * d, "decode_weights");
    auto bias = detail::get_f32_le(is, pv, "decode_bias");
    if (is.peek() != std::char_traits<char>::eof())
        throw std::runtime_error("codebook: trailing bytes after blob");
    return Codebook(k, d, p, std::move(codes), std::move(weights), std::move(bias));
}

inline void save_codebook(const std::filesystem::path& path, const Codebook& cb) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("codebook: cannot open " + path.string() + " for writing");
    write_codebook(os, cb);
    if (!os) throw std::runtime_error("codebook: write failed for " + path.string());
}

inline Codebook load_codebook(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("codebook: cannot open " + path.string());
    return read_codebook(is);
}

}  // namespace emogen
