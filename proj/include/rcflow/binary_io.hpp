/*
 * Copyright 2026 The RC-Flow Authors
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

// Little-endian byte helpers shared by the dataset and weight-file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "rcflow/core.hpp"

namespace rcflow::binary
{

using Bytes = std::vector<std::uint8_t>;

template <class UInt>
inline void put_uint(Bytes& out, UInt v)
{
    for (std::size_t b = 0; b < sizeof(UInt); ++b)
    {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
}

inline void put_f64(Bytes& out, double v) { put_uint(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_f32(Bytes& out, float v) { put_uint(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_bytes(Bytes& out, std::string_view s)
{
    out.insert(out.end(), s.begin(), s.end());
}

/// Bounds-checked sequential reader. `what` names the section being read so
/// truncation errors say where the file ended.
class Reader
{
   public:
    explicit Reader(const Bytes& data) : data_(data) {}

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    void need(std::size_t n, std::string_view what) const
    {
        if (remaining() < n)
        {
            throw FormatError("truncated file while reading " + std::string(what)
                              + ": need " + std::to_string(n) + " bytes, have "
                              + std::to_string(remaining()));
        }
    }

    template <class UInt>
    UInt get_uint(std::string_view what)
    {
        need(sizeof(UInt), what);
        UInt v = 0;
        for (std::size_t b = 0; b < sizeof(UInt); ++b)
        {
            v |= static_cast<UInt>(data_[pos_ + b]) << (8 * b);
        }
        pos_ += sizeof(UInt);
        return v;
    }

    double get_f64(std::string_view what)
    {
        return std::bit_cast<double>(get_uint<std::uint64_t>(what));
    }

    float get_f32(std::string_view what)
    {
        return std::bit_cast<float>(get_uint<std::uint32_t>(what));
    }

    std::string get_string(std::size_t n, std::string_view what)
    {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    const std::uint8_t* cursor() const noexcept { return data_.data() + pos_; }
    void skip(std::size_t n, std::string_view what)
    {
        need(n, what);
        pos_ += n;
    }

   private:
    const Bytes& data_;
    std::size_t pos_ = 0;
};

inline Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const Bytes& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
    {
        throw IoError("write failed for " + path.string());
    }
}

/// FNV-1a 64-bit, used as the weight blob checksum.
inline std::uint64_t fnv1a64(const std::uint8_t* p, std::size_t n) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < n; ++i)
    {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace rcflow::binary
