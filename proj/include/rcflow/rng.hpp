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

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "rcflow/core.hpp"

namespace rcflow
{

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/**
 * xoshiro256** seeded through splitmix64.
 *
 * The integer stream is identical on every platform. Uniform doubles take the
 * top 53 bits; normals use the Box-Muller transform so that no
 * implementation-defined std:: distribution is involved.
 */
class Rng
{
   public:
    explicit Rng(std::uint64_t seed) noexcept : seed_(seed)
    {
        std::uint64_t sm = seed;
        for (auto& s : state_)
        {
            s = splitmix64(sm);
        }
    }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept
    {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() noexcept
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept
    {
        // Lemire's multiply-shift; bias is < n / 2^64 and irrelevant here.
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal.
    double normal() noexcept
    {
        if (has_spare_)
        {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

   private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Independent stream seed for (seed, label, index). Used to give each
/// sample or trial its own generator regardless of execution order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::uint64_t index = 0) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a over the label
    for (const char c : label)
    {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    std::uint64_t s = seed ^ h;
    splitmix64(s);
    s ^= index * 0xD1B54A32D192ED03ULL;
    return splitmix64(s);
}

/// I.i.d. circularly-symmetric CN(0, variance) entries.
inline ComplexMatrix complex_gaussian(std::size_t rows, std::size_t cols,
                                      double variance, Rng& rng)
{
    if (!(variance > 0.0) || !std::isfinite(variance))
    {
        throw ContractError("complex_gaussian: variance must be positive and finite");
    }
    const double sd = std::sqrt(variance / 2.0);
    ComplexMatrix m(rows, cols);
    for (auto& z : m.data())
    {
        const double re = rng.normal();
        const double im = rng.normal();
        z = cplx{sd * re, sd * im};
    }
    return m;
}

}  // namespace rcflow
