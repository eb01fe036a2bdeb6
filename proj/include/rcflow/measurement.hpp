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

// Pilots, the forward model Y = HP + N, and SNR conventions.

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "rcflow/core.hpp"
#include "rcflow/rng.hpp"

namespace rcflow
{

/// N_t x N_p matrix of unit-modulus QPSK symbols.
class PilotMatrix
{
   public:
    explicit PilotMatrix(ComplexMatrix m) : m_(std::move(m))
    {
        for (const auto& z : m_.data())
        {
            if (std::abs(std::abs(z) - 1.0) > 1e-12)
            {
                throw ContractError("PilotMatrix: entry is not unit modulus");
            }
            // phase must sit on an odd multiple of pi/4
            const double q = std::arg(z) / (std::numbers::pi / 4.0);
            const double odd = std::round((q - 1.0) / 2.0) * 2.0 + 1.0;
            if (std::abs(q - odd) > 1e-9)
            {
                throw ContractError("PilotMatrix: entry phase is not a QPSK phase");
            }
        }
    }

    const ComplexMatrix& matrix() const noexcept { return m_; }
    std::size_t n_t() const noexcept { return m_.rows(); }
    std::size_t n_p() const noexcept { return m_.cols(); }

   private:
    ComplexMatrix m_;
};

struct Measurement
{
    ComplexMatrix y;  // N_r x N_p
    PilotMatrix pilots;
    double sigma_pilot = 0.0;  // per-entry complex noise std dev

    SystemDims dims() const { return {y.rows(), pilots.n_t(), pilots.n_p()}; }
};

inline PilotMatrix generate_pilots(const SystemDims& dims, Rng& rng)
{
    dims.validate();
    ComplexMatrix p(dims.n_t, dims.n_p);
    for (auto& z : p.data())
    {
        const auto k = static_cast<double>(rng.below(4));
        z = std::polar(1.0, std::numbers::pi / 4.0 + k * std::numbers::pi / 2.0);
    }
    return PilotMatrix(std::move(p));
}

inline Measurement observe(const ChannelMatrix& h, const PilotMatrix& p, double sigma_pilot,
                           Rng& rng)
{
    if (h.cols() != p.n_t())
    {
        throw DimensionError("observe: channel has " + std::to_string(h.cols())
                             + " columns but pilots have " + std::to_string(p.n_t())
                             + " rows");
    }
    require(sigma_pilot >= 0.0 && std::isfinite(sigma_pilot),
            "observe: sigma_pilot must be finite and >= 0");
    auto y = matmul(h, p.matrix());
    if (sigma_pilot > 0.0)
    {
        y += complex_gaussian(y.rows(), y.cols(), sigma_pilot * sigma_pilot, rng);
    }
    return {std::move(y), p, sigma_pilot};
}

enum class SnrConvention
{
    // Noise added directly to a unit-power H: sigma^2 = 10^(-SNR/10).
    ChannelDomain,
    // Noise on Y = HP + N with unit-modulus pilots and unit-power H, where the
    // per-entry signal power of HP is N_t: sigma^2 = N_t 10^(-SNR/10).
    PilotDomain,
};

inline double snr_to_sigma(double snr_db, SnrConvention convention, std::size_t n_t = 1)
{
    const double base = std::pow(10.0, -snr_db / 20.0);
    if (convention == SnrConvention::ChannelDomain)
    {
        return base;
    }
    require(n_t > 0, "snr_to_sigma: n_t must be positive");
    return base * std::sqrt(static_cast<double>(n_t));
}

inline std::string_view to_string(SnrConvention c)
{
    return c == SnrConvention::ChannelDomain ? "channel" : "pilot";
}

inline SnrConvention parse_snr_convention(std::string_view s)
{
    if (s == "channel")
    {
        return SnrConvention::ChannelDomain;
    }
    if (s == "pilot")
    {
        return SnrConvention::PilotDomain;
    }
    throw ContractError("unknown SNR convention '" + std::string(s)
                        + "' (expected 'channel' or 'pilot')");
}

}  // namespace rcflow
