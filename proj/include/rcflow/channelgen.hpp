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

// Synthetic MIMO channel generators and the dataset file format.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rcflow/binary_io.hpp"
#include "rcflow/core.hpp"
#include "rcflow/linalg.hpp"
#include "rcflow/rng.hpp"

namespace rcflow
{

/**
 * Rows of H drawn i.i.d. CN(mean_row, row_cov), where row_cov = E[h^H h] is
 * the N_t x N_t transmit-side covariance. Under this model the LMMSE
 * estimator is the exact posterior mean.
 */
struct GaussianChannelModel
{
    SystemDims dims;
    ComplexMatrix row_cov;
    ComplexMatrix mean;  // N_r x N_t; empty means zero

    void validate() const
    {
        dims.validate();
        if (row_cov.rows() != dims.n_t || row_cov.cols() != dims.n_t)
        {
            throw DimensionError("GaussianChannelModel: row_cov must be n_t x n_t");
        }
        if (!mean.empty() && (mean.rows() != dims.n_r || mean.cols() != dims.n_t))
        {
            throw DimensionError("GaussianChannelModel: mean must be n_r x n_t");
        }
        if (!is_hermitian(row_cov))
        {
            throw ContractError("GaussianChannelModel: row_cov is not Hermitian");
        }
        const auto evd = hermitian_evd(row_cov);
        if (!evd.lambda.empty() && evd.lambda.back() < -1e-12)
        {
            throw ContractError("GaussianChannelModel: row_cov is not PSD (min eigenvalue "
                                + std::to_string(evd.lambda.back()) + ")");
        }
    }

    /// i.i.d. unit-power entries.
    static GaussianChannelModel iid(SystemDims dims)
    {
        return {dims, ComplexMatrix::identity(dims.n_t), {}};
    }

    /// Exponential transmit correlation R[a][b] = rho^|a-b|, unit diagonal.
    static GaussianChannelModel exponential(SystemDims dims, double rho)
    {
        require(rho >= 0.0 && rho < 1.0, "exponential correlation needs rho in [0, 1)");
        ComplexMatrix r(dims.n_t, dims.n_t);
        for (std::size_t a = 0; a < dims.n_t; ++a)
        {
            for (std::size_t b = 0; b < dims.n_t; ++b)
            {
                const auto gap = a > b ? a - b : b - a;
                r(a, b) = std::pow(rho, static_cast<double>(gap));
            }
        }
        return {dims, std::move(r), {}};
    }
};

/// Geometric few-path model with half-wavelength ULAs at both ends.
struct ClusteredChannelModel
{
    SystemDims dims;
    std::size_t n_paths = 1;
    // Path angles are drawn within +-angle_spread/2 of a per-sample cluster
    // centre that is uniform on [-pi/2, pi/2]. A spread >= pi gives fully
    // independent uniform angles.
    double angle_spread = std::numbers::pi;

    void validate() const
    {
        dims.validate();
        require(n_paths >= 1, "ClusteredChannelModel: n_paths must be >= 1");
        require(angle_spread >= 0.0, "ClusteredChannelModel: angle_spread must be >= 0");
    }
};

struct Dataset
{
    std::size_t n_r = 0;
    std::size_t n_t = 0;
    nlohmann::json model = nlohmann::json::object();
    std::vector<ChannelMatrix> samples;
    bool normalized = false;

    double mean_entry_power() const
    {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& h : samples)
        {
            s += frobenius_norm_sq(h);
            n += h.size();
        }
        return n == 0 ? 0.0 : s / static_cast<double>(n);
    }
};

inline nlohmann::json describe(const GaussianChannelModel& m)
{
    nlohmann::json cov = nlohmann::json::array();
    for (const auto& z : m.row_cov.data())
    {
        cov.push_back({z.real(), z.imag()});
    }
    return {{"kind", "gaussian"}, {"n_r", m.dims.n_r}, {"n_t", m.dims.n_t},
            {"row_cov", cov}, {"zero_mean", m.mean.empty()}};
}

inline nlohmann::json describe(const ClusteredChannelModel& m)
{
    return {{"kind", "clustered"},
            {"n_r", m.dims.n_r},
            {"n_t", m.dims.n_t},
            {"n_paths", m.n_paths},
            {"angle_spread", m.angle_spread}};
}

/// Rescales every sample so the dataset mean |h_ij|^2 is one.
inline void normalize(Dataset& ds)
{
    const double p = ds.mean_entry_power();
    if (p > 0.0)
    {
        const double g = 1.0 / std::sqrt(p);
        for (auto& h : ds.samples)
        {
            h *= g;
        }
    }
    ds.normalized = true;
}

inline Dataset sample_gaussian(const GaussianChannelModel& model, std::size_t n, Rng& rng,
                               bool normalize_power = false)
{
    model.validate();
    const auto root = psd_sqrt(model.row_cov);
    const auto base = rng.next_u64();
    Dataset ds{model.dims.n_r, model.dims.n_t, describe(model), {}, false};
    ds.samples.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
    {
        Rng local(derive_seed(base, "gaussian-sample", s));
        auto z = complex_gaussian(model.dims.n_r, model.dims.n_t, 1.0, local);
        auto h = matmul(z, root);
        if (!model.mean.empty())
        {
            h += model.mean;
        }
        ds.samples.push_back(std::move(h));
    }
    if (normalize_power)
    {
        normalize(ds);
    }
    return ds;
}

/// Unit-norm half-wavelength ULA response exp(j pi n sin(theta)) / sqrt(N).
inline std::vector<cplx> ula_steering(std::size_t n, double theta)
{
    std::vector<cplx> a(n);
    const double inv = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k)
    {
        const double phase = std::numbers::pi * static_cast<double>(k) * std::sin(theta);
        a[k] = std::polar(inv, phase);
    }
    return a;
}

/// H = sqrt(N_t N_r / L) sum_l g_l a_r(theta_l) a_t(phi_l)^H, then the
/// dataset is normalized to unit mean entry power.
inline Dataset sample_clustered(const ClusteredChannelModel& model, std::size_t n, Rng& rng)
{
    model.validate();
    const auto& d = model.dims;
    const double gain =
        std::sqrt(static_cast<double>(d.n_r * d.n_t) / static_cast<double>(model.n_paths));
    const auto base = rng.next_u64();
    constexpr double half_pi = std::numbers::pi / 2.0;

    Dataset ds{d.n_r, d.n_t, describe(model), {}, false};
    ds.samples.reserve(n);
    for (std::size_t s = 0; s < n; ++s)
    {
        Rng local(derive_seed(base, "clustered-sample", s));
        auto draw_angle = [&](double centre) {
            if (model.angle_spread >= std::numbers::pi)
            {
                return local.uniform(-half_pi, half_pi);
            }
            return centre + local.uniform(-0.5, 0.5) * model.angle_spread;
        };
        const double rx_centre = local.uniform(-half_pi, half_pi);
        const double tx_centre = local.uniform(-half_pi, half_pi);

        ChannelMatrix h(d.n_r, d.n_t);
        for (std::size_t l = 0; l < model.n_paths; ++l)
        {
            const cplx g{local.normal() / std::numbers::sqrt2,
                         local.normal() / std::numbers::sqrt2};
            const auto ar = ula_steering(d.n_r, draw_angle(rx_centre));
            const auto at = ula_steering(d.n_t, draw_angle(tx_centre));
            for (std::size_t i = 0; i < d.n_r; ++i)
            {
                for (std::size_t j = 0; j < d.n_t; ++j)
                {
                    h(i, j) += gain * g * ar[i] * std::conj(at[j]);
                }
            }
        }
        ds.samples.push_back(std::move(h));
    }
    normalize(ds);
    return ds;
}

/// Sample transmit-side covariance (1 / (count * n_r)) sum_s sum_rows h^H h.
inline ComplexMatrix empirical_row_covariance(const Dataset& ds)
{
    require(!ds.samples.empty(), "empirical_row_covariance: empty dataset");
    ComplexMatrix r(ds.n_t, ds.n_t);
    for (const auto& h : ds.samples)
    {
        for (std::size_t i = 0; i < h.rows(); ++i)
        {
            for (std::size_t a = 0; a < ds.n_t; ++a)
            {
                const cplx ca = std::conj(h(i, a));
                for (std::size_t b = 0; b < ds.n_t; ++b)
                {
                    r(a, b) += ca * h(i, b);
                }
            }
        }
    }
    r *= 1.0 / static_cast<double>(ds.samples.size() * ds.n_r);
    return r;
}

// "RCFLOWDS" + seven zero bytes + version byte.
inline constexpr std::uint8_t kDatasetVersion = 1;
inline constexpr char kDatasetMagic[15] = {'R', 'C', 'F', 'L', 'O', 'W', 'D', 'S',
                                           0,   0,   0,   0,   0,   0,   0};

inline binary::Bytes encode_dataset(const Dataset& ds)
{
    binary::Bytes out;
    out.insert(out.end(), std::begin(kDatasetMagic), std::end(kDatasetMagic));
    out.push_back(kDatasetVersion);
    const nlohmann::json header = {{"format", "rcflow-dataset"},
                                   {"n_r", ds.n_r},
                                   {"n_t", ds.n_t},
                                   {"count", ds.samples.size()},
                                   {"normalized", ds.normalized},
                                   {"model", ds.model}};
    const auto text = header.dump();
    binary::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    binary::put_bytes(out, text);
    out.reserve(out.size() + ds.samples.size() * ds.n_r * ds.n_t * 16);
    for (const auto& h : ds.samples)
    {
        if (h.rows() != ds.n_r || h.cols() != ds.n_t)
        {
            throw DimensionError("save_dataset: sample shape differs from dataset dims");
        }
        for (const auto& z : h.data())
        {
            binary::put_f64(out, z.real());
            binary::put_f64(out, z.imag());
        }
    }
    return out;
}

inline Dataset decode_dataset(const binary::Bytes& bytes)
{
    binary::Reader rd(bytes);
    rd.need(16, "dataset magic");
    if (std::memcmp(rd.cursor(), kDatasetMagic, sizeof(kDatasetMagic)) != 0)
    {
        throw FormatError("not an RC-Flow dataset file (bad magic)");
    }
    rd.skip(15, "dataset magic");
    const auto version = rd.get_uint<std::uint8_t>("dataset version");
    if (version != kDatasetVersion)
    {
        throw FormatError("dataset version mismatch: file has " + std::to_string(version)
                          + ", expected " + std::to_string(kDatasetVersion));
    }
    const auto len = rd.get_uint<std::uint32_t>("dataset header length");
    nlohmann::json header;
    try
    {
        header = nlohmann::json::parse(rd.get_string(len, "dataset header"));
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("dataset header is not valid JSON: ") + e.what());
    }
    Dataset ds;
    std::size_t count = 0;
    try
    {
        count = header.at("count").get<std::size_t>();
        ds.n_r = header.at("n_r").get<std::size_t>();
        ds.n_t = header.at("n_t").get<std::size_t>();
        ds.normalized = header.at("normalized").get<bool>();
        ds.model = header.value("model", nlohmann::json::object());
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("dataset header: ") + e.what());
    }
    const std::size_t per = ds.n_r * ds.n_t;
    if (per != 0 && count > rd.remaining() / (per * 16))
    {
        throw FormatError("dataset samples truncated: header declares "
                          + std::to_string(count) + " samples");
    }
    ds.samples.reserve(count);
    for (std::size_t s = 0; s < count; ++s)
    {
        std::vector<cplx> entries(per);
        for (auto& z : entries)
        {
            const double re = rd.get_f64("sample entry");
            const double im = rd.get_f64("sample entry");
            z = cplx{re, im};
        }
        ds.samples.emplace_back(ds.n_r, ds.n_t, std::move(entries));
    }
    if (rd.remaining() != 0)
    {
        throw FormatError("dataset file has " + std::to_string(rd.remaining())
                          + " trailing bytes");
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path)
{
    binary::write_file(path, encode_dataset(ds));
}

inline Dataset load_dataset(const std::filesystem::path& path)
{
    return decode_dataset(binary::read_file(path));
}

}  // namespace rcflow
