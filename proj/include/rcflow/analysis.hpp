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

// Metrics and numerical checks of the solver's contraction behaviour.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rcflow/core.hpp"
#include "rcflow/prior.hpp"
#include "rcflow/rng.hpp"
#include "rcflow/solver.hpp"

namespace rcflow
{

/// Largest eigenvalue 1 / (w lambda_min + 1) of the proximal step's linear
/// part H~ -> (H~/w) U diag(1/(lambda + 1/w)) U^H.
inline double rho_p_analytic(const ProjectionContext& ctx, double w)
{
    require(w > 0.0, "rho_p_analytic: w must be positive");
    const double lmin = std::max(ctx.lambda_min(), 0.0);
    return 1.0 / (w * lmin + 1.0);
}

struct SpectralEstimate
{
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

using MatrixMap = std::function<ComplexMatrix(const ComplexMatrix&)>;

/**
 * Power iteration on the Jacobian of `op` at `point`, with Jacobian-vector
 * products from central differences. The map is treated as real-linear on
 * (re, im) pairs, so non-holomorphic networks are handled. The estimate at
 * each iteration is ||J v|| for the current unit direction v.
 *
 * fd_step is relative to max(||point||_F, 1).
 */
inline SpectralEstimate spectral_radius_fd(const MatrixMap& op, const ComplexMatrix& point,
                                           double fd_step, std::size_t iters, double tol,
                                           Rng& rng)
{
    require(fd_step > 0.0, "spectral_radius_fd: fd_step must be positive");
    const double h = fd_step * std::max(frobenius_norm(point), 1.0);
    auto v = complex_gaussian(point.rows(), point.cols(), 1.0, rng);
    v *= 1.0 / frobenius_norm(v);

    SpectralEstimate est;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t it = 0; it < iters; ++it)
    {
        auto plus = op(point + v * h);
        const auto minus = op(point - v * h);
        plus -= minus;
        plus *= 1.0 / (2.0 * h);
        if (!plus.all_finite())
        {
            throw NumericError("spectral_radius_fd: operator produced non-finite output");
        }
        const double norm = frobenius_norm(plus);
        est.value = norm;
        est.iterations = it + 1;
        if (norm == 0.0)
        {
            est.converged = true;
            break;
        }
        v = std::move(plus);
        v *= 1.0 / norm;
        if (std::abs(norm - prev) <= tol * norm)
        {
            est.converged = true;
            break;
        }
        prev = norm;
    }
    return est;
}

struct SpectralStep
{
    std::size_t k = 0;
    std::size_t i = 0;
    double t = 0.0;
    double w = 0.0;
    double rho_d = 0.0;
    double rho_p = 0.0;
    double rho_t = 0.0;
    bool rho_d_converged = false;
    bool rho_t_converged = false;
};

struct SpectralReport
{
    // rho_p is analytic; rho_d and rho_t come from finite-difference power
    // iteration at the trajectory state.
    static constexpr const char* kRhoDMethod = "power-iteration";
    static constexpr const char* kRhoPMethod = "analytic";
    static constexpr const char* kRhoTMethod = "power-iteration";

    std::vector<SpectralStep> steps;
};

struct SpectralOptions
{
    double fd_step = 1e-5;
    std::size_t iters = 300;
    double tol = 1e-10;
};

/// Runs the solver trajectory and probes the Jacobians at every inner step.
template <VelocityField F>
SpectralReport spectral_report(const Measurement& meas, const F& field,
                               const SolverConfig& config, SpectralOptions opts = {})
{
    const auto ctx = precompute_projection(meas);
    SpectralReport report;
    Rng rng(derive_seed(config.seed, "spectral"));
    auto observer = [&](const StepView& s) {
        const double t = s.t;
        const double w = s.w;
        const MatrixMap d_op = [&](const ComplexMatrix& x) { return denoise(x, t, field); };
        const MatrixMap t_op = [&](const ComplexMatrix& x) {
            return proximal_project(denoise(x, t, field), w, ctx);
        };
        const auto rd = spectral_radius_fd(d_op, s.state, opts.fd_step, opts.iters, opts.tol, rng);
        const auto rt = spectral_radius_fd(t_op, s.state, opts.fd_step, opts.iters, opts.tol, rng);
        report.steps.push_back(
            {s.k, s.i, t, w, rd.value, rho_p_analytic(ctx, w), rt.value, rd.converged,
             rt.converged});
    };
    run_from(ctx, field, config, initial_state(meas.dims(), config.seed), nullptr, observer);
    return report;
}

/// P_0 + sum_i t'_i P_{i+1} with P_j = prod_{n=j}^{N2-1} (1 - t'_n), each
/// product evaluated on its own rather than telescoped.
inline double partition_of_unity(std::size_t n_inner, double beta)
{
    require(n_inner >= 1, "partition_of_unity: n_inner must be >= 1");
    std::vector<double> tp(n_inner);
    for (std::size_t i = 0; i < n_inner; ++i)
    {
        tp[i] = schedule_t_prime(i, n_inner, beta);
    }
    auto tail_product = [&](std::size_t j) {
        double p = 1.0;
        for (std::size_t n = j; n < n_inner; ++n)
        {
            p *= 1.0 - tp[n];
        }
        return p;
    };
    double total = tail_product(0);
    for (std::size_t i = 0; i < n_inner; ++i)
    {
        total += tp[i] * tail_product(i + 1);
    }
    return total;
}

struct DynamicsSummary
{
    std::vector<double> nmse_per_outer;
    std::size_t sweet_spot_index = 0;
    double sweet_spot_nmse = 0.0;
    double plateau_nmse = 0.0;  // mean of the last 10% (at least one entry)
};

inline DynamicsSummary dynamics_summary(std::vector<double> nmse_per_outer)
{
    require(!nmse_per_outer.empty(), "dynamics_summary: empty NMSE sequence");
    DynamicsSummary s;
    const auto it = std::min_element(nmse_per_outer.begin(), nmse_per_outer.end());
    s.sweet_spot_index = static_cast<std::size_t>(it - nmse_per_outer.begin());
    s.sweet_spot_nmse = *it;
    const std::size_t n = nmse_per_outer.size();
    const std::size_t tail = std::max<std::size_t>(1, (n + 9) / 10);
    s.plateau_nmse = std::accumulate(nmse_per_outer.end() - static_cast<std::ptrdiff_t>(tail),
                                     nmse_per_outer.end(), 0.0)
                     / static_cast<double>(tail);
    s.nmse_per_outer = std::move(nmse_per_outer);
    return s;
}

/**
 * Empirical bounded-denoiser constant: the largest ||H - t V(H, t)||_F over
 * n_probes random states on the sphere ||H||_F = radius and every t in
 * t_grid.
 */
template <VelocityField F>
double bounded_denoiser_estimate(const F& field, std::size_t n_r, std::size_t n_t,
                                 double radius, std::size_t n_probes, Rng& rng,
                                 const std::vector<double>& t_grid = {0.0, 0.25, 0.5, 0.75,
                                                                      1.0})
{
    require(radius > 0.0, "bounded_denoiser_estimate: radius must be positive");
    require(n_probes > 0, "bounded_denoiser_estimate: n_probes must be positive");
    double best = 0.0;
    for (std::size_t p = 0; p < n_probes; ++p)
    {
        auto h = complex_gaussian(n_r, n_t, 1.0, rng);
        h *= radius / frobenius_norm(h);
        for (const double t : t_grid)
        {
            best = std::max(best, frobenius_norm(denoise(h, t, field)));
        }
    }
    return best;
}

/// Steps where ||H_proj|| exceeds obs_radius + ||H~|| beyond rounding slack.
inline std::size_t invariant_ball_violations(const SolverTrace& trace, double rel_slack = 1e-12)
{
    std::size_t bad = 0;
    for (const auto& s : trace.steps)
    {
        const double bound = s.obs_radius + s.denoised_norm;
        if (s.proj_norm > bound * (1.0 + rel_slack))
        {
            ++bad;
        }
    }
    return bad;
}

}  // namespace rcflow
