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

/*
 * Recursive flow solver.
 *
 * Each outer iteration k starts from the state H^(k,0), which is also the
 * anchor. The inner loop runs N2 steps of
 *
 *   t  = (1 - i/N2)^lambda,   t' = (1 - (i+1)/N2)^beta
 *   H~ = H - t V(H, t)                                      denoise
 *   w  = t^2 / (t^2 + (1-t)^2)
 *   Hp = (R + H~/w) U diag(1 / (lambda_i + 1/w)) U^H         proximal step
 *   H  = t' anchor + (1 - t') Hp                            rectify
 *
 * and the state after the last step (t' = 0, so it equals Hp) seeds the
 * next outer iteration. The k = 0 anchor is the single initial CN(0, I) draw.
 */

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rcflow/core.hpp"
#include "rcflow/linalg.hpp"
#include "rcflow/measurement.hpp"
#include "rcflow/prior.hpp"
#include "rcflow/rng.hpp"

namespace rcflow
{

struct SolverConfig
{
    double lambda = 2.0;
    double beta = 2.0;
    std::size_t n_outer = 10;
    std::optional<std::size_t> n_inner = 30;  // nullopt selects the adaptive budget
    std::size_t n_max = 50;
    std::size_t n_min = 3;
    double sigma_max = std::pow(10.0, 0.5);   // -10 dB, channel-domain convention
    double sigma_min = std::pow(10.0, -1.5);  // 30 dB
    bool record_trace = false;
    std::size_t snapshot_every = 0;  // 0 disables state snapshots in the trace
    std::uint64_t seed = 0;

    void validate() const
    {
        require(lambda >= 0.0 && std::isfinite(lambda), "SolverConfig: lambda must be >= 0");
        require(beta >= 0.0 && std::isfinite(beta), "SolverConfig: beta must be >= 0");
        require(n_outer >= 1, "SolverConfig: n_outer must be >= 1");
        require(!n_inner || *n_inner >= 1, "SolverConfig: n_inner must be >= 1");
        require(n_min >= 1, "SolverConfig: n_min must be >= 1");
        require(n_max >= n_min, "SolverConfig: n_max must be >= n_min");
        require(sigma_min > 0.0 && sigma_max > sigma_min,
                "SolverConfig: need sigma_max > sigma_min > 0");
    }
};

inline void check_step_index(std::size_t i, std::size_t n_inner, const char* who)
{
    if (n_inner == 0 || i >= n_inner)
    {
        throw ContractError(std::string(who) + ": step index " + std::to_string(i)
                            + " outside [0, " + std::to_string(n_inner) + ")");
    }
}

inline double schedule_t(std::size_t i, std::size_t n_inner, double lambda)
{
    check_step_index(i, n_inner, "schedule_t");
    return std::pow(1.0 - static_cast<double>(i) / static_cast<double>(n_inner), lambda);
}

inline double schedule_t_prime(std::size_t i, std::size_t n_inner, double beta)
{
    check_step_index(i, n_inner, "schedule_t_prime");
    if (i + 1 == n_inner)
    {
        return 0.0;
    }
    return std::pow(1.0 - static_cast<double>(i + 1) / static_cast<double>(n_inner), beta);
}

/// Variance annealing weight t^2 / (t^2 + (1-t)^2).
inline double anneal_weight(double t)
{
    require(t >= 0.0 && t <= 1.0, "anneal_weight: t must lie in [0, 1]");
    const double a = t * t;
    const double b = (1.0 - t) * (1.0 - t);
    return a / (a + b);
}

template <VelocityField F>
ComplexMatrix denoise(const ComplexMatrix& h_state, double t, const F& field)
{
    require(t >= 0.0 && t <= 1.0, "denoise: t must lie in [0, 1]");
    auto v = field.eval(h_state, t);
    if (!v.same_shape(h_state))
    {
        throw DimensionError("denoise: velocity shape differs from state shape");
    }
    v *= -t;
    v += h_state;
    return v;
}

/// M = P P^H / sigma^2, R = Y P^H / sigma^2 and the EVD M = U diag(lambda) U^H.
struct ProjectionContext
{
    ComplexMatrix m;
    ComplexMatrix r;
    ComplexMatrix u;
    std::vector<double> lambda_eigs;  // descending
    ComplexMatrix y;
    ComplexMatrix pilots;
    double sigma_pilot = 0.0;

    double lambda_min() const { return lambda_eigs.empty() ? 0.0 : lambda_eigs.back(); }
};

inline ProjectionContext precompute_projection(const Measurement& meas)
{
    if (!(meas.sigma_pilot > 0.0))
    {
        throw ContractError(
            "precompute_projection: sigma_pilot must be > 0 (use least_squares for "
            "noiseless data)");
    }
    const auto& p = meas.pilots.matrix();
    if (meas.y.cols() != p.cols())
    {
        throw DimensionError("precompute_projection: Y and P pilot counts differ");
    }
    const double inv_var = 1.0 / (meas.sigma_pilot * meas.sigma_pilot);
    ProjectionContext ctx;
    const auto ph = adjoint(p);
    ctx.m = matmul(p, ph) * inv_var;
    ctx.r = matmul(meas.y, ph) * inv_var;
    auto evd = hermitian_evd(ctx.m);
    ctx.u = std::move(evd.u);
    ctx.lambda_eigs = std::move(evd.lambda);
    ctx.y = meas.y;
    ctx.pilots = p;
    ctx.sigma_pilot = meas.sigma_pilot;
    return ctx;
}

namespace detail
{

// X U diag(d) U^H without forming the N_t x N_t product.
inline ComplexMatrix apply_spectral(const ComplexMatrix& x, const ComplexMatrix& u,
                                    std::span<const double> d)
{
    auto xu = matmul(x, u);
    for (std::size_t i = 0; i < xu.rows(); ++i)
    {
        for (std::size_t j = 0; j < xu.cols(); ++j)
        {
            xu(i, j) *= d[j];
        }
    }
    return matmul(xu, adjoint(u));
}

inline std::vector<double> prox_gains(const ProjectionContext& ctx, double inv_w)
{
    std::vector<double> g(ctx.lambda_eigs.size());
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        g[k] = 1.0 / (ctx.lambda_eigs[k] + inv_w);
    }
    return g;
}

}  // namespace detail

/// Minimizer of ||Y - HP||^2 / (2 sigma^2) + ||H - H~||^2 / (2w).
inline ComplexMatrix proximal_project(const ComplexMatrix& h_tilde, double w,
                                      const ProjectionContext& ctx)
{
    if (!(w > 0.0) || w > 1.0)
    {
        throw ContractError("proximal_project: w must lie in (0, 1], got "
                            + std::to_string(w));
    }
    if (h_tilde.rows() != ctx.r.rows() || h_tilde.cols() != ctx.r.cols())
    {
        throw DimensionError("proximal_project: H~ shape differs from R");
    }
    const double inv_w = 1.0 / w;
    return detail::apply_spectral(ctx.r + h_tilde * inv_w, ctx.u,
                                  detail::prox_gains(ctx, inv_w));
}

/// ||R U diag(1/(lambda_i + 1/w)) U^H||_F, the observation part of the
/// invariant-ball radius.
inline double observation_radius(double w, const ProjectionContext& ctx)
{
    return frobenius_norm(
        detail::apply_spectral(ctx.r, ctx.u, detail::prox_gains(ctx, 1.0 / w)));
}

inline ComplexMatrix rectify(const ComplexMatrix& h_proj, const ComplexMatrix& anchor,
                             double t_prime)
{
    require(t_prime >= 0.0 && t_prime < 1.0, "rectify: t' must lie in [0, 1)");
    if (!h_proj.same_shape(anchor))
    {
        throw DimensionError("rectify: anchor shape differs from H_proj shape");
    }
    return anchor * t_prime + h_proj * (1.0 - t_prime);
}

inline std::size_t adaptive_inner_steps(double sigma_pilot, const SolverConfig& config)
{
    config.validate();
    const double sigma = std::clamp(sigma_pilot, config.sigma_min, config.sigma_max);
    const double ratio = std::log10(config.sigma_max / sigma)
                         / std::log10(config.sigma_max / config.sigma_min);
    const auto span = static_cast<double>(config.n_max - config.n_min);
    return config.n_min + static_cast<std::size_t>(std::floor(span * ratio * ratio));
}

// Engine never divides by a smaller weight.
inline constexpr double kMinWeight = 1e-12;

struct TraceStep
{
    std::size_t k = 0;
    std::size_t i = 0;
    double t = 0.0;
    double t_prime = 0.0;
    double w = 0.0;
    double residual_norm = 0.0;  // ||Y - H_proj P||_F
    double state_norm = 0.0;     // ||H^(k,i+1)||_F
    double denoised_norm = 0.0;  // ||H~||_F
    double proj_norm = 0.0;      // ||H_proj||_F
    double obs_radius = 0.0;     // see observation_radius
    double nmse_db = std::numeric_limits<double>::quiet_NaN();
    double wall_time_s = 0.0;
};

struct SolverTrace
{
    std::vector<TraceStep> steps;
    std::vector<ComplexMatrix> snapshots;  // every snapshot_every-th step
};

struct Estimate
{
    ChannelMatrix h_est;
    std::optional<SolverTrace> trace;
    std::size_t n_inner_used = 0;
    std::vector<double> outer_nmse_db;  // after each outer iteration, if ground truth given
};

/// 10 log10(||est - truth||^2 / ||truth||^2); -infinity on an exact match.
inline double nmse_db(const ComplexMatrix& h_est, const ComplexMatrix& h_true)
{
    if (!h_est.same_shape(h_true))
    {
        throw DimensionError("nmse_db: shape mismatch");
    }
    const double denom = frobenius_norm_sq(h_true);
    if (!(denom > 0.0))
    {
        throw ContractError("nmse_db: ground truth has zero norm");
    }
    const double num = frobenius_norm_sq(h_est - h_true);
    if (num == 0.0)
    {
        return -std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(num / denom);
}

/// What an observer sees before each inner step.
struct StepView
{
    std::size_t k;
    std::size_t i;
    double t;
    double t_prime;
    double w;
    const ComplexMatrix& state;   // H^(k,i)
    const ComplexMatrix& anchor;
};

struct NoObserver
{
    void operator()(const StepView&) const noexcept {}
};

/// Initial state H^(0,0) ~ CN(0, I) drawn from the config seed.
inline ComplexMatrix initial_state(const SystemDims& dims, std::uint64_t seed)
{
    Rng rng(seed);
    return complex_gaussian(dims.n_r, dims.n_t, 1.0, rng);
}

template <VelocityField F, class Observer = NoObserver>
Estimate run_from(const ProjectionContext& ctx, const F& field, const SolverConfig& config,
                  ComplexMatrix init, const ComplexMatrix* ground_truth = nullptr,
                  Observer&& observer = {})
{
    config.validate();
    if (init.rows() != ctx.r.rows() || init.cols() != ctx.r.cols())
    {
        throw DimensionError("run: initial state shape differs from the measurement");
    }
    const std::size_t n2 =
        config.n_inner ? *config.n_inner : adaptive_inner_steps(ctx.sigma_pilot, config);

    Estimate est;
    est.n_inner_used = n2;
    if (config.record_trace)
    {
        est.trace.emplace();
        est.trace->steps.reserve(config.n_outer * n2);
    }
    using clock = std::chrono::steady_clock;

    ComplexMatrix h = std::move(init);
    std::size_t step_counter = 0;
    for (std::size_t k = 0; k < config.n_outer; ++k)
    {
        const ComplexMatrix anchor = h;
        for (std::size_t i = 0; i < n2; ++i)
        {
            const auto started = clock::now();
            const double t = schedule_t(i, n2, config.lambda);
            const double tp = schedule_t_prime(i, n2, config.beta);
            const double w = std::max(anneal_weight(t), kMinWeight);
            observer(StepView{k, i, t, tp, w, h, anchor});

            const auto h_tilde = denoise(h, t, field);
            const auto h_proj = proximal_project(h_tilde, w, ctx);
            h = rectify(h_proj, anchor, tp);
            if (!h.all_finite())
            {
                throw NumericError("run: non-finite state at outer " + std::to_string(k)
                                   + ", inner " + std::to_string(i));
            }
            if (est.trace)
            {
                TraceStep s;
                s.k = k;
                s.i = i;
                s.t = t;
                s.t_prime = tp;
                s.w = w;
                s.residual_norm =
                    frobenius_norm(ctx.y - matmul(h_proj, ctx.pilots));
                s.state_norm = frobenius_norm(h);
                s.denoised_norm = frobenius_norm(h_tilde);
                s.proj_norm = frobenius_norm(h_proj);
                s.obs_radius = observation_radius(w, ctx);
                if (ground_truth)
                {
                    s.nmse_db = nmse_db(h, *ground_truth);
                }
                s.wall_time_s =
                    std::chrono::duration<double>(clock::now() - started).count();
                est.trace->steps.push_back(s);
                if (config.snapshot_every > 0 && step_counter % config.snapshot_every == 0)
                {
                    est.trace->snapshots.push_back(h);
                }
            }
            ++step_counter;
        }
        if (ground_truth)
        {
            est.outer_nmse_db.push_back(nmse_db(h, *ground_truth));
        }
    }
    est.h_est = std::move(h);
    return est;
}

template <VelocityField F>
Estimate run(const Measurement& meas, const F& field, const SolverConfig& config,
             const ComplexMatrix* ground_truth = nullptr)
{
    const auto ctx = precompute_projection(meas);
    return run_from(ctx, field, config, initial_state(meas.dims(), config.seed), ground_truth);
}

}  // namespace rcflow
