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

// Acceptance checks for the engine. Each check prints one PASS/FAIL line
// with its measured quantities and wall time. Pass a check name to run one,
// or nothing to run all of them; the exit status is non-zero on any FAIL.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcflow/rcflow.hpp"

namespace
{

using namespace rcflow;
namespace fs = std::filesystem;

struct Outcome
{
    bool pass = false;
    std::string detail;
};

struct Check
{
    std::string name;
    double budget_s;  // wall-time limit, part of the pass condition
    std::function<Outcome()> body;
};

std::string num(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

Eigen::MatrixXcd to_eigen(const ComplexMatrix& m)
{
    Eigen::MatrixXcd e(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
    {
        for (std::size_t c = 0; c < m.cols(); ++c)
        {
            e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
        }
    }
    return e;
}

std::size_t draw_size(Rng& rng, std::size_t lo, std::size_t hi)
{
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

/// Random measurement with N_r <= 4, N_t <= 16, N_p <= 12.
Measurement random_instance(Rng& rng)
{
    const std::size_t n_t = draw_size(rng, 1, 16);
    const SystemDims dims{draw_size(rng, 1, 4), n_t, draw_size(rng, 1, std::min<std::size_t>(12, 2 * n_t))};
    const auto pilots = generate_pilots(dims, rng);
    const auto h = complex_gaussian(dims.n_r, dims.n_t, 1.0, rng);
    const double sigma = std::pow(10.0, -2.0 + 2.5 * rng.uniform());
    return observe(h, pilots, sigma, rng);
}

double draw_w(Rng& rng)
{
    return std::max(1.0 - rng.uniform(), 1e-6);  // (0, 1]
}

/// The shared Gaussian setting: N_r=4, N_t=16, R_H=I, alpha=0.6, pilot SNR.
ExperimentSpec gaussian_spec(double snr_db, std::size_t trials)
{
    ExperimentSpec s;
    s.snr = {snr_db};
    s.alpha = {0.6};
    s.lambda = 2.0;
    s.beta = 2.0;
    s.n_outer = 10;
    s.n_inner = 30;
    s.trials = trials;
    s.seed = 2024;
    s.parallel = 0;
    return s;
}

Outcome proximal_exactness()
{
    Rng rng(derive_seed(1, "acceptance-prox"));
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n)
    {
        const auto meas = random_instance(rng);
        const auto ctx = precompute_projection(meas);
        const double w = draw_w(rng);
        const auto ht = complex_gaussian(meas.dims().n_r, meas.dims().n_t, 1.0, rng);
        const auto got = proximal_project(ht, w, ctx);
        // H (M + I/w) = R + H~/w, solved densely
        const auto k = static_cast<Eigen::Index>(ctx.m.rows());
        const Eigen::MatrixXcd a = to_eigen(ctx.m) + Eigen::MatrixXcd::Identity(k, k) / w;
        const Eigen::MatrixXcd rhs = to_eigen(ctx.r) + to_eigen(ht) / w;
        const Eigen::MatrixXcd want = a.adjoint().partialPivLu().solve(rhs.adjoint()).adjoint();
        const double err = (to_eigen(got) - want).norm() / want.norm();
        worst = std::max(worst, err);
    }
    return {worst <= 1e-10, "1000 instances, max rel error " + num(worst) + " (limit 1e-10)"};
}

Outcome partition()
{
    double worst = 0.0;
    for (std::size_t n2 = 1; n2 <= 200; ++n2)
    {
        for (const double beta : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0})
        {
            worst = std::max(worst, std::abs(partition_of_unity(n2, beta) - 1.0));
        }
    }
    return {worst <= 1e-12, "N2 in [1,200] x 6 betas, max |sum - 1| " + num(worst)};
}

Outcome spectral()
{
    Rng rng(derive_seed(1, "acceptance-spectral"));
    double worst_p = 0.0;
    for (int n = 0; n < 100; ++n)
    {
        const auto meas = random_instance(rng);
        const auto ctx = precompute_projection(meas);
        const double w = draw_w(rng);
        const MatrixMap op = [&](const ComplexMatrix& x) { return proximal_project(x, w, ctx); };
        const auto point = complex_gaussian(meas.dims().n_r, meas.dims().n_t, 1.0, rng);
        const auto est = spectral_radius_fd(op, point, 1e-5, 2000, 1e-13, rng);
        const double analytic = rho_p_analytic(ctx, w);
        worst_p = std::max(worst_p, std::abs(est.value - analytic) / analytic);
    }

    auto spec = gaussian_spec(10.0, 1);
    const auto wb = make_workbench(spec, true);
    const auto meas = trial_measurement(wb, cell_pilots(wb, 0), 0, 0, 0);
    const auto ctx = precompute_projection(meas);
    auto cfg = spec.solver_config();
    cfg.seed = trial_init_seed(spec, 0);
    const auto report = spectral_report(meas, *wb.field, cfg);
    double max_rho_t = 0.0;
    double worst_closed = 0.0;
    for (const auto& s : report.steps)
    {
        max_rho_t = std::max(max_rho_t, s.rho_t);
        const double closed = 1.0 / ((s.w * ctx.lambda_min() + 1.0) * (1.0 + s.t * s.t));
        worst_closed = std::max(worst_closed, std::abs(s.rho_t - closed) / closed);
    }
    const bool pass = worst_p <= 1e-3 && max_rho_t < 1.0 && worst_closed <= 1e-3;
    return {pass, "rho_P max rel dev " + num(worst_p) + " over 100 contexts; "
                      + std::to_string(report.steps.size()) + " steps, max rho_T = 1 - "
                      + num(1.0 - max_rho_t) + ", closed-form max rel dev " + num(worst_closed)};
}

Outcome bayes()
{
    const auto spec = gaussian_spec(10.0, 200);
    const auto wb = make_workbench(spec, true);
    const double solver = detail::mean_db(detail::solver_cell(wb, spec.solver_config(), 0, 0));
    const double oracle = detail::mean_db(detail::baseline_cell(wb, 0, 0));
    const double gap = std::abs(solver - oracle);
    return {gap <= 0.5, "200 trials at 10 dB: solver " + num(solver) + " dB, LMMSE "
                            + num(oracle) + " dB, gap " + num(gap) + " dB (limit 0.5)"};
}

Outcome stability()
{
    const auto spec = gaussian_spec(30.0, 50);
    const auto wb = make_workbench(spec, true);
    const auto pilots = cell_pilots(wb, 0);
    const auto base = spec.solver_config();
    std::vector<double> dist(spec.trials);
    std::vector<std::vector<double>> curves(spec.trials);
    parallel_for(spec.trials, 0, [&](std::size_t j) {
        const auto meas = trial_measurement(wb, pilots, 0, 0, j);
        auto cfg = base;
        cfg.seed = trial_init_seed(spec, j);
        const auto a = run(meas, *wb.field, cfg, &wb.channels[j]);
        cfg.seed = derive_seed(spec.seed, "init-alt", j);
        const auto b = run(meas, *wb.field, cfg);
        dist[j] = frobenius_distance(a.h_est, b.h_est) / frobenius_norm(a.h_est);
        curves[j] = a.outer_nmse_db;
    });
    std::size_t agree = 0;
    double median_gap = 0.0;
    for (const double d : dist)
    {
        agree += d <= 1e-3 ? 1 : 0;
    }
    auto sorted = dist;
    std::sort(sorted.begin(), sorted.end());
    median_gap = sorted[sorted.size() / 2];
    const double frac = static_cast<double>(agree) / static_cast<double>(dist.size());

    std::vector<double> mean(base.n_outer, 0.0);
    for (const auto& c : curves)
    {
        for (std::size_t k = 0; k < c.size(); ++k)
        {
            mean[k] += c[k] / static_cast<double>(curves.size());
        }
    }
    double worst_rise = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 3; k < mean.size(); ++k)
    {
        worst_rise = std::max(worst_rise, mean[k] - mean[k - 1]);
    }
    const bool monotone = worst_rise <= 0.05;
    return {frac >= 0.95 && monotone,
            "50 trials at 30 dB: " + num(100.0 * frac) + "% of seed pairs within 1e-3 (need 95%), "
                "median rel distance " + num(median_gap) + "; NMSE after outer 3 max rise "
                + num(worst_rise) + " dB (limit 0.05)"};
}

Outcome adaptive()
{
    SolverConfig c;
    const auto hi = adaptive_inner_steps(c.sigma_max, c);
    const auto lo = adaptive_inner_steps(c.sigma_min, c);
    const auto mid = adaptive_inner_steps(std::sqrt(c.sigma_max * c.sigma_min), c);
    return {hi == 3 && lo == 50 && mid == 14, "N2(sigma_max)=" + std::to_string(hi)
                                                  + ", N2(sigma_min)=" + std::to_string(lo)
                                                  + ", N2(midpoint)=" + std::to_string(mid)};
}

template <VelocityField F>
std::size_t traced_violations(const Measurement& meas, const F& field, SolverConfig cfg,
                              std::size_t& steps)
{
    cfg.record_trace = true;
    const auto est = run(meas, field, cfg);
    steps += est.trace->steps.size();
    return invariant_ball_violations(*est.trace);
}

Outcome invariant_ball()
{
    std::size_t steps = 0;
    std::size_t bad = 0;
    Rng rng(derive_seed(1, "acceptance-ball"));
    for (int n = 0; n < 60; ++n)
    {
        const auto meas = random_instance(rng);
        SolverConfig cfg;
        cfg.n_outer = 3;
        cfg.n_inner = draw_size(rng, 1, 40);
        cfg.lambda = 0.5 + 4.0 * rng.uniform();
        cfg.beta = 0.5 + 4.0 * rng.uniform();
        cfg.seed = rng.next_u64();
        bad += traced_violations(meas, GaussianAnalyticField::identity(meas.dims().n_t), cfg, steps);
        bad += traced_violations(meas, ZeroField{}, cfg, steps);
    }
    const auto net = load_network(fs::path(RCFLOW_TEST_DATA) / "tiny_unet.rcnn");
    const NetworkField field(net);
    const auto shape = field.input_shape();
    for (int n = 0; n < 10; ++n)
    {
        const SystemDims dims{shape[1], shape[2], draw_size(rng, 1, shape[2])};
        const auto pilots = generate_pilots(dims, rng);
        const auto meas = observe(complex_gaussian(dims.n_r, dims.n_t, 1.0, rng), pilots, 0.3, rng);
        SolverConfig cfg;
        cfg.n_outer = 2;
        cfg.n_inner = 10;
        cfg.seed = rng.next_u64();
        bad += traced_violations(meas, field, cfg, steps);
    }
    for (const double snr : {-10.0, 10.0, 30.0})
    {
        const auto spec = gaussian_spec(snr, 5);
        const auto wb = make_workbench(spec, true);
        const auto pilots = cell_pilots(wb, 0);
        for (std::size_t j = 0; j < spec.trials; ++j)
        {
            auto cfg = spec.solver_config();
            cfg.seed = trial_init_seed(spec, j);
            bad += traced_violations(trial_measurement(wb, pilots, 0, 0, j), *wb.field, cfg, steps);
        }
    }
    return {bad == 0, std::to_string(steps) + " traced steps, " + std::to_string(bad)
                          + " violations"};
}

std::string read_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome determinism()
{
    const auto root = fs::temp_directory_path() / "rcflow-acceptance-determinism";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
        {"run --trials 8 --snr 0 20 --alpha 0.5 1 --n-outer 3", {"results.csv", "aggregate.csv"}},
        {"run --trials 4 --adaptive --model clustered --n-outer 2", {"results.csv", "aggregate.csv"}},
        {"baseline --trials 8 --snr 0 20", {"results.csv", "aggregate.csv"}},
        {"sweep --axis lambda_beta --trials 3 --n-outer 2 --n-inner 6", {"sweep.csv"}},
        {"sweep --axis n1_n2 --trials 3 --n-outer-values 1 3 --n-inner-values 5 10", {"sweep.csv"}},
        {"spectral --n-outer 1 --n-inner 6", {"spectral.csv"}},
        {"gen-data --count 20 --model clustered", {"dataset.rcds"}},
    };
    std::size_t compared = 0;
    std::string mismatch;
    for (std::size_t c = 0; c < commands.size(); ++c)
    {
        std::string first_bytes;
        for (const int rep : {0, 1})
        {
            const auto dir = root / (std::to_string(c) + "-" + std::to_string(rep));
            const std::string cmd = std::string(RCFLOW_CLI) + " " + commands[c].first
                                    + " --seed 31 --out-dir " + dir.string() + " >/dev/null 2>&1";
            if (std::system(cmd.c_str()) != 0)
            {
                return {false, "command failed: " + commands[c].first};
            }
        }
        for (const auto& file : commands[c].second)
        {
            const auto a = read_bytes(root / (std::to_string(c) + "-0") / file);
            const auto b = read_bytes(root / (std::to_string(c) + "-1") / file);
            ++compared;
            if (a.empty() || a != b)
            {
                mismatch += " " + commands[c].first + ":" + file;
            }
        }
    }
    fs::remove_all(root);
    return {mismatch.empty(), std::to_string(compared) + " output files compared across "
                                  + std::to_string(commands.size()) + " commands"
                                  + (mismatch.empty() ? "" : ", differing:" + mismatch)};
}

Outcome parity()
{
    const auto net = load_network(fs::path(RCFLOW_TEST_DATA) / "tiny_unet.rcnn");
    const auto fixtures = load_fixtures(fs::path(RCFLOW_TEST_DATA) / "tiny_unet_fixtures.json");
    const auto r = check_parity(NetworkField(net), fixtures);
    return {r.count >= 20 && r.max_abs_error <= 1e-4,
            std::to_string(r.count) + " fixtures, max abs error " + num(r.max_abs_error)
                + " (limit 1e-4)"};
}

const std::vector<Check>& checks()
{
    static const std::vector<Check> all = {
        {"proximal_exactness", 10.0, proximal_exactness},
        {"partition_of_unity", 1.0, partition},
        {"spectral_formula", 60.0, spectral},
        {"bayes_equivalence", 300.0, bayes},
        {"stability", 300.0, stability},
        {"adaptive_budget", 1.0, adaptive},
        {"invariant_ball", 300.0, invariant_ball},
        {"determinism", 300.0, determinism},
        {"parity", 60.0, parity},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> wanted(argv + 1, argv + argc);
    int failures = 0;
    std::size_t ran = 0;
    for (const auto& check : checks())
    {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), check.name) == wanted.end())
        {
            continue;
        }
        ++ran;
        const auto started = std::chrono::steady_clock::now();
        Outcome out;
        try
        {
            out = check.body();
        }
        catch (const std::exception& e)
        {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        const bool in_time = secs < check.budget_s;
        const bool pass = out.pass && in_time;
        std::cout << (pass ? "PASS " : "FAIL ") << check.name << ": " << out.detail << " ["
                  << num(secs) << " s, limit " << num(check.budget_s) << " s"
                  << (in_time ? "" : ", over time") << "]" << std::endl;
        failures += pass ? 0 : 1;
    }
    if (ran == 0)
    {
        std::cerr << "unknown check name\n";
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
