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

// Batch experiments behind the rcflow CLI: data generation, solver runs,
// baselines, parameter sweeps and spectral diagnostics.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rcflow/analysis.hpp"
#include "rcflow/baselines.hpp"
#include "rcflow/channelgen.hpp"
#include "rcflow/measurement.hpp"
#include "rcflow/network.hpp"
#include "rcflow/prior.hpp"
#include "rcflow/solver.hpp"

namespace rcflow
{

inline constexpr const char* kVersion = "rcflow 0.1.0";

/// Bad configuration; the CLI maps this to exit code 2.
class ConfigError : public ContractError
{
   public:
    using ContractError::ContractError;
};

struct ChannelModelSpec
{
    std::string kind = "gaussian";  // gaussian | clustered | dataset
    double correlation = 0.0;       // gaussian: exponential transmit correlation
    std::size_t n_paths = 3;        // clustered
    double angle_spread = std::numbers::pi;
    std::string dataset;            // dataset: path to a channel dataset file
};

struct ExperimentSpec
{
    std::size_t n_r = 4;
    std::size_t n_t = 16;
    ChannelModelSpec channel_model;
    std::string prior = "analytic";
    std::vector<double> snr = {10.0};
    std::vector<double> alpha = {0.6};
    std::string snr_convention = "pilot";
    double lambda = 2.0;
    double beta = 2.0;
    std::size_t n_outer = 10;
    std::size_t n_inner = 30;
    bool adaptive = false;
    std::size_t n_max = 50;
    std::size_t n_min = 3;
    std::optional<double> sigma_max;  // default: sigma at -10 dB
    std::optional<double> sigma_min;  // default: sigma at 30 dB
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    std::string out_dir = "rcflow-out";
    std::size_t parallel = 0;  // 0 = hardware concurrency
    // gen-data
    std::size_t count = 1000;
    std::string dataset_out;
    // baseline
    std::string estimator = "lmmse";  // lmmse | least_squares
    // sweep
    std::string axis = "snr";  // snr | alpha | lambda_beta | n1_n2
    std::vector<double> lambda_values = {1.0, 2.0, 4.0};
    std::vector<double> beta_values = {1.0, 2.0, 4.0};
    std::vector<std::size_t> n_outer_values = {1, 2, 5, 10};
    std::vector<std::size_t> n_inner_values = {10, 30};
    std::size_t covariance_samples = 2000;

    void validate() const
    {
        auto fail_if = [](bool bad, const std::string& what) {
            if (bad)
            {
                throw ConfigError(what);
            }
        };
        fail_if(n_r == 0 || n_t == 0, "n_r and n_t must be positive");
        fail_if(snr.empty(), "snr list must be non-empty");
        fail_if(alpha.empty(), "alpha list must be non-empty");
        for (const double a : alpha)
        {
            fail_if(!(a > 0.0) || !std::isfinite(a), "alpha values must be positive");
        }
        fail_if(trials == 0, "trials must be >= 1");
        fail_if(n_outer == 0, "n_outer must be >= 1");
        fail_if(!adaptive && n_inner == 0, "n_inner must be >= 1");
        fail_if(n_min == 0 || n_max < n_min, "need n_max >= n_min >= 1");
        fail_if(lambda < 0.0 || beta < 0.0, "lambda and beta must be >= 0");
        fail_if(snr_convention != "pilot" && snr_convention != "channel",
                "snr_convention must be 'pilot' or 'channel'");
        fail_if(estimator != "lmmse" && estimator != "least_squares",
                "estimator must be 'lmmse' or 'least_squares'");
        const auto& k = channel_model.kind;
        fail_if(k != "gaussian" && k != "clustered" && k != "dataset",
                "channel_model.kind must be gaussian, clustered or dataset");
        fail_if(k == "dataset" && channel_model.dataset.empty(),
                "channel_model.dataset must name a file when kind is 'dataset'");
        fail_if(channel_model.correlation < 0.0 || channel_model.correlation >= 1.0,
                "channel_model.correlation must lie in [0, 1)");
        fail_if(channel_model.n_paths == 0, "channel_model.n_paths must be >= 1");
        fail_if(covariance_samples == 0, "covariance_samples must be >= 1");
    }

    SnrConvention convention() const { return parse_snr_convention(snr_convention); }

    std::size_t pilots_for(double a) const
    {
        return std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(a * static_cast<double>(n_t))));
    }

    double sigma_for(double snr_db) const { return snr_to_sigma(snr_db, convention(), n_t); }

    SolverConfig solver_config() const
    {
        SolverConfig c;
        c.lambda = lambda;
        c.beta = beta;
        c.n_outer = n_outer;
        c.n_inner = adaptive ? std::nullopt : std::optional<std::size_t>(n_inner);
        c.n_max = n_max;
        c.n_min = n_min;
        c.sigma_max = sigma_max.value_or(sigma_for(-10.0));
        c.sigma_min = sigma_min.value_or(sigma_for(30.0));
        return c;
    }
};

inline void to_json(nlohmann::json& j, const ChannelModelSpec& m)
{
    j = {{"kind", m.kind},
         {"correlation", m.correlation},
         {"n_paths", m.n_paths},
         {"angle_spread", m.angle_spread},
         {"dataset", m.dataset}};
}

inline void from_json(const nlohmann::json& j, ChannelModelSpec& m)
{
    m.kind = j.value("kind", m.kind);
    m.correlation = j.value("correlation", m.correlation);
    m.n_paths = j.value("n_paths", m.n_paths);
    m.angle_spread = j.value("angle_spread", m.angle_spread);
    m.dataset = j.value("dataset", m.dataset);
}

inline void to_json(nlohmann::json& j, const ExperimentSpec& s)
{
    j = {{"n_r", s.n_r},
         {"n_t", s.n_t},
         {"channel_model", s.channel_model},
         {"prior", s.prior},
         {"snr", s.snr},
         {"alpha", s.alpha},
         {"snr_convention", s.snr_convention},
         {"lambda", s.lambda},
         {"beta", s.beta},
         {"n_outer", s.n_outer},
         {"n_inner", s.n_inner},
         {"adaptive", s.adaptive},
         {"n_max", s.n_max},
         {"n_min", s.n_min},
         {"trials", s.trials},
         {"seed", s.seed},
         {"out_dir", s.out_dir},
         {"parallel", s.parallel},
         {"count", s.count},
         {"dataset_out", s.dataset_out},
         {"estimator", s.estimator},
         {"axis", s.axis},
         {"lambda_values", s.lambda_values},
         {"beta_values", s.beta_values},
         {"n_outer_values", s.n_outer_values},
         {"n_inner_values", s.n_inner_values},
         {"covariance_samples", s.covariance_samples}};
    if (s.sigma_max)
    {
        j["sigma_max"] = *s.sigma_max;
    }
    if (s.sigma_min)
    {
        j["sigma_min"] = *s.sigma_min;
    }
}

inline void from_json(const nlohmann::json& j, ExperimentSpec& s)
{
    static const std::set<std::string> known = {
        "n_r",       "n_t",       "channel_model", "prior",         "snr",
        "alpha",     "snr_convention", "lambda",   "beta",          "n_outer",
        "n_inner",   "adaptive",  "n_max",         "n_min",         "sigma_max",
        "sigma_min", "trials",    "seed",          "out_dir",       "parallel",
        "count",     "dataset_out", "estimator",   "axis",          "lambda_values",
        "beta_values", "n_outer_values", "n_inner_values", "covariance_samples"};
    for (const auto& [key, _] : j.items())
    {
        if (!known.contains(key))
        {
            throw ConfigError("unknown config field '" + key + "'");
        }
    }
    s.n_r = j.value("n_r", s.n_r);
    s.n_t = j.value("n_t", s.n_t);
    if (j.contains("channel_model"))
    {
        s.channel_model = j.at("channel_model").get<ChannelModelSpec>();
    }
    s.prior = j.value("prior", s.prior);
    s.snr = j.value("snr", s.snr);
    s.alpha = j.value("alpha", s.alpha);
    s.snr_convention = j.value("snr_convention", s.snr_convention);
    s.lambda = j.value("lambda", s.lambda);
    s.beta = j.value("beta", s.beta);
    s.n_outer = j.value("n_outer", s.n_outer);
    s.n_inner = j.value("n_inner", s.n_inner);
    s.adaptive = j.value("adaptive", s.adaptive);
    s.n_max = j.value("n_max", s.n_max);
    s.n_min = j.value("n_min", s.n_min);
    if (j.contains("sigma_max"))
    {
        s.sigma_max = j.at("sigma_max").get<double>();
    }
    if (j.contains("sigma_min"))
    {
        s.sigma_min = j.at("sigma_min").get<double>();
    }
    s.trials = j.value("trials", s.trials);
    s.seed = j.value("seed", s.seed);
    s.out_dir = j.value("out_dir", s.out_dir);
    s.parallel = j.value("parallel", s.parallel);
    s.count = j.value("count", s.count);
    s.dataset_out = j.value("dataset_out", s.dataset_out);
    s.estimator = j.value("estimator", s.estimator);
    s.axis = j.value("axis", s.axis);
    s.lambda_values = j.value("lambda_values", s.lambda_values);
    s.beta_values = j.value("beta_values", s.beta_values);
    s.n_outer_values = j.value("n_outer_values", s.n_outer_values);
    s.n_inner_values = j.value("n_inner_values", s.n_inner_values);
    s.covariance_samples = j.value("covariance_samples", s.covariance_samples);
}

inline ExperimentSpec load_spec(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("cannot open config file " + path.string());
    }
    try
    {
        return nlohmann::json::parse(in).get<ExperimentSpec>();
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest round-tripping decimal form.
inline std::string fmt_double(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// Exported files replace the exact-match -inf NMSE by this value and set the
// accompanying exact_match flag.
inline constexpr double kNmseSentinel = std::numeric_limits<double>::lowest();

inline double export_nmse(double v) { return std::isinf(v) && v < 0 ? kNmseSentinel : v; }

inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
    {
        return s;
    }
    std::string q = "\"";
    for (const char c : s)
    {
        q += c;
        if (c == '"')
        {
            q += '"';
        }
    }
    return q + "\"";
}

class CsvWriter
{
   public:
    explicit CsvWriter(std::vector<std::string> header) : width_(header.size())
    {
        row(header);
    }

    void row(const std::vector<std::string>& cells)
    {
        if (cells.size() != width_)
        {
            throw Error("CSV row has " + std::to_string(cells.size()) + " cells, header has "
                        + std::to_string(width_));
        }
        for (std::size_t k = 0; k < cells.size(); ++k)
        {
            out_ << (k ? "," : "") << csv_field(cells[k]);
        }
        out_ << "\r\n";
    }

    std::string str() const { return out_.str(); }

    void save(const std::filesystem::path& path) const
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f)
        {
            throw IoError("cannot write " + path.string());
        }
        f << out_.str();
    }

   private:
    std::size_t width_;
    std::ostringstream out_;
};

namespace schema
{
inline const std::vector<std::string> results = {
    "estimator", "trial", "seed",    "snr_db",      "alpha",        "n_p",
    "n_inner",   "nmse_db", "exact_match", "residual_norm"};
inline const std::vector<std::string> aggregate = {
    "estimator", "snr_db", "alpha", "n_p", "trials", "mean_nmse_db", "nmse_of_mean_mse_db",
    "mean_residual_norm"};
inline const std::vector<std::string> timing = {"estimator", "snr_db", "alpha", "trial",
                                                "wall_time_s"};
inline const std::vector<std::string> sweep = {
    "axis",   "snr_db",       "alpha",            "lambda",           "beta",
    "n_outer", "n_inner",     "trials",           "mean_nmse_db",     "sweet_spot_index",
    "sweet_spot_nmse_db", "plateau_nmse_db"};
inline const std::vector<std::string> spectral = {
    "k",     "i",     "t",     "w",     "rho_d", "rho_p", "rho_t", "rho_d_converged",
    "rho_t_converged", "rho_d_method", "rho_p_method", "rho_t_method"};
inline constexpr const char* kVersionTag = "rcflow-csv/1";
}  // namespace schema

// ---------------------------------------------------------------------------
// Worker pool

/// Runs fn(0..n-1) on `width` threads. Results are written by index, so the
/// output order never depends on scheduling. The first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t width, Fn&& fn)
{
    if (width == 0)
    {
        width = std::max(1u, std::thread::hardware_concurrency());
    }
    width = std::min(width, std::max<std::size_t>(n, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    auto worker = [&]() {
        for (;;)
        {
            const std::size_t j = next.fetch_add(1);
            if (j >= n)
            {
                return;
            }
            try
            {
                fn(j);
            }
            catch (...)
            {
                std::lock_guard lock(mu);
                if (!first)
                {
                    first = std::current_exception();
                }
                next.store(n);
            }
        }
    };
    if (width <= 1)
    {
        worker();
    }
    else
    {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < width; ++w)
        {
            pool.emplace_back(worker);
        }
        for (auto& t : pool)
        {
            t.join();
        }
    }
    if (first)
    {
        std::rethrow_exception(first);
    }
}

// ---------------------------------------------------------------------------
// Shared experiment state

/// Test channels, the covariance used by LMMSE and the analytic prior, and
/// the chosen velocity field.
struct Workbench
{
    ExperimentSpec spec;
    std::vector<ChannelMatrix> channels;  // one per trial
    ComplexMatrix r_h;
    std::string r_h_source;  // "model" | "empirical"
    std::optional<AnyField> field;

    SystemDims dims_for(double a) const { return {spec.n_r, spec.n_t, spec.pilots_for(a)}; }
};

inline Workbench make_workbench(const ExperimentSpec& spec, bool need_field)
{
    spec.validate();
    Workbench wb;
    wb.spec = spec;
    const SystemDims dims{spec.n_r, spec.n_t, 1};
    const auto& cm = spec.channel_model;
    Rng test_rng(derive_seed(spec.seed, "test-channels"));
    if (cm.kind == "gaussian")
    {
        const auto model = cm.correlation > 0.0
                               ? GaussianChannelModel::exponential(dims, cm.correlation)
                               : GaussianChannelModel::iid(dims);
        wb.channels = sample_gaussian(model, spec.trials, test_rng).samples;
        wb.r_h = model.row_cov;
        wb.r_h_source = "model";
    }
    else if (cm.kind == "clustered")
    {
        const ClusteredChannelModel model{dims, cm.n_paths, cm.angle_spread};
        wb.channels = sample_clustered(model, spec.trials, test_rng).samples;
        Rng train_rng(derive_seed(spec.seed, "covariance-channels"));
        wb.r_h = empirical_row_covariance(
            sample_clustered(model, spec.covariance_samples, train_rng));
        wb.r_h_source = "empirical";
    }
    else
    {
        auto ds = load_dataset(cm.dataset);
        if (ds.n_r != spec.n_r || ds.n_t != spec.n_t)
        {
            throw ConfigError("dataset dims " + std::to_string(ds.n_r) + "x"
                              + std::to_string(ds.n_t) + " differ from n_r x n_t");
        }
        if (ds.samples.size() < spec.trials)
        {
            throw ConfigError("dataset holds fewer samples than trials");
        }
        wb.r_h = empirical_row_covariance(ds);
        wb.r_h_source = "empirical";
        ds.samples.resize(spec.trials);
        wb.channels = std::move(ds.samples);
    }
    // Exactly Hermitian copy for downstream EVDs.
    wb.r_h = (wb.r_h + adjoint(wb.r_h)) * 0.5;

    if (need_field)
    {
        if (spec.prior == "analytic")
        {
            wb.field.emplace(GaussianAnalyticField(wb.r_h));
        }
        else
        {
            if (!std::filesystem::exists(spec.prior))
            {
                throw ConfigError("weight file not found: " + spec.prior);
            }
            wb.field.emplace(load_network(spec.prior));
        }
    }
    return wb;
}

inline PilotMatrix cell_pilots(const Workbench& wb, std::size_t alpha_index)
{
    Rng rng(derive_seed(wb.spec.seed, "pilots", alpha_index));
    return generate_pilots(wb.dims_for(wb.spec.alpha[alpha_index]), rng);
}

inline Measurement trial_measurement(const Workbench& wb, const PilotMatrix& pilots,
                                     std::size_t snr_index, std::size_t alpha_index,
                                     std::size_t trial)
{
    Rng rng(derive_seed(derive_seed(wb.spec.seed, "noise", snr_index * 4096 + alpha_index),
                        "trial", trial));
    return observe(wb.channels[trial], pilots, wb.spec.sigma_for(wb.spec.snr[snr_index]),
                   rng);
}

inline std::uint64_t trial_init_seed(const ExperimentSpec& spec, std::size_t trial)
{
    return derive_seed(spec.seed, "init", trial);
}

struct TrialResult
{
    std::uint64_t seed = 0;
    std::size_t n_inner = 0;
    double nmse_db = 0.0;
    double residual = 0.0;
    double wall_time_s = 0.0;
    std::vector<double> outer_nmse_db;
};

struct CommandOutput
{
    std::vector<std::filesystem::path> files;
    std::string summary;
};

namespace detail
{

inline void write_metadata(const std::filesystem::path& dir, const std::string& command,
                           const ExperimentSpec& spec, const Workbench* wb = nullptr)
{
    nlohmann::json meta = {{"version", kVersion},
                           {"command", command},
                           {"csv_schema", schema::kVersionTag},
                           {"spec", spec}};
    if (wb)
    {
        meta["covariance_source"] = wb->r_h_source;
    }
    std::ofstream f(dir / "metadata.json", std::ios::trunc);
    if (!f)
    {
        throw IoError("cannot write metadata.json in " + dir.string());
    }
    f << meta.dump(2) << "\n";
}

inline std::filesystem::path prepare_out_dir(const ExperimentSpec& spec)
{
    std::filesystem::path dir(spec.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
    {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    return dir;
}

inline double residual_norm(const Measurement& m, const ComplexMatrix& h)
{
    return frobenius_norm(m.y - matmul(h, m.pilots.matrix()));
}

/// One solver run per trial for a fixed (snr, alpha) cell.
inline std::vector<TrialResult> solver_cell(const Workbench& wb, const SolverConfig& base,
                                            std::size_t snr_index, std::size_t alpha_index,
                                            bool keep_outer = false)
{
    const auto pilots = cell_pilots(wb, alpha_index);
    std::vector<TrialResult> out(wb.spec.trials);
    parallel_for(wb.spec.trials, wb.spec.parallel, [&](std::size_t j) {
        const auto started = std::chrono::steady_clock::now();
        const auto meas = trial_measurement(wb, pilots, snr_index, alpha_index, j);
        SolverConfig cfg = base;
        cfg.seed = trial_init_seed(wb.spec, j);
        const auto est = run(meas, *wb.field, cfg, &wb.channels[j]);
        TrialResult r;
        r.seed = cfg.seed;
        r.n_inner = est.n_inner_used;
        r.nmse_db = nmse_db(est.h_est, wb.channels[j]);
        r.residual = residual_norm(meas, est.h_est);
        if (keep_outer)
        {
            r.outer_nmse_db = est.outer_nmse_db;
        }
        r.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        out[j] = std::move(r);
    });
    return out;
}

inline std::vector<TrialResult> baseline_cell(const Workbench& wb, std::size_t snr_index,
                                              std::size_t alpha_index)
{
    const auto pilots = cell_pilots(wb, alpha_index);
    const double sigma = wb.spec.sigma_for(wb.spec.snr[snr_index]);
    std::optional<LmmseContext> lctx;
    if (wb.spec.estimator == "lmmse")
    {
        lctx = make_lmmse_context(pilots, sigma, wb.r_h);
    }
    std::vector<TrialResult> out(wb.spec.trials);
    parallel_for(wb.spec.trials, wb.spec.parallel, [&](std::size_t j) {
        const auto started = std::chrono::steady_clock::now();
        const auto meas = trial_measurement(wb, pilots, snr_index, alpha_index, j);
        const auto h = lctx ? lmmse(meas.y, *lctx) : least_squares(meas);
        TrialResult r;
        r.seed = trial_init_seed(wb.spec, j);
        r.nmse_db = nmse_db(h, wb.channels[j]);
        r.residual = residual_norm(meas, h);
        r.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        out[j] = r;
    });
    return out;
}

inline double mean_db(const std::vector<TrialResult>& rs)
{
    double s = 0.0;
    for (const auto& r : rs)
    {
        s += export_nmse(r.nmse_db);
    }
    return s / static_cast<double>(rs.size());
}

/// Emits results / aggregate / timing tables for per-trial estimators.
template <class CellFn>
CommandOutput tabulate(const Workbench& wb, const std::string& estimator,
                       const std::string& command, CellFn&& cell)
{
    const auto& spec = wb.spec;
    const auto dir = prepare_out_dir(spec);
    CsvWriter results(schema::results);
    CsvWriter aggregate(schema::aggregate);
    CsvWriter timing(schema::timing);
    std::ostringstream summary;
    for (std::size_t s = 0; s < spec.snr.size(); ++s)
    {
        for (std::size_t a = 0; a < spec.alpha.size(); ++a)
        {
            const auto rs = cell(s, a);
            const auto n_p = std::to_string(spec.pilots_for(spec.alpha[a]));
            double lin = 0.0;
            double res = 0.0;
            for (std::size_t j = 0; j < rs.size(); ++j)
            {
                const auto& r = rs[j];
                const bool exact = std::isinf(r.nmse_db);
                results.row({estimator, std::to_string(j), std::to_string(r.seed),
                             fmt_double(spec.snr[s]), fmt_double(spec.alpha[a]), n_p,
                             std::to_string(r.n_inner), fmt_double(export_nmse(r.nmse_db)),
                             exact ? "1" : "0", fmt_double(r.residual)});
                timing.row({estimator, fmt_double(spec.snr[s]), fmt_double(spec.alpha[a]),
                            std::to_string(j), fmt_double(r.wall_time_s)});
                lin += exact ? 0.0 : std::pow(10.0, r.nmse_db / 10.0);
                res += r.residual;
            }
            const double n = static_cast<double>(rs.size());
            const double mean = mean_db(rs);
            aggregate.row({estimator, fmt_double(spec.snr[s]), fmt_double(spec.alpha[a]), n_p,
                           std::to_string(rs.size()), fmt_double(mean),
                           fmt_double(export_nmse(10.0 * std::log10(lin / n))),
                           fmt_double(res / n)});
            summary << estimator << " snr=" << spec.snr[s] << "dB alpha=" << spec.alpha[a]
                    << " mean NMSE=" << mean << " dB\n";
        }
    }
    results.save(dir / "results.csv");
    aggregate.save(dir / "aggregate.csv");
    timing.save(dir / "timing.csv");
    write_metadata(dir, command, spec, &wb);
    return {{dir / "results.csv", dir / "aggregate.csv", dir / "timing.csv",
             dir / "metadata.json"},
            summary.str()};
}

template <class T>
void reject_duplicates(const std::vector<T>& v, const std::string& name)
{
    if (v.empty())
    {
        throw ConfigError(name + " must be non-empty");
    }
    const std::set<T> seen(v.begin(), v.end());
    if (seen.size() != v.size())
    {
        throw ConfigError(name + " contains duplicate values");
    }
}

/// Trial-averaged per-outer NMSE curve (dB), truncated to n_outer entries.
inline std::vector<double> mean_curve(const std::vector<TrialResult>& rs, std::size_t n_outer)
{
    std::vector<double> curve(n_outer, 0.0);
    for (const auto& r : rs)
    {
        for (std::size_t k = 0; k < n_outer; ++k)
        {
            curve[k] += export_nmse(r.outer_nmse_db[k]);
        }
    }
    for (auto& c : curve)
    {
        c /= static_cast<double>(rs.size());
    }
    return curve;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline CommandOutput cmd_gen_data(const ExperimentSpec& spec)
{
    spec.validate();
    if (spec.count == 0)
    {
        throw ConfigError("count must be >= 1");
    }
    const auto dir = detail::prepare_out_dir(spec);
    const std::filesystem::path path =
        spec.dataset_out.empty() ? dir / "dataset.rcds" : std::filesystem::path(spec.dataset_out);
    const SystemDims dims{spec.n_r, spec.n_t, 1};
    const auto& cm = spec.channel_model;
    Rng rng(derive_seed(spec.seed, "gen-data"));
    Dataset ds;
    if (cm.kind == "gaussian")
    {
        const auto model = cm.correlation > 0.0
                               ? GaussianChannelModel::exponential(dims, cm.correlation)
                               : GaussianChannelModel::iid(dims);
        ds = sample_gaussian(model, spec.count, rng);
    }
    else if (cm.kind == "clustered")
    {
        ds = sample_clustered(ClusteredChannelModel{dims, cm.n_paths, cm.angle_spread},
                              spec.count, rng);
    }
    else
    {
        throw ConfigError("gen-data needs channel_model.kind gaussian or clustered");
    }
    save_dataset(ds, path);
    std::ostringstream summary;
    summary << "wrote " << ds.samples.size() << " samples (" << spec.n_r << "x" << spec.n_t
            << ", " << cm.kind << ") to " << path.string()
            << "; mean |h|^2 = " << ds.mean_entry_power() << "\n";
    return {{path}, summary.str()};
}

inline CommandOutput cmd_run(const ExperimentSpec& spec)
{
    const auto wb = make_workbench(spec, true);
    const auto cfg = spec.solver_config();
    return detail::tabulate(wb, "rcflow", "run", [&](std::size_t s, std::size_t a) {
        return detail::solver_cell(wb, cfg, s, a);
    });
}

inline CommandOutput cmd_baseline(const ExperimentSpec& spec)
{
    const auto wb = make_workbench(spec, false);
    return detail::tabulate(wb, spec.estimator, "baseline", [&](std::size_t s, std::size_t a) {
        return detail::baseline_cell(wb, s, a);
    });
}

inline CommandOutput cmd_sweep(const ExperimentSpec& spec)
{
    spec.validate();
    struct Cell
    {
        std::size_t snr_index;
        std::size_t alpha_index;
        double lambda;
        double beta;
    };
    std::vector<Cell> cells;
    std::vector<std::size_t> n_outer_axis = {spec.n_outer};
    std::vector<std::size_t> n_inner_axis = {spec.n_inner};
    if (spec.axis == "snr")
    {
        detail::reject_duplicates(spec.snr, "snr");
        for (std::size_t s = 0; s < spec.snr.size(); ++s)
        {
            cells.push_back({s, 0, spec.lambda, spec.beta});
        }
    }
    else if (spec.axis == "alpha")
    {
        detail::reject_duplicates(spec.alpha, "alpha");
        for (std::size_t a = 0; a < spec.alpha.size(); ++a)
        {
            cells.push_back({0, a, spec.lambda, spec.beta});
        }
    }
    else if (spec.axis == "lambda_beta")
    {
        detail::reject_duplicates(spec.lambda_values, "lambda_values");
        detail::reject_duplicates(spec.beta_values, "beta_values");
        for (const double l : spec.lambda_values)
        {
            for (const double b : spec.beta_values)
            {
                cells.push_back({0, 0, l, b});
            }
        }
    }
    else if (spec.axis == "n1_n2")
    {
        detail::reject_duplicates(spec.n_outer_values, "n_outer_values");
        detail::reject_duplicates(spec.n_inner_values, "n_inner_values");
        for (const auto v : spec.n_outer_values)
        {
            if (v == 0)
            {
                throw ConfigError("n_outer_values must be >= 1");
            }
        }
        for (const auto v : spec.n_inner_values)
        {
            if (v == 0)
            {
                throw ConfigError("n_inner_values must be >= 1");
            }
        }
        n_outer_axis = spec.n_outer_values;
        n_inner_axis = spec.n_inner_values;
        cells.push_back({0, 0, spec.lambda, spec.beta});
    }
    else
    {
        throw ConfigError("axis must be one of snr, alpha, lambda_beta, n1_n2");
    }

    const auto wb = make_workbench(spec, true);
    const auto dir = detail::prepare_out_dir(spec);
    CsvWriter table(schema::sweep);
    const std::size_t max_outer = *std::max_element(n_outer_axis.begin(), n_outer_axis.end());
    for (const auto& c : cells)
    {
        for (const auto n2 : n_inner_axis)
        {
            auto cfg = spec.solver_config();
            cfg.lambda = c.lambda;
            cfg.beta = c.beta;
            cfg.n_outer = max_outer;
            if (spec.axis == "n1_n2" || !spec.adaptive)
            {
                cfg.n_inner = n2;
            }
            const auto rs = detail::solver_cell(wb, cfg, c.snr_index, c.alpha_index, true);
            for (const auto n1 : n_outer_axis)
            {
                const auto summary = dynamics_summary(detail::mean_curve(rs, n1));
                table.row({spec.axis, fmt_double(spec.snr[c.snr_index]),
                           fmt_double(spec.alpha[c.alpha_index]), fmt_double(c.lambda),
                           fmt_double(c.beta), std::to_string(n1),
                           std::to_string(rs.front().n_inner), std::to_string(rs.size()),
                           fmt_double(summary.nmse_per_outer.back()),
                           std::to_string(summary.sweet_spot_index),
                           fmt_double(summary.sweet_spot_nmse),
                           fmt_double(summary.plateau_nmse)});
            }
        }
    }
    table.save(dir / "sweep.csv");
    detail::write_metadata(dir, "sweep", spec, &wb);
    return {{dir / "sweep.csv", dir / "metadata.json"},
            "sweep over " + spec.axis + ": " + std::to_string(cells.size() * n_inner_axis.size()
                                                              * n_outer_axis.size())
                + " rows\n"};
}

inline CommandOutput cmd_spectral(const ExperimentSpec& spec, SpectralOptions opts = {})
{
    const auto wb = make_workbench(spec, true);
    const auto dir = detail::prepare_out_dir(spec);
    const auto pilots = cell_pilots(wb, 0);
    const auto meas = trial_measurement(wb, pilots, 0, 0, 0);
    auto cfg = spec.solver_config();
    cfg.seed = trial_init_seed(spec, 0);
    const auto report = spectral_report(meas, *wb.field, cfg, opts);
    CsvWriter table(schema::spectral);
    double worst = 0.0;
    for (const auto& s : report.steps)
    {
        worst = std::max(worst, s.rho_t);
        table.row({std::to_string(s.k), std::to_string(s.i), fmt_double(s.t), fmt_double(s.w),
                   fmt_double(s.rho_d), fmt_double(s.rho_p), fmt_double(s.rho_t),
                   s.rho_d_converged ? "1" : "0", s.rho_t_converged ? "1" : "0",
                   SpectralReport::kRhoDMethod, SpectralReport::kRhoPMethod,
                   SpectralReport::kRhoTMethod});
    }
    table.save(dir / "spectral.csv");
    detail::write_metadata(dir, "spectral", spec, &wb);
    return {{dir / "spectral.csv", dir / "metadata.json"},
            std::to_string(report.steps.size()) + " steps, max rho_T = " + fmt_double(worst)
                + "\n"};
}

}  // namespace rcflow
