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

// rcflow command-line front end. Every subcommand reads an optional JSON
// config (--config); flags given on the command line override its fields.
//
// Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
// failure.

#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rcflow/experiment.hpp"
#include "rcflow/fixtures.hpp"

namespace
{

using rcflow::ExperimentSpec;
using Applier = std::function<void(ExperimentSpec&)>;

class Flags
{
   public:
    explicit Flags(CLI::App* sub) : sub_(sub)
    {
        sub_->add_option("--config", config_, "JSON experiment config")->check(CLI::ExistingFile);
    }

    template <class T>
    Flags& add(const std::string& name, T ExperimentSpec::*member, const std::string& help)
    {
        return add<T>(name, [member](ExperimentSpec& s, const T& v) { s.*member = v; }, help);
    }

    template <class T>
    Flags& add(const std::string& name, std::function<void(ExperimentSpec&, const T&)> set,
               const std::string& help)
    {
        auto value = std::make_shared<T>();
        CLI::Option* opt = sub_->add_option(name, *value, help);
        appliers_.push_back([opt, value, set](ExperimentSpec& s) {
            if (opt->count() > 0)
            {
                set(s, *value);
            }
        });
        return *this;
    }

    Flags& toggle(const std::string& name, bool ExperimentSpec::*member, const std::string& help)
    {
        CLI::Option* opt = sub_->add_flag(name, help);
        appliers_.push_back([opt, member](ExperimentSpec& s) {
            if (opt->count() > 0)
            {
                s.*member = true;
            }
        });
        return *this;
    }

    ExperimentSpec resolve() const
    {
        ExperimentSpec spec = config_.empty() ? ExperimentSpec{} : rcflow::load_spec(config_);
        for (const auto& apply : appliers_)
        {
            apply(spec);
        }
        spec.validate();
        return spec;
    }

    CLI::App* app() const { return sub_; }

   private:
    CLI::App* sub_;
    std::string config_;
    std::vector<Applier> appliers_;
};

void add_system(Flags& f)
{
    f.add("--n-r", &ExperimentSpec::n_r, "receive antennas")
        .add("--n-t", &ExperimentSpec::n_t, "transmit antennas")
        .add<std::string>(
            "--model", [](ExperimentSpec& s, const std::string& v) { s.channel_model.kind = v; },
            "channel model: gaussian | clustered | dataset")
        .add<double>(
            "--correlation",
            [](ExperimentSpec& s, const double& v) { s.channel_model.correlation = v; },
            "exponential transmit correlation (gaussian model)")
        .add<std::size_t>(
            "--n-paths", [](ExperimentSpec& s, const std::size_t& v) { s.channel_model.n_paths = v; },
            "paths per channel (clustered model)")
        .add<double>(
            "--angle-spread",
            [](ExperimentSpec& s, const double& v) { s.channel_model.angle_spread = v; },
            "angular spread in radians (clustered model)")
        .add<std::string>(
            "--dataset", [](ExperimentSpec& s, const std::string& v) { s.channel_model.dataset = v; },
            "channel dataset file (dataset model)")
        .add("--seed", &ExperimentSpec::seed, "master seed")
        .add("--out-dir", &ExperimentSpec::out_dir, "output directory");
}

void add_trials(Flags& f)
{
    f.add("--snr", &ExperimentSpec::snr, "SNR values in dB")
        .add("--alpha", &ExperimentSpec::alpha, "pilot ratios N_p / N_t")
        .add("--snr-convention", &ExperimentSpec::snr_convention, "pilot | channel")
        .add("--trials", &ExperimentSpec::trials, "Monte-Carlo trials per cell")
        .add("--parallel", &ExperimentSpec::parallel, "worker threads (0 = all cores)")
        .add("--covariance-samples", &ExperimentSpec::covariance_samples,
             "samples for the empirical covariance");
}

void add_solver(Flags& f)
{
    f.add("--prior", &ExperimentSpec::prior, "'analytic' or a weight file")
        .add("--lambda", &ExperimentSpec::lambda, "inner time schedule exponent")
        .add("--beta", &ExperimentSpec::beta, "rectification schedule exponent")
        .add("--n-outer", &ExperimentSpec::n_outer, "outer iterations")
        .add("--n-inner", &ExperimentSpec::n_inner, "inner steps")
        .toggle("--adaptive", &ExperimentSpec::adaptive, "noise-adaptive inner budget")
        .add("--n-max", &ExperimentSpec::n_max, "adaptive budget upper bound")
        .add("--n-min", &ExperimentSpec::n_min, "adaptive budget lower bound")
        .add<double>(
            "--sigma-max", [](ExperimentSpec& s, const double& v) { s.sigma_max = v; },
            "noise level mapped to n_max")
        .add<double>(
            "--sigma-min", [](ExperimentSpec& s, const double& v) { s.sigma_min = v; },
            "noise level mapped to n_min");
}

int report(const rcflow::CommandOutput& out)
{
    std::cout << out.summary;
    for (const auto& f : out.files)
    {
        std::cout << "  " << f.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"RC-Flow channel estimation experiments"};
    app.set_version_flag("--version", rcflow::kVersion);
    app.require_subcommand(1);

    Flags gen(app.add_subcommand("gen-data", "sample a channel dataset"));
    add_system(gen);
    gen.add("--count", &ExperimentSpec::count, "number of samples")
        .add("--output", &ExperimentSpec::dataset_out, "dataset path");

    Flags run(app.add_subcommand("run", "run RC-Flow over an SNR x alpha grid"));
    add_system(run);
    add_trials(run);
    add_solver(run);

    Flags base(app.add_subcommand("baseline", "run a classical estimator"));
    add_system(base);
    add_trials(base);
    base.add("--estimator", &ExperimentSpec::estimator, "lmmse | least_squares");

    Flags sweep(app.add_subcommand("sweep", "sweep one axis and record solver dynamics"));
    add_system(sweep);
    add_trials(sweep);
    add_solver(sweep);
    sweep.add("--axis", &ExperimentSpec::axis, "snr | alpha | lambda_beta | n1_n2")
        .add("--lambda-values", &ExperimentSpec::lambda_values, "lambda grid")
        .add("--beta-values", &ExperimentSpec::beta_values, "beta grid")
        .add("--n-outer-values", &ExperimentSpec::n_outer_values, "N1 grid")
        .add("--n-inner-values", &ExperimentSpec::n_inner_values, "N2 grid");

    Flags spectral(app.add_subcommand("spectral", "Jacobian spectral radii along a trajectory"));
    add_system(spectral);
    add_trials(spectral);
    add_solver(spectral);

    auto* parity = app.add_subcommand("parity", "compare a weight file against fixtures");
    std::string weights;
    std::string fixtures;
    double tolerance = 1e-5;
    parity->add_option("--weights", weights, "weight file")->required();
    parity->add_option("--fixtures", fixtures, "fixture JSON")->required();
    parity->add_option("--tolerance", tolerance, "max absolute error");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::Success& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return 2;
    }

    try
    {
        if (gen.app()->parsed())
        {
            return report(rcflow::cmd_gen_data(gen.resolve()));
        }
        if (run.app()->parsed())
        {
            return report(rcflow::cmd_run(run.resolve()));
        }
        if (base.app()->parsed())
        {
            return report(rcflow::cmd_baseline(base.resolve()));
        }
        if (sweep.app()->parsed())
        {
            return report(rcflow::cmd_sweep(sweep.resolve()));
        }
        if (spectral.app()->parsed())
        {
            return report(rcflow::cmd_spectral(spectral.resolve()));
        }
        const auto field = rcflow::load_network(weights);
        const auto r = rcflow::check_parity(field, rcflow::load_fixtures(fixtures));
        std::cout << r.count << " fixtures, max |error| = " << r.max_abs_error << "\n";
        return r.max_abs_error <= tolerance ? 0 : 3;
    }
    catch (const rcflow::NumericError& e)
    {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    catch (const rcflow::Error& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
