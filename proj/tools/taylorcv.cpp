// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// taylorcv command line. Exit codes: 0 ok, 1 validation error, 2 numerical
// failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "tcv/bench/experiments.hpp"
#include "tcv/bench/langevin.hpp"
#include "tcv/ndcore/errors.hpp"
#include "tcv/scorenet/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace tcv;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> threads;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Defaults for `experiment`, then the config file, then the global flags.
ExperimentSpec load_spec(const Globals& g, const std::string& experiment) {
    ExperimentSpec spec = g.config.empty()
                              ? ExperimentSpec::defaults(experiment)
                              : parse_experiment_spec(read_file(g.config), experiment);
    if (g.seed) {
        spec.seeds = {*g.seed};
    }
    if (!g.out.empty()) {
        spec.output = g.out;
    }
    if (g.threads) {
        spec.threads = *g.threads;
    }
    spec.validate();
    fs::create_directories(spec.output);
    std::ofstream(fs::path(spec.output) / "spec.json") << experiment_spec_json(spec) << '\n';
    return spec;
}

std::ofstream open_out(const ExperimentSpec& spec, const std::string& name) {
    const fs::path p = fs::path(spec.output) / name;
    std::ofstream out(p);
    require(out.good(), "cannot write '" + p.string() + "'");
    std::cout << "wrote " << p.string() << '\n';
    return out;
}

void write_points(std::ostream& out, const Mat64& m) {
    out << "x0";
    for (std::size_t d = 1; d < m.cols(); ++d) {
        out << ",x" << d;
    }
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t d = 0; d < m.cols(); ++d) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, d));
            out << (d ? "," : "") << buf;
        }
        out << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Taylor-expansion control variates for denoising score matching"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "flat JSON experiment spec");
    app.add_option("--seed", g.seed, "run a single seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

    auto* gen = app.add_subcommand("gen-data", "sample the toy mixture to CSV");
    std::size_t gen_n = 10000;
    gen->add_option("--n", gen_n, "number of samples");

    auto* tr = app.add_subcommand("train", "train a score network and save a checkpoint");
    std::size_t train_steps = 2000;
    bool train_cv = false;
    tr->add_option("--steps", train_steps, "optimizer steps");
    tr->add_flag("--cv", train_cv, "control the gradient with the small-sigma variate");

    auto* beta = app.add_subcommand("beta-study", "objective variate with optimal and unit beta");
    auto* sweep = app.add_subcommand("sigma-sweep", "small- and large-sigma gradient variates");
    auto* kcmp = app.add_subcommand("k-compare", "gradient variates of order 0, 1, 2");
    auto* conv = app.add_subcommand("convergence", "paired training with and without the variate");
    auto* grid = app.add_subcommand("grid", "width/depth grid at fixed parameter budgets");
    auto* opt = app.add_subcommand("optimizer-compare", "variance reduction along SGD and Adam");

    auto* eq = app.add_subcommand("equiv-check", "tape vs assembled gradient variate");
    std::size_t eq_tuples = 100;
    eq->add_option("--tuples", eq_tuples, "random (network, x, z, sigma, k) tuples");

    auto* smp = app.add_subcommand("sample", "annealed Langevin sampling");
    std::string smp_ckpt;
    std::size_t smp_n = 10000, smp_steps = 100, smp_levels = 50;
    double smp_eps = 2e-3, smp_smin = 0.05, smp_smax = 20.0;
    smp->add_option("--checkpoint", smp_ckpt, "network checkpoint; the analytic score if absent");
    smp->add_option("--n", smp_n, "chains");
    smp->add_option("--steps-per-level", smp_steps, "updates per noise level");
    smp->add_option("--step-size", smp_eps, "epsilon");
    smp->add_option("--levels", smp_levels, "noise levels");
    smp->add_option("--sigma-min", smp_smin, "smallest noise level");
    smp->add_option("--sigma-max", smp_smax, "largest noise level");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            ExperimentSpec spec = load_spec(g, "beta-study");
            spec.n_data = gen_n;
            const Dataset data = experiment_dataset(spec, spec.seeds.front());
            auto out = open_out(spec, "data.csv");
            write_points(out, data.samples);
        } else if (tr->parsed()) {
            ExperimentSpec spec = load_spec(g, "beta-study");
            const std::uint64_t seed = spec.seeds.front();
            const Dataset data = experiment_dataset(spec, seed);
            ScoreNetwork net = experiment_network(spec, seed);
            TrainConfig tc = spec.train_config(seed);
            tc.steps = train_steps;
            tc.checkpoint_steps.clear();
            tc.use_cv = train_cv;
            const ControlVariate cv(tc.cv, net.dim());
            auto log = open_out(spec, "train_log.jsonl");
            train(net, data.samples, tc, train_cv ? &cv : nullptr, &log);
            save_checkpoint(net, fs::path(spec.output) / "checkpoint.json");
            std::cout << "wrote " << (fs::path(spec.output) / "checkpoint.json").string() << '\n';
        } else if (beta->parsed()) {
            const ExperimentSpec spec = load_spec(g, "beta-study");
            const VarianceReport rep = run_beta_study(spec);
            auto out = open_out(spec, "beta_study.csv");
            rep.write_csv(out);
        } else if (sweep->parsed()) {
            const ExperimentSpec spec = load_spec(g, "sigma-sweep");
            const VarianceReport rep = run_sigma_sweep(spec);
            auto out = open_out(spec, "sigma_sweep.csv");
            rep.write_csv(out);
        } else if (kcmp->parsed()) {
            const ExperimentSpec spec = load_spec(g, "k-compare");
            const VarianceReport rep = run_k_compare(spec);
            auto out = open_out(spec, "k_compare.csv");
            rep.write_csv(out);
        } else if (conv->parsed()) {
            const ExperimentSpec spec = load_spec(g, "convergence");
            const ConvergenceReport rep = run_convergence(spec, fs::path(spec.output) / "logs");
            auto out = open_out(spec, "convergence.csv");
            rep.write_csv(out);
        } else if (grid->parsed()) {
            const ExperimentSpec spec = load_spec(g, "grid-widthdepth");
            const GridReport rep = run_grid(spec);
            auto out = open_out(spec, "grid.csv");
            rep.write_csv(out);
            for (const auto& mode : spec.grid_modes) {
                auto m = open_out(spec, "grid_" + mode + ".csv");
                rep.write_matrix(m, mode == "spectral");
            }
        } else if (opt->parsed()) {
            const ExperimentSpec spec = load_spec(g, "optimizer-compare");
            const OptimizerReport rep = run_optimizer_compare(spec);
            auto out = open_out(spec, "optimizer_compare.csv");
            rep.write_csv(out);
        } else if (eq->parsed()) {
            const std::uint64_t seed = g.seed.value_or(0);
            const EquivalenceReport rep = equivalence_check(eq_tuples, seed);
            std::printf("tuples %zu  worst/tol small %.3g  large %.3g  fd %.3g  -> %s\n",
                        rep.tuples, rep.worst_small, rep.worst_large, rep.worst_fd,
                        rep.passed() ? "ok" : "MISMATCH");
            if (!rep.passed()) {
                return 2;
            }
        } else if (smp->parsed()) {
            ExperimentSpec spec = load_spec(g, "beta-study");
            const std::uint64_t seed = spec.seeds.front();
            const NoiseSchedule schedule = make_schedule(smp_smin, smp_smax, smp_levels);
            const Dataset data = experiment_dataset(spec, seed);
            const GaussianMixture gm = experiment_mixture(data);
            const ScoreFn score = smp_ckpt.empty() ? mixture_score_fn(gm)
                                                   : network_score(load_checkpoint(smp_ckpt));
            const LangevinInit init =
                smp_ckpt.empty() ? default_init(2, schedule) : gaussian_fit_init(data.samples);
            const Mat64 xs = langevin_sample(score, schedule, smp_steps, smp_eps,
                                             split_stream(RngStream(seed), 6), smp_n, init,
                                             spec.threads);
            const Vec64 frac = component_fractions(gm, xs);
            std::printf("mode mass: %.4f %.4f\n", frac[0], frac[1]);
            auto out = open_out(spec, "samples.csv");
            write_points(out, xs);
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
