// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// The toy-mixture experiments. Each run is a pure function of its spec:
// per seed s the data come from split(s, 1), the network init from
// split(s, 2), training draws from seed s, variance measurements from
// split(s, 4) and score-field evaluation points from split(s, 5).

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tcv/bench/measure.hpp"
#include "tcv/bench/mixture.hpp"
#include "tcv/dsm/train.hpp"
#include "tcv/estimator/estimator.hpp"
#include "tcv/scorenet/network.hpp"

namespace tcv {

/// Flat experiment description. JSON keys equal the field names.
struct ExperimentSpec {
    std::string experiment = "beta-study";
    std::vector<double> sigmas;
    std::vector<int> ks = {1};
    std::vector<std::uint64_t> seeds = {0};

    // data
    std::size_t n_data = 10000;
    bool centered = true;

    // measurement
    std::size_t n_calibration = 2000;
    std::size_t n_eval = 10000;
    std::size_t blocks = 20;
    std::size_t bootstrap = 200;
    std::size_t threads = 1;

    // network
    std::vector<std::size_t> hidden_widths = {128, 128};
    std::string activation = "tanh";

    // training; measurements are taken at every listed step (0 = init)
    std::vector<std::size_t> checkpoints = {0};
    std::size_t train_batch = 128;
    std::string optimizer = "adam";
    double lr = 1e-3;
    double sgd_lr = 1e-2;
    double train_sigma_min = 0.1;
    double train_sigma_max = 10.0;
    std::size_t train_levels = 10;
    double lambda_power = 2.0;
    std::string beta_mode = "ema";
    double ema_decay = 0.9;

    // convergence; one step count per batch size
    std::vector<std::size_t> batch_sizes = {10, 1000};
    std::vector<std::size_t> conv_steps = {1000, 200};
    std::size_t eval_points = 2000;

    // width/depth grid
    std::vector<std::size_t> budgets = {17000};
    std::vector<std::size_t> depths = {1, 2, 4, 8};
    std::vector<std::string> grid_modes = {"plain", "spectral"};

    std::string output = "out";

    /// Experiment defaults for the grids and training ranges.
    static ExperimentSpec defaults(const std::string& experiment);

    /// Throws ValidationError for an unknown experiment, a σ grid that is
    /// not positive and strictly ascending, no seeds, or bad counts.
    void validate() const;

    MlpConfig network() const;
    MeasureConfig measure() const;
    NoiseSchedule train_schedule() const;
    /// Training config for one seed; steps = last checkpoint.
    TrainConfig train_config(std::uint64_t seed) const;
};

/// Starts from ExperimentSpec::defaults(experiment) (the document's
/// "experiment" key wins over `fallback_experiment`) and overrides every key
/// present. Unknown keys and type mismatches throw ValidationError.
ExperimentSpec parse_experiment_spec(const std::string& json_text,
                                     const std::string& fallback_experiment = "beta-study");
std::string experiment_spec_json(const ExperimentSpec& spec);

Dataset experiment_dataset(const ExperimentSpec& spec, std::uint64_t seed);
ScoreNetwork experiment_network(const ExperimentSpec& spec, std::uint64_t seed);

/// The mixture in the coordinates of `data` (shifted when centered) and
/// `spec.eval_points` fresh draws in the same coordinates.
GaussianMixture experiment_mixture(const Dataset& data);
Mat64 experiment_eval_points(const ExperimentSpec& spec, const Dataset& data, std::uint64_t seed);

/// Calls `fn(step, net)` at every checkpoint, training in between.
void for_each_checkpoint(const ExperimentSpec& spec, std::uint64_t seed, const Dataset& data,
                         ScoreNetwork net, const CheckpointFn& fn);

/// Per σ and checkpoint, small-σ C^k with k = ks[0]: rows "zero", "opt"
/// (scalar β_opt of the objective), "one" and "per_param" (gradient β_g).
/// rho_obj of the per_param row is NaN. Values are averaged over seeds;
/// SEs combine as sqrt(Σ se²)/S.
VarianceReport run_beta_study(const ExperimentSpec& spec);

/// Per σ and checkpoint, small- and large-σ gradient variates with k = ks[0].
VarianceReport run_sigma_sweep(const ExperimentSpec& spec);

/// Per σ, checkpoint and k in ks, the small-σ gradient variate.
VarianceReport run_k_compare(const ExperimentSpec& spec);

struct ConvergenceRecord {
    std::uint64_t seed = 0;
    std::size_t batch = 0;
    bool cv = false;
    double initial_mse = 0.0;
    double final_mse = 0.0;
    double final_loss = 0.0;
    double mean_rho_g_batch = 0.0; // NaN without a variate
};

struct ConvergenceReport {
    std::vector<ConvergenceRecord> records;

    const ConvergenceRecord& find(std::uint64_t seed, std::size_t batch, bool cv) const;
    void write_csv(std::ostream& out) const;
};

/// For each seed and batch size, paired cv-off/cv-on training from the same
/// init over the same batches and (z, σ) draws; small-σ C^k, k = ks[0].
/// Training logs go to `log_dir` as JSON lines when it is non-empty.
ConvergenceReport run_convergence(const ExperimentSpec& spec,
                                  const std::filesystem::path& log_dir = {});

struct GridCell {
    bool spectral = false;
    std::size_t budget = 0;
    std::size_t depth = 0;
    std::size_t width = 0;
    std::size_t realized = 0;
    bool feasible = false;
    std::uint64_t seed = 0;
    double rho = 0.0; // mean over the σ grid of ρ_g, small-σ C^k, k = ks[0]
    double rho_se = 0.0;
};

struct GridReport {
    std::vector<GridCell> cells;

    /// Mean of rho over seeds; NaN when the cell is infeasible or absent.
    double mean(bool spectral, std::size_t budget, std::size_t depth) const;
    const GridCell* find(bool spectral, std::size_t budget, std::size_t depth,
                         std::uint64_t seed) const;

    void write_csv(std::ostream& out) const;
    /// depth rows × budget columns of seed-averaged ρ; "infeasible" markers.
    void write_matrix(std::ostream& out, bool spectral) const;
};

/// Every (mode, budget, depth) cell via param_count_plan, measured at the
/// last checkpoint. Spectral cells are projected at init and after each step.
GridReport run_grid(const ExperimentSpec& spec);

struct OptimizerRow {
    std::string optimizer;
    std::uint64_t seed = 0;
    std::size_t step = 0;
    double rho_grad = 0.0;
    double rho_grad_se = 0.0;
    double loss_mean = 0.0;
};

struct OptimizerReport {
    std::vector<OptimizerRow> rows;

    const OptimizerRow& find(const std::string& optimizer, std::uint64_t seed,
                             std::size_t step) const;
    void write_csv(std::ostream& out) const;
};

/// SGD (sgd_lr) and Adam (lr) from the same init and batches. At every
/// checkpoint, ρ_g of the small-σ C^k (k = ks[0]) on the training
/// distribution of (x, σ, z).
OptimizerReport run_optimizer_compare(const ExperimentSpec& spec);

/// Worst errors as multiples of their tolerance: 1e-8 relative with a 1e-10
/// absolute floor between the tape gradient of the objective variate and the
/// assembled gradient variate; 1e-4 relative with a 1e-7 floor for central
/// differences of the objective variate.
struct EquivalenceReport {
    std::size_t tuples = 0;
    double worst_small = 0.0;
    double worst_large = 0.0;
    double worst_fd = 0.0;

    bool passed() const noexcept {
        return worst_small <= 1.0 && worst_large <= 1.0 && worst_fd <= 1.0;
    }
};

/// Random tanh 2x64 networks and (x, z, σ, k) tuples, both regimes.
/// Half of the σ draws fall in [0.01, 1], half in [1, 100].
EquivalenceReport equivalence_check(std::size_t tuples, std::uint64_t seed);

} // namespace tcv
