// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Regression coefficients for control variates and variance-reduction
// bookkeeping.

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tcv/ndcore/rng.hpp"

namespace tcv {

/// Coordinates whose control-variate variance falls below this get β = 0.
inline constexpr double kVarianceGuard = 1e-300;

/// One-pass weighted means and co-moments of a pair (L, C).
/// Weights default to 1; scale() multiplies all past weights (EMA decay).
class CovAccumulator {
public:
    void add(double l, double c, double weight = 1.0) noexcept;
    void merge(const CovAccumulator& other) noexcept;
    void scale(double factor) noexcept;

    std::size_t count() const noexcept { return count_; }
    double weight() const noexcept { return weight_; }
    double mean_l() const noexcept { return mean_l_; }
    double mean_c() const noexcept { return mean_c_; }
    double comoment_ll() const noexcept { return m_ll_; }
    double comoment_cc() const noexcept { return m_cc_; }
    double comoment_lc() const noexcept { return m_lc_; }

    /// Unbiased (unit weights) sample statistics; require count >= 2.
    double var_l() const;
    double var_c() const;
    double cov() const;

private:
    std::size_t count_ = 0;
    double weight_ = 0.0;
    double mean_l_ = 0.0;
    double mean_c_ = 0.0;
    double m_ll_ = 0.0;
    double m_cc_ = 0.0;
    double m_lc_ = 0.0;
};

/// Per-coordinate CovAccumulator over vectors (gradient g and its variate c).
class VecCovAccumulator {
public:
    VecCovAccumulator() = default;
    explicit VecCovAccumulator(std::size_t dim);

    void add(std::span<const double> g, std::span<const double> c, double weight = 1.0);
    void merge(const VecCovAccumulator& other);
    void scale(double factor) noexcept;

    std::size_t dim() const noexcept { return mean_g_.size(); }
    std::size_t count() const noexcept { return count_; }
    double weight() const noexcept { return weight_; }
    std::span<const double> mean_g() const noexcept { return mean_g_; }
    std::span<const double> mean_c() const noexcept { return mean_c_; }
    std::span<const double> comoment_gg() const noexcept { return m_gg_; }
    std::span<const double> comoment_cc() const noexcept { return m_cc_; }
    std::span<const double> comoment_gc() const noexcept { return m_gc_; }

    /// Σ_j Var(g_j - β_j c_j) and Σ_j Var(g_j), normalised by weight - 1.
    double controlled_variance_sum(std::span<const double> beta) const;
    double raw_variance_sum() const;

private:
    std::size_t count_ = 0;
    double weight_ = 0.0;
    std::vector<double> mean_g_, mean_c_, m_gg_, m_cc_, m_gc_;
};

/// Cov(L, C) / Var(C); 0 when Var(C) <= kVarianceGuard. Requires count >= 2.
double beta_opt(const CovAccumulator& acc);
std::vector<double> beta_opt(const VecCovAccumulator& acc);

/// (1/N) Σ (L_i - β C_i) + β γ
double regression_estimate(std::span<const double> l, std::span<const double> c, double beta,
                           double known_mean = 0.0);

/// (Var L - 2β Cov + β² Var C) / N
double predicted_variance(double var_l, double var_c, double cov, double beta, std::size_t n);

/// Ratio of unbiased sample variances of paired samples.
double variance_ratio(std::span<const double> controlled, std::span<const double> raw);

/// Σ_j Var(g_j - β_j c_j) / Σ_j Var(g_j).
double gradient_variance_ratio(const VecCovAccumulator& acc, std::span<const double> beta);

/// Coordinate-wise β_opt over a batch of (∂_θL_i, C_{g,i}).
std::vector<double> beta_gradient(std::span<const std::vector<double>> grads,
                                  std::span<const std::vector<double>> cvs);

enum class BetaMode { fixed, batch_optimal, ema_optimal };

const char* beta_mode_name(BetaMode mode) noexcept;
BetaMode parse_beta_mode(const std::string& name);

struct BetaEstimate {
    BetaMode mode = BetaMode::ema_optimal;
    std::vector<double> value; // length 1 for a scalar β
    std::size_t samples = 0;
};

/// Per-parameter β_g used during training.
///   fixed:         a constant value for every coordinate
///   batch_optimal: β_opt of the current batch
///   ema_optimal:   β_opt of decayed accumulators over past batches (β = 0
///                  before the first batch); the current batch is folded in
///                  after use.
class BetaTracker {
public:
    BetaTracker(BetaMode mode, std::size_t dim, double fixed_value = 0.0, double decay = 0.9);

    BetaMode mode() const noexcept { return mode_; }
    double decay() const noexcept { return decay_; }

    /// β for a batch whose statistics are in `batch`.
    BetaEstimate current(const VecCovAccumulator& batch) const;

    /// Folds a finished batch into the EMA state (no-op for other modes).
    void update(const VecCovAccumulator& batch);

private:
    BetaMode mode_;
    std::size_t dim_;
    double fixed_;
    double decay_;
    VecCovAccumulator ema_;
};

/// Standard deviation of `statistic` over bootstrap resamples of n units.
double bootstrap_se(std::size_t n, std::size_t resamples, RngStream rng,
                    const std::function<double(std::span<const std::size_t>)>& statistic);

struct VarianceRow {
    double sigma = 0.0;
    std::string regime;
    int k = 0;
    std::string beta_mode;
    double rho_obj = 0.0;
    double rho_obj_se = 0.0;
    double rho_grad = 0.0;
    double rho_grad_se = 0.0;
    double beta_mean = 0.0;
    std::size_t n_samples = 0;
    std::size_t step = 0; // training step of the measured parameters
};

struct VarianceReport {
    std::vector<VarianceRow> rows;

    static const char* csv_header() noexcept;
    void write_csv(std::ostream& out) const;
    std::string to_csv() const;
};

} // namespace tcv
