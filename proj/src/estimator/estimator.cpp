// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/estimator/estimator.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "tcv/ndcore/errors.hpp"
#include "tcv/ndcore/linalg.hpp"

namespace tcv {

void CovAccumulator::add(double l, double c, double weight) noexcept {
    ++count_;
    weight_ += weight;
    const double dl = l - mean_l_;
    const double dc = c - mean_c_;
    const double r = weight / weight_;
    mean_l_ += r * dl;
    mean_c_ += r * dc;
    m_ll_ += weight * dl * (l - mean_l_);
    m_cc_ += weight * dc * (c - mean_c_);
    m_lc_ += weight * dl * (c - mean_c_);
}

void CovAccumulator::merge(const CovAccumulator& o) noexcept {
    if (o.weight_ == 0.0) {
        return;
    }
    if (weight_ == 0.0) {
        *this = o;
        return;
    }
    const double w = weight_ + o.weight_;
    const double dl = o.mean_l_ - mean_l_;
    const double dc = o.mean_c_ - mean_c_;
    const double f = weight_ * o.weight_ / w;
    mean_l_ += dl * (o.weight_ / w);
    mean_c_ += dc * (o.weight_ / w);
    m_ll_ += o.m_ll_ + dl * dl * f;
    m_cc_ += o.m_cc_ + dc * dc * f;
    m_lc_ += o.m_lc_ + dl * dc * f;
    weight_ = w;
    count_ += o.count_;
}

void CovAccumulator::scale(double factor) noexcept {
    weight_ *= factor;
    m_ll_ *= factor;
    m_cc_ *= factor;
    m_lc_ *= factor;
}

namespace {

double unbiased(double comoment, double weight, std::size_t count) {
    require(count >= 2, "variance needs at least two samples");
    return comoment / (weight - 1.0);
}

} // namespace

double CovAccumulator::var_l() const { return unbiased(m_ll_, weight_, count_); }
double CovAccumulator::var_c() const { return unbiased(m_cc_, weight_, count_); }
double CovAccumulator::cov() const { return unbiased(m_lc_, weight_, count_); }

VecCovAccumulator::VecCovAccumulator(std::size_t dim)
    : mean_g_(dim, 0.0), mean_c_(dim, 0.0), m_gg_(dim, 0.0), m_cc_(dim, 0.0), m_gc_(dim, 0.0) {}

void VecCovAccumulator::add(std::span<const double> g, std::span<const double> c, double weight) {
    if (g.size() != dim() || c.size() != dim()) {
        throw ContractViolation("VecCovAccumulator::add: length mismatch");
    }
    ++count_;
    weight_ += weight;
    const double r = weight / weight_;
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double dg = g[j] - mean_g_[j];
        const double dc = c[j] - mean_c_[j];
        mean_g_[j] += r * dg;
        mean_c_[j] += r * dc;
        const double eg = g[j] - mean_g_[j];
        const double ec = c[j] - mean_c_[j];
        m_gg_[j] += weight * dg * eg;
        m_cc_[j] += weight * dc * ec;
        m_gc_[j] += weight * dg * ec;
    }
}

void VecCovAccumulator::merge(const VecCovAccumulator& o) {
    if (o.weight_ == 0.0) {
        return;
    }
    if (weight_ == 0.0) {
        *this = o;
        return;
    }
    if (o.dim() != dim()) {
        throw ContractViolation("VecCovAccumulator::merge: length mismatch");
    }
    const double w = weight_ + o.weight_;
    const double f = weight_ * o.weight_ / w;
    const double r = o.weight_ / w;
    for (std::size_t j = 0; j < dim(); ++j) {
        const double dg = o.mean_g_[j] - mean_g_[j];
        const double dc = o.mean_c_[j] - mean_c_[j];
        mean_g_[j] += dg * r;
        mean_c_[j] += dc * r;
        m_gg_[j] += o.m_gg_[j] + dg * dg * f;
        m_cc_[j] += o.m_cc_[j] + dc * dc * f;
        m_gc_[j] += o.m_gc_[j] + dg * dc * f;
    }
    weight_ = w;
    count_ += o.count_;
}

void VecCovAccumulator::scale(double factor) noexcept {
    weight_ *= factor;
    for (std::size_t j = 0; j < dim(); ++j) {
        m_gg_[j] *= factor;
        m_cc_[j] *= factor;
        m_gc_[j] *= factor;
    }
}

double VecCovAccumulator::controlled_variance_sum(std::span<const double> beta) const {
    require(count_ >= 2, "variance needs at least two samples");
    if (beta.size() != dim()) {
        throw ContractViolation("controlled_variance_sum: beta length mismatch");
    }
    std::vector<double> terms(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
        const double b = beta[j];
        terms[j] = std::max(0.0, m_gg_[j] - 2.0 * b * m_gc_[j] + b * b * m_cc_[j]);
    }
    return pairwise_sum(terms) / (weight_ - 1.0);
}

double VecCovAccumulator::raw_variance_sum() const {
    require(count_ >= 2, "variance needs at least two samples");
    return pairwise_sum(m_gg_) / (weight_ - 1.0);
}

namespace {

double guarded_ratio(double m_lc, double m_cc, double weight) {
    if (!(m_cc / weight > kVarianceGuard)) {
        return 0.0;
    }
    return m_lc / m_cc;
}

} // namespace

double beta_opt(const CovAccumulator& acc) {
    require(acc.count() >= 2, "beta_opt: need at least two samples");
    return guarded_ratio(acc.comoment_lc(), acc.comoment_cc(), acc.weight());
}

std::vector<double> beta_opt(const VecCovAccumulator& acc) {
    require(acc.count() >= 2, "beta_opt: need at least two samples");
    std::vector<double> b(acc.dim());
    const auto lc = acc.comoment_gc();
    const auto cc = acc.comoment_cc();
    for (std::size_t j = 0; j < b.size(); ++j) {
        b[j] = guarded_ratio(lc[j], cc[j], acc.weight());
    }
    return b;
}

double regression_estimate(std::span<const double> l, std::span<const double> c, double beta,
                           double known_mean) {
    require(!l.empty() && l.size() == c.size(), "regression_estimate: need N >= 1 paired samples");
    std::vector<double> d(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) {
        d[i] = l[i] - beta * c[i];
    }
    const double mean = pairwise_sum(d) / static_cast<double>(d.size());
    return beta == 0.0 ? mean : mean + beta * known_mean;
}

double predicted_variance(double var_l, double var_c, double cov, double beta, std::size_t n) {
    require(n >= 1, "predicted_variance: N must be >= 1");
    require(var_l >= 0.0 && var_c >= 0.0, "predicted_variance: variances must be non-negative");
    return (var_l - 2.0 * beta * cov + beta * beta * var_c) / static_cast<double>(n);
}

namespace {

double sample_var(std::span<const double> v) {
    const double mean = pairwise_sum(v) / static_cast<double>(v.size());
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        sq[i] = (v[i] - mean) * (v[i] - mean);
    }
    return pairwise_sum(sq) / static_cast<double>(v.size() - 1);
}

} // namespace

double variance_ratio(std::span<const double> controlled, std::span<const double> raw) {
    require(controlled.size() == raw.size() && raw.size() >= 2,
            "variance_ratio: need paired samples, N >= 2");
    const double vr = sample_var(raw);
    if (!(vr > 0.0)) {
        throw NumericalError("variance_ratio: raw samples have zero variance");
    }
    return sample_var(controlled) / vr;
}

double gradient_variance_ratio(const VecCovAccumulator& acc, std::span<const double> beta) {
    const double raw = acc.raw_variance_sum();
    if (!(raw > 0.0)) {
        throw NumericalError("gradient_variance_ratio: raw gradients have zero variance");
    }
    return acc.controlled_variance_sum(beta) / raw;
}

std::vector<double> beta_gradient(std::span<const std::vector<double>> grads,
                                  std::span<const std::vector<double>> cvs) {
    require(grads.size() >= 2 && grads.size() == cvs.size(),
            "beta_gradient: need a batch of at least two paired samples");
    VecCovAccumulator acc(grads[0].size());
    for (std::size_t i = 0; i < grads.size(); ++i) {
        acc.add(grads[i], cvs[i]);
    }
    return beta_opt(acc);
}

const char* beta_mode_name(BetaMode mode) noexcept {
    switch (mode) {
    case BetaMode::fixed:
        return "fixed";
    case BetaMode::batch_optimal:
        return "batch";
    case BetaMode::ema_optimal:
        return "ema";
    }
    return "?";
}

BetaMode parse_beta_mode(const std::string& name) {
    if (name == "fixed") {
        return BetaMode::fixed;
    }
    if (name == "batch" || name == "batch_optimal") {
        return BetaMode::batch_optimal;
    }
    if (name == "ema" || name == "ema_optimal") {
        return BetaMode::ema_optimal;
    }
    throw ValidationError("unknown beta mode '" + name + "' (expected fixed, batch or ema)");
}

BetaTracker::BetaTracker(BetaMode mode, std::size_t dim, double fixed_value, double decay)
    : mode_(mode), dim_(dim), fixed_(fixed_value), decay_(decay), ema_(dim) {
    require(decay > 0.0 && decay < 1.0, "BetaTracker: EMA decay must lie in (0, 1)");
    require(std::isfinite(fixed_value), "BetaTracker: fixed beta must be finite");
}

BetaEstimate BetaTracker::current(const VecCovAccumulator& batch) const {
    BetaEstimate e;
    e.mode = mode_;
    switch (mode_) {
    case BetaMode::fixed:
        e.value.assign(dim_, fixed_);
        break;
    case BetaMode::batch_optimal:
        e.value = batch.count() >= 2 ? beta_opt(batch) : std::vector<double>(dim_, 0.0);
        e.samples = batch.count();
        break;
    case BetaMode::ema_optimal:
        e.value = ema_.count() >= 2 ? beta_opt(ema_) : std::vector<double>(dim_, 0.0);
        e.samples = ema_.count();
        break;
    }
    return e;
}

void BetaTracker::update(const VecCovAccumulator& batch) {
    if (mode_ != BetaMode::ema_optimal) {
        return;
    }
    ema_.scale(decay_);
    ema_.merge(batch);
}

double bootstrap_se(std::size_t n, std::size_t resamples, RngStream rng,
                    const std::function<double(std::span<const std::size_t>)>& statistic) {
    require(n >= 1 && resamples >= 2, "bootstrap_se: need n >= 1 and >= 2 resamples");
    std::vector<std::size_t> idx(n);
    std::vector<double> stats(resamples);
    for (std::size_t r = 0; r < resamples; ++r) {
        for (auto& i : idx) {
            i = static_cast<std::size_t>(rng.uniform_index(n));
        }
        stats[r] = statistic(idx);
    }
    return std::sqrt(sample_var(stats));
}

const char* VarianceReport::csv_header() noexcept {
    return "sigma,regime,k,beta_mode,rho_obj,rho_obj_se,rho_grad,rho_grad_se,beta_mean,n_samples,step";
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

void VarianceReport::write_csv(std::ostream& out) const {
    out << csv_header() << '\n';
    for (const auto& r : rows) {
        out << num(r.sigma) << ',' << r.regime << ',' << r.k << ',' << r.beta_mode << ','
            << num(r.rho_obj) << ',' << num(r.rho_obj_se) << ',' << num(r.rho_grad) << ','
            << num(r.rho_grad_se) << ',' << num(r.beta_mean) << ',' << r.n_samples << ',' << r.step << '\n';
    }
}

std::string VarianceReport::to_csv() const {
    std::ostringstream ss;
    write_csv(ss);
    return ss.str();
}

} // namespace tcv
