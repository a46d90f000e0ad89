// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/dsm/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "tcv/dsm/loss.hpp"
#include "tcv/ndcore/errors.hpp"
#include "tcv/ndcore/parallel.hpp"

namespace tcv {

namespace {

// Samples are grouped in fixed chunks so sums do not depend on the thread count.
constexpr std::size_t kChunk = 8;

void add_into(Vec64& acc, std::span<const double> v) {
    if (acc.empty()) {
        acc.assign(v.begin(), v.end());
        return;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        acc[i] += v[i];
    }
}

std::string json_number(double v) {
    if (!std::isfinite(v)) {
        return "null";
    }
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

} // namespace

void TrainConfig::validate() const {
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(threads >= 1, "train: threads must be >= 1");
    require(ema_decay > 0.0 && ema_decay < 1.0, "train: ema_decay must lie in (0, 1)");
    optimizer.validate();
    if (use_cv) {
        cv.validate();
    }
    make_schedule(sigma_min, sigma_max, levels);
}

BatchStats batch_statistics(const ScoreNetwork& net, const Mat64& batch, const RngStream& rng,
                            const NoiseSchedule& schedule, const ControlVariate* cv,
                            double lambda_power, std::size_t threads) {
    const std::size_t n = batch.rows();
    const std::size_t p = net.param_count();
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<BatchStats> partial(chunks);

    parallel_for(chunks, threads, [&](std::size_t ci) {
        BatchStats& out = partial[ci];
        out.sigma_histogram.assign(schedule.size(), 0);
        if (cv != nullptr) {
            out.acc = VecCovAccumulator(p);
        }
        Tape tape(net.view());
        Vec64 g(p);
        Vec64 c(p);
        const std::size_t end = std::min(n, (ci + 1) * kChunk);
        for (std::size_t i = ci * kChunk; i < end; ++i) {
            RngStream srng = split_stream(rng, i);
            const std::size_t level = schedule.sample_index(srng);
            const double sigma = schedule.levels[level];
            const Vec64 z = gaussian_sample(srng, net.dim());
            const auto x = batch.row(i);
            const double lam = loss_weight(sigma, lambda_power);

            tape.clear();
            const NodeId l = record_dsm_loss(tape, x, z, sigma);
            const NodeId cnode = cv != nullptr ? cv->record(tape, x, z, sigma) : kNoNode;
            tape.forward();
            std::fill(g.begin(), g.end(), 0.0);
            tape.backward_into(l, g, lam);
            if (!all_finite(g)) {
                throw NumericalError("non-finite loss gradient at sample " + std::to_string(i) +
                                     " (sigma " + std::to_string(sigma) + ")");
            }
            ++out.n;
            out.loss_sum += lam * tape.scalar(l);
            ++out.sigma_histogram[level];
            add_into(out.sum_g, g);
            if (cv != nullptr) {
                std::fill(c.begin(), c.end(), 0.0);
                tape.backward_into(cnode, c, lam);
                if (!all_finite(c)) {
                    throw NumericalError("non-finite control variate gradient at sample " +
                                         std::to_string(i) + " (sigma " + std::to_string(sigma) +
                                         ")");
                }
                add_into(out.sum_c, c);
                out.acc.add(g, c);
            }
        }
    });

    BatchStats total;
    total.sigma_histogram.assign(schedule.size(), 0);
    total.sum_g.assign(p, 0.0);
    if (cv != nullptr) {
        total.sum_c.assign(p, 0.0);
        total.acc = VecCovAccumulator(p);
    }
    for (const auto& part : partial) {
        total.n += part.n;
        total.loss_sum += part.loss_sum;
        for (std::size_t l = 0; l < schedule.size(); ++l) {
            total.sigma_histogram[l] += part.sigma_histogram[l];
        }
        for (std::size_t j = 0; j < p; ++j) {
            total.sum_g[j] += part.sum_g[j];
        }
        if (cv != nullptr) {
            for (std::size_t j = 0; j < p; ++j) {
                total.sum_c[j] += part.sum_c[j];
            }
            total.acc.merge(part.acc);
        }
    }
    return total;
}

std::string StepMetrics::to_json() const {
    std::ostringstream ss;
    ss << "{\"step\":" << step << ",\"loss_mean\":" << json_number(loss_mean)
       << ",\"grad_norm\":" << json_number(grad_norm) << ",\"rho_g_batch\":" << json_number(rho_g_batch)
       << ",\"beta_norm\":" << json_number(beta_norm) << ",\"sigma_histogram\":[";
    for (std::size_t i = 0; i < sigma_histogram.size(); ++i) {
        ss << (i ? "," : "") << sigma_histogram[i];
    }
    ss << "]}";
    return ss.str();
}

StepMetrics train_step(ScoreNetwork& net, const Mat64& batch, const RngStream& rng,
                       const NoiseSchedule& schedule, OptimizerState& optimizer,
                       const ControlVariate* cv, BetaTracker* beta, double lambda_power,
                       std::size_t threads) {
    require(batch.rows() >= 1, "train_step: empty batch");
    require(batch.cols() == net.dim(), "train_step: batch rows have the wrong dimension");
    if (cv != nullptr && beta == nullptr) {
        throw ContractViolation("train_step: a control variate needs a beta tracker");
    }
    const BatchStats stats = batch_statistics(net, batch, rng, schedule, cv, lambda_power, threads);
    const double inv_b = 1.0 / static_cast<double>(stats.n);

    StepMetrics m;
    m.step = optimizer.step;
    m.loss_mean = stats.loss_sum * inv_b;
    m.sigma_histogram = stats.sigma_histogram;
    m.rho_g_batch = std::numeric_limits<double>::quiet_NaN();

    Vec64 grad(net.param_count());
    if (cv == nullptr) {
        for (std::size_t j = 0; j < grad.size(); ++j) {
            grad[j] = stats.sum_g[j] * inv_b;
        }
    } else {
        const BetaEstimate b = beta->current(stats.acc);
        for (std::size_t j = 0; j < grad.size(); ++j) {
            grad[j] = (stats.sum_g[j] - b.value[j] * stats.sum_c[j]) * inv_b;
        }
        m.beta_norm = norm2(b.value);
        if (stats.n >= 2 && stats.acc.raw_variance_sum() > 0.0) {
            m.rho_g_batch = gradient_variance_ratio(stats.acc, b.value);
        }
        beta->update(stats.acc);
    }
    if (!all_finite(grad)) {
        throw NumericalError("non-finite batch gradient at step " + std::to_string(optimizer.step));
    }
    m.grad_norm = norm2(grad);
    optimizer_update(optimizer, net.mutable_theta(), grad);
    if (net.config().spectral_norm) {
        spectral_normalize_inplace(net);
    }
    return m;
}

RngStream step_stream(std::uint64_t seed, std::size_t step) {
    return split_stream(RngStream(seed), step);
}

Mat64 draw_batch(const Mat64& data, std::size_t batch_size, RngStream rng) {
    require(data.rows() >= 1, "draw_batch: empty dataset");
    Mat64 batch(batch_size, data.cols());
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto src = data.row(static_cast<std::size_t>(rng.uniform_index(data.rows())));
        std::copy(src.begin(), src.end(), batch.row(i).begin());
    }
    return batch;
}

std::vector<StepMetrics> train(ScoreNetwork& net, const Mat64& data, const TrainConfig& config,
                               const ControlVariate* cv, std::ostream* log,
                               const CheckpointFn& on_checkpoint) {
    config.validate();
    const NoiseSchedule schedule = make_schedule(config.sigma_min, config.sigma_max, config.levels);
    OptimizerState opt(config.optimizer, net.param_count());
    BetaTracker beta(config.beta_mode, net.param_count(), config.beta_fixed, config.ema_decay);
    const ControlVariate* active = config.use_cv ? cv : nullptr;
    if (config.use_cv && cv == nullptr) {
        throw ContractViolation("train: use_cv is set but no control variate was given");
    }
    auto wants = [&](std::size_t s) {
        return std::find(config.checkpoint_steps.begin(), config.checkpoint_steps.end(), s) !=
               config.checkpoint_steps.end();
    };
    if (on_checkpoint && wants(0)) {
        on_checkpoint(0, net);
    }
    std::vector<StepMetrics> metrics;
    metrics.reserve(config.steps);
    for (std::size_t s = 0; s < config.steps; ++s) {
        const RngStream st = step_stream(config.seed, s);
        const Mat64 batch = draw_batch(data, config.batch_size, split_stream(st, 0));
        StepMetrics m = train_step(net, batch, split_stream(st, 1), schedule, opt, active, &beta,
                                   config.lambda_power, config.threads);
        m.step = s + 1;
        if (log != nullptr) {
            *log << m.to_json() << '\n';
        }
        metrics.push_back(std::move(m));
        if (on_checkpoint && wants(s + 1)) {
            on_checkpoint(s + 1, net);
        }
    }
    return metrics;
}

} // namespace tcv
