// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/bench/measure.hpp"

#include <algorithm>
#include <cmath>

#include "tcv/dsm/loss.hpp"
#include "tcv/estimator/estimator.hpp"
#include "tcv/ndcore/errors.hpp"
#include "tcv/ndcore/parallel.hpp"

namespace tcv {

namespace {

struct Block {
    std::vector<VecCovAccumulator> grad;  // one per variate
    std::vector<CovAccumulator> obj;      // calibration only
    Vec64 loss;                           // λL per sample
    std::vector<Vec64> cv;                // λC per sample, per variate
};

// Runs samples [begin, end) of a phase; sample i uses split_stream(rng, i).
void run_block(const ScoreNetwork& net, const Mat64& data, const NoiseSchedule& schedule,
               std::span<const ControlVariate* const> cvs, double lambda_power,
               const RngStream& rng, std::size_t begin, std::size_t end, Block& out) {
    const std::size_t p = net.param_count();
    const std::size_t m = cvs.size();
    out.grad.assign(m, VecCovAccumulator(p));
    out.obj.assign(m, CovAccumulator{});
    out.loss.clear();
    out.cv.assign(m, Vec64{});
    Tape tape(net.view());
    Vec64 g(p);
    Vec64 c(p);
    std::vector<NodeId> cnodes(m);
    for (std::size_t i = begin; i < end; ++i) {
        RngStream srng = split_stream(rng, i);
        const auto x = data.row(srng.uniform_index(data.rows()));
        const double sigma = schedule.levels[schedule.sample_index(srng)];
        const Vec64 z = gaussian_sample(srng, net.dim());
        const double lam = loss_weight(sigma, lambda_power);

        tape.clear();
        const NodeId l = record_dsm_loss(tape, x, z, sigma);
        for (std::size_t j = 0; j < m; ++j) {
            cnodes[j] = cvs[j]->record(tape, x, z, sigma);
        }
        tape.forward();
        std::fill(g.begin(), g.end(), 0.0);
        tape.backward_into(l, g, lam);
        const double lv = lam * tape.scalar(l);
        out.loss.push_back(lv);
        for (std::size_t j = 0; j < m; ++j) {
            std::fill(c.begin(), c.end(), 0.0);
            tape.backward_into(cnodes[j], c, lam);
            if (!all_finite(g) || !all_finite(c)) {
                throw NumericalError("non-finite gradient while measuring at sigma " +
                                     std::to_string(sigma));
            }
            const double cv = lam * tape.scalar(cnodes[j]);
            out.grad[j].add(g, c);
            out.obj[j].add(lv, cv);
            out.cv[j].push_back(cv);
        }
    }
}

std::vector<Block> run_phase(const ScoreNetwork& net, const Mat64& data,
                             const NoiseSchedule& schedule,
                             std::span<const ControlVariate* const> cvs,
                             const MeasureConfig& config, const RngStream& rng, std::size_t n,
                             std::size_t blocks) {
    std::vector<Block> out(blocks);
    parallel_for(blocks, config.threads, [&](std::size_t b) {
        const std::size_t begin = n * b / blocks;
        const std::size_t end = n * (b + 1) / blocks;
        run_block(net, data, schedule, cvs, config.lambda_power, rng, begin, end, out[b]);
    });
    return out;
}

// Per-block summaries of u = g - βc (u = g when β is empty) relative to the
// pooled mean: a_b = Σ_j [M2_bj + n_b d_bj²] and Gram entries d_b·d_c n_b n_c,
// with d_b the block mean minus the pooled mean. For block multiplicities w the
// pooled second moment summed over coordinates is
//   Σ_b w_b a_b - (Σ_bc w_b w_c G_bc) / Σ_b w_b n_b.
struct BlockSums {
    Vec64 n;
    Vec64 a;
    Mat64 gram;

    double m2(std::span<const double> w) const {
        double first = 0.0;
        double total = 0.0;
        double quad = 0.0;
        for (std::size_t b = 0; b < n.size(); ++b) {
            first += w[b] * a[b];
            total += w[b] * n[b];
            for (std::size_t c = 0; c < n.size(); ++c) {
                quad += w[b] * w[c] * gram(b, c);
            }
        }
        return first - quad / total;
    }
};

BlockSums block_sums(const std::vector<Block>& blocks, std::size_t j, std::span<const double> beta) {
    const std::size_t nb = blocks.size();
    const std::size_t p = blocks[0].grad[j].dim();
    BlockSums out{Vec64(nb), Vec64(nb, 0.0), Mat64(nb, nb)};
    std::vector<Vec64> mean(nb, Vec64(p));
    Vec64 pooled(p, 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& acc = blocks[b].grad[j];
        out.n[b] = static_cast<double>(acc.count());
        total += out.n[b];
        for (std::size_t q = 0; q < p; ++q) {
            const double bq = beta.empty() ? 0.0 : beta[q];
            mean[b][q] = acc.mean_g()[q] - bq * acc.mean_c()[q];
            pooled[q] += out.n[b] * mean[b][q];
        }
    }
    for (double& v : pooled) {
        v /= total;
    }
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& acc = blocks[b].grad[j];
        double a = 0.0;
        for (std::size_t q = 0; q < p; ++q) {
            const double bq = beta.empty() ? 0.0 : beta[q];
            const double m2 = acc.comoment_gg()[q] - 2.0 * bq * acc.comoment_gc()[q] +
                              bq * bq * acc.comoment_cc()[q];
            mean[b][q] -= pooled[q];
            a += m2 + out.n[b] * mean[b][q] * mean[b][q];
        }
        out.a[b] = a;
    }
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t c = b; c < nb; ++c) {
            const double v = out.n[b] * out.n[c] * dot(mean[b], mean[c]);
            out.gram(b, c) = v;
            out.gram(c, b) = v;
        }
    }
    return out;
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

// Var(L - βC) / Var(L) over the chosen sample indices.
double objective_ratio(std::span<const double> l, std::span<const double> c, double beta,
                       std::span<const std::size_t> idx) {
    CovAccumulator a;
    for (std::size_t i : idx) {
        a.add(l[i], c[i]);
    }
    const double vl = a.var_l();
    if (!(vl > 0.0)) {
        return std::nan("");
    }
    return (vl - 2.0 * beta * a.cov() + beta * beta * a.var_c()) / vl;
}

} // namespace

void MeasureConfig::validate() const {
    require(n_calibration >= 2, "measure: n_calibration must be >= 2");
    require(blocks >= 2, "measure: blocks must be >= 2");
    require(n_eval >= 2 * blocks, "measure: n_eval must give every block two samples");
    require(threads >= 1, "measure: threads must be >= 1");
}

NoiseSchedule fixed_sigma(double sigma) {
    require(sigma > 0.0 && std::isfinite(sigma), "fixed_sigma: sigma must be positive");
    return NoiseSchedule{sigma, sigma, {sigma}};
}

Measurement measure_variance(const ScoreNetwork& net, const Mat64& data,
                             const NoiseSchedule& schedule,
                             std::span<const ControlVariate* const> cvs,
                             const MeasureConfig& config, const RngStream& rng) {
    config.validate();
    require(data.rows() >= 1 && data.cols() == net.dim(), "measure: data do not match network");
    require(schedule.size() >= 1, "measure: empty schedule");
    require(!cvs.empty(), "measure: no control variates");
    const std::size_t m = cvs.size();
    const std::size_t p = net.param_count();

    // Calibration.
    const std::size_t cal_blocks = std::min<std::size_t>(config.n_calibration, 16);
    const auto cal = run_phase(net, data, schedule, cvs, config, split_stream(rng, 0),
                               config.n_calibration, cal_blocks);
    std::vector<double> beta_obj(m);
    std::vector<Vec64> beta_g(m);
    Measurement out;
    out.cvs.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        CovAccumulator so;
        VecCovAccumulator sg(p);
        for (const auto& b : cal) {
            so.merge(b.obj[j]);
            sg.merge(b.grad[j]);
        }
        beta_obj[j] = beta_opt(so);
        beta_g[j] = beta_opt(sg);
        out.cvs[j].beta_obj = beta_obj[j];
        out.cvs[j].beta_grad_mean = mean_of(beta_g[j]);
    }

    // Evaluation.
    const auto ev = run_phase(net, data, schedule, cvs, config, split_stream(rng, 1),
                              config.n_eval, config.blocks);
    Vec64 loss;
    std::vector<Vec64> cv(m);
    for (const auto& b : ev) {
        loss.insert(loss.end(), b.loss.begin(), b.loss.end());
        for (std::size_t j = 0; j < m; ++j) {
            cv[j].insert(cv[j].end(), b.cv[j].begin(), b.cv[j].end());
        }
    }
    out.n_eval = loss.size();
    out.loss_mean = mean_of(loss);

    std::vector<std::size_t> all(loss.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    std::vector<std::size_t> all_blocks(ev.size());
    for (std::size_t i = 0; i < all_blocks.size(); ++i) {
        all_blocks[i] = i;
    }
    const RngStream boot = split_stream(rng, 2);
    for (std::size_t j = 0; j < m; ++j) {
        CvMeasurement& r = out.cvs[j];
        const Vec64 scalar_beta(p, beta_obj[j]);
        const Vec64 ones(p, 1.0);
        auto obj_ratio = [&](double beta, std::uint64_t key) {
            const auto stat = [&](std::span<const std::size_t> idx) {
                return objective_ratio(loss, cv[j], beta, idx);
            };
            return Ratio{stat(all), bootstrap_se(loss.size(), config.bootstrap,
                                                 split_stream(boot, 10 * j + key), stat)};
        };
        auto grad_ratio = [&](std::span<const double> beta, std::uint64_t key) {
            const BlockSums ctrl = block_sums(ev, j, beta);
            const BlockSums raw = block_sums(ev, j, {});
            const auto stat = [&](std::span<const std::size_t> idx) {
                Vec64 w(ev.size(), 0.0);
                for (std::size_t b : idx) {
                    w[b] += 1.0;
                }
                const double r = raw.m2(w);
                return r > 0.0 ? ctrl.m2(w) / r : std::nan("");
            };
            return Ratio{stat(all_blocks), bootstrap_se(ev.size(), config.bootstrap,
                                                        split_stream(boot, 10 * j + key), stat)};
        };
        r.rho_obj_opt = obj_ratio(beta_obj[j], 0);
        r.rho_obj_one = obj_ratio(1.0, 1);
        r.rho_grad_obj_beta = grad_ratio(scalar_beta, 2);
        r.rho_grad_one = grad_ratio(ones, 3);
        r.rho_grad = grad_ratio(beta_g[j], 4);
    }
    return out;
}

} // namespace tcv
