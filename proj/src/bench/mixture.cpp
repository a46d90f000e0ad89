// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/bench/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tcv/ndcore/errors.hpp"

namespace tcv {

void GaussianMixture::validate() const {
    require(!weights.empty(), "mixture: no components");
    require(weights.size() == means.size(), "mixture: one mean per weight");
    require(variance > 0.0 && std::isfinite(variance), "mixture: variance must be positive");
    double total = 0.0;
    for (double w : weights) {
        require(w > 0.0, "mixture: weights must be positive");
        total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "mixture: weights must sum to 1");
    const std::size_t d = means[0].size();
    require(d >= 1, "mixture: empty mean");
    for (const auto& m : means) {
        require(m.size() == d, "mixture: means differ in dimension");
    }
}

Vec64 GaussianMixture::mean() const {
    Vec64 out(dim(), 0.0);
    for (std::size_t i = 0; i < components(); ++i) {
        axpy(weights[i], means[i], out);
    }
    return out;
}

GaussianMixture GaussianMixture::shifted(std::span<const double> offset) const {
    require(offset.size() == dim(), "mixture: offset has the wrong dimension");
    GaussianMixture out = *this;
    for (auto& m : out.means) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            m[j] += offset[j];
        }
    }
    return out;
}

GaussianMixture GaussianMixture::smoothed(double sigma) const {
    GaussianMixture out = *this;
    out.variance = variance + sigma * sigma;
    return out;
}

Vec64 GaussianMixture::component_log_terms(std::span<const double> x) const {
    require(x.size() == dim(), "mixture: point has the wrong dimension");
    const double d = static_cast<double>(dim());
    const double norm = -0.5 * d * std::log(2.0 * std::numbers::pi * variance);
    Vec64 out(components());
    for (std::size_t i = 0; i < components(); ++i) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double t = x[j] - means[i][j];
            r2 += t * t;
        }
        out[i] = std::log(weights[i]) + norm - 0.5 * r2 / variance;
    }
    return out;
}

double GaussianMixture::log_density(std::span<const double> x) const {
    const Vec64 t = component_log_terms(x);
    const double m = *std::max_element(t.begin(), t.end());
    double s = 0.0;
    for (double v : t) {
        s += std::exp(v - m);
    }
    return m + std::log(s);
}

double GaussianMixture::density(std::span<const double> x) const {
    return std::exp(log_density(x));
}

Vec64 GaussianMixture::responsibilities(std::span<const double> x) const {
    Vec64 t = component_log_terms(x);
    const double m = *std::max_element(t.begin(), t.end());
    double s = 0.0;
    for (double& v : t) {
        v = std::exp(v - m);
        s += v;
    }
    for (double& v : t) {
        v /= s;
    }
    return t;
}

GaussianMixture toy_mixture() {
    return GaussianMixture{{0.2, 0.8}, {{5.0, 5.0}, {-5.0, -5.0}}, 1.0};
}

double density_integral(const GaussianMixture& gm, double lo, double hi, std::size_t n) {
    require(gm.dim() == 2, "density_integral: two-dimensional mixtures only");
    require(hi > lo && n >= 1, "density_integral: empty grid");
    const double h = (hi - lo) / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double p[2] = {lo + (static_cast<double>(i) + 0.5) * h,
                                 lo + (static_cast<double>(j) + 0.5) * h};
            row += gm.density(p);
        }
        total += row;
    }
    return total * h * h;
}

Vec64 mixture_score(const GaussianMixture& gm, std::span<const double> x) {
    const Vec64 r = gm.responsibilities(x);
    Vec64 out(gm.dim(), 0.0);
    for (std::size_t i = 0; i < gm.components(); ++i) {
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += r[i] * (gm.means[i][j] - x[j]);
        }
    }
    for (double& v : out) {
        v /= gm.variance;
    }
    return out;
}

Dataset make_dataset(Mat64 samples, bool center, int moment_order) {
    require(samples.rows() >= 1 && samples.cols() >= 1, "dataset: no samples");
    Dataset ds;
    ds.centered = center;
    ds.offset.assign(samples.cols(), 0.0);
    if (center) {
        const std::size_t n = samples.rows();
        for (std::size_t j = 0; j < samples.cols(); ++j) {
            Vec64 col(n);
            for (std::size_t i = 0; i < n; ++i) {
                col[i] = samples(i, j);
            }
            ds.offset[j] = pairwise_sum(col) / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                samples(i, j) -= ds.offset[j];
            }
        }
    }
    ds.samples = std::move(samples);
    ds.moments = std::make_shared<const DataMoments>(ds.samples, moment_order);
    return ds;
}

Dataset mixture_sample(const GaussianMixture& gm, const RngStream& rng, std::size_t n,
                       bool center, int moment_order) {
    gm.validate();
    require(n >= 1, "mixture_sample: n must be >= 1");
    const double sd = std::sqrt(gm.variance);
    Mat64 out(n, gm.dim());
    for (std::size_t i = 0; i < n; ++i) {
        RngStream r = split_stream(rng, i);
        const double u = r.uniform();
        std::size_t c = 0;
        double cum = gm.weights[0];
        while (u >= cum && c + 1 < gm.components()) {
            cum += gm.weights[++c];
        }
        for (std::size_t j = 0; j < gm.dim(); ++j) {
            out(i, j) = gm.means[c][j] + sd * r.gaussian();
        }
    }
    return make_dataset(std::move(out), center, moment_order);
}

std::vector<std::size_t> assign_components(const GaussianMixture& gm, const Mat64& points) {
    std::vector<std::size_t> out(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const Vec64 t = gm.component_log_terms(points.row(i));
        out[i] = static_cast<std::size_t>(std::max_element(t.begin(), t.end()) - t.begin());
    }
    return out;
}

Vec64 component_fractions(const GaussianMixture& gm, const Mat64& points) {
    Vec64 out(gm.components(), 0.0);
    for (std::size_t c : assign_components(gm, points)) {
        out[c] += 1.0;
    }
    for (double& v : out) {
        v /= static_cast<double>(points.rows());
    }
    return out;
}

double score_field_mse(const ScoreNetwork& net, const GaussianMixture& gm, const Mat64& points) {
    require(points.rows() >= 1, "score_field_mse: no evaluation points");
    Vec64 err(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto x = points.row(i);
        const Vec64 s = net.evaluate(x);
        const Vec64 t = mixture_score(gm, x);
        double e = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            e += (s[j] - t[j]) * (s[j] - t[j]);
        }
        err[i] = e;
    }
    return pairwise_sum(err) / static_cast<double>(points.rows());
}

} // namespace tcv
