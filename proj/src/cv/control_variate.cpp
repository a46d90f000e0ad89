// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/cv/control_variate.hpp"

#include <cmath>
#include <string>

#include "tcv/dsm/loss.hpp"
#include "tcv/ndcore/errors.hpp"

namespace tcv {

const char* regime_name(Regime r) noexcept {
    return r == Regime::small_sigma ? "small" : "large";
}

Regime parse_regime(const std::string& name) {
    if (name == "small" || name == "small_sigma") {
        return Regime::small_sigma;
    }
    if (name == "large" || name == "large_sigma") {
        return Regime::large_sigma;
    }
    throw ValidationError("unknown regime '" + name + "' (expected small or large)");
}

void CvConfig::validate() const {
    require(k >= 0 && k <= 2, "CvConfig: k must be 0, 1 or 2");
}

DataMoments::DataMoments(const Mat64& samples, int max_order)
    : dim_(samples.cols()), max_order_(max_order), count_(samples.rows()) {
    require(count_ >= 1, "DataMoments: empty dataset");
    require(max_order >= 0, "DataMoments: max_order must be >= 0");
    Vec64 vals(count_);
    for (const auto& alpha : enumerate_multi_indices(dim_, max_order)) {
        for (std::size_t i = 0; i < count_; ++i) {
            vals[i] = alpha.monomial(samples.row(i));
        }
        table_.emplace(alpha, pairwise_sum(vals) / static_cast<double>(count_));
    }
}

double DataMoments::moment(const MultiIndex& alpha) const {
    const auto it = table_.find(alpha);
    if (it == table_.end()) {
        throw ValidationError("DataMoments: no moment of order " + std::to_string(alpha.order()) +
                              " (max " + std::to_string(max_order_) + ")");
    }
    return it->second;
}

namespace {

double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) {
        r *= x;
    }
    return r;
}

double inv_fact(const MultiIndex& a) {
    return 1.0 / static_cast<double>(a.factorial());
}

void check_inputs(std::size_t dim, std::span<const double> x, std::span<const double> z,
                  double sigma) {
    require(sigma > 0.0, "control variate: sigma must be positive");
    require(x.size() == dim && z.size() == dim, "control variate: x and z must have length D");
}

} // namespace

CvForm small_sigma_form(std::span<const double> z, double sigma, int k, const MomentTable& moments) {
    require(sigma > 0.0, "control variate: sigma must be positive");
    const std::size_t dim = z.size();
    CvForm f;
    f.dim = dim;
    f.k = k;
    f.indices = enumerate_multi_indices(dim, k);
    f.offset = (pairwise_dot(z, z) - static_cast<double>(dim)) / (2.0 * sigma * sigma);

    const std::size_t n = f.indices.size();
    for (std::size_t a = 0; a < n; ++a) {
        const MultiIndex& ia = f.indices[a];
        for (std::size_t b = a; b < n; ++b) {
            const MultiIndex& ib = f.indices[b];
            const MultiIndex ab = ia + ib;
            const double c = 0.5 * ipow(sigma, ab.order()) * inv_fact(ia) * inv_fact(ib) *
                             (ab.monomial(z) - moments.moment(ab));
            const double folded = a == b ? c : 2.0 * c;
            if (folded != 0.0) {
                f.pairs.push_back({a, b, folded});
            }
        }
    }
    f.linear.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        const MultiIndex& ia = f.indices[a];
        const double scale = ipow(sigma, ia.order()) / sigma * inv_fact(ia);
        const double za = ia.monomial(z);
        const Vec64 ez = moments.moment_vec(ia);
        Vec64 w(dim);
        for (std::size_t m = 0; m < dim; ++m) {
            w[m] = scale * (za * z[m] - ez[m]);
        }
        f.linear[a] = std::move(w);
    }
    return f;
}

CvForm large_sigma_form(std::span<const double> x, std::span<const double> z, double sigma, int k,
                        const DataMoments& data) {
    require(sigma > 0.0, "control variate: sigma must be positive");
    require(data.max_order() >= 2 * k, "control variate: data moments must cover order 2k");
    const std::size_t dim = x.size();
    CvForm f;
    f.dim = dim;
    f.k = k;
    f.indices = enumerate_multi_indices(dim, k);

    const std::size_t n = f.indices.size();
    for (std::size_t a = 0; a < n; ++a) {
        const MultiIndex& ia = f.indices[a];
        for (std::size_t b = a; b < n; ++b) {
            const MultiIndex& ib = f.indices[b];
            const MultiIndex ab = ia + ib;
            const double c =
                0.5 * inv_fact(ia) * inv_fact(ib) * (ab.monomial(x) - data.moment(ab));
            const double folded = a == b ? c : 2.0 * c;
            if (folded != 0.0) {
                f.pairs.push_back({a, b, folded});
            }
        }
    }
    f.linear.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        const MultiIndex& ia = f.indices[a];
        const double scale = (ia.monomial(x) - data.moment(ia)) / sigma * inv_fact(ia);
        Vec64 w(dim);
        for (std::size_t m = 0; m < dim; ++m) {
            w[m] = scale * z[m];
        }
        f.linear[a] = std::move(w);
    }
    return f;
}

namespace {

bool is_zero(const Vec64& v) {
    for (double e : v) {
        if (e != 0.0) {
            return false;
        }
    }
    return true;
}

} // namespace

double evaluate_form(const CvForm& form, const JetValues& jet) {
    if (jet.order < form.k || jet.dim != form.dim) {
        throw ContractViolation("evaluate_form: jet does not cover the form");
    }
    Vec64 terms;
    terms.reserve(form.pairs.size() + form.linear.size());
    for (const auto& p : form.pairs) {
        const Vec64& da = jet.derivative(form.indices[p.a].exponents());
        const Vec64& db = jet.derivative(form.indices[p.b].exponents());
        terms.push_back(p.coef * pairwise_dot(da, db));
    }
    for (std::size_t a = 0; a < form.linear.size(); ++a) {
        if (is_zero(form.linear[a])) {
            continue;
        }
        terms.push_back(1.0 * pairwise_dot(form.linear[a], jet.derivative(form.indices[a].exponents())));
    }
    if (terms.empty()) {
        return form.offset;
    }
    return pairwise_sum(terms) + form.offset;
}

NodeId record_form(Tape& tape, const CvForm& form, const JetNodes& jet) {
    if (jet.order < form.k || jet.dim != form.dim) {
        throw ContractViolation("record_form: jet does not cover the form");
    }
    std::vector<NodeId> nodes;
    Vec64 coefs;
    for (const auto& p : form.pairs) {
        nodes.push_back(tape.dot(jet.derivative(form.indices[p.a].exponents()),
                                 jet.derivative(form.indices[p.b].exponents())));
        coefs.push_back(p.coef);
    }
    for (std::size_t a = 0; a < form.linear.size(); ++a) {
        if (is_zero(form.linear[a])) {
            continue;
        }
        // constant first so the product order matches evaluate_form
        const NodeId w = tape.constant(form.linear[a]);
        nodes.push_back(tape.dot(w, jet.derivative(form.indices[a].exponents())));
        coefs.push_back(1.0);
    }
    if (nodes.empty()) {
        const double v[1] = {form.offset};
        return tape.constant(v);
    }
    return tape.combine(nodes, coefs, form.offset);
}

ControlVariate::ControlVariate(CvConfig config, std::size_t dim,
                               std::shared_ptr<const DataMoments> data)
    : config_(config), dim_(dim), moments_(dim, 2 * config.k + 2), data_(std::move(data)) {
    config_.validate();
    require(dim >= 1, "ControlVariate: dim must be >= 1");
    if (config_.regime == Regime::large_sigma) {
        require(data_ != nullptr, "ControlVariate: the large-sigma variate needs data moments");
        require(data_->dim() == dim, "ControlVariate: data moments have the wrong dimension");
        require(data_->max_order() >= 2 * config_.k,
                "ControlVariate: data moments must cover order 2k");
    }
}

CvForm ControlVariate::form(std::span<const double> x, std::span<const double> z,
                            double sigma) const {
    check_inputs(dim_, x, z, sigma);
    if (config_.regime == Regime::small_sigma) {
        return small_sigma_form(z, sigma, config_.k, moments_);
    }
    return large_sigma_form(x, z, sigma, config_.k, *data_);
}

Vec64 ControlVariate::expansion_point(std::span<const double> x, std::span<const double> z,
                                      double sigma) const {
    if (config_.regime == Regime::small_sigma) {
        return Vec64(x.begin(), x.end());
    }
    Vec64 p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = sigma * z[i];
    }
    return p;
}

NodeId ControlVariate::record(Tape& tape, std::span<const double> x, std::span<const double> z,
                              double sigma) const {
    const CvForm f = form(x, z, sigma);
    const JetNodes jet = input_jet(tape, expansion_point(x, z, sigma), config_.k);
    return record_form(tape, f, jet);
}

double ControlVariate::objective(const ScoreNetwork& net, std::span<const double> x,
                                 std::span<const double> z, double sigma) const {
    const CvForm f = form(x, z, sigma);
    const JetValues jet = evaluate_jet(net.view(), expansion_point(x, z, sigma), config_.k);
    return evaluate_form(f, jet);
}

Vec64 ControlVariate::objective_gradient(const ScoreNetwork& net, std::span<const double> x,
                                         std::span<const double> z, double sigma) const {
    Tape tape(net.view());
    const NodeId c = record(tape, x, z, sigma);
    tape.forward();
    return tape.backward(c);
}

MixedJacobian mixed_jacobian(const ScoreNetwork& net, std::span<const double> point, int k) {
    const std::size_t dim = net.dim();
    MixedJacobian mj;
    mj.indices = enumerate_multi_indices(dim, k);
    const std::size_t n = mj.indices.size();

    // One scalar node per component of every input derivative: (∂^ρ s)_m.
    Tape tape(net.view());
    const JetNodes jet = input_jet(tape, point, k);
    std::vector<NodeId> unit(dim);
    Vec64 e(dim, 0.0);
    for (std::size_t m = 0; m < dim; ++m) {
        e[m] = 1.0;
        unit[m] = tape.constant(e);
        e[m] = 0.0;
    }
    std::vector<NodeId> component(n * dim);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t m = 0; m < dim; ++m) {
            component[r * dim + m] = tape.dot(jet.derivative(mj.indices[r].exponents()), unit[m]);
        }
    }
    tape.forward();
    mj.jet = read_jet(tape, jet);
    mj.rows.reserve(n * dim);
    for (NodeId c : component) {
        mj.rows.push_back(tape.backward(c));
    }
    return mj;
}

Vec64 ControlVariate::gradient(const ScoreNetwork& net, std::span<const double> x,
                               std::span<const double> z, double sigma) const {
    check_inputs(dim_, x, z, sigma);
    return assemble_gradient(mixed_jacobian(net, expansion_point(x, z, sigma), config_.k), x, z,
                             sigma);
}

Vec64 ControlVariate::assemble_gradient(const MixedJacobian& mj, std::span<const double> x,
                                        std::span<const double> z, double sigma) const {
    check_inputs(dim_, x, z, sigma);
    const bool small = config_.regime == Regime::small_sigma;
    const auto& indices = mj.indices;
    if (mj.jet.order < config_.k || indices.size() != enumerate_multi_indices(dim_, config_.k).size()) {
        throw ContractViolation("assemble_gradient: mixed Jacobian of the wrong order");
    }
    const std::size_t n = indices.size();
    Vec64 grad(mj.rows.empty() ? 0 : mj.rows[0].size(), 0.0);
    Vec64 v(dim_);
    for (std::size_t r = 0; r < n; ++r) {
        const MultiIndex& rho = indices[r];
        if (small) {
            const double scale = ipow(sigma, rho.order()) / sigma * inv_fact(rho);
            const double zr = rho.monomial(z);
            const Vec64 ez = moments_.moment_vec(rho);
            for (std::size_t m = 0; m < dim_; ++m) {
                v[m] = scale * (zr * z[m] - ez[m]);
            }
        } else {
            const double scale = (rho.monomial(x) - data_->moment(rho)) / sigma * inv_fact(rho);
            for (std::size_t m = 0; m < dim_; ++m) {
                v[m] = scale * z[m];
            }
        }
        for (const auto& alpha : indices) {
            const MultiIndex ar = alpha + rho;
            const double c = small ? ipow(sigma, ar.order()) * inv_fact(alpha) * inv_fact(rho) *
                                         (ar.monomial(z) - moments_.moment(ar))
                                   : inv_fact(alpha) * inv_fact(rho) *
                                         (ar.monomial(x) - data_->moment(ar));
            if (c != 0.0) {
                axpy(c, mj.jet.derivative(alpha.exponents()), v);
            }
        }
        for (std::size_t m = 0; m < dim_; ++m) {
            if (v[m] != 0.0) {
                axpy(v[m], mj.rows[r * dim_ + m], grad);
            }
        }
    }
    return grad;
}

double cv_objective_small(const ScoreNetwork& net, std::span<const double> x,
                          std::span<const double> z, double sigma, int k,
                          const MomentTable& moments) {
    check_inputs(net.dim(), x, z, sigma);
    require(moments.max_order() >= 2 * k + 1, "cv_objective_small: moment table too small");
    const CvForm f = small_sigma_form(z, sigma, k, moments);
    return evaluate_form(f, evaluate_jet(net.view(), x, k));
}

Vec64 cv_gradient_small(const ScoreNetwork& net, std::span<const double> x,
                        std::span<const double> z, double sigma, int k, const MomentTable&) {
    return ControlVariate({Regime::small_sigma, k, CvTarget::gradient}, net.dim())
        .gradient(net, x, z, sigma);
}

double cv_objective_large(const ScoreNetwork& net, std::span<const double> x,
                          std::span<const double> z, double sigma, int k, const DataMoments& data) {
    check_inputs(net.dim(), x, z, sigma);
    const CvForm f = large_sigma_form(x, z, sigma, k, data);
    Vec64 p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = sigma * z[i];
    }
    return evaluate_form(f, evaluate_jet(net.view(), p, k));
}

Vec64 cv_gradient_large(const ScoreNetwork& net, std::span<const double> x,
                        std::span<const double> z, double sigma, int k, const DataMoments& data) {
    auto shared = std::make_shared<const DataMoments>(data);
    return ControlVariate({Regime::large_sigma, k, CvTarget::gradient}, net.dim(), shared)
        .gradient(net, x, z, sigma);
}

double cv_objective_small_closed(const ScoreNetwork& net, std::span<const double> x,
                                 std::span<const double> z, double sigma, int k) {
    check_inputs(net.dim(), x, z, sigma);
    require(k == 1 || k == 2, "cv_objective_small_closed: k must be 1 or 2");
    const std::size_t d = net.dim();
    const JetValues jet = evaluate_jet(net.view(), x, k);
    const Vec64& s = jet.value;
    auto J = [&](std::size_t m, std::size_t i) { return jet.first[i][m]; };

    Vec64 jz(d, 0.0);
    double tr_j = 0.0;
    double fro_j = 0.0;
    for (std::size_t m = 0; m < d; ++m) {
        for (std::size_t i = 0; i < d; ++i) {
            jz[m] += J(m, i) * z[i];
            fro_j += J(m, i) * J(m, i);
        }
        tr_j += J(m, m);
    }
    const double s2 = sigma * sigma;
    double c = (pairwise_dot(z, z) - static_cast<double>(d)) / (2.0 * s2);
    c += dot(z, s) / sigma;
    c += dot(z, jz) - tr_j;
    c += sigma * dot(s, jz);
    c += 0.5 * s2 * (dot(jz, jz) - fro_j);
    if (k == 1) {
        return c;
    }

    // q_m = z^T H_m z with (H_m)_ij = ∂_i∂_j s_m
    auto H = [&](std::size_t m, std::size_t i, std::size_t j) { return jet.second[i * d + j][m]; };
    Vec64 q(d, 0.0);
    double s_tr_h = 0.0;
    double hh = 0.0;
    for (std::size_t m = 0; m < d; ++m) {
        double tr = 0.0;
        double tr_sq = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            tr += H(m, i, i);
            for (std::size_t j = 0; j < d; ++j) {
                q[m] += z[i] * z[j] * H(m, i, j);
                tr_sq += H(m, i, j) * H(m, i, j);
            }
        }
        s_tr_h += s[m] * tr;
        hh += tr * tr + 2.0 * tr_sq;
    }
    c += 0.5 * sigma * dot(z, q);
    c += 0.5 * s2 * (dot(s, q) - s_tr_h);
    c += 0.5 * s2 * sigma * dot(jz, q);
    c += 0.125 * s2 * s2 * (dot(q, q) - hh);
    return c;
}

double controlled_loss(const ScoreNetwork& net, std::span<const double> x,
                       std::span<const double> z, double sigma, double beta,
                       const ControlVariate& cv, double lambda_power) {
    const double l = dsm_loss(net, x, z, sigma);
    const double w = loss_weight(sigma, lambda_power);
    if (beta == 0.0) {
        return w * l;
    }
    return w * (l - beta * cv.objective(net, x, z, sigma));
}

double taylor_remainder_bound(double lipschitz, double distance, int k) {
    require(lipschitz >= 0.0, "taylor_remainder_bound: lipschitz must be >= 0");
    require(distance >= 0.0, "taylor_remainder_bound: distance must be >= 0");
    require(k >= 0, "taylor_remainder_bound: k must be >= 0");
    double f = 1.0;
    for (int i = 2; i <= k + 1; ++i) {
        f *= static_cast<double>(i);
    }
    return lipschitz * ipow(distance, k + 1) / f;
}

} // namespace tcv
