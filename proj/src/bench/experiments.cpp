// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/bench/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "tcv/ndcore/errors.hpp"

namespace tcv {

namespace {

using nlohmann::json;

const char* const kExperiments[] = {"beta-study",      "sigma-sweep", "k-compare",
                                    "convergence",     "grid-widthdepth", "spectral",
                                    "optimizer-compare"};

bool known_experiment(const std::string& id) {
    return std::find(std::begin(kExperiments), std::end(kExperiments), id) !=
           std::end(kExperiments);
}

bool uses_sigma_grid(const std::string& id) {
    return id != "convergence" && id != "optimizer-compare";
}

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
    std::vector<std::uint64_t> s(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        s[i] = i;
    }
    return s;
}

RngStream seed_stream(std::uint64_t seed, std::uint64_t purpose) {
    return split_stream(RngStream(seed), purpose);
}

std::string num(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// ---- JSON fields -----------------------------------------------------------

std::size_t as_count(const json& v, const std::string& key) {
    require(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0),
            "spec: '" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& key) {
    require(v.is_number(), "spec: '" + key + "' must be a number");
    return v.get<double>();
}

std::string as_text(const json& v, const std::string& key) {
    require(v.is_string(), "spec: '" + key + "' must be a string");
    return v.get<std::string>();
}

template <class T, class Fn>
std::vector<T> as_list(const json& v, const std::string& key, Fn&& item) {
    require(v.is_array(), "spec: '" + key + "' must be an array");
    std::vector<T> out;
    for (const auto& e : v) {
        out.push_back(static_cast<T>(item(e, key)));
    }
    return out;
}

using Setter = std::function<void(ExperimentSpec&, const json&, const std::string&)>;

template <class M>
Setter count_field(M ExperimentSpec::*m) {
    return [m](ExperimentSpec& s, const json& v, const std::string& k) { s.*m = as_count(v, k); };
}

template <class M>
Setter real_field(M ExperimentSpec::*m) {
    return [m](ExperimentSpec& s, const json& v, const std::string& k) { s.*m = as_real(v, k); };
}

Setter text_field(std::string ExperimentSpec::*m) {
    return [m](ExperimentSpec& s, const json& v, const std::string& k) { s.*m = as_text(v, k); };
}

Setter count_list(std::vector<std::size_t> ExperimentSpec::*m) {
    return [m](ExperimentSpec& s, const json& v, const std::string& k) {
        s.*m = as_list<std::size_t>(v, k, as_count);
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"experiment", text_field(&ExperimentSpec::experiment)},
        {"sigmas",
         [](ExperimentSpec& s, const json& v, const std::string& k) {
             s.sigmas = as_list<double>(v, k, as_real);
         }},
        {"ks",
         [](ExperimentSpec& s, const json& v, const std::string& k) {
             s.ks = as_list<int>(v, k, as_count);
         }},
        {"seeds",
         [](ExperimentSpec& s, const json& v, const std::string& k) {
             s.seeds = as_list<std::uint64_t>(v, k, as_count);
         }},
        {"n_data", count_field(&ExperimentSpec::n_data)},
        {"centered",
         [](ExperimentSpec& s, const json& v, const std::string& k) {
             require(v.is_boolean(), "spec: '" + k + "' must be a boolean");
             s.centered = v.get<bool>();
         }},
        {"n_calibration", count_field(&ExperimentSpec::n_calibration)},
        {"n_eval", count_field(&ExperimentSpec::n_eval)},
        {"blocks", count_field(&ExperimentSpec::blocks)},
        {"bootstrap", count_field(&ExperimentSpec::bootstrap)},
        {"threads", count_field(&ExperimentSpec::threads)},
        {"hidden_widths", count_list(&ExperimentSpec::hidden_widths)},
        {"activation", text_field(&ExperimentSpec::activation)},
        {"checkpoints", count_list(&ExperimentSpec::checkpoints)},
        {"train_batch", count_field(&ExperimentSpec::train_batch)},
        {"optimizer", text_field(&ExperimentSpec::optimizer)},
        {"lr", real_field(&ExperimentSpec::lr)},
        {"sgd_lr", real_field(&ExperimentSpec::sgd_lr)},
        {"train_sigma_min", real_field(&ExperimentSpec::train_sigma_min)},
        {"train_sigma_max", real_field(&ExperimentSpec::train_sigma_max)},
        {"train_levels", count_field(&ExperimentSpec::train_levels)},
        {"lambda_power", real_field(&ExperimentSpec::lambda_power)},
        {"beta_mode", text_field(&ExperimentSpec::beta_mode)},
        {"ema_decay", real_field(&ExperimentSpec::ema_decay)},
        {"batch_sizes", count_list(&ExperimentSpec::batch_sizes)},
        {"conv_steps", count_list(&ExperimentSpec::conv_steps)},
        {"eval_points", count_field(&ExperimentSpec::eval_points)},
        {"budgets", count_list(&ExperimentSpec::budgets)},
        {"depths", count_list(&ExperimentSpec::depths)},
        {"grid_modes",
         [](ExperimentSpec& s, const json& v, const std::string& k) {
             s.grid_modes = as_list<std::string>(v, k, as_text);
         }},
        {"output", text_field(&ExperimentSpec::output)},
    };
    return table;
}

// ---- variance helpers ------------------------------------------------------

ControlVariate small_cv(int k, std::size_t dim) {
    return ControlVariate({Regime::small_sigma, k, CvTarget::gradient}, dim);
}

// Mean over seeds of reports that share one row layout.
VarianceReport average_reports(const std::vector<VarianceReport>& per_seed) {
    VarianceReport out = per_seed.front();
    const double s = static_cast<double>(per_seed.size());
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        VarianceRow& r = out.rows[i];
        double obj = 0.0, obj_se = 0.0, grad = 0.0, grad_se = 0.0, beta = 0.0;
        std::size_t n = 0;
        for (const auto& rep : per_seed) {
            const VarianceRow& q = rep.rows[i];
            obj += q.rho_obj;
            obj_se += q.rho_obj_se * q.rho_obj_se;
            grad += q.rho_grad;
            grad_se += q.rho_grad_se * q.rho_grad_se;
            beta += q.beta_mean;
            n += q.n_samples;
        }
        r.rho_obj = obj / s;
        r.rho_obj_se = std::sqrt(obj_se) / s;
        r.rho_grad = grad / s;
        r.rho_grad_se = std::sqrt(grad_se) / s;
        r.beta_mean = beta / s;
        r.n_samples = n;
    }
    return out;
}

VarianceRow make_row(std::size_t step, double sigma, const char* regime, int k,
                     const char* mode, Ratio obj, Ratio grad, double beta, std::size_t n) {
    VarianceRow r;
    r.sigma = sigma;
    r.regime = regime;
    r.k = k;
    r.beta_mode = mode;
    r.rho_obj = obj.value;
    r.rho_obj_se = obj.se;
    r.rho_grad = grad.value;
    r.rho_grad_se = grad.se;
    r.beta_mean = beta;
    r.n_samples = n;
    r.step = step;
    return r;
}

const Ratio kNoRatio{std::nan(""), std::nan("")};

// Runs `per_sigma(step, net, data, sigma, seed, report)` for every seed,
// checkpoint and σ, then averages over seeds.
using SigmaFn = std::function<void(std::size_t, const ScoreNetwork&, const Dataset&, double,
                                   std::uint64_t, VarianceReport&)>;

VarianceReport sweep(const ExperimentSpec& spec, const SigmaFn& per_sigma) {
    spec.validate();
    std::vector<VarianceReport> per_seed;
    for (std::uint64_t seed : spec.seeds) {
        const Dataset data = experiment_dataset(spec, seed);
        VarianceReport rep;
        for_each_checkpoint(spec, seed, data, experiment_network(spec, seed),
                            [&](std::size_t step, const ScoreNetwork& net) {
                                for (double sigma : spec.sigmas) {
                                    per_sigma(step, net, data, sigma, seed, rep);
                                }
                            });
        per_seed.push_back(std::move(rep));
    }
    return average_reports(per_seed);
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

} // namespace

// ---- ExperimentSpec --------------------------------------------------------

ExperimentSpec ExperimentSpec::defaults(const std::string& experiment) {
    require(known_experiment(experiment), "spec: unknown experiment '" + experiment + "'");
    ExperimentSpec s;
    s.experiment = experiment;
    if (experiment == "beta-study") {
        s.sigmas = {0.1, 0.5, 1.0, 5.0, 10.0};
    } else if (experiment == "sigma-sweep") {
        s.sigmas = {0.1, 0.5, 1.0, 5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 90.0};
        s.checkpoints = {0, 2000};
        s.train_sigma_min = 0.1;
        s.train_sigma_max = 90.0;
        s.train_levels = 20;
    } else if (experiment == "k-compare") {
        s.sigmas = {0.01, 0.05, 0.1, 0.5, 1.0};
        s.ks = {0, 1, 2};
        s.seeds = seed_range(5);
        s.train_sigma_min = 0.01;
        s.train_sigma_max = 1.0;
    } else if (experiment == "convergence") {
        s.ks = {2};
        s.seeds = seed_range(10);
        s.train_sigma_min = 0.01;
        s.train_sigma_max = 1.0;
        s.lambda_power = 1.0;
    } else if (experiment == "grid-widthdepth" || experiment == "spectral") {
        s.sigmas = {0.1, 0.5, 1.0, 5.0, 10.0};
        s.seeds = seed_range(5);
        s.n_eval = 4000;
        s.checkpoints = {2000};
        if (experiment == "spectral") {
            s.grid_modes = {"spectral"};
        }
    } else if (experiment == "optimizer-compare") {
        s.checkpoints = {0, 250, 500, 1000, 2000};
        s.n_eval = 4000;
    }
    return s;
}

void ExperimentSpec::validate() const {
    require(known_experiment(experiment), "spec: unknown experiment '" + experiment + "'");
    require(!seeds.empty(), "spec: at least one seed is required");
    if (uses_sigma_grid(experiment)) {
        require(!sigmas.empty(), "spec: experiment '" + experiment + "' needs a sigma grid");
    }
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        require(std::isfinite(sigmas[i]) && sigmas[i] > 0.0, "spec: sigmas must be positive");
        require(i == 0 || sigmas[i] > sigmas[i - 1], "spec: sigmas must be strictly ascending");
    }
    require(!ks.empty(), "spec: ks must not be empty");
    for (int k : ks) {
        require(k >= 0 && k <= 2, "spec: every k must lie in {0, 1, 2}");
    }
    require(n_data >= 1, "spec: n_data must be >= 1");
    require(eval_points >= 1, "spec: eval_points must be >= 1");
    require(std::is_sorted(checkpoints.begin(), checkpoints.end()) && !checkpoints.empty(),
            "spec: checkpoints must be non-empty and ascending");
    require(!batch_sizes.empty(), "spec: batch_sizes must not be empty");
    for (std::size_t b : batch_sizes) {
        require(b >= 1, "spec: batch sizes must be >= 1");
    }
    require(conv_steps.size() == batch_sizes.size(),
            "spec: conv_steps needs one entry per batch size");
    require(!budgets.empty() && !depths.empty(), "spec: grid needs budgets and depths");
    for (std::size_t d : depths) {
        require(d >= 1, "spec: grid depths must be >= 1");
    }
    for (const auto& m : grid_modes) {
        require(m == "plain" || m == "spectral", "spec: grid_modes entries are plain or spectral");
    }
    require(lr > 0.0 && sgd_lr > 0.0, "spec: learning rates must be positive");
    network().validate();
    measure().validate();
    parse_beta_mode(beta_mode);
    train_config(seeds.front()).validate();
}

MlpConfig ExperimentSpec::network() const {
    MlpConfig c;
    c.hidden_widths = hidden_widths;
    c.activation = ActivationFamily::parse(activation);
    return c;
}

MeasureConfig ExperimentSpec::measure() const {
    MeasureConfig m;
    m.n_calibration = n_calibration;
    m.n_eval = n_eval;
    m.blocks = blocks;
    m.bootstrap = bootstrap;
    m.lambda_power = lambda_power;
    m.threads = threads;
    return m;
}

NoiseSchedule ExperimentSpec::train_schedule() const {
    return make_schedule(train_sigma_min, train_sigma_max, train_levels);
}

TrainConfig ExperimentSpec::train_config(std::uint64_t seed) const {
    TrainConfig t;
    t.batch_size = train_batch;
    t.steps = checkpoints.empty() ? 0 : checkpoints.back();
    t.seed = seed;
    t.sigma_min = train_sigma_min;
    t.sigma_max = train_sigma_max;
    t.levels = train_levels;
    t.optimizer.kind = parse_optimizer(optimizer);
    t.optimizer.lr = t.optimizer.kind == OptimizerKind::sgd ? sgd_lr : lr;
    t.beta_mode = parse_beta_mode(beta_mode);
    t.ema_decay = ema_decay;
    t.checkpoint_steps = checkpoints;
    t.lambda_power = lambda_power;
    t.threads = threads;
    t.cv = {Regime::small_sigma, ks.empty() ? 1 : ks.front(), CvTarget::gradient};
    return t;
}

ExperimentSpec parse_experiment_spec(const std::string& json_text,
                                     const std::string& fallback_experiment) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("spec: invalid JSON: ") + e.what());
    }
    require(doc.is_object(), "spec: top level must be an object");
    std::string id = fallback_experiment;
    if (doc.contains("experiment")) {
        id = as_text(doc["experiment"], "experiment");
    }
    ExperimentSpec spec = ExperimentSpec::defaults(id);
    const auto& table = setters();
    for (const auto& [key, value] : doc.items()) {
        const auto it = table.find(key);
        require(it != table.end(), "spec: unknown key '" + key + "'");
        it->second(spec, value, key);
    }
    spec.validate();
    return spec;
}

std::string experiment_spec_json(const ExperimentSpec& s) {
    json doc = {
        {"experiment", s.experiment},
        {"sigmas", s.sigmas},
        {"ks", s.ks},
        {"seeds", s.seeds},
        {"n_data", s.n_data},
        {"centered", s.centered},
        {"n_calibration", s.n_calibration},
        {"n_eval", s.n_eval},
        {"blocks", s.blocks},
        {"bootstrap", s.bootstrap},
        {"threads", s.threads},
        {"hidden_widths", s.hidden_widths},
        {"activation", s.activation},
        {"checkpoints", s.checkpoints},
        {"train_batch", s.train_batch},
        {"optimizer", s.optimizer},
        {"lr", s.lr},
        {"sgd_lr", s.sgd_lr},
        {"train_sigma_min", s.train_sigma_min},
        {"train_sigma_max", s.train_sigma_max},
        {"train_levels", s.train_levels},
        {"lambda_power", s.lambda_power},
        {"beta_mode", s.beta_mode},
        {"ema_decay", s.ema_decay},
        {"batch_sizes", s.batch_sizes},
        {"conv_steps", s.conv_steps},
        {"eval_points", s.eval_points},
        {"budgets", s.budgets},
        {"depths", s.depths},
        {"grid_modes", s.grid_modes},
        {"output", s.output},
    };
    return doc.dump(2);
}

// ---- shared plumbing -------------------------------------------------------

Dataset experiment_dataset(const ExperimentSpec& spec, std::uint64_t seed) {
    return mixture_sample(toy_mixture(), seed_stream(seed, 1), spec.n_data, spec.centered);
}

ScoreNetwork experiment_network(const ExperimentSpec& spec, std::uint64_t seed) {
    return init_network(spec.network(), seed_stream(seed, 2));
}

GaussianMixture experiment_mixture(const Dataset& data) {
    Vec64 shift(data.offset.size());
    for (std::size_t i = 0; i < shift.size(); ++i) {
        shift[i] = -data.offset[i];
    }
    return shift.empty() ? toy_mixture() : toy_mixture().shifted(shift);
}

Mat64 experiment_eval_points(const ExperimentSpec& spec, const Dataset& data, std::uint64_t seed) {
    Mat64 pts = mixture_sample(toy_mixture(), seed_stream(seed, 5), spec.eval_points).samples;
    if (!data.offset.empty()) {
        for (std::size_t i = 0; i < pts.rows(); ++i) {
            for (std::size_t d = 0; d < pts.cols(); ++d) {
                pts(i, d) -= data.offset[d];
            }
        }
    }
    return pts;
}

void for_each_checkpoint(const ExperimentSpec& spec, std::uint64_t seed, const Dataset& data,
                         ScoreNetwork net, const CheckpointFn& fn) {
    TrainConfig tc = spec.train_config(seed);
    if (tc.steps == 0) {
        fn(0, net);
        return;
    }
    train(net, data.samples, tc, nullptr, nullptr, fn);
}

// ---- variance experiments --------------------------------------------------

VarianceReport run_beta_study(const ExperimentSpec& spec) {
    const int k = spec.ks.front();
    return sweep(spec, [&](std::size_t step, const ScoreNetwork& net, const Dataset& data,
                           double sigma, std::uint64_t seed, VarianceReport& rep) {
        const ControlVariate cv = small_cv(k, net.dim());
        const ControlVariate* cvs[] = {&cv};
        const Measurement m = measure_variance(net, data.samples, fixed_sigma(sigma), cvs,
                                               spec.measure(), seed_stream(seed, 4));
        const CvMeasurement& c = m.cvs[0];
        const std::size_t n = m.n_eval;
        rep.rows.push_back(make_row(step, sigma, "small", k, "zero", {1.0, 0.0}, {1.0, 0.0}, 0.0, n));
        rep.rows.push_back(
            make_row(step, sigma, "small", k, "opt", c.rho_obj_opt, c.rho_grad_obj_beta, c.beta_obj, n));
        rep.rows.push_back(
            make_row(step, sigma, "small", k, "one", c.rho_obj_one, c.rho_grad_one, 1.0, n));
        rep.rows.push_back(make_row(step, sigma, "small", k, "per_param", kNoRatio, c.rho_grad,
                                    c.beta_grad_mean, n));
    });
}

VarianceReport run_sigma_sweep(const ExperimentSpec& spec) {
    const int k = spec.ks.front();
    return sweep(spec, [&](std::size_t step, const ScoreNetwork& net, const Dataset& data,
                           double sigma, std::uint64_t seed, VarianceReport& rep) {
        const ControlVariate small = small_cv(k, net.dim());
        const ControlVariate large({Regime::large_sigma, k, CvTarget::gradient}, net.dim(),
                                   data.moments);
        const ControlVariate* cvs[] = {&small, &large};
        const Measurement m = measure_variance(net, data.samples, fixed_sigma(sigma), cvs,
                                               spec.measure(), seed_stream(seed, 4));
        const char* names[] = {"small", "large"};
        for (std::size_t j = 0; j < 2; ++j) {
            const CvMeasurement& c = m.cvs[j];
            rep.rows.push_back(make_row(step, sigma, names[j], k, "per_param", c.rho_obj_opt,
                                        c.rho_grad, c.beta_grad_mean, m.n_eval));
        }
    });
}

VarianceReport run_k_compare(const ExperimentSpec& spec) {
    return sweep(spec, [&](std::size_t step, const ScoreNetwork& net, const Dataset& data,
                           double sigma, std::uint64_t seed, VarianceReport& rep) {
        std::vector<ControlVariate> owned;
        for (int k : spec.ks) {
            owned.push_back(small_cv(k, net.dim()));
        }
        std::vector<const ControlVariate*> cvs;
        for (const auto& cv : owned) {
            cvs.push_back(&cv);
        }
        const Measurement m = measure_variance(net, data.samples, fixed_sigma(sigma), cvs,
                                               spec.measure(), seed_stream(seed, 4));
        for (std::size_t j = 0; j < cvs.size(); ++j) {
            const CvMeasurement& c = m.cvs[j];
            rep.rows.push_back(make_row(step, sigma, "small", spec.ks[j], "per_param",
                                        c.rho_obj_opt, c.rho_grad, c.beta_grad_mean, m.n_eval));
        }
    });
}

// ---- convergence -----------------------------------------------------------

const ConvergenceRecord& ConvergenceReport::find(std::uint64_t seed, std::size_t batch,
                                                 bool cv) const {
    for (const auto& r : records) {
        if (r.seed == seed && r.batch == batch && r.cv == cv) {
            return r;
        }
    }
    throw ValidationError("convergence: no record for that seed/batch/arm");
}

void ConvergenceReport::write_csv(std::ostream& out) const {
    out << "seed,batch,arm,initial_mse,final_mse,final_loss,mean_rho_g_batch\n";
    for (const auto& r : records) {
        out << r.seed << ',' << r.batch << ',' << (r.cv ? "cv-on" : "cv-off") << ','
            << num(r.initial_mse) << ',' << num(r.final_mse) << ',' << num(r.final_loss) << ','
            << num(r.mean_rho_g_batch) << '\n';
    }
}

ConvergenceReport run_convergence(const ExperimentSpec& spec, const std::filesystem::path& log_dir) {
    spec.validate();
    if (!log_dir.empty()) {
        std::filesystem::create_directories(log_dir);
    }
    ConvergenceReport rep;
    for (std::uint64_t seed : spec.seeds) {
        const Dataset data = experiment_dataset(spec, seed);
        const GaussianMixture gm = experiment_mixture(data);
        const Mat64 points = experiment_eval_points(spec, data, seed);
        const ScoreNetwork init = experiment_network(spec, seed);
        const double initial = score_field_mse(init, gm, points);
        for (std::size_t bi = 0; bi < spec.batch_sizes.size(); ++bi) {
            const std::size_t batch = spec.batch_sizes[bi];
            for (bool use_cv : {false, true}) {
                TrainConfig tc = spec.train_config(seed);
                tc.batch_size = batch;
                tc.steps = spec.conv_steps[bi];
                tc.checkpoint_steps.clear();
                tc.use_cv = use_cv;
                const ControlVariate cv(tc.cv, init.dim());
                ScoreNetwork net = init;
                std::ofstream log;
                if (!log_dir.empty()) {
                    log.open(log_dir / ("convergence_seed" + std::to_string(seed) + "_batch" +
                                        std::to_string(batch) + (use_cv ? "_cv-on" : "_cv-off") +
                                        ".jsonl"));
                }
                const auto metrics = train(net, data.samples, tc, use_cv ? &cv : nullptr,
                                           log.is_open() ? &log : nullptr);
                ConvergenceRecord r;
                r.seed = seed;
                r.batch = batch;
                r.cv = use_cv;
                r.initial_mse = initial;
                r.final_mse = score_field_mse(net, gm, points);
                r.final_loss = metrics.empty() ? std::nan("") : metrics.back().loss_mean;
                double rho = 0.0;
                std::size_t n = 0;
                for (const auto& m : metrics) {
                    if (std::isfinite(m.rho_g_batch)) {
                        rho += m.rho_g_batch;
                        ++n;
                    }
                }
                r.mean_rho_g_batch = n > 0 ? rho / static_cast<double>(n) : std::nan("");
                rep.records.push_back(r);
            }
        }
    }
    return rep;
}

// ---- width/depth grid ------------------------------------------------------

double GridReport::mean(bool spectral, std::size_t budget, std::size_t depth) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
        if (c.spectral == spectral && c.budget == budget && c.depth == depth) {
            if (!c.feasible) {
                return std::nan("");
            }
            sum += c.rho;
            ++n;
        }
    }
    return n > 0 ? sum / static_cast<double>(n) : std::nan("");
}

const GridCell* GridReport::find(bool spectral, std::size_t budget, std::size_t depth,
                                 std::uint64_t seed) const {
    for (const auto& c : cells) {
        if (c.spectral == spectral && c.budget == budget && c.depth == depth && c.seed == seed) {
            return &c;
        }
    }
    return nullptr;
}

void GridReport::write_csv(std::ostream& out) const {
    out << "mode,budget,depth,width,realized,seed,rho,rho_se\n";
    for (const auto& c : cells) {
        out << (c.spectral ? "spectral" : "plain") << ',' << c.budget << ',' << c.depth << ',';
        if (c.feasible) {
            out << c.width << ',' << c.realized << ',' << c.seed << ',' << num(c.rho) << ','
                << num(c.rho_se) << '\n';
        } else {
            out << "infeasible,infeasible," << c.seed << ",infeasible,infeasible\n";
        }
    }
}

void GridReport::write_matrix(std::ostream& out, bool spectral) const {
    std::vector<std::size_t> budgets;
    std::vector<std::size_t> depths;
    for (const auto& c : cells) {
        if (c.spectral != spectral) {
            continue;
        }
        if (std::find(budgets.begin(), budgets.end(), c.budget) == budgets.end()) {
            budgets.push_back(c.budget);
        }
        if (std::find(depths.begin(), depths.end(), c.depth) == depths.end()) {
            depths.push_back(c.depth);
        }
    }
    out << "depth";
    for (std::size_t b : budgets) {
        out << ",budget_" << b;
    }
    out << '\n';
    for (std::size_t d : depths) {
        out << d;
        for (std::size_t b : budgets) {
            const double v = mean(spectral, b, d);
            out << ',' << (std::isnan(v) ? std::string("infeasible") : num(v));
        }
        out << '\n';
    }
}

GridReport run_grid(const ExperimentSpec& spec) {
    spec.validate();
    GridReport rep;
    const int k = spec.ks.front();
    const MeasureConfig mc = spec.measure();
    const std::size_t steps = spec.checkpoints.back();
    for (std::uint64_t seed : spec.seeds) {
        const Dataset data = experiment_dataset(spec, seed);
        for (const auto& mode : spec.grid_modes) {
            const bool spectral = mode == "spectral";
            for (std::size_t budget : spec.budgets) {
                for (std::size_t depth : spec.depths) {
                    GridCell cell;
                    cell.spectral = spectral;
                    cell.budget = budget;
                    cell.depth = depth;
                    cell.seed = seed;
                    ParamPlan plan;
                    try {
                        plan = param_count_plan(budget, depth, 2, spec.network().activation);
                    } catch (const ValidationError&) {
                        rep.cells.push_back(cell);
                        continue;
                    }
                    cell.feasible = true;
                    cell.width = plan.width;
                    cell.realized = plan.realized_count;
                    plan.config.spectral_norm = spectral;
                    ScoreNetwork net = init_network(plan.config, seed_stream(seed, 2));
                    if (spectral) {
                        spectral_normalize_inplace(net);
                    }
                    if (steps > 0) {
                        TrainConfig tc = spec.train_config(seed);
                        tc.checkpoint_steps.clear();
                        train(net, data.samples, tc, nullptr);
                    }
                    const ControlVariate cv = small_cv(k, net.dim());
                    const ControlVariate* cvs[] = {&cv};
                    double sum = 0.0;
                    double se2 = 0.0;
                    for (double sigma : spec.sigmas) {
                        const Measurement m = measure_variance(net, data.samples, fixed_sigma(sigma),
                                                               cvs, mc, seed_stream(seed, 4));
                        sum += m.cvs[0].rho_grad.value;
                        se2 += m.cvs[0].rho_grad.se * m.cvs[0].rho_grad.se;
                    }
                    const double ns = static_cast<double>(spec.sigmas.size());
                    cell.rho = sum / ns;
                    cell.rho_se = std::sqrt(se2) / ns;
                    rep.cells.push_back(cell);
                }
            }
        }
    }
    return rep;
}

// ---- optimizer comparison --------------------------------------------------

const OptimizerRow& OptimizerReport::find(const std::string& optimizer, std::uint64_t seed,
                                          std::size_t step) const {
    for (const auto& r : rows) {
        if (r.optimizer == optimizer && r.seed == seed && r.step == step) {
            return r;
        }
    }
    throw ValidationError("optimizer-compare: no row for that optimizer/seed/step");
}

void OptimizerReport::write_csv(std::ostream& out) const {
    out << "optimizer,seed,step,rho_grad,rho_grad_se,loss_mean\n";
    for (const auto& r : rows) {
        out << r.optimizer << ',' << r.seed << ',' << r.step << ',' << num(r.rho_grad) << ','
            << num(r.rho_grad_se) << ',' << num(r.loss_mean) << '\n';
    }
}

OptimizerReport run_optimizer_compare(const ExperimentSpec& spec) {
    spec.validate();
    OptimizerReport rep;
    const int k = spec.ks.front();
    const NoiseSchedule schedule = spec.train_schedule();
    for (std::uint64_t seed : spec.seeds) {
        const Dataset data = experiment_dataset(spec, seed);
        for (const char* opt : {"sgd", "adam"}) {
            ExperimentSpec arm = spec;
            arm.optimizer = opt;
            for_each_checkpoint(arm, seed, data, experiment_network(arm, seed),
                                [&](std::size_t step, const ScoreNetwork& net) {
                                    const ControlVariate cv = small_cv(k, net.dim());
                                    const ControlVariate* cvs[] = {&cv};
                                    const Measurement m =
                                        measure_variance(net, data.samples, schedule, cvs,
                                                         spec.measure(), seed_stream(seed, 4));
                                    rep.rows.push_back({opt, seed, step, m.cvs[0].rho_grad.value,
                                                        m.cvs[0].rho_grad.se, m.loss_mean});
                                });
        }
    }
    return rep;
}

// ---- equivalence -----------------------------------------------------------

EquivalenceReport equivalence_check(std::size_t tuples, std::uint64_t seed) {
    const RngStream root(seed);
    const Dataset data = mixture_sample(toy_mixture(), split_stream(root, 0), 2000, true);
    MlpConfig config;
    config.hidden_widths = {64, 64};
    EquivalenceReport rep;
    rep.tuples = tuples;
    const double h = 1e-5;
    for (std::size_t t = 0; t < tuples; ++t) {
        RngStream rng = split_stream(root, t + 1);
        ScoreNetwork net = init_network(config, split_stream(rng, 0));
        for (std::size_t l = 0; l < net.layout().layers.size(); ++l) {
            const auto& shape = net.layout().layers[l];
            for (std::size_t r = 0; r < shape.rows; ++r) {
                net.mutable_theta()[shape.bias_offset + r] = 0.3 * rng.gaussian();
            }
        }
        const auto x = data.samples.row(rng.uniform_index(data.size()));
        const Vec64 z = gaussian_sample(rng, 2);
        const double u = rng.uniform();
        const double sigma = t % 2 == 0 ? 0.01 * std::pow(100.0, u) : std::pow(100.0, u);
        const int k = static_cast<int>(t % 3);
        for (Regime regime : {Regime::small_sigma, Regime::large_sigma}) {
            const ControlVariate cv({regime, k, CvTarget::gradient}, 2, data.moments);
            const Vec64 tape_grad = cv.objective_gradient(net, x, z, sigma);
            const Vec64 direct = cv.gradient(net, x, z, sigma);
            double worst = 0.0;
            for (std::size_t q = 0; q < direct.size(); ++q) {
                const double scale = std::max(std::abs(tape_grad[q]), std::abs(direct[q]));
                worst = std::max(worst, std::abs(tape_grad[q] - direct[q]) / (1e-8 * scale + 1e-10));
            }
            double& slot = regime == Regime::small_sigma ? rep.worst_small : rep.worst_large;
            slot = std::max(slot, worst);

            // Central differences on a few coordinates, chosen among those that
            // carry a visible share of the gradient.
            const double gmax = max_abs(direct);
            for (int probe = 0; probe < 4; ++probe) {
                std::size_t q = rng.uniform_index(direct.size());
                for (int tries = 0; tries < 64 && std::abs(direct[q]) < 1e-3 * gmax; ++tries) {
                    q = rng.uniform_index(direct.size());
                }
                ScoreNetwork plus = net;
                ScoreNetwork minus = net;
                plus.mutable_theta()[q] += h;
                minus.mutable_theta()[q] -= h;
                const double fd =
                    (cv.objective(plus, x, z, sigma) - cv.objective(minus, x, z, sigma)) / (2 * h);
                const double scale = std::max(std::abs(fd), std::abs(direct[q]));
                rep.worst_fd = std::max(rep.worst_fd, std::abs(fd - direct[q]) / (1e-4 * scale + 1e-7));
            }
        }
    }
    return rep;
}

} // namespace tcv
