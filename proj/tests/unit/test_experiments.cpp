// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

#include "tcv/bench/experiments.hpp"
#include "tcv/ndcore/errors.hpp"

using namespace tcv;

namespace {

// Small enough to run in well under a second per measurement.
ExperimentSpec tiny(const std::string& id) {
    ExperimentSpec s = ExperimentSpec::defaults(id);
    s.n_data = 500;
    s.n_calibration = 64;
    s.n_eval = 160;
    s.blocks = 8;
    s.bootstrap = 20;
    s.hidden_widths = {8, 8};
    s.eval_points = 200;
    return s;
}

std::string csv(const VarianceReport& r) {
    return r.to_csv();
}

} // namespace

TEST_CASE("experiment defaults carry their grids") {
    CHECK(ExperimentSpec::defaults("beta-study").sigmas == std::vector<double>{0.1, 0.5, 1, 5, 10});
    CHECK(ExperimentSpec::defaults("sigma-sweep").sigmas.size() == 10);
    CHECK(ExperimentSpec::defaults("k-compare").ks == std::vector<int>{0, 1, 2});
    CHECK(ExperimentSpec::defaults("convergence").seeds.size() == 10);
    CHECK(ExperimentSpec::defaults("spectral").grid_modes == std::vector<std::string>{"spectral"});
    for (const char* id : {"beta-study", "sigma-sweep", "k-compare", "convergence",
                           "grid-widthdepth", "spectral", "optimizer-compare"}) {
        CHECK_NOTHROW(ExperimentSpec::defaults(id).validate());
    }
    CHECK_THROWS_AS(ExperimentSpec::defaults("nope"), ValidationError);
}

TEST_CASE("spec parsing overrides defaults and rejects bad input") {
    const ExperimentSpec s =
        parse_experiment_spec(R"({"sigmas": [0.2, 2.0], "seeds": [3, 4], "lr": 0.01})");
    CHECK(s.experiment == "beta-study");
    CHECK(s.sigmas == std::vector<double>{0.2, 2.0});
    CHECK(s.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(s.lr == 0.01);
    CHECK(s.n_eval == ExperimentSpec{}.n_eval);

    const ExperimentSpec k = parse_experiment_spec(R"({"experiment": "k-compare"})", "beta-study");
    CHECK(k.ks == std::vector<int>{0, 1, 2});

    CHECK_THROWS_AS(parse_experiment_spec(R"({"sigma": [1]})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"sigmas": [1, 0.5]})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"sigmas": [0, 1]})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"sigmas": [1, 1]})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"seeds": []})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"n_eval": -4})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"lr": "fast"})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"ks": [3]})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"optimizer": "rmsprop"})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec(R"({"conv_steps": [5]})"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec("[1, 2]"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_spec("{"), ValidationError);
}

TEST_CASE("spec JSON round trip") {
    ExperimentSpec s = ExperimentSpec::defaults("grid-widthdepth");
    s.seeds = {7};
    s.budgets = {500, 2000};
    const ExperimentSpec back = parse_experiment_spec(experiment_spec_json(s));
    CHECK(experiment_spec_json(back) == experiment_spec_json(s));
}

TEST_CASE("eval points and mixture share the data coordinates") {
    const ExperimentSpec s = tiny("convergence");
    const Dataset data = experiment_dataset(s, 2);
    const GaussianMixture gm = experiment_mixture(data);
    const Vec64 mean = gm.mean();
    CHECK(std::abs(mean[0] - (-3.0 - data.offset[0])) < 1e-12);
    const Mat64 pts = experiment_eval_points(s, data, 2);
    double m0 = 0.0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        m0 += pts(i, 0) / static_cast<double>(pts.rows());
    }
    CHECK(std::abs(m0 - mean[0]) < 1.0);
}

TEST_CASE("beta study rows") {
    ExperimentSpec s = tiny("beta-study");
    s.sigmas = {0.1, 10.0};
    const VarianceReport r = run_beta_study(s);
    REQUIRE(r.rows.size() == 8);
    CHECK(r.rows[0].beta_mode == "zero");
    CHECK(r.rows[0].rho_obj == 1.0);
    CHECK(r.rows[0].rho_grad == 1.0);
    CHECK(r.rows[1].beta_mode == "opt");
    CHECK(r.rows[2].beta_mode == "one");
    CHECK(r.rows[2].beta_mean == 1.0);
    CHECK(r.rows[3].beta_mode == "per_param");
    CHECK(std::isnan(r.rows[3].rho_obj));
    CHECK(r.rows[1].rho_obj < 0.05);
    CHECK(csv(run_beta_study(s)) == csv(r));
}

TEST_CASE("seed averaging of variance rows") {
    ExperimentSpec a = tiny("k-compare");
    a.sigmas = {0.5};
    a.seeds = {0};
    ExperimentSpec b = a;
    b.seeds = {1};
    ExperimentSpec both = a;
    both.seeds = {0, 1};
    const auto ra = run_k_compare(a);
    const auto rb = run_k_compare(b);
    const auto rab = run_k_compare(both);
    REQUIRE(rab.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(rab.rows[i].k == static_cast<int>(i));
        CHECK(rab.rows[i].rho_grad == doctest::Approx((ra.rows[i].rho_grad + rb.rows[i].rho_grad) / 2));
        const double se = std::hypot(ra.rows[i].rho_grad_se, rb.rows[i].rho_grad_se) / 2;
        CHECK(rab.rows[i].rho_grad_se == doctest::Approx(se));
        CHECK(rab.rows[i].n_samples == ra.rows[i].n_samples + rb.rows[i].n_samples);
    }
}

TEST_CASE("sigma sweep measures both regimes at every checkpoint") {
    ExperimentSpec s = tiny("sigma-sweep");
    s.sigmas = {0.5, 20.0};
    s.checkpoints = {0, 3};
    s.train_batch = 4;
    const VarianceReport r = run_sigma_sweep(s);
    REQUIRE(r.rows.size() == 8);
    CHECK(r.rows[0].regime == "small");
    CHECK(r.rows[1].regime == "large");
    CHECK(r.rows[0].step == 0);
    CHECK(r.rows[4].step == 3);
    CHECK(r.rows[4].rho_grad != r.rows[0].rho_grad);
}

TEST_CASE("grid marks infeasible cells and records realized counts") {
    ExperimentSpec s = tiny("grid-widthdepth");
    s.sigmas = {0.5};
    s.budgets = {60, 400};
    s.seeds = {0};
    s.depths = {1, 8};
    const GridReport r = run_grid(s);
    REQUIRE(r.cells.size() == 8);
    const GridCell* bad = r.find(false, 60, 8, 0);
    REQUIRE(bad != nullptr);
    CHECK_FALSE(bad->feasible);
    CHECK(std::isnan(r.mean(false, 60, 8)));
    const GridCell* ok = r.find(true, 400, 1, 0);
    REQUIRE(ok != nullptr);
    CHECK(ok->feasible);
    CHECK(std::abs(static_cast<double>(ok->realized) - 400.0) <= 12.0);
    CHECK(ok->rho < 1.0);

    std::ostringstream plain;
    r.write_matrix(plain, false);
    CHECK(plain.str().find("depth,budget_60,budget_400") == 0);
    CHECK(plain.str().find("8,infeasible,") != std::string::npos);
    std::ostringstream longform;
    r.write_csv(longform);
    CHECK(longform.str().find("plain,60,8,infeasible") != std::string::npos);
}

TEST_CASE("optimizer arms share step 0") {
    ExperimentSpec s = tiny("optimizer-compare");
    s.checkpoints = {0, 4};
    s.train_batch = 8;
    const OptimizerReport r = run_optimizer_compare(s);
    REQUIRE(r.rows.size() == 4);
    const auto& sgd0 = r.find("sgd", 0, 0);
    const auto& adam0 = r.find("adam", 0, 0);
    CHECK(sgd0.rho_grad == adam0.rho_grad);
    CHECK(sgd0.loss_mean == adam0.loss_mean);
    CHECK(r.find("sgd", 0, 4).rho_grad != r.find("adam", 0, 4).rho_grad);
    CHECK_THROWS_AS(r.find("sgd", 0, 5), ValidationError);
}

TEST_CASE("convergence arms are paired and logged") {
    ExperimentSpec s = tiny("convergence");
    s.seeds = {0};
    s.batch_sizes = {4};
    s.conv_steps = {3};
    s.ks = {1};
    const auto dir = std::filesystem::temp_directory_path() / "tcv_conv_logs";
    std::filesystem::remove_all(dir);
    const ConvergenceReport r = run_convergence(s, dir);
    REQUIRE(r.records.size() == 2);
    const auto& off = r.find(0, 4, false);
    const auto& on = r.find(0, 4, true);
    CHECK(off.initial_mse == on.initial_mse);
    CHECK(std::isnan(off.mean_rho_g_batch));
    CHECK(std::isfinite(on.mean_rho_g_batch));
    CHECK(std::filesystem::exists(dir / "convergence_seed0_batch4_cv-on.jsonl"));
    CHECK(std::filesystem::exists(dir / "convergence_seed0_batch4_cv-off.jsonl"));
    std::ostringstream out;
    r.write_csv(out);
    CHECK(out.str().find("seed,batch,arm,initial_mse") == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("equivalence check on a few tuples") {
    const EquivalenceReport r = equivalence_check(12, 3);
    CHECK(r.tuples == 12);
    CHECK(r.passed());
}
