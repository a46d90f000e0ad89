// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/bench/langevin.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "tcv/ndcore/errors.hpp"
#include "tcv/ndcore/parallel.hpp"

namespace tcv {

ScoreFn network_score(ScoreNetwork net) {
    auto shared = std::make_shared<const ScoreNetwork>(std::move(net));
    return [shared](std::span<const double> x, double) { return shared->evaluate(x); };
}

ScoreFn mixture_score_fn(GaussianMixture gm) {
    gm.validate();
    return [gm](std::span<const double> x, double sigma) {
        return mixture_score(gm.smoothed(sigma), x);
    };
}

LangevinInit default_init(std::size_t dim, const NoiseSchedule& schedule) {
    require(schedule.size() >= 1, "langevin: empty schedule");
    LangevinInit init{Vec64(dim, 0.0), Mat64(dim, dim)};
    for (std::size_t i = 0; i < dim; ++i) {
        init.chol(i, i) = schedule.levels.back();
    }
    return init;
}

LangevinInit gaussian_fit_init(const Mat64& data) {
    require(data.rows() >= 2, "langevin: need two or more rows to fit a Gaussian");
    const std::size_t d = data.cols();
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        data.data().data(), static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(d));
    const Eigen::RowVectorXd mean = m.colwise().mean();
    const Eigen::MatrixXd centered = m.rowwise() - mean;
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(data.rows() - 1);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("langevin: sample covariance is not positive definite");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    LangevinInit init{Vec64(d), Mat64(d, d)};
    for (std::size_t i = 0; i < d; ++i) {
        init.mean[i] = mean(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < d; ++j) {
            init.chol(i, j) = l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return init;
}

Mat64 langevin_sample(const ScoreFn& score, const NoiseSchedule& schedule,
                      std::size_t steps_per_level, double step_size, const RngStream& rng,
                      std::size_t n, const LangevinInit& init, std::size_t threads) {
    require(schedule.size() >= 1, "langevin: empty schedule");
    require(step_size >= 0.0 && std::isfinite(step_size), "langevin: step size must be >= 0");
    const std::size_t d = init.mean.size();
    require(d >= 1 && init.chol.rows() == d && init.chol.cols() == d,
            "langevin: initial law has inconsistent shapes");
    const double floor2 = schedule.levels.front() * schedule.levels.front();
    Mat64 out(n, d);
    parallel_for(n, threads, [&](std::size_t i) {
        RngStream r = split_stream(rng, i);
        const Vec64 u = gaussian_sample(r, d);
        auto x = out.row(i);
        for (std::size_t a = 0; a < d; ++a) {
            double v = init.mean[a];
            for (std::size_t b = 0; b <= a; ++b) {
                v += init.chol(a, b) * u[b];
            }
            x[a] = v;
        }
        if (step_size == 0.0) {
            return;
        }
        Vec64 noise(d);
        for (std::size_t level = schedule.size(); level-- > 0;) {
            const double sigma = schedule.levels[level];
            const double alpha = step_size * sigma * sigma / floor2;
            const double root = std::sqrt(alpha);
            for (std::size_t t = 0; t < steps_per_level; ++t) {
                const Vec64 s = score(x, sigma);
                r.gaussian_fill(noise);
                for (std::size_t a = 0; a < d; ++a) {
                    x[a] += 0.5 * alpha * s[a] + root * noise[a];
                }
            }
            if (!all_finite(x)) {
                throw NumericalError("langevin: chain " + std::to_string(i) +
                                     " diverged at sigma " + std::to_string(sigma));
            }
        }
    });
    return out;
}

} // namespace tcv
