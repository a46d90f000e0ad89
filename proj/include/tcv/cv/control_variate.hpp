// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Taylor-expansion control variates for the denoising score matching loss.
//
// Small-σ: expand s around the data point x, perturbation σz.
// Large-σ: expand s around σz, perturbation x.
//
// Either variant is a scalar of the shape
//   offset + Σ_{a<=b} c_ab ∂^a s·∂^b s + Σ_a w_a·∂^a s
// with coefficients depending on (x, z, σ) only, so it is held as a CvForm
// and evaluated on plain jets or recorded on a tape.

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "tcv/autodiff/jet.hpp"
#include "tcv/gaussmoments/moments.hpp"
#include "tcv/ndcore/linalg.hpp"
#include "tcv/scorenet/network.hpp"

namespace tcv {

enum class Regime { small_sigma, large_sigma };
enum class CvTarget { objective, gradient };

const char* regime_name(Regime r) noexcept;
Regime parse_regime(const std::string& name);

struct CvConfig {
    Regime regime = Regime::small_sigma;
    int k = 1;
    CvTarget target = CvTarget::gradient;

    /// k in {0, 1, 2}: input jets stop at order 2.
    void validate() const;
};

/// Empirical moments μ_α = mean of x^α over a dataset, |α| <= max_order.
class DataMoments {
public:
    DataMoments() = default;
    DataMoments(const Mat64& samples, int max_order);

    std::size_t dim() const noexcept { return dim_; }
    int max_order() const noexcept { return max_order_; }
    std::size_t count() const noexcept { return count_; }

    /// Throws ValidationError when α is not covered.
    double moment(const MultiIndex& alpha) const;

private:
    std::size_t dim_ = 0;
    int max_order_ = 0;
    std::size_t count_ = 0;
    std::map<MultiIndex, double> table_;
};

struct CvForm {
    std::size_t dim = 0;
    int k = 0;
    std::vector<MultiIndex> indices; // |α| <= k, graded lex
    double offset = 0.0;
    struct Pair {
        std::size_t a;
        std::size_t b;
        double coef;
    };
    std::vector<Pair> pairs;   // a <= b, symmetric factor folded in
    std::vector<Vec64> linear; // one weight vector per index (may be all zero)
};

/// Coefficients of C^k at (z, σ). The jet is taken at x.
CvForm small_sigma_form(std::span<const double> z, double sigma, int k, const MomentTable& moments);

/// Coefficients of the large-σ variate at (x, z, σ). The jet is taken at σz.
CvForm large_sigma_form(std::span<const double> x, std::span<const double> z, double sigma, int k,
                        const DataMoments& data);

/// Value of the form on a jet of order >= form.k.
double evaluate_form(const CvForm& form, const JetValues& jet);

/// Records the form on a tape; returns the scalar node.
NodeId record_form(Tape& tape, const CvForm& form, const JetNodes& jet);

/// Input jet at a point together with the mixed derivatives
/// ∂_θ(∂^ρ s)_m for every |ρ| <= k and output component m.
struct MixedJacobian {
    std::vector<MultiIndex> indices;
    JetValues jet;
    std::vector<Vec64> rows; // rows[r * dim + m], each of parameter length
};

MixedJacobian mixed_jacobian(const ScoreNetwork& net, std::span<const double> point, int k);

/// Regime-specific evaluation with the constants it needs. Holds the moment
/// table and, for large σ, shared frozen data moments.
class ControlVariate {
public:
    ControlVariate(CvConfig config, std::size_t dim,
                   std::shared_ptr<const DataMoments> data = nullptr);

    const CvConfig& config() const noexcept { return config_; }
    std::size_t dim() const noexcept { return dim_; }
    const MomentTable& moments() const noexcept { return moments_; }

    CvForm form(std::span<const double> x, std::span<const double> z, double sigma) const;

    /// x for small σ, σz for large σ.
    Vec64 expansion_point(std::span<const double> x, std::span<const double> z, double sigma) const;

    /// Builds the jet at the expansion point and the variate on `tape`.
    NodeId record(Tape& tape, std::span<const double> x, std::span<const double> z,
                  double sigma) const;

    double objective(const ScoreNetwork& net, std::span<const double> x,
                     std::span<const double> z, double sigma) const;

    /// ∂_θ of the objective variate by one reverse pass.
    Vec64 objective_gradient(const ScoreNetwork& net, std::span<const double> x,
                             std::span<const double> z, double sigma) const;

    /// Gradient variate assembled from the mixed derivatives ∂^ρ∂_θ s.
    Vec64 gradient(const ScoreNetwork& net, std::span<const double> x, std::span<const double> z,
                   double sigma) const;

    /// Same, reusing mixed derivatives taken at expansion_point(x, z, sigma).
    Vec64 assemble_gradient(const MixedJacobian& mj, std::span<const double> x,
                            std::span<const double> z, double sigma) const;

private:
    CvConfig config_;
    std::size_t dim_;
    MomentTable moments_;
    std::shared_ptr<const DataMoments> data_;
};

double cv_objective_small(const ScoreNetwork& net, std::span<const double> x,
                          std::span<const double> z, double sigma, int k,
                          const MomentTable& moments);

Vec64 cv_gradient_small(const ScoreNetwork& net, std::span<const double> x,
                        std::span<const double> z, double sigma, int k, const MomentTable& moments);

double cv_objective_large(const ScoreNetwork& net, std::span<const double> x,
                          std::span<const double> z, double sigma, int k, const DataMoments& data);

Vec64 cv_gradient_large(const ScoreNetwork& net, std::span<const double> x,
                        std::span<const double> z, double sigma, int k, const DataMoments& data);

/// Explicit trace / Frobenius forms of C^1 and C^2, written without
/// multi-index sums.
double cv_objective_small_closed(const ScoreNetwork& net, std::span<const double> x,
                                 std::span<const double> z, double sigma, int k);

/// λ(σ)(L - βC) with λ(σ) = σ^lambda_power.
double controlled_loss(const ScoreNetwork& net, std::span<const double> x,
                       std::span<const double> z, double sigma, double beta,
                       const ControlVariate& cv, double lambda_power = 2.0);

/// L_{k+1} d^{k+1} / (k+1)!
double taylor_remainder_bound(double lipschitz, double distance, int k);

} // namespace tcv
