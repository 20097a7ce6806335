#pragma once

// Gaussian likelihood machinery on top of the moment bundle: sufficient-stat
// and per-row log-likelihood, score, the four information types, the missing
// -pattern (FIML) decomposition and the inverse-probability-weighted score.

#include <memory>
#include <optional>

#include "latvar/dataset.hpp"
#include "latvar/moments.hpp"
#include "latvar/param_table.hpp"

namespace latvar {

enum class InfoType { Expected, Hessian, Outer, Robust };

struct PatternGroup {
    std::vector<Index> obs;  // observed coordinates (0..k-1, U order) present
    std::vector<Index> rows; // dataset rows in this pattern
    SufficientStats stats;   // over the observed subvector
};

// Binds a compiled table to data laid out in U order. Immutable; evaluation
// methods are pure in theta and safe to call concurrently.
class LikelihoodContext {
public:
    LikelihoodContext(ParameterTable table, const Dataset& data, bool missing = false,
                      const Vec* row_weights = nullptr);

    const ParameterTable& table() const { return table_; }
    const ExoMoments& exo() const { return exo_; }
    const Mat& Z() const { return Z_; }             // n x k, U observed order
    const Mat& cov_cols() const { return covcols_; } // n x n_covariate_columns
    Index n_rows() const { return Z_.rows(); }
    double n_effective() const { return n_eff_; }
    const std::vector<PatternGroup>& patterns() const { return patterns_; }
    const std::vector<Index>& kept_rows() const { return kept_rows_; } // into source data
    bool row_dependent() const { return table_.row_dependent(); }

    double loglik(const Vec& theta) const;
    Vec score(const Vec& theta) const;
    Mat score_rows(const Vec& theta) const; // n x p per-row contributions
    Mat information(const Vec& theta, InfoType type) const; // Expected/Hessian/Outer
    // log-likelihood of the saturated joint model through the same kernel
    double saturated_loglik() const;
    // parameter count of the saturated conditional model (gof df reference)
    int saturated_param_count() const;

    Vec row_loglik(const Vec& theta) const; // per-row contributions

private:
    ParameterTable table_;
    Mat Z_;
    Mat covcols_;
    ExoMoments exo_;
    std::vector<PatternGroup> patterns_;
    std::vector<Index> kept_rows_;
    Vec weights_; // size 0 = unweighted
    double n_eff_ = 0;

    friend class WeightedScore;
};

// Gaussian kernel: -n/2 (k log 2pi + log|Omega| + tr(T Omega^-1)). Shared by
// model and saturated evaluations so additive constants cancel in ratios.
double gaussian_suff_loglik(const Mat& omega, const Vec& xi, const SufficientStats& st);

// Inverse-probability-weighted estimating function, conditional formulation.
// weights: n x n_endo matrix of per-variable weights (endogenous U order).
Vec weighted_score(const LikelihoodContext& ctx, const Vec& theta, const Mat& weights);
Mat weighted_score_rows(const LikelihoodContext& ctx, const Vec& theta, const Mat& weights);

// Central finite-difference Jacobian of the analytic score (hessian fallback).
Mat numeric_score_jacobian(const std::function<Vec(const Vec&)>& score_fn, const Vec& theta);

} // namespace latvar
