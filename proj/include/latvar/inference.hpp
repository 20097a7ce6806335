#pragma once

// Hypothesis tests (LRT / Wald / score), model search and equivalence
// detection, effect decomposition, delta-method constraint estimates,
// Wald/profile confidence limits, robust variance and the bootstrap.

#include <cstdint>
#include <functional>

#include "latvar/fit.hpp"
#include "latvar/simulate.hpp"

namespace latvar {

struct TestResult {
    double statistic = 0;
    int df = 0;
    double p = 1;
    std::string method;
    std::vector<std::pair<std::string, double>> annotations; // e.g. the two log-likelihoods
};

TestResult lrt(const FitResult& fit_small, const FitResult& fit_large);

struct WaldSpec {
    // variant 1: named parameters against a null vector (default zero)
    std::vector<std::string> pars;
    Vec null;
    // variant 2: contrast matrix; columns named when `columns` is non-empty,
    // omitted columns implicitly zero
    Mat C;
    Vec rhs;
    std::vector<std::string> columns;
};
TestResult wald(const FitResult& fit, const WaldSpec& spec, const Mat* vcov_override = nullptr);

struct EdgeRef {
    enum class Kind { Regression, Covariance } kind = Kind::Covariance;
    std::string a, b; // regression: a <- b; covariance: a <-> b
    std::string label() const {
        return kind == Kind::Regression ? a + "<-" + b : a + "<->" + b;
    }
};

TestResult score_test(const FitResult& fit, const std::vector<EdgeRef>& additions);

struct SearchRow {
    EdgeRef edge;
    double statistic = 0;
    double p = 1;
    double holm = 1;
    double bh = 1;
};
// all one-parameter extensions, sorted ascending by statistic
std::vector<SearchRow> modelsearch(const FitResult& fit);

struct EquivalenceResult {
    EdgeRef focus;
    double statistic = 0;
    std::vector<std::pair<EdgeRef, double>> equivalents;
    std::vector<std::pair<EdgeRef, double>> candidates; // beyond the focus statistic
};
EquivalenceResult equivalence(const FitResult& fit, const EdgeRef& focus, double tol = 1e-4);

struct PathEffect {
    std::vector<std::string> path; // exposure ... outcome
    double estimate = 0;
    double se = 0;
};
struct EffectDecomposition {
    double total = 0, total_se = 0;
    double direct = 0, direct_se = 0;
    bool has_direct = false; // direct edge present as a parameter
    std::vector<PathEffect> indirect;
};
EffectDecomposition effects(const FitResult& fit, const std::string& outcome,
                            const std::string& exposure);

struct ConstraintEstimate {
    std::string name;
    double estimate = 0, se = 0, z = 0, p = 1, lo = 0, hi = 0;
    bool has_inv = false;
    double inv_estimate = 0, inv_lo = 0, inv_hi = 0;
    std::string inv_name;
};
std::vector<ConstraintEstimate> constraint_estimates(
    const FitResult& fit, const std::vector<NonlinearConstraint>& extra = {},
    double level = 0.95);

struct Interval {
    double lo = 0, hi = 0;
};
enum class CiMethod { Wald, Profile };
Interval confint(const FitResult& fit, const std::string& parm, double level = 0.95,
                 CiMethod method = CiMethod::Wald);

Mat robust_vcov(const FitResult& fit, const std::vector<int>& cluster_of_row);
Mat robust_vcov(const FitResult& fit, const std::string& cluster_column);

struct BootstrapRow {
    std::string name;
    double estimate = 0, bias = 0, se = 0, lo = 0, hi = 0;
};
struct BootstrapResult {
    std::vector<BootstrapRow> rows;
    int R = 0;
    int failures = 0;
    Mat replicates; // successful replicates x statistics
};
using BootStatistic = std::function<Vec(const FitResult&)>;
BootstrapResult bootstrap(const FitResult& fit, int R, bool parametric, std::uint64_t seed,
                          double level = 0.95, const BootStatistic& statistic = {},
                          const std::vector<std::string>& stat_names = {});

struct GofResult {
    double loglik = 0, aic = 0, bic = 0;
    int n_par = 0;
    double sat_loglik = 0, q = 0;
    int df = 0;
    double p = 1;
    bool has_chisq = false;
    int rank = 0;
    double condition = 0;
    double score_sq = 0;
    double n_obs = 0, n_total = 0; // rows; rows x endogenous count
};
GofResult gof(const FitResult& fit);

} // namespace latvar
