#pragma once

// Estimation drivers: single-group ML, multigroup ML with label sharing,
// FIML for missing data and the inverse-probability-weighted estimator.

#include <memory>
#include <optional>

#include "latvar/likelihood.hpp"
#include "latvar/optimize.hpp"

namespace latvar {

enum class Estimator { Gaussian, Weighted, IV };
enum class OptMethod { NewtonRaphson, FisherScoring, Quasi };

struct FitOptions {
    Estimator estimator = Estimator::Gaussian;
    OptMethod optimizer = OptMethod::FisherScoring;
    IdentParam param = IdentParam::Hybrid;
    bool constrain_variances = true; // log-link on variance coordinates
    bool missing = false;            // FIML over missing patterns
    int iter_max = 200;
    double tol = 1e-9;
    double gamma = 1.0;
    bool trace = false;
    std::optional<InfoType> vcov_type;          // default: Expected; Hessian when missing
    std::optional<Vec> start;
    std::vector<std::string> weight_cols;       // Weighted: data columns, endogenous order
    std::string cluster;                        // robust SEs when non-empty
};

struct FitGroup {
    ModelSpec model; // after identification
    std::shared_ptr<const LikelihoodContext> ctx;
    std::shared_ptr<const Dataset> data;
    std::vector<int> map; // group theta index -> global theta index
};

struct FitResult {
    Vec theta;
    std::vector<std::string> names;  // slot-style
    std::vector<std::string> labels; // label-substituted
    Mat vcov;
    InfoType vcov_type = InfoType::Expected;
    double loglik = 0;
    Vec score;
    int iterations = 0;
    bool converged = false;
    std::string estimator = "gaussian";
    double n = 0; // rows used (summed over groups)
    FitOptions options;
    std::vector<FitGroup> groups;

    int dim() const { return static_cast<int>(theta.size()); }
    int index_of(const std::string& name_or_label) const; // throws when unknown
    double estimate(const std::string& name) const { return theta[index_of(name)]; }
    double se(int j) const { return std::sqrt(vcov(j, j)); }
    double se(const std::string& name) const { return se(index_of(name)); }
    bool variance_like(int j) const; // suppress p-values for these

    const FitGroup& group() const { return groups.front(); }
    // global <- per-group gather of score/information
    Vec global_score(const Vec& theta_global) const;
    double global_loglik(const Vec& theta_global) const;
    Mat global_information(const Vec& theta_global, InfoType type) const;
    Mat global_score_rows(const Vec& theta_global) const; // rows stacked over groups
};

Vec starter_values(const LikelihoodContext& ctx);

FitResult fit(const ModelSpec& model, const Dataset& data, FitOptions options = {});
FitResult fit_multigroup(const std::vector<ModelSpec>& models,
                         const std::vector<Dataset>& datasets, FitOptions options = {});

// Cluster-robust sandwich: bread = observed-information inverse, meat =
// K/(K-1) sum of within-cluster score-sum outer products.
Mat cluster_sandwich(const FitResult& fit, const std::vector<int>& cluster_of_row);

// Root-finder for estimating equations (weighted estimator).
struct EstEqResult {
    Vec theta;
    Vec u;
    int iterations = 0;
    bool converged = false;
};
EstEqResult solve_estimating_equations(const std::function<Vec(const Vec&)>& U, Vec theta0,
                                       const OptimOptions& opt);

} // namespace latvar
