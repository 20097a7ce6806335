#pragma once

// Instrumental-variable (2SLS) estimation: surrogate indicators substitute
// the latent variables, instruments are selected by an exact symbolic
// zero-covariance test on the model-implied structure, and all equations are
// solved simultaneously.

#include "latvar/fit.hpp"

namespace latvar {

struct IvEquation {
    std::string response;       // display name (latent name for structural equations)
    std::string response_col;   // observed column carrying the response
    bool intercept = true;
    std::string intercept_name; // slot name of the intercept coefficient
    std::vector<std::string> predictor_cols;  // observed columns on the RHS
    std::vector<std::string> predictor_names; // coefficient slot names
    std::vector<std::pair<std::string, double>> offsets; // fixed-coefficient terms
    std::vector<std::string> instruments;
};

struct IvPlan {
    std::vector<std::string> latents;
    std::vector<std::string> surrogates; // parallel to latents
    std::vector<IvEquation> equations;
};

IvPlan build_plan(const ModelSpec& model);

FitResult iv_estimate(const ModelSpec& model, const Dataset& data, FitOptions options = {});

} // namespace latvar
