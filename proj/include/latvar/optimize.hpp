#pragma once

// Generic maximizers: Newton-Raphson / Fisher scoring with step halving, a
// derivative-free simplex fallback, and the log-link reparameterization of
// variance coordinates.

#include <functional>
#include <string>

#include "latvar/types.hpp"

namespace latvar {

struct Objective {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> grad;      // used by NR / scoring
    std::function<Mat(const Vec&)> curvature; // positive definite-ish: -hessian or information
};

struct OptimOptions {
    int iter_max = 200;
    double tol = 1e-9;   // on ||grad||_inf and relative value change
    double gamma = 1.0;  // initial step scaling
    bool trace = false;
};

struct OptResult {
    Vec theta;
    double value = 0;
    Vec grad;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

OptResult newton_raphson(const Objective& obj, Vec theta0, const OptimOptions& opt = {});

// Nelder-Mead on -value; objective-only contract.
OptResult nelder_mead(const std::function<double(const Vec&)>& value, Vec theta0,
                      const OptimOptions& opt = {});

// Wraps an objective so the listed coordinates are optimized on the log
// scale; results map back to the natural scale.
struct LogLinkMap {
    std::vector<bool> on; // per coordinate

    Vec to_internal(const Vec& natural) const;
    Vec to_natural(const Vec& internal) const;
    Objective wrap(const Objective& obj) const;
};

} // namespace latvar
