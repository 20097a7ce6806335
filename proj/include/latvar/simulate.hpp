#pragma once

// Simulation from a ModelSpec: Gaussian-linear blocks solved through the
// reduced form, link/distribution hooks, heavy tails, functional transforms
// and deterministic per-column RNG substreams.

#include <cstdint>
#include <map>

#include "latvar/dataset.hpp"
#include "latvar/fit.hpp"
#include "latvar/model.hpp"

namespace latvar {

struct SimOptions {
    std::uint64_t seed = 0;
    std::map<std::string, double> params; // overrides by coef name or label
    const Dataset* xfix = nullptr;        // reuse exogenous columns from here
};

Dataset sim(const ModelSpec& model, Index n, const SimOptions& opt = {});

Dataset sim_from_fit(const FitResult& fit, Index n = -1,
                     const std::map<std::string, double>& params = {}, bool xfix = true,
                     std::uint64_t seed = 0);

} // namespace latvar
