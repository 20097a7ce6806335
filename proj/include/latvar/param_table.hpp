#pragma once

// Compiles a ModelSpec into the RAM parameterization: index maps from the
// canonical free parameter vector θ into the matrices (A, P, v), plus the
// profiled exogenous-moment block of the joint formulation. Immutable after
// compile; materialize is pure and reentrant.

#include <optional>
#include <unordered_map>

#include "latvar/model.hpp"
#include "latvar/types.hpp"

namespace latvar {

// Sample moments of the exogenous block (aligned with ParameterTable::exo_names).
// Profiled at their MLEs during estimation; zero when absent.
struct ExoMoments {
    Vec mean;
    Mat cov;
};

struct Slot {
    enum class M { A, P, V };
    enum class Kind { Theta, Fixed, Covariate, Exo, Constrained };
    M mat;
    Index row = 0, col = 0; // U positions; P slots stored once per unordered pair
    Kind kind = Kind::Fixed;
    int index = -1;    // θ index / exo-moment index / constraint index
    double value = 0;  // fixed literal
    std::string name;  // display slot name
};

struct CompiledConstraint {
    struct Arg {
        int theta = -1; // θ index when >= 0
        int column = -1; // covariate column index when >= 0
    };
    std::string target;
    std::vector<Arg> args;
    std::string fn_name, inv_name;
    ConstraintFn fn;
    ConstraintGrad grad; // empty -> finite differences
    ScalarFn inv;
    bool row_dependent = false;
};

struct Materialized {
    Mat A, P;
    Vec v;
};

// One additive contribution of θ_j to a matrix entry; P off-diagonals imply
// the mirrored entry as well.
struct WeightedSlot {
    Slot::M mat;
    Index row, col;
    double w;
};

class ParameterTable {
public:
    Index m = 0; // total variables
    Index k = 0; // observed variables
    std::vector<std::string> u_names; // U order: observed then latent
    std::vector<Index> exo_pos, endo_pos, latent_pos; // positions in U
    std::vector<std::string> exo_names;

    int theta_dim = 0;
    std::vector<std::string> theta_names;  // slot-style display names
    std::vector<std::string> theta_labels; // label-substituted names
    std::vector<bool> theta_is_label;      // user label (sharable across groups)
    std::vector<bool> variance_like;       // θ coordinate lives only on diag(P)

    std::vector<Slot> slots;
    std::vector<CompiledConstraint> constraints;
    std::vector<std::string> covariate_columns;
    int exo_moment_dim = 0;

    bool row_dependent_A = false; // random slopes
    bool row_dependent_v = false; // covariate-dependent constraints on v

    bool affine() const { return constraints.empty(); }
    bool row_dependent() const { return row_dependent_A || row_dependent_v || !covariate_columns.empty(); }
    Index u_index(const std::string& name) const;
    int theta_index(const std::string& name_or_label) const; // -1 when unknown
    int exo_mean_index(Index exo_ordinal) const { return static_cast<int>(exo_ordinal); }
    int exo_cov_index(Index i, Index j) const; // i<=j ordinals in exo_names

    Materialized materialize(const Vec& theta, const Vec* covariate_values = nullptr,
                             const ExoMoments* exo = nullptr) const;

    // ∂(A,P,v)/∂θ_j as weighted slot lists. Constant for affine tables; with
    // nonlinear constraints the chain rule is evaluated at (θ, row).
    std::vector<std::vector<WeightedSlot>> theta_derivs(const Vec& theta,
                                                        const Vec* covariate_values = nullptr) const;

    ExoMoments zero_exo() const;
};

// extra_columns: dataset columns usable as constraint covariates in addition
// to the model's observed variables.
ParameterTable compile(const ModelSpec& model,
                       const std::vector<std::string>& extra_columns = {});

} // namespace latvar
