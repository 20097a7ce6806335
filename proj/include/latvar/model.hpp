#pragma once

// Declarative model graph: variables, regression/covariance edges with
// parameter bindings, intercepts, nonlinear constraints and the simulation
// hooks. A ModelSpec is a value; completed specs are immutable by convention
// and safe to share across threads.

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "latvar/types.hpp"

namespace latvar {

enum class VarKind { Observed, Latent };

struct Variable {
    std::string name;
    VarKind kind = VarKind::Observed;
};

struct ParameterBinding {
    enum class Kind { Free, Labeled, Fixed, Covariate };
    Kind kind = Kind::Free;
    std::string name;  // label (Labeled) or data column (Covariate)
    double value = 0.0;

    static ParameterBinding free() { return {}; }
    static ParameterBinding labeled(std::string label) {
        return {Kind::Labeled, std::move(label), 0.0};
    }
    static ParameterBinding fixed(double v) { return {Kind::Fixed, {}, v}; }
    static ParameterBinding covariate(std::string column) {
        return {Kind::Covariate, std::move(column), 0.0};
    }
    bool is_fixed() const { return kind == Kind::Fixed; }
    bool operator==(const ParameterBinding& o) const {
        return kind == o.kind && name == o.name &&
               (kind != Kind::Fixed || value == o.value);
    }
};

struct RegEdge {
    std::string from, to;
    ParameterBinding bind;
};

struct CovEdge {
    std::string a, b; // distinct, unordered; stored in first-declared order
    ParameterBinding bind;
};

// ---- simulation hooks (no effect on estimation) ----

enum class Link { Identity, Logit, Probit, Cloglog, Log };

struct DistributionSpec {
    enum class Family { Normal, Binomial, Poisson, Uniform, Weibull, FixedData };
    Family family = Family::Normal;
    Link link = Link::Identity;
    std::optional<double> fixed_param; // binomial p / poisson lambda
    double scale = 1.0, shape = 1.0;   // weibull
    double cens = std::numeric_limits<double>::infinity();
    std::vector<double> data; // FixedData

    static DistributionSpec normal() { return {}; }
    static DistributionSpec binomial(Link link = Link::Logit,
                                     std::optional<double> p = std::nullopt) {
        DistributionSpec d;
        d.family = Family::Binomial;
        d.link = link;
        d.fixed_param = p;
        return d;
    }
    static DistributionSpec poisson(std::optional<double> lambda = std::nullopt) {
        DistributionSpec d;
        d.family = Family::Poisson;
        d.link = Link::Log;
        d.fixed_param = lambda;
        return d;
    }
    static DistributionSpec uniform() {
        DistributionSpec d;
        d.family = Family::Uniform;
        return d;
    }
    static DistributionSpec weibull(double scale, double shape,
                                    double cens = std::numeric_limits<double>::infinity()) {
        if (scale <= 0 || shape <= 0) throw Error::spec("weibull: scale and shape must be > 0");
        DistributionSpec d;
        d.family = Family::Weibull;
        d.scale = scale;
        d.shape = shape;
        d.cens = cens;
        return d;
    }
    static DistributionSpec fixed_data(std::vector<double> values) {
        DistributionSpec d;
        d.family = Family::FixedData;
        d.data = std::move(values);
        return d;
    }
    bool operator==(const DistributionSpec& o) const {
        return family == o.family && link == o.link && fixed_param == o.fixed_param &&
               scale == o.scale && shape == o.shape && cens == o.cens && data == o.data;
    }
};

struct VarDistribution {
    std::string var;
    DistributionSpec dist;
};

struct HeavyTailGroup {
    std::vector<std::string> vars;
    double df = 3.0;
};

using ScalarFn = std::function<double(double)>;

struct FunctionalTransform {
    std::string to, from;
    std::string fn_name; // builtin name; "<custom>" for programmatic lambdas
    ScalarFn fn;
};

struct CopyVar {
    std::string source, alias;
};

// ---- nonlinear constraints (affect estimation) ----

using ConstraintFn = std::function<double(const std::vector<double>&)>;
using ConstraintGrad = std::function<std::vector<double>(const std::vector<double>&)>;

struct NonlinearConstraint {
    std::string target;            // parameter label whose value becomes fn(args)
    std::vector<std::string> args; // parameter labels and/or data columns
    std::string fn_name;
    ConstraintFn fn;
    ConstraintGrad grad; // optional analytic gradient w.r.t. args
    ScalarFn inv;        // optional monotone transform for CI mapping
    std::string inv_name;
};

enum class IdentParam { Relative, Absolute, Hybrid, None };

enum class QueryKind { Children, Parents, Paths, Exogenous, Endogenous, Latent, Manifest, Vars };

class ModelSpec {
public:
    // -- construction / editing --
    Index add_var(const std::string& name, VarKind kind = VarKind::Observed);
    void set_latent(const std::string& name, bool latent = true);
    void add_regression(const std::string& to, const std::string& from,
                        ParameterBinding bind = ParameterBinding::free());
    void add_covariance(const std::string& a, const std::string& b,
                        ParameterBinding bind = ParameterBinding::free());
    void set_intercept(const std::string& var, ParameterBinding bind);
    void set_variance(const std::string& var, ParameterBinding bind);
    void constrain(NonlinearConstraint c);
    void unconstrain(const std::string& target);

    void cancel(const std::vector<std::string>& vars);
    // Removes variables and incident edges; returns names that were absent
    // (removal of an unknown variable is a warning-level no-op).
    std::vector<std::string> kill(const std::vector<std::string>& vars);
    ModelSpec subset(const std::vector<std::string>& keep) const;
    ModelSpec merged(const ModelSpec& other) const;

    ModelSpec identified(IdentParam param) const;

    // -- simulation hooks --
    void set_distribution(const std::string& var, DistributionSpec dist);
    void set_functional(const std::string& to, const std::string& from, std::string fn_name,
                        ScalarFn fn);
    void clear_functional(const std::string& to, const std::string& from);
    void add_heavytail(const std::vector<std::string>& vars, double df, bool shared);
    void add_copy(const std::string& source, const std::string& alias);

    // -- queries --
    bool has_var(const std::string& name) const;
    Index var_index(const std::string& name) const; // throws on unknown
    const std::vector<Variable>& variables() const { return vars_; }
    std::vector<std::string> var_names() const;
    std::vector<std::string> latent_vars() const;
    std::vector<std::string> manifest() const;
    std::vector<std::string> exogenous() const;
    std::vector<std::string> endogenous(bool top = false) const;
    std::vector<std::string> children(const std::vector<std::string>& of) const;
    std::vector<std::string> parents(const std::vector<std::string>& of) const;
    std::vector<std::vector<std::string>> paths(const std::string& from,
                                                const std::string& to) const;

    const std::vector<RegEdge>& reg_edges() const { return reg_; }
    const std::vector<CovEdge>& cov_edges() const { return cov_; }
    const RegEdge* find_reg(const std::string& to, const std::string& from) const;
    const CovEdge* find_cov(const std::string& a, const std::string& b) const;
    ParameterBinding intercept(const std::string& var) const;
    ParameterBinding variance(const std::string& var) const;
    bool variance_declared(const std::string& var) const;
    const std::vector<NonlinearConstraint>& constraints() const { return constraints_; }
    const std::vector<VarDistribution>& distributions() const { return dists_; }
    const DistributionSpec* distribution(const std::string& var) const;
    const std::vector<FunctionalTransform>& functionals() const { return functionals_; }
    const FunctionalTransform* functional(const std::string& to, const std::string& from) const;
    const std::vector<HeavyTailGroup>& heavytails() const { return heavytails_; }
    const std::vector<CopyVar>& copies() const { return copies_; }
    const std::vector<std::string>& extra_parameters() const { return extra_params_; }
    void add_parameter(const std::string& label); // θ coordinate without a slot

    // Variables in RAM order: observed in declaration order, then latent.
    std::vector<Index> u_order() const;

    // Canonical parameter names; labels=true substitutes shared labels.
    std::vector<std::string> coef_names(bool labels = false) const;

    // Structural equality (functional hooks compared by registered name).
    bool structurally_equal(const ModelSpec& other) const;

private:
    std::vector<Variable> vars_;
    std::vector<RegEdge> reg_;
    std::vector<CovEdge> cov_;
    std::vector<ParameterBinding> intercepts_; // parallel to vars_
    std::vector<ParameterBinding> variances_;  // parallel to vars_
    std::vector<bool> var_declared_;           // explicit variance declaration seen
    std::vector<NonlinearConstraint> constraints_;
    std::vector<VarDistribution> dists_;
    std::vector<FunctionalTransform> functionals_;
    std::vector<HeavyTailGroup> heavytails_;
    std::vector<CopyVar> copies_;
    std::vector<std::string> extra_params_;

    friend struct ModelAccess;
};

// Canonical slot enumeration shared by coef_names and the RAM compiler.
struct CanonicalSlot {
    enum class What { Intercept, Regression, Covariance, Extra } what;
    Index a = -1, b = -1; // var indices: intercept/variance (a), reg (to=a,from=b), cov (a,b)
    ParameterBinding bind;
    std::string slot_name; // "y1", "w<-y1", "y1<->y3"
};

// All non-exogenous canonical slots in coef order (fixed slots included;
// callers skip them when counting θ).
std::vector<CanonicalSlot> canonical_slots(const ModelSpec& m);

} // namespace latvar
