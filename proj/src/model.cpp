#include "latvar/model.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace latvar {

namespace {
bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}
} // namespace

Index ModelSpec::add_var(const std::string& name, VarKind kind) {
    if (name.empty()) throw Error::spec("variable name must be non-empty");
    for (Index i = 0; i < static_cast<Index>(vars_.size()); ++i)
        if (vars_[static_cast<size_t>(i)].name == name) return i;
    vars_.push_back({name, kind});
    intercepts_.push_back(ParameterBinding::free());
    variances_.push_back(ParameterBinding::free());
    var_declared_.push_back(false);
    return static_cast<Index>(vars_.size()) - 1;
}

bool ModelSpec::has_var(const std::string& name) const {
    for (const auto& v : vars_)
        if (v.name == name) return true;
    return false;
}

Index ModelSpec::var_index(const std::string& name) const {
    for (Index i = 0; i < static_cast<Index>(vars_.size()); ++i)
        if (vars_[static_cast<size_t>(i)].name == name) return i;
    throw Error::spec("unknown variable: " + name);
}

void ModelSpec::set_latent(const std::string& name, bool latent) {
    Index i = add_var(name);
    vars_[static_cast<size_t>(i)].kind = latent ? VarKind::Latent : VarKind::Observed;
}

void ModelSpec::add_regression(const std::string& to, const std::string& from,
                               ParameterBinding bind) {
    if (to == from) throw Error::spec("regression self-loop on " + to);
    if (bind.kind == ParameterBinding::Kind::Covariate) {
        // random slopes live on edges touching a latent variable
        add_var(to);
        add_var(from);
        bool latent_end = vars_[static_cast<size_t>(var_index(to))].kind == VarKind::Latent ||
                          vars_[static_cast<size_t>(var_index(from))].kind == VarKind::Latent;
        if (!latent_end)
            throw Error::spec("covariate binding requires a latent endpoint: " + to + "<-" + from);
    }
    add_var(to);
    add_var(from);
    for (auto& e : reg_)
        if (e.to == to && e.from == from) {
            e.bind = bind; // later declarations overwrite the binding only
            return;
        }
    reg_.push_back({from, to, bind});
}

void ModelSpec::add_covariance(const std::string& a, const std::string& b,
                               ParameterBinding bind) {
    add_var(a);
    add_var(b);
    if (a == b) {
        variances_[static_cast<size_t>(var_index(a))] = bind;
        var_declared_[static_cast<size_t>(var_index(a))] = true;
        return;
    }
    for (auto& e : cov_)
        if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) {
            e.bind = bind;
            return;
        }
    cov_.push_back({a, b, bind});
}

void ModelSpec::set_intercept(const std::string& var, ParameterBinding bind) {
    Index i = add_var(var);
    intercepts_[static_cast<size_t>(i)] = bind;
}

void ModelSpec::set_variance(const std::string& var, ParameterBinding bind) {
    Index i = add_var(var);
    variances_[static_cast<size_t>(i)] = bind;
    var_declared_[static_cast<size_t>(i)] = true;
}

void ModelSpec::constrain(NonlinearConstraint c) {
    if (c.target.empty()) throw Error::spec("constraint target must be named");
    unconstrain(c.target);
    for (const auto& a : c.args)
        if (a == c.target) throw Error::spec("constraint target cannot be its own argument");
    constraints_.push_back(std::move(c));
}

void ModelSpec::unconstrain(const std::string& target) {
    constraints_.erase(std::remove_if(constraints_.begin(), constraints_.end(),
                                      [&](const NonlinearConstraint& c) {
                                          return c.target == target;
                                      }),
                       constraints_.end());
}

void ModelSpec::add_parameter(const std::string& label) {
    if (!contains(extra_params_, label)) extra_params_.push_back(label);
}

void ModelSpec::cancel(const std::vector<std::string>& names) {
    auto in = [&](const std::string& s) { return contains(names, s); };
    reg_.erase(std::remove_if(reg_.begin(), reg_.end(),
                              [&](const RegEdge& e) { return in(e.to) && in(e.from); }),
               reg_.end());
    cov_.erase(std::remove_if(cov_.begin(), cov_.end(),
                              [&](const CovEdge& e) { return in(e.a) && in(e.b); }),
               cov_.end());
}

std::vector<std::string> ModelSpec::kill(const std::vector<std::string>& names) {
    std::vector<std::string> missing;
    for (const auto& name : names) {
        if (!has_var(name)) {
            missing.push_back(name);
            continue;
        }
        size_t i = static_cast<size_t>(var_index(name));
        vars_.erase(vars_.begin() + static_cast<std::ptrdiff_t>(i));
        intercepts_.erase(intercepts_.begin() + static_cast<std::ptrdiff_t>(i));
        variances_.erase(variances_.begin() + static_cast<std::ptrdiff_t>(i));
        var_declared_.erase(var_declared_.begin() + static_cast<std::ptrdiff_t>(i));
        auto touches = [&](const std::string& s) { return s == name; };
        reg_.erase(std::remove_if(reg_.begin(), reg_.end(),
                                  [&](const RegEdge& e) {
                                      return touches(e.to) || touches(e.from);
                                  }),
                   reg_.end());
        cov_.erase(std::remove_if(cov_.begin(), cov_.end(),
                                  [&](const CovEdge& e) { return touches(e.a) || touches(e.b); }),
                   cov_.end());
        functionals_.erase(std::remove_if(functionals_.begin(), functionals_.end(),
                                          [&](const FunctionalTransform& f) {
                                              return touches(f.to) || touches(f.from);
                                          }),
                           functionals_.end());
        dists_.erase(std::remove_if(dists_.begin(), dists_.end(),
                                    [&](const VarDistribution& d) { return d.var == name; }),
                     dists_.end());
        copies_.erase(std::remove_if(copies_.begin(), copies_.end(),
                                     [&](const CopyVar& c) {
                                         return c.source == name || c.alias == name;
                                     }),
                      copies_.end());
        for (auto& g : heavytails_)
            g.vars.erase(std::remove(g.vars.begin(), g.vars.end(), name), g.vars.end());
        heavytails_.erase(std::remove_if(heavytails_.begin(), heavytails_.end(),
                                         [](const HeavyTailGroup& g) { return g.vars.empty(); }),
                          heavytails_.end());
    }
    return missing;
}

ModelSpec ModelSpec::subset(const std::vector<std::string>& keep) const {
    for (const auto& name : keep)
        if (!has_var(name)) throw Error::spec("subset of unknown variable: " + name);
    ModelSpec out;
    for (const auto& v : vars_)
        if (contains(keep, v.name)) {
            Index i = out.add_var(v.name, v.kind);
            out.intercepts_[static_cast<size_t>(i)] =
                intercepts_[static_cast<size_t>(var_index(v.name))];
            out.variances_[static_cast<size_t>(i)] =
                variances_[static_cast<size_t>(var_index(v.name))];
            out.var_declared_[static_cast<size_t>(i)] =
                var_declared_[static_cast<size_t>(var_index(v.name))];
        }
    for (const auto& e : reg_)
        if (contains(keep, e.to) && contains(keep, e.from)) out.reg_.push_back(e);
    for (const auto& e : cov_)
        if (contains(keep, e.a) && contains(keep, e.b)) out.cov_.push_back(e);
    // constraints survive when all parameter arguments still have a home
    auto label_lives = [&](const std::string& lab) {
        for (const auto& e : out.reg_)
            if (e.bind.kind == ParameterBinding::Kind::Labeled && e.bind.name == lab) return true;
        for (const auto& e : out.cov_)
            if (e.bind.kind == ParameterBinding::Kind::Labeled && e.bind.name == lab) return true;
        for (const auto& b : out.intercepts_)
            if (b.kind == ParameterBinding::Kind::Labeled && b.name == lab) return true;
        for (const auto& b : out.variances_)
            if (b.kind == ParameterBinding::Kind::Labeled && b.name == lab) return true;
        return contains(out.extra_params_, lab);
    };
    out.extra_params_ = extra_params_;
    for (const auto& c : constraints_)
        if (label_lives(c.target)) out.constraints_.push_back(c);
    for (const auto& d : dists_)
        if (contains(keep, d.var)) out.dists_.push_back(d);
    for (const auto& f : functionals_)
        if (contains(keep, f.to) && contains(keep, f.from)) out.functionals_.push_back(f);
    for (const auto& g : heavytails_) {
        HeavyTailGroup ng;
        ng.df = g.df;
        for (const auto& v : g.vars)
            if (contains(keep, v)) ng.vars.push_back(v);
        if (!ng.vars.empty()) out.heavytails_.push_back(ng);
    }
    for (const auto& c : copies_)
        if (contains(keep, c.source) && contains(keep, c.alias)) out.copies_.push_back(c);
    return out;
}

ModelSpec ModelSpec::merged(const ModelSpec& other) const {
    ModelSpec out = *this;
    for (const auto& v : other.vars_) {
        Index i = out.add_var(v.name, v.kind);
        if (v.kind == VarKind::Latent) out.vars_[static_cast<size_t>(i)].kind = VarKind::Latent;
    }
    auto merge_bind = [](const std::string& slot, ParameterBinding& mine,
                         const ParameterBinding& theirs) {
        if (mine.is_fixed() && theirs.is_fixed() && mine.value != theirs.value)
            throw Error::spec("merge conflict: slot " + slot + " fixed to both " +
                              std::to_string(mine.value) + " and " + std::to_string(theirs.value));
        if (mine.kind == ParameterBinding::Kind::Free) mine = theirs;
    };
    for (const auto& e : other.reg_) {
        const RegEdge* mine = out.find_reg(e.to, e.from);
        if (!mine) {
            out.reg_.push_back(e);
        } else {
            for (auto& me : out.reg_)
                if (me.to == e.to && me.from == e.from) merge_bind(e.to + "<-" + e.from, me.bind, e.bind);
        }
    }
    for (const auto& e : other.cov_) {
        const CovEdge* mine = out.find_cov(e.a, e.b);
        if (!mine) {
            out.cov_.push_back(e);
        } else {
            for (auto& me : out.cov_)
                if ((me.a == e.a && me.b == e.b) || (me.a == e.b && me.b == e.a))
                    merge_bind(e.a + "<->" + e.b, me.bind, e.bind);
        }
    }
    for (Index i = 0; i < static_cast<Index>(other.vars_.size()); ++i) {
        const std::string& name = other.vars_[static_cast<size_t>(i)].name;
        Index j = out.var_index(name);
        merge_bind(name, out.intercepts_[static_cast<size_t>(j)],
                   other.intercepts_[static_cast<size_t>(i)]);
        merge_bind(name + "<->" + name, out.variances_[static_cast<size_t>(j)],
                   other.variances_[static_cast<size_t>(i)]);
        if (other.var_declared_[static_cast<size_t>(i)])
            out.var_declared_[static_cast<size_t>(j)] = true;
    }
    for (const auto& c : other.constraints_) {
        bool seen = false;
        for (const auto& mine : out.constraints_) seen = seen || mine.target == c.target;
        if (!seen) out.constraints_.push_back(c);
    }
    for (const auto& p : other.extra_params_) out.add_parameter(p);
    for (const auto& d : other.dists_)
        if (!out.distribution(d.var)) out.dists_.push_back(d);
    for (const auto& f : other.functionals_)
        if (!out.functional(f.to, f.from)) out.functionals_.push_back(f);
    for (const auto& g : other.heavytails_) out.heavytails_.push_back(g);
    for (const auto& c : other.copies_) out.copies_.push_back(c);
    return out;
}

// -- simulation hooks --

void ModelSpec::set_distribution(const std::string& var, DistributionSpec dist) {
    add_var(var);
    for (auto& d : dists_)
        if (d.var == var) {
            d.dist = std::move(dist);
            return;
        }
    dists_.push_back({var, std::move(dist)});
}

const DistributionSpec* ModelSpec::distribution(const std::string& var) const {
    for (const auto& d : dists_)
        if (d.var == var) return &d.dist;
    return nullptr;
}

void ModelSpec::set_functional(const std::string& to, const std::string& from,
                               std::string fn_name, ScalarFn fn) {
    if (!find_reg(to, from)) add_regression(to, from); // constraint-style auto-add
    for (auto& f : functionals_)
        if (f.to == to && f.from == from) {
            f.fn_name = std::move(fn_name);
            f.fn = std::move(fn);
            return;
        }
    functionals_.push_back({to, from, std::move(fn_name), std::move(fn)});
}

void ModelSpec::clear_functional(const std::string& to, const std::string& from) {
    functionals_.erase(std::remove_if(functionals_.begin(), functionals_.end(),
                                      [&](const FunctionalTransform& f) {
                                          return f.to == to && f.from == from;
                                      }),
                       functionals_.end());
}

const FunctionalTransform* ModelSpec::functional(const std::string& to,
                                                 const std::string& from) const {
    for (const auto& f : functionals_)
        if (f.to == to && f.from == from) return &f;
    return nullptr;
}

void ModelSpec::add_heavytail(const std::vector<std::string>& names, double df, bool shared) {
    if (df <= 0) throw Error::spec("heavytail: df must be > 0");
    for (const auto& name : names) {
        if (!has_var(name)) throw Error::spec("heavytail: unknown variable " + name);
        for (const auto& g : heavytails_)
            if (contains(g.vars, name))
                throw Error::spec("heavytail: " + name + " already in a heavy-tail group");
    }
    if (shared) {
        heavytails_.push_back({names, df});
    } else {
        for (const auto& name : names) heavytails_.push_back({{name}, df});
    }
}

void ModelSpec::add_copy(const std::string& source, const std::string& alias) {
    if (!has_var(source)) throw Error::spec("copy: unknown source variable " + source);
    add_var(alias);
    copies_.push_back({source, alias});
}

// -- queries --

std::vector<std::string> ModelSpec::var_names() const {
    std::vector<std::string> out;
    for (const auto& v : vars_) out.push_back(v.name);
    return out;
}

std::vector<std::string> ModelSpec::latent_vars() const {
    std::vector<std::string> out;
    for (const auto& v : vars_)
        if (v.kind == VarKind::Latent) out.push_back(v.name);
    return out;
}

std::vector<std::string> ModelSpec::manifest() const {
    std::vector<std::string> out;
    for (const auto& v : vars_)
        if (v.kind == VarKind::Observed) out.push_back(v.name);
    return out;
}

std::vector<std::string> ModelSpec::exogenous() const {
    // observed, no incoming regression edge, untouched by declared covariance
    // structure (a covariance or variance declaration turns a covariate into a
    // modeled response)
    std::vector<std::string> out;
    for (size_t i = 0; i < vars_.size(); ++i) {
        const auto& v = vars_[i];
        if (v.kind != VarKind::Observed) continue;
        bool modeled = false;
        for (const auto& e : reg_) modeled = modeled || e.to == v.name;
        for (const auto& e : cov_) modeled = modeled || e.a == v.name || e.b == v.name;
        if (variances_[i].kind != ParameterBinding::Kind::Free || var_declared_[i])
            modeled = true;
        if (!modeled) out.push_back(v.name);
    }
    return out;
}

std::vector<std::string> ModelSpec::endogenous(bool top) const {
    auto exo = exogenous();
    std::vector<std::string> out;
    for (const auto& v : vars_) {
        if (v.kind != VarKind::Observed || contains(exo, v.name)) continue;
        if (top) {
            bool has_out = false;
            for (const auto& e : reg_) has_out = has_out || e.from == v.name;
            if (has_out) continue;
        }
        out.push_back(v.name);
    }
    return out;
}

std::vector<std::string> ModelSpec::children(const std::vector<std::string>& of) const {
    for (const auto& name : of) var_index(name);
    std::vector<std::string> out;
    for (const auto& v : vars_) {
        for (const auto& e : reg_)
            if (e.to == v.name && contains(of, e.from) && !contains(out, v.name))
                out.push_back(v.name);
    }
    return out;
}

std::vector<std::string> ModelSpec::parents(const std::vector<std::string>& of) const {
    for (const auto& name : of) var_index(name);
    std::vector<std::string> out;
    for (const auto& v : vars_) {
        for (const auto& e : reg_)
            if (e.from == v.name && contains(of, e.to) && !contains(out, v.name))
                out.push_back(v.name);
    }
    return out;
}

std::vector<std::vector<std::string>> ModelSpec::paths(const std::string& from,
                                                       const std::string& to) const {
    var_index(from);
    var_index(to);
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> cur{from};
    std::unordered_set<std::string> onpath{from};
    std::function<void(const std::string&)> dfs = [&](const std::string& node) {
        if (node == to) {
            out.push_back(cur);
            return;
        }
        for (const auto& e : reg_) {
            if (e.from != node || onpath.count(e.to)) continue;
            cur.push_back(e.to);
            onpath.insert(e.to);
            dfs(e.to);
            cur.pop_back();
            onpath.erase(e.to);
        }
    };
    dfs(from);
    return out;
}

const RegEdge* ModelSpec::find_reg(const std::string& to, const std::string& from) const {
    for (const auto& e : reg_)
        if (e.to == to && e.from == from) return &e;
    return nullptr;
}

const CovEdge* ModelSpec::find_cov(const std::string& a, const std::string& b) const {
    for (const auto& e : cov_)
        if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return &e;
    return nullptr;
}

ParameterBinding ModelSpec::intercept(const std::string& var) const {
    return intercepts_[static_cast<size_t>(var_index(var))];
}

ParameterBinding ModelSpec::variance(const std::string& var) const {
    return variances_[static_cast<size_t>(var_index(var))];
}

bool ModelSpec::variance_declared(const std::string& var) const {
    return var_declared_[static_cast<size_t>(var_index(var))];
}

std::vector<Index> ModelSpec::u_order() const {
    std::vector<Index> order;
    for (Index i = 0; i < static_cast<Index>(vars_.size()); ++i)
        if (vars_[static_cast<size_t>(i)].kind == VarKind::Observed) order.push_back(i);
    for (Index i = 0; i < static_cast<Index>(vars_.size()); ++i)
        if (vars_[static_cast<size_t>(i)].kind == VarKind::Latent) order.push_back(i);
    return order;
}

// -- identification --

ModelSpec ModelSpec::identified(IdentParam param) const {
    if (param == IdentParam::None) return *this;
    ModelSpec out = *this;
    for (const auto& lat : latent_vars()) {
        // observed indicators in declaration order
        std::vector<std::string> indicators;
        for (const auto& v : vars_) {
            if (v.kind != VarKind::Observed) continue;
            if (find_reg(v.name, lat)) indicators.push_back(v.name);
        }
        if (param == IdentParam::Relative || param == IdentParam::Hybrid) {
            if (indicators.empty())
                throw Error::spec("identification: latent variable " + lat +
                                  " has no observed indicator");
            bool any_fixed = false;
            for (const auto& ind : indicators)
                any_fixed = any_fixed || find_reg(ind, lat)->bind.is_fixed();
            if (!any_fixed)
                out.add_regression(indicators.front(), lat, ParameterBinding::fixed(1.0));
            if (param == IdentParam::Relative) {
                if (!intercept(indicators.front()).is_fixed())
                    out.set_intercept(indicators.front(), ParameterBinding::fixed(0.0));
            }
        }
        if (param == IdentParam::Hybrid || param == IdentParam::Absolute) {
            if (!intercept(lat).is_fixed()) out.set_intercept(lat, ParameterBinding::fixed(0.0));
        }
        if (param == IdentParam::Absolute) {
            if (!variance(lat).is_fixed()) out.set_variance(lat, ParameterBinding::fixed(1.0));
        }
    }
    return out;
}

// -- canonical parameter enumeration --

std::vector<CanonicalSlot> canonical_slots(const ModelSpec& m) {
    std::vector<CanonicalSlot> out;
    auto uord = m.u_order();
    const auto& vars = m.variables();
    auto exo = m.exogenous();
    auto is_exo = [&](Index i) {
        return std::find(exo.begin(), exo.end(), vars[static_cast<size_t>(i)].name) != exo.end();
    };
    // means over non-exogenous variables in U order
    for (Index i : uord) {
        if (is_exo(i)) continue;
        const std::string& name = vars[static_cast<size_t>(i)].name;
        out.push_back({CanonicalSlot::What::Intercept, i, -1, m.intercept(name), name});
    }
    // regressions: child-major in U order, parents in U order
    for (Index c : uord) {
        const std::string& to = vars[static_cast<size_t>(c)].name;
        for (Index p : uord) {
            const std::string& from = vars[static_cast<size_t>(p)].name;
            const RegEdge* e = m.find_reg(to, from);
            if (e) out.push_back({CanonicalSlot::What::Regression, c, p, e->bind, to + "<-" + from});
        }
    }
    // covariances: diagonals first (non-exogenous, U order), then off-diagonals
    for (Index i : uord) {
        if (is_exo(i)) continue;
        const std::string& name = vars[static_cast<size_t>(i)].name;
        out.push_back({CanonicalSlot::What::Covariance, i, i, m.variance(name), name + "<->" + name});
    }
    for (size_t jj = 0; jj < uord.size(); ++jj) {
        for (size_t ii = 0; ii < jj; ++ii) {
            Index a = uord[ii], b = uord[jj];
            const std::string& na = vars[static_cast<size_t>(a)].name;
            const std::string& nb = vars[static_cast<size_t>(b)].name;
            if (is_exo(a) && is_exo(b)) continue; // exogenous block is profiled
            const CovEdge* e = m.find_cov(na, nb);
            if (e) out.push_back({CanonicalSlot::What::Covariance, a, b, e->bind, na + "<->" + nb});
        }
    }
    for (const auto& p : m.extra_parameters())
        out.push_back({CanonicalSlot::What::Extra, -1, -1, ParameterBinding::labeled(p), p});
    return out;
}

std::vector<std::string> ModelSpec::coef_names(bool labels) const {
    // constrained targets leave θ
    std::unordered_set<std::string> constrained;
    for (const auto& c : constraints_) constrained.insert(c.target);

    std::vector<std::string> names;
    std::unordered_set<std::string> seen_labels;
    for (const auto& s : canonical_slots(*this)) {
        if (s.bind.is_fixed()) continue;
        if (s.bind.kind == ParameterBinding::Kind::Covariate) continue;
        if (s.bind.kind == ParameterBinding::Kind::Labeled) {
            if (constrained.count(s.bind.name)) continue;
            if (seen_labels.count(s.bind.name)) continue;
            seen_labels.insert(s.bind.name);
            names.push_back(labels ? s.bind.name : s.slot_name);
        } else {
            names.push_back(s.slot_name);
        }
    }
    // constraint arguments that are brand-new parameters already appear via
    // extra_parameters; nothing more to add
    return names;
}

bool ModelSpec::structurally_equal(const ModelSpec& o) const {
    if (vars_.size() != o.vars_.size()) return false;
    for (size_t i = 0; i < vars_.size(); ++i)
        if (vars_[i].name != o.vars_[i].name || vars_[i].kind != o.vars_[i].kind) return false;
    if (reg_.size() != o.reg_.size() || cov_.size() != o.cov_.size()) return false;
    for (const auto& e : reg_) {
        const RegEdge* oe = o.find_reg(e.to, e.from);
        if (!oe || !(oe->bind == e.bind)) return false;
    }
    for (const auto& e : cov_) {
        const CovEdge* oe = o.find_cov(e.a, e.b);
        if (!oe || !(oe->bind == e.bind)) return false;
    }
    for (size_t i = 0; i < vars_.size(); ++i) {
        if (!(intercepts_[i] == o.intercepts_[i])) return false;
        if (!(variances_[i] == o.variances_[i])) return false;
        if (var_declared_[i] != o.var_declared_[i]) return false;
    }
    if (constraints_.size() != o.constraints_.size()) return false;
    for (size_t i = 0; i < constraints_.size(); ++i) {
        const auto& a = constraints_[i];
        const auto& b = o.constraints_[i];
        if (a.target != b.target || a.args != b.args || a.fn_name != b.fn_name ||
            a.inv_name != b.inv_name)
            return false;
    }
    if (dists_.size() != o.dists_.size()) return false;
    for (size_t i = 0; i < dists_.size(); ++i)
        if (dists_[i].var != o.dists_[i].var || !(dists_[i].dist == o.dists_[i].dist))
            return false;
    if (functionals_.size() != o.functionals_.size()) return false;
    for (size_t i = 0; i < functionals_.size(); ++i)
        if (functionals_[i].to != o.functionals_[i].to ||
            functionals_[i].from != o.functionals_[i].from ||
            functionals_[i].fn_name != o.functionals_[i].fn_name)
            return false;
    if (heavytails_.size() != o.heavytails_.size()) return false;
    for (size_t i = 0; i < heavytails_.size(); ++i)
        if (heavytails_[i].vars != o.heavytails_[i].vars ||
            heavytails_[i].df != o.heavytails_[i].df)
            return false;
    if (copies_.size() != o.copies_.size()) return false;
    for (size_t i = 0; i < copies_.size(); ++i)
        if (copies_[i].source != o.copies_[i].source || copies_[i].alias != o.copies_[i].alias)
            return false;
    if (extra_params_ != o.extra_params_) return false;
    return true;
}

} // namespace latvar
