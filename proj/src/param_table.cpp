#include "latvar/param_table.hpp"

#include <algorithm>
#include <cmath>

namespace latvar {

Index ParameterTable::u_index(const std::string& name) const {
    for (Index i = 0; i < m; ++i)
        if (u_names[static_cast<size_t>(i)] == name) return i;
    throw Error::spec("unknown variable in table: " + name);
}

int ParameterTable::theta_index(const std::string& s) const {
    for (int j = 0; j < theta_dim; ++j)
        if (theta_labels[static_cast<size_t>(j)] == s || theta_names[static_cast<size_t>(j)] == s)
            return j;
    return -1;
}

int ParameterTable::exo_cov_index(Index i, Index j) const {
    Index ne = static_cast<Index>(exo_names.size());
    if (i > j) std::swap(i, j);
    // column-major upper triangle offset
    Index tri = j * (j + 1) / 2 + i;
    return static_cast<int>(ne + tri);
}

ExoMoments ParameterTable::zero_exo() const {
    ExoMoments e;
    Index ne = static_cast<Index>(exo_names.size());
    e.mean = Vec::Zero(ne);
    e.cov = Mat::Zero(ne, ne);
    return e;
}

namespace {

std::vector<double> constraint_args(const ParameterTable& t, const CompiledConstraint& c,
                                    const Vec& theta, const Vec* cov_values) {
    std::vector<double> a;
    a.reserve(c.args.size());
    for (const auto& arg : c.args) {
        if (arg.theta >= 0) {
            a.push_back(theta[arg.theta]);
        } else {
            if (!cov_values)
                throw Error::data("constraint on " + c.target +
                                  " needs covariate column " +
                                  t.covariate_columns[static_cast<size_t>(arg.column)]);
            a.push_back((*cov_values)[arg.column]);
        }
    }
    return a;
}

std::vector<double> constraint_grad(const CompiledConstraint& c, const std::vector<double>& args) {
    if (c.grad) return c.grad(args);
    // central finite differences
    std::vector<double> g(args.size());
    std::vector<double> a = args;
    for (size_t i = 0; i < args.size(); ++i) {
        double h = 1e-6 * std::max(1.0, std::abs(args[i]));
        a[i] = args[i] + h;
        double fp = c.fn(a);
        a[i] = args[i] - h;
        double fm = c.fn(a);
        a[i] = args[i];
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

} // namespace

Materialized ParameterTable::materialize(const Vec& theta, const Vec* cov_values,
                                         const ExoMoments* exo) const {
    if (theta.size() != theta_dim)
        throw Error::usage("materialize: theta has length " + std::to_string(theta.size()) +
                           ", expected " + std::to_string(theta_dim));
    for (Index j = 0; j < theta.size(); ++j)
        if (std::isnan(theta[j]))
            throw Error::numerical("materialize: NaN in theta at " +
                                   theta_names[static_cast<size_t>(j)]);

    std::vector<double> cvals(constraints.size());
    for (size_t ci = 0; ci < constraints.size(); ++ci)
        cvals[ci] = constraints[ci].fn(constraint_args(*this, constraints[ci], theta, cov_values));

    Materialized out;
    out.A = Mat::Zero(m, m);
    out.P = Mat::Zero(m, m);
    out.v = Vec::Zero(m);
    Index ne = static_cast<Index>(exo_names.size());

    for (const auto& s : slots) {
        double val = 0;
        switch (s.kind) {
            case Slot::Kind::Theta: val = theta[s.index]; break;
            case Slot::Kind::Fixed: val = s.value; break;
            case Slot::Kind::Covariate:
                if (!cov_values)
                    throw Error::data("materialize: slot " + s.name + " needs covariate column " +
                                      covariate_columns[static_cast<size_t>(s.index)]);
                val = (*cov_values)[s.index];
                break;
            case Slot::Kind::Exo: {
                if (!exo) {
                    val = 0.0;
                    break;
                }
                if (s.index < ne) {
                    val = exo->mean[s.index];
                } else {
                    Index tri = s.index - ne;
                    // invert column-major triangle offset
                    Index j = 0;
                    while ((j + 1) * (j + 2) / 2 <= tri) ++j;
                    Index i = tri - j * (j + 1) / 2;
                    val = exo->cov(i, j);
                }
                break;
            }
            case Slot::Kind::Constrained: val = cvals[static_cast<size_t>(s.index)]; break;
        }
        switch (s.mat) {
            case Slot::M::A: out.A(s.row, s.col) = val; break;
            case Slot::M::V: out.v[s.row] = val; break;
            case Slot::M::P:
                out.P(s.row, s.col) = val;
                out.P(s.col, s.row) = val;
                break;
        }
    }
    return out;
}

std::vector<std::vector<WeightedSlot>> ParameterTable::theta_derivs(const Vec& theta,
                                                                    const Vec* cov_values) const {
    std::vector<std::vector<WeightedSlot>> d(static_cast<size_t>(theta_dim));
    for (const auto& s : slots) {
        if (s.kind == Slot::Kind::Theta)
            d[static_cast<size_t>(s.index)].push_back({s.mat, s.row, s.col, 1.0});
    }
    for (size_t ci = 0; ci < constraints.size(); ++ci) {
        const auto& c = constraints[ci];
        auto args = constraint_args(*this, c, theta, cov_values);
        auto g = constraint_grad(c, args);
        for (size_t ai = 0; ai < c.args.size(); ++ai) {
            int tj = c.args[ai].theta;
            if (tj < 0 || g[ai] == 0.0) continue;
            for (const auto& s : slots)
                if (s.kind == Slot::Kind::Constrained && s.index == static_cast<int>(ci))
                    d[static_cast<size_t>(tj)].push_back({s.mat, s.row, s.col, g[ai]});
        }
    }
    return d;
}

ParameterTable compile(const ModelSpec& model, const std::vector<std::string>& extra_columns) {
    ParameterTable t;
    auto uord = model.u_order();
    const auto& vars = model.variables();
    t.m = static_cast<Index>(uord.size());
    std::vector<Index> model_to_u(vars.size(), -1);
    for (Index u = 0; u < t.m; ++u) {
        Index mi = uord[static_cast<size_t>(u)];
        t.u_names.push_back(vars[static_cast<size_t>(mi)].name);
        model_to_u[static_cast<size_t>(mi)] = u;
        if (vars[static_cast<size_t>(mi)].kind == VarKind::Latent)
            t.latent_pos.push_back(u);
    }
    t.k = t.m - static_cast<Index>(t.latent_pos.size());

    auto exo = model.exogenous();
    auto is_exo_name = [&](const std::string& n) {
        return std::find(exo.begin(), exo.end(), n) != exo.end();
    };
    for (Index u = 0; u < t.k; ++u) {
        if (is_exo_name(t.u_names[static_cast<size_t>(u)])) {
            t.exo_pos.push_back(u);
            t.exo_names.push_back(t.u_names[static_cast<size_t>(u)]);
        } else {
            t.endo_pos.push_back(u);
        }
    }

    // exogeneity sanity: a declared covariance between an exogenous and an
    // endogenous variable is impossible by construction of the classification
    for (const auto& e : model.cov_edges())
        if (is_exo_name(e.a) != is_exo_name(e.b) && (is_exo_name(e.a) || is_exo_name(e.b)))
            throw Error::spec("covariance between exogenous and endogenous variable: " + e.a +
                              "<->" + e.b);

    auto covariate_col = [&](const std::string& name) -> int {
        for (size_t i = 0; i < t.covariate_columns.size(); ++i)
            if (t.covariate_columns[i] == name) return static_cast<int>(i);
        t.covariate_columns.push_back(name);
        return static_cast<int>(t.covariate_columns.size()) - 1;
    };

    // canonical θ layout
    std::unordered_map<std::string, int> label_idx;
    auto slots_canon = canonical_slots(model);
    for (const auto& cs : slots_canon) {
        Slot s;
        s.name = cs.slot_name;
        switch (cs.what) {
            case CanonicalSlot::What::Intercept:
                s.mat = Slot::M::V;
                s.row = model_to_u[static_cast<size_t>(cs.a)];
                s.col = 0;
                break;
            case CanonicalSlot::What::Regression:
                s.mat = Slot::M::A;
                s.row = model_to_u[static_cast<size_t>(cs.a)];
                s.col = model_to_u[static_cast<size_t>(cs.b)];
                break;
            case CanonicalSlot::What::Covariance:
                s.mat = Slot::M::P;
                s.row = model_to_u[static_cast<size_t>(cs.a)];
                s.col = model_to_u[static_cast<size_t>(cs.b)];
                break;
            case CanonicalSlot::What::Extra: {
                // θ coordinate without a slot (constraint argument)
                if (!label_idx.count(cs.bind.name)) {
                    label_idx[cs.bind.name] = t.theta_dim++;
                    t.theta_names.push_back(cs.bind.name);
                    t.theta_labels.push_back(cs.bind.name);
                    t.theta_is_label.push_back(true);
                }
                continue;
            }
        }
        switch (cs.bind.kind) {
            case ParameterBinding::Kind::Fixed:
                s.kind = Slot::Kind::Fixed;
                s.value = cs.bind.value;
                break;
            case ParameterBinding::Kind::Covariate:
                s.kind = Slot::Kind::Covariate;
                s.index = covariate_col(cs.bind.name);
                break;
            case ParameterBinding::Kind::Free:
                s.kind = Slot::Kind::Theta;
                s.index = t.theta_dim++;
                t.theta_names.push_back(s.name);
                t.theta_labels.push_back(s.name);
                t.theta_is_label.push_back(false);
                break;
            case ParameterBinding::Kind::Labeled: {
                auto it = label_idx.find(cs.bind.name);
                if (it == label_idx.end()) {
                    label_idx[cs.bind.name] = t.theta_dim;
                    s.kind = Slot::Kind::Theta;
                    s.index = t.theta_dim++;
                    t.theta_names.push_back(s.name);
                    t.theta_labels.push_back(cs.bind.name);
                    t.theta_is_label.push_back(true);
                } else {
                    s.kind = Slot::Kind::Theta;
                    s.index = it->second;
                }
                break;
            }
        }
        t.slots.push_back(s);
    }

    // nonlinear constraints: target leaves θ, slots re-bind to the constraint
    if (!model.constraints().empty()) {
        auto resolve_param = [&](const std::string& name) -> int {
            auto it = label_idx.find(name);
            if (it != label_idx.end()) return it->second;
            for (const auto& s : t.slots)
                if (s.name == name && s.kind == Slot::Kind::Theta) return s.index;
            return -1;
        };
        std::vector<int> drop; // θ indices to remove
        for (const auto& mc : model.constraints()) {
            // fixed-target check
            for (const auto& s : t.slots)
                if (s.name == mc.target && s.kind == Slot::Kind::Fixed)
                    throw Error::spec("constraint target " + mc.target + " is a fixed slot");
            int target_idx = resolve_param(mc.target);
            CompiledConstraint cc;
            cc.target = mc.target;
            cc.fn = mc.fn;
            cc.grad = mc.grad;
            cc.inv = mc.inv;
            cc.fn_name = mc.fn_name;
            cc.inv_name = mc.inv_name;
            for (const auto& a : mc.args) {
                CompiledConstraint::Arg arg;
                bool is_model_observed =
                    model.has_var(a) &&
                    model.variables()[static_cast<size_t>(model.var_index(a))].kind ==
                        VarKind::Observed;
                bool is_extra_col = std::find(extra_columns.begin(), extra_columns.end(), a) !=
                                    extra_columns.end();
                int pidx = resolve_param(a);
                if (pidx >= 0) {
                    arg.theta = pidx;
                } else if (is_model_observed || is_extra_col) {
                    arg.column = covariate_col(a);
                    cc.row_dependent = true;
                } else {
                    // brand-new parameter: auto-register a θ coordinate
                    label_idx[a] = t.theta_dim;
                    arg.theta = t.theta_dim++;
                    t.theta_names.push_back(a);
                    t.theta_labels.push_back(a);
                    t.theta_is_label.push_back(true);
                }
                cc.args.push_back(arg);
            }
            int cidx = static_cast<int>(t.constraints.size());
            bool found_slot = false;
            for (auto& s : t.slots) {
                bool is_target = (s.kind == Slot::Kind::Theta && target_idx >= 0 &&
                                  s.index == target_idx) ||
                                 s.name == mc.target;
                if (is_target && s.mat == Slot::M::P && s.row != s.col) {
                    // covariance slot sharing a label with the target follows it
                }
                if (is_target) {
                    s.kind = Slot::Kind::Constrained;
                    s.index = cidx;
                    found_slot = true;
                }
            }
            if (!found_slot)
                throw Error::spec("constraint target " + mc.target +
                                  " is not bound to any model slot");
            if (target_idx >= 0) drop.push_back(target_idx);
            t.constraints.push_back(std::move(cc));
        }
        if (!drop.empty()) {
            std::sort(drop.begin(), drop.end());
            drop.erase(std::unique(drop.begin(), drop.end()), drop.end());
            std::vector<int> remap(static_cast<size_t>(t.theta_dim), -1);
            int next = 0;
            for (int jj = 0; jj < t.theta_dim; ++jj) {
                if (std::binary_search(drop.begin(), drop.end(), jj)) continue;
                remap[static_cast<size_t>(jj)] = next++;
            }
            std::vector<std::string> nn, nl;
            std::vector<bool> nis;
            for (int jj = 0; jj < t.theta_dim; ++jj)
                if (remap[static_cast<size_t>(jj)] >= 0) {
                    nn.push_back(t.theta_names[static_cast<size_t>(jj)]);
                    nl.push_back(t.theta_labels[static_cast<size_t>(jj)]);
                    nis.push_back(t.theta_is_label[static_cast<size_t>(jj)]);
                }
            t.theta_names = nn;
            t.theta_labels = nl;
            t.theta_is_label = nis;
            t.theta_dim = next;
            for (auto& s : t.slots)
                if (s.kind == Slot::Kind::Theta) {
                    s.index = remap[static_cast<size_t>(s.index)];
                    if (s.index < 0)
                        throw Error::spec("slot " + s.name +
                                          " lost its parameter to a constraint target removal");
                }
            for (auto& c : t.constraints)
                for (auto& a : c.args)
                    if (a.theta >= 0) {
                        a.theta = remap[static_cast<size_t>(a.theta)];
                        if (a.theta < 0)
                            throw Error::spec("constraint " + c.target +
                                              " uses another constrained target as argument");
                    }
        }
    }

    // profiled exogenous moments: means then covariance upper triangle
    Index ne = static_cast<Index>(t.exo_names.size());
    for (Index i = 0; i < ne; ++i) {
        Slot s;
        s.mat = Slot::M::V;
        s.row = t.exo_pos[static_cast<size_t>(i)];
        s.kind = Slot::Kind::Exo;
        s.index = static_cast<int>(i);
        s.name = t.exo_names[static_cast<size_t>(i)];
        t.slots.push_back(s);
    }
    for (Index j = 0; j < ne; ++j)
        for (Index i = 0; i <= j; ++i) {
            Slot s;
            s.mat = Slot::M::P;
            s.row = t.exo_pos[static_cast<size_t>(i)];
            s.col = t.exo_pos[static_cast<size_t>(j)];
            s.kind = Slot::Kind::Exo;
            s.index = t.exo_cov_index(i, j);
            s.name = t.exo_names[static_cast<size_t>(i)] + "<->" + t.exo_names[static_cast<size_t>(j)];
            t.slots.push_back(s);
        }
    t.exo_moment_dim = static_cast<int>(ne + ne * (ne + 1) / 2);

    // flags
    for (const auto& s : t.slots) {
        if (s.kind == Slot::Kind::Covariate && s.mat == Slot::M::A) t.row_dependent_A = true;
        if (s.kind == Slot::Kind::Covariate && s.mat == Slot::M::V) t.row_dependent_v = true;
    }
    for (const auto& c : t.constraints)
        if (c.row_dependent)
            for (const auto& s : t.slots)
                if (s.kind == Slot::Kind::Constrained) {
                    if (s.mat == Slot::M::A || s.mat == Slot::M::P) t.row_dependent_A = true;
                    if (s.mat == Slot::M::V) t.row_dependent_v = true;
                }

    // variance-like θ coordinates: every slot on the diagonal of P
    t.variance_like.assign(static_cast<size_t>(t.theta_dim), false);
    std::vector<int> nslots(static_cast<size_t>(t.theta_dim), 0);
    std::vector<bool> only_diag(static_cast<size_t>(t.theta_dim), true);
    for (const auto& s : t.slots) {
        if (s.kind != Slot::Kind::Theta) continue;
        nslots[static_cast<size_t>(s.index)]++;
        if (!(s.mat == Slot::M::P && s.row == s.col)) only_diag[static_cast<size_t>(s.index)] = false;
    }
    for (const auto& c : t.constraints)
        for (const auto& a : c.args)
            if (a.theta >= 0) only_diag[static_cast<size_t>(a.theta)] = false;
    for (int j = 0; j < t.theta_dim; ++j)
        t.variance_like[static_cast<size_t>(j)] =
            only_diag[static_cast<size_t>(j)] && nslots[static_cast<size_t>(j)] > 0;

    return t;
}

} // namespace latvar
