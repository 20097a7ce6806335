#include "latvar/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "latvar/rng.hpp"
#include "latvar/stats.hpp"

namespace latvar {

namespace {

struct SimPlan {
    std::map<std::string, double> edge_coef; // "to<-from"
    std::map<std::string, double> icpt;      // var
    std::map<std::string, double> variance;  // var
    std::map<std::pair<std::string, std::string>, double> cov;
    std::map<std::string, double> param_values; // labels / extra parameters
};

double default_for(const CanonicalSlot& cs) {
    switch (cs.what) {
        case CanonicalSlot::What::Intercept: return 0.0;
        case CanonicalSlot::What::Regression: return 1.0;
        case CanonicalSlot::What::Covariance: return cs.a == cs.b ? 1.0 : 0.5;
        case CanonicalSlot::What::Extra: return 0.0;
    }
    return 0.0;
}

} // namespace

Dataset sim(const ModelSpec& model, Index n, const SimOptions& opt) {
    if (n < 0) throw Error::usage("sim: n must be >= 0");
    const auto& vars = model.variables();
    const Index nv = static_cast<Index>(vars.size());
    auto exo = model.exogenous();
    auto is_exo = [&](const std::string& v) {
        return std::find(exo.begin(), exo.end(), v) != exo.end();
    };

    // slot values: defaults, then model bindings, then overrides
    SimPlan plan;
    auto apply_value = [&](const CanonicalSlot& cs, const std::string& aname,
                           const std::string& bname, double value) {
        switch (cs.what) {
            case CanonicalSlot::What::Intercept: plan.icpt[aname] = value; break;
            case CanonicalSlot::What::Regression:
                plan.edge_coef[aname + "<-" + bname] = value;
                break;
            case CanonicalSlot::What::Covariance:
                if (aname == bname)
                    plan.variance[aname] = value;
                else
                    plan.cov[{aname, bname}] = value;
                break;
            case CanonicalSlot::What::Extra: plan.param_values[cs.slot_name] = value; break;
        }
    };
    std::vector<CanonicalSlot> slots = canonical_slots(model);
    // canonical slots skip the exogenous block; standard normal defaults there
    for (const auto& v : exo) {
        Index iv = model.var_index(v);
        slots.push_back({CanonicalSlot::What::Intercept, iv, -1, model.intercept(v), v});
        slots.push_back(
            {CanonicalSlot::What::Covariance, iv, iv, model.variance(v), v + "<->" + v});
    }
    for (const auto& cs : slots) {
        std::string aname = cs.a >= 0 ? vars[static_cast<size_t>(cs.a)].name : cs.slot_name;
        std::string bname = cs.b >= 0 ? vars[static_cast<size_t>(cs.b)].name : "";
        double value = default_for(cs);
        if (is_exo(aname) && cs.what == CanonicalSlot::What::Covariance) value = 1.0;
        if (cs.bind.is_fixed()) value = cs.bind.value;
        auto it = opt.params.find(cs.slot_name);
        if (it == opt.params.end() && cs.bind.kind == ParameterBinding::Kind::Labeled)
            it = opt.params.find(cs.bind.name);
        if (it != opt.params.end()) value = it->second;
        if (cs.bind.kind == ParameterBinding::Kind::Labeled) {
            auto lv = plan.param_values.find(cs.bind.name);
            if (lv != plan.param_values.end())
                value = lv->second;
            else
                plan.param_values[cs.bind.name] = value;
        }
        apply_value(cs, aname, bname, value);
    }
    for (const auto& p : model.extra_parameters())
        if (opt.params.count(p)) plan.param_values[p] = opt.params.at(p);

    // dependency graph for generation order
    std::vector<std::vector<Index>> dep(static_cast<size_t>(nv));
    for (const auto& e : model.reg_edges()) {
        dep[static_cast<size_t>(model.var_index(e.to))].push_back(model.var_index(e.from));
        if (e.bind.kind == ParameterBinding::Kind::Covariate) {
            if (!model.has_var(e.bind.name))
                throw Error::spec("sim: random-slope column " + e.bind.name +
                                  " is not a model variable");
            dep[static_cast<size_t>(model.var_index(e.to))].push_back(
                model.var_index(e.bind.name));
        }
    }
    for (const auto& c : model.copies())
        dep[static_cast<size_t>(model.var_index(c.alias))].push_back(model.var_index(c.source));
    for (const auto& c : model.constraints())
        for (const auto& a : c.args)
            if (model.has_var(a))
                for (const auto& cs : canonical_slots(model))
                    if (cs.what == CanonicalSlot::What::Intercept &&
                        ((cs.bind.kind == ParameterBinding::Kind::Labeled &&
                          cs.bind.name == c.target) ||
                         cs.slot_name == c.target))
                        dep[static_cast<size_t>(cs.a)].push_back(model.var_index(a));

    // gaussian-linear set draws residuals jointly from N(0, P)
    std::vector<bool> gaussian(static_cast<size_t>(nv), true);
    for (Index i = 0; i < nv; ++i) {
        const auto& name = vars[static_cast<size_t>(i)].name;
        const DistributionSpec* d = model.distribution(name);
        if (d && d->family != DistributionSpec::Family::Normal)
            gaussian[static_cast<size_t>(i)] = false;
        for (const auto& c : model.copies())
            if (c.alias == name) gaussian[static_cast<size_t>(i)] = false;
    }
    for (const auto& [pair, v] : plan.cov) {
        if (v == 0.0) continue;
        if (!gaussian[static_cast<size_t>(model.var_index(pair.first))] ||
            !gaussian[static_cast<size_t>(model.var_index(pair.second))])
            throw Error::spec("sim: residual covariance touching non-Gaussian variable " +
                              pair.first + "<->" + pair.second + " is not defined");
    }

    // strongly connected components (iterative Tarjan), Kahn order over them
    std::vector<int> comp(static_cast<size_t>(nv), -1);
    int ncomp = 0;
    {
        std::vector<int> idx(static_cast<size_t>(nv), -1), low(static_cast<size_t>(nv), 0);
        std::vector<bool> onstack(static_cast<size_t>(nv), false);
        std::vector<Index> stack;
        int counter = 0;
        std::function<void(Index)> strongconnect = [&](Index v) {
            idx[static_cast<size_t>(v)] = low[static_cast<size_t>(v)] = counter++;
            stack.push_back(v);
            onstack[static_cast<size_t>(v)] = true;
            for (Index w : dep[static_cast<size_t>(v)]) {
                if (idx[static_cast<size_t>(w)] < 0) {
                    strongconnect(w);
                    low[static_cast<size_t>(v)] =
                        std::min(low[static_cast<size_t>(v)], low[static_cast<size_t>(w)]);
                } else if (onstack[static_cast<size_t>(w)]) {
                    low[static_cast<size_t>(v)] =
                        std::min(low[static_cast<size_t>(v)], idx[static_cast<size_t>(w)]);
                }
            }
            if (low[static_cast<size_t>(v)] == idx[static_cast<size_t>(v)]) {
                while (true) {
                    Index w = stack.back();
                    stack.pop_back();
                    onstack[static_cast<size_t>(w)] = false;
                    comp[static_cast<size_t>(w)] = ncomp;
                    if (w == v) break;
                }
                ++ncomp;
            }
        };
        for (Index v = 0; v < nv; ++v)
            if (idx[static_cast<size_t>(v)] < 0) strongconnect(v);

        std::vector<std::set<int>> cdep(static_cast<size_t>(ncomp));
        for (Index v = 0; v < nv; ++v)
            for (Index w : dep[static_cast<size_t>(v)])
                if (comp[static_cast<size_t>(v)] != comp[static_cast<size_t>(w)])
                    cdep[static_cast<size_t>(comp[static_cast<size_t>(v)])].insert(
                        comp[static_cast<size_t>(w)]);
        std::vector<int> rank(static_cast<size_t>(ncomp), -1);
        std::vector<bool> done(static_cast<size_t>(ncomp), false);
        int placed = 0;
        while (placed < ncomp) {
            bool progress = false;
            for (int c = 0; c < ncomp; ++c) {
                if (done[static_cast<size_t>(c)]) continue;
                bool ready = true;
                for (int d2 : cdep[static_cast<size_t>(c)])
                    ready = ready && done[static_cast<size_t>(d2)];
                if (ready) {
                    rank[static_cast<size_t>(c)] = placed++;
                    done[static_cast<size_t>(c)] = true;
                    progress = true;
                }
            }
            if (!progress) throw Error::spec("sim: unresolvable dependency cycle");
        }
        for (Index v = 0; v < nv; ++v)
            comp[static_cast<size_t>(v)] = rank[static_cast<size_t>(comp[static_cast<size_t>(v)])];
    }
    std::vector<std::vector<Index>> comp_members(static_cast<size_t>(ncomp));
    for (Index v = 0; v < nv; ++v)
        comp_members[static_cast<size_t>(comp[static_cast<size_t>(v)])].push_back(v);
    for (const auto& members : comp_members) {
        if (members.size() <= 1) continue;
        for (Index v : members)
            if (!gaussian[static_cast<size_t>(v)])
                throw Error::spec("sim: feedback cycle through non-Gaussian variable " +
                                  vars[static_cast<size_t>(v)].name);
    }

    std::vector<Index> gauss_vars;
    for (Index v = 0; v < nv; ++v)
        if (gaussian[static_cast<size_t>(v)]) gauss_vars.push_back(v);
    Index ng = static_cast<Index>(gauss_vars.size());
    Mat Pg = Mat::Zero(ng, ng);
    auto gslot = [&](const std::string& name) -> Index {
        for (Index a = 0; a < ng; ++a)
            if (vars[static_cast<size_t>(gauss_vars[static_cast<size_t>(a)])].name == name)
                return a;
        return -1;
    };
    for (Index a = 0; a < ng; ++a) {
        const std::string& name = vars[static_cast<size_t>(gauss_vars[static_cast<size_t>(a)])].name;
        Pg(a, a) = plan.variance.count(name) ? plan.variance.at(name) : 1.0;
    }
    for (const auto& [pair, v] : plan.cov) {
        Index a = gslot(pair.first), b = gslot(pair.second);
        if (a >= 0 && b >= 0) {
            Pg(a, b) = v;
            Pg(b, a) = v;
        }
    }
    Mat Lg;
    if (ng > 0) {
        Eigen::LLT<Mat> llt(Pg);
        if (llt.info() != Eigen::Success)
            throw Error::numerical("sim: residual covariance is not positive definite");
        Lg = llt.matrixL();
    }
    Mat raw(n, ng);
    for (Index a = 0; a < ng; ++a) {
        Rng stream(opt.seed, 1000 + static_cast<std::uint64_t>(gauss_vars[static_cast<size_t>(a)]));
        for (Index i = 0; i < n; ++i) raw(i, a) = stream.normal();
    }
    Mat resid = ng > 0 ? Mat(raw * Lg.transpose()) : Mat(n, 0);
    std::vector<Index> gpos(static_cast<size_t>(nv), -1);
    for (Index a = 0; a < ng; ++a) gpos[static_cast<size_t>(gauss_vars[static_cast<size_t>(a)])] = a;

    Mat values = Mat::Zero(n, nv);
    Mat mus = Mat::Zero(n, nv);
    std::vector<std::pair<std::string, Vec>> extra_cols;

    std::set<std::string> fixed_cols;
    if (opt.xfix) {
        if (opt.xfix->n() != n) throw Error::usage("sim: xfix data must have exactly n rows");
        for (const auto& v : exo)
            if (opt.xfix->has(v)) {
                values.col(model.var_index(v)) = opt.xfix->col(v);
                fixed_cols.insert(v);
            }
    }

    auto constrained_icpt = [&](const std::string& var, Index row, bool& found) -> double {
        found = false;
        const ParameterBinding icpt = model.intercept(var);
        std::string target_label = icpt.kind == ParameterBinding::Kind::Labeled ? icpt.name : var;
        for (const auto& c : model.constraints()) {
            if (c.target != target_label && c.target != var) continue;
            std::vector<double> args;
            for (const auto& a : c.args) {
                if (model.has_var(a))
                    args.push_back(values(row, model.var_index(a)));
                else if (plan.param_values.count(a))
                    args.push_back(plan.param_values.at(a));
                else
                    args.push_back(0.0);
            }
            found = true;
            return c.fn(args);
        }
        return 0.0;
    };

    for (int c = 0; c < ncomp; ++c) {
        const auto& members = comp_members[static_cast<size_t>(c)];
        if (members.size() == 1) {
            Index v = members.front();
            const std::string& name = vars[static_cast<size_t>(v)].name;
            if (fixed_cols.count(name)) {
                mus.col(v) = values.col(v);
                continue;
            }
            const CopyVar* copy = nullptr;
            for (const auto& cp : model.copies())
                if (cp.alias == name) copy = &cp;
            if (copy) {
                values.col(v) = values.col(model.var_index(copy->source));
                mus.col(v) = values.col(v);
                continue;
            }
            const DistributionSpec* dist = model.distribution(name);
            DistributionSpec normal_default;
            if (!dist) dist = &normal_default;
            double var_v = plan.variance.count(name) ? plan.variance.at(name) : 1.0;
            Rng stream(opt.seed, 2000 + static_cast<std::uint64_t>(v));

            if (dist->family == DistributionSpec::Family::FixedData) {
                if (static_cast<Index>(dist->data.size()) != n)
                    throw Error::data("sim: fixed data for " + name + " has length " +
                                      std::to_string(dist->data.size()) + ", need " +
                                      std::to_string(n));
                for (Index i = 0; i < n; ++i) values(i, v) = dist->data[static_cast<size_t>(i)];
                mus.col(v) = values.col(v);
                continue;
            }

            for (Index i = 0; i < n; ++i) {
                double mu = plan.icpt.count(name) ? plan.icpt.at(name) : 0.0;
                bool has_constraint = false;
                double cval = constrained_icpt(name, i, has_constraint);
                if (has_constraint) mu = cval;
                for (const auto& e : model.reg_edges()) {
                    if (e.to != name) continue;
                    double coef = e.bind.kind == ParameterBinding::Kind::Covariate
                                      ? values(i, model.var_index(e.bind.name))
                                      : plan.edge_coef.at(e.to + "<-" + e.from);
                    double pv = values(i, model.var_index(e.from));
                    const FunctionalTransform* f = model.functional(e.to, e.from);
                    if (f) pv = f->fn(pv);
                    mu += coef * pv;
                }
                mus(i, v) = mu;
                switch (dist->family) {
                    case DistributionSpec::Family::Normal:
                        values(i, v) = mu + resid(i, gpos[static_cast<size_t>(v)]);
                        break;
                    case DistributionSpec::Family::Binomial: {
                        double p;
                        if (dist->fixed_param) {
                            p = *dist->fixed_param;
                        } else {
                            switch (dist->link) {
                                case Link::Probit: p = normal_cdf(mu); break;
                                case Link::Cloglog: p = 1.0 - std::exp(-std::exp(mu)); break;
                                default: p = 1.0 / (1.0 + std::exp(-mu));
                            }
                        }
                        values(i, v) = stream.bernoulli(p);
                        break;
                    }
                    case DistributionSpec::Family::Poisson: {
                        double lambda = dist->fixed_param ? *dist->fixed_param : std::exp(mu);
                        values(i, v) = static_cast<double>(stream.poisson(lambda));
                        break;
                    }
                    case DistributionSpec::Family::Uniform: {
                        double u = stream.uniform();
                        values(i, v) = mu + std::sqrt(12.0 * var_v) * (u - 0.5);
                        break;
                    }
                    case DistributionSpec::Family::Weibull: {
                        double u = stream.uniform();
                        values(i, v) = dist->scale *
                                       std::pow(-std::log(u) * std::exp(-mu), 1.0 / dist->shape);
                        break;
                    }
                    case DistributionSpec::Family::FixedData: break;
                }
            }
            if (dist->family == DistributionSpec::Family::Weibull && std::isfinite(dist->cens)) {
                Vec event(n);
                for (Index i = 0; i < n; ++i) {
                    event[i] = values(i, v) <= dist->cens ? 1.0 : 0.0;
                    values(i, v) = std::min(values(i, v), dist->cens);
                }
                extra_cols.push_back({name + "_event", event});
            }
        } else {
            // gaussian feedback block, solved jointly through the reduced form
            Index nb = static_cast<Index>(members.size());
            Mat Ab = Mat::Zero(nb, nb);
            std::map<Index, Index> bpos;
            for (Index a = 0; a < nb; ++a) bpos[members[static_cast<size_t>(a)]] = a;
            for (const auto& e : model.reg_edges()) {
                Index to = model.var_index(e.to), from = model.var_index(e.from);
                if (bpos.count(to) && bpos.count(from)) {
                    if (model.functional(e.to, e.from))
                        throw Error::spec("sim: functional transform inside a feedback block");
                    if (e.bind.kind == ParameterBinding::Kind::Covariate)
                        throw Error::spec("sim: random slope inside a feedback block");
                    Ab(bpos[to], bpos[from]) = plan.edge_coef.at(e.to + "<-" + e.from);
                }
            }
            Mat IB = (Mat::Identity(nb, nb) - Ab).inverse();
            for (Index i = 0; i < n; ++i) {
                Vec mu_b(nb), eps_b(nb);
                for (Index a = 0; a < nb; ++a) {
                    Index v = members[static_cast<size_t>(a)];
                    const std::string& name = vars[static_cast<size_t>(v)].name;
                    double mu = plan.icpt.count(name) ? plan.icpt.at(name) : 0.0;
                    for (const auto& e : model.reg_edges()) {
                        if (e.to != name) continue;
                        Index from = model.var_index(e.from);
                        if (bpos.count(from)) continue;
                        double coef = plan.edge_coef.at(e.to + "<-" + e.from);
                        double pv = values(i, from);
                        const FunctionalTransform* f = model.functional(e.to, e.from);
                        if (f) pv = f->fn(pv);
                        mu += coef * pv;
                    }
                    mu_b[a] = mu;
                    eps_b[a] = resid(i, gpos[static_cast<size_t>(v)]);
                }
                Vec sol = IB * (mu_b + eps_b);
                Vec mu_sol = IB * mu_b;
                for (Index a = 0; a < nb; ++a) {
                    values(i, members[static_cast<size_t>(a)]) = sol[a];
                    mus(i, members[static_cast<size_t>(a)]) = mu_sol[a];
                }
            }
        }
    }

    // heavy tails: one chi-square draw per group per row, scaled around the
    // conditional mean
    for (size_t gidx = 0; gidx < model.heavytails().size(); ++gidx) {
        const auto& grp = model.heavytails()[gidx];
        Rng stream(opt.seed, 3000 + static_cast<std::uint64_t>(gidx));
        for (Index i = 0; i < n; ++i) {
            double q = stream.chisq(grp.df);
            double scale = std::sqrt(grp.df / q);
            for (const auto& vn : grp.vars) {
                Index v = model.var_index(vn);
                values(i, v) = mus(i, v) + (values(i, v) - mus(i, v)) * scale;
            }
        }
    }

    std::vector<std::string> names;
    for (const auto& v : vars) names.push_back(v.name);
    Dataset out(names, values);
    for (auto& [nm, col] : extra_cols) out.add_col(nm, col);
    return out;
}

Dataset sim_from_fit(const FitResult& fit, Index n, const std::map<std::string, double>& params,
                     bool xfix, std::uint64_t seed) {
    const auto& g = fit.group();
    const auto& t = g.ctx->table();
    Index n0 = g.ctx->n_rows();
    if (n < 0) n = n0;
    SimOptions opt;
    opt.seed = seed;
    for (int j = 0; j < t.theta_dim; ++j) {
        double value = fit.theta[g.map[static_cast<size_t>(j)]];
        opt.params[t.theta_labels[static_cast<size_t>(j)]] = value;
        opt.params[t.theta_names[static_cast<size_t>(j)]] = value;
    }
    for (const auto& [k, v] : params) opt.params[k] = v;

    Dataset exo_src;
    Index ne = static_cast<Index>(t.exo_names.size());
    if (xfix) {
        if (n != n0)
            throw Error::usage("sim_from_fit: xfix=true requires n equal to the original rows");
        if (ne > 0) {
            std::vector<std::string> names(t.exo_names.begin(), t.exo_names.end());
            Mat X(n0, ne);
            for (Index j = 0; j < ne; ++j)
                X.col(j) = g.ctx->Z().col(t.exo_pos[static_cast<size_t>(j)]);
            exo_src = Dataset(names, X);
            opt.xfix = &exo_src;
        }
        return sim(g.model, n, opt);
    }
    if (ne > 0) {
        Rng stream(seed, 999);
        Eigen::LLT<Mat> llt(g.ctx->exo().cov);
        Mat L = llt.matrixL();
        Mat X(n, ne);
        for (Index i = 0; i < n; ++i)
            X.row(i) = (g.ctx->exo().mean + L * stream.normal_vec(ne)).transpose();
        std::vector<std::string> names(t.exo_names.begin(), t.exo_names.end());
        exo_src = Dataset(names, X);
        opt.xfix = &exo_src;
    }
    return sim(g.model, n, opt);
}

} // namespace latvar
