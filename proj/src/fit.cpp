#include "latvar/fit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "latvar/iv.hpp"

namespace latvar {

int FitResult::index_of(const std::string& s) const {
    for (size_t j = 0; j < labels.size(); ++j)
        if (labels[j] == s || names[j] == s) return static_cast<int>(j);
    throw Error::usage("unknown parameter: " + s);
}

bool FitResult::variance_like(int j) const {
    for (const auto& g : groups) {
        const auto& t = g.ctx->table();
        for (int gj = 0; gj < t.theta_dim; ++gj)
            if (g.map[static_cast<size_t>(gj)] == j && t.variance_like[static_cast<size_t>(gj)])
                return true;
    }
    return false;
}

double FitResult::global_loglik(const Vec& th) const {
    double ll = 0;
    for (const auto& g : groups) {
        Vec tg(g.map.size());
        for (size_t j = 0; j < g.map.size(); ++j) tg[static_cast<Index>(j)] = th[g.map[j]];
        ll += g.ctx->loglik(tg);
    }
    return ll;
}

Vec FitResult::global_score(const Vec& th) const {
    Vec S = Vec::Zero(th.size());
    for (const auto& g : groups) {
        Vec tg(g.map.size());
        for (size_t j = 0; j < g.map.size(); ++j) tg[static_cast<Index>(j)] = th[g.map[j]];
        Vec sg = g.ctx->score(tg);
        for (size_t j = 0; j < g.map.size(); ++j) S[g.map[j]] += sg[static_cast<Index>(j)];
    }
    return S;
}

Mat FitResult::global_information(const Vec& th, InfoType type) const {
    Mat I = Mat::Zero(th.size(), th.size());
    for (const auto& g : groups) {
        Vec tg(g.map.size());
        for (size_t j = 0; j < g.map.size(); ++j) tg[static_cast<Index>(j)] = th[g.map[j]];
        Mat Ig = g.ctx->information(tg, type);
        for (size_t a = 0; a < g.map.size(); ++a)
            for (size_t b = 0; b < g.map.size(); ++b)
                I(g.map[a], g.map[b]) += Ig(static_cast<Index>(a), static_cast<Index>(b));
    }
    return I;
}

Mat FitResult::global_score_rows(const Vec& th) const {
    Index total = 0;
    for (const auto& g : groups) total += g.ctx->n_rows();
    Mat out = Mat::Zero(total, th.size());
    Index at = 0;
    for (const auto& g : groups) {
        Vec tg(g.map.size());
        for (size_t j = 0; j < g.map.size(); ++j) tg[static_cast<Index>(j)] = th[g.map[j]];
        Mat rows = g.ctx->score_rows(tg);
        for (Index i = 0; i < rows.rows(); ++i)
            for (size_t j = 0; j < g.map.size(); ++j)
                out(at + i, g.map[j]) = rows(i, static_cast<Index>(j));
        at += rows.rows();
    }
    return out;
}

Vec starter_values(const LikelihoodContext& ctx) {
    const auto& t = ctx.table();
    const Mat& Z = ctx.Z();
    Index n = Z.rows();

    // per observed variable: mean/variance ignoring missing cells
    Vec mean = Vec::Zero(t.k), var = Vec::Ones(t.k);
    for (Index j = 0; j < t.k; ++j) {
        double s = 0, s2 = 0;
        Index cnt = 0;
        for (Index i = 0; i < n; ++i) {
            double z = Z(i, j);
            if (std::isnan(z)) continue;
            s += z;
            s2 += z * z;
            ++cnt;
        }
        if (cnt > 0) {
            mean[j] = s / cnt;
            var[j] = std::max(1e-3, s2 / cnt - mean[j] * mean[j]);
        }
    }
    auto latent_proxy_var = [&](Index upos) {
        double acc = 0;
        int cnt = 0;
        for (const auto& s : t.slots)
            if (s.mat == Slot::M::A && s.col == upos && s.row < t.k) {
                acc += var[s.row];
                ++cnt;
            }
        return cnt ? acc / cnt : 1.0;
    };

    Vec theta = Vec::Zero(t.theta_dim);
    std::vector<bool> set(static_cast<size_t>(t.theta_dim), false);
    for (const auto& s : t.slots) {
        if (s.kind != Slot::Kind::Theta || set[static_cast<size_t>(s.index)]) continue;
        set[static_cast<size_t>(s.index)] = true;
        double val = 0;
        switch (s.mat) {
            case Slot::M::V: val = s.row < t.k ? mean[s.row] : 0.0; break;
            case Slot::M::A: val = 1.0; break;
            case Slot::M::P:
                if (s.row != s.col)
                    val = 0.0;
                else if (s.row < t.k)
                    val = 0.5 * var[s.row];
                else
                    val = 0.5 * latent_proxy_var(s.row);
                break;
        }
        theta[s.index] = val;
    }
    // constraint-only parameters stay at 0
    return theta;
}

namespace {

struct GlobalLayout {
    int dim = 0;
    std::vector<std::string> names, labels;
    std::vector<std::vector<int>> maps; // per group
};

GlobalLayout build_global(const std::vector<const ParameterTable*>& tables) {
    GlobalLayout g;
    std::map<std::string, int> shared;
    for (size_t gi = 0; gi < tables.size(); ++gi) {
        const auto& t = *tables[gi];
        std::vector<int> map(static_cast<size_t>(t.theta_dim));
        for (int j = 0; j < t.theta_dim; ++j) {
            if (t.theta_is_label[static_cast<size_t>(j)]) {
                const std::string& lab = t.theta_labels[static_cast<size_t>(j)];
                auto it = shared.find(lab);
                if (it != shared.end()) {
                    map[static_cast<size_t>(j)] = it->second;
                    continue;
                }
                shared[lab] = g.dim;
            }
            map[static_cast<size_t>(j)] = g.dim++;
            if (tables.size() > 1) {
                g.names.push_back(t.theta_names[static_cast<size_t>(j)]);
                g.labels.push_back(t.theta_labels[static_cast<size_t>(j)]);
            } else {
                g.names.push_back(t.theta_names[static_cast<size_t>(j)]);
                g.labels.push_back(t.theta_labels[static_cast<size_t>(j)]);
            }
        }
        g.maps.push_back(std::move(map));
    }
    return g;
}

} // namespace

FitResult fit_multigroup(const std::vector<ModelSpec>& models, const std::vector<Dataset>& datasets,
                         FitOptions options) {
    if (models.size() != datasets.size() || models.empty())
        throw Error::usage("fit_multigroup: need matching, non-empty model/data lists");
    if (options.estimator != Estimator::Gaussian && models.size() > 1)
        throw Error::usage("multigroup estimation supports the gaussian estimator only");
    if (options.estimator == Estimator::IV)
        return iv_estimate(models.front(), datasets.front(), options);

    FitResult fr;
    fr.options = options;
    std::vector<const ParameterTable*> tables;
    for (size_t g = 0; g < models.size(); ++g) {
        FitGroup grp;
        grp.model = models[g].identified(options.param);
        grp.data = std::make_shared<Dataset>(datasets[g]);
        auto table = compile(grp.model, datasets[g].names());
        grp.ctx = std::make_shared<LikelihoodContext>(std::move(table), *grp.data, options.missing);
        fr.groups.push_back(std::move(grp));
    }
    for (const auto& g : fr.groups) tables.push_back(&g.ctx->table());
    GlobalLayout layout = build_global(tables);
    for (size_t g = 0; g < fr.groups.size(); ++g) fr.groups[g].map = layout.maps[g];
    fr.names = layout.names;
    fr.labels = layout.labels;
    fr.n = 0;
    for (const auto& g : fr.groups) fr.n += static_cast<double>(g.ctx->n_rows());

    // weighted estimating equations (single group)
    if (options.estimator == Estimator::Weighted) {
        const auto& g = fr.groups.front();
        const auto& t = g.ctx->table();
        Index ke = static_cast<Index>(t.endo_pos.size());
        if (static_cast<Index>(options.weight_cols.size()) != ke)
            throw Error::usage("weighted estimator needs one weight column per endogenous "
                               "variable (" + std::to_string(ke) + ")");
        Mat W(g.ctx->n_rows(), ke);
        for (Index j = 0; j < ke; ++j) {
            Vec full = g.data->col(options.weight_cols[static_cast<size_t>(j)]);
            const auto& kept = g.ctx->kept_rows();
            for (size_t i = 0; i < kept.size(); ++i)
                W(static_cast<Index>(i), j) = full[kept[i]];
        }
        auto U = [&](const Vec& th) { return weighted_score(*g.ctx, th, W); };
        Vec theta0 = options.start ? *options.start : starter_values(*g.ctx);
        OptimOptions oo;
        oo.iter_max = options.iter_max;
        oo.tol = std::max(options.tol, 1e-10);
        auto sol = solve_estimating_equations(U, theta0, oo);
        fr.theta = sol.theta;
        fr.converged = sol.converged;
        fr.iterations = sol.iterations;
        fr.score = sol.u;
        fr.estimator = "weighted";
        fr.loglik = g.ctx->loglik(sol.theta);
        // robust sandwich: model-based information is not valid for general weights
        Mat rows = weighted_score_rows(*g.ctx, sol.theta, W);
        Mat J = numeric_score_jacobian(U, sol.theta);
        Mat meat = rows.transpose() * rows;
        Mat Jinv = J.completeOrthogonalDecomposition().pseudoInverse();
        fr.vcov = Jinv * meat * Jinv.transpose();
        fr.vcov = 0.5 * (fr.vcov + fr.vcov.transpose()).eval();
        fr.vcov_type = InfoType::Robust;
        return fr;
    }

    Objective obj;
    obj.value = [&fr](const Vec& th) { return fr.global_loglik(th); };
    obj.grad = [&fr](const Vec& th) { return fr.global_score(th); };
    InfoType curvature_type =
        options.optimizer == OptMethod::NewtonRaphson ? InfoType::Hessian : InfoType::Expected;
    obj.curvature = [&fr, curvature_type](const Vec& th) {
        return fr.global_information(th, curvature_type);
    };

    // starting values with shrink-on-singularity retry
    Vec theta0(layout.dim);
    if (options.start) {
        if (options.start->size() != layout.dim)
            throw Error::usage("start vector has wrong length");
        theta0 = *options.start;
    } else {
        theta0.setZero();
        std::vector<bool> got(static_cast<size_t>(layout.dim), false);
        for (const auto& g : fr.groups) {
            Vec s = starter_values(*g.ctx);
            for (size_t j = 0; j < g.map.size(); ++j) {
                int gj = g.map[j];
                if (!got[static_cast<size_t>(gj)]) {
                    theta0[gj] = s[static_cast<Index>(j)];
                    got[static_cast<size_t>(gj)] = true;
                }
            }
        }
        double shrink = 1.0;
        for (int tries = 0; tries < 4; ++tries) {
            if (std::isfinite(obj.value(theta0))) break;
            shrink *= 0.5; // pull regression starts toward zero
            for (const auto& g : fr.groups) {
                const auto& t = g.ctx->table();
                for (const auto& s : t.slots)
                    if (s.kind == Slot::Kind::Theta && s.mat == Slot::M::A)
                        theta0[g.map[static_cast<size_t>(s.index)]] *= shrink;
            }
        }
        if (!std::isfinite(obj.value(theta0)))
            throw Error::numerical("starting values give a non-finite likelihood");
    }

    // global log-link flags: a coordinate is transformable when every slot it
    // touches in every group is a P-diagonal
    std::vector<bool> loglink(static_cast<size_t>(layout.dim), options.constrain_variances);
    for (const auto& g : fr.groups) {
        const auto& t = g.ctx->table();
        for (int j = 0; j < t.theta_dim; ++j)
            if (!t.variance_like[static_cast<size_t>(j)])
                loglink[static_cast<size_t>(g.map[static_cast<size_t>(j)])] = false;
    }
    for (Index j = 0; j < theta0.size(); ++j)
        if (theta0[j] <= 0) loglink[static_cast<size_t>(j)] = false;

    OptimOptions oo;
    oo.iter_max = options.iter_max;
    oo.tol = options.tol;
    oo.gamma = options.gamma;
    oo.trace = options.trace;

    OptResult sol;
    if (options.optimizer == OptMethod::Quasi) {
        LogLinkMap link{loglink};
        sol = nelder_mead([&](const Vec& phi) { return obj.value(link.to_natural(phi)); },
                          link.to_internal(theta0), oo);
        sol.theta = link.to_natural(sol.theta);
        // polish with scoring steps so the score-based convergence contract holds
        OptimOptions polish = oo;
        polish.iter_max = 50;
        auto pol = newton_raphson(obj, sol.theta, polish);
        if (pol.value >= sol.value) sol = pol;
    } else {
        LogLinkMap link{loglink};
        Objective wrapped = link.wrap(obj);
        sol = newton_raphson(wrapped, link.to_internal(theta0), oo);
        sol.theta = link.to_natural(sol.theta);
    }

    fr.theta = sol.theta;
    fr.loglik = fr.global_loglik(sol.theta);
    fr.score = fr.global_score(sol.theta);
    fr.iterations = sol.iterations;
    fr.converged = sol.converged;
    fr.estimator = "gaussian";

    InfoType vt = options.vcov_type.value_or(options.missing ? InfoType::Hessian
                                                             : InfoType::Expected);
    fr.vcov_type = vt;
    Mat I = fr.global_information(fr.theta, vt);
    Eigen::FullPivLU<Mat> lu(I);
    if (lu.rank() < I.rows()) {
        // singular information: rank-deficiency report, pseudo-inverse variance
        fr.converged = false;
        fr.vcov = I.completeOrthogonalDecomposition().pseudoInverse();
    } else {
        fr.vcov = lu.inverse();
    }
    fr.vcov = 0.5 * (fr.vcov + fr.vcov.transpose()).eval();

    if (!options.cluster.empty()) {
        std::vector<int> cl;
        for (const auto& g : fr.groups) {
            Vec col = g.data->col(options.cluster);
            for (Index r : g.ctx->kept_rows()) cl.push_back(static_cast<int>(col[r]));
        }
        fr.vcov = cluster_sandwich(fr, cl);
        fr.vcov_type = InfoType::Robust;
    }
    return fr;
}

FitResult fit(const ModelSpec& model, const Dataset& data, FitOptions options) {
    if (options.estimator == Estimator::IV) return iv_estimate(model, data, options);
    return fit_multigroup({model}, {data}, options);
}

Mat cluster_sandwich(const FitResult& fit, const std::vector<int>& cluster_of_row) {
    Mat rows = fit.global_score_rows(fit.theta);
    if (static_cast<Index>(cluster_of_row.size()) != rows.rows())
        throw Error::data("cluster assignment length mismatch");
    std::map<int, Vec> sums;
    for (Index i = 0; i < rows.rows(); ++i) {
        auto [it, fresh] = sums.try_emplace(cluster_of_row[static_cast<size_t>(i)],
                                            Vec::Zero(rows.cols()));
        it->second += rows.row(i).transpose();
    }
    double K = static_cast<double>(sums.size());
    if (K < 2) throw Error::data("robust variance needs at least 2 clusters");
    Mat meat = Mat::Zero(rows.cols(), rows.cols());
    for (const auto& [id, s] : sums) meat += s * s.transpose();
    meat *= K / (K - 1.0);
    Mat bread = fit.global_information(fit.theta, InfoType::Hessian);
    Mat bi = bread.completeOrthogonalDecomposition().pseudoInverse();
    Mat out = bi * meat * bi.transpose();
    return 0.5 * (out + out.transpose()).eval();
}

EstEqResult solve_estimating_equations(const std::function<Vec(const Vec&)>& U, Vec theta,
                                       const OptimOptions& opt) {
    EstEqResult res;
    Vec u = U(theta);
    double norm = u.cwiseAbs().maxCoeff();
    for (int it = 0; it < opt.iter_max; ++it) {
        if (norm < std::max(opt.tol, 1e-10)) {
            res.theta = theta;
            res.u = u;
            res.iterations = it;
            res.converged = true;
            return res;
        }
        Mat J;
        try {
            J = numeric_score_jacobian(U, theta);
        } catch (const Error&) {
            res.theta = theta;
            res.u = u;
            res.iterations = it;
            res.converged = norm < 1e-6;
            return res;
        }
        Vec step = J.completeOrthogonalDecomposition().solve(u);
        double gamma = 1.0;
        for (int half = 0; half < 30; ++half) {
            Vec cand = theta - gamma * step;
            Vec ucand;
            bool ok = true;
            try {
                ucand = U(cand);
            } catch (const Error&) {
                ok = false;
            }
            if (ok && ucand.allFinite() && ucand.cwiseAbs().maxCoeff() < norm) {
                theta = cand;
                u = ucand;
                norm = u.cwiseAbs().maxCoeff();
                break;
            }
            gamma *= 0.5;
            if (half == 29) {
                res.theta = theta;
                res.u = u;
                res.iterations = it;
                res.converged = norm < 1e-6;
                return res;
            }
        }
    }
    res.theta = theta;
    res.u = u;
    res.iterations = opt.iter_max;
    res.converged = norm < std::max(opt.tol, 1e-10);
    return res;
}

} // namespace latvar
