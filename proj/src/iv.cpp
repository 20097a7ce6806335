#include "latvar/iv.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace latvar {

namespace {

// variables with a directed path into w, including w itself
std::set<std::string> ancestors_of(const ModelSpec& m, const std::string& w) {
    std::set<std::string> out{w};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& e : m.reg_edges())
            if (out.count(e.to) && !out.count(e.from)) {
                out.insert(e.from);
                grew = true;
            }
    }
    return out;
}

bool binding_structurally_zero(const ParameterBinding& b) {
    return b.is_fixed() && b.value == 0.0;
}

} // namespace

IvPlan build_plan(const ModelSpec& model) {
    for (const auto& e : model.reg_edges())
        if (e.bind.kind == ParameterBinding::Kind::Covariate)
            throw Error::spec("IV estimator does not support random slopes");
    if (!model.constraints().empty())
        throw Error::spec("IV estimator does not support non-linear constraints");
    for (const auto& cs : canonical_slots(model))
        if (cs.bind.kind == ParameterBinding::Kind::Labeled)
            throw Error::spec("IV estimator does not support equality constraints (label " +
                              cs.bind.name + ")");

    IvPlan plan;
    auto latents = model.latent_vars();
    std::map<std::string, std::string> surrogate; // latent -> indicator
    for (const auto& lat : latents) {
        std::string found;
        for (const auto& v : model.variables()) {
            if (v.kind != VarKind::Observed) continue;
            const RegEdge* e = model.find_reg(v.name, lat);
            if (!e) continue;
            bool unit = e->bind.is_fixed() && e->bind.value == 1.0;
            bool zero_icpt = model.intercept(v.name).is_fixed() &&
                             model.intercept(v.name).value == 0.0;
            // the surrogate may have no other predictors
            bool sole = true;
            for (const auto& r : model.reg_edges())
                if (r.to == v.name && r.from != lat) sole = false;
            if (unit && zero_icpt && sole) {
                found = v.name;
                break;
            }
        }
        if (found.empty())
            throw Error::spec("latent variable " + lat +
                              " has no unit-loading, zero-intercept indicator");
        surrogate[lat] = found;
        plan.latents.push_back(lat);
        plan.surrogates.push_back(found);
    }
    auto is_latent = [&](const std::string& v) {
        return std::find(latents.begin(), latents.end(), v) != latents.end();
    };
    auto is_surrogate = [&](const std::string& v) {
        for (const auto& [lat, sur] : surrogate)
            if (sur == v) return true;
        return false;
    };

    // residual-overlap test data: declared covariance edges with a possibly
    // nonzero binding, plus every variance (none here are structurally zero
    // unless fixed to 0)
    auto p_nonzero = [&](const std::string& a, const std::string& b) {
        if (a == b) return !binding_structurally_zero(model.variance(a));
        const CovEdge* e = model.find_cov(a, b);
        return e != nullptr && !binding_structurally_zero(e->bind);
    };

    auto exo = model.exogenous();
    std::vector<std::string> responses;
    // observed endogenous variables that are not surrogates
    for (const auto& v : model.variables()) {
        if (v.kind != VarKind::Observed) continue;
        if (std::find(exo.begin(), exo.end(), v.name) != exo.end()) continue;
        if (is_surrogate(v.name)) continue;
        responses.push_back(v.name);
    }

    auto make_equation = [&](const std::string& resp_display, const std::string& resp_col,
                             const std::vector<const RegEdge*>& edges,
                             const ParameterBinding& icpt, const std::string& icpt_name,
                             const std::set<std::string>& residual_support) {
        IvEquation eq;
        eq.response = resp_display;
        eq.response_col = resp_col;
        if (icpt.is_fixed()) {
            eq.intercept = false;
            if (icpt.value != 0.0) eq.offsets.push_back({"", icpt.value});
        } else {
            eq.intercept = true;
            eq.intercept_name = resp_display;
        }
        for (const RegEdge* e : edges) {
            std::string col = is_latent(e->from) ? surrogate[e->from] : e->from;
            if (e->bind.is_fixed()) {
                if (e->bind.value != 0.0) eq.offsets.push_back({col, e->bind.value});
            } else {
                eq.predictor_cols.push_back(col);
                eq.predictor_names.push_back(e->to + "<-" + e->from);
            }
        }
        // instruments: every observed variable structurally uncorrelated with
        // the composite residual, in declaration order
        for (const auto& v : model.variables()) {
            if (v.kind != VarKind::Observed || v.name == resp_col) continue;
            auto anc = ancestors_of(model, v.name);
            bool clean = true;
            for (const auto& s : anc)
                for (const auto& t : residual_support)
                    if (p_nonzero(s, t)) clean = false;
            if (clean) eq.instruments.push_back(v.name);
        }
        return eq;
    };

    // measurement-type equations: y_j on its parents
    for (const auto& y : responses) {
        std::vector<const RegEdge*> edges;
        for (const auto& e : model.reg_edges())
            if (e.to == y) edges.push_back(&e);
        std::set<std::string> support{y};
        for (const RegEdge* e : edges)
            if (is_latent(e->from)) support.insert(surrogate[e->from]);
        plan.equations.push_back(
            make_equation(y, y, edges, model.intercept(y), y, support));
    }
    // structural equations: surrogate of eta_r on eta_r's parents
    for (const auto& lat : plan.latents) {
        std::vector<const RegEdge*> edges;
        for (const auto& e : model.reg_edges())
            if (e.to == lat) edges.push_back(&e);
        std::set<std::string> support{lat, surrogate[lat]};
        for (const RegEdge* e : edges)
            if (is_latent(e->from)) support.insert(surrogate[e->from]);
        plan.equations.push_back(make_equation(lat, surrogate[lat], edges,
                                               model.intercept(lat), lat, support));
    }
    return plan;
}

FitResult iv_estimate(const ModelSpec& model_in, const Dataset& data, FitOptions options) {
    // use the model as-is when every latent already has a surrogate;
    // otherwise fall back to the relative parameterization
    ModelSpec model = model_in;
    try {
        build_plan(model);
    } catch (const Error&) {
        model = model_in.identified(IdentParam::Relative);
    }
    IvPlan plan = build_plan(model);

    auto table = compile(model, data.names());
    auto ctx = std::make_shared<LikelihoodContext>(table, data, false);
    const Mat& Z = ctx->Z();
    Index n = Z.rows();
    auto colv = [&](const std::string& name) { return Vec(Z.col(table.u_index(name))); };

    // assemble all equations, project on instrument spans
    struct Solved {
        Vec beta;
        Mat xhat;
        Vec resid;
        std::vector<std::string> names;
    };
    std::vector<Solved> solved;
    for (const auto& eq : plan.equations) {
        Index m_pred = static_cast<Index>(eq.predictor_cols.size()) + (eq.intercept ? 1 : 0);
        Index m_inst = static_cast<Index>(eq.instruments.size()) + 1; // constant always spans
        if (m_inst < m_pred)
            throw Error::spec("under-identified equation for " + eq.response + ": " +
                              std::to_string(eq.instruments.size()) + " instruments for " +
                              std::to_string(eq.predictor_cols.size()) + " predictors");
        Vec y = colv(eq.response_col);
        for (const auto& [col, val] : eq.offsets)
            y -= col.empty() ? Vec::Constant(n, val) : Vec(val * colv(col));
        Mat X(n, m_pred);
        Solved s;
        Index c = 0;
        if (eq.intercept) {
            X.col(c++).setOnes();
            s.names.push_back(eq.intercept_name);
        }
        for (size_t j = 0; j < eq.predictor_cols.size(); ++j) {
            X.col(c++) = colv(eq.predictor_cols[j]);
            s.names.push_back(eq.predictor_names[j]);
        }
        Mat I(n, m_inst);
        I.col(0).setOnes();
        for (size_t j = 0; j < eq.instruments.size(); ++j)
            I.col(static_cast<Index>(j) + 1) = colv(eq.instruments[j]);
        Mat IZI = (I.transpose() * I);
        Mat proj = I * IZI.ldlt().solve(I.transpose() * X); // Xhat
        Eigen::ColPivHouseholderQR<Mat> qr(proj);
        if (qr.rank() < m_pred)
            throw Error::spec("under-identified equation for " + eq.response +
                              " (projected design is rank deficient)");
        s.beta = (proj.transpose() * proj).ldlt().solve(proj.transpose() * y);
        s.xhat = proj;
        s.resid = y - X * s.beta;
        solved.push_back(std::move(s));
    }

    // joint covariance of the stacked coefficient vector
    Index total = 0;
    for (const auto& s : solved) total += s.beta.size();
    Vec beta_all(total);
    Mat vcov_all = Mat::Zero(total, total);
    std::vector<std::string> names_all;
    std::vector<Index> offsets;
    Index at = 0;
    for (const auto& s : solved) {
        offsets.push_back(at);
        beta_all.segment(at, s.beta.size()) = s.beta;
        for (const auto& nm : s.names) names_all.push_back(nm);
        at += s.beta.size();
    }
    std::vector<Mat> xx_inv;
    for (const auto& s : solved)
        xx_inv.push_back(Mat(s.xhat.transpose() * s.xhat).ldlt().solve(
            Mat::Identity(s.beta.size(), s.beta.size())));
    for (size_t e = 0; e < solved.size(); ++e) {
        for (size_t f = 0; f < solved.size(); ++f) {
            double sigma_ef = solved[e].resid.dot(solved[f].resid) / static_cast<double>(n);
            Mat block = sigma_ef * xx_inv[e] * (solved[e].xhat.transpose() * solved[f].xhat) *
                        xx_inv[f];
            vcov_all.block(offsets[e], offsets[f], solved[e].beta.size(), solved[f].beta.size()) =
                block;
        }
    }

    // map equation coefficients onto the canonical parameter vector
    FitResult fr;
    fr.options = options;
    fr.estimator = "iv";
    fr.names.assign(table.theta_names.begin(), table.theta_names.end());
    fr.labels.assign(table.theta_labels.begin(), table.theta_labels.end());
    fr.theta = Vec::Zero(table.theta_dim);
    fr.vcov = Mat::Zero(table.theta_dim, table.theta_dim);
    std::vector<int> where(names_all.size(), -1);
    for (size_t i = 0; i < names_all.size(); ++i) {
        int idx = table.theta_index(names_all[i]);
        if (idx < 0) throw Error::spec("IV coefficient " + names_all[i] + " has no model slot");
        where[i] = idx;
        fr.theta[idx] = beta_all[static_cast<Index>(i)];
    }
    for (size_t i = 0; i < names_all.size(); ++i)
        for (size_t j = 0; j < names_all.size(); ++j)
            fr.vcov(where[i], where[j]) = vcov_all(static_cast<Index>(i), static_cast<Index>(j));

    // variance parameters by constrained ML with coefficients held fixed
    bool any_variance_param = false;
    for (int j = 0; j < table.theta_dim; ++j) {
        bool is_coef = std::find(where.begin(), where.end(), j) != where.end();
        if (!is_coef) any_variance_param = true;
    }
    if (any_variance_param) {
        ModelSpec pinned = model;
        for (const auto& cs : canonical_slots(model)) {
            if (cs.bind.is_fixed()) continue;
            int idx = table.theta_index(cs.slot_name);
            if (idx < 0) continue;
            bool is_coef = std::find(where.begin(), where.end(), idx) != where.end();
            if (!is_coef) continue;
            const std::string& a = model.variables()[static_cast<size_t>(cs.a)].name;
            ParameterBinding fixed = ParameterBinding::fixed(fr.theta[idx]);
            if (cs.what == CanonicalSlot::What::Intercept) pinned.set_intercept(a, fixed);
            if (cs.what == CanonicalSlot::What::Regression)
                pinned.add_regression(a, model.variables()[static_cast<size_t>(cs.b)].name, fixed);
        }
        FitOptions vopt = options;
        vopt.estimator = Estimator::Gaussian;
        vopt.param = IdentParam::None;
        vopt.cluster.clear();
        FitResult vfit = fit(pinned, data, vopt);
        for (int j = 0; j < vfit.dim(); ++j) {
            int idx = table.theta_index(vfit.names[static_cast<size_t>(j)]);
            if (idx < 0) continue;
            fr.theta[idx] = vfit.theta[j];
            fr.vcov(idx, idx) = vfit.vcov(j, j);
        }
        fr.loglik = ctx->loglik(fr.theta);
    } else {
        fr.loglik = std::numeric_limits<double>::quiet_NaN();
    }

    fr.converged = true;
    fr.iterations = 0;
    fr.n = static_cast<double>(n);
    fr.vcov_type = InfoType::Robust; // 2SLS covariance, not an information inverse
    fr.score = Vec::Zero(table.theta_dim);
    FitGroup grp;
    grp.model = model;
    grp.ctx = ctx;
    grp.data = std::make_shared<Dataset>(data);
    grp.map.resize(static_cast<size_t>(table.theta_dim));
    for (int j = 0; j < table.theta_dim; ++j) grp.map[static_cast<size_t>(j)] = j;
    fr.groups.push_back(std::move(grp));
    return fr;
}

} // namespace latvar
