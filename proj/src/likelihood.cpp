#include "latvar/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "latvar/parallel.hpp"

namespace latvar {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

// exceptions cannot cross an OpenMP region; capture and rethrow after
struct OmpErrors {
    bool failed = false;
    std::string msg;
    void capture(const std::exception& e) {
#pragma omp critical(latvar_omp_errors)
        {
            if (!failed) {
                failed = true;
                msg = e.what();
            }
        }
    }
    void rethrow() const {
        if (failed) throw Error::numerical(msg);
    }
};

struct PatternMoments {
    Mat omega, omega_inv, d_omega; // selected
    Vec xi;
    Mat d_xi;
    double logdet = 0;
};

Mat select_sq(const Mat& M, const std::vector<Index>& idx) {
    Mat out(static_cast<Index>(idx.size()), static_cast<Index>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i)
        for (size_t j = 0; j < idx.size(); ++j)
            out(static_cast<Index>(i), static_cast<Index>(j)) = M(idx[i], idx[j]);
    return out;
}

Vec select_v(const Vec& v, const std::vector<Index>& idx) {
    Vec out(static_cast<Index>(idx.size()));
    for (size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
    return out;
}

PatternMoments select_moments(const MomentBundle& b, const std::vector<Index>& obs, Index k,
                              bool derivs) {
    PatternMoments pm;
    pm.omega = select_sq(b.omega, obs);
    pm.xi = select_v(b.xi, obs);
    Eigen::LLT<Mat> llt(pm.omega);
    if (llt.info() != Eigen::Success) throw Error::numerical("omega not positive definite");
    Mat L = llt.matrixL();
    pm.logdet = 2.0 * L.diagonal().array().log().sum();
    pm.omega_inv = llt.solve(Mat::Identity(pm.omega.rows(), pm.omega.rows()));
    if (derivs) {
        Index kp = static_cast<Index>(obs.size());
        int p = static_cast<int>(b.d_omega.cols());
        pm.d_omega.resize(kp * kp, p);
        pm.d_xi.resize(kp, p);
        for (int j = 0; j < p; ++j) {
            Mat dj = Eigen::Map<const Mat>(b.d_omega.col(j).data(), k, k);
            Mat sel = select_sq(dj, obs);
            pm.d_omega.col(j) = Eigen::Map<Vec>(sel.data(), kp * kp);
            pm.d_xi.col(j) = select_v(b.d_xi.col(j), obs);
        }
    }
    return pm;
}

} // namespace

double gaussian_suff_loglik(const Mat& omega, const Vec& xi, const SufficientStats& st) {
    Index k = omega.rows();
    Eigen::LLT<Mat> llt(omega);
    if (llt.info() != Eigen::Success)
        return -std::numeric_limits<double>::infinity(); // line-search retreat
    Mat L = llt.matrixL();
    double logdet = 2.0 * L.diagonal().array().log().sum();
    Vec d = st.mu - xi;
    Mat T = st.S + d * d.transpose();
    double tr = llt.solve(T).trace();
    return -0.5 * st.n * (k * kLog2Pi + logdet + tr);
}

LikelihoodContext::LikelihoodContext(ParameterTable table, const Dataset& data, bool missing,
                                     const Vec* row_weights)
    : table_(std::move(table)) {
    // column map, with a hard error listing absent manifest variables
    std::vector<Index> colmap(static_cast<size_t>(table_.k));
    std::vector<std::string> absent;
    for (Index j = 0; j < table_.k; ++j) {
        const std::string& name = table_.u_names[static_cast<size_t>(j)];
        if (!data.has(name)) absent.push_back(name);
    }
    if (!absent.empty()) {
        std::ostringstream os;
        os << "data is missing manifest variables:";
        for (const auto& s : absent) os << " " << s;
        throw Error::data(os.str());
    }
    for (Index j = 0; j < table_.k; ++j)
        colmap[static_cast<size_t>(j)] = data.col_index(table_.u_names[static_cast<size_t>(j)]);

    std::vector<Index> covmap;
    for (const auto& c : table_.covariate_columns) covmap.push_back(data.col_index(c));

    std::vector<bool> is_exo_pos(static_cast<size_t>(table_.k), false);
    for (Index pos : table_.exo_pos) is_exo_pos[static_cast<size_t>(pos)] = true;

    // row filtering
    for (Index r = 0; r < data.n(); ++r) {
        bool drop = false;
        bool any_endo = table_.endo_pos.empty(); // no endogenous vars: keep complete rows
        for (Index j = 0; j < table_.k && !drop; ++j) {
            bool miss = data.is_missing(r, colmap[static_cast<size_t>(j)]);
            if (!missing) {
                drop = miss;
            } else if (is_exo_pos[static_cast<size_t>(j)]) {
                drop = miss; // rows with missing covariates are excluded
            } else if (!miss) {
                any_endo = true;
            }
        }
        for (Index c : covmap)
            if (data.is_missing(r, c)) drop = true;
        if (!drop && missing && !any_endo) drop = true; // nothing observed to model
        if (!drop) kept_rows_.push_back(r);
    }
    if (kept_rows_.empty()) throw Error::data("no usable rows after missing-data filtering");

    Index n = static_cast<Index>(kept_rows_.size());
    Z_.resize(n, table_.k);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < table_.k; ++j)
            Z_(i, j) =
                data.values()(kept_rows_[static_cast<size_t>(i)], colmap[static_cast<size_t>(j)]);
    covcols_.resize(n, static_cast<Index>(covmap.size()));
    for (Index i = 0; i < n; ++i)
        for (size_t j = 0; j < covmap.size(); ++j)
            covcols_(i, static_cast<Index>(j)) =
                data.values()(kept_rows_[static_cast<size_t>(i)], covmap[j]);

    if (row_weights) {
        if (row_weights->size() != data.n())
            throw Error::data("row weight vector length does not match data");
        weights_.resize(n);
        for (Index i = 0; i < n; ++i)
            weights_[i] = (*row_weights)[kept_rows_[static_cast<size_t>(i)]];
    }

    // every modeled variable must be observed somewhere
    for (Index j = 0; j < table_.k; ++j) {
        bool seen = false;
        for (Index i = 0; i < n && !seen; ++i) seen = !std::isnan(Z_(i, j));
        if (!seen)
            throw Error::data("variable " + table_.u_names[static_cast<size_t>(j)] +
                              " is missing in all rows");
    }

    // pattern decomposition over the observed coordinates
    std::map<std::vector<bool>, std::vector<Index>> groups;
    for (Index i = 0; i < n; ++i) {
        std::vector<bool> pat(static_cast<size_t>(table_.k), true);
        for (Index j = 0; j < table_.k; ++j) pat[static_cast<size_t>(j)] = !std::isnan(Z_(i, j));
        groups[pat].push_back(i);
    }
    for (const auto& [pat, rows] : groups) {
        PatternGroup g;
        for (Index j = 0; j < table_.k; ++j)
            if (pat[static_cast<size_t>(j)]) g.obs.push_back(j);
        g.rows = rows;
        Mat sub(static_cast<Index>(rows.size()), static_cast<Index>(g.obs.size()));
        for (size_t i = 0; i < rows.size(); ++i)
            for (size_t j = 0; j < g.obs.size(); ++j)
                sub(static_cast<Index>(i), static_cast<Index>(j)) = Z_(rows[i], g.obs[j]);
        if (weights_.size() > 0) {
            Vec w(static_cast<Index>(rows.size()));
            for (size_t i = 0; i < rows.size(); ++i) w[static_cast<Index>(i)] = weights_[rows[i]];
            g.stats = sufficient_stats(sub, &w);
        } else {
            g.stats = sufficient_stats(sub);
        }
        patterns_.push_back(std::move(g));
    }
    n_eff_ = weights_.size() > 0 ? weights_.sum() : static_cast<double>(n);

    // profiled exogenous moments over the kept rows
    Index ne = static_cast<Index>(table_.exo_names.size());
    exo_.mean = Vec::Zero(ne);
    exo_.cov = Mat::Zero(ne, ne);
    if (ne > 0) {
        Mat Xe(n, ne);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < ne; ++j) Xe(i, j) = Z_(i, table_.exo_pos[static_cast<size_t>(j)]);
        auto st = weights_.size() > 0 ? sufficient_stats(Xe, &weights_) : sufficient_stats(Xe);
        exo_.mean = st.mu;
        exo_.cov = st.S;
    }
}

double LikelihoodContext::loglik(const Vec& theta) const {
    if (!row_dependent()) {
        MomentBundle b;
        try {
            b = model_moments(table_, theta, nullptr, &exo_);
        } catch (const Error&) {
            return -std::numeric_limits<double>::infinity();
        }
        double ll = 0;
        for (const auto& g : patterns_) {
            Mat om = select_sq(b.omega, g.obs);
            Vec xi = select_v(b.xi, g.obs);
            ll += gaussian_suff_loglik(om, xi, g.stats);
        }
        return ll;
    }
    return row_loglik(theta).sum();
}

Vec LikelihoodContext::row_loglik(const Vec& theta) const {
    Index n = Z_.rows();
    Vec out(n);
    std::vector<const PatternGroup*> row_pat(static_cast<size_t>(n));
    for (const auto& g : patterns_)
        for (Index r : g.rows) row_pat[static_cast<size_t>(r)] = &g;

    if (!row_dependent()) {
        MomentBundle b = model_moments(table_, theta, nullptr, &exo_);
        std::map<const PatternGroup*, PatternMoments> pms;
        for (const auto& g : patterns_) pms[&g] = select_moments(b, g.obs, table_.k, false);
        OmpErrors err;
#pragma omp parallel for schedule(static) num_threads(parallel::threads())
        for (Index i = 0; i < n; ++i) {
            try {
                const auto& g = *row_pat[static_cast<size_t>(i)];
                const auto& pm = pms.at(&g);
                Vec z = select_v(Z_.row(i).transpose(), g.obs);
                Vec u = z - pm.xi;
                double w = weights_.size() > 0 ? weights_[i] : 1.0;
                out[i] = -0.5 * w *
                         (static_cast<double>(g.obs.size()) * kLog2Pi + pm.logdet +
                          u.dot(pm.omega_inv * u));
            } catch (const std::exception& e) {
                err.capture(e);
            }
        }
        err.rethrow();
        return out;
    }

    OmpErrors err;
#pragma omp parallel for schedule(static) num_threads(parallel::threads())
    for (Index i = 0; i < n; ++i) {
        try {
            Vec cv = covcols_.row(i).transpose();
            MomentBundle b = model_moments(table_, theta, covcols_.cols() ? &cv : nullptr, &exo_);
            const auto& g = *row_pat[static_cast<size_t>(i)];
            Mat om = select_sq(b.omega, g.obs);
            Vec xi = select_v(b.xi, g.obs);
            SufficientStats st;
            st.n = weights_.size() > 0 ? weights_[i] : 1.0;
            Vec z = select_v(Z_.row(i).transpose(), g.obs);
            st.mu = z;
            st.S = Mat::Zero(om.rows(), om.rows());
            out[i] = gaussian_suff_loglik(om, xi, st);
        } catch (const std::exception& e) {
            err.capture(e);
        }
    }
    err.rethrow();
    return out;
}

Vec LikelihoodContext::score(const Vec& theta) const {
    const int p = table_.theta_dim;
    if (!row_dependent()) {
        MomentBundle b = d_moments(table_, theta, nullptr, &exo_);
        Vec S = Vec::Zero(p);
        for (const auto& g : patterns_) {
            auto pm = select_moments(b, g.obs, table_.k, true);
            double W = g.stats.n;
            Vec d = g.stats.mu - pm.xi;
            Mat T = g.stats.S + d * d.transpose();
            Mat inner = pm.omega_inv - pm.omega_inv * T * pm.omega_inv; // k x k
            Vec vin = Eigen::Map<Vec>(inner.data(), inner.size());
            S -= 0.5 * W * (pm.d_omega.transpose() * vin);
            S += W * (pm.d_xi.transpose() * (pm.omega_inv * d));
        }
        return S;
    }
    Mat rows = score_rows(theta);
    return rows.colwise().sum().transpose();
}

Mat LikelihoodContext::score_rows(const Vec& theta) const {
    const int p = table_.theta_dim;
    Index n = Z_.rows();
    Mat out = Mat::Zero(n, p);
    std::vector<const PatternGroup*> row_pat(static_cast<size_t>(n));
    for (const auto& g : patterns_)
        for (Index r : g.rows) row_pat[static_cast<size_t>(r)] = &g;

    if (!row_dependent()) {
        MomentBundle b = d_moments(table_, theta, nullptr, &exo_);
        std::map<const PatternGroup*, PatternMoments> pms;
        for (const auto& g : patterns_) pms[&g] = select_moments(b, g.obs, table_.k, true);
        OmpErrors err;
#pragma omp parallel for schedule(static) num_threads(parallel::threads())
        for (Index i = 0; i < n; ++i) {
            try {
                const auto& g = *row_pat[static_cast<size_t>(i)];
                const auto& pm = pms.at(&g);
                Index kp = static_cast<Index>(g.obs.size());
                Vec z = select_v(Z_.row(i).transpose(), g.obs);
                Vec u = z - pm.xi;
                Vec w = pm.omega_inv * u;
                Mat inner = pm.omega_inv - w * w.transpose();
                Vec vin = Eigen::Map<Vec>(inner.data(), kp * kp);
                double wt = weights_.size() > 0 ? weights_[i] : 1.0;
                out.row(i) = wt * (-0.5 * (pm.d_omega.transpose() * vin) +
                                   pm.d_xi.transpose() * w)
                                      .transpose();
            } catch (const std::exception& e) {
                err.capture(e);
            }
        }
        err.rethrow();
        return out;
    }

    OmpErrors err;
#pragma omp parallel for schedule(static) num_threads(parallel::threads())
    for (Index i = 0; i < n; ++i) {
        try {
            Vec cv = covcols_.row(i).transpose();
            MomentBundle b = d_moments(table_, theta, covcols_.cols() ? &cv : nullptr, &exo_);
            const auto& g = *row_pat[static_cast<size_t>(i)];
            auto pm = select_moments(b, g.obs, table_.k, true);
            Index kp = static_cast<Index>(g.obs.size());
            Vec z = select_v(Z_.row(i).transpose(), g.obs);
            Vec u = z - pm.xi;
            Vec w = pm.omega_inv * u;
            Mat inner = pm.omega_inv - w * w.transpose();
            Vec vin = Eigen::Map<Vec>(inner.data(), kp * kp);
            double wt = weights_.size() > 0 ? weights_[i] : 1.0;
            out.row(i) = wt * (-0.5 * (pm.d_omega.transpose() * vin) +
                               pm.d_xi.transpose() * w)
                                  .transpose();
        } catch (const std::exception& e) {
            err.capture(e);
        }
    }
    err.rethrow();
    return out;
}

Mat LikelihoodContext::information(const Vec& theta, InfoType type) const {
    const int p = table_.theta_dim;
    switch (type) {
        case InfoType::Expected: {
            if (!row_dependent()) {
                MomentBundle b = d_moments(table_, theta, nullptr, &exo_);
                Mat I = Mat::Zero(p, p);
                for (const auto& g : patterns_) {
                    auto pm = select_moments(b, g.obs, table_.k, true);
                    Index kp = static_cast<Index>(g.obs.size());
                    Mat M(kp * kp, p);
                    for (int j = 0; j < p; ++j) {
                        Mat dj = Eigen::Map<const Mat>(pm.d_omega.col(j).data(), kp, kp);
                        Mat w = pm.omega_inv * dj * pm.omega_inv;
                        M.col(j) = Eigen::Map<Vec>(w.data(), kp * kp);
                    }
                    I += 0.5 * g.stats.n * (pm.d_omega.transpose() * M);
                    I += g.stats.n * (pm.d_xi.transpose() * pm.omega_inv * pm.d_xi);
                }
                return 0.5 * (I + I.transpose());
            }
            Index n = Z_.rows();
            Mat I = Mat::Zero(p, p);
            std::vector<const PatternGroup*> row_pat(static_cast<size_t>(n));
            for (const auto& g : patterns_)
                for (Index r : g.rows) row_pat[static_cast<size_t>(r)] = &g;
            for (Index i = 0; i < n; ++i) {
                Vec cv = covcols_.row(i).transpose();
                MomentBundle b = d_moments(table_, theta, covcols_.cols() ? &cv : nullptr, &exo_);
                auto pm = select_moments(b, row_pat[static_cast<size_t>(i)]->obs, table_.k, true);
                Index kp = pm.omega.rows();
                Mat M(kp * kp, p);
                for (int j = 0; j < p; ++j) {
                    Mat dj = Eigen::Map<const Mat>(pm.d_omega.col(j).data(), kp, kp);
                    Mat w = pm.omega_inv * dj * pm.omega_inv;
                    M.col(j) = Eigen::Map<Vec>(w.data(), kp * kp);
                }
                double wt = weights_.size() > 0 ? weights_[i] : 1.0;
                I += wt * 0.5 * (pm.d_omega.transpose() * M);
                I += wt * (pm.d_xi.transpose() * pm.omega_inv * pm.d_xi);
            }
            return 0.5 * (I + I.transpose());
        }
        case InfoType::Hessian: {
            if (table_.affine() && !row_dependent()) {
                MomentBundle b = d_moments(table_, theta, nullptr, &exo_);
                auto d2 = d2_moments(table_, theta, &exo_);
                Mat H = Mat::Zero(p, p);
                for (const auto& g : patterns_) {
                    auto pm = select_moments(b, g.obs, table_.k, true);
                    double W = g.stats.n;
                    Vec d = g.stats.mu - pm.xi;
                    Vec Su = W * d;
                    Mat T = g.stats.S + d * d.transpose();
                    Mat SU = W * T;
                    Index kp = pm.omega.rows();
                    std::vector<Mat> Oi(static_cast<size_t>(p));
                    std::vector<Mat> Wi(static_cast<size_t>(p));
                    for (int j = 0; j < p; ++j) {
                        Oi[static_cast<size_t>(j)] =
                            Eigen::Map<const Mat>(pm.d_omega.col(j).data(), kp, kp);
                        Wi[static_cast<size_t>(j)] = pm.omega_inv * Oi[static_cast<size_t>(j)];
                    }
                    for (int i = 0; i < p; ++i) {
                        for (int j = i; j < p; ++j) {
                            Mat Oij = select_sq(d2.d2_omega(i, j), g.obs);
                            Vec xij = select_v(d2.d2_xi(i, j), g.obs);
                            Vec xii = pm.d_xi.col(i), xjj = pm.d_xi.col(j);
                            double h = 0;
                            h += 0.5 * W *
                                 (Wi[static_cast<size_t>(i)] * Wi[static_cast<size_t>(j)]).trace();
                            h -= 0.5 * W * (pm.omega_inv * Oij).trace();
                            h -= xii.dot(Wi[static_cast<size_t>(j)] * pm.omega_inv * Su);
                            h -= (pm.omega_inv * Oi[static_cast<size_t>(i)] * pm.omega_inv *
                                  Oi[static_cast<size_t>(j)] * pm.omega_inv * SU)
                                     .trace();
                            h += 0.5 * (pm.omega_inv * Oij * pm.omega_inv * SU).trace();
                            h -= W * xii.dot(pm.omega_inv * xjj);
                            h -= Su.dot(pm.omega_inv * Oi[static_cast<size_t>(i)] * pm.omega_inv *
                                        xjj);
                            h += Su.dot(pm.omega_inv * xij);
                            H(i, j) += h;
                            if (i != j) H(j, i) += h;
                        }
                    }
                }
                return -H;
            }
            Mat J = numeric_score_jacobian([this](const Vec& th) { return score(th); }, theta);
            return -0.5 * (J + J.transpose());
        }
        case InfoType::Outer: {
            Mat rows = score_rows(theta);
            return rows.transpose() * rows;
        }
        case InfoType::Robust:
            throw Error::usage("robust information requires a cluster assignment; use robust_vcov");
    }
    throw Error::usage("unknown information type");
}

double LikelihoodContext::saturated_loglik() const {
    if (patterns_.size() != 1 || patterns_.front().obs.size() != static_cast<size_t>(table_.k))
        throw Error::usage("saturated log-likelihood requires complete data");
    const auto& st = patterns_.front().stats;
    return gaussian_suff_loglik(st.S, st.mu, st);
}

int LikelihoodContext::saturated_param_count() const {
    int ke = static_cast<int>(table_.endo_pos.size());
    int q = static_cast<int>(table_.exo_pos.size());
    return ke + ke * q + ke * (ke + 1) / 2;
}

Mat numeric_score_jacobian(const std::function<Vec(const Vec&)>& score_fn, const Vec& theta) {
    const Index p = theta.size();
    Mat J(p, p);
    for (Index j = 0; j < p; ++j) {
        double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
        Vec tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        J.col(j) = (score_fn(tp) - score_fn(tm)) / (2 * h);
    }
    return J;
}

Vec weighted_score(const LikelihoodContext& ctx, const Vec& theta, const Mat& weights) {
    return weighted_score_rows(ctx, theta, weights).colwise().sum().transpose();
}

Mat weighted_score_rows(const LikelihoodContext& ctx, const Vec& theta, const Mat& weights) {
    const auto& t = ctx.table();
    const int p = t.theta_dim;
    Index n = ctx.Z().rows();
    Index ke = static_cast<Index>(t.endo_pos.size());
    if (weights.rows() != n || weights.cols() != ke)
        throw Error::data("weight matrix must be n x n_endogenous (" + std::to_string(n) + " x " +
                          std::to_string(ke) + ")");
    if ((weights.array() < 0).any()) throw Error::data("negative weights rejected");
    if (ctx.patterns().size() != 1 || ctx.patterns().front().obs.size() != static_cast<size_t>(t.k))
        throw Error::usage("weighted estimator requires complete data");

    Mat out = Mat::Zero(n, p);
    Index ne = static_cast<Index>(t.exo_names.size());
    OmpErrors err;
#pragma omp parallel for schedule(static) num_threads(parallel::threads())
    for (Index i = 0; i < n; ++i) {
        try {
        Vec x(ne);
        for (Index j = 0; j < ne; ++j) x[j] = ctx.Z()(i, t.exo_pos[static_cast<size_t>(j)]);
        MomentForm form;
        form.kind = MomentForm::Kind::Conditional;
        form.x = x;
        Vec cv = ctx.cov_cols().cols() ? Vec(ctx.cov_cols().row(i).transpose()) : Vec();
        MomentBundle b = d_moments(t, theta, ctx.cov_cols().cols() ? &cv : nullptr, nullptr, form);
        Eigen::LLT<Mat> llt(b.omega);
        if (llt.info() != Eigen::Success)
            throw Error::numerical("conditional covariance not positive definite");
        Mat oinv = llt.solve(Mat::Identity(ke, ke));
        Vec y(ke);
        for (Index j = 0; j < ke; ++j) y[j] = ctx.Z()(i, t.endo_pos[static_cast<size_t>(j)]);
        Vec u = y - b.xi;
        Mat W = Mat(weights.row(i).asDiagonal());
        // -1/2 { DOmega'(vec[Oinv] - vec[Oinv u u' Oinv W]) - 2 Dxi' Oinv W u }
        Mat inner = oinv - oinv * u * u.transpose() * oinv * W;
        Vec vin = Eigen::Map<Vec>(inner.data(), ke * ke);
        out.row(i) =
            (-0.5 * (b.d_omega.transpose() * vin) + b.d_xi.transpose() * (oinv * (W * u)))
                .transpose();
        } catch (const std::exception& e) {
            err.capture(e);
        }
    }
    err.rethrow();
    return out;
}

} // namespace latvar
