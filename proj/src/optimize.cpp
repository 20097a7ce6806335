#include "latvar/optimize.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

namespace latvar {

namespace {
double safe_value(const std::function<double(const Vec&)>& f, const Vec& x) {
    try {
        double v = f(x);
        return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    } catch (const Error&) {
        return -std::numeric_limits<double>::infinity();
    }
}
} // namespace

OptResult newton_raphson(const Objective& obj, Vec theta, const OptimOptions& opt) {
    OptResult res;
    double f = safe_value(obj.value, theta);
    if (!std::isfinite(f))
        throw Error::numerical("optimizer: objective not finite at the starting values");

    int stalled = 0;
    for (int it = 0; it < opt.iter_max; ++it) {
        Vec g = obj.grad(theta);
        Mat H = obj.curvature(theta);
        // solve H step = g with a ridge fallback when H is not safely PD
        Vec step;
        Eigen::LDLT<Mat> ldlt(H);
        double dmax = ldlt.info() == Eigen::Success ? ldlt.vectorD().maxCoeff() : 0.0;
        bool ok = ldlt.info() == Eigen::Success && dmax > 0 &&
                  (ldlt.vectorD().array() > 1e-10 * std::max(1.0, dmax)).all();
        if (ok) {
            step = ldlt.solve(g);
        } else {
            double ridge = 1e-6 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
            Mat Hr = H + ridge * Mat::Identity(H.rows(), H.cols());
            for (int tries = 0; tries < 12; ++tries) {
                Eigen::LDLT<Mat> l2(Hr);
                if (l2.info() == Eigen::Success && (l2.vectorD().array() > 0).all()) {
                    step = l2.solve(g);
                    ok = true;
                    break;
                }
                ridge *= 10;
                Hr = H + ridge * Mat::Identity(H.rows(), H.cols());
            }
            if (!ok) step = g; // steepest ascent as last resort
        }
        // trust-region style cap keeps a near-singular curvature from
        // launching the line search into non-finite territory
        double cap = 10.0 * std::max(1.0, theta.cwiseAbs().maxCoeff());
        double smax = step.cwiseAbs().maxCoeff();
        if (smax > cap) step *= cap / smax;

        double gamma = opt.gamma;
        double fnew = -std::numeric_limits<double>::infinity();
        Vec cand;
        for (int half = 0; half < 32; ++half) {
            cand = theta + gamma * step;
            fnew = safe_value(obj.value, cand);
            if (fnew >= f - 1e-14 * std::abs(f)) break;
            gamma *= 0.5;
        }
        if (!std::isfinite(fnew) || fnew < f - 1e-8 * std::max(1.0, std::abs(f))) {
            // no ascent possible along the Newton direction
            res.theta = theta;
            res.value = f;
            res.grad = g;
            res.iterations = it;
            res.converged = g.size() == 0 || g.cwiseAbs().maxCoeff() < std::sqrt(opt.tol);
            res.message = res.converged ? "converged (no further ascent)" : "line search failed";
            return res;
        }
        double rel_change = std::abs(fnew - f) / std::max(1.0, std::abs(fnew));
        theta = cand;
        f = fnew;
        if (opt.trace)
            std::fprintf(stderr, "iter %d  value %.10g  |grad| %.3e\n", it, f,
                         g.size() ? g.cwiseAbs().maxCoeff() : 0.0);
        double gscale = opt.tol * std::max(1.0, std::abs(f));
        Vec gnew = obj.grad(theta);
        bool grad_ok = gnew.size() == 0 || gnew.cwiseAbs().maxCoeff() < gscale;
        if (grad_ok && rel_change < opt.tol) {
            res.theta = theta;
            res.value = f;
            res.grad = gnew;
            res.iterations = it + 1;
            res.converged = true;
            res.message = "converged";
            return res;
        }
        stalled = rel_change < 1e-15 ? stalled + 1 : 0;
        if (stalled >= 3) {
            res.theta = theta;
            res.value = f;
            res.grad = gnew;
            res.iterations = it + 1;
            res.converged = grad_ok;
            res.message = grad_ok ? "converged (stalled at optimum)" : "stalled";
            return res;
        }
    }
    res.theta = theta;
    res.value = f;
    res.grad = obj.grad(theta);
    res.iterations = opt.iter_max;
    res.converged = false;
    res.message = "iteration limit reached";
    return res;
}

OptResult nelder_mead(const std::function<double(const Vec&)>& value, Vec theta0,
                      const OptimOptions& opt) {
    const Index n = theta0.size();
    const double alpha = 1.0, gamma_e = 2.0, rho = 0.5, sigma = 0.5;
    std::vector<Vec> pts;
    std::vector<double> fv;
    pts.push_back(theta0);
    fv.push_back(-safe_value(value, theta0)); // minimize -value
    for (Index i = 0; i < n; ++i) {
        Vec p = theta0;
        p[i] += (p[i] != 0.0) ? 0.05 * p[i] : 0.1;
        pts.push_back(p);
        fv.push_back(-safe_value(value, p));
    }
    int evals = 0;
    const int max_evals = std::max(2000, opt.iter_max * static_cast<int>(n) * 4);
    while (evals < max_evals) {
        std::vector<size_t> ord(pts.size());
        for (size_t i = 0; i < ord.size(); ++i) ord[i] = i;
        std::sort(ord.begin(), ord.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
        std::vector<Vec> np;
        std::vector<double> nf;
        for (size_t i : ord) {
            np.push_back(pts[i]);
            nf.push_back(fv[i]);
        }
        pts = np;
        fv = nf;
        if (std::abs(fv.back() - fv.front()) <
            opt.tol * 10 * std::max(1.0, std::abs(fv.front())) + 1e-12)
            break;
        Vec centroid = Vec::Zero(n);
        for (size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
        centroid /= static_cast<double>(n);
        Vec xr = centroid + alpha * (centroid - pts.back());
        double fr = -safe_value(value, xr);
        ++evals;
        if (fr < fv.front()) {
            Vec xe = centroid + gamma_e * (xr - centroid);
            double fe = -safe_value(value, xe);
            ++evals;
            if (fe < fr) {
                pts.back() = xe;
                fv.back() = fe;
            } else {
                pts.back() = xr;
                fv.back() = fr;
            }
        } else if (fr < fv[fv.size() - 2]) {
            pts.back() = xr;
            fv.back() = fr;
        } else {
            Vec xc = centroid + rho * (pts.back() - centroid);
            double fc = -safe_value(value, xc);
            ++evals;
            if (fc < fv.back()) {
                pts.back() = xc;
                fv.back() = fc;
            } else {
                for (size_t i = 1; i < pts.size(); ++i) {
                    pts[i] = pts.front() + sigma * (pts[i] - pts.front());
                    fv[i] = -safe_value(value, pts[i]);
                    ++evals;
                }
            }
        }
    }
    size_t best = 0;
    for (size_t i = 1; i < fv.size(); ++i)
        if (fv[i] < fv[best]) best = i;
    OptResult res;
    res.theta = pts[best];
    res.value = -fv[best];
    res.grad = Vec::Zero(n);
    res.iterations = evals;
    res.converged = true;
    res.message = "simplex";
    return res;
}

Vec LogLinkMap::to_internal(const Vec& natural) const {
    Vec out = natural;
    for (Index i = 0; i < natural.size(); ++i)
        if (on[static_cast<size_t>(i)]) {
            if (natural[i] <= 0)
                throw Error::numerical("log-link: variance coordinate must start positive");
            out[i] = std::log(natural[i]);
        }
    return out;
}

Vec LogLinkMap::to_natural(const Vec& internal) const {
    Vec out = internal;
    for (Index i = 0; i < internal.size(); ++i)
        if (on[static_cast<size_t>(i)]) out[i] = std::exp(internal[i]);
    return out;
}

Objective LogLinkMap::wrap(const Objective& obj) const {
    LogLinkMap self = *this;
    Objective out;
    out.value = [obj, self](const Vec& phi) { return obj.value(self.to_natural(phi)); };
    if (obj.grad)
        out.grad = [obj, self](const Vec& phi) {
            Vec theta = self.to_natural(phi);
            Vec g = obj.grad(theta);
            for (Index i = 0; i < g.size(); ++i)
                if (self.on[static_cast<size_t>(i)]) g[i] *= theta[i];
            return g;
        };
    if (obj.curvature)
        out.curvature = [obj, self](const Vec& phi) {
            Vec theta = self.to_natural(phi);
            Mat H = obj.curvature(theta); // curvature of -l in theta
            Vec g = obj.grad ? obj.grad(theta) : Vec::Zero(theta.size());
            // d2(-l)/dphi2 = D H D - diag(g * theta) with D = diag(dtheta/dphi)
            Mat out_h = H;
            for (Index i = 0; i < theta.size(); ++i)
                for (Index j = 0; j < theta.size(); ++j) {
                    double di = self.on[static_cast<size_t>(i)] ? theta[i] : 1.0;
                    double dj = self.on[static_cast<size_t>(j)] ? theta[j] : 1.0;
                    out_h(i, j) *= di * dj;
                }
            for (Index i = 0; i < theta.size(); ++i)
                if (self.on[static_cast<size_t>(i)]) out_h(i, i) -= g[i] * theta[i];
            return out_h;
        };
    return out;
}

} // namespace latvar
