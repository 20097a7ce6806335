#include "latvar/moments.hpp"

#include <Eigen/LU>
#include <sstream>

namespace latvar {

Mat invert_one_minus(const Mat& A, const Vec& theta_for_msg) {
    Index m = A.rows();
    Mat IA = Mat::Identity(m, m) - A;
    Eigen::PartialPivLU<Mat> lu(IA);
    Mat B = lu.inverse();
    double rcond = 1.0 / (IA.cwiseAbs().colwise().sum().maxCoeff() *
                          B.cwiseAbs().colwise().sum().maxCoeff());
    if (!B.allFinite() || rcond < 1e-12) {
        std::ostringstream os;
        os << "singular (1 - A) at theta = [";
        for (Index i = 0; i < theta_for_msg.size(); ++i)
            os << (i ? ", " : "") << theta_for_msg[i];
        os << "]";
        throw Error::numerical(os.str());
    }
    return B;
}

namespace {

struct Selection {
    std::vector<Index> rows;  // U positions kept
    std::vector<bool> p_mask; // true -> row/col of P (and v) cancelled
    bool masked = false;
};

Selection make_selection(const ParameterTable& t, const MomentForm& form) {
    Selection s;
    s.p_mask.assign(static_cast<size_t>(t.m), false);
    if (form.kind == MomentForm::Kind::Joint) {
        for (Index i = 0; i < t.k; ++i) s.rows.push_back(i);
    } else {
        s.rows = t.endo_pos;
        s.masked = true;
        for (Index pos : t.exo_pos) s.p_mask[static_cast<size_t>(pos)] = true;
    }
    return s;
}

} // namespace

MomentBundle model_moments(const ParameterTable& t, const Vec& theta, const Vec* cov_values,
                           const ExoMoments* exo, const MomentForm& form) {
    auto mt = t.materialize(theta, cov_values, exo);
    Selection sel = make_selection(t, form);

    if (sel.masked) {
        if (form.x.size() != static_cast<Index>(t.exo_names.size()))
            throw Error::data("conditional moments: exogenous value record has wrong length");
        for (size_t i = 0; i < t.exo_pos.size(); ++i) {
            Index pos = t.exo_pos[i];
            mt.P.row(pos).setZero();
            mt.P.col(pos).setZero();
            mt.v[pos] = form.x[static_cast<Index>(i)]; // p_X v + v_x
        }
    }

    MomentBundle b;
    b.Binv = invert_one_minus(mt.A, theta);
    Index ks = static_cast<Index>(sel.rows.size());
    b.G.resize(ks, t.m);
    for (Index r = 0; r < ks; ++r) b.G.row(r) = b.Binv.row(sel.rows[static_cast<size_t>(r)]);
    b.omega = b.G * mt.P * b.G.transpose();
    b.omega = 0.5 * (b.omega + b.omega.transpose()).eval(); // exact symmetry
    b.xi = b.G * mt.v;
    return b;
}

MomentBundle d_moments(const ParameterTable& t, const Vec& theta, const Vec* cov_values,
                       const ExoMoments* exo, const MomentForm& form) {
    auto mt = t.materialize(theta, cov_values, exo);
    Selection sel = make_selection(t, form);
    if (sel.masked) {
        if (form.x.size() != static_cast<Index>(t.exo_names.size()))
            throw Error::data("conditional moments: exogenous value record has wrong length");
        for (size_t i = 0; i < t.exo_pos.size(); ++i) {
            Index pos = t.exo_pos[i];
            mt.P.row(pos).setZero();
            mt.P.col(pos).setZero();
            mt.v[pos] = form.x[static_cast<Index>(i)];
        }
    }

    MomentBundle b;
    b.Binv = invert_one_minus(mt.A, theta);
    Index ks = static_cast<Index>(sel.rows.size());
    b.G.resize(ks, t.m);
    for (Index r = 0; r < ks; ++r) b.G.row(r) = b.Binv.row(sel.rows[static_cast<size_t>(r)]);
    b.omega = b.G * mt.P * b.G.transpose();
    b.omega = 0.5 * (b.omega + b.omega.transpose()).eval();
    b.xi = b.G * mt.v;

    const int p = t.theta_dim;
    auto derivs = t.theta_derivs(theta, cov_values);

    Mat PGt = mt.P * b.G.transpose();          // m x k
    Mat BPGt = b.Binv * PGt;                   // m x k
    Vec Bv = b.Binv * mt.v;                    // m

    b.d_omega = Mat::Zero(ks * ks, p);
    b.d_xi = Mat::Zero(ks, p);

    for (int j = 0; j < p; ++j) {
        Mat dOm = Mat::Zero(ks, ks);
        Vec dxi = Vec::Zero(ks);
        for (const auto& ws : derivs[static_cast<size_t>(j)]) {
            switch (ws.mat) {
                case Slot::M::A: {
                    // dG = G dA B ; dA = w e_r e_c'
                    Vec gcol = b.G.col(ws.row);
                    // dOmega += dG P G' + (dG P G')'
                    Eigen::RowVectorXd mrow = ws.w * BPGt.row(ws.col);
                    dOm.noalias() += gcol * mrow;
                    dOm.noalias() += mrow.transpose() * gcol.transpose();
                    // dxi += dG v
                    dxi.noalias() += (ws.w * Bv[ws.col]) * gcol;
                    break;
                }
                case Slot::M::P: {
                    if (sel.masked && (sel.p_mask[static_cast<size_t>(ws.row)] ||
                                       sel.p_mask[static_cast<size_t>(ws.col)]))
                        break;
                    Vec gr = b.G.col(ws.row), gc = b.G.col(ws.col);
                    if (ws.row == ws.col) {
                        dOm.noalias() += ws.w * gr * gr.transpose();
                    } else {
                        dOm.noalias() += ws.w * gr * gc.transpose();
                        dOm.noalias() += ws.w * gc * gr.transpose();
                    }
                    break;
                }
                case Slot::M::V: {
                    if (sel.masked && sel.p_mask[static_cast<size_t>(ws.row)]) break;
                    dxi.noalias() += ws.w * b.G.col(ws.row);
                    break;
                }
            }
        }
        b.d_omega.col(j) = Eigen::Map<Vec>(dOm.data(), ks * ks);
        b.d_xi.col(j) = dxi;
    }
    b.has_derivs = true;
    return b;
}

SecondDerivs d2_moments(const ParameterTable& t, const Vec& theta, const ExoMoments* exo) {
    if (!t.affine() || t.row_dependent())
        throw Error::usage("d2_moments: analytic second derivatives need an affine, "
                           "row-constant table");
    auto mt = t.materialize(theta, nullptr, exo);
    Mat B = invert_one_minus(mt.A, theta);
    Index k = t.k;
    Mat G = B.topRows(k); // observed positions are 0..k-1 in U order
    const int p = t.theta_dim;
    auto derivs = t.theta_derivs(theta, nullptr);

    // first derivatives of G, P, v per theta
    std::vector<Mat> Gd(static_cast<size_t>(p)), Pd(static_cast<size_t>(p));
    std::vector<Vec> vd(static_cast<size_t>(p));
    for (int j = 0; j < p; ++j) {
        Mat dG = Mat::Zero(k, t.m);
        Mat dP = Mat::Zero(t.m, t.m);
        Vec dv = Vec::Zero(t.m);
        for (const auto& ws : derivs[static_cast<size_t>(j)]) {
            switch (ws.mat) {
                case Slot::M::A: dG.noalias() += ws.w * G.col(ws.row) * B.row(ws.col); break;
                case Slot::M::P:
                    dP(ws.row, ws.col) += ws.w;
                    if (ws.row != ws.col) dP(ws.col, ws.row) += ws.w;
                    break;
                case Slot::M::V: dv[ws.row] += ws.w; break;
            }
        }
        Gd[static_cast<size_t>(j)] = dG;
        Pd[static_cast<size_t>(j)] = dP;
        vd[static_cast<size_t>(j)] = dv;
    }

    SecondDerivs out;
    out.k = k;
    out.p = p;
    out.omega.assign(static_cast<size_t>(p * p), Mat());
    out.xi.assign(static_cast<size_t>(p * p), Vec());

    for (int i = 0; i < p; ++i) {
        for (int j = i; j < p; ++j) {
            // Gij = G [Ai B Aj + Aj B Ai] B with sparse Ai, Aj
            Mat Gij = Mat::Zero(k, t.m);
            for (const auto& wa : derivs[static_cast<size_t>(i)]) {
                if (wa.mat != Slot::M::A) continue;
                for (const auto& wb : derivs[static_cast<size_t>(j)]) {
                    if (wb.mat != Slot::M::A) continue;
                    double c1 = wa.w * wb.w * B(wa.col, wb.row);
                    Gij.noalias() += c1 * G.col(wa.row) * B.row(wb.col);
                    double c2 = wa.w * wb.w * B(wb.col, wa.row);
                    Gij.noalias() += c2 * G.col(wb.row) * B.row(wa.col);
                }
            }
            const Mat& Gi = Gd[static_cast<size_t>(i)];
            const Mat& Gj = Gd[static_cast<size_t>(j)];
            Mat T = Gij * mt.P * G.transpose() + Gj * Pd[static_cast<size_t>(i)] * G.transpose() +
                    Gj * mt.P * Gi.transpose() + Gi * Pd[static_cast<size_t>(j)] * G.transpose();
            Mat om = T + T.transpose();
            Vec xi = Gij * mt.v + Gj * vd[static_cast<size_t>(i)] + Gi * vd[static_cast<size_t>(j)];
            out.omega[static_cast<size_t>(i * p + j)] = om;
            out.omega[static_cast<size_t>(j * p + i)] = om;
            out.xi[static_cast<size_t>(i * p + j)] = xi;
            out.xi[static_cast<size_t>(j * p + i)] = xi;
        }
    }
    return out;
}

ConditionalMoments conditional_moments(const ParameterTable& t, const Vec& theta, const Vec& x,
                                       const Vec* cov_values) {
    MomentForm form;
    form.kind = MomentForm::Kind::Conditional;
    form.x = x;
    auto b = model_moments(t, theta, cov_values, nullptr, form);
    ConditionalMoments cm;
    for (Index pos : t.endo_pos) cm.names.push_back(t.u_names[static_cast<size_t>(pos)]);
    cm.mu = b.xi;
    cm.sigma = b.omega;
    return cm;
}

} // namespace latvar
