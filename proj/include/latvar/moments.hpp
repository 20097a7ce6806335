#pragma once

// Model-implied moments Omega = G P G', xi = G v with their analytic first
// and second derivatives in theta, in both the joint (all observed) and
// conditional (endogenous given exogenous) forms.

#include "latvar/param_table.hpp"

namespace latvar {

struct MomentBundle {
    Mat G;       // k_sel x m
    Mat omega;   // k_sel x k_sel
    Vec xi;      // k_sel
    Mat d_omega; // k_sel^2 x p (column j = vec d omega / d theta_j)
    Mat d_xi;    // k_sel x p
    Mat Binv;    // (1 - A)^-1, m x m
    bool has_derivs = false;
};

struct SecondDerivs {
    Index k = 0;
    int p = 0;
    std::vector<Mat> omega; // p*p slices (i*p+j), each k x k
    std::vector<Vec> xi;    // p*p slices, each k
    const Mat& d2_omega(int i, int j) const { return omega[static_cast<size_t>(i * p + j)]; }
    const Vec& d2_xi(int i, int j) const { return xi[static_cast<size_t>(i * p + j)]; }
};

struct ConditionalMoments {
    std::vector<std::string> names; // endogenous, U order
    Vec mu;
    Mat sigma;
};

// Which rows of U the bundle selects and how P/v are masked.
struct MomentForm {
    enum class Kind { Joint, Conditional } kind = Kind::Joint;
    Vec x; // exogenous values (aligned with table.exo_names); Conditional only
};

MomentBundle model_moments(const ParameterTable& t, const Vec& theta,
                           const Vec* cov_values = nullptr, const ExoMoments* exo = nullptr,
                           const MomentForm& form = {});

MomentBundle d_moments(const ParameterTable& t, const Vec& theta,
                       const Vec* cov_values = nullptr, const ExoMoments* exo = nullptr,
                       const MomentForm& form = {});

// Analytic second derivatives; affine tables only (callers fall back to a
// numeric Hessian of the score otherwise).
SecondDerivs d2_moments(const ParameterTable& t, const Vec& theta,
                        const ExoMoments* exo = nullptr);

ConditionalMoments conditional_moments(const ParameterTable& t, const Vec& theta, const Vec& x,
                                       const Vec* cov_values = nullptr);

// (1 - A)^-1 with explicit singularity detection.
Mat invert_one_minus(const Mat& A, const Vec& theta_for_msg);

} // namespace latvar
