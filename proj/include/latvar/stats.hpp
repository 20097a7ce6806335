#pragma once

// Small special-function kit: normal/chi-square tails and quantiles.

namespace latvar {

double normal_cdf(double x);
double normal_sf(double x);
double normal_quantile(double p); // inverse CDF

// regularized incomplete gamma P(a,x), Q(a,x)
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chi2_sf(double x, double df);       // upper tail
double chi2_quantile(double p, double df); // lower quantile

} // namespace latvar
