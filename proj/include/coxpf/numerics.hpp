#pragma once

#include <vector>

namespace coxpf {

double normal_cdf(double x);
/// log(1 - Φ(x)), accurate far into the upper tail where 1 - Φ(x) underflows.
double log_normal_sf(double x);
double log_normal_cdf(double x);

/// log(exp(a) - exp(b)) for a >= b.
double log_diff_exp(double a, double b);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Hermite rule for the standard normal weight (weights sum to 1).
QuadratureRule gauss_hermite_normal(int n);

/// 20-point Gauss-Legendre rule on [a,b] split into `panels` equal panels.
QuadratureRule composite_gauss_legendre(double a, double b, int panels);

}  // namespace coxpf
