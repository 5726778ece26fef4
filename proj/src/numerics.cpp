#include "coxpf/numerics.hpp"

#include "coxpf/types.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>

namespace coxpf {

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }

double log_normal_sf(double x) {
    if (x < 30.0) {
        if (x < -5.0) return std::log1p(-0.5 * boost::math::erfc(-x / std::numbers::sqrt2));
        return std::log(0.5 * boost::math::erfc(x / std::numbers::sqrt2));
    }
    // asymptotic expansion of the Mills ratio
    const double z = 1.0 / (x * x);
    const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
    return -0.5 * x * x - std::log(x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double log_normal_cdf(double x) { return log_normal_sf(-x); }

double log_diff_exp(double a, double b) {
    if (b > a) throw InvalidArgument("log_diff_exp: b > a");
    if (b == -INFINITY) return a;
    return a + std::log1p(-std::exp(b - a));
}

QuadratureRule gauss_hermite_normal(int n) {
    if (n < 1) throw InvalidArgument("gauss_hermite_normal: n < 1");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        J(k, k - 1) = std::sqrt(static_cast<double>(k));
        J(k - 1, k) = J(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = eig.eigenvalues()(i);
        const double v = eig.eigenvectors()(0, i);
        rule.weights[i] = v * v;
    }
    return rule;
}

QuadratureRule composite_gauss_legendre(double a, double b, int panels) {
    using GL = boost::math::quadrature::gauss<double, 20>;
    const auto& x = GL::abscissa();
    const auto& w = GL::weights();
    QuadratureRule rule;
    rule.nodes.reserve(20 * panels);
    rule.weights.reserve(20 * panels);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        for (std::size_t i = 0; i < x.size(); ++i) {
            rule.nodes.push_back(mid - 0.5 * h * x[i]);
            rule.weights.push_back(0.5 * h * w[i]);
            rule.nodes.push_back(mid + 0.5 * h * x[i]);
            rule.weights.push_back(0.5 * h * w[i]);
        }
    }
    return rule;
}

}  // namespace coxpf
