#include "coxpf/oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace coxpf;
using coxpf::testing::summarize;
using coxpf::testing::vec;

TEST(BridgeExpectation, Values) {
    EXPECT_NEAR(bridge_path_integral_expectation(0.0, 3.0, 0.5, 2.0, 7.0, -1.0), std::exp(-4.5), 1e-15);
    EXPECT_NEAR(bridge_path_integral_expectation(1.0, 10.0, 0.0, 1.0, 0.0, 0.0), 4.7331556269721534e-05, 1e-18);
    EXPECT_EQ(bridge_path_integral_expectation(1.0, 10.0, 0.2, 0.9, 0.3, -1.2),
              bridge_path_integral_expectation(1.0, 10.0, 0.2, 0.9, -1.2, 0.3));
    EXPECT_THROW(bridge_path_integral_expectation(1.0, 10.0, 1.0, 1.0, 0.0, 0.0), InvalidArgument);
}

TEST(BridgeExpectation, MonteCarloOverBridgePaths) {
    // Riemann sum of a finely sampled Brownian bridge path
    RandomStream rng(1, 1);
    const double tau = 0.2, T = 1.0, x0 = 0.5, x1 = -0.3;
    const int steps = 400, n = 20000;
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        double x = x0, integral = 0.0;
        const double h = (T - tau) / steps;
        for (int k = 0; k < steps; ++k) {
            const double t = tau + k * h, rem = T - t;
            const double mean = x + (x1 - x) * h / rem, var = h * (rem - h) / rem;
            const double nx = mean + std::sqrt(std::max(var, 0.0)) * rng.normal();
            integral += 0.5 * (x + nx) * h;
            x = nx;
        }
        v[i] = std::exp(-integral);
    }
    const auto s = summarize(v);
    EXPECT_NEAR(s.mean, bridge_path_integral_expectation(1.0, 0.0, tau, T, x0, x1), 4 * s.se + 1e-5);
}

TEST(NoObsLikelihood, Values) {
    EXPECT_EQ(likelihood_no_obs(0.0), 1.0);
    EXPECT_NEAR(likelihood_no_obs(2.0) / 7.8193323234550789e-09, 1.0, 1e-14);
}

TEST(NoObsLikelihood, MonteCarloOverIntegralLaw) {
    // int_0^T X dt ~ Normal(0, T^3/3); the likelihood is exp(-10T) E exp(-I)
    RandomStream rng(2, 1);
    const double T = 2.0;
    std::vector<double> v(1000000);
    for (double& x : v) x = std::exp(-10 * T - std::sqrt(T * T * T / 3) * rng.normal());
    const auto s = summarize(v);
    EXPECT_NEAR(s.mean, likelihood_no_obs(T), 3 * s.se);
}

TEST(TwoObsLikelihood, MatchesIndependentQuadrature) {
    // values from an adaptive 2D quadrature over (X_t1, X_t2) with the path
    // integral integrated out by Gaussian conditioning
    EXPECT_NEAR(likelihood_two_obs(0.5, 1.2, 0.3, -0.2, 2.0, 1.0) / 3.0245260285602252e-08, 1.0, 1e-10);
    EXPECT_NEAR(likelihood_two_obs(0.3, 0.7, 0.2, -0.1, 1.0, 1.0) / 0.00051247770573901541, 1.0, 1e-10);
    EXPECT_NEAR(likelihood_two_obs(0.2, 0.6, 0.5, 0.1, 1.0, 0.5) / 0.00086157570157125991, 1.0, 1e-10);
}

TEST(TwoObsLikelihood, DecreasesWithTrailingGap) {
    double prev = 1.0;
    for (double T = 1.3; T < 4.0; T += 0.1) {
        const double v = likelihood_two_obs(0.5, 1.2, 0.3, -0.2, T, 1.0);
        EXPECT_LT(v, prev);
        prev = v;
    }
    EXPECT_THROW(likelihood_two_obs(0.7, 0.5, 0.0, 0.0, 1.0, 1.0), InvalidArgument);
    EXPECT_THROW(likelihood_two_obs(0.3, 0.5, 0.0, 0.0, 1.0, 0.0), InvalidArgument);
}

TEST(ExactSegmentWeight, Values) {
    EXPECT_EQ(exact_segment_weight(0.4, 0.4, 1.0, -2.0), 1.0);
    EXPECT_EQ(exact_segment_weight(0.1, 0.35, 0.2, 0.9), bridge_path_integral_expectation(1.0, 10.0, 0.1, 0.35, 0.2, 0.9));
}

TEST(ExactSegmentWeight, MultiplicativeOverRefinement) {
    // product over halves of a bridge-sampled midpoint has the coarse expectation
    RandomStream rng(3, 1);
    const auto bm = LinearSde::brownian(1);
    const double a = 0.0, b = 0.4, xa = 0.3, xb = -0.5;
    std::vector<double> v(200000);
    for (double& w : v) {
        const double mid = sample_bridge(bm, a, 0.2, b, vec({xa}), vec({xb}), rng)[0];
        w = exact_segment_weight(a, 0.2, xa, mid) * exact_segment_weight(0.2, b, mid, xb);
    }
    const auto s = summarize(v);
    EXPECT_NEAR(s.mean, exact_segment_weight(a, b, xa, xb), 3 * s.se);
}

TEST(ExactSegmentWeight, PoissonEstimateWithBridgedInterior) {
    // endpoint-conditioned Poisson estimate: interior times from the bridge
    RandomStream rng(4, 1);
    const auto bm = LinearSde::brownian(1);
    const double D = 0.3, x0 = 0.2, x1 = -0.4, eta = 0.3;
    std::vector<double> v(1000000);
    for (double& e : v) {
        const int k = rng.poisson(eta);
        std::vector<double> ts(k);
        for (double& t : ts) t = D * rng.uniform();
        std::sort(ts.begin(), ts.end());
        double est = std::exp(-D * (x0 + 10.0) + eta), s = 0.0, x = x0;
        for (double t : ts) {
            x = sample_bridge(bm, s, t, D, vec({x}), vec({x1}), rng)[0];
            s = t;
            est *= ((x0 + 10.0) - (x + 10.0)) * D / eta;
        }
        e = est;
    }
    const auto s = summarize(v);
    EXPECT_NEAR(s.mean, exact_segment_weight(0.0, D, x0, x1), 3 * s.se);
}

TEST(QuadratureLikelihood, SingleStepIsDeterministic) {
    const auto model = benchmark_model();
    ObservationSet o;
    o.horizon = 0.3;
    EXPECT_NEAR(quadrature_likelihood_delta(model, o, 0.3), std::exp(-3.0), 1e-15);
}

TEST(QuadratureLikelihood, TwoStepsByHandReduction) {
    // E exp(-10h - (X_h + 10) h) = exp(-20 h + h^3 / 2)
    const auto model = benchmark_model();
    ObservationSet o;
    o.horizon = 0.5;
    EXPECT_NEAR(quadrature_likelihood_delta(model, o, 0.25) / std::exp(-5.0 + 0.015625 / 2), 1.0, 1e-12);
}

TEST(QuadratureLikelihood, RichardsonTowardsContinuousLimit) {
    // L_Delta = L exp(-T^2 h / 4 + T h^2 / 12) here, so 3-point Richardson on log L is exact
    const auto model = benchmark_model();
    ObservationSet o;
    o.horizon = 2.0;
    const double l1 = std::log(quadrature_likelihood_delta(model, o, 2.0 / 2));
    const double l2 = std::log(quadrature_likelihood_delta(model, o, 2.0 / 4));
    const double l4 = std::log(quadrature_likelihood_delta(model, o, 2.0 / 5));
    // steps 1, 0.5, 0.4: solve for the h -> 0 intercept of a + b h + c h^2
    Eigen::Matrix3d A;
    A << 1, 1.0, 1.0, 1, 0.5, 0.25, 1, 0.4, 0.16;
    const Eigen::Vector3d coef = A.colPivHouseholderQr().solve(Eigen::Vector3d(l1, l2, l4));
    EXPECT_NEAR(coef[0], std::log(likelihood_no_obs(2.0)), 1e-8);
    EXPECT_NEAR(coef[1], -1.0, 1e-8);
}

TEST(QuadratureLikelihood, Limits) {
    const auto model = benchmark_model();
    ObservationSet o;
    o.horizon = 1.0;
    EXPECT_THROW(quadrature_likelihood_delta(model, o, 0.1), InvalidArgument);
}

TEST(ExactWeightFilter, SingleStepVarianceMatchesEndpointMonteCarlo) {
    const auto model = benchmark_model();
    ObservationSet o;
    o.horizon = 1.0;
    FilterOptions opt;
    opt.particles = 1;
    std::vector<double> filt, direct;
    RandomStream rng(5, 1);
    for (int r = 0; r < 20000; ++r) {
        opt.seed = r + 1;
        filt.push_back(run_exact_weight_pf(model, o, 1.0, opt).likelihood());
        direct.push_back(exact_segment_weight(0.0, 1.0, 0.0, rng.normal()));
    }
    const auto a = summarize(filt), b = summarize(direct);
    const double rv_a = a.sd * a.sd / (a.mean * a.mean), rv_b = b.sd * b.sd / (b.mean * b.mean);
    EXPECT_NEAR(rv_a, rv_b, 0.1 * rv_b);
    EXPECT_NEAR(a.mean, likelihood_no_obs(1.0), 4 * a.se);
}

TEST(ExactWeightFilter, RejectsOtherModels) {
    auto model = benchmark_model();
    model.dynamics = LinearSde::ornstein_uhlenbeck(vec({1.0}), vec({0.0}));
    ObservationSet o;
    o.horizon = 1.0;
    EXPECT_THROW(run_exact_weight_pf(model, o, 0.1, {}), InvalidArgument);
}
