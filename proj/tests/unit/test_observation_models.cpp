#include "coxpf/observation_models.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

using namespace coxpf;
using coxpf::testing::shared_psf;
using coxpf::testing::summarize;
using coxpf::testing::vec;

namespace {
constexpr double kPeak = M_PI * 1.4 * 1.4 / (0.52 * 0.52);
}

TEST(Intensity, Evaluation) {
    EXPECT_DOUBLE_EQ(Intensity::affine(1.0, 10.0)(vec({0.0})), 10.0);
    const Intensity ex = Intensity::exponential_depth(100.0, 20.0);
    EXPECT_DOUBLE_EQ(ex(vec({5.0, -3.0, 0.0})), 100.0);
    EXPECT_NEAR(ex(vec({0.0, 0.0, 20.0})), 100.0 * std::exp(-1.0), 1e-12);
    EXPECT_DOUBLE_EQ(Intensity::constant(4.0)(vec({1.0, 2.0})), 4.0);
}

TEST(Intensity, NegativeValueCarriesState) {
    const Intensity a = Intensity::affine(1.0, 10.0);
    try {
        a(vec({-12.5}));
        FAIL() << "expected IntensityError";
    } catch (const IntensityError& e) {
        EXPECT_DOUBLE_EQ(e.state[0], -12.5);
    }
}

TEST(Intensity, LipschitzHints) {
    EXPECT_DOUBLE_EQ(*Intensity::affine(1.0, 10.0).lipschitz_hint(), 1.0);
    EXPECT_DOUBLE_EQ(*Intensity::affine(-3.0, 10.0).lipschitz_hint(), 3.0);
    EXPECT_DOUBLE_EQ(*Intensity::exponential_depth(100.0, 20.0).lipschitz_hint(), 5.0);
    EXPECT_DOUBLE_EQ(*Intensity::constant(2.0).lipschitz_hint(), 0.0);
    EXPECT_FALSE(Intensity::custom([](const State& x) { return x.squaredNorm(); }).lipschitz_hint().has_value());
}

TEST(BornWolf, InFocusPeak) {
    const BornWolfPsf exact({}, {.enabled = false});
    EXPECT_NEAR(exact.exact_radial(0.0, 0.0) / kPeak, 1.0, 1e-12);
    EXPECT_NEAR(shared_psf()->radial(0.0, 0.0) / kPeak, 1.0, 1e-9);
}

TEST(BornWolf, RadialSymmetry) {
    const auto& q = *shared_psf();
    for (double x3 : {0.0, 1.3, 4.0}) {
        const double a = q(x3, {0.31, -0.77});
        EXPECT_EQ(a, q(x3, {-0.77, 0.31}));
        EXPECT_EQ(a, q(x3, {-0.31, 0.77}));
    }
}

TEST(BornWolf, QuadratureConverges) {
    const BornWolfPsf exact({}, {.enabled = false});
    RandomStream rng(1, 1);
    for (int i = 0; i < 20; ++i) {
        const double x3 = 8.0 * rng.uniform(), r = 5.0 * rng.uniform();
        const double a = exact.exact_radial(x3, r, 64), b = exact.exact_radial(x3, r, 128);
        EXPECT_NEAR(a, b, 1e-8) << x3 << " " << r;
    }
}

TEST(BornWolf, CacheAgreesWithQuadrature) {
    const auto& q = *shared_psf();
    RandomStream rng(2, 1);
    for (int i = 0; i < 200; ++i) {
        const double x3 = 10.0 * rng.uniform(), r = 12.0 * rng.uniform();
        EXPECT_NEAR(q.radial(x3, r), q.exact_radial(x3, r), 2e-3 + 1e-4 * kPeak);
    }
    // outside the table the exact value is used
    EXPECT_EQ(q.radial(11.0, 0.5), q.exact_radial(11.0, 0.5));
}

TEST(BornWolf, DiscMassNearOne) {
    for (double x3 : {0.0, 2.0}) EXPECT_NEAR(shared_psf()->disc_moments(x3, 10.0).mass, 1.0, 2e-2);
}

TEST(BornWolf, DiscMassByIndependentQuadrature) {
    // composite Simpson in r, independent of the library's Gauss-Legendre rule
    const auto& q = *shared_psf();
    for (double x3 : {0.0, 2.0, 5.0}) {
        const int n = 4000;
        const double h = 10.0 / n;
        double mass = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double r = i * h;
            const double w = ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0)) / 3.0;
            mass += w * h * 2 * M_PI * r * q.exact_radial(x3, r);
        }
        EXPECT_NEAR(mass, 1.0, 2e-2) << "x3 " << x3;
        EXPECT_NEAR(mass, q.disc_moments(x3, 10.0).mass, 1e-6);
    }
}

TEST(BornWolf, SpreadGrowsWithDefocus) {
    double prev = 0.0;
    for (double x3 : {0.0, 2.0, 5.0, 8.0}) {
        const double sd = shared_psf()->disc_moments(x3, 10.0).radial_sd;
        EXPECT_GT(sd, prev);
        prev = sd;
    }
}

TEST(MarkDensity, PeakAndTranslation) {
    const auto& q = *shared_psf();
    const State x = vec({0.2, -0.1, 0.0});
    const Eigen::Vector2d y = 100.0 * Eigen::Vector2d(0.2, -0.1);
    EXPECT_NEAR(q.mark_density(x, y), q.radial(0.0, 0.0) / 1e4, 1e-15);
    EXPECT_NEAR(q.mark_density(x, y) * 1e4 / kPeak, 1.0, 1e-9);
    const State x2 = vec({0.2 + 0.37, -0.1 + 0.37, 1.5});
    const Eigen::Vector2d y2 = y + 100.0 * Eigen::Vector2d(0.37, 0.37);
    EXPECT_NEAR(q.mark_density(x2, y2), q.mark_density(vec({0.2, -0.1, 1.5}), y), 1e-12);
}

TEST(MarkDensity, IntegratesToOneInDetectorSpace) {
    // midpoint rule on a detector-space polar grid of radius 1000 (10 um in object space)
    const auto& q = *shared_psf();
    for (double x3 : {0.0, 2.0, 5.0}) {
        const State x = vec({0.0, 0.0, x3});
        const int nr = 4000;
        const double rmax = 1000.0, h = rmax / nr;
        double mass = 0.0;
        for (int i = 0; i < nr; ++i) {
            const double r = (i + 0.5) * h;
            mass += h * 2 * M_PI * r * q.mark_density(x, {r, 0.0});
        }
        EXPECT_NEAR(mass, 1.0, 2e-2);
    }
}

TEST(MarkDensity, SingularMagnificationRejected) {
    BornWolfParams p;
    p.magnification << 1.0, 2.0, 2.0, 4.0;
    EXPECT_THROW(BornWolfPsf(p, {.enabled = false}), InvalidArgument);
}

TEST(SampleMark, InFocusCentredAndDefocusSpreads) {
    const auto& q = *shared_psf();
    RandomStream rng(3, 1);
    const State x = vec({1.0, -2.0, 0.0});
    const int n = 100000;
    std::vector<double> a(n), b(n), r0(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d u = q.sample_mark(x, rng) / 100.0;
        a[i] = u[0];
        b[i] = u[1];
        r0[i] = std::hypot(u[0] - 1.0, u[1] + 2.0);
    }
    EXPECT_NEAR(summarize(a).mean, 1.0, 4 * summarize(a).se);
    EXPECT_NEAR(summarize(b).mean, -2.0, 4 * summarize(b).se);
    std::vector<double> r8(20000);
    for (double& r : r8) r = (q.sample_mark(vec({0.0, 0.0, 8.0}), rng) / 100.0).norm();
    auto rms = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s / v.size());
    };
    EXPECT_GT(rms(r8), rms(r0));
}

TEST(SampleMark, RadialHistogramMatchesDensity) {
    const auto& q = *shared_psf();
    RandomStream rng(4, 1);
    for (double x3 : {0.0, 3.0}) {
        const State x = vec({0.0, 0.0, x3});
        // bins of equal probability mass under the exact profile, within 6 um
        const int bins = 20;
        std::vector<double> edges{0.0};
        const int fine = 12000;
        const double rmax = 6.0, h = rmax / fine;
        std::vector<double> cdf(fine + 1, 0.0);
        for (int i = 0; i < fine; ++i) {
            const double r = (i + 0.5) * h;
            cdf[i + 1] = cdf[i] + h * 2 * M_PI * r * q.exact_radial(x3, r);
        }
        const double inside = cdf[fine];
        for (int b = 1; b < bins; ++b) {
            const double target = inside * b / bins;
            const auto i = std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin();
            // linear interpolation inside the cell
            edges.push_back((i - 1 + (target - cdf[i - 1]) / (cdf[i] - cdf[i - 1])) * h);
        }
        edges.push_back(rmax);
        std::vector<int> counts(bins, 0);
        int kept = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double r = (q.sample_mark(x, rng) / 100.0).norm();
            if (r >= rmax) continue;
            ++kept;
            ++counts[std::upper_bound(edges.begin(), edges.end(), r) - edges.begin() - 1];
        }
        double chi2 = 0.0;
        for (int c : counts) chi2 += std::pow(c - kept / double(bins), 2) / (kept / double(bins));
        const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(bins - 1), chi2));
        EXPECT_GT(p, 1e-3) << "x3 " << x3 << " chi2 " << chi2;
        EXPECT_NEAR(kept / double(n), inside, 5e-3);
    }
    EXPECT_EQ(q.envelope_violations(), 0u);
}

TEST(MarkModel, Gaussian) {
    const MarkModel m = MarkModel::gaussian(0.5, 1);
    const double expected = std::exp(-0.5 * 0.4 * 0.4 / 0.25) / std::sqrt(2 * M_PI * 0.25);
    EXPECT_NEAR(m.density(vec({1.0}), vec({1.4})), expected, 1e-15);
    EXPECT_EQ(m.mark_dim(), 1);
    EXPECT_EQ(MarkModel::none().density(vec({3.0}), Vector(0)), 1.0);
}

TEST(BornWolf, FarFieldSeriesMatchesQuadrature) {
    const BornWolfPsf psf({}, {.enabled = false});
    for (double r : {6.0, 12.0, 50.0, 200.0}) {
        for (double x3 : {0.0, 2.0, 5.0, 10.0}) {
            const double series = psf.exact_radial(x3, r);
            const double quad = psf.exact_radial(x3, r, 4096);
            EXPECT_NEAR(series, quad, 1e-9 * psf.exact_radial(0.0, 0.0)) << r << " " << x3;
        }
    }
}

TEST(SampleMark, FarTailDrawsStayCheap) {
    // the radial tail decays like r^-3, so draws far from the focus do occur
    const auto& q = *shared_psf();
    RandomStream rng(5, 1);
    double far = 0;
    for (int i = 0; i < 200000; ++i) far += (q.sample_mark(coxpf::testing::vec({0.0, 0.0, 1.0}), rng) / 100.0).norm() > 12.0;
    EXPECT_GT(far, 0.0);
}
