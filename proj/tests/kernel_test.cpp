#include <svolterra/kernel.hpp>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace svolterra;

namespace {

// Independent oracle: tanh-sinh handles the integrable endpoint singularity.
// The integrand receives the distance-to-t computed without cancellation:
// near the upper limit Boost supplies hi - s directly.
double quad_lag(const std::function<double(double)>& f_of_lag, double t, double lo, double hi) {
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double mid = 0.5 * (lo + hi);
    return integrator.integrate(
        [&](double s, double sc) { return f_of_lag(s > mid ? (t - hi) + sc : t - s); }, lo, hi);
}

double quad_segment(double gamma, double scale, double t, double lo, double hi) {
    return quad_lag([=](double lag) { return scale * std::pow(lag, -gamma); }, t, lo, hi);
}

}  // namespace

TEST(SingularKernel, RejectsBadParameters) {
    EXPECT_THROW(SingularKernel(1.0), std::domain_error);
    EXPECT_THROW(SingularKernel(-0.1), std::domain_error);
    EXPECT_THROW(SingularKernel(0.5, 0.0), std::domain_error);
    EXPECT_THROW(SingularKernel(0.5, INFINITY), std::domain_error);
    EXPECT_NO_THROW(SingularKernel(0.0));
}

TEST(SegmentIntegral, RegularKernelIsLength) {
    EXPECT_DOUBLE_EQ(segment_integral(SingularKernel(0.0), 1.0, 0.0, 0.25), 0.25);
}

TEST(SegmentIntegral, HandValues) {
    const SingularKernel k(0.5);
    const double far = segment_integral(k, 0.5, 0.0, 0.25);
    EXPECT_NEAR(far, 0.4142136, 5e-8);
    EXPECT_NEAR(far, quad_segment(0.5, 1.0, 0.5, 0.0, 0.25), 1e-10);
    const double touching = segment_integral(k, 0.25, 0.0, 0.25);
    EXPECT_NEAR(touching, 1.0, 1e-15);
    EXPECT_NEAR(touching, quad_segment(0.5, 1.0, 0.25, 0.0, 0.25), 1e-10);
}

TEST(SegmentIntegral, MatchesQuadrature) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double gamma : {0.1, 0.3, 0.5, 0.75, 0.9}) {
        for (int rep = 0; rep < 20; ++rep) {
            const double scale = 0.5 + u(rng);
            const double t = 0.2 + 2.0 * u(rng);
            const double hi = t * u(rng);
            const double lo = hi * u(rng);
            const SingularKernel k(gamma, scale);
            // Strictly away from the singular endpoint: relative accuracy.
            EXPECT_NEAR(segment_integral(k, t, lo, hi) / quad_segment(gamma, scale, t, lo, hi), 1.0, 1e-8);
            // Touching the singular endpoint: absolute accuracy.
            EXPECT_NEAR(segment_integral(k, t, lo, t), quad_segment(gamma, scale, t, lo, t), 1e-8);
        }
    }
}

TEST(SegmentIntegral, DomainErrors) {
    const SingularKernel k(0.5);
    EXPECT_THROW(segment_integral(k, 1.0, 0.5, 0.25), std::domain_error);
    EXPECT_THROW(segment_integral(k, 0.2, 0.0, 0.25), std::domain_error);
}

TEST(DifferenceIntegral, ZeroCases) {
    EXPECT_EQ(difference_integral(SingularKernel(0.0), 0.7, 0.3, 0.0, 0.2), 0.0);
    EXPECT_EQ(difference_integral(SingularKernel(0.4), 0.3, 0.3, 0.0, 0.2), 0.0);
}

TEST(DifferenceIntegral, MatchesQuadrature) {
    const SingularKernel k(0.5);
    const double got = difference_integral(k, 0.5, 0.25, 0.0, 0.25);
    // Integrand as a function of the lag to the anchor 0.25.
    const double oracle =
        quad_lag([](double lag) { return std::pow(lag + 0.25, -0.5) - std::pow(lag, -0.5); }, 0.25, 0.0, 0.25);
    EXPECT_NEAR(got, oracle, 1e-9);
    EXPECT_NEAR(got, -0.5857864, 5e-8);
    EXPECT_THROW(difference_integral(k, 0.2, 0.25, 0.0, 0.25), std::domain_error);
}

TEST(LagWeights, RegularKernelConstant) {
    const auto w = weight_matrix(SingularKernel(0.0), 0.5, 2);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_DOUBLE_EQ(w[0], 0.5);
    EXPECT_DOUBLE_EQ(w[1], 0.5);
}

TEST(LagWeights, SingularValues) {
    const SingularKernel k(0.5);
    const auto w = weight_matrix(k, 0.25, 4);
    EXPECT_NEAR(w[0], 1.0, 1e-15);
    for (std::size_t lag = 0; lag < 4; ++lag) {
        const double t = 0.25 * static_cast<double>(lag + 1);
        EXPECT_NEAR(w[lag], quad_segment(0.5, 1.0, t, 0.0, 0.25), 1e-10);
        if (lag > 0) EXPECT_LT(w[lag], w[lag - 1]);
    }
}

TEST(LagWeights, RowSumsTelescope) {
    const SingularKernel k(0.3, 1.7);
    const double h = 1.0 / 64;
    const auto w = weight_matrix(k, h, 64);
    double sum = 0.0;
    for (std::size_t n = 0; n < 64; ++n) {
        sum += w[n];
        const double t = h * static_cast<double>(n + 1);
        EXPECT_NEAR(sum, segment_integral(k, t, 0.0, t), 1e-13 * (1.0 + sum));
    }
}

TEST(LagWeights, IdentityWithPowerDifferences) {
    for (double gamma : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double h = 1.0 / 128;
        const double p = 1.0 - gamma;
        const auto w = weight_matrix(SingularKernel(gamma), h, 128);
        for (std::size_t lag = 0; lag < 128; ++lag) {
            // Long-double oracle: the double-precision difference cancels badly.
            const long double q = lag + 1.0L;
            const double direct = static_cast<double>(std::pow(q, (long double)p) - std::pow(q - 1.0L, (long double)p));
            EXPECT_NEAR(w[lag] * p / std::pow(h, p), direct, 1e-14 * direct);
        }
    }
}

TEST(LagWeights, PowerDifferenceBound) {
    for (double gamma : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double p = 1.0 - gamma;
        for (int q = 1; q <= 10000; ++q) {
            const double lhs = detail::first_difference(q, p);
            EXPECT_LE(lhs, std::pow(2.0, gamma) * std::pow(q, -gamma)) << "gamma " << gamma << " lag " << q;
        }
    }
}

TEST(CellAverages, MatchQuadrature) {
    const SingularKernel k(0.35, 0.8);
    const double delta = 0.01;
    const auto avg = cell_averages(k, delta, 6);
    const auto dbl = double_cell_averages(k, delta, 6);
    for (std::size_t q = 1; q <= 6; ++q) {
        const double m = 10.0 * delta;
        const double lo = m - static_cast<double>(q) * delta;
        EXPECT_NEAR(avg[q], segment_integral(k, m, lo, lo + delta) / delta, 1e-12 * avg[q]);
        // Double average over s in [0, delta), r in [-q delta, -(q-1) delta).
        // Outer integral over s in [0, delta); the inner one is closed form.
        const double r_hi = -static_cast<double>(q - 1) * delta;
        boost::math::quadrature::tanh_sinh<double> integrator;
        const double inner_oracle = integrator.integrate(
            [&](double s) { return segment_integral(k, s, r_hi - delta, r_hi); }, 0.0, delta);
        EXPECT_NEAR(dbl[q], inner_oracle / (delta * delta), 1e-9 * dbl[q]);
    }
}

TEST(RhoBound, HoldsOnRandomTriples) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const double beta = 0.01 + 0.48 * u(rng);
        const double t = 0.05 + u(rng);
        const double r = t * (0.01 + 0.98 * u(rng));
        const double lhs = quad_lag(
            [&](double lag) {
                const double d = std::pow(lag + (t - r), -beta) - std::pow(lag, -beta);
                return d * d;
            },
            r, 0.0, r);
        const double rhs = 2.0 * beta / ((1.0 - beta) * (1.0 - 2.0 * beta)) * std::pow(t - r, 1.0 - 2.0 * beta);
        EXPECT_LE(lhs, rhs) << "beta " << beta << " r " << r << " t " << t;
    }
}
