#include <svolterra/special_functions.hpp>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace svolterra;

namespace {

// Series oracle in long double with Boost's lgamma, independent of the
// library's compensated summation. Runs until the terms are past their peak
// (near k = x^{1/a} / a) and negligible.
double ml_series_oracle(double a, double x) {
    long double sum = 0.0L;
    const long double lx = std::log(std::abs(static_cast<long double>(x)));
    for (int k = 0; k < 200000; ++k) {
        const long double ak1 = static_cast<long double>(a) * k + 1.0L;
        long double term = k == 0 ? 1.0L : std::exp(k * lx - boost::math::lgamma(ak1));
        if (x < 0 && k % 2 == 1) term = -term;
        sum += term;
        if (k > 10 && ak1 > 2.0L && std::abs(term) < 1e-22L * std::abs(sum) &&
            k * lx < boost::math::lgamma(ak1))
            break;
    }
    return static_cast<double>(sum);
}

// Largest x^{1/a} for which E_a(x) is comfortably inside double range.
bool in_double_range(double a, double x) { return std::pow(x, 1.0 / a) < 600.0; }

}  // namespace

TEST(Gamma, ClassicalValues) {
    EXPECT_EQ(gamma_fn(1.0), 1.0);
    EXPECT_EQ(gamma_fn(5.0), 24.0);
    EXPECT_NEAR(gamma_fn(0.5) / std::sqrt(std::numbers::pi), 1.0, 1e-12);
}

TEST(Gamma, Recurrence) {
    for (int i = 1; i <= 100; ++i) {
        const double x = 0.1 * i;
        EXPECT_NEAR(gamma_fn(x + 1.0) / (x * gamma_fn(x)), 1.0, 1e-12) << x;
    }
}

TEST(Gamma, MatchesBoost) {
    for (double x : {0.01, 0.3, 0.77, 1.5, 3.25, 12.4, 40.5, 150.2}) {
        EXPECT_NEAR(gamma_fn(x) / boost::math::tgamma(x), 1.0, 1e-13) << x;
    }
}

TEST(Gamma, RejectsNonPositive) {
    EXPECT_THROW(gamma_fn(0.0), std::domain_error);
    EXPECT_THROW(gamma_fn(-1.5), std::domain_error);
}

TEST(MittagLeffler, ZeroArgument) {
    for (double a : {0.1, 0.5, 1.0, 2.0}) EXPECT_EQ(mittag_leffler(a, 0.0), 1.0);
}

TEST(MittagLeffler, ExponentialCase) {
    EXPECT_NEAR(mittag_leffler(1.0, 1.0), std::numbers::e, 1e-12 * std::numbers::e);
    for (double x = -5.0; x <= 5.0; x += 0.25) {
        EXPECT_NEAR(mittag_leffler(1.0, x) / std::exp(x), 1.0, 1e-10) << x;
    }
}

TEST(MittagLeffler, HalfOrderErfcIdentity) {
    // E_{1/2}(z) = exp(z^2) erfc(-z)
    EXPECT_NEAR(mittag_leffler(0.5, 1.0), std::exp(1.0) * std::erfc(-1.0), 1e-8);
    EXPECT_NEAR(mittag_leffler(0.5, 1.0), 5.0089800808, 1e-9);
    for (double z : {-2.0, -0.5, 0.3, 2.0, 3.5}) {
        const double oracle = std::exp(z * z) * std::erfc(-z);
        EXPECT_NEAR(mittag_leffler(0.5, z) / oracle, 1.0, 1e-9) << z;
    }
}

TEST(MittagLeffler, MatchesSeriesOracle) {
    for (double a : {0.25, 0.5, 0.75, 0.9}) {
        for (double x : {0.5, 3.5449077, 10.0, 30.0, 50.0}) {
            if (!in_double_range(a, x)) continue;
            EXPECT_NEAR(mittag_leffler(a, x) / ml_series_oracle(a, x), 1.0, 1e-11) << a << " " << x;
        }
    }
}

TEST(MittagLeffler, MonotoneOnPositiveAxis) {
    double prev = 1.0;
    for (double x = 0.1; x <= 50.0; x += 0.1) {
        const double v = mittag_leffler(0.6, x);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(MittagLeffler, LogFormAgrees) {
    for (double a : {0.3, 0.5, 1.0}) {
        for (double x : {0.0, 1.0, 20.0, 45.0}) {
            if (!in_double_range(a, x)) continue;
            EXPECT_NEAR(log_mittag_leffler(a, x), std::log(mittag_leffler(a, x)), 1e-11 * (1.0 + x));
        }
    }
    // Either side of the switch to the exponential asymptotic.
    for (double a : {0.25, 0.5, 0.9}) {
        for (double z : {45.0, 49.9, 50.1, 60.0, 200.0}) {
            const double x = std::pow(z, a);
            EXPECT_NEAR(log_mittag_leffler(a, x), std::log(ml_series_oracle(a, x)), 1e-12 * z) << a << " " << z;
        }
    }
    // Far beyond double range the log form still answers.
    EXPECT_TRUE(std::isfinite(log_mittag_leffler(0.25, 1e3)));
    EXPECT_THROW(mittag_leffler(0.25, 1e3), std::overflow_error);
}

TEST(GronwallDiscrete, TrivialCases) {
    GronwallInput inp;
    inp.gamma_exp = 0.5;
    inp.b_const = 1.0;
    inp.pi_seq = {3.0, 3.0};
    EXPECT_EQ(gronwall_discrete_bound(inp, 0), 3.0);
    inp.b_const = 1e-300;
    EXPECT_NEAR(gronwall_discrete_bound(inp, 1), 3.0, 1e-12);
}

TEST(GronwallDiscrete, SeriesOracleValue) {
    GronwallInput inp;
    inp.gamma_exp = 0.5;
    inp.b_const = 1.0;
    inp.pi_seq.assign(5, 1.0);
    const double arg = std::sqrt(std::numbers::pi) * 2.0;
    EXPECT_NEAR(arg, 3.5449077, 1e-7);
    EXPECT_NEAR(gronwall_discrete_bound(inp, 4) / ml_series_oracle(0.5, arg), 1.0, 1e-12);
}

TEST(GronwallDiscrete, Validation) {
    GronwallInput inp;
    inp.pi_seq = {1.0};
    inp.gamma_exp = 1.0;
    EXPECT_THROW(gronwall_discrete_bound(inp, 0), std::domain_error);
    inp.gamma_exp = 0.5;
    inp.b_const = -1.0;
    EXPECT_THROW(gronwall_discrete_bound(inp, 0), std::domain_error);
    inp.b_const = 1.0;
    EXPECT_THROW(gronwall_discrete_bound(inp, 3), std::out_of_range);
}

// H_n built with equality must sit below the bound for every n.
TEST(GronwallDiscrete, EqualitySequenceBelowBound) {
    for (double gamma : {0.25, 0.5, 0.75}) {
        for (double b : {0.5, 1.0, 2.0}) {
            GronwallInput inp;
            inp.gamma_exp = gamma;
            inp.b_const = b;
            inp.pi_seq.assign(257, 1.0);
            // log H_n, accumulated by log-sum-exp: H itself leaves any float range.
            std::vector<long double> logH(257);
            for (std::size_t n = 0; n <= 256; ++n) {
                long double peak = 0.0L;
                for (std::size_t l = 0; l < n; ++l) peak = std::max(peak, logH[l]);
                long double s = 0.0L;
                for (std::size_t l = 0; l < n; ++l) {
                    s += std::exp(logH[l] - peak - gamma * std::log(static_cast<long double>(n - l)));
                }
                // log(1 + b s e^peak)
                logH[n] = n == 0 ? 0.0L : peak + std::log(std::exp(-peak) + b * s);
                const double log_bound = log_gronwall_discrete_bound(inp, n);
                EXPECT_LE(static_cast<double>(logH[n]), log_bound + 1e-12 * (1.0 + std::abs(log_bound)))
                    << "gamma " << gamma << " b " << b << " n " << n;
            }
        }
    }
}

TEST(GronwallContinuous, TrivialCases) {
    GronwallInput inp;
    inp.gamma_exp = 0.3;
    inp.b_const = 2.0;
    inp.g_fn = [](double t) { return 1.0 + t; };
    EXPECT_EQ(gronwall_continuous_bound(inp, 0.0), 1.0);
    inp.b_const = 0.0;
    EXPECT_EQ(gronwall_continuous_bound(inp, 0.7), 1.7);
}

TEST(GronwallContinuous, SeriesOracleValue) {
    GronwallInput inp;
    inp.gamma_exp = 0.5;
    inp.b_const = 1.0;
    inp.g_fn = [](double) { return 1.0; };
    EXPECT_NEAR(gronwall_continuous_bound(inp, 1.0) / ml_series_oracle(0.5, std::sqrt(std::numbers::pi)), 1.0, 1e-12);
}

TEST(GronwallContinuous, LogFormAgrees) {
    GronwallInput inp;
    inp.gamma_exp = 0.4;
    inp.b_const = 1.5;
    inp.g_fn = [](double t) { return 1.0 + t; };
    for (double t : {0.0, 0.3, 1.0, 4.0}) {
        EXPECT_NEAR(log_gronwall_continuous_bound(inp, t), std::log(gronwall_continuous_bound(inp, t)), 1e-12 * (1 + t));
    }
    inp.b_const = 40.0;
    EXPECT_THROW(gronwall_continuous_bound(inp, 100.0), std::overflow_error);
    EXPECT_TRUE(std::isfinite(log_gronwall_continuous_bound(inp, 100.0)));
}

// Product integration with H frozen at the left node of each cell. H is
// increasing, so this under-approximates the solution of the equality case,
// which the lemma bounds from above.
TEST(GronwallContinuous, EqualitySolutionBelowBound) {
    const std::size_t n = 1024;
    for (double gamma : {0.25, 0.5, 0.75}) {
        for (double b : {0.5, 1.0, 2.0}) {
            GronwallInput inp;
            inp.gamma_exp = gamma;
            inp.b_const = b;
            inp.g_fn = [](double) { return 1.0; };
            const double h = 1.0 / n;
            const double p = 1.0 - gamma;
            std::vector<double> w(n), H(n + 1);
            for (std::size_t q = 0; q < n; ++q) {
                w[q] = std::pow(h, p) / p * (std::pow(q + 1.0, p) - std::pow(static_cast<double>(q), p));
            }
            H[0] = 1.0;
            for (std::size_t k = 1; k <= n; ++k) {
                double s = 0.0;
                for (std::size_t i = 0; i < k; ++i) s += w[k - 1 - i] * H[i];
                H[k] = 1.0 + b * s;
                // Past double range the bound is +inf in effect and holds trivially.
                if (!in_double_range(p, std::tgamma(p) * b * std::pow(k * h, p))) break;
                EXPECT_LE(H[k], gronwall_continuous_bound(inp, k * h) * (1.0 + 1e-12))
                    << "gamma " << gamma << " b " << b << " node " << k;
            }
        }
    }
}
