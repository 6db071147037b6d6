#include <svolterra/brownian.hpp>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace svolterra;

TEST(GeneratePath, Deterministic) {
    const auto a = generate_path(42, 3, 256, 2, 1.0);
    const auto b = generate_path(42, 3, 256, 2, 1.0);
    EXPECT_EQ(a.increments(), b.increments());
    const auto c = generate_path(42, 4, 256, 2, 1.0);
    EXPECT_NE(a.increments(), c.increments());
    const auto d = generate_path(43, 3, 256, 2, 1.0);
    EXPECT_NE(a.increments(), d.increments());
}

TEST(GeneratePath, RejectsBadArguments) {
    EXPECT_THROW(generate_path(1, 0, 12, 1, 1.0), std::invalid_argument);
    EXPECT_THROW(generate_path(1, 0, 0, 1, 1.0), std::invalid_argument);
    EXPECT_THROW(generate_path(1, 0, 8, 0, 1.0), std::invalid_argument);
    EXPECT_THROW(generate_path(1, 0, 8, 1, 0.0), std::invalid_argument);
}

TEST(GeneratePath, SampleMean) {
    const std::size_t n = std::size_t{1} << 20;
    const auto p = generate_path(20240601, 0, n, 1, 1.0);
    double sum = 0.0;
    for (double v : p.increments()) sum += v;
    const double mean = sum / static_cast<double>(n);
    const double se = std::sqrt(1.0 / static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
    EXPECT_LT(std::abs(mean), 4.0 * se);
}

TEST(GeneratePath, SampleVarianceUnitStep) {
    // 10^6 independent single-step paths, each increment ~ N(0, 1).
    const std::size_t m = 1000000;
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double v = generate_path(777, i, 1, 1, 1.0)(0, 0);
        s += v;
        s2 += v * v;
    }
    const double mean = s / m;
    const double var = (s2 - m * mean * mean) / (m - 1);
    EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(GeneratePath, KolmogorovSmirnov) {
    const std::size_t n = std::size_t{1} << 17;
    const auto p = generate_path(99, 5, n, 1, 2.0);
    std::vector<double> z(100000);
    const double sd = std::sqrt(2.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = p(0, i) / sd;
    std::sort(z.begin(), z.end());
    const boost::math::normal_distribution<double> nd;
    double d = 0.0;
    const double m = static_cast<double>(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double f = boost::math::cdf(nd, z[i]);
        d = std::max({d, (i + 1) / m - f, f - i / m});
    }
    // Asymptotic 0.1% critical value of the KS statistic.
    EXPECT_LT(d, 1.9495 / std::sqrt(m));
}

TEST(GeneratePath, ComponentsIndependentStreams) {
    const auto p = generate_path(11, 0, 8, 2, 1.0);
    EXPECT_EQ(p.component(0).size(), 8u);
    EXPECT_NE(p(0, 0), p(1, 0));
}

TEST(Coarsen, HandExample) {
    const BrownianPath p(1.0, 4, 1, {0.1, -0.2, 0.3, 0.05});
    const auto c = coarsen(p, 2);
    ASSERT_EQ(c.n_steps(), 2u);
    EXPECT_DOUBLE_EQ(c(0, 0), -0.1);
    EXPECT_DOUBLE_EQ(c(0, 1), 0.35);
    EXPECT_DOUBLE_EQ(c.horizon(), 1.0);
}

TEST(Coarsen, IdentityFactor) {
    const auto p = generate_path(1, 2, 16, 2, 1.0);
    EXPECT_EQ(coarsen(p, 1).increments(), p.increments());
}

TEST(Coarsen, NestedIsBitExact) {
    const auto p = generate_path(5, 1, 1024, 2, 1.0);
    EXPECT_EQ(coarsen(coarsen(p, 2), 2).increments(), coarsen(p, 4).increments());
    EXPECT_EQ(coarsen(coarsen(p, 4), 8).increments(), coarsen(p, 32).increments());
    EXPECT_EQ(coarsen(coarsen(coarsen(p, 2), 16), 4).increments(), coarsen(p, 128).increments());
}

TEST(Coarsen, NonPowerOfTwoLeftToRight) {
    const BrownianPath p(1.0, 6, 1, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    const auto c = coarsen(p, 3);
    EXPECT_EQ(c(0, 0), (0.1 + 0.2) + 0.3);
    EXPECT_EQ(c(0, 1), (0.4 + 0.5) + 0.6);
    EXPECT_THROW(coarsen(p, 4), std::invalid_argument);
    EXPECT_THROW(coarsen(p, 0), std::invalid_argument);
}

TEST(PartialSums, HandExample) {
    const BrownianPath p(1.0, 2, 1, {0.5, -0.5});
    EXPECT_EQ(partial_sums(p), (std::vector<double>{0.0, 0.5, 0.0}));
}

TEST(PartialSums, EmptyPath) {
    const BrownianPath p(1.0, 0, 1, {});
    EXPECT_EQ(partial_sums(p), std::vector<double>{0.0});
}

TEST(PartialSums, DifferencesRecoverIncrements) {
    const auto p = generate_path(8, 0, 64, 1, 1.0);
    const auto w = partial_sums(p);
    // Differences of a running sum equal the increments up to one rounding
    // of the accumulator; the sums themselves are exact prefix sums.
    double acc = 0.0;
    for (std::size_t k = 0; k < 64; ++k) {
        acc += p(0, k);
        EXPECT_EQ(w[k + 1], acc);
        EXPECT_NEAR(w[k + 1] - w[k], p(0, k), 1e-15);
    }
    EXPECT_EQ(terminal_values(p)[0], w[64]);
}

TEST(PathIo, RoundTripAndLayout) {
    const auto p = generate_path(0x0102030405060708ULL, 9, 8, 2, 0.5);
    std::stringstream ss;
    write_path(ss, p);
    const std::string bytes = ss.str();
    ASSERT_EQ(bytes.size(), 5 * 8 + 16 * 8u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x08);  // little-endian seed
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 9);     // path index
    const auto q = read_path(ss);
    EXPECT_EQ(q.seed(), p.seed());
    EXPECT_EQ(q.path_index(), 9u);
    EXPECT_EQ(q.n_steps(), 8u);
    EXPECT_EQ(q.dim_noise(), 2u);
    EXPECT_EQ(q.horizon(), 0.5);
    EXPECT_EQ(q.increments(), p.increments());
}

TEST(PathIo, TruncatedInput) {
    std::stringstream ss("short");
    EXPECT_THROW(read_path(ss), std::runtime_error);
}
