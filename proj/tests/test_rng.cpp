#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "gcp/rng.hpp"
#include "gcp/stats.hpp"

using namespace gcp;

TEST(Rng, SameAddressSameDraws) {
    auto a = derive_stream(42, obj::id(obj::cure, 7), 3);
    auto b = derive_stream(42, obj::id(obj::cure, 7), 3);
    for (int i = 0; i < 1000000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, AdjacentReplicasUncorrelated) {
    auto a = derive_stream(42, 5, 0);
    auto b = derive_stream(42, 5, 1);
    const int n = 1000000;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x[std::size_t(i)] = a.uniform();
        y[std::size_t(i)] = b.uniform();
    }
    EXPECT_LT(std::fabs(stats::correlation(x, y)), 0.01);
}

TEST(Rng, StreamKeysInjective) {
    std::set<StreamKey> keys;
    std::set<std::uint64_t> first;
    for (std::uint64_t obj = 0; obj < 100; ++obj)
        for (std::uint64_t rep = 0; rep < 100; ++rep) {
            keys.insert(stream_key(9, obj, rep));
            first.insert(derive_stream(9, obj, rep)());
        }
    EXPECT_EQ(keys.size(), 10000u);
    EXPECT_EQ(first.size(), 10000u);
}

TEST(Rng, KeyRangeChecked) {
    EXPECT_THROW(stream_key(1, 1ULL << 32, 0), gcp::error);
    EXPECT_THROW(obj::id(obj::cure, 1ULL << 28), gcp::error);
}

TEST(Rng, UniformRangeAndMoments) {
    auto r = derive_stream(1, 2, 3);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
        s2 += u * u;
    }
    EXPECT_NEAR(s / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(s2 / n, 1.0 / 3, 0.005);
}

TEST(Rng, ExponentialAndGammaMeans) {
    auto r = derive_stream(11, 0, 0);
    const int n = 200000;
    double se = 0, sg = 0, sg2 = 0;
    for (int i = 0; i < n; ++i) {
        se += r.exponential(2.0);
        double g = r.gamma(2.5);
        sg += g;
        sg2 += g * g;
    }
    EXPECT_NEAR(se / n, 0.5, 4 * 0.5 / std::sqrt(n));
    double mg = sg / n, vg = sg2 / n - mg * mg;
    EXPECT_NEAR(mg, 2.5, 4 * std::sqrt(2.5 / n));
    EXPECT_NEAR(vg, 2.5, 0.1);
    double sm = 0;
    for (int i = 0; i < n; ++i) sm += r.gamma(0.4);
    EXPECT_NEAR(sm / n, 0.4, 4 * std::sqrt(0.4 / n));
}

TEST(Rng, BelowIsUnbiased) {
    auto r = derive_stream(5, 0, 0);
    std::vector<double> obs(7, 0.0), exp(7, 70000.0 / 7);
    for (int i = 0; i < 70000; ++i) obs[r.below(7)] += 1;
    EXPECT_GT(stats::chi_square(obs, exp).p_value, 1e-3);
}

TEST(Rng, PoissonMean) {
    auto r = derive_stream(5, 1, 0);
    for (double m : {0.5, 4.0, 50.0}) {
        double s = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) s += double(r.poisson(m));
        EXPECT_NEAR(s / n, m, 4 * std::sqrt(m / n));
    }
}
