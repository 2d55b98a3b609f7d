#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <random>
#include <thread>

#include "gcp/marks.hpp"

using namespace gcp;

namespace {

// Independent inverse-CDF Pareto sampler on std::mt19937_64.
struct ParetoOracle {
    double alpha, scale;
    std::mt19937_64 eng;
    std::uniform_real_distribution<double> U{0.0, 1.0};
    double draw() { return scale * std::pow(1.0 - U(eng), -1.0 / alpha); }
    std::size_t count_in(double t0, double t1) {
        double t = 0;
        std::size_t n = 0;
        for (;;) {
            t += draw();
            if (t > t1) return n;
            if (t >= t0) ++n;
        }
    }
    bool gap(double t, double h) {
        double e = 0;
        while (e < t) e += draw();
        return e > t + h;
    }
};

std::vector<InterarrivalSpec> all_continuous() {
    return {InterarrivalSpec::exponential(1.7), InterarrivalSpec::pareto(0.5, 1.0), InterarrivalSpec::pareto(1.5, 2.0),
            InterarrivalSpec::weibull(0.7, 1.3), InterarrivalSpec::uniform(0.5, 2.0)};
}

} // namespace

TEST(Survival, ClosedForms) {
    EXPECT_NEAR(InterarrivalSpec::exponential(1).scaled(2).survival(1.0), std::exp(-2.0), 1e-15);
    EXPECT_DOUBLE_EQ(InterarrivalSpec::pareto(0.5, 1).survival(4.0), 0.5);
    for (auto s : all_continuous()) EXPECT_EQ(s.survival(0.0), 1.0);
    EXPECT_EQ(InterarrivalSpec::deterministic(3).survival(0.0), 1.0);
    EXPECT_EQ(InterarrivalSpec::deterministic(3).survival(3.0), 0.0);
}

TEST(Survival, DeltaScalingIsPointwise) {
    for (auto s : all_continuous())
        for (double d : {0.25, 1.0, 3.0})
            for (double t : {0.0, 0.1, 0.9, 2.5, 40.0}) EXPECT_DOUBLE_EQ(s.scaled(d).survival(t), s.survival(d * t));
}

TEST(Survival, MonotoneAndVanishing) {
    for (auto s : all_continuous()) {
        double prev = 1.0;
        for (double t = 0; t < 1e4; t = t * 1.3 + 0.01) {
            double v = s.survival(t);
            EXPECT_LE(v, prev);
            prev = v;
        }
        EXPECT_LT(s.survival(1e12), 1e-5);
    }
}

TEST(Survival, ContinuityFlag) {
    for (auto s : all_continuous()) EXPECT_TRUE(s.continuous());
    EXPECT_FALSE(InterarrivalSpec::deterministic(1).continuous());
}

TEST(Sampling, DeterministicTrain) {
    auto m = sample_renewal(InterarrivalSpec::deterministic(2.5), StartPolicy::at_origin(), {0, 10}, derive_stream(1, 0, 0));
    ASSERT_EQ(m.times.size(), 4u);
    EXPECT_DOUBLE_EQ(m.times[0], 2.5);
    EXPECT_DOUBLE_EQ(m.times[1], 5.0);
    EXPECT_DOUBLE_EQ(m.times[2], 7.5);
    EXPECT_DOUBLE_EQ(m.times[3], 10.0);
}

TEST(Sampling, PoissonCountMean) {
    const int N = 3000;
    std::vector<double> c;
    for (int r = 0; r < N; ++r)
        c.push_back(double(sample_renewal(InterarrivalSpec::exponential(1), StartPolicy::at_origin(), {0, 100},
                                          derive_stream(2, 0, std::uint64_t(r)))
                               .size()));
    auto m = stats::moments(c);
    EXPECT_NEAR(m.mean, 100.0, 3 * std::sqrt(100.0 / N));
    EXPECT_NEAR(m.var / m.mean, 1.0, 0.1);
}

TEST(Sampling, ParetoCountMatchesInverseCdfOracle) {
    const int N = 10000;
    auto spec = InterarrivalSpec::pareto(0.5, 1.0);
    std::vector<double> a, b;
    ParetoOracle o{0.5, 1.0, std::mt19937_64(12345)};
    for (int r = 0; r < N; ++r) {
        a.push_back(double(sample_renewal(spec, StartPolicy::at_origin(), {0, 1e4}, derive_stream(3, 0, std::uint64_t(r))).size()));
        b.push_back(double(o.count_in(0, 1e4)));
    }
    auto ma = stats::moments(a), mb = stats::moments(b);
    EXPECT_LT(std::fabs(ma.mean - mb.mean), 3 * std::hypot(ma.se, mb.se));
}

TEST(Sampling, FirstInterarrivalWithinDkwBand) {
    const std::size_t n = 100000;
    const double eps = stats::dkw_epsilon(n, 1e-3);
    for (auto spec : all_continuous()) {
        auto r = derive_stream(4, std::uint64_t(spec.family), 0);
        std::vector<double> xs(n);
        for (auto& x : xs) x = spec.sample(r);
        std::sort(xs.begin(), xs.end());
        double worst = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double F = 1 - spec.survival(xs[i]);
            worst = std::max({worst, std::fabs(double(i + 1) / n - F), std::fabs(double(i) / n - F)});
        }
        EXPECT_LT(worst, eps) << family_name(spec.family);
    }
}

TEST(Sampling, PoissonCountsOnDisjointIntervalsIndependent) {
    std::vector<std::vector<double>> table(4, std::vector<double>(4, 0.0));
    for (int r = 0; r < 20000; ++r) {
        auto m = sample_renewal(InterarrivalSpec::exponential(1.5), StartPolicy::at_origin(), {0, 2},
                                derive_stream(5, 0, std::uint64_t(r)));
        auto a = std::min<std::size_t>(3, m.count_in(0, 1));
        auto b = std::min<std::size_t>(3, m.count_in(1.0000001, 2));
        table[a][b] += 1;
    }
    EXPECT_GT(stats::chi_square_independence(table).p_value, 0.01);
}

TEST(Sampling, WindowInvariantsAndErrors) {
    auto m = sample_renewal(InterarrivalSpec::uniform(0, 1), StartPolicy::delayed(-5), {2, 30}, derive_stream(6, 0, 0));
    EXPECT_TRUE(m.valid());
    EXPECT_THROW(sample_renewal(InterarrivalSpec::exponential(1), StartPolicy::at_origin(), {3, 1}, derive_stream(1, 0, 0)),
                 gcp::error);
    try {
        sample_renewal(InterarrivalSpec::pareto(0.5), StartPolicy::stationary(), {0, 1}, derive_stream(1, 0, 0));
        FAIL();
    } catch (const gcp::error& e) {
        EXPECT_EQ(e.code(), errc::stationary_with_infinite_mean);
    }
}

TEST(Sampling, StationaryStartHasLinearMeanCount) {
    // For a stationary renewal process E N[0, T] = T / mean exactly.
    for (auto spec : {InterarrivalSpec::weibull(0.6, 1.0), InterarrivalSpec::uniform(0.5, 2.0), InterarrivalSpec::pareto(2.5, 1.0)}) {
        const int N = 20000;
        const double T = 3.0;
        std::vector<double> c;
        for (int r = 0; r < N; ++r)
            c.push_back(double(sample_renewal(spec, StartPolicy::stationary(), {0, T}, derive_stream(7, 0, std::uint64_t(r))).size()));
        auto m = stats::moments(c);
        EXPECT_NEAR(m.mean, T / spec.mean(), 4 * m.se) << family_name(spec.family);
    }
}

TEST(Sampling, CursorMatchesEagerSampling) {
    auto spec = InterarrivalSpec::pareto(0.7, 0.3);
    auto eager = sample_renewal(spec, StartPolicy::at_origin(), {0, 500}, derive_stream(8, 1, 2));
    RenewalCursor cur(spec, StartPolicy::at_origin(), 0, derive_stream(8, 1, 2));
    for (double t : eager.times) EXPECT_EQ(cur.next(), t);
    EXPECT_GT(cur.next(), 500);
}

TEST(Sampling, IdenticalAcrossThreads) {
    auto spec = InterarrivalSpec::weibull(0.8, 2.0);
    std::vector<MarkTrain> serial(64), par(64);
    for (int r = 0; r < 64; ++r) serial[std::size_t(r)] = sample_renewal(spec, StartPolicy::at_origin(), {0, 200}, derive_stream(9, 0, std::uint64_t(r)));
    std::vector<std::thread> ts;
    for (int k = 0; k < 4; ++k)
        ts.emplace_back([&, k] {
            for (int r = k; r < 64; r += 4)
                par[std::size_t(r)] = sample_renewal(spec, StartPolicy::at_origin(), {0, 200}, derive_stream(9, 0, std::uint64_t(r)));
        });
    for (auto& t : ts) t.join();
    for (int r = 0; r < 64; ++r) EXPECT_EQ(serial[std::size_t(r)].times, par[std::size_t(r)].times);
}

TEST(Overshoot, Examples) {
    MarkTrain m{{1, 3}, {0, 10}};
    EXPECT_DOUBLE_EQ(overshoot(m, 1.5), 1.5);
    EXPECT_DOUBLE_EQ(overshoot(m, 3), 0.0);
    EXPECT_TRUE(std::isinf(overshoot(MarkTrain{{}, {0, 10}}, 0)));
}

TEST(RenewalFunction, PoissonIncrements) {
    auto rows = estimate_renewal_function(InterarrivalSpec::exponential(1), {0, 1, 10}, 0.5, 20000, 10);
    for (const auto& r : rows) EXPECT_TRUE(r.ci.contains(0.5)) << r.t << " " << r.estimate;
}

TEST(RenewalFunction, DeterministicGapIsEmpty) {
    auto rows = estimate_renewal_function(InterarrivalSpec::deterministic(1), {0.25}, 0.5, 100, 11);
    EXPECT_EQ(rows[0].estimate, 0.0);
}

TEST(RenewalFunction, UniformApproachesInverseMean) {
    auto rows = estimate_renewal_function(InterarrivalSpec::uniform(0, 2), {60.0}, 1.0, 20000, 12);
    EXPECT_TRUE(rows[0].ci.contains(1.0)) << rows[0].estimate;
}

TEST(GapProbability, Examples) {
    auto e = gap_probability(InterarrivalSpec::exponential(1), StartPolicy::at_origin(), 5, 3, 40000, 13);
    EXPECT_TRUE(e.estimate.ci.contains(std::exp(-3.0)));
    auto d = gap_probability(InterarrivalSpec::deterministic(1), StartPolicy::at_origin(), 0, 1.5, 1000, 13);
    EXPECT_EQ(d.estimate.value, 0.0);

    const int N = 20000;
    auto p = gap_probability(InterarrivalSpec::pareto(0.5), StartPolicy::at_origin(), 100, 10, N, 14);
    ParetoOracle o{0.5, 1.0, std::mt19937_64(777)};
    int k = 0;
    for (int r = 0; r < N; ++r) k += o.gap(100, 10) ? 1 : 0;
    double q = double(k) / N;
    double sd = std::sqrt(p.estimate.value * (1 - p.estimate.value) / N + q * (1 - q) / N);
    EXPECT_LT(std::fabs(p.estimate.value - q), 3 * sd);
}

TEST(GapProbability, ExponentialIsTimeInvariant) {
    auto a = gap_probability(InterarrivalSpec::exponential(1), StartPolicy::at_origin(), 0, 1, 20000, 15);
    auto b = gap_probability(InterarrivalSpec::exponential(1), StartPolicy::at_origin(), 10, 1, 20000, 16);
    EXPECT_TRUE(a.estimate.ci.overlaps(b.estimate.ci));
}

TEST(GapProbability, AnalyticBoundDominates) {
    for (double h : {0.5, 2.0, 5.0}) {
        auto e = gap_probability(InterarrivalSpec::exponential(1), StartPolicy::at_origin(), 3, h, 100, 17);
        ASSERT_TRUE(e.analytic_bound);
        EXPECT_GE(*e.analytic_bound, std::exp(-h));
    }
    for (double h : {0.5, 1.0, 1.5}) {
        auto spec = InterarrivalSpec::uniform(0.2, 2.0);
        auto b = gap_probability_bound(spec, h);
        ASSERT_TRUE(b);
        for (double t : {0.0, 1.0, 4.0, 9.0}) {
            auto e = gap_probability(spec, StartPolicy::at_origin(), t, h, 20000, 18);
            EXPECT_GE(*b, e.estimate.ci.lo);
        }
    }
    EXPECT_FALSE(gap_probability_bound(InterarrivalSpec::pareto(0.5), 10));
}

TEST(TailIntegral, MatchesQuadrature) {
    using boost::math::quadrature::exp_sinh;
    exp_sinh<double> q;
    for (auto spec : {InterarrivalSpec::exponential(0.7), InterarrivalSpec::pareto(2.5, 1.5), InterarrivalSpec::weibull(0.6, 2.0)})
        for (double h : {0.3, 4.0}) {
            double ref = q.integrate([&](double x) { return spec.scaled(1.3).survival(h + x); });
            EXPECT_NEAR(spec.scaled(1.3).tail_integral(h), ref, 1e-6 * std::max(1.0, ref)) << family_name(spec.family);
        }
}

TEST(W0, ExponentialMatchesClosedForm) {
    W0Options o;
    o.replicas = 20000;
    auto r = compute_w0(InterarrivalSpec::exponential(1), 0.1, o);
    double exact = -std::log(0.9);
    EXPECT_LE(r.w0, exact);
    EXPECT_GE(r.w0, 0.85 * exact);
    EXPECT_EQ(r.t_grid.size(), 64u);
    EXPECT_LE(r.sup_hit_upper, 0.1);
}

TEST(H0, ExponentialMatchesClosedForm) {
    W0Options o;
    o.replicas = 20000;
    auto r = compute_h0(InterarrivalSpec::exponential(1), 0.1, o);
    double exact = std::log(10.0);
    EXPECT_GE(r.h0, exact);
    EXPECT_LE(r.h0, 1.15 * exact);
    EXPECT_LE(r.sup_gap_upper, 0.1);
}

TEST(H0, UniformNeedsAtMostTheSupport) {
    W0Options o;
    o.replicas = 5000;
    // a Uniform(1,2) renewal has no gap longer than 2
    auto r = compute_h0(InterarrivalSpec::uniform(1, 2), 0.05, o);
    EXPECT_LE(r.h0, 2.0 * std::pow(2.0, 1.0 / 16));
    try {
        compute_h0(InterarrivalSpec::pareto(0.5), 0.1, o);
        FAIL();
    } catch (const gcp::error& e) {
        EXPECT_EQ(e.code(), errc::invalid_argument);
    }
}

TEST(W0, VacuousEpsilonReturnsGridMax) {
    W0Options o;
    o.replicas = 500;
    auto r = compute_w0(InterarrivalSpec::exponential(1), 1.0, o);
    EXPECT_DOUBLE_EQ(r.w0, r.w_grid.back());
}

TEST(W0, ContinuityRequired) {
    try {
        compute_w0(InterarrivalSpec::deterministic(1), 0.1);
        FAIL();
    } catch (const gcp::error& e) {
        EXPECT_EQ(e.code(), errc::continuity_required);
    }
}

TEST(W0, ParetoConsistentWithRenewalIncrements) {
    W0Options o;
    o.replicas = 4000;
    auto spec = InterarrivalSpec::pareto(0.5);
    const double eps = 0.25 * 0.5;
    auto r = compute_w0(spec, eps, o);
    ASSERT_GT(r.w0, 0.0);
    // P(hit (t, t+w]) <= U(t+w) - U(t): the increments at w0 must be at least the
    // hit probability bound, and at a much larger w they must exceed eps.
    auto inc = estimate_renewal_function(spec, r.t_grid, r.w0, 4000, 99);
    double sup_inc = 0;
    for (const auto& row : inc) sup_inc = std::max(sup_inc, row.ci.hi);
    EXPECT_GE(sup_inc + 1e-12, r.sup_hit_upper - 0.05);
    auto inc_big = estimate_renewal_function(spec, {0.0}, 16 * r.w0 + 1, 4000, 98);
    EXPECT_GT(inc_big[0].estimate, eps);
}

TEST(Conditions, ParetoHalf) {
    ConditionOptions o;
    o.empirical_g = false;
    auto rep = check_conditions(InterarrivalSpec::pareto(0.5), o);
    EXPECT_TRUE(rep.condABC.C.holds());
    EXPECT_LE(rep.condABC.eps3, 0.5);
    EXPECT_GT(rep.condABC.eps3, 0.0);
    EXPECT_EQ(rep.condM.holds.kind, TriState::Kind::AnalyticNo);
    EXPECT_TRUE(rep.condABC.A.holds());
    EXPECT_TRUE(rep.condABC.B.holds());
}

TEST(Conditions, ParetoConstantsSatisfyDefinitions) {
    // Check A), B), C) numerically on a grid with the reported constants.
    for (double al : {0.3, 0.5, 0.8})
        for (double sc : {1.0, 2.0}) {
            auto spec = InterarrivalSpec::pareto(al, sc);
            ConditionOptions o;
            o.empirical_g = false;
            auto c = check_conditions(spec, o).condABC;
            for (double t = std::max(c.t1, 1.0) * 1.01; t < 1e8; t *= 1.7) {
                double first_moment = al * std::pow(sc, al) * (std::pow(t, 1 - al) - std::pow(sc, 1 - al)) / (1 - al);
                double mass = spec.survival(t) - spec.survival(c.M1 * t);
                EXPECT_LT(c.eps1 * first_moment, t * mass);
            }
            for (double r = c.r2 + 0.5; r < 30; r += 1.0) {
                auto mu = [&](double a, double b) { return spec.survival(a) - spec.survival(b); };
                double M = c.M2;
                EXPECT_LE(c.eps2 * mu(std::pow(M, r), std::pow(M, r + 1)), mu(std::pow(M, r + 1), std::pow(M, r + 2)) * (1 + 1e-12));
            }
            for (double t = c.M3; t < 1e9; t *= 2.3) {
                EXPECT_LE(std::pow(t, -(1 - c.eps3)), spec.survival(t) * (1 + 1e-12));
                EXPECT_LE(spec.survival(t), std::pow(t, -c.eps3) * (1 + 1e-12));
            }
        }
}

TEST(Conditions, ExponentialMomentIntegral) {
    ConditionOptions o;
    o.d = 2;
    auto rep = check_conditions(InterarrivalSpec::exponential(1), o);
    EXPECT_EQ(rep.condM.holds.kind, TriState::Kind::AnalyticYes);
    EXPECT_GT(rep.condM.theta, std::sqrt(8 * std::log(2.0) * 2));
    using boost::math::quadrature::exp_sinh;
    exp_sinh<double> q;
    double th = rep.condM.theta;
    double ref = q.integrate([&](double y) {
        double x = 1 + y;
        return x * std::exp(th * std::sqrt(std::log(x))) * std::exp(-x);
    });
    EXPECT_NEAR(rep.condM.integral, ref, 1e-7 * ref);
    EXPECT_EQ(rep.condG.holds.kind, TriState::Kind::AnalyticNo);
}

TEST(Conditions, EmpiricalGapConditionForPareto) {
    ConditionOptions o;
    o.replicas = 4000;
    o.log2_t_min = 10;
    o.log2_t_max = 16;
    o.eps_step = 0.02;
    auto rep = check_conditions(InterarrivalSpec::pareto(0.5), o);
    EXPECT_EQ(rep.condG.holds.kind, TriState::Kind::Empirical);
    EXPECT_TRUE(rep.condG.holds.empirical_holds);
    EXPECT_GT(rep.condG.epsilon4, 0.0);
    // Renewal-theory heuristic: the hit probability scales like t^(eps - 1/2), so no
    // eps well above 1/4 can pass.
    EXPECT_LT(rep.condG.epsilon4, 0.32);
    EXPECT_LE(rep.condG.holds.ci.hi, -rep.condG.epsilon4);
}
