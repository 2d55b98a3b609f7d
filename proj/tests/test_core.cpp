#include <gtest/gtest.h>

#include <random>

#include "gcp/dynamics.hpp"
#include "gcp/stats.hpp"
#include "oracles.hpp"

using namespace gcp;

namespace {

SpatialBox line(int n) { return SpatialBox::cube(1, 0, n - 1); }

GcpModel classical(double lambda) {
    GcpModel m;
    m.edge = InterarrivalSpec::exponential(lambda);
    m.site = InterarrivalSpec::exponential(1.0);
    return m;
}

std::set<Site> as_set(const std::vector<Site>& v) { return {v.begin(), v.end()}; }

} // namespace

TEST(Build, CpdeFullyOpenEnvironment) {
    CpdeModel m{3.0, 1.0, 1.0, 0.0};
    auto real = build_realization(m, SpatialBox::cube(2, 0, 3), {0, 20}, 5, 0);
    real.region().for_each_edge([&](const Edge& e, std::size_t) {
        const auto& env = real.env(e);
        ASSERT_EQ(env.open_intervals.size(), 1u);
        EXPECT_EQ(env.open_intervals[0], (Interval{0, 20}));
    });
}

TEST(Build, CpdeClosedEnvironmentBlocksEverything) {
    CpdeModel m{3.0, 0.0, 2.0, 0.0};
    auto real = build_realization(m, line(6), {0, 20}, 5, 0);
    for (const auto& e : real.timeline()) EXPECT_EQ(e.kind, EventKind::Cure);
    EXPECT_EQ(evolve(real, {Site{0}}, 20).log.size() <= 1, true);
}

TEST(Build, ClassicalCountsArePoisson) {
    const double lambda = 1.7, T = 10;
    std::vector<double> tc, cc;
    for (std::uint64_t r = 0; r < 200; ++r) {
        auto real = build_realization(classical(lambda), line(10), {0, T}, 11, r);
        for (std::size_t s = 0; s < real.region().edge_slots(); ++s)
            if (real.region().slot_valid(s)) tc.push_back(double(real.trans(s).size()));
        for (std::size_t i = 0; i < 10; ++i) cc.push_back(double(real.cure(i).size()));
    }
    auto mt = stats::moments(tc), mc = stats::moments(cc);
    EXPECT_NEAR(mt.mean, lambda * T, 3 * std::sqrt(lambda * T / double(tc.size())));
    EXPECT_NEAR(mc.mean, T, 3 * std::sqrt(T / double(cc.size())));
    // Poisson: variance equals mean (loose check on the dispersion ratio)
    EXPECT_NEAR(mt.var / mt.mean, 1.0, 0.1);
    EXPECT_NEAR(mc.var / mc.mean, 1.0, 0.1);
}

TEST(Build, ErcpEdgeCountsMatchResamplingOracle) {
    ErcpModel m;
    m.mu = InterarrivalSpec::pareto(0.5, 1.0);
    m.nu = InterarrivalSpec::exponential(1.0);
    std::vector<double> a, b;
    std::mt19937_64 eng(99);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (std::uint64_t r = 0; r < 20; ++r) {
        auto real = build_realization(m, SpatialBox::cube(2, 0, 9), {0, 100}, 21, r);
        real.region().for_each_edge([&](const Edge& e, std::size_t) {
            a.push_back(double(real.trans(e).size()));
            double t = 0;
            std::size_t n = 0;
            for (;;) {
                t += std::pow(1.0 - U(eng), -2.0);
                if (t > 100) break;
                ++n;
            }
            b.push_back(double(n));
        });
    }
    auto ma = stats::moments(a), mb = stats::moments(b);
    EXPECT_LT(std::fabs(ma.mean - mb.mean), 3 * std::hypot(ma.se, mb.se));
}

TEST(Build, DeterministicUnderSeed) {
    auto a = build_realization(classical(1.0), SpatialBox::cube(2, 0, 4), {0, 5}, 3, 7);
    auto b = build_realization(classical(1.0), SpatialBox::cube(2, 0, 4), {0, 5}, 3, 7);
    ASSERT_EQ(a.timeline().size(), b.timeline().size());
    for (std::size_t i = 0; i < a.timeline().size(); ++i) EXPECT_EQ(a.timeline()[i].t, b.timeline()[i].t);
    EXPECT_THROW(build_realization(classical(1.0), line(3), {0, kInf}, 3, 0), gcp::error);
}

TEST(Evolve, NoMarksFreezes) {
    auto real = RealizationBuilder(line(3), {0, 10}).build();
    auto tr = evolve(real, {Site{1}}, 10);
    EXPECT_EQ(tr.infected_at(7.5), std::vector<Site>{Site{1}});
    EXPECT_FALSE(tr.extinction());
}

TEST(Evolve, SingleCure) {
    auto real = RealizationBuilder(line(1), {0, 10}).cure(Site{0}, 1).build();
    auto tr = evolve(real, {Site{0}}, 10);
    EXPECT_EQ(tr.extinction().value(), 1.0);
    auto ex = extinction_time(real, {Site{0}}, 10);
    EXPECT_FALSE(ex.censored);
    EXPECT_EQ(ex.value, 1.0);
}

TEST(Evolve, TwoSiteExampleMatchesPathSearch) {
    auto real = RealizationBuilder(line(2), {0, 5}).trans(Site{0}, Site{1}, 1).cure(Site{0}, 2).build();
    auto tr = evolve(real, {Site{0}}, 3);
    EXPECT_EQ(tr.infected_at(3), std::vector<Site>{Site{1}});
    EXPECT_FALSE(oracle::reaches(real, Site{0}, 0, Site{0}, 3));
    EXPECT_TRUE(oracle::reaches(real, Site{0}, 0, Site{1}, 3));
}

TEST(Evolve, TieOrderCureBeforeTransmission) {
    // x=0 is cured at 1 exactly when a mark on {0,1} fires: no transmission.
    auto real = RealizationBuilder(line(2), {0, 5}).trans(Site{0}, Site{1}, 1).cure(Site{0}, 1).build();
    EXPECT_TRUE(evolve(real, {Site{0}}, 5).infected_at(5).empty());
}

TEST(Evolve, ClosedEnvironmentIntervalsFilterMarks) {
    Edge e = make_edge(Site{0}, Site{1});
    auto real = RealizationBuilder(line(2), {0, 10})
                    .trans(Site{0}, Site{1}, 1)
                    .trans(Site{0}, Site{1}, 4)
                    .env(e, false, {3}, {5})
                    .build();
    auto tr = evolve(real, {Site{0}}, 10);
    ASSERT_EQ(tr.log.size(), 1u);
    EXPECT_EQ(tr.log[0].t, 4.0);
}

TEST(Reaches, Examples) {
    auto real = RealizationBuilder(line(1), {0, 10}).cure(Site{0}, 5).build();
    auto r = reaches(real, Site{0}, 0, Site{0}, 4);
    EXPECT_TRUE(r.reached);
    ASSERT_TRUE(r.witness);
    EXPECT_TRUE(r.witness->jumps.empty());
    EXPECT_FALSE(reaches(real, Site{0}, 0, Site{0}, 6).reached);
    EXPECT_TRUE(reaches(real, Site{0}, 5.5, Site{0}, 6).reached);
}

TEST(Reaches, StaggeredMarksMatchOracle) {
    auto real = RealizationBuilder(line(3), {0, 10})
                    .trans(Site{0}, Site{1}, 1)
                    .trans(Site{1}, Site{2}, 0.5)
                    .trans(Site{1}, Site{2}, 3)
                    .cure(Site{1}, 2)
                    .trans(Site{0}, Site{1}, 2.5)
                    .cure(Site{0}, 2.2)
                    .build();
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y)
            for (double t : {0.7, 1.5, 2.1, 2.7, 3.5, 9.0}) {
                auto r = reaches(real, Site{x}, 0, Site{y}, t);
                EXPECT_EQ(r.reached, oracle::reaches(real, Site{x}, 0, Site{y}, t)) << x << " " << y << " " << t;
                if (r.reached) {
                    ASSERT_TRUE(r.witness);
                    EXPECT_TRUE(validate_path(real, *r.witness));
                    EXPECT_EQ(r.witness->end_site(), Site{y});
                }
            }
}

TEST(Reaches, RandomRealizationsMatchOracle) {
    for (std::uint64_t rep = 0; rep < 40; ++rep) {
        auto box = rep % 2 ? SpatialBox::cube(2, 0, 2) : line(5);
        auto real = build_realization(classical(1.3), box, {0, 4}, 17, rep);
        Rng r = derive_stream(18, 0, rep);
        for (int q = 0; q < 20; ++q) {
            Site x = box.site(r.below(box.size())), y = box.site(r.below(box.size()));
            double s = r.uniform(0, 2), t = r.uniform(s, 4);
            auto got = reaches(real, x, s, y, t);
            ASSERT_EQ(got.reached, oracle::reaches(real, x, s, y, t));
            if (got.reached) {
                EXPECT_TRUE(validate_path(real, *got.witness, nullptr, s, t));
                EXPECT_EQ(got.witness->start_site, x);
                EXPECT_EQ(got.witness->end_site(), y);
            }
        }
    }
}

TEST(Evolve, ConsistentWithReachesAndAdditive) {
    for (std::uint64_t rep = 0; rep < 15; ++rep) {
        auto box = SpatialBox::cube(2, 0, 3);
        auto real = build_realization(classical(1.5), box, {0, 3}, 23, rep);
        std::vector<Site> A{Site{0, 0}, Site{2, 1}, Site{3, 3}};
        auto trA = evolve(real, A, 3);
        std::vector<Trajectory> singles;
        for (const auto& x : A) singles.push_back(evolve(real, {x}, 3));
        auto times = trA.event_times();
        times.push_back(3.0);
        for (double t : times) {
            std::set<Site> uni;
            for (const auto& s : singles)
                for (const auto& y : s.infected_at(t)) uni.insert(y);
            EXPECT_EQ(as_set(trA.infected_at(t)), uni);
        }
        auto sub = evolve(real, {A[0]}, 3);
        for (double t : times)
            for (const auto& y : sub.infected_at(t)) EXPECT_TRUE(as_set(trA.infected_at(t)).count(y));
        for (std::size_t i = 0; i < box.size(); ++i) {
            Site y = box.site(i);
            bool any = false;
            for (const auto& x : A) any = any || reaches(real, x, 0, y, 3).reached;
            EXPECT_EQ(any, as_set(trA.infected_at(3)).count(y) > 0);
        }
    }
}

TEST(Extinction, EarlyCuresAndCensoring) {
    auto real = RealizationBuilder(line(3), {0, 10})
                    .cure(Site{0}, 1)
                    .cure(Site{1}, 2.5)
                    .trans(Site{1}, Site{2}, 4)
                    .build();
    auto ex = extinction_time(real, {Site{0}, Site{1}}, 10);
    EXPECT_FALSE(ex.censored);
    EXPECT_EQ(ex.value, 2.5);
    auto none = RealizationBuilder(line(3), {0, 10}).build();
    auto c = extinction_time(none, {Site{0}}, 7);
    EXPECT_TRUE(c.censored);
    EXPECT_EQ(c.value, 7.0);
}

TEST(Extinction, MatchesTrajectoryReplay) {
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        auto real = build_realization(classical(1.0), line(5), {0, 20}, 29, rep);
        std::vector<Site> all;
        for (int i = 0; i < 5; ++i) all.push_back(Site{i});
        auto ex = extinction_time(real, all, 20);
        auto tr = evolve(real, all, 20);
        auto e = tr.extinction();
        EXPECT_EQ(ex.censored, !e.has_value());
        if (e) {
            EXPECT_EQ(ex.value, *e);
        }
    }
}

TEST(Cpde, LambdaCouplingIsMonotone) {
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        auto box = SpatialBox::cube(2, 0, 4);
        auto lo = build_realization(CpdeModel{1.0, 0.6, 0.8, 3.0}, box, {0, 5}, 31, rep);
        auto hi = build_realization(CpdeModel{1.0, 0.6, 2.5, 3.0}, box, {0, 5}, 31, rep);
        auto a = evolve(lo, {Site{2, 2}}, 5), b = evolve(hi, {Site{2, 2}}, 5);
        auto ts = a.event_times();
        auto tb = b.event_times();
        ts.insert(ts.end(), tb.begin(), tb.end());
        for (double t : ts) {
            auto B = as_set(b.infected_at(t));
            for (const auto& y : a.infected_at(t)) EXPECT_TRUE(B.count(y));
        }
    }
}

TEST(Cpde, EnvironmentStationaryOpenFraction) {
    CpdeModel m{2.0, 0.3, 1.0, 0.0};
    auto box = line(40);
    std::size_t open = 0, n = 0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        auto env = build_environment(m, box, {0, 10}, 37, rep);
        for (std::size_t s = 0; s < env.size(); ++s) {
            if (!box.slot_valid(s)) continue;
            for (double t : {0.0, 5.0, 10.0}) {
                open += env[s].open_at(t);
                ++n;
            }
        }
    }
    auto ci = stats::wilson(open, n, 0.999);
    EXPECT_TRUE(ci.contains(0.3)) << double(open) / double(n);
}

TEST(Classical, ExtinctionMatchesExactChain) {
    const double lambda = 1.0, T = 3.0;
    const std::uint64_t N = 20000;
    std::uint64_t k = 0;
    std::vector<Site> all;
    for (int i = 0; i < 5; ++i) all.push_back(Site{i});
    for (std::uint64_t r = 0; r < N; ++r) {
        auto real = build_realization(classical(lambda), line(5), {0, T}, 41, r);
        k += !extinction_time(real, all, T).censored;
    }
    double exact = oracle::ctmc_extinct_by(oracle::path_graph(5), lambda, 31, T);
    double p = double(k) / double(N), se = std::sqrt(exact * (1 - exact) / double(N));
    EXPECT_NEAR(p, exact, 3 * se);
    std::mt19937_64 eng(5);
    std::uint64_t g = 0;
    for (std::uint64_t r = 0; r < N; ++r) g += oracle::gillespie_extinction(oracle::path_graph(5), lambda, T, eng) <= T;
    EXPECT_NEAR(double(g) / double(N), exact, 3 * se);
}

TEST(Path, RestrictAndSiteAt) {
    Path p{Site{0}, 0.0, {{1.0, Site{1}}, {2.0, Site{2}}}, 3.0};
    EXPECT_EQ(p.site_at(0.5), Site{0});
    EXPECT_EQ(p.site_at(1.0), Site{1});
    auto q = p.restrict(1.5, 3.0);
    EXPECT_EQ(q.start_site, Site{1});
    EXPECT_EQ(q.jumps.size(), 1u);
}
