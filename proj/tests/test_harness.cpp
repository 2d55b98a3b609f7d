#include <gtest/gtest.h>

#include <filesystem>

#include "gcp/harness.hpp"

using namespace gcp;
using namespace gcp::harness;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("gcp_harness_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

ExperimentConfig minimal_extinction(const std::filesystem::path& out) {
    return config_from_json({{"kind", "gcp-extinction"},
                             {"model", {{"type", "gcp"}}},
                             {"region", {{"d", 1}, {"radius", 5}}},
                             {"window", {0.0, 20.0}},
                             {"seed", 42},
                             {"replicas", 10},
                             {"out", out.string()}});
}

std::size_t lines(const std::string& s) { return std::size_t(std::count(s.begin(), s.end(), '\n')); }

errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return errc::invalid_argument;
}

} // namespace

TEST(ParallelMap, OrderIndependentOfThreads) {
    auto f = [](std::size_t i) {
        Rng r = derive_stream(5, 7, i);
        double s = 0;
        for (int k = 0; k < 1000; ++k) s += r.uniform();
        return s;
    };
    auto a = parallel_map(50, 1, f), b = parallel_map(50, 8, f);
    EXPECT_EQ(a, b);
    EXPECT_TRUE(parallel_map(0, 4, f).empty());
}

TEST(ParallelMap, RethrowsSmallestFailingIndex) {
    try {
        parallel_map(20, 4, [](std::size_t i) -> int {
            if (i == 3 || i == 11) throw std::runtime_error(std::to_string(i));
            return int(i);
        });
        ADD_FAILURE();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "3");
    }
}

TEST(Config, RejectsBadConfigs) {
    EXPECT_EQ(code_of([] { config_from_json({{"kind", "nope"}}); }), errc::config_invalid);
    EXPECT_EQ(code_of([] { config_from_json({{"kind", "gcp-extinction"}}); }), errc::config_invalid);
    EXPECT_EQ(code_of([] { config_from_json({{"kind", "iterperc"}, {"params", {{"p", 0.3}}}, {"replicas", 0}}); }),
              errc::config_invalid);
    EXPECT_EQ(code_of([] { config_from_json({{"kind", "iterperc"}, {"params", {{"p", 0.3}}}, {"bogus", 1}}); }),
              errc::config_invalid);
    EXPECT_EQ(code_of([] {
                  config_from_json({{"kind", "lambda-sweep"},
                                    {"model", {{"type", "gcp"}}},
                                    {"region", {{"d", 1}, {"radius", 2}}},
                                    {"window", {0, 1}},
                                    {"params", {{"lambdas", {1.0}}}}});
              }),
              errc::config_invalid);
    EXPECT_EQ(code_of([] { load_config("/nonexistent/config.json"); }), errc::config_invalid);
}

TEST(RunExperiment, MinimalExtinctionHasTenRows) {
    auto dir = scratch("min");
    auto man = run_experiment(minimal_extinction(dir));
    auto csv = io::read_file(dir / "extinction.csv");
    EXPECT_EQ(lines(csv), 11u); // header + 10 replicas
    EXPECT_EQ(man.outputs.size(), 2u);
    EXPECT_TRUE(verify_manifest(dir));
    auto mj = json::parse(io::read_file(dir / kManifestName));
    EXPECT_EQ(mj["seed"], 42);
    EXPECT_EQ(mj["config_hash"], minimal_extinction(dir).hash());
    EXPECT_EQ(mj["code_version"], code_version());
    std::filesystem::remove_all(dir);
}

TEST(RunExperiment, SameConfigSameChecksums) {
    auto d1 = scratch("rep1"), d2 = scratch("rep2");
    auto c1 = minimal_extinction(d1), c2 = minimal_extinction(d2);
    c2.threads = 4;
    auto m1 = run_experiment(c1), m2 = run_experiment(c2);
    ASSERT_EQ(m1.outputs.size(), m2.outputs.size());
    for (std::size_t i = 0; i < m1.outputs.size(); ++i) {
        EXPECT_EQ(m1.outputs[i].fnv1a64, m2.outputs[i].fnv1a64);
        EXPECT_EQ(io::read_file(d1 / m1.outputs[i].file), io::read_file(d2 / m2.outputs[i].file));
    }
    EXPECT_EQ(m1.config_hash, m2.config_hash);
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

TEST(RunExperiment, TamperedOutputFailsManifest) {
    auto dir = scratch("tamper");
    run_experiment(minimal_extinction(dir));
    io::write_atomic(dir / "extinction.csv", "replica,extinct,tau\n");
    EXPECT_FALSE(verify_manifest(dir));
    std::filesystem::remove_all(dir);
}

TEST(RunExperiment, UnwritableOutput) {
    auto dir = scratch("blocked");
    io::write_atomic(dir, "file in the way");
    auto c = minimal_extinction(dir / "inner");
    EXPECT_EQ(code_of([&] { run_experiment(c); }), errc::output_path_unwritable);
    std::filesystem::remove_all(dir);
}

// Shared-mark audit oracle: rebuild two lambda values independently and compare.
TEST(RunExperiment, LambdaSweepSharesMarks) {
    auto dir = scratch("sweep");
    auto c = config_from_json({{"kind", "lambda-sweep"},
                               {"model", {{"type", "cpde"}, {"v", 1.0}, {"p", 0.5}}},
                               {"region", {{"d", 1}, {"radius", 4}}},
                               {"window", {0.0, 10.0}},
                               {"seed", 3},
                               {"replicas", 20},
                               {"params", {{"lambdas", {0.5, 2.0, 1.0}}}},
                               {"out", dir.string()}});
    auto res = execute(c);
    EXPECT_EQ(res.violations, 0u);
    auto audit = json::parse(res.outputs[2].content);
    EXPECT_TRUE(audit["ok"].get<bool>());

    auto R = SpatialBox::centered(1, 4);
    auto lo = build_realization(CpdeModel{1.0, 0.5, 0.5, 2.0}, R, {0, 10}, 3, 7);
    auto hi = build_realization(CpdeModel{1.0, 0.5, 2.0, 2.0}, R, {0, 10}, 3, 7);
    std::size_t shared = 0, total_lo = 0;
    R.for_each_edge([&](const Edge&, std::size_t s) {
        const auto& a = lo.trans(s).times;
        const auto& b = hi.trans(s).times;
        total_lo += a.size();
        for (double t : a) shared += std::binary_search(b.begin(), b.end(), t);
    });
    EXPECT_EQ(shared, total_lo);
    // Survival must be monotone in lambda under the coupling, replica by replica.
    std::istringstream ss(res.outputs[0].content);
    std::string line;
    std::getline(ss, line);
    std::map<std::pair<int, double>, int> ext;
    while (std::getline(ss, line)) {
        int r, e;
        double l, t;
        ASSERT_EQ(std::sscanf(line.c_str(), "%d,%lf,%d,%lf", &r, &l, &e, &t), 4);
        ext[{r, l}] = e;
    }
    for (int r = 0; r < 20; ++r) {
        int e05 = ext[std::pair{r, 0.5}], e1 = ext[std::pair{r, 1.0}], e2 = ext[std::pair{r, 2.0}];
        EXPECT_GE(e05, e1);
        EXPECT_GE(e1, e2);
    }
}

TEST(Execute, SmallRunsOfEveryKind) {
    auto base = [](json j) {
        j["seed"] = 5;
        j["replicas"] = 4;
        return config_from_json(j);
    };
    std::vector<ExperimentConfig> cs{
        base({{"kind", "growth"},
              {"model", {{"type", "ercp"}}},
              {"region", {{"d", 1}, {"radius", 500}}},
              {"params", {{"t_min", 1.0}, {"t_max", 100.0}, {"per_decade", 3}}}}),
        base({{"kind", "iterperc"}, {"params", {{"p", 0.2}, {"d", 2}, {"steps", 5}}}}),
        base({{"kind", "bad-events"}, {"model", {{"type", "ercp"}, {"delta", 4.0}}}, {"params", {{"n_max", 5}}}}),
        base({{"kind", "un-estimate"},
              {"model", {{"type", "gcp"}}},
              {"scales", {{"d", 1}, {"l0", 1}, {"h0", 1.0}}},
              {"params", {{"n_max", 1}}}}),
        base({{"kind", "crossing"},
              {"model", {{"type", "gcp"}}},
              {"params", {{"box", {{"space", {{"d", 1}, {"radius", 2}}}, {"s", 0.0}, {"t", 3.0}}}}}}),
        base({{"kind", "cascade-verify"},
              {"model", {{"type", "gcp"}, {"edge", {{"family", "exponential"}, {"rate", 2.0}}}}},
              {"scales", {{"d", 1}, {"l0", 1}, {"h0", 1.0}}},
              {"params", {{"k", 1}}}}),
        base({{"kind", "hierarchy"}, {"scales", {{"d", 1}}}, {"params", {{"n", 1}, {"sample_depth", 2}}}}),
        base({{"kind", "renewal-check"},
              {"params", {{"spec", {{"family", "exponential"}}}, {"empirical_g", false}, {"eps", 0.1}}}}),
        base({{"kind", "block-field"},
              {"model", {{"type", "cpde"}, {"v", 0.5}, {"p", 0.9}, {"lambda", 50.0}}},
              {"region", {{"d", 2}, {"lo", {-3, -3}}, {"hi", {3, 3}}}},
              {"window", {0.0, 2.0}},
              {"params", {{"n", 1}, {"k_max", 0}}}}),
    };
    for (const auto& c : cs) {
        SCOPED_TRACE(c.kind);
        auto r1 = execute(c);
        auto c8 = c;
        c8.threads = 8;
        auto r8 = execute(c8);
        ASSERT_FALSE(r1.outputs.empty());
        ASSERT_EQ(r1.outputs.size(), r8.outputs.size());
        for (std::size_t i = 0; i < r1.outputs.size(); ++i) {
            EXPECT_FALSE(r1.outputs[i].content.empty());
            EXPECT_EQ(r1.outputs[i].content, r8.outputs[i].content);
        }
        EXPECT_EQ(r1.violations, 0u);
    }
}

TEST(Execute, CrossingRowsHaveReportFields) {
    auto c = config_from_json({{"kind", "crossing"},
                               {"model", {{"type", "gcp"}}},
                               {"replicas", 3},
                               {"params", {{"box", {{"space", {{"d", 2}, {"radius", 1}}}, {"s", 0.0}, {"t", 2.0}}}}}});
    auto res = execute(c);
    std::istringstream ss(res.outputs[0].content);
    std::string line;
    int n = 0;
    while (std::getline(ss, line)) {
        auto j = json::parse(line);
        for (const char* k : {"box", "T", "T_half", "S", "S_half", "H"}) EXPECT_TRUE(j.contains(k)) << k;
        EXPECT_EQ(j["S"].size(), 2u);
        EXPECT_EQ(j["S_half"].size(), 4u);
        ++n;
    }
    EXPECT_EQ(n, 3);
}
