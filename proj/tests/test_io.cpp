#include <gtest/gtest.h>

#include <filesystem>

#include "gcp/io.hpp"

using namespace gcp;

namespace {

void expect_same(const Realization& a, const Realization& b) {
    ASSERT_EQ(a.region().d, b.region().d);
    ASSERT_EQ(a.region().lo, b.region().lo);
    ASSERT_EQ(a.region().hi, b.region().hi);
    ASSERT_EQ(a.window(), b.window());
    ASSERT_EQ(a.has_env(), b.has_env());
    for (std::size_t i = 0; i < a.region().size(); ++i) EXPECT_EQ(a.cure(i).times, b.cure(i).times);
    a.region().for_each_edge([&](const Edge&, std::size_t s) {
        EXPECT_EQ(a.trans(s).times, b.trans(s).times);
        if (a.has_env()) {
            EXPECT_EQ(a.env(s).initially_open, b.env(s).initially_open);
            EXPECT_EQ(a.env(s).opens.times, b.env(s).opens.times);
            EXPECT_EQ(a.env(s).closes.times, b.env(s).closes.times);
            EXPECT_EQ(a.env(s).open_intervals, b.env(s).open_intervals);
        }
    });
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("gcp_io_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

} // namespace

TEST(Json, InterarrivalExampleShape) {
    auto j = io::to_json(InterarrivalSpec::pareto(0.5));
    EXPECT_EQ(j, json::parse(R"({"family":"pareto","alpha":0.5,"scale":1.0,"delta":1.0})"));
    auto s = io::interarrival_from_json(j);
    EXPECT_EQ(s, InterarrivalSpec::pareto(0.5));
}

TEST(Json, EveryFamilyRoundTrips) {
    for (auto s : {InterarrivalSpec::exponential(2.5), InterarrivalSpec::pareto(1.7, 3.0),
                   InterarrivalSpec::weibull(0.4, 2.0), InterarrivalSpec::uniform(0.5, 1.5),
                   InterarrivalSpec::deterministic(3.0).scaled(4.0)})
        EXPECT_EQ(io::interarrival_from_json(io::to_json(s)), s);
}

TEST(Json, BadSpecIsConfigInvalid) {
    for (const char* txt : {R"({"family":"cauchy"})", R"({"family":"pareto"})", R"({"family":"pareto","alpha":-1})",
                            R"({"family":"exponential","rate":1,"delta":0})", R"({"alpha":0.5})", R"([1,2])"}) {
        try {
            io::interarrival_from_json(json::parse(txt));
            ADD_FAILURE() << txt;
        } catch (const error& e) {
            EXPECT_EQ(e.code(), errc::config_invalid) << txt;
        }
    }
}

TEST(Json, ModelsStartsBoxesRoundTrip) {
    ErcpModel e;
    e.delta = 4;
    e.start = StartPolicy::burn_in(10);
    GcpModel g;
    g.start = StartPolicy::delayed(-2);
    g.cures = false;
    CpdeModel c{0.5, 0.9, 3000, 4000};
    for (const Model& m : {Model{e}, Model{g}, Model{c}}) {
        auto back = io::model_from_json(io::to_json(m));
        EXPECT_EQ(io::to_json(back), io::to_json(m));
    }
    auto b = SpatialBox(2, Site{-1, 3}, Site{4, 5});
    auto b2 = io::box_from_json(io::to_json(b));
    EXPECT_EQ(b2.lo, b.lo);
    EXPECT_EQ(b2.hi, b.hi);
    auto c2 = io::box_from_json(json::parse(R"({"d":3,"radius":2})"));
    EXPECT_EQ(c2.size(), 125u);
    EXPECT_THROW(io::box_from_json(json::parse(R"({"d":2,"lo":[0,0],"hi":[1]})")), error);
    EXPECT_THROW(io::window_from_json(json::parse("[3,1]")), error);
}

TEST(Dump, ErcpRoundTripIsExact) {
    ErcpModel m;
    auto real = build_realization(m, SpatialBox::centered(2, 3), {0.0, 100.0}, 9, 2);
    auto text = io::dump_realization(real);
    auto back = io::load_realization(text);
    expect_same(real, back);
    EXPECT_EQ(io::dump_realization(back), text);
    EXPECT_EQ(back.timeline().size(), real.timeline().size());
}

TEST(Dump, CpdeEnvironmentRoundTrip) {
    CpdeModel c{0.7, 0.4, 1.3, 0};
    auto real = build_realization(c, SpatialBox::cube(2, 0, 3), {-1.5, 7.25}, 3, 0);
    auto back = io::load_realization(io::dump_realization(real));
    expect_same(real, back);
}

TEST(Dump, HandBuiltLinesAndKinds) {
    RealizationBuilder b(SpatialBox::cube(1, 0, 1), {0.0, 1.0});
    b.cure(Site{1}, 0.1).trans(Site{0}, Site{1}, 1.0 / 3.0);
    auto text = io::dump_realization(b.build());
    std::istringstream ss(text);
    std::string header, l1, l2;
    std::getline(ss, header);
    std::getline(ss, l1);
    std::getline(ss, l2);
    auto h = json::parse(header);
    EXPECT_EQ(h["format"], "gcp-realization");
    EXPECT_EQ(h["version"], 1);
    EXPECT_EQ(json::parse(l1)["k"], "CURE");
    EXPECT_EQ(json::parse(l2)["k"], "TRANS");
    EXPECT_EQ(json::parse(l2)["t"].get<double>(), 1.0 / 3.0);
}

TEST(Dump, RejectsForeignInput) {
    EXPECT_THROW(io::load_realization(std::string("")), error);
    EXPECT_THROW(io::load_realization(std::string("{\"format\":\"other\"}\n")), error);
    std::string h = R"({"format":"gcp-realization","version":1,"d":1,"lo":[0],"hi":[1],"window":[0,1],"env":false})";
    EXPECT_THROW(io::load_realization(h + "\n{\"k\":\"CURE\",\"x\":[5],\"t\":0.5}\n"), error);
    EXPECT_THROW(io::load_realization(h + "\n{\"k\":\"CURE\",\"x\":[0],\"t\":2}\n"), error);
}

TEST(Csv, QuotingAndWidth) {
    io::Csv c({"a", "b"});
    c.row(io::cells(1, "x,y"));
    c.row(io::cells(0.1, std::string("q\"t")));
    EXPECT_EQ(c.str(), "a,b\n1,\"x,y\"\n0.1,\"q\"\"t\"\n");
    EXPECT_EQ(c.rows(), 2u);
    EXPECT_THROW(c.row(io::cells(1)), error);
}

TEST(Checksum, Fnv1aKnownValues) {
    EXPECT_EQ(io::fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(io::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(io::hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}

TEST(Files, AtomicWriteAndUnwritable) {
    auto dir = scratch("atomic");
    io::write_atomic(dir / "sub" / "f.txt", "hello");
    EXPECT_EQ(io::read_file(dir / "sub" / "f.txt"), "hello");
    EXPECT_FALSE(std::filesystem::exists(dir / "sub" / "f.txt.tmp"));
    io::write_atomic(dir / "blocker", "x");
    try {
        io::write_atomic(dir / "blocker" / "f.txt", "y");
        ADD_FAILURE();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::output_path_unwritable);
    }
    std::filesystem::remove_all(dir);
}

TEST(Format, ShortestRoundTrip) {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5})
        EXPECT_EQ(std::stod(io::fmt(x)), x);
    EXPECT_EQ(io::fmt(0.5), "0.5");
}
