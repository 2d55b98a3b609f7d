#include <gtest/gtest.h>

#include <set>

#include "gcp/lattice.hpp"
#include "oracles.hpp"

using namespace gcp;

TEST(Box, IndexRoundTripIsLexicographic) {
    SpatialBox b(3, Site{-1, 0, 2}, Site{1, 3, 4});
    EXPECT_EQ(b.size(), 3u * 4u * 3u);
    Site prev;
    for (std::size_t i = 0; i < b.size(); ++i) {
        Site x = b.site(i);
        EXPECT_TRUE(b.contains(x));
        EXPECT_EQ(b.index(x), i);
        if (i > 0) {
            EXPECT_LT(prev, x);
        }
        prev = x;
    }
    std::size_t n = 0;
    b.for_each_edge([&](const Edge& e, std::size_t slot) {
        EXPECT_TRUE(b.contains(e));
        EXPECT_EQ(b.edge_slot(e), slot);
        EXPECT_EQ(b.index(e.b()), b.index(e.a) + b.stride(e.dir));
        ++n;
    });
    EXPECT_EQ(n, b.edge_count());
}

TEST(Edge, CanonicalOrientation) {
    Edge e = make_edge(Site{2, 1}, Site{1, 1});
    EXPECT_EQ(e.a, (Site{1, 1}));
    EXPECT_EQ(e.dir, 0);
    EXPECT_THROW(make_edge(Site{0, 0}, Site{1, 1}), gcp::error);
}

TEST(Components, NoEdges) {
    auto box = SpatialBox::cube(2, 0, 2);
    auto c = connected_components(std::vector<Edge>{}, box);
    EXPECT_EQ(c.sizes.size(), 9u);
    EXPECT_EQ(c.label[box.index(Site{0, 0})], c.largest);
}

TEST(Components, AllEdges) {
    auto box = SpatialBox::cube(2, 0, 2);
    std::vector<Edge> all;
    box.for_each_edge([&](const Edge& e, std::size_t) { all.push_back(e); });
    auto c = connected_components(all, box);
    EXPECT_EQ(c.sizes.size(), 1u);
    EXPECT_EQ(c.sizes[0], 9u);
}

TEST(Components, MatchBfsOracle) {
    auto box = SpatialBox::cube(2, 0, 19);
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        Rng r = derive_stream(1, 0, rep);
        std::vector<Edge> open;
        std::set<Edge> oset;
        box.for_each_edge([&](const Edge& e, std::size_t) {
            if (r.bernoulli(0.3)) {
                open.push_back(e);
                oset.insert(e);
            }
        });
        auto c = connected_components(open, box);
        auto o = oracle::bfs_components(box, oset);
        // Same partition: label maps are mutually consistent.
        std::map<int, int> f, g;
        for (std::size_t i = 0; i < box.size(); ++i) {
            auto [it, ins] = f.insert({c.label[i], o[i]});
            EXPECT_EQ(it->second, o[i]);
            auto [jt, jns] = g.insert({o[i], c.label[i]});
            EXPECT_EQ(jt->second, c.label[i]);
        }
        for (const auto& e : open) EXPECT_EQ(c.label[box.index(e.a)], c.label[box.index(e.b())]);
        // Largest: maximal size, smallest minimal vertex among ties.
        std::size_t best = *std::max_element(c.sizes.begin(), c.sizes.end());
        EXPECT_EQ(c.sizes[std::size_t(c.largest)], best);
        for (std::size_t i = 0; i < box.size(); ++i)
            if (c.sizes[std::size_t(c.label[i])] == best) {
                EXPECT_EQ(c.label[i], c.largest);
                break;
            }
    }
}

TEST(Animals, OneDimensional) {
    EXPECT_EQ(enumerate_animals(1, 0).size(), 1u);
    EXPECT_EQ(enumerate_animals(1, 2).size(), 3u);
    for (int m = 0; m <= 10; ++m) EXPECT_EQ(enumerate_animals(1, m).size(), std::size_t(m + 1));
}

TEST(Animals, TwoEdgesInPlaneMatchBruteForce) {
    auto box = SpatialBox::centered(2, 3);
    std::vector<Edge> edges;
    box.for_each_edge([&](const Edge& e, std::size_t) { edges.push_back(e); });
    std::size_t count = 0;
    Site o{};
    for (std::size_t i = 0; i < edges.size(); ++i)
        for (std::size_t j = i + 1; j < edges.size(); ++j) {
            const auto &a = edges[i], &b = edges[j];
            bool touch = a.a == o || a.b() == o || b.a == o || b.b() == o;
            bool conn = a.a == b.a || a.a == b.b() || a.b() == b.a || a.b() == b.b();
            if (touch && conn) ++count;
        }
    EXPECT_EQ(enumerate_animals(2, 2).size(), count);
}

TEST(Animals, CountsMonotoneAndBounded) {
    for (int d : {1, 2, 3}) {
        std::size_t prev = 0;
        for (int m = 0; m <= (d == 3 ? 3 : 5); ++m) {
            auto A = enumerate_animals(d, m);
            EXPECT_GE(A.size(), prev);
            EXPECT_LE(double(A.size()), animal_count_bound(d, m));
            prev = A.size();
            for (const auto& a : A) {
                EXPECT_EQ(a.size(), std::size_t(m));
                EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
            }
        }
    }
    try {
        enumerate_animals(2, 9);
        FAIL();
    } catch (const gcp::error& e) {
        EXPECT_EQ(e.code(), errc::too_large);
    }
}

TEST(Closure, Examples) {
    EXPECT_EQ(edge_boundary_closure(SiteSet{Site{0}}, 1).size(), 3u);
    EXPECT_EQ(edge_boundary_closure(SiteSet{Site{0, 0}, Site{1, 0}}, 2).size(), 8u);
    EXPECT_TRUE(edge_boundary_closure(SiteSet{}, 2).empty());
}

TEST(Closure, MonotoneAndGrowing) {
    Rng r = derive_stream(2, 0, 0);
    for (int k = 0; k < 50; ++k) {
        SiteSet A, B;
        for (int i = 0; i < 6; ++i) {
            Site x{int(r.below(7)) - 3, int(r.below(7)) - 3};
            A.insert(x);
            B.insert(x);
        }
        for (int i = 0; i < 4; ++i) B.insert(Site{int(r.below(7)) - 3, int(r.below(7)) - 3});
        auto cA = edge_boundary_closure(A, 2), cB = edge_boundary_closure(B, 2);
        for (const auto& x : cA) EXPECT_TRUE(cB.count(x));
        EXPECT_GT(cA.size(), A.size());
    }
}
