#pragma once

// Z^d geometry: sites, nearest-neighbour edges, boxes, clusters, animals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <set>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace gcp {

inline constexpr int kMaxDim = 4;

struct Site {
    std::array<int, kMaxDim> c{};

    Site() = default;
    Site(std::initializer_list<int> xs) {
        require(xs.size() <= kMaxDim, errc::invalid_argument, "dimension too large");
        std::copy(xs.begin(), xs.end(), c.begin());
    }
    int& operator[](int i) { return c[std::size_t(i)]; }
    int operator[](int i) const { return c[std::size_t(i)]; }

    friend bool operator==(const Site&, const Site&) = default;
    friend auto operator<=>(const Site&, const Site&) = default;
};

inline Site unit(int dir, int sign = 1) {
    Site s;
    s[dir] = sign;
    return s;
}
inline Site operator+(Site a, const Site& b) {
    for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
    return a;
}
inline Site operator-(Site a, const Site& b) {
    for (int i = 0; i < kMaxDim; ++i) a[i] -= b[i];
    return a;
}
inline int norm1(const Site& s) {
    int r = 0;
    for (int i = 0; i < kMaxDim; ++i) r += std::abs(s[i]);
    return r;
}

struct SiteHash {
    std::size_t operator()(const Site& s) const {
        std::uint64_t h = 0x243f6a8885a308d3ULL;
        for (int i = 0; i < kMaxDim; ++i) h = mix64(h ^ std::uint64_t(std::uint32_t(s[i])));
        return std::size_t(h);
    }
};

using SiteSet = std::unordered_set<Site, SiteHash>;

// Canonical edge {a, a + e_dir}; a is the lexicographically smaller endpoint.
struct Edge {
    Site a;
    int dir = 0;

    Site b() const { return a + unit(dir); }
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge make_edge(const Site& x, const Site& y) {
    Site d = y - x;
    require(norm1(d) == 1, errc::invalid_argument, "edge endpoints must be adjacent");
    for (int i = 0; i < kMaxDim; ++i) {
        if (d[i] == 1) return {x, i};
        if (d[i] == -1) return {y, i};
    }
    fail(errc::invalid_argument, "unreachable");
}

struct EdgeHash {
    std::size_t operator()(const Edge& e) const { return SiteHash{}(e.a) ^ std::size_t(mix64(std::uint64_t(e.dir) + 17)); }
};

// Integer box [lo, hi] in Z^d. Site indices are mixed-radix with coordinate 0
// most significant, so index order is lexicographic order.
struct SpatialBox {
    int d = 1;
    Site lo, hi;

    SpatialBox() = default;
    SpatialBox(int dim, Site l, Site h) : d(dim), lo(l), hi(h) {
        require(dim >= 1 && dim <= kMaxDim, errc::invalid_argument, "dimension out of range");
        for (int i = 0; i < d; ++i)
            require(lo[i] <= hi[i], errc::invalid_argument, "box needs lo <= hi");
        for (int i = d; i < kMaxDim; ++i) lo[i] = hi[i] = 0;
    }
    static SpatialBox cube(int dim, int a, int b) {
        Site l, h;
        for (int i = 0; i < dim; ++i) {
            l[i] = a;
            h[i] = b;
        }
        return {dim, l, h};
    }
    static SpatialBox centered(int dim, int r) { return cube(dim, -r, r); }

    int side(int i) const { return hi[i] - lo[i] + 1; }
    std::size_t size() const {
        std::size_t n = 1;
        for (int i = 0; i < d; ++i) n *= std::size_t(side(i));
        return n;
    }
    bool contains(const Site& s) const {
        for (int i = 0; i < d; ++i)
            if (s[i] < lo[i] || s[i] > hi[i]) return false;
        return true;
    }
    bool contains(const SpatialBox& o) const { return contains(o.lo) && contains(o.hi); }
    bool contains(const Edge& e) const { return contains(e.a) && e.a[e.dir] < hi[e.dir]; }

    std::size_t index(const Site& s) const {
        std::size_t idx = 0;
        for (int i = 0; i < d; ++i) idx = idx * std::size_t(side(i)) + std::size_t(s[i] - lo[i]);
        return idx;
    }
    Site site(std::size_t idx) const {
        Site s;
        for (int i = d - 1; i >= 0; --i) {
            auto w = std::size_t(side(i));
            s[i] = lo[i] + int(idx % w);
            idx /= w;
        }
        return s;
    }
    // Index offset of a unit step in direction i.
    std::size_t stride(int i) const {
        std::size_t st = 1;
        for (int k = d - 1; k > i; --k) st *= std::size_t(side(k));
        return st;
    }

    // Edge slots: index(a) * d + dir; valid iff the upper endpoint is inside.
    std::size_t edge_slots() const { return size() * std::size_t(d); }
    std::size_t edge_slot(const Edge& e) const { return index(e.a) * std::size_t(d) + std::size_t(e.dir); }
    Edge edge_at(std::size_t slot) const { return {site(slot / std::size_t(d)), int(slot % std::size_t(d))}; }
    bool slot_valid(std::size_t slot) const {
        Site a = site(slot / std::size_t(d));
        int dir = int(slot % std::size_t(d));
        return a[dir] < hi[dir];
    }
    std::size_t edge_count() const {
        std::size_t n = 0;
        for (int i = 0; i < d; ++i) n += size() / std::size_t(side(i)) * std::size_t(side(i) - 1);
        return n;
    }

    template <class F>
    void for_each_edge(F&& f) const {
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            Site a = site(i);
            for (int dir = 0; dir < d; ++dir)
                if (a[dir] < hi[dir]) f(Edge{a, dir}, i * std::size_t(d) + std::size_t(dir));
        }
    }

    friend bool operator==(const SpatialBox&, const SpatialBox&) = default;
};

// ---------------------------------------------------------------------------

struct Components {
    std::vector<int> label;         // per site index
    std::vector<std::size_t> sizes; // per label; labels ordered by minimal vertex
    int largest = -1;
    std::vector<std::size_t> members(int lab) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < label.size(); ++i)
            if (label[i] == lab) out.push_back(i);
        return out;
    }
};

namespace detail {
struct DisjointSets {
    std::vector<std::uint32_t> parent, rank;
    explicit DisjointSets(std::size_t n) : parent(n), rank(n, 0) { std::iota(parent.begin(), parent.end(), 0u); }
    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank[a] < rank[b]) std::swap(a, b);
        parent[b] = a;
        if (rank[a] == rank[b]) ++rank[a];
    }
};
} // namespace detail

// `open` is indexed by edge slot of `region`. Ties for the largest component go
// to the one with the lexicographically smallest minimal vertex.
inline Components connected_components(const std::vector<char>& open, const SpatialBox& region) {
    const std::size_t n = region.size();
    require(open.size() == region.edge_slots(), errc::invalid_argument, "open-edge mask size mismatch");
    detail::DisjointSets ds(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int dir = 0; dir < region.d; ++dir) {
            std::size_t slot = i * std::size_t(region.d) + std::size_t(dir);
            if (open[slot] && region.slot_valid(slot)) ds.unite(std::uint32_t(i), std::uint32_t(i + region.stride(dir)));
        }
    Components c;
    c.label.assign(n, -1);
    std::vector<int> root_label(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = ds.find(std::uint32_t(i));
        if (root_label[r] < 0) {
            root_label[r] = int(c.sizes.size());
            c.sizes.push_back(0);
        }
        c.label[i] = root_label[r];
        ++c.sizes[std::size_t(c.label[i])];
    }
    for (std::size_t l = 0; l < c.sizes.size(); ++l)
        if (c.largest < 0 || c.sizes[l] > c.sizes[std::size_t(c.largest)]) c.largest = int(l);
    return c;
}

inline Components connected_components(const std::vector<Edge>& open, const SpatialBox& region) {
    std::vector<char> mask(region.edge_slots(), 0);
    for (const auto& e : open) {
        require(region.contains(e), errc::invalid_argument, "open edge outside region");
        mask[region.edge_slot(e)] = 1;
    }
    return connected_components(mask, region);
}

// Cluster plus every endpoint of an edge with exactly one endpoint inside.
inline SiteSet edge_boundary_closure(const SiteSet& cluster, int d) {
    SiteSet out = cluster;
    for (const auto& x : cluster)
        for (int i = 0; i < d; ++i)
            for (int s : {-1, 1}) out.insert(x + unit(i, s));
    return out;
}

// ---------------------------------------------------------------------------
// Lattice animals: connected edge sets whose vertex set contains the origin.

using Animal = std::vector<Edge>; // sorted

inline int default_animal_m_max(int d) { return d == 1 ? 64 : (d == 2 ? 8 : 5); }

inline std::vector<Animal> enumerate_animals(int d, int m, int m_max = -1) {
    if (m_max < 0) m_max = default_animal_m_max(d);
    require(d >= 1 && d <= kMaxDim, errc::invalid_argument, "dimension out of range");
    require(m >= 0, errc::invalid_argument, "m must be >= 0");
    if (m > m_max) fail(errc::too_large, "animal enumeration beyond m_max");
    std::set<Animal> level{Animal{}};
    for (int k = 0; k < m; ++k) {
        std::set<Animal> next;
        for (const auto& A : level) {
            std::set<Site> verts{Site{}};
            for (const auto& e : A) {
                verts.insert(e.a);
                verts.insert(e.b());
            }
            for (const auto& v : verts)
                for (int i = 0; i < d; ++i)
                    for (int s : {-1, 1}) {
                        Edge e = make_edge(v, v + unit(i, s));
                        if (std::binary_search(A.begin(), A.end(), e)) continue;
                        Animal B = A;
                        B.insert(std::upper_bound(B.begin(), B.end(), e), e);
                        next.insert(std::move(B));
                    }
        }
        level = std::move(next);
    }
    return {level.begin(), level.end()};
}

inline double animal_count_bound(int d, int m) { return std::pow(7.0, double(d) * (m + 1)); }

} // namespace gcp
