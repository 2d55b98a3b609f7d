#pragma once

// Multiscale boxes: scale sequences, the child-box catalogues, cascading of
// half-crossings from one scale to the previous one, hierarchies, and Monte
// Carlo estimates of the half-crossing probabilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "crossings.hpp"
#include "error.hpp"
#include "lattice.hpp"
#include "realization.hpp"
#include "stats.hpp"

namespace gcp {

struct ScaleScheme {
    enum class Kind { Geometric, QuadraticExponential };
    Kind kind = Kind::Geometric;
    int d = 1;
    int l0 = 1;
    double h0 = 1.0;
    int alpha = 4;
    int beta = 6;
    // QuadraticExponential: h_n = h0 * exp((a / theta)^2 n^2)
    double a = 1.0, theta = 1.0;

    static ScaleScheme geometric(int d, int l0, double h0, int alpha, int beta) {
        ScaleScheme s;
        s.d = d;
        s.l0 = l0;
        s.h0 = h0;
        s.alpha = alpha;
        s.beta = beta;
        s.validate();
        return s;
    }

    void validate() const {
        require(d >= 1 && d <= kMaxDim, errc::invalid_argument, "dimension out of range");
        require(l0 >= 1 && h0 > 0, errc::invalid_argument, "l0 >= 1 and h0 > 0 required");
        require(alpha >= 4, errc::invalid_argument, "alpha must be >= 4");
        if (kind == Kind::Geometric) require(beta >= 6, errc::invalid_argument, "beta must be >= 6");
        else require(a > 0 && theta > 0, errc::invalid_argument, "a, theta must be positive");
    }

    int l(int k) const {
        double v = double(l0) * std::pow(double(alpha), k);
        require(v < 1e9, errc::too_large, "spatial scale overflows");
        return int(v);
    }
    double h(int k) const {
        if (kind == Kind::Geometric) return h0 * std::pow(double(beta), k);
        double c = a / theta;
        return h0 * std::exp(c * c * double(k) * double(k));
    }
    // Temporal ratio h_k / h_{k-1}.
    double beta_at(int k) const { return h(k) / h(k - 1); }
};

inline std::uint64_t entropy_constant(int d, int alpha, int beta) {
    require(d >= 1 && alpha >= 4 && beta >= 6, errc::invalid_argument, "need d >= 1, alpha >= 4, beta >= 6");
    auto ipow = [](std::uint64_t b, int e) {
        std::uint64_t r = 1;
        for (int i = 0; i < e; ++i) r *= b;
        return r;
    };
    std::uint64_t a = ipow(std::uint64_t(2 * alpha - 1), d);
    std::uint64_t s = std::uint64_t(2 * beta - 1) * ipow(std::uint64_t(2 * alpha - 1), d - 1);
    return a * a + std::uint64_t(2 * d) * s * s;
}

struct Anchor {
    Site x;
    double t = 0.0;
};

// (x, t) + B_k with B_k = [-l_k, l_k]^d x [0, h_k].
inline SpaceTimeBox scale_box(const ScaleScheme& sc, int k, const Anchor& an) {
    int L = sc.l(k);
    Site lo = an.x, hi = an.x;
    for (int i = 0; i < sc.d; ++i) {
        lo[i] -= L;
        hi[i] += L;
    }
    return {SpatialBox(sc.d, lo, hi), an.t, an.t + sc.h(k)};
}

// Anchor of a scale-k box (centre of the spatial part, bottom time).
inline Anchor anchor_of(const SpaceTimeBox& b) {
    Anchor an;
    for (int i = 0; i < b.dim(); ++i) an.x[i] = (b.space.lo[i] + b.space.hi[i]) / 2;
    an.t = b.s;
    return an;
}

struct Catalogue {
    std::vector<SpaceTimeBox> first, second;
};

namespace detail {

// All z in {-alpha, ..., alpha-2}^m in lexicographic order.
inline std::vector<std::vector<int>> z_vectors(int m, int alpha) {
    std::vector<std::vector<int>> out{{}};
    for (int k = 0; k < m; ++k) {
        std::vector<std::vector<int>> next;
        for (const auto& v : out)
            for (int z = -alpha; z <= alpha - 2; ++z) {
                auto w = v;
                w.push_back(z);
                next.push_back(std::move(w));
            }
        out = std::move(next);
    }
    return out;
}

inline std::vector<double> half_offsets(double beta) {
    std::vector<double> out;
    for (int k = 0; 0.5 * k <= beta - 1 + 1e-9; ++k) out.push_back(0.5 * k);
    return out;
}

} // namespace detail

// Child boxes for the temporal half-crossing of (x,t) + B_n. The second list is
// the first one shifted up by (beta/2 - 1) h_{n-1}, which leaves a vertical gap
// of (beta/2 - 2) h_{n-1}.
inline Catalogue temporal_catalogue(const ScaleScheme& sc, int n, const Anchor& an = {}) {
    require(n >= 1, errc::invalid_argument, "catalogues need n >= 1");
    require(sc.beta_at(n) >= 6 - 1e-12, errc::invalid_argument, "scale ratio h_n/h_{n-1} below 6");
    const int l = sc.l(n - 1);
    const double h = sc.h(n - 1), beta = sc.beta_at(n);
    Catalogue c;
    for (const auto& z : detail::z_vectors(sc.d, sc.alpha)) {
        Site lo = an.x, hi = an.x;
        for (int i = 0; i < sc.d; ++i) {
            lo[i] += l * z[std::size_t(i)];
            hi[i] += l * z[std::size_t(i)] + 2 * l;
        }
        SpatialBox sp(sc.d, lo, hi);
        c.first.push_back({sp, an.t, an.t + h});
        double up = (beta / 2 - 1) * h;
        c.second.push_back({sp, an.t + up, an.t + up + h});
    }
    return c;
}

// Child boxes for the spatial half-crossing with half-box index k (k = j for
// (j,+), k = j + d for (j,-)). Time offsets run over i in {0, 1/2, ..., beta-1}.
inline Catalogue spatial_catalogue(const ScaleScheme& sc, int n, int k, const Anchor& an = {}) {
    require(n >= 1, errc::invalid_argument, "catalogues need n >= 1");
    require(sc.beta_at(n) >= 6 - 1e-12, errc::invalid_argument, "scale ratio h_n/h_{n-1} below 6");
    require(k >= 0 && k < 2 * sc.d, errc::invalid_argument, "half-box index out of range");
    const int l = sc.l(n - 1), L = sc.l(n);
    const double h = sc.h(n - 1), beta = sc.beta_at(n);
    const int j = half_dir(k, sc.d), sign = half_sign(k, sc.d);
    const int s1 = sign > 0 ? 0 : -2 * l;
    const int s2 = sign > 0 ? L - 2 * l : -L;
    Catalogue c;
    for (const auto& z : detail::z_vectors(sc.d - 1, sc.alpha))
        for (double i : detail::half_offsets(beta)) {
            Site lo = an.x, hi = an.x;
            std::size_t q = 0;
            for (int m = 0; m < sc.d; ++m) {
                if (m == j) continue;
                lo[m] += l * z[q];
                hi[m] += l * z[q] + 2 * l;
                ++q;
            }
            Site lo2 = lo, hi2 = hi;
            lo[j] = an.x[j] + s1;
            hi[j] = an.x[j] + s1 + 2 * l;
            lo2[j] = an.x[j] + s2;
            hi2[j] = an.x[j] + s2 + 2 * l;
            double t0 = an.t + i * h;
            c.first.push_back({SpatialBox(sc.d, lo, hi), t0, t0 + h});
            c.second.push_back({SpatialBox(sc.d, lo2, hi2), t0, t0 + h});
        }
    return c;
}

// Index 0: temporal; 1 + k: spatial half-box k.
inline Catalogue catalogue(const ScaleScheme& sc, int n, int which, const Anchor& an = {}) {
    return which == 0 ? temporal_catalogue(sc, n, an) : spatial_catalogue(sc, n, which - 1, an);
}

// Number of (B, B') pairs over all catalogues at scale n; equals the entropy
// constant for geometric scales.
inline std::uint64_t pair_count(const ScaleScheme& sc, int n) {
    std::uint64_t c = 0;
    for (int w = 0; w <= 2 * sc.d; ++w) {
        auto cat = catalogue(sc, n, w);
        c += std::uint64_t(cat.first.size()) * std::uint64_t(cat.second.size());
    }
    return c;
}

// Minimal number of intervals l*z + [0, l], z in [-alpha, alpha-1], covering the
// integer interval [lo, hi] (relative coordinates).
inline int box_count(int lo, int hi, int l, int alpha) {
    require(l >= 1 && alpha >= 1 && lo <= hi, errc::invalid_argument, "bad box_count arguments");
    require(lo >= -alpha * l && hi <= alpha * l, errc::out_of_range, "interval outside [-l_n, l_n]");
    int count = 0, cur = lo;
    for (;;) {
        int z = std::min(int(std::floor(double(cur) / l)), alpha - 1);
        ++count;
        int right = l * (z + 1);
        if (hi <= right) return count;
        cur = right + 1;
    }
}

// Same count for the real interval [lo, hi]. Differs from box_count only when
// l = 1, where two non-adjacent unit intervals can cover a run of integers.
inline int hull_box_count(int lo, int hi, int l, int alpha) {
    require(l >= 1 && alpha >= 1 && lo <= hi, errc::invalid_argument, "bad box_count arguments");
    require(lo >= -alpha * l && hi <= alpha * l, errc::out_of_range, "interval outside [-l_n, l_n]");
    int zlo = std::min(int(std::floor(double(lo) / l)), alpha - 1);
    int zhi = std::min(int(std::ceil(double(hi) / l)) - 1, alpha - 1);
    return std::max(1, zhi - zlo + 1);
}

// ---------------------------------------------------------------------------
// Separation of two boxes.

struct Separation {
    double spatial_gap = 0.0;  // largest per-coordinate gap between the spatial parts
    double temporal_gap = 0.0; // gap between the time intervals
    double need_spatial = 0.0, need_temporal = 0.0;
    bool temporal = false; // which requirement was checked
    bool valid = false;
};

inline Separation separation(const SpaceTimeBox& A, const SpaceTimeBox& B) {
    Separation s;
    for (int i = 0; i < A.dim(); ++i) {
        double g = std::max(B.space.lo[i] - A.space.hi[i], A.space.lo[i] - B.space.hi[i]);
        s.spatial_gap = std::max(s.spatial_gap, g);
    }
    s.temporal_gap = std::max({0.0, B.s - A.t, A.s - B.t});
    return s;
}

// Certificate for a child pair at scale n - 1: temporal pairs need the vertical
// gap, spatial pairs the spatial one.
inline Separation certify(const ScaleScheme& sc, int n, int which, const SpaceTimeBox& A, const SpaceTimeBox& B) {
    Separation s = separation(A, B);
    const double h = sc.h(n - 1), l = sc.l(n - 1), tol = 1e-9 * sc.h(n);
    s.need_temporal = (sc.beta_at(n) / 2 - 2) * h;
    s.need_spatial = (sc.alpha / 2.0 - 2) * 2 * l;
    s.temporal = which == 0;
    s.valid = s.temporal ? s.temporal_gap >= s.need_temporal - tol : s.spatial_gap >= s.need_spatial;
    return s;
}

// ---------------------------------------------------------------------------
// Path-guided cascading.

namespace detail {

struct Piece {
    Site x;
    double a, b; // occupied on [a, b)
};

inline std::vector<Piece> pieces_of(const Path& p) {
    std::vector<Piece> out;
    Site x = p.start_site;
    double a = p.start_time;
    for (const auto& [u, y] : p.jumps) {
        out.push_back({x, a, u});
        x = y;
        a = u;
    }
    out.push_back({x, a, p.end_time});
    return out;
}

inline Path path_of(const std::vector<Piece>& ps, std::size_t from, std::size_t to, double t_end) {
    Path p;
    p.start_site = ps[from].x;
    p.start_time = ps[from].a;
    for (std::size_t i = from + 1; i <= to; ++i) p.jumps.push_back({ps[i].a, ps[i].x});
    p.end_time = t_end;
    return p;
}

// Shortest stretch of the path joining the faces x_j = lo and x_j = hi while
// staying in lo <= x_j <= hi. Returns the piece range.
inline std::optional<std::pair<std::size_t, std::size_t>> minimal_crossing(const std::vector<Piece>& ps, int j, int lo,
                                                                           int hi) {
    long last_lo = -1, last_hi = -1;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        int c = ps[i].x[j];
        if (c < lo || c > hi) {
            last_lo = last_hi = -1;
            continue;
        }
        if (c == hi && last_lo >= 0) return std::pair{std::size_t(last_lo), i};
        if (c == lo && last_hi >= 0) return std::pair{std::size_t(last_hi), i};
        if (c == lo) last_lo = long(i);
        if (c == hi) last_hi = long(i);
    }
    return std::nullopt;
}

struct Located {
    Site lo; // lower corner of the chosen 2l-box (absolute), tracked directions only
    bool stopped = false;
    int j0 = -1, sign0 = 0;
    std::size_t stop_piece = 0;
};

// Replays the box counts along the pieces in the tracked directions. Before the
// first time some count reaches 3 the path fits in a box l*z + [0, 2l]; z is the
// lexicographically smallest choice.
inline Located locate(const std::vector<Piece>& ps, const std::vector<int>& dirs, const Anchor& an, int l, int alpha) {
    Located out;
    std::vector<int> mn(dirs.size()), mx(dirs.size());
    for (std::size_t q = 0; q < dirs.size(); ++q) mn[q] = mx[q] = ps[0].x[dirs[q]] - an.x[dirs[q]];
    std::size_t end = ps.size();
    for (std::size_t i = 1; i < ps.size() && !out.stopped; ++i)
        for (std::size_t q = 0; q < dirs.size(); ++q) {
            int c = ps[i].x[dirs[q]] - an.x[dirs[q]];
            int nmn = std::min(mn[q], c), nmx = std::max(mx[q], c);
            if (hull_box_count(nmn, nmx, l, alpha) >= 3) {
                out.stopped = true;
                out.j0 = dirs[q];
                out.stop_piece = i;
                end = i;
                break;
            }
            mn[q] = nmn;
            mx[q] = nmx;
        }
    (void)end;
    for (std::size_t q = 0; q < dirs.size(); ++q) {
        int z = std::max(-alpha, int(std::ceil(double(mx[q] - 2 * l) / l)));
        require(l * z <= mn[q] && z <= alpha - 2, errc::no_witness, "box count replay inconsistent");
        out.lo[dirs[q]] = an.x[dirs[q]] + l * z;
    }
    if (out.stopped) {
        int c = ps[out.stop_piece].x[out.j0];
        out.sign0 = c > out.lo[out.j0] + 2 * l ? +1 : -1;
    }
    return out;
}

} // namespace detail

struct ChildChoice {
    SpaceTimeBox box;
    int event = -1; // -1 temporal half, else half-box index k
    Path sub;       // stretch of the parent witness realizing the event
};

struct CascadeStep {
    int which = 0; // catalogue: 0 temporal, 1 + k spatial
    SpaceTimeBox parent;
    ChildChoice first, second;
    std::size_t index_first = 0, index_second = 0; // positions inside the catalogue lists
    Separation cert;
    std::uint64_t pairs_examined = 0;
};

namespace detail {

// Given a stretch inside a fixed 2l-box over [a, b] making a half-crossing of
// that box's half `event`, picks the time window i*h + [0, h], i in (1/2)Z, so
// that the child box is half-crossed (spatially, or temporally when the stretch
// is too long).
inline ChildChoice time_adjust(const SpatialBox& sp, const Path& stretch, int event, const Anchor& an, double h,
                               double beta) {
    const double x = (stretch.start_time - an.t) / h, y = (stretch.end_time - an.t) / h;
    double i = -1;
    int ev = event;
    if (y - x <= 1.0) {
        double cand = std::floor(2 * x) / 2;
        cand = std::min(cand, beta - 1);
        if (cand >= 0 && cand + 1 >= y) i = cand;
    }
    if (i < 0) {
        i = std::ceil(2 * x) / 2;
        ev = -1;
        require(i + 0.5 <= y + 1e-12 && i <= beta - 1, errc::no_witness, "no time window fits the stretch");
    }
    ChildChoice c;
    c.box = {sp, an.t + i * h, an.t + (i + 1) * h};
    c.event = ev;
    if (ev < 0)
        c.sub = stretch.restrict(c.box.s, c.box.mid());
    else
        c.sub = stretch;
    return c;
}

// Child for a temporal stretch on [s0, s0 + h].
inline ChildChoice temporal_child(const Path& stretch, const ScaleScheme& sc, int n, const Anchor& an) {
    const int l = sc.l(n - 1);
    auto ps = pieces_of(stretch);
    std::vector<int> dirs;
    for (int i = 0; i < sc.d; ++i) dirs.push_back(i);
    auto loc = locate(ps, dirs, an, l, sc.alpha);
    Site hi = loc.lo;
    for (int i = 0; i < sc.d; ++i) hi[i] += 2 * l;
    ChildChoice c;
    c.box = {SpatialBox(sc.d, loc.lo, hi), stretch.start_time, stretch.end_time};
    if (!loc.stopped) {
        c.event = -1;
        c.sub = stretch.restrict(c.box.s, c.box.mid());
        return c;
    }
    std::vector<Piece> prefix(ps.begin(), ps.begin() + long(loc.stop_piece));
    int j0 = loc.j0;
    int lo = loc.sign0 > 0 ? loc.lo[j0] + l : loc.lo[j0];
    auto seg = minimal_crossing(prefix, j0, lo, lo + l);
    require(seg.has_value(), errc::no_witness, "expected a half-box crossing before the stopping time");
    c.event = loc.sign0 > 0 ? j0 : j0 + sc.d;
    c.sub = path_of(prefix, seg->first, seg->second, prefix[seg->second].a);
    return c;
}

// Child for a spatial stretch inside the slab [slab_lo, slab_lo + 2l] of direction j.
inline ChildChoice spatial_child(const std::vector<Piece>& ps, int j, int slab_lo, const ScaleScheme& sc, int n,
                                 const Anchor& an) {
    const int l = sc.l(n - 1);
    auto seg = minimal_crossing(ps, j, slab_lo, slab_lo + 2 * l);
    require(seg.has_value(), errc::no_witness, "witness does not cross the slab");
    std::vector<Piece> sp(ps.begin() + long(seg->first), ps.begin() + long(seg->second) + 1);
    sp.back().b = sp.back().a;
    std::vector<int> dirs;
    for (int i = 0; i < sc.d; ++i)
        if (i != j) dirs.push_back(i);
    Located loc;
    if (!dirs.empty()) loc = locate(sp, dirs, an, l, sc.alpha);
    loc.lo[j] = slab_lo;
    Site hi = loc.lo;
    for (int i = 0; i < sc.d; ++i) hi[i] += 2 * l;
    SpatialBox box(sc.d, loc.lo, hi);
    int event;
    std::optional<std::pair<std::size_t, std::size_t>> half;
    std::vector<Piece> use = sp;
    if (!loc.stopped) {
        // full crossing in direction j: take the upper half
        event = j;
        half = minimal_crossing(use, j, slab_lo + l, slab_lo + 2 * l);
    } else {
        use.assign(sp.begin(), sp.begin() + long(loc.stop_piece));
        int j0 = loc.j0;
        int lo = loc.sign0 > 0 ? loc.lo[j0] + l : loc.lo[j0];
        event = loc.sign0 > 0 ? j0 : j0 + sc.d;
        half = minimal_crossing(use, j0, lo, lo + l);
    }
    require(half.has_value(), errc::no_witness, "expected a half-box crossing");
    Path stretch = path_of(use, half->first, half->second, use[half->second].a);
    return time_adjust(box, stretch, event, an, sc.h(n - 1), sc.beta_at(n));
}

inline std::size_t index_in(const std::vector<SpaceTimeBox>& v, const SpaceTimeBox& b) {
    const double tol = 1e-9 * std::max(1.0, std::fabs(b.t));
    for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i].space == b.space && std::fabs(v[i].s - b.s) <= tol && std::fabs(v[i].t - b.t) <= tol) return i;
    return v.size();
}

inline bool event_holds(const CrossingReport& r, int ev) {
    return ev < 0 ? r.temp_half : r.spatial_half[std::size_t(ev)];
}

} // namespace detail

// From a witness of the half-crossing `event` (-1 temporal, else half-box index)
// of the scale-n box at `an`, finds a catalogue pair whose boxes are both
// half-crossed. The realization is checked on both children; failure throws
// NoWitness.
inline CascadeStep cascading_witness(const Realization& real, const ScaleScheme& sc, int n, const Anchor& an, int event,
                                     const Path& witness) {
    require(n >= 1, errc::invalid_argument, "cascading needs n >= 1");
    const SpaceTimeBox B = scale_box(sc, n, an);
    const double h = sc.h(n - 1), beta = sc.beta_at(n);
    const int l = sc.l(n - 1), L = sc.l(n);
    CascadeStep st;
    st.parent = B;
    st.pairs_examined = 1;
    if (event < 0) {
        require(validate_path(real, witness, &B.space, B.s, B.mid()) &&
                    std::fabs(witness.start_time - B.s) <= 1e-12 * std::max(1.0, std::fabs(B.s)) &&
                    std::fabs(witness.end_time - B.mid()) <= 1e-9 * std::max(1.0, std::fabs(B.t)),
                errc::no_witness, "witness is not a temporal half-crossing");
        st.which = 0;
        Anchor a1{an.x, an.t};
        st.first = detail::temporal_child(witness.restrict(an.t, an.t + h), sc, n, a1);
        double up = (beta / 2 - 1) * h;
        st.second = detail::temporal_child(witness.restrict(an.t + up, an.t + up + h), sc, n, a1);
    } else {
        const int j = half_dir(event, sc.d), sign = half_sign(event, sc.d);
        SpatialBox hb = B.half(j, sign);
        require(validate_path(real, witness, &hb, B.s, B.t), errc::no_witness, "witness is not inside the half-box");
        st.which = 1 + event;
        auto ps = detail::pieces_of(witness);
        int s1 = sign > 0 ? 0 : -2 * l, s2 = sign > 0 ? L - 2 * l : -L;
        st.first = detail::spatial_child(ps, j, an.x[j] + s1, sc, n, an);
        st.second = detail::spatial_child(ps, j, an.x[j] + s2, sc, n, an);
    }
    auto cat = catalogue(sc, n, st.which, an);
    st.index_first = detail::index_in(cat.first, st.first.box);
    st.index_second = detail::index_in(cat.second, st.second.box);
    require(st.index_first < cat.first.size() && st.index_second < cat.second.size(), errc::no_witness,
            "chosen boxes are not in the catalogue");
    st.cert = certify(sc, n, st.which, st.first.box, st.second.box);
    for (const ChildChoice* c : {&st.first, &st.second}) {
        require(validate_path(real, c->sub, nullptr, c->box.s, c->box.t), errc::no_witness, "child stretch invalid");
        auto rep = detect_report(real, c->box);
        require(rep.half_crossing && detail::event_holds(rep, c->event), errc::no_witness,
                "child box is not half-crossed");
    }
    return st;
}

// Witness for the first half-crossing event that holds in the report order
// (temporal, then half-boxes 0..2d-1).
inline std::optional<std::pair<int, Path>> first_event_witness(const Realization& real, const SpaceTimeBox& box) {
    auto rep = detect_report(real, box, true);
    if (rep.temp_half) return std::pair{-1, *rep.temp_half_witness};
    for (int k = 0; k < 2 * box.dim(); ++k)
        if (rep.spatial_half[std::size_t(k)]) return std::pair{k, *rep.spatial_half_witness[std::size_t(k)]};
    return std::nullopt;
}

// Exhaustive reference: scans every catalogue pair for H(B) and H(B').
inline std::optional<std::pair<int, std::pair<std::size_t, std::size_t>>>
scan_catalogues(const Realization& real, const ScaleScheme& sc, int n, const Anchor& an, std::uint64_t* examined = nullptr) {
    std::uint64_t ex = 0;
    for (int w = 0; w <= 2 * sc.d; ++w) {
        auto cat = catalogue(sc, n, w, an);
        std::vector<int> h1, h2;
        for (const auto& b : cat.first) h1.push_back(detect_report(real, b).half_crossing);
        for (const auto& b : cat.second) h2.push_back(detect_report(real, b).half_crossing);
        for (std::size_t i = 0; i < h1.size(); ++i)
            for (std::size_t k = 0; k < h2.size(); ++k) {
                ++ex;
                if (h1[i] && h2[k]) {
                    if (examined) *examined = ex;
                    return std::pair{w, std::pair{i, k}};
                }
            }
    }
    if (examined) *examined = ex;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Hierarchies.

struct Hierarchy {
    int k = 0;
    std::map<std::string, SpaceTimeBox> nodes; // binary word -> box
    std::map<std::string, int> which;          // catalogue used below each inner node
};

inline std::string common_ancestor(const std::string& a, const std::string& b) {
    std::size_t i = 0;
    while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
    return a.substr(0, i);
}

// Leaves ordered by bottom time, then word.
inline std::vector<std::pair<std::string, SpaceTimeBox>> leaves(const Hierarchy& H) {
    std::vector<std::pair<std::string, SpaceTimeBox>> out;
    for (const auto& [w, b] : H.nodes)
        if (int(w.size()) == H.k) out.push_back({w, b});
    std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.second.s < y.second.s; });
    return out;
}

// Every inner node's children are a pair from that node's catalogues.
inline bool is_achievable(const Hierarchy& H, const ScaleScheme& sc) {
    for (const auto& [w, b] : H.nodes) {
        if (int(w.size()) == H.k) continue;
        auto c0 = H.nodes.find(w + "0"), c1 = H.nodes.find(w + "1");
        if (c0 == H.nodes.end() || c1 == H.nodes.end()) return false;
        int n = H.k - int(w.size());
        bool ok = false;
        for (int wh = 0; wh <= 2 * sc.d && !ok; ++wh) {
            auto cat = catalogue(sc, n, wh, anchor_of(b));
            ok = detail::index_in(cat.first, c0->second) < cat.first.size() &&
                 detail::index_in(cat.second, c1->second) < cat.second.size();
        }
        if (!ok) return false;
    }
    return true;
}

// Leaves a != b are separated through the children of a ^ b.
inline bool leaves_separated(const Hierarchy& H, const ScaleScheme& sc) {
    auto L = leaves(H);
    const double need_t = (sc.beta_at(1) / 2 - 2) * sc.h(0) - 1e-9 * sc.h(1), need_s = (sc.alpha / 2.0 - 2) * 2 * sc.l(0);
    for (std::size_t i = 0; i < L.size(); ++i)
        for (std::size_t k = i + 1; k < L.size(); ++k) {
            auto s = separation(L[i].second, L[k].second);
            auto anc = common_ancestor(L[i].first, L[k].first);
            bool temporal = H.which.at(anc) == 0;
            if (temporal ? s.temporal_gap < need_t : s.spatial_gap < need_s) return false;
        }
    return true;
}

inline double hierarchy_count(std::uint64_t C, int k) { return std::pow(double(C), std::pow(2.0, k) - 1); }

// Visits every achievable hierarchy of the scale-k box at `an` (k <= 2).
inline std::uint64_t for_each_hierarchy(const ScaleScheme& sc, int k, const Anchor& an,
                                        const std::function<void(const Hierarchy&)>& visit) {
    require(k >= 0, errc::invalid_argument, "k must be >= 0");
    require(k <= 2, errc::too_large, "exhaustive hierarchy enumeration limited to k <= 2");
    std::uint64_t count = 0;
    Hierarchy H;
    H.k = k;
    H.nodes[""] = scale_box(sc, k, an);
    std::vector<std::string> order; // inner nodes, parents before children
    for (int depth = 0; depth < k; ++depth)
        for (int m = 0; m < (1 << depth); ++m) {
            std::string w;
            for (int b = depth - 1; b >= 0; --b) w += char('0' + ((m >> b) & 1));
            order.push_back(w);
        }
    std::map<std::tuple<int, int, Site, double>, Catalogue> cache;
    auto cached = [&](int n, int wh, const Anchor& a) -> const Catalogue& {
        auto key = std::tuple{n, wh, a.x, a.t};
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, catalogue(sc, n, wh, a)).first;
        return it->second;
    };
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
        if (pos == order.size()) {
            ++count;
            visit(H);
            return;
        }
        const auto& w = order[pos];
        int n = k - int(w.size());
        auto parent = H.nodes.at(w);
        for (int wh = 0; wh <= 2 * sc.d; ++wh) {
            const auto& cat = cached(n, wh, anchor_of(parent));
            for (const auto& b0 : cat.first)
                for (const auto& b1 : cat.second) {
                    H.nodes[w + "0"] = b0;
                    H.nodes[w + "1"] = b1;
                    H.which[w] = wh;
                    rec(pos + 1);
                }
        }
    };
    rec(0);
    return count;
}

inline Hierarchy sample_hierarchy(const ScaleScheme& sc, int k, const Anchor& an, Rng& rng) {
    Hierarchy H;
    H.k = k;
    H.nodes[""] = scale_box(sc, k, an);
    for (int depth = 0; depth < k; ++depth)
        for (int m = 0; m < (1 << depth); ++m) {
            std::string w;
            for (int b = depth - 1; b >= 0; --b) w += char('0' + ((m >> b) & 1));
            int n = k - depth;
            auto an2 = anchor_of(H.nodes.at(w));
            std::uint64_t pick = rng.below(pair_count(sc, n));
            for (int wh = 0; wh <= 2 * sc.d; ++wh) {
                auto cat = catalogue(sc, n, wh, an2);
                std::uint64_t sz = cat.first.size() * cat.second.size();
                if (pick < sz) {
                    H.nodes[w + "0"] = cat.first[pick / cat.second.size()];
                    H.nodes[w + "1"] = cat.second[pick % cat.second.size()];
                    H.which[w] = wh;
                    break;
                }
                pick -= sz;
            }
        }
    return H;
}

// Repeated cascading from a half-crossed scale-k box down to scale 0. The
// resulting hierarchy is achievable and all of its boxes are half-crossed.
struct CascadeTrace {
    Hierarchy hierarchy;
    std::vector<CascadeStep> steps;
    std::uint64_t max_pairs_examined = 0;
};

inline std::optional<CascadeTrace> cascade_hierarchy(const Realization& real, const ScaleScheme& sc, int k,
                                                     const Anchor& an) {
    auto root = scale_box(sc, k, an);
    auto ev = first_event_witness(real, root);
    if (!ev) return std::nullopt;
    CascadeTrace tr;
    tr.hierarchy.k = k;
    tr.hierarchy.nodes[""] = root;
    std::function<void(const std::string&, const Anchor&, int, const Path&)> rec =
        [&](const std::string& w, const Anchor& a, int event, const Path& wit) {
            int n = k - int(w.size());
            if (n == 0) return;
            auto st = cascading_witness(real, sc, n, a, event, wit);
            tr.max_pairs_examined = std::max(tr.max_pairs_examined, st.pairs_examined);
            tr.hierarchy.nodes[w + "0"] = st.first.box;
            tr.hierarchy.nodes[w + "1"] = st.second.box;
            tr.hierarchy.which[w] = st.which;
            tr.steps.push_back(st);
            for (const auto& [suffix, ch] : {std::pair{"0", st.first}, std::pair{"1", st.second}}) {
                if (n - 1 == 0) {
                    tr.hierarchy.nodes[w + suffix] = ch.box;
                    continue;
                }
                // Child witness: the stretch is confined to the child box or its half.
                auto e2 = first_event_witness(real, ch.box);
                require(e2.has_value(), errc::no_witness, "child lost its half-crossing");
                rec(w + suffix, anchor_of(ch.box), e2->first, e2->second);
            }
        };
    rec("", an, ev->first, ev->second);
    return tr;
}

// ---------------------------------------------------------------------------
// Monte Carlo estimates of the half-crossing probabilities at a fixed anchor.

struct UnEstimate {
    int n = 0;
    stats::Estimate t_hat;              // temporal half-crossing
    std::vector<stats::Estimate> s_k;   // each half-box
    stats::Estimate s_hat;              // the largest of s_k
    stats::Estimate h_hat;              // H(B_n)
    double u_hat = 0.0;                 // s_hat + t_hat
    stats::Interval u_ci;
    double max_cov = 0.0;               // over the extremal catalogue pairs
};

struct RecurrenceCheck {
    int n = 0;
    double u_prev = 0.0, u_n = 0.0;
    std::uint64_t C = 0;
    double ratio_sq = 0.0; // (h_n / h_{n-1})^2
    double bound = 0.0;    // C u_{n-1}^2 + C max_cov
    bool consistent = false;
};

inline UnEstimate estimate_u_n(const Model& model, const ScaleScheme& sc, int n, std::size_t replicas, std::uint64_t seed,
                               bool with_cov = true) {
    require(replicas >= 1, errc::invalid_argument, "need at least one replica");
    const SpaceTimeBox B = scale_box(sc, n, {});
    const int d = sc.d;
    std::uint64_t tk = 0, hk = 0;
    std::vector<std::uint64_t> sk(std::size_t(2 * d), 0);
    // extremal pairs: first and last pair of every catalogue
    std::vector<std::pair<SpaceTimeBox, SpaceTimeBox>> pairs;
    if (with_cov && n >= 1)
        for (int w = 0; w <= 2 * d; ++w) {
            auto cat = catalogue(sc, n, w, {});
            pairs.push_back({cat.first.front(), cat.second.front()});
            pairs.push_back({cat.first.back(), cat.second.back()});
        }
    std::vector<double> sx(pairs.size()), sy(pairs.size()), sxy(pairs.size());
    for (std::size_t r = 0; r < replicas; ++r) {
        auto real = build_realization(model, B.space, {B.s, B.t}, seed, r);
        auto rep = detect_report(real, B);
        tk += rep.temp_half;
        hk += rep.half_crossing;
        for (int k = 0; k < 2 * d; ++k) sk[std::size_t(k)] += rep.spatial_half[std::size_t(k)];
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            double x = detect_report(real, pairs[p].first).half_crossing;
            double y = detect_report(real, pairs[p].second).half_crossing;
            sx[p] += x;
            sy[p] += y;
            sxy[p] += x * y;
        }
    }
    UnEstimate u;
    u.n = n;
    u.t_hat = stats::summarize(tk, replicas);
    u.h_hat = stats::summarize(hk, replicas);
    std::size_t best = 0;
    for (int k = 0; k < 2 * d; ++k) {
        u.s_k.push_back(stats::summarize(sk[std::size_t(k)], replicas));
        if (sk[std::size_t(k)] > sk[best]) best = std::size_t(k);
    }
    u.s_hat = u.s_k[best];
    u.u_hat = u.s_hat.value + u.t_hat.value;
    u.u_ci = {u.s_hat.ci.lo + u.t_hat.ci.lo, std::min(2.0, u.s_hat.ci.hi + u.t_hat.ci.hi)};
    const double N = double(replicas);
    for (std::size_t p = 0; p < pairs.size(); ++p)
        u.max_cov = std::max(u.max_cov, sxy[p] / N - (sx[p] / N) * (sy[p] / N));
    return u;
}

inline RecurrenceCheck recurrence_check(const ScaleScheme& sc, const UnEstimate& prev, const UnEstimate& cur) {
    RecurrenceCheck rc;
    rc.n = cur.n;
    rc.u_prev = prev.u_hat;
    rc.u_n = cur.u_hat;
    rc.C = pair_count(sc, cur.n);
    rc.ratio_sq = std::pow(sc.h(cur.n) / sc.h(cur.n - 1), 2);
    rc.bound = double(rc.C) * (prev.u_hat * prev.u_hat + std::max(0.0, cur.max_cov));
    rc.consistent = cur.u_ci.lo <= rc.bound;
    return rc;
}

} // namespace gcp
