#pragma once

// Crossing and half-crossing events of space-time boxes.

#include <optional>
#include <vector>

#include "dynamics.hpp"
#include "error.hpp"
#include "lattice.hpp"
#include "realization.hpp"

namespace gcp {

inline int floor_div2(int x) { return x >= 0 ? x / 2 : -((-x + 1) / 2); }
inline int ceil_div2(int x) { return -floor_div2(-x); }

struct SpaceTimeBox {
    SpatialBox space;
    double s = 0.0, t = 0.0;

    SpaceTimeBox() = default;
    SpaceTimeBox(SpatialBox sp, double s0, double t0) : space(sp), s(s0), t(t0) {
        require(s0 < t0, errc::invalid_argument, "space-time box needs s < t");
    }

    int dim() const { return space.d; }
    double mid() const { return 0.5 * (s + t); }

    // Face perpendicular to direction j (0-based); sign -1 for x_j = a_j, +1 for x_j = b_j.
    SpatialBox face(int j, int sign) const {
        SpatialBox f = space;
        if (sign < 0)
            f.hi[j] = f.lo[j];
        else
            f.lo[j] = f.hi[j];
        return f;
    }
    // Half-boxes split at (a_j + b_j)/2: floor for the lower half, ceil for the upper.
    SpatialBox half(int j, int sign) const {
        SpatialBox h = space;
        int twice_mid = space.lo[j] + space.hi[j];
        if (sign < 0)
            h.hi[j] = floor_div2(twice_mid);
        else
            h.lo[j] = ceil_div2(twice_mid);
        return h;
    }
    SpaceTimeBox temporal_half() const { return {space, s, mid()}; }
    SpaceTimeBox translated(const Site& dx, double dt) const {
        SpatialBox sp(space.d, space.lo + dx, space.hi + dx);
        return {sp, s + dt, t + dt};
    }
    bool contains(const SpaceTimeBox& o) const { return space.contains(o.space) && s <= o.s && o.t <= t; }

    friend bool operator==(const SpaceTimeBox&, const SpaceTimeBox&) = default;
};

struct Cylinder {
    SpatialBox space;
    double u0 = 0.0, u1 = 0.0;
};

using SpaceTimeSet = std::vector<Cylinder>;

struct CrossingResult {
    bool crossed = false;
    std::optional<Path> witness;
};

// Is there a path starting in C, ending in D and staying in H?
inline CrossingResult detect_crossing(const Realization& real, const SpaceTimeSet& C, const SpaceTimeSet& D,
                                      const SpaceTimeBox& H) {
    for (const auto& c : C)
        require(H.space.contains(c.space) && H.s <= c.u0 && c.u1 <= H.t && c.u0 <= c.u1, errc::invalid_argument,
                "C must lie inside H");
    for (const auto& c : D)
        require(H.space.contains(c.space) && H.s <= c.u0 && c.u1 <= H.t && c.u0 <= c.u1, errc::invalid_argument,
                "D must lie inside H");
    require(D.size() <= 32, errc::too_large, "at most 32 target pieces");
    SweepConfig cfg;
    cfg.H = H.space;
    cfg.s = H.s;
    cfg.t = H.t;
    for (const auto& c : C) cfg.seeds.push_back({c.space, c.u0, c.u1, 0});
    for (const auto& c : D) cfg.probes.push_back({c.space, c.u0, c.u1, 0});
    cfg.trace_label = 0;
    cfg.stop_when_any_hit = true;
    auto res = multi_sweep(real, cfg);
    const ProbeHit* best = nullptr;
    for (const auto& h : res.hits)
        if (h.hit && (!best || h.t < best->t)) best = &h;
    if (!best) return {};
    return {true, witness_from_trace(res, cfg.H, *best)};
}

// S_j of a box with the given spatial part: crossing between the two faces of
// direction j, in either direction.
inline CrossingResult detect_spatial(const Realization& real, const SpatialBox& sp, double s, double t, int j) {
    SpaceTimeBox B(sp, s, t);
    auto r = detect_crossing(real, {{B.face(j, -1), s, t}}, {{B.face(j, +1), s, t}}, B);
    if (r.crossed) return r;
    return detect_crossing(real, {{B.face(j, +1), s, t}}, {{B.face(j, -1), s, t}}, B);
}

inline CrossingResult detect_temporal(const Realization& real, const SpaceTimeBox& B) {
    return detect_crossing(real, {{B.space, B.s, B.s}}, {{B.space, B.t, B.t}}, B);
}

// Half-box index k in 0..2d-1: k = j for (j,+), k = j + d for (j,-).
inline int half_dir(int k, int d) { return k < d ? k : k - d; }
inline int half_sign(int k, int d) { return k < d ? +1 : -1; }

struct CrossingReport {
    SpaceTimeBox box;
    bool temp_full = false;
    bool temp_half = false;
    std::vector<bool> spatial;      // S_j, j = 0..d-1
    std::vector<bool> spatial_half; // S~_k, k = 0..2d-1
    bool half_crossing = false;
    std::optional<Path> temp_half_witness;
    std::vector<std::optional<Path>> spatial_half_witness;
};

// All crossing booleans from one multi-label sweep over the box.
inline CrossingReport detect_report(const Realization& real, const SpaceTimeBox& box, bool witnesses = false) {
    const int d = box.dim();
    require(real.region().contains(box.space), errc::invalid_argument, "box outside realization region");
    require(real.window().t0 <= box.s && box.t <= real.window().t1, errc::invalid_window, "box outside window");
    SweepConfig cfg;
    cfg.H = box.space;
    cfg.s = box.s;
    cfg.t = box.t;
    cfg.stop_when_all_hit = true;
    // label 0: temporal; probes 0 (middle) and 1 (top)
    cfg.seeds.push_back({box.space, box.s, box.s, 0});
    cfg.probes.push_back({box.space, box.mid(), box.mid(), 0});
    cfg.probes.push_back({box.space, box.t, box.t, 0});
    // labels 1 + 2j, 2 + 2j: full box, direction j, both orientations
    for (int j = 0; j < d; ++j) {
        cfg.seeds.push_back({box.face(j, -1), box.s, box.t, 1 + 2 * j});
        cfg.probes.push_back({box.face(j, +1), box.s, box.t, 1 + 2 * j});
        cfg.seeds.push_back({box.face(j, +1), box.s, box.t, 2 + 2 * j});
        cfg.probes.push_back({box.face(j, -1), box.s, box.t, 2 + 2 * j});
    }
    // labels 1 + 2d + 2k, 2 + 2d + 2k: half box k
    for (int k = 0; k < 2 * d; ++k) {
        int j = half_dir(k, d);
        SpaceTimeBox hb(box.half(j, half_sign(k, d)), box.s, box.t);
        int la = 1 + 2 * d + 2 * k, lb = la + 1;
        cfg.label_regions.push_back({la, hb.space});
        cfg.label_regions.push_back({lb, hb.space});
        cfg.seeds.push_back({hb.face(j, -1), box.s, box.t, la});
        cfg.probes.push_back({hb.face(j, +1), box.s, box.t, la});
        cfg.seeds.push_back({hb.face(j, +1), box.s, box.t, lb});
        cfg.probes.push_back({hb.face(j, -1), box.s, box.t, lb});
    }
    auto res = multi_sweep(real, cfg);
    CrossingReport rep;
    rep.box = box;
    rep.temp_half = res.hits[0].hit;
    rep.temp_full = res.hits[1].hit;
    rep.spatial.resize(std::size_t(d));
    for (int j = 0; j < d; ++j)
        rep.spatial[std::size_t(j)] = res.hits[std::size_t(2 + 2 * j)].hit || res.hits[std::size_t(3 + 2 * j)].hit;
    rep.spatial_half.resize(std::size_t(2 * d));
    for (int k = 0; k < 2 * d; ++k) {
        std::size_t p = std::size_t(2 + 2 * d + 2 * k);
        rep.spatial_half[std::size_t(k)] = res.hits[p].hit || res.hits[p + 1].hit;
    }
    rep.half_crossing = rep.temp_half;
    for (bool b : rep.spatial_half) rep.half_crossing = rep.half_crossing || b;

    rep.spatial_half_witness.resize(std::size_t(2 * d));
    if (witnesses) {
        if (rep.temp_half) rep.temp_half_witness = detect_temporal(real, box.temporal_half()).witness;
        for (int k = 0; k < 2 * d; ++k)
            if (rep.spatial_half[std::size_t(k)])
                rep.spatial_half_witness[std::size_t(k)] =
                    detect_spatial(real, box.half(half_dir(k, d), half_sign(k, d)), box.s, box.t, half_dir(k, d)).witness;
    }
    return rep;
}

} // namespace gcp
