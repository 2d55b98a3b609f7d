#pragma once

// Infection dynamics on a realization: evolve, extinction, and the seeded
// reachability sweep used for paths and crossings.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "error.hpp"
#include "lattice.hpp"
#include "realization.hpp"

namespace gcp {

// Right-continuous step path: start_site on [start_time, first jump), ...
struct Path {
    Site start_site;
    double start_time = 0.0;
    std::vector<std::pair<double, Site>> jumps;
    double end_time = 0.0;

    Site site_at(double t) const {
        Site x = start_site;
        for (const auto& [u, y] : jumps) {
            if (u > t) break;
            x = y;
        }
        return x;
    }
    Site end_site() const { return jumps.empty() ? start_site : jumps.back().second; }

    // Restriction to [a, b] (a, b inside [start_time, end_time]).
    Path restrict(double a, double b) const {
        Path p;
        p.start_site = site_at(a);
        p.start_time = a;
        p.end_time = b;
        for (const auto& j : jumps)
            if (j.first > a && j.first <= b) p.jumps.push_back(j);
        return p;
    }
};

// Checks the path against the marks: adjacency, jump times on usable transmission
// marks, no cure mark while a site is occupied, and (optionally) confinement to a
// space-time box.
inline bool validate_path(const Realization& real, const Path& p, const SpatialBox* box = nullptr,
                          double s = -kInf, double t = kInf) {
    if (p.end_time < p.start_time || p.start_time < s || p.end_time > t) return false;
    const auto& R = real.region();
    Site x = p.start_site;
    double since = p.start_time;
    auto ok_site = [&](const Site& y) { return R.contains(y) && (!box || box->contains(y)); };
    if (!ok_site(x)) return false;
    double prev = p.start_time;
    bool first = true;
    for (const auto& [u, y] : p.jumps) {
        if (u < p.start_time || u > p.end_time) return false;
        if (!first && !(u > prev)) return false;
        first = false;
        prev = u;
        if (!ok_site(y) || norm1(y - x) != 1) return false;
        // occupancy of x on [since, u)
        const auto& cm = real.cure(x);
        auto i = cm.lower(since);
        if (i < cm.size() && cm.times[i] < u) return false;
        Edge e = make_edge(x, y);
        const auto& tm = real.trans(e);
        if (!std::binary_search(tm.times.begin(), tm.times.end(), u)) return false;
        if (!real.effective(R.edge_slot(e), u)) return false;
        x = y;
        since = u;
    }
    return !real.cure(x).any_in(since, p.end_time);
}

// ---------------------------------------------------------------------------

struct TrajEvent {
    double t;
    std::uint32_t site;
    bool infected;
};

struct Trajectory {
    SpatialBox region;
    double t_start = 0.0, t_end = 0.0;
    std::vector<std::uint32_t> initial;
    std::vector<TrajEvent> log;

    std::vector<char> state_at(double t) const {
        std::vector<char> st(region.size(), 0);
        for (auto i : initial) st[i] = 1;
        for (const auto& e : log) {
            if (e.t > t) break;
            st[e.site] = e.infected ? 1 : 0;
        }
        return st;
    }
    std::vector<Site> infected_at(double t) const {
        auto st = state_at(t);
        std::vector<Site> out;
        for (std::size_t i = 0; i < st.size(); ++i)
            if (st[i]) out.push_back(region.site(i));
        return out;
    }
    std::size_t count_at(double t) const {
        auto st = state_at(t);
        return std::size_t(std::count(st.begin(), st.end(), 1));
    }
    // Time at which the infected set first becomes empty.
    std::optional<double> extinction() const {
        std::size_t n = initial.size();
        if (n == 0) return t_start;
        for (const auto& e : log) {
            n += e.infected ? 1 : std::size_t(-1);
            if (n == 0) return e.t;
        }
        return std::nullopt;
    }
    std::vector<double> event_times() const {
        std::vector<double> ts;
        for (const auto& e : log) ts.push_back(e.t);
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
        return ts;
    }
};

namespace detail {

// Event-driven infection sweep. `on_change(t, site, infected)` is called for each
// state change; returning false stops the sweep.
template <class OnChange>
void infection_sweep(const Realization& real, std::vector<char>& st, double from, double upTo,
                     const std::vector<char>* mask, OnChange&& on_change) {
    const auto& R = real.region();
    const auto& tl = real.timeline();
    const auto d = std::size_t(R.d);
    std::size_t stride[kMaxDim];
    for (int i = 0; i < R.d; ++i) stride[i] = R.stride(i);
    for (std::size_t k = real.timeline_from(from); k < tl.size(); ++k) {
        const Event& ev = tl[k];
        if (ev.t > upTo) break;
        if (ev.kind == EventKind::Cure) {
            if (st[ev.idx]) {
                st[ev.idx] = 0;
                if (!on_change(ev.t, ev.idx, false)) return;
            }
        } else {
            std::size_t a = ev.idx / d, b = a + stride[ev.idx % d];
            if (st[a] == st[b]) continue;
            std::size_t tgt = st[a] ? b : a;
            if (mask && !(*mask)[tgt]) continue;
            st[tgt] = 1;
            if (!on_change(ev.t, std::uint32_t(tgt), true)) return;
        }
    }
}

inline std::vector<char> initial_state(const Realization& real, const std::vector<Site>& A,
                                       const std::vector<char>* mask) {
    std::vector<char> st(real.region().size(), 0);
    for (const auto& x : A) {
        require(real.region().contains(x), errc::invalid_argument, "initial site outside region");
        auto i = real.region().index(x);
        if (!mask || (*mask)[i]) st[i] = 1;
    }
    return st;
}

} // namespace detail

// Process started from A at time `from` (window start by default). `mask`, when
// given, restricts the process to the sites it marks.
inline Trajectory evolve(const Realization& real, const std::vector<Site>& A, double upTo,
                         std::optional<double> from = std::nullopt, const std::vector<char>* mask = nullptr) {
    double t0 = from.value_or(real.window().t0);
    require(upTo <= real.window().t1 && t0 >= real.window().t0, errc::invalid_window, "evolve outside window");
    Trajectory tr;
    tr.region = real.region();
    tr.t_start = t0;
    tr.t_end = upTo;
    auto st = detail::initial_state(real, A, mask);
    for (std::size_t i = 0; i < st.size(); ++i)
        if (st[i]) tr.initial.push_back(std::uint32_t(i));
    detail::infection_sweep(real, st, t0, upTo, mask, [&](double t, std::uint32_t i, bool inf) {
        tr.log.push_back({t, i, inf});
        return true;
    });
    return tr;
}

struct Extinction {
    double value = 0.0;
    bool censored = false;
};

inline Extinction extinction_time(const Realization& real, const std::vector<Site>& A, double horizon,
                                  std::optional<double> from = std::nullopt, const std::vector<char>* mask = nullptr) {
    require(!A.empty(), errc::invalid_argument, "extinction_time needs a nonempty initial set");
    double t0 = from.value_or(real.window().t0);
    require(horizon <= real.window().t1, errc::invalid_window, "horizon beyond window");
    auto st = detail::initial_state(real, A, mask);
    auto n = std::size_t(std::count(st.begin(), st.end(), 1));
    if (n == 0) return {t0, false};
    Extinction out{horizon, true};
    detail::infection_sweep(real, st, t0, horizon, mask, [&](double t, std::uint32_t, bool inf) {
        if (inf) {
            ++n;
        } else if (--n == 0) {
            out = {t, false};
            return false;
        }
        return true;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Multi-label seeded sweep inside a space-time box H = space x [s, t].
//
// Each label is a separate reachability question. A seed keeps its label pinned on
// its sites during [u0, u1] (a cure there does not remove it); a probe reports the
// first time its label is present on one of its sites during [u0, u1].

struct SeedSpec {
    SpatialBox space;
    double u0, u1;
    int label;
};

struct ProbeSpec {
    SpatialBox space;
    double u0, u1;
    int label;
};

struct SweepConfig {
    SpatialBox H;
    double s = 0.0, t = 0.0;
    std::vector<SeedSpec> seeds;
    std::vector<ProbeSpec> probes;
    std::vector<std::pair<int, SpatialBox>> label_regions; // label confined to a sub-box of H
    int trace_label = -1;
    bool stop_when_all_hit = true;
    bool stop_when_any_hit = false;
};

struct ProbeHit {
    bool hit = false;
    double t = 0.0;
    std::uint32_t local = 0;
    int rec = -1;
};

struct TraceRec {
    double t;
    std::uint32_t local;
    int parent;
    std::uint8_t kind; // 0 seed, 1 re-seed after a cure, 2 transmission
};

struct SweepResult {
    std::vector<ProbeHit> hits;
    std::vector<TraceRec> trace;
};

inline SweepResult multi_sweep(const Realization& real, const SweepConfig& cfg) {
    const auto& R = real.region();
    const auto& H = cfg.H;
    require(R.contains(H), errc::invalid_argument, "sweep box outside the region");
    require(cfg.probes.size() <= 32, errc::too_large, "at most 32 probes");
    const std::size_t n = H.size();
    const std::size_t d = std::size_t(R.d);

    std::vector<std::int32_t> local_of(R.size(), -1);
    for (std::size_t i = 0; i < n; ++i) local_of[R.index(H.site(i))] = std::int32_t(i);

    std::uint32_t restricted = 0;
    for (const auto& [l, b] : cfg.label_regions) restricted |= 1u << l;
    std::vector<std::uint32_t> allowed(n, ~restricted), probe_mask(n, 0), state(n, 0), pinned(n, 0);
    auto for_sites = [&](const SpatialBox& b, auto&& f) {
        for (std::size_t i = 0; i < b.size(); ++i) {
            Site x = b.site(i);
            if (H.contains(x)) f(std::size_t(local_of[R.index(x)]));
        }
    };
    for (const auto& [l, b] : cfg.label_regions) for_sites(b, [&](std::size_t i) { allowed[i] |= 1u << l; });
    std::uint32_t label_probes[32] = {};
    for (std::size_t p = 0; p < cfg.probes.size(); ++p) {
        for_sites(cfg.probes[p].space, [&](std::size_t i) { probe_mask[i] |= 1u << p; });
        label_probes[cfg.probes[p].label] |= 1u << p;
    }

    SweepResult res;
    res.hits.resize(cfg.probes.size());
    const std::uint32_t all_probes = cfg.probes.size() == 32 ? ~0u : ((1u << cfg.probes.size()) - 1);
    std::uint32_t open_probes = 0, hit_probes = 0;
    const std::uint32_t trace_bit = cfg.trace_label >= 0 ? 1u << cfg.trace_label : 0u;
    std::vector<int> last_rec(cfg.trace_label >= 0 ? n : 0, -1);

    auto record_hits = [&](std::size_t i, std::uint32_t labels, double tau) {
        std::uint32_t cand = 0;
        for (std::uint32_t L = labels; L; L &= L - 1) cand |= label_probes[std::countr_zero(L)];
        cand &= probe_mask[i] & open_probes & ~hit_probes;
        for (; cand; cand &= cand - 1) {
            int p = std::countr_zero(cand);
            auto& h = res.hits[std::size_t(p)];
            h.hit = true;
            h.t = tau;
            h.local = std::uint32_t(i);
            if (cfg.probes[std::size_t(p)].label == cfg.trace_label) h.rec = last_rec[i];
            hit_probes |= 1u << p;
        }
    };
    auto gain = [&](std::size_t i, std::uint32_t bits, double tau, int parent, std::uint8_t kind) {
        std::uint32_t nb = bits & allowed[i] & ~state[i];
        if (!nb) return;
        state[i] |= nb;
        if (nb & trace_bit) {
            res.trace.push_back({tau, std::uint32_t(i), parent, kind});
            last_rec[i] = int(res.trace.size()) - 1;
        }
        record_hits(i, nb, tau);
    };

    // Control points: 0 seed on, 1 probe open, 2 seed off, 3 probe close.
    struct Ctrl {
        double t;
        int type;
        std::size_t id;
    };
    std::vector<Ctrl> ctrl;
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
        ctrl.push_back({std::max(cfg.seeds[k].u0, cfg.s), 0, k});
        ctrl.push_back({std::min(cfg.seeds[k].u1, cfg.t), 2, k});
    }
    for (std::size_t k = 0; k < cfg.probes.size(); ++k) {
        ctrl.push_back({std::max(cfg.probes[k].u0, cfg.s), 1, k});
        ctrl.push_back({std::min(cfg.probes[k].u1, cfg.t), 3, k});
    }
    std::sort(ctrl.begin(), ctrl.end(), [](const Ctrl& a, const Ctrl& b) {
        return a.t != b.t ? a.t < b.t : (a.type != b.type ? a.type < b.type : a.id < b.id);
    });

    const auto& tl = real.timeline();
    std::size_t pos = real.timeline_from(cfg.s), ci = 0;
    std::size_t stride[kMaxDim];
    for (int i = 0; i < R.d; ++i) stride[i] = R.stride(i);
    std::vector<std::size_t> opened_now;

    while (true) {
        double next_ev = (pos < tl.size() && tl[pos].t <= cfg.t) ? tl[pos].t : kInf;
        double next_c = ci < ctrl.size() ? ctrl[ci].t : kInf;
        double tau = std::min(next_ev, next_c);
        if (!(tau <= cfg.t)) break;

        opened_now.clear();
        std::size_t cj = ci;
        for (; cj < ctrl.size() && ctrl[cj].t == tau && ctrl[cj].type <= 1; ++cj) {
            const auto& c = ctrl[cj];
            if (c.type == 0) {
                const auto& sd = cfg.seeds[c.id];
                std::uint32_t bit = 1u << sd.label;
                for_sites(sd.space, [&](std::size_t i) {
                    pinned[i] |= bit;
                    gain(i, bit, tau, -1, 0);
                });
            } else {
                open_probes |= 1u << c.id;
                opened_now.push_back(c.id);
            }
        }
        for (; pos < tl.size() && tl[pos].t == tau; ++pos) {
            const Event& ev = tl[pos];
            if (ev.kind == EventKind::Cure) {
                std::int32_t li = local_of[ev.idx];
                if (li < 0) continue;
                auto i = std::size_t(li);
                state[i] &= pinned[i];
                if (trace_bit & pinned[i]) {
                    res.trace.push_back({tau, std::uint32_t(i), -1, 1});
                    last_rec[i] = int(res.trace.size()) - 1;
                } else if (trace_bit) {
                    last_rec[i] = -1;
                }
            } else {
                std::size_t a = ev.idx / d, b = a + stride[ev.idx % d];
                std::int32_t la = local_of[a], lb = local_of[b];
                if (la < 0 || lb < 0) continue;
                std::uint32_t sa = state[std::size_t(la)], sb = state[std::size_t(lb)];
                if (sa == sb) continue;
                int ra = trace_bit ? last_rec[std::size_t(la)] : -1, rb = trace_bit ? last_rec[std::size_t(lb)] : -1;
                gain(std::size_t(lb), sa, tau, ra, 2);
                gain(std::size_t(la), sb, tau, rb, 2);
            }
        }
        for (auto p : opened_now) {
            std::uint32_t bit = 1u << cfg.probes[p].label;
            for_sites(cfg.probes[p].space, [&](std::size_t i) {
                if ((state[i] & bit) && !(hit_probes & (1u << p))) {
                    auto& h = res.hits[p];
                    h.hit = true;
                    h.t = tau;
                    h.local = std::uint32_t(i);
                    if (cfg.probes[p].label == cfg.trace_label) h.rec = last_rec[i];
                    hit_probes |= 1u << p;
                }
            });
        }
        for (; cj < ctrl.size() && ctrl[cj].t == tau; ++cj) {
            const auto& c = ctrl[cj];
            if (c.type == 2)
                for_sites(cfg.seeds[c.id].space, [&](std::size_t i) { pinned[i] &= ~(1u << cfg.seeds[c.id].label); });
            else if (c.type == 3)
                open_probes &= ~(1u << c.id);
        }
        ci = cj;
        if (cfg.stop_when_all_hit && hit_probes == all_probes) break;
        if (cfg.stop_when_any_hit && hit_probes) break;
    }
    return res;
}

// Rebuilds the witness path ending at a traced probe hit.
inline Path witness_from_trace(const SweepResult& res, const SpatialBox& H, const ProbeHit& hit) {
    require(hit.hit && hit.rec >= 0, errc::no_witness, "probe has no traced witness");
    std::vector<int> chain;
    for (int r = hit.rec; r >= 0; r = res.trace[std::size_t(r)].parent) chain.push_back(r);
    std::reverse(chain.begin(), chain.end());
    Path p;
    const auto& first = res.trace[std::size_t(chain.front())];
    p.start_site = H.site(first.local);
    p.start_time = first.t;
    for (std::size_t k = 1; k < chain.size(); ++k) {
        const auto& rc = res.trace[std::size_t(chain[k])];
        p.jumps.push_back({rc.t, H.site(rc.local)});
    }
    p.end_time = hit.t;
    if (first.kind == 1) {
        // Started right after a cure on a pinned seed site: move strictly past it.
        double nxt = p.jumps.empty() ? p.end_time : p.jumps.front().first;
        p.start_time = 0.5 * (first.t + nxt);
    }
    return p;
}

struct Reach {
    bool reached = false;
    std::optional<Path> witness;
};

inline Reach reaches(const Realization& real, const Site& x, double s, const Site& y, double t) {
    require(real.region().contains(x) && real.region().contains(y), errc::invalid_argument, "points outside region");
    require(real.window().contains(s) && real.window().contains(t), errc::invalid_window, "times outside window");
    if (t < s) return {};
    SweepConfig cfg;
    cfg.H = real.region();
    cfg.s = s;
    cfg.t = t;
    cfg.seeds.push_back({SpatialBox(real.dim(), x, x), s, s, 0});
    cfg.probes.push_back({SpatialBox(real.dim(), y, y), t, t, 0});
    cfg.trace_label = 0;
    auto res = multi_sweep(real, cfg);
    if (!res.hits[0].hit) return {};
    return {true, witness_from_trace(res, cfg.H, res.hits[0])};
}

} // namespace gcp
