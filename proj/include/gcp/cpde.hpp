#pragma once

// Contact process on dynamic edges: simulation, leaf availability, cluster
// survival, and the one-dependent block field used for survival.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "crossings.hpp"
#include "dynamics.hpp"
#include "error.hpp"
#include "lattice.hpp"
#include "realization.hpp"
#include "stats.hpp"

namespace gcp {

struct CpdeParams {
    double v = 1.0, p = 0.5, lambda = 1.0;
    int d = 1;

    // lambda = 0 is accepted (degenerate but useful as a control).
    void validate() const {
        require(v > 0 && std::isfinite(v), errc::invalid_argument, "v must be positive");
        require(p > 0 && p < 1, errc::invalid_argument, "p must lie in (0,1)");
        require(lambda >= 0 && std::isfinite(lambda), errc::invalid_argument, "lambda must be >= 0");
        require(d >= 1 && d <= kMaxDim, errc::invalid_argument, "bad dimension");
    }
    CpdeModel model(double lambda_max = 0.0) const { return {v, p, lambda, lambda_max}; }
};

// ---------------------------------------------------------------------------
// constants and planner

inline double default_pc3 = 0.2488;

inline double percolation_threshold(int d, double pc3 = default_pc3) {
    if (d == 1) return 1.0;
    if (d == 2) return 0.5;
    require(d == 3, errc::invalid_argument, "p_c only tabulated for d <= 3");
    return pc3;
}

inline double kappa(double lambda, int d) { return 2.0 * d * lambda + 1.0; }

struct CpdePlan {
    double pc = 0, delta = 0;
    int beta = 6;
    double h0 = 1, v = 0;
    double availability_bound = 0; // (1 - e^{-p delta}) + e^{-(beta/2-2) delta} + p
    double target = 0;             // (p + p_c)/2
};

// delta = (p_c - p)/4, beta the smallest integer >= 6 with e^{-(beta/2-2) delta} < delta,
// v = delta / h0.
inline CpdePlan plan_subcritical(double p, int d, double h0, double pc3 = default_pc3) {
    CpdePlan pl;
    pl.pc = percolation_threshold(d, pc3);
    require(p > 0 && p < pl.pc, errc::invalid_argument, "p must be subcritical");
    require(h0 > 0, errc::invalid_argument, "h0 must be positive");
    pl.delta = (pl.pc - p) / 4;
    int beta = 6;
    while (std::exp(-(beta / 2.0 - 2) * pl.delta) >= pl.delta) {
        ++beta;
        require(beta < 100000000, errc::too_large, "beta search diverged");
    }
    pl.beta = beta;
    pl.h0 = h0;
    pl.v = pl.delta / h0;
    pl.availability_bound = (1 - std::exp(-p * pl.delta)) + std::exp(-(beta / 2.0 - 2) * pl.delta) + p;
    pl.target = 0.5 * (p + pl.pc);
    return pl;
}

// ---------------------------------------------------------------------------
// simulation

struct CpdeRun {
    Realization real;
    Trajectory traj;
    Extinction tau;
};

inline CpdeRun simulate_cpde(const CpdeParams& prm, const SpatialBox& region, Window w, const std::vector<Site>& A,
                             std::uint64_t seed, std::uint64_t replica = 0, double lambda_max = 0.0) {
    prm.validate();
    require(region.d == prm.d, errc::invalid_argument, "region dimension differs from params");
    CpdeRun run;
    run.real = build_realization(prm.model(lambda_max), region, w, seed, replica);
    run.traj = evolve(run.real, A, w.t1);
    auto ext = run.traj.extinction();
    run.tau = ext ? Extinction{*ext, false} : Extinction{w.t1, true};
    return run;
}

// Edge state just after time u (intervals are closed, so a closing at u counts as closed here).
inline bool open_after(const EdgeEnv& e, double u) {
    auto it = std::upper_bound(e.open_intervals.begin(), e.open_intervals.end(), u,
                               [](double x, const Interval& iv) { return x < iv.a; });
    if (it == e.open_intervals.begin()) return false;
    --it;
    return u < it->b || (it->b == e.opens.window.t1 && u <= it->b);
}

// ---------------------------------------------------------------------------
// L_j-available edges

struct AvailableEdgeReport {
    SpaceTimeBox leaf;
    double lookback = 0;
    std::vector<Edge> available;
    std::size_t by_open = 0, by_quiet = 0, by_open_at_start = 0; // conditions (i), (ii), (iii)
    std::size_t edges_total = 0;
    Components clusters; // over leaf.space, available edges only
    std::size_t max_cluster_size = 0;

    std::size_t cluster_size(const Site& x) const {
        return clusters.sizes[std::size_t(clusters.label[leaf.space.index(x)])];
    }
};

// Condition (ii) is taken literally: an edge with no update in the look-back
// interval is available whatever its state.
inline AvailableEdgeReport available_edges(const Realization& real, const SpaceTimeBox& leaf, int beta, double h0) {
    require(real.has_env(), errc::invalid_argument, "realization has no environment");
    require(beta >= 6 && h0 > 0, errc::invalid_argument, "need beta >= 6, h0 > 0");
    require(real.region().contains(leaf.space), errc::invalid_argument, "leaf outside region");
    const double L = (beta / 2.0 - 2) * h0;
    require(leaf.s - L >= real.window().t0 && leaf.t <= real.window().t1, errc::lookback_outside_window,
            "leaf look-back interval leaves the window");
    AvailableEdgeReport r;
    r.leaf = leaf;
    r.lookback = L;
    std::vector<char> mask(leaf.space.edge_slots(), 0);
    leaf.space.for_each_edge([&](const Edge& e, std::size_t slot) {
        ++r.edges_total;
        const EdgeEnv& env = real.env(e);
        bool c1 = env.opens.any_in(leaf.s, leaf.t);
        bool updated = env.opens.any_in(leaf.s - L, leaf.s) || env.closes.any_in(leaf.s - L, leaf.s);
        bool c2 = !updated;
        bool c3 = updated && env.open_at(leaf.s);
        r.by_open += c1;
        r.by_quiet += c2;
        r.by_open_at_start += c3;
        if (c1 || c2 || c3) {
            r.available.push_back(e);
            mask[slot] = 1;
        }
    });
    r.clusters = connected_components(mask, leaf.space);
    for (auto s : r.clusters.sizes) r.max_cluster_size = std::max(r.max_cluster_size, s);
    return r;
}

// Exact availability probability for a stationary edge, look-back L, leaf length H.
inline double availability_probability(double v, double p, double L, double H) {
    return 1 - std::exp(-p * v * H) * (1 - p) * (1 - std::exp(-v * L));
}

// The modified process inside the leaf: available edges stay open during the
// whole leaf, others are removed; cure marks are kept.
inline Realization leaf_realization(const Realization& real, const AvailableEdgeReport& rep) {
    const auto& B = rep.leaf.space;
    Window w{rep.leaf.s, rep.leaf.t};
    auto cut = [&](const MarkTrain& m) {
        MarkTrain out{{}, w};
        for (auto i = m.lower(w.t0); i < m.size() && m.times[i] <= w.t1; ++i) out.times.push_back(m.times[i]);
        return out;
    };
    std::vector<MarkTrain> cure(B.size()), trans(B.edge_slots(), MarkTrain{{}, w});
    for (std::size_t i = 0; i < B.size(); ++i) cure[i] = cut(real.cure(B.site(i)));
    for (const auto& e : rep.available) trans[B.edge_slot(e)] = cut(real.trans(e));
    return Realization(B, w, std::move(cure), std::move(trans));
}

struct LeafEvents {
    bool U = false;      // some available cluster has at least `cluster_threshold` sites
    bool V = false;      // modified process survives past leaf.s + survival_time
    bool H_hat = false;  // half-crossing for the modified process
    bool H = false;      // half-crossing for the true process
    std::size_t max_cluster = 0;
};

inline LeafEvents evaluate_leaf(const Realization& real, const SpaceTimeBox& leaf, int beta, double h0,
                                double cluster_threshold, double survival_time) {
    auto rep = available_edges(real, leaf, beta, h0);
    auto hat = leaf_realization(real, rep);
    LeafEvents ev;
    ev.max_cluster = rep.max_cluster_size;
    ev.U = double(rep.max_cluster_size) >= cluster_threshold;
    std::vector<Site> all;
    for (std::size_t i = 0; i < leaf.space.size(); ++i) all.push_back(leaf.space.site(i));
    require(survival_time > 0 && survival_time <= leaf.t - leaf.s, errc::invalid_argument,
            "survival time must fit in the leaf");
    ev.V = extinction_time(hat, all, leaf.s + survival_time).censored;
    ev.H_hat = detect_report(hat, leaf).half_crossing;
    ev.H = detect_report(real, leaf).half_crossing;
    return ev;
}

// Tail of cluster sizes seen from a site: P(|C(x)| >= m), log-linear fit gives -psi.
struct ClusterDecay {
    std::vector<double> m, tail;
    stats::LinearFit fit;
    double psi = 0;
};

inline ClusterDecay fit_cluster_decay(const std::vector<std::size_t>& sizes, std::size_t min_count = 20) {
    require(!sizes.empty(), errc::insufficient_range, "no cluster sizes");
    std::size_t mx = *std::max_element(sizes.begin(), sizes.end());
    ClusterDecay cd;
    const double n = double(sizes.size());
    for (std::size_t m = 1; m <= mx; ++m) {
        auto c = std::size_t(std::count_if(sizes.begin(), sizes.end(), [&](std::size_t s) { return s >= m; }));
        if (c < min_count) break;
        cd.m.push_back(double(m));
        cd.tail.push_back(std::log(double(c) / n));
    }
    cd.fit = stats::linear_fit(cd.m, cd.tail);
    cd.psi = -cd.fit.slope;
    return cd;
}

// ---------------------------------------------------------------------------
// survival of the classical process on a finite cluster

struct ClusterSurvival {
    std::size_t n = 0, replicas = 0;
    stats::Estimate p_T0;
    double bound_product = 0; // e^{-2 d lambda n} (1 - e^{-1})^n
    double bound_kappa = 0;   // e^{-(2 d lambda + 1) n}
    std::vector<double> horizons;
    std::vector<stats::Estimate> tail; // P(tau >= h)
    stats::Moments tau;                // uncensored replicas only
    std::size_t censored = 0;
};

// Bound P(tau(G) >= e^{nu n}) <= exp(-e^{(nu - kappa) n} / 2).
inline double cluster_lifetime_bound(double nu, std::size_t n, double lambda, int d) {
    return std::exp(-0.5 * std::exp((nu - kappa(lambda, d)) * double(n)));
}

// The process lives on G only; started from all of G infected at time 0.
// T0: every site of G has a cure in [0,1] before the first transmission on an
// edge of G in [0,1].
inline ClusterSurvival cluster_survival_experiment(const std::vector<Site>& G, int d, double lambda,
                                                   std::size_t replicas, std::vector<double> horizons,
                                                   std::uint64_t seed) {
    require(!G.empty() && G.size() <= 8, errc::invalid_argument, "cluster size must be in 1..8");
    require(lambda > 0, errc::invalid_argument, "lambda must be positive");
    require(replicas >= 1, errc::invalid_argument, "need replicas");
    Site lo = G[0], hi = G[0];
    for (const auto& x : G)
        for (int i = 0; i < d; ++i) {
            lo[i] = std::min(lo[i], x[i]);
            hi[i] = std::max(hi[i], x[i]);
        }
    SpatialBox box(d, lo, hi);
    std::vector<char> mask(box.size(), 0);
    for (const auto& x : G) mask[box.index(x)] = 1;
    std::vector<Edge> inner;
    box.for_each_edge([&](const Edge& e, std::size_t) {
        if (mask[box.index(e.a)] && mask[box.index(e.b())]) inner.push_back(e);
    });
    std::sort(horizons.begin(), horizons.end());
    double H = std::max(1.0, horizons.empty() ? 1.0 : horizons.back());
    GcpModel m{InterarrivalSpec::exponential(lambda), InterarrivalSpec::exponential(1.0), StartPolicy::at_origin(), true};

    ClusterSurvival out;
    out.n = G.size();
    out.replicas = replicas;
    out.horizons = horizons;
    out.bound_product = std::exp(-2.0 * d * lambda * double(out.n)) * std::pow(1 - std::exp(-1.0), double(out.n));
    out.bound_kappa = std::exp(-kappa(lambda, d) * double(out.n));
    std::uint64_t t0_hits = 0;
    std::vector<std::uint64_t> alive(horizons.size(), 0);
    std::vector<double> taus;
    for (std::size_t r = 0; r < replicas; ++r) {
        auto real = build_realization(m, box, {0, H}, seed, r);
        double first = 1.0;
        for (const auto& e : inner)
            if (auto f = real.trans(e).first_at_or_after(0.0)) first = std::min(first, *f);
        bool t0 = true;
        for (const auto& x : G) t0 = t0 && real.cure(x).any_in(0.0, first);
        t0_hits += t0;
        auto tau = extinction_time(real, G, H, 0.0, &mask);
        for (std::size_t i = 0; i < horizons.size(); ++i)
            if (tau.censored || tau.value >= horizons[i]) ++alive[i];
        if (tau.censored)
            ++out.censored;
        else
            taus.push_back(tau.value);
    }
    out.p_T0 = stats::summarize(t0_hits, replicas);
    for (auto a : alive) out.tail.push_back(stats::summarize(a, replicas));
    if (taus.size() >= 2) out.tau = stats::moments(taus);
    return out;
}

// ---------------------------------------------------------------------------
// Phi and the block field

// 1 iff there are s < t_1 < ... < t_m < t with a transmission mark on edge i at t_i.
// Environment and cures are ignored. Greedy earliest marks decide it exactly.
inline bool phi_indicator(const Realization& real, const std::vector<Site>& gamma, double s, double t) {
    require(!gamma.empty(), errc::invalid_argument, "empty path");
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        require(real.region().contains(gamma[i]), errc::invalid_argument, "path leaves the region");
        if (i > 0) require(norm1(gamma[i] - gamma[i - 1]) == 1, errc::invalid_argument, "path steps must be unit");
        for (std::size_t j = 0; j < i; ++j)
            require(!(gamma[j] == gamma[i]), errc::invalid_argument, "path is not self-avoiding");
    }
    double cur = s;
    for (std::size_t i = 1; i < gamma.size(); ++i) {
        const auto& ts = real.trans(make_edge(gamma[i - 1], gamma[i])).times;
        auto it = std::upper_bound(ts.begin(), ts.end(), cur);
        if (it == ts.end() || *it >= t) return false;
        cur = *it;
    }
    return true;
}

// B_n(z) = z n e_1 + {0..n-1}^d
inline SpatialBox block_box(int d, int n, int z) {
    Site lo, hi;
    for (int i = 0; i < d; ++i) hi[i] = n - 1;
    lo[0] = z * n;
    hi[0] = z * n + n - 1;
    return SpatialBox(d, lo, hi);
}
// B'_n(z) = B_n(z-1) u B_n(z) u B_n(z+1)
inline SpatialBox block_box_wide(int d, int n, int z) {
    SpatialBox b = block_box(d, n, z);
    b.lo[0] -= n;
    b.hi[0] += n;
    return b;
}

inline std::size_t default_path_cap = 5000000;

namespace detail {

// Directed self-avoiding paths (including single sites) in a box.
inline std::size_t count_self_avoiding(const SpatialBox& B, std::size_t cap) {
    std::vector<char> on(B.size(), 0);
    std::size_t count = 0;
    auto dfs = [&](auto&& self, const Site& x) -> void {
        if (++count > cap) return;
        for (int j = 0; j < B.d; ++j)
            for (int sg : {-1, 1}) {
                Site y = x + unit(j, sg);
                if (!B.contains(y) || on[B.index(y)]) continue;
                on[B.index(y)] = 1;
                self(self, y);
                on[B.index(y)] = 0;
                if (count > cap) return;
            }
    };
    for (std::size_t i = 0; i < B.size() && count <= cap; ++i) {
        on[i] = 1;
        dfs(dfs, B.site(i));
        on[i] = 0;
    }
    return count;
}

// Is Phi(gamma, a, b) = 1 for every self-avoiding gamma in B? Returns the number
// of paths visited, or nullopt at the first failing path.
inline std::optional<std::size_t> all_paths_traversable(const Realization& real, const SpatialBox& B, double a,
                                                        double b) {
    std::vector<char> on(B.size(), 0);
    std::size_t visited = 0;
    bool ok = true;
    auto dfs = [&](auto&& self, const Site& x, double cur) -> void {
        ++visited;
        for (int j = 0; j < B.d && ok; ++j)
            for (int sg : {-1, 1}) {
                Site y = x + unit(j, sg);
                if (!B.contains(y) || on[B.index(y)]) continue;
                const auto& ts = real.trans(make_edge(x, y)).times;
                auto it = std::upper_bound(ts.begin(), ts.end(), cur);
                if (it == ts.end() || *it >= b) {
                    ok = false;
                    return;
                }
                on[B.index(y)] = 1;
                self(self, y, *it);
                on[B.index(y)] = 0;
                if (!ok) return;
            }
    };
    for (std::size_t i = 0; i < B.size() && ok; ++i) {
        on[i] = 1;
        dfs(dfs, B.site(i), a);
        on[i] = 0;
    }
    if (!ok) return std::nullopt;
    return visited;
}

inline Components components_after(const Realization& real, const SpatialBox& B, double u) {
    std::vector<char> mask(B.edge_slots(), 0);
    B.for_each_edge([&](const Edge& e, std::size_t slot) { mask[slot] = open_after(real.env(e), u); });
    return connected_components(mask, B);
}

// E_n on one environment state: the largest component is the only one touching
// all three sub-boxes.
inline bool e_event(const Components& c, const SpatialBox& Bw, int n) {
    const std::size_t L = c.sizes.size();
    std::vector<std::uint8_t> touch(L, 0);
    for (std::size_t i = 0; i < Bw.size(); ++i) {
        int part = (Bw.site(i)[0] - Bw.lo[0]) / n;
        touch[std::size_t(c.label[i])] |= std::uint8_t(1u << part);
    }
    int full = 0;
    for (std::size_t l = 0; l < L; ++l) full += touch[l] == 7;
    return full == 1 && touch[std::size_t(c.largest)] == 7;
}

} // namespace detail

struct CellCertificate {
    bool e_prime = false, f = false;
    std::size_t env_states = 0;  // environment configurations checked for E_n
    std::size_t event_times = 0; // N: updates and cures inside B'_n(z) during (k, k+1)
    std::size_t paths_checked = 0;
    std::optional<double> e_fail; // first state time where E_n fails
    std::optional<double> f_fail; // start of the first interval where F_n fails
};

struct BlockField {
    int d = 2, n = 1;
    int z0 = 0, z1 = 0, k0 = 0, k1 = 0;
    std::map<std::pair<int, int>, std::uint8_t> eta; // (k, z)
    std::map<std::pair<int, int>, CellCertificate> cert;

    bool at(int k, int z) const {
        auto it = eta.find({k, z});
        return it != eta.end() && it->second;
    }
};

inline CellCertificate evaluate_cell(const Realization& real, int n, int z, int k, std::size_t path_cap) {
    const int d = real.dim();
    SpatialBox Bw = block_box_wide(d, n, z);
    require(real.region().contains(Bw), errc::invalid_argument, "block outside region");
    require(real.window().t0 <= k && k + 1 <= real.window().t1, errc::invalid_window, "block time outside window");
    require(real.has_env(), errc::invalid_argument, "realization has no environment");
    CellCertificate c;
    const double a = k, b = k + 1.0;

    std::vector<double> updates, events;
    Bw.for_each_edge([&](const Edge& e, std::size_t) {
        const auto& env = real.env(e);
        for (const auto* m : {&env.opens, &env.closes})
            for (auto i = m->lower(a); i < m->size() && m->times[i] <= b; ++i)
                if (m->times[i] > a && m->times[i] < b) updates.push_back(m->times[i]);
    });
    std::sort(updates.begin(), updates.end());
    updates.erase(std::unique(updates.begin(), updates.end()), updates.end());
    events = updates;
    for (std::size_t i = 0; i < Bw.size(); ++i) {
        const auto& m = real.cure(Bw.site(i));
        for (auto j = m.lower(a); j < m.size() && m.times[j] < b; ++j)
            if (m.times[j] > a) events.push_back(m.times[j]);
    }
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());
    c.event_times = events.size();

    // E'_n: the environment is piecewise constant, so checking the state after
    // k and after each update covers every s in [k, k+1].
    c.e_prime = true;
    std::vector<double> states{a};
    states.insert(states.end(), updates.begin(), updates.end());
    for (double u : states) {
        ++c.env_states;
        if (!detail::e_event(detail::components_after(real, Bw, u), Bw, n)) {
            c.e_prime = false;
            c.e_fail = u;
            break;
        }
    }

    // F_n
    static thread_local std::map<std::tuple<int, int, std::size_t>, std::size_t> path_counts;
    auto key = std::make_tuple(d, n, path_cap);
    auto pc = path_counts.find(key);
    if (pc == path_counts.end()) pc = path_counts.emplace(key, detail::count_self_avoiding(Bw, path_cap)).first;
    require(pc->second <= path_cap, errc::too_many_paths, "too many self-avoiding paths in B'_n(z)");
    std::vector<double> ts{a};
    ts.insert(ts.end(), events.begin(), events.end());
    ts.push_back(b);
    c.f = true;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        auto r = detail::all_paths_traversable(real, Bw, ts[i], ts[i + 1]);
        if (!r) {
            c.f = false;
            c.f_fail = ts[i];
            break;
        }
        c.paths_checked += *r;
    }
    return c;
}

// eta_k(z) = 1[E'_n(z,k) and F_n(z,k)] for z in [z0, z1], k in [k0, k1].
inline BlockField block_field(const Realization& real, int n, std::pair<int, int> zr, std::pair<int, int> kr,
                              std::size_t path_cap = default_path_cap) {
    const int d = real.dim();
    require(n >= 1, errc::invalid_argument, "block size must be positive");
    require(zr.first <= zr.second && kr.first <= kr.second && kr.first >= 0, errc::invalid_argument, "bad ranges");
    require(!(d == 2 && n > 3) && !(d >= 3 && n > 1), errc::too_many_paths,
            "self-avoiding path enumeration limited to n <= 3 (d = 2), n = 1 (d >= 3)");
    BlockField f;
    f.d = d;
    f.n = n;
    f.z0 = zr.first;
    f.z1 = zr.second;
    f.k0 = kr.first;
    f.k1 = kr.second;
    for (int k = kr.first; k <= kr.second; ++k)
        for (int z = zr.first; z <= zr.second; ++z) {
            auto c = evaluate_cell(real, n, z, k, path_cap);
            f.eta[{k, z}] = std::uint8_t(c.e_prime && c.f);
            f.cert[{k, z}] = c;
        }
    return f;
}

// Field from explicit values (tests, replays). rows[k - k0][z - z0].
inline BlockField make_block_field(int z0, int k0, const std::vector<std::vector<std::uint8_t>>& rows) {
    BlockField f;
    f.z0 = z0;
    f.k0 = k0;
    f.k1 = k0 + int(rows.size()) - 1;
    f.z1 = rows.empty() ? z0 : z0 + int(rows[0].size()) - 1;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        require(int(rows[k].size()) == f.z1 - z0 + 1, errc::invalid_argument, "ragged field");
        for (std::size_t z = 0; z < rows[k].size(); ++z) f.eta[{k0 + int(k), z0 + int(z)}] = rows[k][z];
    }
    return f;
}

struct OrientedSurvival {
    bool survives = false;
    std::vector<int> z; // z_{k0}, ..., z_{k1}
};

// Path 0 = z_{k0}, z_{k0+1}, ... with |z_k - z_{k+1}| <= 1 and eta_k(z_k) = 1 up to
// the top level.
inline OrientedSurvival oriented_block_survival(const BlockField& f) {
    OrientedSurvival out;
    require(f.z0 <= 0 && 0 <= f.z1, errc::invalid_argument, "z = 0 must lie in the field");
    const int W = f.z1 - f.z0 + 1, K = f.k1 - f.k0 + 1;
    std::vector<std::vector<char>> reach(std::size_t(K), std::vector<char>(std::size_t(W), 0));
    if (!f.at(f.k0, 0)) return out;
    reach[0][std::size_t(-f.z0)] = 1;
    for (int k = 1; k < K; ++k)
        for (int w = 0; w < W; ++w) {
            if (!f.at(f.k0 + k, f.z0 + w)) continue;
            for (int dw = -1; dw <= 1; ++dw) {
                int u = w + dw;
                if (u >= 0 && u < W && reach[std::size_t(k - 1)][std::size_t(u)]) reach[std::size_t(k)][std::size_t(w)] = 1;
            }
        }
    int best = -1;
    for (int w = 0; w < W; ++w)
        if (reach[std::size_t(K - 1)][std::size_t(w)] &&
            (best < 0 || std::abs(f.z0 + w) < std::abs(f.z0 + best)))
            best = w;
    if (best < 0) return out;
    out.survives = true;
    out.z.assign(std::size_t(K), 0);
    int w = best;
    for (int k = K - 1; k >= 0; --k) {
        out.z[std::size_t(k)] = f.z0 + w;
        if (k == 0) break;
        for (int dw : {0, -1, 1}) {
            int u = w + dw;
            if (u >= 0 && u < W && reach[std::size_t(k - 1)][std::size_t(u)]) {
                w = u;
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// realization-level check: if eta_k(z) = 1 and the largest component of B'_n(z)
// at time k has an infected site, the largest component at k+1 is fully infected.

struct ClaimCheck {
    std::size_t applicable = 0, violations = 0;
};

inline std::vector<std::size_t> largest_component_sites(const Realization& real, const SpatialBox& Bw, double u) {
    auto c = detail::components_after(real, Bw, u);
    std::vector<std::size_t> out;
    for (auto i : c.members(c.largest)) out.push_back(real.region().index(Bw.site(i)));
    return out;
}

inline ClaimCheck check_block_claim(const Realization& real, const BlockField& f, const Trajectory& tr) {
    ClaimCheck cc;
    for (const auto& [kz, v] : f.eta) {
        if (!v) continue;
        auto [k, z] = kz;
        SpatialBox Bw = block_box_wide(f.d, f.n, z);
        if (tr.t_start > k || tr.t_end < k + 1) continue;
        auto st0 = tr.state_at(k);
        auto g0 = largest_component_sites(real, Bw, k);
        bool any = false;
        for (auto i : g0) any = any || st0[i];
        if (!any) continue;
        ++cc.applicable;
        auto st1 = tr.state_at(k + 1);
        for (auto i : largest_component_sites(real, Bw, k + 1))
            if (!st1[i]) {
                ++cc.violations;
                break;
            }
    }
    return cc;
}

} // namespace gcp
