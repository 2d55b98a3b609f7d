#pragma once

// Edge renewal contact process: growth without cures, iterated percolation,
// the exploration coupling, heavy-tail bad events and the oriented embedding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "cpde.hpp"
#include "dynamics.hpp"
#include "error.hpp"
#include "lattice.hpp"
#include "marks.hpp"
#include "realization.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace gcp {

// ---------------------------------------------------------------------------
// growth

// Geometric time grid with `per_decade` points per factor 10, from t0 to t1 inclusive.
inline std::vector<double> geometric_grid(double t0, double t1, int per_decade = 10) {
    require(t0 > 0 && t1 > t0 && per_decade >= 1, errc::invalid_argument, "bad geometric grid");
    std::vector<double> g;
    double q = std::log10(t1 / t0);
    int n = int(std::ceil(q * per_decade - 1e-9));
    for (int i = 0; i <= n; ++i) g.push_back(std::min(t1, t0 * std::pow(10.0, double(i) / per_decade)));
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

inline int max_norm(const std::vector<Site>& xs) {
    int r = 0;
    for (const auto& x : xs) r = std::max(r, norm1(x));
    return r;
}

struct ErcpRun {
    Realization real;
    Trajectory traj;
    std::vector<double> times;
    std::vector<int> r;       // max L1 norm of the infected set at each grid time (0 if empty)
    std::vector<char> alive;
};

// Full simulation on `region`. Without cures the infected set only grows and r
// is the radius of everything reached so far.
inline ErcpRun simulate_ercp(const ErcpModel& model, const SpatialBox& region, Window window,
                             const std::vector<Site>& A, const std::vector<double>& times, std::uint64_t seed,
                             std::uint64_t rep) {
    for (double t : times) require(window.contains(t), errc::invalid_window, "grid time outside window");
    ErcpRun out;
    out.real = build_realization(model, region, window, seed, rep);
    out.traj = evolve(out.real, A, times.empty() ? window.t1 : std::max(window.t0, times.back()));
    out.times = times;
    for (double t : times) {
        auto xs = out.traj.infected_at(t);
        out.r.push_back(max_norm(xs));
        out.alive.push_back(!xs.empty());
    }
    return out;
}

struct GrowthRun {
    std::vector<double> times;
    std::vector<int> r;
    bool boundary_hit = false;
    double hit_time = kInf;
    std::size_t reached = 0; // sites infected by the horizon
};

// Growth without cures as first passage: the infection time of y is the least
// over neighbours x of the first mark on {x,y} strictly after the time of x.
// Marks are drawn lazily from the same streams build_realization uses, so the
// answer equals evolve() on the cure-free realization of `region`.
inline GrowthRun ercp_growth(const InterarrivalSpec& mu, const StartPolicy& start, const SpatialBox& region,
                             const std::vector<double>& times, std::uint64_t seed, std::uint64_t rep,
                             const std::vector<Site>& A = {Site{}}) {
    require(!times.empty() && std::is_sorted(times.begin(), times.end()) && times.front() >= 0,
            errc::invalid_argument, "times must be sorted and >= 0");
    const double H = times.back();
    const Window w{0.0, H};
    GrowthRun out;
    out.times = times;
    std::vector<double> T(region.size(), kInf);
    std::vector<char> done(region.size(), 0);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (const auto& x : A) {
        require(region.contains(x), errc::invalid_argument, "initial site outside region");
        auto i = region.index(x);
        T[i] = 0.0;
        pq.push({0.0, i});
    }
    auto on_boundary = [&](const Site& x) {
        for (int k = 0; k < region.d; ++k)
            if (x[k] == region.lo[k] || x[k] == region.hi[k]) return true;
        return false;
    };
    std::vector<std::pair<double, int>> settled; // (time, norm) in time order
    while (!pq.empty()) {
        auto [t, i] = pq.top();
        pq.pop();
        if (done[i] || t > H) continue;
        done[i] = 1;
        Site x = region.site(i);
        settled.push_back({t, norm1(x)});
        if (on_boundary(x) && !out.boundary_hit) {
            out.boundary_hit = true;
            out.hit_time = t;
        }
        for (int k = 0; k < region.d; ++k)
            for (int s : {-1, 1}) {
                Site y = x + unit(k, s);
                if (!region.contains(y)) continue;
                auto j = region.index(y);
                if (done[j]) continue;
                Edge e = make_edge(x, y);
                RenewalCursor cur(mu, start, w.t0, detail::trans_stream(seed, region.edge_slot(e), rep));
                double m;
                do m = cur.next();
                while (m <= t || m < w.t0);
                if (m <= H && m < T[j]) {
                    T[j] = m;
                    pq.push({m, j});
                }
            }
    }
    out.reached = settled.size();
    std::size_t k = 0;
    int r = 0;
    for (double t : times) {
        while (k < settled.size() && settled[k].first <= t) r = std::max(r, settled[k++].second);
        out.r.push_back(r);
    }
    return out;
}

struct GrowthFit {
    double rho = 0.0;
    stats::Interval ci;
    stats::LinearFit fit;
    std::vector<double> times, median;
    std::size_t replicas = 0;
};

// Slope of log median r_t against log t. `r[i]` is the series of replica i on
// `times`. Grid points with median 0 are dropped; at least two decades must remain.
inline GrowthFit growth_exponent(const std::vector<double>& times, const std::vector<std::vector<double>>& r,
                                 std::size_t resamples = 400, std::uint64_t seed = 1, double level = 0.95) {
    require(!r.empty(), errc::invalid_argument, "no replicas");
    for (const auto& row : r) require(row.size() == times.size(), errc::invalid_argument, "series length mismatch");
    const std::size_t N = r.size();
    auto medians = [&](const std::vector<std::size_t>& idx) {
        std::vector<double> med(times.size());
        std::vector<double> col(idx.size());
        for (std::size_t j = 0; j < times.size(); ++j) {
            for (std::size_t i = 0; i < idx.size(); ++i) col[i] = r[idx[i]][j];
            med[j] = stats::median(col);
        }
        return med;
    };
    std::vector<std::size_t> all(N);
    for (std::size_t i = 0; i < N; ++i) all[i] = i;
    auto med = medians(all);

    std::vector<std::size_t> use;
    for (std::size_t j = 0; j < times.size(); ++j)
        if (med[j] > 0 && times[j] > 0) use.push_back(j);
    require(use.size() >= 3 && std::log10(times[use.back()] / times[use.front()]) >= 2.0 - 1e-9,
            errc::insufficient_range, "growth fit needs two decades of positive medians");

    auto slope_of = [&](const std::vector<double>& m) {
        std::vector<double> x, y;
        for (auto j : use) {
            if (m[j] <= 0) continue;
            x.push_back(std::log(times[j]));
            y.push_back(std::log(m[j]));
        }
        if (x.size() < 3) return 0.0;
        return stats::linear_fit(x, y).slope;
    };
    GrowthFit g;
    g.replicas = N;
    for (auto j : use) {
        g.times.push_back(times[j]);
        g.median.push_back(med[j]);
    }
    {
        std::vector<double> x, y;
        for (std::size_t k = 0; k < g.times.size(); ++k) {
            x.push_back(std::log(g.times[k]));
            y.push_back(std::log(g.median[k]));
        }
        g.fit = stats::linear_fit(x, y, level);
        g.rho = g.fit.slope;
    }
    if (N == 1) {
        g.ci = {g.rho, g.rho};
    } else {
        Rng rng = derive_stream(seed, obj::id(obj::aux, 0x6e0), 0);
        g.ci = stats::bootstrap_ci(N, resamples, rng, [&](const std::vector<std::size_t>& idx) {
            return slope_of(medians(idx));
        }, level);
    }
    return g;
}

// ---------------------------------------------------------------------------
// iterated percolation

struct IteratedPercolationState {
    double p = 0.0;
    int d = 1;
    std::vector<int> R;                     // R_0 .. R_steps
    std::vector<std::size_t> size;          // |C_n|
    std::vector<Site> C;                    // final set C_steps, sorted
    std::vector<std::size_t> edges_sampled; // per step
};

// C_n = closure of the union of open clusters (fresh Bernoulli(p) bonds) meeting
// C_{n-1}. Only edges leaving the current set are sampled, each at most once per
// step. The set lives in a dense cube; a step that reaches the cube border is
// undone and replayed from the same stream in a cube twice as large, so the
// result does not depend on the cube.
inline IteratedPercolationState iterated_percolation(double p, int d, const std::vector<Site>& C0, int steps,
                                                     std::uint64_t seed, std::uint64_t rep = 0,
                                                     double pc3 = default_pc3) {
    require(d >= 1 && d <= kMaxDim, errc::invalid_argument, "dimension out of range");
    require(p >= 0 && steps >= 0 && !C0.empty(), errc::invalid_argument, "bad iterated percolation input");
    require(p < percolation_threshold(d, pc3), errc::supercritical_p, "p must be below p_c(d)");
    IteratedPercolationState st;
    st.p = p;
    st.d = d;

    int r0 = 0;
    for (const auto& x : C0)
        for (int k = 0; k < d; ++k) r0 = std::max(r0, std::abs(x[k]));
    SpatialBox box;
    std::vector<char> in, border;
    std::vector<std::ptrdiff_t> off;
    auto allocate = [&](int M) {
        box = SpatialBox::centered(d, M);
        require(double(box.size()) <= 2e8, errc::too_large, "iterated percolation grid too large");
        in.assign(box.size(), 0);
        border.assign(box.size(), 0);
        Site x = box.lo; // odometer over the cube in index order
        for (std::size_t i = 0; i < box.size(); ++i) {
            for (int k = 0; k < d; ++k)
                if (std::abs(x[k]) == M) border[i] = 1;
            for (int k = d - 1; k >= 0; --k) {
                if (++x[k] <= M) break;
                x[k] = -M;
            }
        }
        off.clear();
        for (int k = 0; k < d; ++k) {
            auto s = std::ptrdiff_t(box.stride(k));
            off.push_back(-s);
            off.push_back(s);
        }
    };
    allocate(std::max(16, r0 + 2 * steps + 8));

    std::vector<std::size_t> frontier;
    std::size_t count = 0;
    for (const auto& x : C0) {
        auto i = box.index(x);
        if (!in[i]) {
            in[i] = 1;
            ++count;
        }
    }
    auto has_outside = [&](std::size_t i) {
        for (auto o : off)
            if (!in[std::size_t(std::ptrdiff_t(i) + o)]) return true;
        return false;
    };
    for (std::size_t i = 0; i < box.size(); ++i)
        if (in[i] && has_outside(i)) frontier.push_back(i);
    int R = 0;
    for (const auto& x : C0) R = std::max(R, norm1(x));
    st.R.push_back(R);
    st.size.push_back(count);

    std::vector<std::size_t> added, queue;
    for (int n = 1; n <= steps;) {
        Rng rng = derive_stream(seed, obj::id(obj::perc, std::uint64_t(n)), rep);
        added.clear();
        std::size_t sampled = 0;
        bool overflow = false;
        // open clusters meeting the set
        queue = frontier;
        for (std::size_t q = 0; q < queue.size() && !overflow; ++q) {
            auto x = queue[q];
            for (auto o : off) {
                auto y = std::size_t(std::ptrdiff_t(x) + o);
                if (in[y]) continue;
                ++sampled;
                if (!rng.bernoulli(p)) continue;
                if (border[y]) {
                    overflow = true;
                    break;
                }
                in[y] = 1;
                added.push_back(y);
                queue.push_back(y);
            }
        }
        // edge boundary
        const std::size_t n_cluster = added.size();
        auto close_around = [&](std::size_t x) {
            for (auto o : off) {
                auto y = std::size_t(std::ptrdiff_t(x) + o);
                if (in[y]) continue;
                if (border[y]) {
                    overflow = true;
                    return;
                }
                in[y] = 1;
                added.push_back(y);
            }
        };
        for (std::size_t k = 0; k < frontier.size() && !overflow; ++k) close_around(frontier[k]);
        for (std::size_t k = 0; k < n_cluster && !overflow; ++k) close_around(added[k]);
        if (overflow) {
            for (auto y : added) in[y] = 0;
            auto old = box;
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < in.size(); ++i)
                if (in[i]) members.push_back(i);
            allocate(2 * old.hi[0]);
            for (auto i : members) in[box.index(old.site(i))] = 1;
            for (auto& f : frontier) f = box.index(old.site(f));
            continue; // replay step n
        }
        count += added.size();
        for (auto y : added) R = std::max(R, norm1(box.site(y)));
        std::vector<std::size_t> next;
        for (auto x : frontier)
            if (has_outside(x)) next.push_back(x);
        for (auto y : added)
            if (has_outside(y)) next.push_back(y);
        frontier = std::move(next);
        st.R.push_back(R);
        st.size.push_back(count);
        st.edges_sampled.push_back(sampled);
        ++n;
    }
    for (std::size_t i = 0; i < in.size(); ++i)
        if (in[i]) st.C.push_back(box.site(i));
    return st;
}

// ---------------------------------------------------------------------------
// exploration coupling

inline std::vector<double> linear_grid(double w0, double t_end) {
    require(w0 > 0 && t_end >= 0, errc::invalid_argument, "bad linear grid");
    std::vector<double> g;
    for (std::size_t n = 0;; ++n) {
        double s = double(n) * w0;
        if (s > t_end * (1 + 1e-12)) break;
        g.push_back(s);
    }
    return g;
}

// t_0 = 2^n0, t_{k+1} = t_k + t_k^eps4, up to t_end.
inline std::vector<double> heavy_tail_grid(int n0, double eps4, double t_end) {
    require(eps4 > 0 && eps4 < 1, errc::invalid_argument, "eps4 must lie in (0,1)");
    std::vector<double> g{std::ldexp(1.0, n0)};
    require(g[0] <= t_end, errc::grid_exhausts_window, "grid start beyond window");
    for (;;) {
        double t = g.back() + std::pow(g.back(), eps4);
        if (t > t_end) break;
        g.push_back(t);
    }
    return g;
}

struct CouplingTrace {
    std::vector<double> times;
    std::vector<std::vector<Edge>> explored;   // explored edges per step, in examination order
    std::vector<std::vector<Site>> proxy;       // I_n, sorted
    std::vector<std::uint32_t> examinations;    // per edge slot over the whole trace
    std::size_t max_examinations = 0;
    bool boundary_hit = false;

    std::size_t explored_total(std::size_t n) const {
        std::size_t k = 0;
        for (std::size_t i = 0; i <= n && i < explored.size(); ++i) k += explored[i].size();
        return k;
    }
};

// Canonical exploration: from I_n, repeatedly examine the smallest unexplored
// edge with an endpoint in the current cluster; it joins the cluster when it
// carries a mark in [time_n, time_{n+1}]. I_{n+1} = I_0 plus all endpoints of
// explored edges. Index 0 of `explored` and `proxy` is the initial state.
inline CouplingTrace coupling_exploration(const Realization& real, const std::vector<double>& grid,
                                          const std::vector<Site>& I0 = {Site{}}) {
    const auto& R = real.region();
    require(grid.size() >= 1, errc::invalid_argument, "empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        require(grid[i] > grid[i - 1], errc::invalid_argument, "grid must be increasing");
    require(grid.front() >= real.window().t0 && grid.back() <= real.window().t1, errc::grid_exhausts_window,
            "grid leaves the realization window");
    CouplingTrace tr;
    tr.times = grid;
    tr.examinations.assign(R.edge_slots(), 0);
    std::vector<char> inI(R.size(), 0), explored(R.edge_slots(), 0);
    for (const auto& x : I0) {
        require(R.contains(x), errc::invalid_argument, "initial site outside region");
        inI[R.index(x)] = 1;
    }
    auto snapshot = [&] {
        std::vector<Site> v;
        for (std::size_t i = 0; i < inI.size(); ++i)
            if (inI[i]) v.push_back(R.site(i));
        return v;
    };
    auto on_boundary = [&](const Site& x) {
        for (int k = 0; k < R.d; ++k)
            if (x[k] == R.lo[k] || x[k] == R.hi[k]) return true;
        return false;
    };
    tr.explored.push_back({});
    tr.proxy.push_back(snapshot());
    for (std::size_t n = 0; n + 1 < grid.size(); ++n) {
        const double a = grid[n], b = grid[n + 1];
        std::vector<char> inC = inI;
        std::set<Edge> frontier;
        auto push_edges = [&](std::size_t i) {
            Site x = R.site(i);
            if (on_boundary(x)) tr.boundary_hit = true;
            for (int k = 0; k < R.d; ++k)
                for (int s : {-1, 1}) {
                    Site y = x + unit(k, s);
                    if (!R.contains(y)) continue;
                    Edge e = make_edge(x, y);
                    if (!explored[R.edge_slot(e)]) frontier.insert(e);
                }
        };
        for (std::size_t i = 0; i < inC.size(); ++i)
            if (inC[i]) push_edges(i);
        std::vector<Edge> step;
        while (!frontier.empty()) {
            Edge e = *frontier.begin();
            frontier.erase(frontier.begin());
            auto slot = R.edge_slot(e);
            if (explored[slot]) continue;
            explored[slot] = 1;
            ++tr.examinations[slot];
            step.push_back(e);
            auto ia = R.index(e.a), ib = R.index(e.b());
            inI[ia] = inI[ib] = 1;
            if (!real.trans(slot).any_in(a, b)) continue;
            for (auto j : {ia, ib})
                if (!inC[j]) {
                    inC[j] = 1;
                    push_edges(j);
                }
        }
        tr.explored.push_back(std::move(step));
        tr.proxy.push_back(snapshot());
    }
    for (auto c : tr.examinations) tr.max_examinations = std::max<std::size_t>(tr.max_examinations, c);
    return tr;
}

// Same marks, no cures.
inline Realization without_cures(const Realization& real) {
    std::vector<MarkTrain> c(real.region().size(), MarkTrain{{}, real.window()}), t;
    for (std::size_t s = 0; s < real.region().edge_slots(); ++s) t.push_back(real.trans(s));
    return Realization(real.region(), real.window(), std::move(c), std::move(t));
}

struct CouplingCheck {
    std::size_t containment_violations = 0; // infected(time_n) not inside I_n
    std::size_t closure_violations = 0;     // I_n not inside closure of the slab cluster of I_{n-1}
};

// Checks both containments against the cure-free process from I0 at time_0 and
// against the closure of the slab-open clusters (all edges, explored or not).
inline CouplingCheck check_coupling(const Realization& real, const CouplingTrace& tr,
                                    const std::vector<Site>& I0 = {Site{}}) {
    CouplingCheck out;
    const auto& R = real.region();
    auto free = without_cures(real);
    auto traj = evolve(free, I0, tr.times.back(), tr.times.front());
    for (std::size_t n = 0; n < tr.times.size(); ++n) {
        auto st = traj.state_at(tr.times[n]);
        std::vector<char> inI(R.size(), 0);
        for (const auto& x : tr.proxy[n]) inI[R.index(x)] = 1;
        for (std::size_t i = 0; i < st.size(); ++i)
            if (st[i] && !inI[i]) ++out.containment_violations;
        if (n == 0) continue;
        std::vector<char> open(R.edge_slots(), 0);
        R.for_each_edge([&](const Edge&, std::size_t s) {
            open[s] = free.trans(s).any_in(tr.times[n - 1], tr.times[n]) ? 1 : 0;
        });
        auto comps = connected_components(open, R);
        std::vector<char> hit(comps.sizes.size(), 0);
        for (const auto& x : tr.proxy[n - 1]) hit[std::size_t(comps.label[R.index(x)])] = 1;
        std::vector<char> clo(R.size(), 0);
        for (std::size_t i = 0; i < R.size(); ++i) {
            if (!hit[std::size_t(comps.label[i])]) continue;
            clo[i] = 1;
            Site x = R.site(i);
            for (int k = 0; k < R.d; ++k)
                for (int s : {-1, 1})
                    if (R.contains(x + unit(k, s))) clo[R.index(x + unit(k, s))] = 1;
        }
        for (std::size_t i = 0; i < R.size(); ++i)
            if (inI[i] && !clo[i]) ++out.closure_violations;
    }
    return out;
}

// ---------------------------------------------------------------------------
// bad events

struct BadEventParams {
    int n = 4;
    int m = 0;          // 0: smallest integer above d beta / eps4
    double betaExp = 0.5;
    double eta = 0.0;   // 0: midpoint of (1 - eps3, 1)
    double epsilon4 = 0.2;
    double delta = 1.0;
    int d = 1;
};

// Smallest integer strictly above d beta / eps4.
inline int default_m(int d, double beta, double eps4) {
    double x = double(d) * beta / eps4;
    double r = std::round(x);
    return int(std::abs(x - r) < 1e-9 ? r : std::floor(x)) + 1;
}
inline double default_eta(double eps3) { return 1.0 - eps3 / 2.0; }

struct BadEventReport {
    stats::Estimate U, V, W;
    double t0 = 0, t1 = 0;       // window
    int radius = 0;              // ball is the cube [-radius, radius]^d
    int m = 0;
    double eta = 0;
    double v_threshold = 0;      // marks needed on one edge for V
    double w_length = 0;         // cure-free interval length for W
    std::size_t animals_per_site = 0;
    std::uint64_t w_grid_hits = 0; // replicas with an empty half-length grid interval (dominates W)
    std::uint64_t w_not_dominated = 0; // replicas with W but no empty grid interval; must be 0
};

namespace detail {

// Cure marks of one site inside [a, b]. Exponential cures with a renewal started
// at 0 form a Poisson process, which is sampled on [a, b] directly.
inline std::vector<double> cures_in(const InterarrivalSpec& nud, const StartPolicy& start, double a, double b,
                                    Rng rng) {
    std::vector<double> out;
    if (nud.family == Family::Exponential && start.kind == StartPolicy::Kind::AtOrigin) {
        double rate = nud.p1 * nud.delta;
        for (double t = a + rng.exponential(rate); t <= b; t += rng.exponential(rate)) out.push_back(t);
        return out;
    }
    RenewalCursor cur(nud, start, 0.0, rng);
    for (double t = cur.first_at_or_after(a); t <= b; t = cur.next()) out.push_back(t);
    return out;
}

inline std::size_t marks_in(const InterarrivalSpec& mu, const StartPolicy& start, double a, double b, Rng rng,
                            std::size_t stop_at) {
    RenewalCursor cur(mu, start, 0.0, rng);
    std::size_t k = 0;
    for (double t = cur.first_at_or_after(a); t <= b && k < stop_at; t = cur.next()) ++k;
    return k;
}

} // namespace detail

// Per replica: marks of every edge near the ball in the window [2^n, 2^n + 2^{n eps4}],
// cures of every ball site in the same window. U scans all translates x + M with
// x in the ball; V counts marks per ball edge; W looks for the longest cure-free
// stretch of each ball site.
inline BadEventReport bad_event_estimators(const InterarrivalSpec& mu, const InterarrivalSpec& nu,
                                           const BadEventParams& P, std::size_t replicas, std::uint64_t seed,
                                           double eps3 = 0.5, const StartPolicy& start = StartPolicy::at_origin(),
                                           double max_sites = 1e6) {
    require(P.d >= 1 && P.d <= kMaxDim && P.n >= 0 && P.betaExp > 0 && P.epsilon4 > 0 && P.epsilon4 < 1 &&
                P.delta > 0 && replicas >= 1,
            errc::invalid_argument, "bad event parameters");
    BadEventReport rep;
    rep.m = P.m > 0 ? P.m : default_m(P.d, P.betaExp, P.epsilon4);
    rep.eta = P.eta > 0 ? P.eta : default_eta(eps3);
    require(rep.eta > 0 && rep.eta < 1, errc::invalid_argument, "eta must lie in (0,1)");
    const double n = double(P.n);
    rep.t0 = std::ldexp(1.0, P.n);
    rep.t1 = rep.t0 + std::pow(2.0, n * P.epsilon4);
    rep.radius = int(std::floor(std::pow(2.0, P.betaExp * n)));
    rep.v_threshold = std::pow(2.0, n * P.epsilon4 * rep.eta);
    rep.w_length = std::pow(2.0, (1 - rep.eta) * P.epsilon4 * n) / rep.m;

    const auto animals = enumerate_animals(P.d, rep.m);
    rep.animals_per_site = animals.size();
    const auto ball = SpatialBox::centered(P.d, rep.radius);
    const auto wide = SpatialBox::centered(P.d, rep.radius + rep.m);
    if (double(wide.size()) > max_sites) fail(errc::too_large, "ball too large for bad-event scan");

    const auto nud = nu.scaled(P.delta);
    const std::size_t need_v = std::size_t(std::ceil(rep.v_threshold - 1e-12));
    const std::uint64_t master = sub_seed(seed, std::uint64_t(P.n));
    const double half = rep.w_length / 2;
    std::uint64_t cu = 0, cv = 0, cw = 0;
    std::vector<char> marked(wide.edge_slots(), 0);

    for (std::size_t r = 0; r < replicas; ++r) {
        std::size_t vmax = 0;
        wide.for_each_edge([&](const Edge& e, std::size_t s) {
            bool in_ball = ball.contains(e);
            auto k = detail::marks_in(mu, start, rep.t0, rep.t1, detail::trans_stream(master, s, r),
                                      in_ball ? need_v : 1);
            marked[s] = k > 0;
            if (in_ball) vmax = std::max(vmax, k);
        });
        bool U = false;
        for (std::size_t i = 0; i < ball.size() && !U; ++i) {
            Site x = ball.site(i);
            for (const auto& M : animals) {
                bool all = true;
                for (const auto& e : M) {
                    Edge f{e.a + x, e.dir};
                    if (!marked[wide.edge_slot(f)]) {
                        all = false;
                        break;
                    }
                }
                if (all) {
                    U = true;
                    break;
                }
            }
        }
        bool V = vmax >= need_v && double(vmax) >= rep.v_threshold;
        bool W = false, G = false;
        for (std::size_t i = 0; i < ball.size(); ++i) {
            auto c = detail::cures_in(nud, start, rep.t0, rep.t1, detail::cure_stream(master, wide.index(ball.site(i)), r));
            double prev = rep.t0, gap = 0;
            for (double t : c) {
                gap = std::max(gap, t - prev);
                prev = t;
            }
            gap = std::max(gap, rep.t1 - prev);
            if (gap >= rep.w_length && rep.t1 - rep.t0 >= rep.w_length) W = true;
            // half-length grid t_j = t0 + j * half
            if (!G) {
                std::size_t k = 0;
                for (double a = rep.t0; a + half <= rep.t1; a += half) {
                    double b = a + half;
                    while (k < c.size() && c[k] < a) ++k;
                    if (k == c.size() || c[k] > b) {
                        G = true;
                        break;
                    }
                }
            }
        }
        cu += U;
        cv += V;
        cw += W;
        rep.w_grid_hits += G;
        if (W && !G) ++rep.w_not_dominated;
    }
    rep.U = stats::summarize(cu, replicas);
    rep.V = stats::summarize(cv, replicas);
    rep.W = stats::summarize(cw, replicas);
    return rep;
}

// ---------------------------------------------------------------------------
// oriented embedding

struct OrientedField {
    int d = 2, K = 0;
    double h = 0;
    SpatialBox box; // [0, K]^d; only sites with norm <= K are used
    std::vector<char> site_open; // per box index
    std::vector<char> bond_open; // per box index * d + dir, edge x -> x + e_dir

    bool used(const Site& x) const { return box.contains(x) && norm1(x) <= K; }
    bool site(const Site& x) const { return site_open[box.index(x)]; }
    bool bond(const Site& x, int dir) const { return bond_open[box.index(x) * std::size_t(d) + std::size_t(dir)]; }

    // Open oriented path from the origin to some site of norm `level`.
    bool reaches(int level) const {
        std::vector<char> on(box.size(), 0);
        Site o;
        if (!site(o)) return false;
        on[box.index(o)] = 1;
        for (int k = 0; k <= std::min(level, K); ++k) {
            bool any = false;
            for (std::size_t i = 0; i < box.size(); ++i) {
                if (!on[i]) continue;
                Site x = box.site(i);
                if (norm1(x) != k) continue;
                any = true;
                if (k == level) return true;
                for (int dir = 0; dir < d; ++dir) {
                    Site y = x + unit(dir);
                    if (used(y) && bond(x, dir) && site(y)) on[box.index(y)] = 1;
                }
            }
            if (!any) return false;
        }
        return false;
    }
};

// Site x open iff no cure of x in [h(|x|-1), h(|x|+1)]; bond x -> x+e open iff
// the edge has a mark in [h(|x|-1), h|x|].
inline OrientedField oriented_embedding(const Realization& real, double h, int K) {
    const int d = real.dim();
    require(h > 0 && K >= 0, errc::invalid_argument, "h > 0 and K >= 0 required");
    require(h * (K + 1) <= real.window().t1, errc::invalid_window, "field extent exceeds window");
    OrientedField f;
    f.d = d;
    f.K = K;
    f.h = h;
    f.box = SpatialBox::cube(d, 0, K);
    require(real.region().contains(f.box), errc::invalid_argument, "region must contain [0,K]^d");
    f.site_open.assign(f.box.size(), 0);
    f.bond_open.assign(f.box.size() * std::size_t(d), 0);
    for (std::size_t i = 0; i < f.box.size(); ++i) {
        Site x = f.box.site(i);
        int k = norm1(x);
        if (k > K) continue;
        f.site_open[i] = !real.cure(x).any_in(h * (k - 1), h * (k + 1));
        for (int dir = 0; dir < d; ++dir) {
            Site y = x + unit(dir);
            if (norm1(y) > K) continue;
            f.bond_open[i * std::size_t(d) + std::size_t(dir)] = real.trans(make_edge(x, y)).any_in(h * (k - 1), h * k);
        }
    }
    return f;
}

} // namespace gcp
