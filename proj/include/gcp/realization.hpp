#pragma once

// Graphical constructions on a finite space-time window.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <variant>
#include <vector>

#include "error.hpp"
#include "lattice.hpp"
#include "marks.hpp"
#include "rng.hpp"

namespace gcp {

struct Interval {
    double a = 0.0, b = 0.0;
    friend bool operator==(const Interval&, const Interval&) = default;
};

// Dynamic environment of one edge.
struct EdgeEnv {
    bool initially_open = false;
    MarkTrain opens;  // O_e
    MarkTrain closes; // C_e
    std::vector<Interval> open_intervals;

    bool open_at(double t) const {
        auto it = std::upper_bound(open_intervals.begin(), open_intervals.end(), t,
                                   [](double x, const Interval& iv) { return x < iv.a; });
        if (it == open_intervals.begin()) return false;
        --it;
        return t <= it->b;
    }
};

enum class EventKind : std::uint8_t { Cure = 0, Trans = 1 };

// idx is a site index (cure) or an edge slot (transmission) of the region.
struct Event {
    double t;
    std::uint32_t idx;
    EventKind kind;
};

inline bool event_before(const Event& x, const Event& y) {
    if (x.t != y.t) return x.t < y.t;
    if (x.kind != y.kind) return x.kind < y.kind;
    return x.idx < y.idx;
}

struct GcpModel {
    InterarrivalSpec edge = InterarrivalSpec::exponential(1.0);
    InterarrivalSpec site = InterarrivalSpec::exponential(1.0);
    StartPolicy start = StartPolicy::at_origin();
    bool cures = true;
};

struct CpdeModel {
    double v = 1.0, p = 0.5, lambda = 1.0;
    // Transmissions are a rate-lambda_max train thinned with probability lambda/lambda_max.
    // Zero means lambda_max = lambda.
    double lambda_max = 0.0;
};

struct ErcpModel {
    InterarrivalSpec mu = InterarrivalSpec::pareto(0.5, 1.0);
    InterarrivalSpec nu = InterarrivalSpec::exponential(1.0);
    double delta = 1.0;
    StartPolicy start = StartPolicy::at_origin();
    bool cures = true;
};

using Model = std::variant<GcpModel, CpdeModel, ErcpModel>;

class Realization {
public:
    Realization() = default;

    // Takes ownership of per-site and per-slot trains. `trans` has one entry per
    // edge slot of the region (entries for invalid slots must be empty).
    Realization(SpatialBox region, Window window, std::vector<MarkTrain> cure, std::vector<MarkTrain> trans,
                std::optional<std::vector<EdgeEnv>> env = std::nullopt)
        : region_(region), window_(window), cure_(std::move(cure)), trans_(std::move(trans)), env_(std::move(env)) {
        require(cure_.size() == region_.size(), errc::invalid_argument, "one cure train per site");
        require(trans_.size() == region_.edge_slots(), errc::invalid_argument, "one transmission train per slot");
        if (env_) require(env_->size() == region_.edge_slots(), errc::invalid_argument, "one env per slot");
        for (const auto& m : cure_) require(m.valid(), errc::invalid_argument, "cure train invalid");
        for (std::size_t s = 0; s < trans_.size(); ++s) {
            require(trans_[s].valid(), errc::invalid_argument, "transmission train invalid");
            if (!trans_[s].empty())
                require(region_.slot_valid(s), errc::invalid_argument, "marks on an edge leaving the region");
        }
    }

    const SpatialBox& region() const { return region_; }
    const Window& window() const { return window_; }
    int dim() const { return region_.d; }
    const MarkTrain& cure(std::size_t site) const { return cure_[site]; }
    const MarkTrain& cure(const Site& x) const { return cure_[region_.index(x)]; }
    const MarkTrain& trans(std::size_t slot) const { return trans_[slot]; }
    const MarkTrain& trans(const Edge& e) const { return trans_[region_.edge_slot(e)]; }
    bool has_env() const { return env_.has_value(); }
    const EdgeEnv& env(std::size_t slot) const { return (*env_)[slot]; }
    const EdgeEnv& env(const Edge& e) const { return (*env_)[region_.edge_slot(e)]; }
    // Built on first use; copies share the cache.
    const std::vector<Event>& timeline() const {
        std::call_once(lazy_->once, [&] { build_timeline(); });
        return lazy_->events;
    }

    // A transmission mark at t on the slot is usable (edge open when an environment exists).
    bool effective(std::size_t slot, double t) const { return !env_ || (*env_)[slot].open_at(t); }

    // First timeline position with time >= t.
    std::size_t timeline_from(double t) const {
        const auto& tl = timeline();
        return std::size_t(std::lower_bound(tl.begin(), tl.end(), t, [](const Event& e, double x) { return e.t < x; }) -
                           tl.begin());
    }

    std::size_t total_marks() const {
        std::size_t n = 0;
        for (const auto& m : cure_) n += m.size();
        for (const auto& m : trans_) n += m.size();
        return n;
    }

private:
    struct Lazy {
        std::once_flag once;
        std::vector<Event> events;
    };

    void build_timeline() const {
        std::size_t n = 0;
        for (const auto& m : cure_) n += m.size();
        for (const auto& m : trans_) n += m.size();
        // Each train is already sorted, so build per-train runs and merge them.
        std::vector<Event> all;
        all.reserve(n);
        std::vector<std::pair<std::size_t, std::size_t>> runs;
        for (std::size_t i = 0; i < cure_.size(); ++i) {
            if (cure_[i].empty()) continue;
            std::size_t b = all.size();
            for (double t : cure_[i].times) all.push_back({t, std::uint32_t(i), EventKind::Cure});
            runs.push_back({b, all.size()});
        }
        for (std::size_t s = 0; s < trans_.size(); ++s) {
            if (trans_[s].empty()) continue;
            std::size_t b = all.size();
            if (!env_) {
                for (double t : trans_[s].times) all.push_back({t, std::uint32_t(s), EventKind::Trans});
            } else {
                const auto& iv = (*env_)[s].open_intervals;
                std::size_t j = 0;
                for (double t : trans_[s].times) {
                    while (j < iv.size() && iv[j].b < t) ++j;
                    if (j < iv.size() && iv[j].a <= t) all.push_back({t, std::uint32_t(s), EventKind::Trans});
                }
            }
            if (all.size() > b) runs.push_back({b, all.size()});
        }
        auto& out = lazy_->events;
        out.reserve(all.size());
        auto later = [&](const std::pair<std::size_t, std::size_t>& x, const std::pair<std::size_t, std::size_t>& y) {
            return event_before(all[y.first], all[x.first]);
        };
        std::priority_queue<std::pair<std::size_t, std::size_t>, std::vector<std::pair<std::size_t, std::size_t>>,
                            decltype(later)>
            heap(later, std::move(runs));
        while (!heap.empty()) {
            auto r = heap.top();
            heap.pop();
            out.push_back(all[r.first]);
            if (++r.first < r.second) heap.push(r);
        }
    }

    SpatialBox region_;
    Window window_;
    std::vector<MarkTrain> cure_;
    std::vector<MarkTrain> trans_;
    std::optional<std::vector<EdgeEnv>> env_;
    std::shared_ptr<Lazy> lazy_ = std::make_shared<Lazy>();
};

// ---------------------------------------------------------------------------

inline MarkTrain poisson_train(double rate, Window w, Rng& rng) {
    MarkTrain m{{}, w};
    if (rate <= 0) return m;
    double t = w.t0;
    for (;;) {
        t += rng.exponential(rate);
        if (t > w.t1) break;
        m.times.push_back(t);
    }
    return m;
}

inline EdgeEnv make_env(bool init_open, MarkTrain opens, MarkTrain closes, Window w) {
    EdgeEnv e{init_open, std::move(opens), std::move(closes), {}};
    bool open = init_open;
    double since = w.t0;
    std::size_t i = 0, j = 0;
    while (i < e.opens.size() || j < e.closes.size()) {
        bool take_open = j >= e.closes.size() || (i < e.opens.size() && e.opens.times[i] <= e.closes.times[j]);
        double t = take_open ? e.opens.times[i++] : e.closes.times[j++];
        if (take_open && !open) {
            open = true;
            since = t;
        } else if (!take_open && open) {
            e.open_intervals.push_back({since, t});
            open = false;
        }
    }
    if (open) e.open_intervals.push_back({since, w.t1});
    return e;
}

namespace detail {

inline Rng cure_stream(std::uint64_t seed, std::size_t i, std::uint64_t rep) {
    return derive_stream(seed, obj::id(obj::cure, i), rep);
}
inline Rng trans_stream(std::uint64_t seed, std::size_t s, std::uint64_t rep) {
    return derive_stream(seed, obj::id(obj::trans, s), rep);
}
inline Rng env_stream(std::uint64_t seed, std::size_t s, std::uint64_t rep) {
    return derive_stream(seed, obj::id(obj::env, s), rep);
}

} // namespace detail

// CPDE environment alone, per edge slot (invalid slots get an empty env).
inline std::vector<EdgeEnv> build_environment(const CpdeModel& m, const SpatialBox& region, Window w, std::uint64_t seed,
                                              std::uint64_t replica) {
    std::vector<EdgeEnv> env(region.edge_slots());
    for (std::size_t s = 0; s < env.size(); ++s) {
        if (!region.slot_valid(s)) {
            env[s] = EdgeEnv{false, MarkTrain{{}, w}, MarkTrain{{}, w}, {}};
            continue;
        }
        Rng r = detail::env_stream(seed, s, replica);
        bool init = r.bernoulli(m.p);
        auto opens = poisson_train(m.v * m.p, w, r);
        auto closes = poisson_train(m.v * (1 - m.p), w, r);
        env[s] = make_env(init, std::move(opens), std::move(closes), w);
    }
    return env;
}

// Independent trains per site/edge from the (seed, object, replica) streams.
inline Realization build_realization(const Model& model, const SpatialBox& region, Window window, std::uint64_t seed,
                                     std::uint64_t replica) {
    require(std::isfinite(window.t0) && std::isfinite(window.t1) && window.t0 < window.t1, errc::invalid_window,
            "window must be finite with t0 < t1");
    std::vector<MarkTrain> cure(region.size(), MarkTrain{{}, window});
    std::vector<MarkTrain> trans(region.edge_slots(), MarkTrain{{}, window});
    std::optional<std::vector<EdgeEnv>> env;

    if (auto* g = std::get_if<GcpModel>(&model)) {
        if (g->cures)
            for (std::size_t i = 0; i < cure.size(); ++i)
                cure[i] = sample_renewal(g->site, g->start, window, detail::cure_stream(seed, i, replica));
        region.for_each_edge([&](const Edge&, std::size_t s) {
            trans[s] = sample_renewal(g->edge, g->start, window, detail::trans_stream(seed, s, replica));
        });
    } else if (auto* c = std::get_if<CpdeModel>(&model)) {
        require(c->v >= 0 && c->p >= 0 && c->p <= 1 && c->lambda >= 0, errc::invalid_argument, "bad CPDE parameters");
        double lmax = c->lambda_max > 0 ? c->lambda_max : c->lambda;
        require(c->lambda <= lmax, errc::invalid_argument, "lambda exceeds lambda_max");
        for (std::size_t i = 0; i < cure.size(); ++i) {
            Rng r = detail::cure_stream(seed, i, replica);
            cure[i] = poisson_train(1.0, window, r);
        }
        region.for_each_edge([&](const Edge&, std::size_t s) {
            Rng r = detail::trans_stream(seed, s, replica);
            MarkTrain m{{}, window};
            if (lmax > 0) {
                double t = window.t0;
                for (;;) {
                    t += r.exponential(lmax);
                    double u = r.uniform();
                    if (t > window.t1) break;
                    if (u * lmax < c->lambda) m.times.push_back(t);
                }
            }
            trans[s] = std::move(m);
        });
        env = build_environment(*c, region, window, seed, replica);
    } else if (auto* e = std::get_if<ErcpModel>(&model)) {
        require(e->delta > 0, errc::invalid_argument, "delta must be positive");
        auto nud = e->nu.scaled(e->delta);
        if (e->cures)
            for (std::size_t i = 0; i < cure.size(); ++i)
                cure[i] = sample_renewal(nud, e->start, window, detail::cure_stream(seed, i, replica));
        region.for_each_edge([&](const Edge&, std::size_t s) {
            trans[s] = sample_renewal(e->mu, e->start, window, detail::trans_stream(seed, s, replica));
        });
    }
    return Realization(region, window, std::move(cure), std::move(trans), std::move(env));
}

// Handcrafted realizations for tests and replays.
class RealizationBuilder {
public:
    RealizationBuilder(SpatialBox region, Window window)
        : region_(region), window_(window), cure_(region.size()), trans_(region.edge_slots()) {}

    RealizationBuilder& cure(const Site& x, double t) {
        require(region_.contains(x), errc::invalid_argument, "cure site outside region");
        cure_[region_.index(x)].push_back(t);
        return *this;
    }
    RealizationBuilder& trans(const Site& x, const Site& y, double t) {
        Edge e = make_edge(x, y);
        require(region_.contains(e), errc::invalid_argument, "edge outside region");
        trans_[region_.edge_slot(e)].push_back(t);
        return *this;
    }
    RealizationBuilder& env(const Edge& e, bool init_open, std::vector<double> opens, std::vector<double> closes) {
        if (!env_) env_.emplace(region_.edge_slots());
        (*env_)[region_.edge_slot(e)] = {init_open, std::move(opens), std::move(closes)};
        return *this;
    }

    Realization build() const {
        auto finish = [&](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            return make_train(std::move(v), window_);
        };
        std::vector<MarkTrain> c, t;
        for (const auto& v : cure_) c.push_back(finish(v));
        for (const auto& v : trans_) t.push_back(finish(v));
        std::optional<std::vector<EdgeEnv>> env;
        if (env_) {
            env.emplace();
            for (std::size_t s = 0; s < env_->size(); ++s) {
                const auto& [init, o, cl] = (*env_)[s];
                env->push_back(make_env(init, finish(o), finish(cl), window_));
            }
        }
        return Realization(region_, window_, std::move(c), std::move(t), std::move(env));
    }

private:
    struct EnvSpec {
        bool init = false;
        std::vector<double> opens, closes;
    };
    SpatialBox region_;
    Window window_;
    std::vector<std::vector<double>> cure_, trans_;
    std::optional<std::vector<EnvSpec>> env_;
};

} // namespace gcp
