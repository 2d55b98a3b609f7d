#pragma once

// Renewal point processes on the line: interarrival laws, sampling, survival
// functions, overshoots.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace gcp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Window {
    double t0 = 0.0, t1 = 0.0;
    bool contains(double t) const { return t0 <= t && t <= t1; }
    double length() const { return t1 - t0; }
    friend bool operator==(const Window&, const Window&) = default;
};

inline Window make_window(double t0, double t1) {
    require(std::isfinite(t0) && std::isfinite(t1) && t0 < t1, errc::invalid_window,
            "window must be finite with t0 < t1");
    return {t0, t1};
}

enum class Family { Exponential, Pareto, Weibull, Uniform, Deterministic };

inline const char* family_name(Family f) {
    switch (f) {
    case Family::Exponential: return "exponential";
    case Family::Pareto: return "pareto";
    case Family::Weibull: return "weibull";
    case Family::Uniform: return "uniform";
    case Family::Deterministic: return "deterministic";
    }
    return "?";
}

// Parametric interarrival law. Parameters by family:
//   Exponential(rate)         p1 = rate
//   Pareto(alpha, scale)      survival (t/scale)^-alpha for t >= scale
//   Weibull(shape, scale)     survival exp(-(t/scale)^shape)
//   Uniform(a, b)             on [a, b]
//   Deterministic(period)
// `delta` rescales time: samples are divided by delta, survival_delta(t) = survival(delta t).
struct InterarrivalSpec {
    Family family = Family::Exponential;
    double p1 = 1.0, p2 = 0.0;
    double delta = 1.0;

    static InterarrivalSpec exponential(double rate) {
        require(rate > 0, errc::invalid_argument, "exponential rate must be positive");
        return {Family::Exponential, rate, 0.0, 1.0};
    }
    static InterarrivalSpec pareto(double alpha, double scale = 1.0) {
        require(alpha > 0 && scale > 0, errc::invalid_argument, "pareto needs alpha, scale > 0");
        return {Family::Pareto, alpha, scale, 1.0};
    }
    static InterarrivalSpec weibull(double shape, double scale) {
        require(shape > 0 && scale > 0, errc::invalid_argument, "weibull needs shape, scale > 0");
        return {Family::Weibull, shape, scale, 1.0};
    }
    static InterarrivalSpec uniform(double a, double b) {
        require(0 <= a && a < b, errc::invalid_argument, "uniform needs 0 <= a < b");
        return {Family::Uniform, a, b, 1.0};
    }
    static InterarrivalSpec deterministic(double period) {
        require(period > 0, errc::invalid_argument, "deterministic period must be positive");
        return {Family::Deterministic, period, 0.0, 1.0};
    }

    InterarrivalSpec scaled(double d) const {
        require(d > 0, errc::invalid_argument, "delta must be positive");
        auto s = *this;
        s.delta = delta * d;
        return s;
    }

    bool continuous() const { return family != Family::Deterministic; }

    double base_mean() const {
        switch (family) {
        case Family::Exponential: return 1.0 / p1;
        case Family::Pareto: return p1 > 1 ? p1 * p2 / (p1 - 1) : kInf;
        case Family::Weibull: return p2 * std::tgamma(1.0 + 1.0 / p1);
        case Family::Uniform: return 0.5 * (p1 + p2);
        case Family::Deterministic: return p1;
        }
        return kInf;
    }
    double mean() const { return base_mean() / delta; }
    bool finite_mean() const { return std::isfinite(base_mean()); }

    double base_survival(double t) const {
        if (t <= 0) return 1.0;
        switch (family) {
        case Family::Exponential: return std::exp(-p1 * t);
        case Family::Pareto: return t < p2 ? 1.0 : std::pow(t / p2, -p1);
        case Family::Weibull: return std::exp(-std::pow(t / p2, p1));
        case Family::Uniform: return t < p1 ? 1.0 : (t >= p2 ? 0.0 : (p2 - t) / (p2 - p1));
        case Family::Deterministic: return t < p1 ? 1.0 : 0.0;
        }
        return 0.0;
    }

    // P(X > t) for the scaled law.
    double survival(double t) const {
        require(t >= 0, errc::invalid_argument, "survival needs t >= 0");
        return base_survival(delta * t);
    }

    // Inverse of the scaled survival at level u in (0, 1].
    double survival_inverse(double u) const {
        double x = 0;
        switch (family) {
        case Family::Exponential: x = -std::log(u) / p1; break;
        case Family::Pareto: x = p2 * std::pow(u, -1.0 / p1); break;
        case Family::Weibull: x = p2 * std::pow(-std::log(u), 1.0 / p1); break;
        case Family::Uniform: x = p2 - u * (p2 - p1); break;
        case Family::Deterministic: x = p1; break;
        }
        return x / delta;
    }

    double sample(Rng& rng) const { return survival_inverse(rng.uniform_pos()); }

    // Forward recurrence time of the stationary renewal process: U * L with L length-biased.
    double sample_equilibrium(Rng& rng) const {
        require(finite_mean(), errc::stationary_with_infinite_mean,
                "stationary start needs a finite mean");
        double L = 0;
        switch (family) {
        case Family::Exponential: return rng.exponential(p1) / delta;
        case Family::Pareto: L = p2 * std::pow(rng.uniform_pos(), -1.0 / (p1 - 1.0)); break;
        case Family::Weibull: L = p2 * std::pow(rng.gamma(1.0 + 1.0 / p1), 1.0 / p1); break;
        case Family::Uniform: L = std::sqrt(p1 * p1 + rng.uniform() * (p2 * p2 - p1 * p1)); break;
        case Family::Deterministic: L = p1; break;
        }
        return rng.uniform() * L / delta;
    }

    // Integral of the scaled survival over [h, inf).
    double tail_integral(double h) const {
        double x = std::max(0.0, delta * h), r = 0;
        switch (family) {
        case Family::Exponential: r = std::exp(-p1 * x) / p1; break;
        case Family::Pareto:
            if (p1 <= 1) return kInf;
            r = x < p2 ? (p2 - x) + p2 / (p1 - 1) : std::pow(p2, p1) * std::pow(x, 1 - p1) / (p1 - 1);
            break;
        case Family::Weibull: {
            double a = 1.0 / p1;
            r = p2 * a * std::tgamma(a) * (1.0 - stats::gamma_p(a, std::pow(x / p2, p1)));
            break;
        }
        case Family::Uniform:
            r = x <= p1 ? (p1 - x) + 0.5 * (p2 - p1) : (x >= p2 ? 0.0 : 0.5 * (p2 - x) * (p2 - x) / (p2 - p1));
            break;
        case Family::Deterministic: r = std::max(0.0, p1 - x); break;
        }
        return r / delta;
    }

    friend bool operator==(const InterarrivalSpec&, const InterarrivalSpec&) = default;
};

struct StartPolicy {
    enum class Kind { AtOrigin, Delayed, Stationary, BurnIn };
    Kind kind = Kind::AtOrigin;
    double value = 0.0;

    static StartPolicy at_origin() { return {Kind::AtOrigin, 0.0}; }
    static StartPolicy delayed(double tau) {
        require(tau <= 0, errc::invalid_argument, "delayed start needs tau <= 0");
        return {Kind::Delayed, tau};
    }
    static StartPolicy stationary() { return {Kind::Stationary, 0.0}; }
    static StartPolicy burn_in(double duration) {
        require(duration >= 0, errc::invalid_argument, "burn-in duration must be >= 0");
        return {Kind::BurnIn, duration};
    }
    friend bool operator==(const StartPolicy&, const StartPolicy&) = default;
};

// Epochs S_k = S_{k-1} + X_k, k >= 1. The anchor S_0 is not a mark. For
// Stationary the first epoch is `ref` plus an equilibrium forward recurrence time.
// For BurnIn the anchor is `ref - duration`.
class RenewalCursor {
public:
    RenewalCursor(const InterarrivalSpec& spec, const StartPolicy& start, double ref, Rng rng)
        : spec_(spec), rng_(rng) {
        switch (start.kind) {
        case StartPolicy::Kind::AtOrigin: cur_ = 0.0; break;
        case StartPolicy::Kind::Delayed: cur_ = start.value; break;
        case StartPolicy::Kind::BurnIn: cur_ = ref - start.value; break;
        case StartPolicy::Kind::Stationary:
            cur_ = ref + spec_.sample_equilibrium(rng_);
            pending_ = true;
            break;
        }
    }

    // Next epoch (strictly after the previous one).
    double next() {
        if (pending_) {
            pending_ = false;
            return cur_;
        }
        for (;;) {
            double x = spec_.sample(rng_);
            double t = cur_ + x;
            if (t > cur_) {
                cur_ = t;
                return cur_;
            }
            // Zero-length interarrival would duplicate a mark; redraw.
        }
    }

    // First epoch >= t, consuming everything before it.
    double first_at_or_after(double t) {
        double e;
        do e = next();
        while (e < t);
        return e;
    }

    Rng& rng() { return rng_; }

private:
    InterarrivalSpec spec_;
    Rng rng_;
    double cur_ = 0.0;
    bool pending_ = false;
};

struct MarkTrain {
    std::vector<double> times;
    Window window;

    std::size_t size() const { return times.size(); }
    bool empty() const { return times.empty(); }

    // Index of first mark >= t.
    std::size_t lower(double t) const {
        return std::size_t(std::lower_bound(times.begin(), times.end(), t) - times.begin());
    }
    // Number of marks in the closed interval [a, b].
    std::size_t count_in(double a, double b) const {
        if (b < a) return 0;
        auto lo = std::lower_bound(times.begin(), times.end(), a);
        auto hi = std::upper_bound(times.begin(), times.end(), b);
        return std::size_t(hi - lo);
    }
    bool any_in(double a, double b) const { return count_in(a, b) > 0; }
    // Any mark in the open interval (a, b).
    bool any_in_open(double a, double b) const {
        auto it = std::upper_bound(times.begin(), times.end(), a);
        return it != times.end() && *it < b;
    }
    std::optional<double> first_at_or_after(double t) const {
        auto i = lower(t);
        if (i < times.size()) return times[i];
        return std::nullopt;
    }
    std::optional<double> last_before(double t) const {
        auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return std::nullopt;
        return *(it - 1);
    }

    bool valid() const {
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (!window.contains(times[i])) return false;
            if (i > 0 && !(times[i - 1] < times[i])) return false;
        }
        return true;
    }
};

inline MarkTrain make_train(std::vector<double> times, Window w) {
    MarkTrain m{std::move(times), w};
    require(m.valid(), errc::invalid_argument, "mark times must be strictly increasing inside the window");
    return m;
}

inline MarkTrain sample_renewal(const InterarrivalSpec& spec, const StartPolicy& start, Window window,
                                Rng rng) {
    require(std::isfinite(window.t0) && std::isfinite(window.t1) && window.t0 <= window.t1,
            errc::invalid_window, "window must be finite and ordered");
    if (start.kind == StartPolicy::Kind::Stationary && !spec.finite_mean())
        fail(errc::stationary_with_infinite_mean, "stationary start needs a finite mean");
    MarkTrain out{{}, window};
    RenewalCursor cur(spec, start, window.t0, rng);
    for (;;) {
        double e = cur.next();
        if (e > window.t1) break;
        if (e >= window.t0) out.times.push_back(e);
    }
    return out;
}

// Z_t: distance from t to the next mark at or after t; +inf when none in the window.
inline double overshoot(const MarkTrain& train, double t) {
    auto m = train.first_at_or_after(t);
    return m ? *m - t : kInf;
}

// ---------------------------------------------------------------------------
// Renewal-function and gap estimates.

struct RenewalIncrement {
    double t = 0.0;
    double estimate = 0.0; // mean number of epochs in (t, t+h]
    stats::Interval ci;
};

inline std::vector<RenewalIncrement> estimate_renewal_function(const InterarrivalSpec& spec,
                                                               const std::vector<double>& grid, double h,
                                                               std::size_t replicas, std::uint64_t seed,
                                                               StartPolicy start = StartPolicy::at_origin()) {
    require(replicas >= 1, errc::invalid_argument, "replicas must be >= 1");
    require(h > 0, errc::invalid_argument, "h must be positive");
    double tmax = 0;
    for (double t : grid) tmax = std::max(tmax, t);
    std::vector<std::vector<double>> counts(grid.size(), std::vector<double>(replicas));
    for (std::size_t r = 0; r < replicas; ++r) {
        auto train = sample_renewal(spec, start, {std::min(0.0, start.value), tmax + h},
                                    derive_stream(seed, obj::id(obj::aux, 0), r));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double t = grid[i];
            auto lo = std::upper_bound(train.times.begin(), train.times.end(), t);
            auto hi = std::upper_bound(train.times.begin(), train.times.end(), t + h);
            counts[i][r] = double(hi - lo);
        }
    }
    std::vector<RenewalIncrement> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        auto m = stats::moments(counts[i]);
        out.push_back({grid[i], m.mean, stats::normal_ci(m)});
    }
    return out;
}

// Rigorous bound on sup_t P(no epoch in [t, t+h]) for finite-mean laws, from
//   P(gap) = int_{[0,t)} s(t+h-u) dU(u) <= U(c) * sum_j s(h + j c),  U(c) <= 1/s(c),
// minimised over a grid of c.
inline std::optional<double> gap_probability_bound(const InterarrivalSpec& spec, double h) {
    if (!spec.finite_mean()) return std::nullopt;
    double best = kInf;
    double m = spec.mean();
    for (int k = -40; k <= 40; ++k) {
        double c = m * std::pow(2.0, k / 4.0);
        double sc = spec.survival(c);
        if (sc <= 0) continue;
        double b = (spec.survival(h) + spec.tail_integral(h) / c) / sc;
        best = std::min(best, b);
    }
    if (!std::isfinite(best)) return std::nullopt;
    return std::min(1.0, best);
}

struct GapEstimate {
    stats::Estimate estimate; // P(no epoch in [t, t+h])
    std::optional<double> analytic_bound;
};

inline GapEstimate gap_probability(const InterarrivalSpec& spec, const StartPolicy& start, double t, double h,
                                   std::size_t replicas, std::uint64_t seed) {
    require(t >= 0 && h > 0, errc::invalid_argument, "gap_probability needs t >= 0, h > 0");
    require(replicas >= 1, errc::invalid_argument, "replicas must be >= 1");
    std::uint64_t gaps = 0;
    for (std::size_t r = 0; r < replicas; ++r) {
        RenewalCursor cur(spec, start, 0.0, derive_stream(seed, obj::id(obj::aux, 0), r));
        double e = cur.first_at_or_after(t);
        if (e > t + h) ++gaps;
    }
    return {stats::summarize(gaps, replicas), gap_probability_bound(spec, h)};
}

// ---------------------------------------------------------------------------
// w0: largest w on a geometric grid with sup_t P(hit [t, t+w]) <= eps after the
// Wilson upper margin, sup over a 64-point t grid.

struct W0Options {
    std::size_t replicas = 20000;
    std::size_t t_points = 64;
    std::uint64_t seed = 1;
    int per_octave = 16;
    int octaves = 40;
};

struct W0Result {
    double w0 = 0.0;
    std::vector<double> t_grid;
    std::vector<double> w_grid;
    double sup_hit_upper = 0.0; // Wilson upper of sup_t P(hit) at w0
    std::size_t argmax_t = 0;
};

inline std::vector<double> sup_t_grid(const InterarrivalSpec& spec, std::size_t points = 64) {
    double T = spec.finite_mean() ? 10.0 * spec.mean() : 1e6;
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = T * double(i) / double(points - 1);
    return g;
}

namespace detail {

// Overshoots Z_t for every grid t, one train per replica; sorted per t.
inline std::vector<std::vector<double>> sorted_overshoots(const InterarrivalSpec& spec, const std::vector<double>& ts,
                                                          std::size_t R, std::uint64_t seed) {
    std::vector<std::vector<double>> Z(ts.size(), std::vector<double>(R));
    for (std::size_t r = 0; r < R; ++r) {
        RenewalCursor cur(spec, StartPolicy::at_origin(), 0.0, derive_stream(seed, obj::id(obj::aux, 1), r));
        double e = cur.next();
        for (std::size_t i = 0; i < ts.size(); ++i) {
            double t = ts[i];
            while (e < t) e = cur.next();
            Z[i][r] = e - t;
        }
    }
    for (auto& z : Z) std::sort(z.begin(), z.end());
    return Z;
}

} // namespace detail

inline W0Result compute_w0(const InterarrivalSpec& spec, double eps, const W0Options& opt = {}) {
    require(spec.continuous(), errc::continuity_required, "w0 needs a continuous law");
    require(eps > 0 && eps <= 1, errc::invalid_argument, "eps must lie in (0, 1]");
    W0Result res;
    res.t_grid = sup_t_grid(spec, opt.t_points);
    double wmax = spec.finite_mean() ? 10.0 * spec.mean() : 1e6;
    int N = opt.per_octave * opt.octaves;
    for (int i = 0; i <= N; ++i) res.w_grid.push_back(wmax * std::pow(2.0, -double(N - i) / opt.per_octave));

    const std::size_t R = opt.replicas;
    auto Z = detail::sorted_overshoots(spec, res.t_grid, R, opt.seed);
    // Largest allowed hit count.
    std::uint64_t kmax = 0;
    bool any = false;
    for (std::uint64_t k = 0; k <= R; ++k) {
        if (stats::wilson(k, R).hi <= eps) {
            kmax = k;
            any = true;
        } else {
            break;
        }
    }
    res.w0 = 0.0;
    if (!any) return res;
    for (double w : res.w_grid) {
        bool ok = true;
        double worst = 0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < Z.size(); ++i) {
            auto hits = std::uint64_t(std::upper_bound(Z[i].begin(), Z[i].end(), w) - Z[i].begin());
            if (hits > kmax) {
                ok = false;
                break;
            }
            double up = stats::wilson(hits, R).hi;
            if (up > worst) {
                worst = up;
                arg = i;
            }
        }
        if (!ok) break;
        res.w0 = w;
        res.sup_hit_upper = worst;
        res.argmax_t = arg;
    }
    return res;
}

struct H0Result {
    double h0 = kInf;
    std::vector<double> t_grid;
    double sup_gap_upper = 1.0; // Wilson upper of sup_t P(no mark in [t, t+h0])
};

// Smallest h on a geometric grid with sup_t P(no mark in [t, t+h]) <= eps, judged
// by the Wilson upper bound at every grid t. Needs a finite mean.
inline H0Result compute_h0(const InterarrivalSpec& spec, double eps, const W0Options& opt = {}) {
    require(spec.finite_mean(), errc::invalid_argument, "h0 needs a finite mean");
    require(eps > 0 && eps < 1, errc::invalid_argument, "eps must lie in (0, 1)");
    H0Result res;
    res.t_grid = sup_t_grid(spec, opt.t_points);
    const std::size_t R = opt.replicas;
    auto Z = detail::sorted_overshoots(spec, res.t_grid, R, opt.seed);
    double hmax = 1e3 * spec.mean();
    int N = opt.per_octave * opt.octaves;
    for (int i = 0; i <= N; ++i) {
        double h = hmax * std::pow(2.0, -double(N - i) / opt.per_octave);
        double worst = 0;
        for (const auto& z : Z) {
            auto gaps = std::uint64_t(z.end() - std::upper_bound(z.begin(), z.end(), h));
            worst = std::max(worst, stats::wilson(gaps, R).hi);
            if (worst > eps) break;
        }
        if (worst <= eps) {
            res.h0 = h;
            res.sup_gap_upper = worst;
            return res;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Condition checks.

struct TriState {
    enum class Kind { AnalyticYes, AnalyticNo, Empirical, NotEvaluated };
    Kind kind = Kind::NotEvaluated;
    bool empirical_holds = false;
    double estimate = 0.0;
    stats::Interval ci;

    bool holds() const { return kind == Kind::AnalyticYes || (kind == Kind::Empirical && empirical_holds); }
    static TriState yes() {
        TriState t;
        t.kind = Kind::AnalyticYes;
        return t;
    }
    static TriState no() {
        TriState t;
        t.kind = Kind::AnalyticNo;
        return t;
    }
};

inline const char* tri_name(const TriState& t) {
    switch (t.kind) {
    case TriState::Kind::AnalyticYes: return "analytic-yes";
    case TriState::Kind::AnalyticNo: return "analytic-no";
    case TriState::Kind::Empirical: return t.empirical_holds ? "empirical-yes" : "empirical-no";
    case TriState::Kind::NotEvaluated: return "not-evaluated";
    }
    return "?";
}

struct GFit {
    double epsilon = 0.0;
    stats::LinearFit fit;
    bool passes = false;
};

struct ConditionReport {
    struct {
        TriState holds;
        double epsilon4 = 0.0;
        double t0 = kInf;
        std::vector<double> t_grid;
        std::vector<GFit> fits;
    } condG;
    struct {
        TriState A, B, C;
        double M1 = 0, eps1 = 0, t1 = 0;
        double M2 = 0, eps2 = 0, r2 = 0;
        double M3 = 0, eps3 = 0;
    } condABC;
    struct {
        TriState holds;
        double theta = 0.0;
        double integral = kInf;
    } condM;
};

struct ConditionOptions {
    int d = 1;
    bool empirical_g = true;
    int log2_t_min = 10;
    int log2_t_max = 24;
    std::size_t replicas = 10000;
    std::uint64_t seed = 7;
    double eps_step = 0.01;
};

namespace detail {

// 16-point Gauss-Legendre on [a, b].
template <class F>
double gauss_legendre16(F&& f, double a, double b) {
    static const double x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
                                0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
    static const double w[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
                                0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};
    double c = 0.5 * (a + b), r = 0.5 * (b - a), s = 0;
    for (int i = 0; i < 8; ++i) s += w[i] * (f(c - r * x[i]) + f(c + r * x[i]));
    return s * r;
}

template <class F>
double integrate_panels(F&& f, double a, double b, int panels) {
    double s = 0, h = (b - a) / panels;
    for (int i = 0; i < panels; ++i) s += gauss_legendre16(f, a + i * h, a + (i + 1) * h);
    return s;
}

} // namespace detail

// int_1^inf x exp(theta sqrt(ln x)) mu(dx) for the scaled law, in u = ln x.
inline double moment_m_integral(const InterarrivalSpec& spec, double theta) {
    const double dl = spec.delta;
    auto g = [&](double u) { return std::exp(theta * std::sqrt(std::max(0.0, u))); };
    switch (spec.family) {
    case Family::Deterministic: {
        double x = spec.p1 / dl;
        return x >= 1 ? x * g(std::log(x)) : 0.0;
    }
    case Family::Uniform: {
        double a = std::max(1.0, spec.p1 / dl), b = spec.p2 / dl;
        if (b <= a) return 0.0;
        double dens = 1.0 / (b - a);
        auto f = [&](double u) { double x = std::exp(u); return x * x * g(u) * dens; };
        return detail::integrate_panels(f, std::log(a), std::log(b), 64);
    }
    case Family::Pareto: {
        if (spec.p1 <= 1) return kInf;
        double s = spec.p2 / dl, al = spec.p1;
        double lo = std::max(0.0, std::log(s));
        // density al s^al x^{-al-1}; integrand in u: al s^al e^{(1-al)u} g(u)
        double U = lo + 10;
        while ((1 - al) * U + theta * std::sqrt(U) > -60) U *= 1.5;
        auto f = [&](double u) { return al * std::pow(s, al) * std::exp((1 - al) * u) * g(u); };
        return detail::integrate_panels(f, lo, U, 4000);
    }
    case Family::Exponential:
    case Family::Weibull: {
        auto dens = [&](double x) {
            if (spec.family == Family::Exponential) return spec.p1 * dl * std::exp(-spec.p1 * dl * x);
            double k = spec.p1, lam = spec.p2 / dl;
            return k / lam * std::pow(x / lam, k - 1) * std::exp(-std::pow(x / lam, k));
        };
        // Upper cutoff where the tail is below 1e-300 relative.
        double U = 1.0;
        while (std::exp(U) < 1e6 * spec.mean() + 100 && U < 700) U += 1.0;
        while (U < 700) {
            double x = std::exp(U);
            if (x * x * g(U) * dens(x) < 1e-30) break;
            U += 1.0;
        }
        auto f = [&](double u) { double x = std::exp(u); return x * x * g(u) * dens(x); };
        return detail::integrate_panels(f, 0.0, U, 4000);
    }
    }
    return kInf;
}

inline double m_threshold(int d) { return std::sqrt(8.0 * std::log(2.0) * d); }

// Empirical (G): for each candidate eps regress log P(hit [t, t + t^eps]) on log t.
inline void empirical_condition_g(const InterarrivalSpec& spec, const ConditionOptions& opt, ConditionReport& rep) {
    auto& G = rep.condG;
    G.t_grid.clear();
    for (int k = opt.log2_t_min; k <= opt.log2_t_max; ++k) G.t_grid.push_back(std::ldexp(1.0, k));
    const std::size_t R = opt.replicas, T = G.t_grid.size();
    std::vector<std::vector<double>> Z(T, std::vector<double>(R));
    for (std::size_t r = 0; r < R; ++r) {
        RenewalCursor cur(spec, StartPolicy::at_origin(), 0.0, derive_stream(opt.seed, obj::id(obj::aux, 2), r));
        double e = cur.next();
        for (std::size_t i = 0; i < T; ++i) {
            while (e < G.t_grid[i]) e = cur.next();
            Z[i][r] = e - G.t_grid[i];
        }
    }
    for (auto& z : Z) std::sort(z.begin(), z.end());
    G.fits.clear();
    G.epsilon4 = 0;
    std::optional<stats::LinearFit> best;
    for (double eps = opt.eps_step; eps < 1.0 - 1e-12; eps += opt.eps_step) {
        std::vector<double> x, y, w;
        bool usable = true;
        for (std::size_t i = 0; i < T; ++i) {
            double t = G.t_grid[i], len = std::pow(t, eps);
            auto hits = std::size_t(std::upper_bound(Z[i].begin(), Z[i].end(), len) - Z[i].begin());
            if (hits == 0 || hits == R) {
                usable = false;
                break;
            }
            double p = double(hits) / double(R);
            x.push_back(std::log(t));
            y.push_back(std::log(p));
            w.push_back(double(R) * p / (1 - p)); // inverse delta-method variance of log p
        }
        if (!usable) continue;
        GFit gf;
        gf.epsilon = eps;
        gf.fit = stats::weighted_linear_fit(x, y, w);
        gf.passes = gf.fit.slope_ci.hi <= -eps;
        G.fits.push_back(gf);
        if (gf.passes) {
            G.epsilon4 = eps;
            best = gf.fit;
        }
    }
    G.holds.kind = TriState::Kind::Empirical;
    G.holds.empirical_holds = best.has_value();
    if (best) {
        G.holds.estimate = best->slope;
        G.holds.ci = best->slope_ci;
        // t0: first grid point from which the direct inequality holds at every later point.
        G.t0 = kInf;
        for (std::size_t i = T; i-- > 0;) {
            double t = G.t_grid[i], len = std::pow(t, G.epsilon4);
            auto hits = std::uint64_t(std::upper_bound(Z[i].begin(), Z[i].end(), len) - Z[i].begin());
            if (stats::wilson(hits, R).hi <= std::pow(t, -G.epsilon4))
                G.t0 = t;
            else
                break;
        }
    }
}

inline ConditionReport check_conditions(const InterarrivalSpec& spec, const ConditionOptions& opt = {}) {
    ConditionReport rep;
    auto& abc = rep.condABC;
    const bool heavy = spec.family == Family::Pareto && spec.p1 < 1;
    if (heavy) {
        double al = spec.p1, s = spec.p2 / spec.delta;
        abc.M1 = 2.0;
        abc.eps1 = 0.5 * (1 - al) * (1 - std::pow(abc.M1, -al)) / al;
        abc.t1 = s;
        abc.A = TriState::yes();
        abc.M2 = 2.0;
        abc.eps2 = std::pow(abc.M2, -al);
        abc.r2 = std::max(0.0, std::log(s) / std::log(abc.M2));
        abc.B = TriState::yes();
        if (s == 1.0) {
            abc.eps3 = std::min(al, 1 - al);
            abc.M3 = 1.0;
        } else {
            abc.eps3 = 0.5 * std::min(al, 1 - al);
            abc.M3 = std::max({s, std::pow(s, al / (al - abc.eps3)), std::pow(s, -al / (1 - al - abc.eps3))});
        }
        abc.C = TriState::yes();
    } else {
        abc.A = TriState::no();
        // Bounded support makes B vacuous; Pareto(alpha >= 1) has ratio M^-alpha.
        bool bounded = spec.family == Family::Uniform || spec.family == Family::Deterministic;
        if (spec.family == Family::Pareto) {
            abc.M2 = 2.0;
            abc.eps2 = std::pow(2.0, -spec.p1);
            abc.B = TriState::yes();
        } else {
            abc.B = bounded ? TriState::yes() : TriState::no();
        }
        abc.C = TriState::no();
    }

    rep.condM.theta = 1.01 * m_threshold(opt.d);
    if (!spec.finite_mean()) {
        rep.condM.holds = TriState::no();
        rep.condM.integral = kInf;
    } else {
        rep.condM.integral = moment_m_integral(spec, rep.condM.theta);
        rep.condM.holds = std::isfinite(rep.condM.integral) ? TriState::yes() : TriState::no();
    }

    if (heavy && opt.empirical_g) {
        empirical_condition_g(spec, opt, rep);
    } else if (!heavy) {
        // Finite-mean (or alpha >= 1) laws hit long windows with probability tending to 1.
        rep.condG.holds = TriState::no();
    }
    return rep;
}

} // namespace gcp
