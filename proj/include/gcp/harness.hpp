#pragma once

// Experiment configs, replica-parallel execution and run manifests.

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <map>
#include <thread>

#include "cpde.hpp"
#include "crossings.hpp"
#include "dynamics.hpp"
#include "ercp.hpp"
#include "io.hpp"
#include "marks.hpp"
#include "realization.hpp"
#include "renorm.hpp"
#include "stats.hpp"

#ifndef GCP_VERSION
#define GCP_VERSION "0.1.0"
#endif

namespace gcp::harness {

inline std::string code_version() { return GCP_VERSION; }

// f(i) for i in [0, n) on up to `threads` workers. Results are stored by index,
// so the output never depends on scheduling. The exception of the smallest
// failing index is rethrown.
template <class F>
auto parallel_map(std::size_t n, unsigned threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
    using T = decltype(f(std::size_t{}));
    std::vector<std::optional<T>> slots(n);
    std::vector<std::exception_ptr> errs(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                slots[i].emplace(f(i));
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    unsigned k = std::max(1u, std::min<unsigned>(threads, unsigned(std::max<std::size_t>(n, 1))));
    if (k == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(k);
        for (unsigned t = 0; t < k; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    std::vector<T> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------

inline json to_json(const ScaleScheme& s) {
    json j{{"d", s.d}, {"l0", s.l0}, {"h0", s.h0}, {"alpha", s.alpha}};
    if (s.kind == ScaleScheme::Kind::Geometric) {
        j["kind"] = "geometric";
        j["beta"] = s.beta;
    } else {
        j["kind"] = "quadratic-exponential";
        j["a"] = s.a;
        j["theta"] = s.theta;
    }
    return j;
}

inline ScaleScheme scales_from_json(const json& j) {
    return io::detail::config_guard([&] {
        ScaleScheme s;
        std::string kind = j.value("kind", "geometric");
        if (kind == "geometric") s.kind = ScaleScheme::Kind::Geometric;
        else if (kind == "quadratic-exponential") s.kind = ScaleScheme::Kind::QuadraticExponential;
        else fail(errc::config_invalid, "unknown scale kind '" + kind + "'");
        s.d = j.value("d", 1);
        s.l0 = j.value("l0", 1);
        s.h0 = j.value("h0", 1.0);
        s.alpha = j.value("alpha", 4);
        s.beta = j.value("beta", 6);
        s.a = j.value("a", 1.0);
        s.theta = j.value("theta", 1.0);
        s.validate();
        return s;
    });
}

inline json to_json(const SpaceTimeBox& b) { return {{"space", io::to_json(b.space)}, {"s", b.s}, {"t", b.t}}; }

inline SpaceTimeBox stbox_from_json(const json& j) {
    return io::detail::config_guard([&] {
        auto sp = io::box_from_json(io::detail::field(j, "space"));
        double s = io::detail::num(j, "s"), t = io::detail::num(j, "t");
        if (!(s < t)) fail(errc::config_invalid, "box needs s < t");
        return SpaceTimeBox(sp, s, t);
    });
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k{"gcp-extinction", "lambda-sweep", "growth",      "iterperc",
                                            "bad-events",     "un-estimate",  "crossing",    "cascade-verify",
                                            "hierarchy",      "renewal-check", "block-field"};
    return k;
}

struct ExperimentConfig {
    std::string kind;
    std::optional<Model> model;
    std::optional<SpatialBox> region;
    std::optional<Window> window;
    std::optional<ScaleScheme> scales;
    std::uint64_t seed = 1;
    std::size_t replicas = 1;
    unsigned threads = 1;
    std::string out_dir = "out";
    json params = json::object();

    // Canonical form. threads and out are left out: they do not affect results.
    json canonical() const {
        json j{{"kind", kind}, {"seed", seed}, {"replicas", replicas}, {"params", params}};
        if (model) j["model"] = io::to_json(*model);
        if (region) j["region"] = io::to_json(*region);
        if (window) j["window"] = io::to_json(*window);
        if (scales) j["scales"] = to_json(*scales);
        return j;
    }
    std::string hash() const { return io::hex64(io::fnv1a64(canonical().dump())); }
};

namespace detail {

inline bool model_is(const ExperimentConfig& c, std::size_t idx) { return c.model && c.model->index() == idx; }

inline void need(bool ok, const std::string& what) {
    if (!ok) fail(errc::config_invalid, what);
}

} // namespace detail

inline void validate(const ExperimentConfig& c) {
    using detail::need;
    const auto& ks = experiment_kinds();
    need(std::find(ks.begin(), ks.end(), c.kind) != ks.end(), "unknown experiment kind '" + c.kind + "'");
    need(c.replicas >= 1, "replicas must be >= 1");
    need(c.threads >= 1, "threads must be >= 1");
    need(c.params.is_object(), "params must be an object");
    const std::string& k = c.kind;
    if (k == "gcp-extinction" || k == "lambda-sweep" || k == "block-field") {
        need(c.model.has_value() && c.region.has_value() && c.window.has_value(), k + " needs model, region, window");
    }
    if (k == "lambda-sweep") {
        need(detail::model_is(c, 1), "lambda-sweep needs a cpde model");
        need(c.params.contains("lambdas") && c.params["lambdas"].is_array() && !c.params["lambdas"].empty(),
             "lambda-sweep needs params.lambdas");
        for (const auto& l : c.params["lambdas"]) need(l.is_number() && l.get<double>() >= 0, "lambdas must be >= 0");
    }
    if (k == "block-field") need(detail::model_is(c, 1), "block-field needs a cpde model");
    if (k == "growth" || k == "bad-events") need(detail::model_is(c, 2), k + " needs an ercp model");
    if (k == "growth") need(c.region.has_value(), "growth needs a region");
    if (k == "un-estimate" || k == "cascade-verify" || k == "hierarchy")
        need(c.scales.has_value(), k + " needs scales");
    if (k == "un-estimate" || k == "cascade-verify" || k == "crossing") need(c.model.has_value(), k + " needs a model");
    if (k == "crossing") need(c.params.contains("box"), "crossing needs params.box");
    if (k == "iterperc") need(c.params.contains("p"), "iterperc needs params.p");
    if (k == "renewal-check") need(c.params.contains("spec"), "renewal-check needs params.spec");
    if (c.region && c.model) {
        if (c.scales) need(c.scales->d == c.region->d, "scales and region dimensions differ");
    }
}

inline ExperimentConfig config_from_json(const json& j) {
    return io::detail::config_guard([&] {
        detail::need(j.is_object(), "config must be a JSON object");
        static const std::vector<std::string> known{"kind", "model", "region", "window", "scales", "seed",
                                                    "replicas", "threads", "out", "params"};
        for (auto it = j.begin(); it != j.end(); ++it)
            detail::need(std::find(known.begin(), known.end(), it.key()) != known.end(),
                         "unknown config key '" + it.key() + "'");
        ExperimentConfig c;
        c.kind = io::detail::field(j, "kind").get<std::string>();
        if (j.contains("model")) c.model = io::model_from_json(j["model"]);
        if (j.contains("region")) c.region = io::box_from_json(j["region"]);
        if (j.contains("window")) c.window = io::window_from_json(j["window"]);
        if (j.contains("scales")) c.scales = scales_from_json(j["scales"]);
        if (j.contains("seed")) {
            detail::need(j["seed"].is_number_unsigned() ||
                             (j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0),
                         "seed must be a non-negative integer");
            c.seed = j["seed"].get<std::uint64_t>();
        }
        if (j.contains("replicas")) {
            detail::need(j["replicas"].is_number_integer() && j["replicas"].get<long long>() >= 1,
                         "replicas must be a positive integer");
            c.replicas = j["replicas"].get<std::size_t>();
        }
        if (j.contains("threads")) {
            detail::need(j["threads"].is_number_integer() && j["threads"].get<long long>() >= 1,
                         "threads must be a positive integer");
            c.threads = j["threads"].get<unsigned>();
        }
        if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
        if (j.contains("params")) c.params = j["params"];
        validate(c);
        return c;
    });
}

inline ExperimentConfig load_config(const std::filesystem::path& p) {
    std::string text;
    try {
        text = io::read_file(p);
    } catch (const error&) {
        fail(errc::config_invalid, "cannot read config " + p.string());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(errc::config_invalid, std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------

struct Output {
    std::string name;
    std::string content;
};

struct ExperimentResult {
    std::vector<Output> outputs;
    std::uint64_t violations = 0; // verify kinds: property failures
};

struct OutputRecord {
    std::string file;
    std::string fnv1a64;
    std::size_t bytes = 0;
};

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string code_version;
    std::string started, finished;
    unsigned threads = 1;
    std::uint64_t violations = 0;
    std::vector<OutputRecord> outputs;

    json to_json() const {
        json o = json::array();
        for (const auto& r : outputs) o.push_back({{"file", r.file}, {"fnv1a64", r.fnv1a64}, {"bytes", r.bytes}});
        return {{"config_hash", config_hash}, {"seed", seed},        {"code_version", code_version},
                {"started", started},         {"finished", finished}, {"threads", threads},
                {"violations", violations},   {"outputs", o}};
    }
};

inline constexpr const char* kManifestName = "manifest.json";

namespace detail {

inline std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::vector<Site> sites_param(const json& params, const char* key, int d) {
    if (!params.contains(key)) return {Site{}};
    std::vector<Site> out;
    for (const auto& s : params[key]) out.push_back(io::detail::site_from(s, d));
    need(!out.empty(), std::string(key) + " must be nonempty");
    return out;
}

template <class T>
T param(const json& p, const char* key, T dflt) {
    if (!p.contains(key)) return dflt;
    try {
        return p[key].get<T>();
    } catch (const json::exception& e) {
        fail(errc::config_invalid, std::string("param '") + key + "': " + e.what());
    }
}

inline std::vector<double> time_points(Window w, std::size_t k) {
    std::vector<double> ts(k);
    for (std::size_t i = 0; i < k; ++i) ts[i] = w.t0 + (w.t1 - w.t0) * double(i + 1) / double(k);
    return ts;
}

// ---- experiment kinds ----------------------------------------------------

inline ExperimentResult run_extinction(const ExperimentConfig& c) {
    const auto A = sites_param(c.params, "initial", c.region->d);
    const double horizon = param(c.params, "horizon", c.window->t1);
    auto tau = parallel_map(c.replicas, c.threads, [&](std::size_t r) {
        auto real = build_realization(*c.model, *c.region, *c.window, c.seed, r);
        return extinction_time(real, A, horizon);
    });
    io::Csv ext({"replica", "extinct", "tau"});
    for (std::size_t r = 0; r < tau.size(); ++r) ext.row(io::cells(r, !tau[r].censored, tau[r].value));
    io::Csv surv({"t", "alive", "replicas", "fraction", "ci_lo", "ci_hi"});
    for (double t : time_points({c.window->t0, horizon}, param<std::size_t>(c.params, "points", 20))) {
        std::uint64_t alive = 0;
        for (const auto& e : tau) alive += e.censored || e.value > t;
        auto est = stats::summarize(alive, tau.size());
        surv.row(io::cells(t, alive, tau.size(), est.value, est.ci.lo, est.ci.hi));
    }
    return {{{"extinction.csv", ext.str()}, {"survival.csv", surv.str()}}, 0};
}

// CRN sweep: every lambda is a thinning of one rate-lambda_max train, cures and
// environment are shared. The audit re-checks that on every replica.
inline ExperimentResult run_lambda_sweep(const ExperimentConfig& c) {
    auto base = std::get<CpdeModel>(*c.model);
    std::vector<double> lambdas;
    for (const auto& l : c.params["lambdas"]) lambdas.push_back(l.get<double>());
    std::sort(lambdas.begin(), lambdas.end());
    const double lmax = std::max(lambdas.back(), base.lambda_max);
    const auto A = sites_param(c.params, "initial", c.region->d);
    struct Row {
        std::vector<Extinction> tau;
        bool shared_cures = true, shared_env = true, nested = true;
    };
    auto rows = parallel_map(c.replicas, c.threads, [&](std::size_t r) {
        Row row;
        std::optional<Realization> prev;
        for (double l : lambdas) {
            CpdeModel m = base;
            m.lambda = l;
            m.lambda_max = lmax;
            auto real = build_realization(m, *c.region, *c.window, c.seed, r);
            row.tau.push_back(extinction_time(real, A, c.window->t1));
            if (prev) {
                const auto& R = *c.region;
                for (std::size_t i = 0; i < R.size(); ++i)
                    row.shared_cures = row.shared_cures && prev->cure(i).times == real.cure(i).times;
                R.for_each_edge([&](const Edge&, std::size_t s) {
                    row.shared_env = row.shared_env && prev->env(s).open_intervals == real.env(s).open_intervals;
                    const auto& a = prev->trans(s).times;
                    const auto& b = real.trans(s).times;
                    row.nested = row.nested && std::includes(b.begin(), b.end(), a.begin(), a.end());
                });
            }
            prev = std::move(real);
        }
        return row;
    });
    io::Csv per({"replica", "lambda", "extinct", "tau"});
    std::uint64_t bad = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < lambdas.size(); ++i)
            per.row(io::cells(r, lambdas[i], !rows[r].tau[i].censored, rows[r].tau[i].value));
        bad += !(rows[r].shared_cures && rows[r].shared_env && rows[r].nested);
    }
    io::Csv sum({"lambda", "survived", "replicas", "p_survive", "ci_lo", "ci_hi"});
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        std::uint64_t s = 0;
        for (const auto& row : rows) s += row.tau[i].censored;
        auto e = stats::summarize(s, rows.size());
        sum.row(io::cells(lambdas[i], s, rows.size(), e.value, e.ci.lo, e.ci.hi));
    }
    json audit{{"replicas", rows.size()}, {"lambda_max", lmax}, {"replicas_failing", bad}, {"ok", bad == 0}};
    return {{{"sweep.csv", per.str()}, {"sweep_summary.csv", sum.str()}, {"crn_audit.json", audit.dump(2) + "\n"}},
            bad};
}

inline ExperimentResult run_growth(const ExperimentConfig& c) {
    const auto& m = std::get<ErcpModel>(*c.model);
    auto times = geometric_grid(param(c.params, "t_min", 10.0), param(c.params, "t_max", 1000.0),
                                param(c.params, "per_decade", 5));
    auto runs = parallel_map(c.replicas, c.threads,
                             [&](std::size_t r) { return ercp_growth(m.mu, m.start, *c.region, times, c.seed, r); });
    std::vector<std::vector<double>> rows;
    std::uint64_t hits = 0;
    for (const auto& g : runs) {
        rows.emplace_back(g.r.begin(), g.r.end());
        hits += g.boundary_hit;
    }
    io::Csv csv({"t", "median_r", "q10", "q90", "boundary_hits"});
    for (std::size_t i = 0; i < times.size(); ++i) {
        std::vector<double> col;
        for (const auto& r : rows) col.push_back(r[i]);
        std::uint64_t h = 0;
        for (const auto& g : runs) h += g.hit_time <= times[i];
        csv.row(io::cells(times[i], stats::median(col), stats::quantile(col, 0.1), stats::quantile(col, 0.9), h));
    }
    json fit{{"replicas", rows.size()}, {"boundary_hits", hits}};
    try {
        auto g = growth_exponent(times, rows, param<std::size_t>(c.params, "resamples", 400), c.seed);
        fit["rho"] = g.rho;
        fit["ci"] = {g.ci.lo, g.ci.hi};
        fit["points_used"] = g.times.size();
    } catch (const error& e) {
        if (e.code() != errc::insufficient_range) throw;
        fit["error"] = e.what();
    }
    return {{{"growth.csv", csv.str()}, {"growth_fit.json", fit.dump(2) + "\n"}}, 0};
}

inline ExperimentResult run_iterperc(const ExperimentConfig& c) {
    const double p = param(c.params, "p", 0.3);
    const int d = param(c.params, "d", 2), steps = param(c.params, "steps", 100);
    auto runs = parallel_map(c.replicas, c.threads,
                             [&](std::size_t r) { return iterated_percolation(p, d, {Site{}}, steps, c.seed, r); });
    io::Csv csv({"n", "median_R", "q10", "q90", "mean_R", "median_R_over_n"});
    for (int n = 0; n <= steps; ++n) {
        std::vector<double> col;
        for (const auto& s : runs) col.push_back(s.R[std::size_t(n)]);
        double med = stats::median(col);
        csv.row(io::cells(n, med, stats::quantile(col, 0.1), stats::quantile(col, 0.9), stats::moments(col).mean,
                          n > 0 ? med / n : 0.0));
    }
    io::Csv per({"replica", "R_final", "size_final"});
    for (std::size_t r = 0; r < runs.size(); ++r) per.row(io::cells(r, runs[r].R.back(), runs[r].size.back()));
    return {{{"iterperc.csv", csv.str()}, {"iterperc_replicas.csv", per.str()}}, 0};
}

inline ExperimentResult run_bad_events(const ExperimentConfig& c) {
    const auto& m = std::get<ErcpModel>(*c.model);
    const int n0 = param(c.params, "n_min", 4), n1 = param(c.params, "n_max", 10);
    need(n0 >= 0 && n0 <= n1, "need 0 <= n_min <= n_max");
    BadEventParams base;
    base.betaExp = param(c.params, "beta", 0.09);
    base.epsilon4 = param(c.params, "eps4", 0.3);
    base.eta = param(c.params, "eta", 0.0);
    base.m = param(c.params, "m", 0);
    base.d = param(c.params, "d", 1);
    base.delta = m.delta;
    const double eps3 = param(c.params, "eps3", 0.5);
    auto reps = parallel_map(std::size_t(n1 - n0 + 1), c.threads, [&](std::size_t i) {
        BadEventParams P = base;
        P.n = n0 + int(i);
        return bad_event_estimators(m.mu, m.nu, P, c.replicas, c.seed, eps3, m.start);
    });
    io::Csv csv({"n", "event", "p_hat", "ci_lo", "ci_hi", "successes", "replicas", "m", "radius"});
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const auto& r = reps[i];
        for (auto [name, e] : {std::pair{"U", &r.U}, std::pair{"V", &r.V}, std::pair{"W", &r.W}})
            csv.row(io::cells(n0 + int(i), name, e->value, e->ci.lo, e->ci.hi, e->successes, e->n, r.m, r.radius));
    }
    return {{{"bad_events.csv", csv.str()}}, 0};
}

inline ExperimentResult run_un_estimate(const ExperimentConfig& c) {
    const int n0 = param(c.params, "n_min", 0), n1 = param(c.params, "n_max", 2);
    need(n0 >= 0 && n0 <= n1, "need 0 <= n_min <= n_max");
    auto us = parallel_map(std::size_t(n1 - n0 + 1), c.threads, [&](std::size_t i) {
        return estimate_u_n(*c.model, *c.scales, n0 + int(i), c.replicas, c.seed);
    });
    io::Csv csv({"n", "u_hat", "ci_lo", "ci_hi", "bound", "consistent"});
    for (std::size_t i = 0; i < us.size(); ++i) {
        if (i == 0) {
            csv.row(io::cells(us[i].n, us[i].u_hat, us[i].u_ci.lo, us[i].u_ci.hi, "", ""));
            continue;
        }
        auto rc = recurrence_check(*c.scales, us[i - 1], us[i]);
        csv.row(io::cells(us[i].n, us[i].u_hat, us[i].u_ci.lo, us[i].u_ci.hi, rc.bound, rc.consistent));
    }
    return {{{"un.csv", csv.str()}}, 0};
}

inline json report_json(const CrossingReport& r, std::size_t replica) {
    return {{"replica", replica}, {"box", to_json(r.box)},       {"T", r.temp_full},
            {"T_half", r.temp_half}, {"S", r.spatial}, {"S_half", r.spatial_half}, {"H", r.half_crossing}};
}

inline ExperimentResult run_crossing(const ExperimentConfig& c) {
    auto box = stbox_from_json(c.params["box"]);
    auto reps = parallel_map(c.replicas, c.threads, [&](std::size_t r) {
        auto real = build_realization(*c.model, box.space, {box.s, box.t}, c.seed, r);
        return report_json(detect_report(real, box), r).dump();
    });
    std::string out;
    for (const auto& l : reps) out += l + "\n";
    return {{{"crossing.jsonl", out}}, 0};
}

inline ExperimentResult run_cascade_verify(const ExperimentConfig& c) {
    const int k = param(c.params, "k", 2);
    const auto& sc = *c.scales;
    const auto C = pair_count(sc, k);
    struct Row {
        bool half = false, verified = true;
        std::uint64_t pairs = 0;
        std::string err;
    };
    auto rows = parallel_map(c.replicas, c.threads, [&](std::size_t r) {
        Row row;
        auto B = scale_box(sc, k, {});
        auto real = build_realization(*c.model, B.space, {B.s, B.t}, c.seed, r);
        try {
            auto tr = cascade_hierarchy(real, sc, k, {});
            if (!tr) return row;
            row.half = true;
            row.pairs = tr->max_pairs_examined;
            row.verified = is_achievable(tr->hierarchy, sc) && tr->max_pairs_examined <= C;
            for (const auto& st : tr->steps) row.verified = row.verified && st.cert.valid;
            for (const auto& [w, b] : tr->hierarchy.nodes)
                row.verified = row.verified && detect_report(real, b).half_crossing;
        } catch (const error& e) {
            if (e.code() != errc::no_witness) throw;
            row.verified = false;
            row.err = e.what();
        }
        return row;
    });
    io::Csv csv({"replica", "half_crossed", "verified", "max_pairs_examined", "error"});
    std::uint64_t bad = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        csv.row(io::cells(r, rows[r].half, rows[r].verified, rows[r].pairs, rows[r].err));
        bad += !rows[r].verified;
    }
    return {{{"cascade.csv", csv.str()}}, bad};
}

inline ExperimentResult run_hierarchy(const ExperimentConfig& c) {
    const auto& sc = *c.scales;
    const int n = param(c.params, "n", 1);
    json cat{{"scales", to_json(sc)},
             {"n", n},
             {"entropy_constant", entropy_constant(sc.d, sc.alpha, sc.beta)},
             {"pair_count", pair_count(sc, n)}};
    json lists = json::array();
    for (int w = 0; w <= 2 * sc.d; ++w) {
        auto cg = catalogue(sc, n, w, {});
        json a = json::array(), b = json::array();
        for (const auto& x : cg.first) a.push_back(to_json(x));
        for (const auto& x : cg.second) b.push_back(to_json(x));
        lists.push_back({{"which", w}, {"first", a}, {"second", b}});
    }
    cat["catalogues"] = lists;
    const int k = param(c.params, "sample_depth", 0);
    std::string samples;
    if (k > 0) {
        auto hs = parallel_map(c.replicas, c.threads, [&](std::size_t r) {
            Rng rng = derive_stream(c.seed, obj::id(obj::aux, 0), r);
            auto H = sample_hierarchy(sc, k, {}, rng);
            json nodes = json::object();
            for (const auto& [w, b] : H.nodes) nodes[w.empty() ? "root" : w] = to_json(b);
            return json{{"replica", r}, {"achievable", is_achievable(H, sc)}, {"nodes", nodes}}.dump();
        });
        for (const auto& l : hs) samples += l + "\n";
    }
    ExperimentResult res{{{"catalogue.json", cat.dump(2) + "\n"}}, 0};
    if (k > 0) res.outputs.push_back({"hierarchies.jsonl", samples});
    return res;
}

inline json tri_json(const TriState& t) {
    json j{{"status", tri_name(t)}};
    if (t.kind == TriState::Kind::Empirical) {
        j["estimate"] = t.estimate;
        j["ci"] = {t.ci.lo, t.ci.hi};
    }
    return j;
}

inline ExperimentResult run_renewal_check(const ExperimentConfig& c) {
    auto spec = io::interarrival_from_json(c.params["spec"]);
    ConditionOptions opt;
    opt.d = param(c.params, "d", 1);
    opt.empirical_g = param(c.params, "empirical_g", true);
    opt.log2_t_min = param(c.params, "log2_t_min", opt.log2_t_min);
    opt.log2_t_max = param(c.params, "log2_t_max", opt.log2_t_max);
    opt.replicas = c.replicas;
    opt.seed = c.seed;
    auto rep = check_conditions(spec, opt);
    json j{{"spec", io::to_json(spec)}};
    j["G"] = tri_json(rep.condG.holds);
    j["G"]["epsilon4"] = rep.condG.epsilon4;
    j["A"] = tri_json(rep.condABC.A);
    j["B"] = tri_json(rep.condABC.B);
    j["C"] = tri_json(rep.condABC.C);
    j["ABC_constants"] = {{"M1", rep.condABC.M1}, {"eps1", rep.condABC.eps1}, {"t1", rep.condABC.t1},
                          {"M2", rep.condABC.M2}, {"eps2", rep.condABC.eps2}, {"r2", rep.condABC.r2},
                          {"M3", rep.condABC.M3}, {"eps3", rep.condABC.eps3}};
    j["M"] = tri_json(rep.condM.holds);
    j["M"]["theta"] = rep.condM.theta;
    j["M"]["integral"] = std::isfinite(rep.condM.integral) ? json(rep.condM.integral) : json("inf");
    if (c.params.contains("eps")) {
        const double eps = c.params["eps"].get<double>();
        W0Options wo;
        wo.replicas = c.replicas;
        wo.seed = c.seed;
        j["w0"] = compute_w0(spec, eps, wo).w0;
        if (spec.finite_mean()) j["h0"] = compute_h0(spec, eps, wo).h0;
    }
    return {{{"conditions.json", j.dump(2) + "\n"}}, 0};
}

inline ExperimentResult run_block_field(const ExperimentConfig& c) {
    const int n = param(c.params, "n", 1);
    const int z0 = param(c.params, "z_min", 0), z1 = param(c.params, "z_max", 0);
    const int k0 = param(c.params, "k_min", 0), k1 = param(c.params, "k_max", 0);
    auto fields = parallel_map(c.replicas, c.threads, [&](std::size_t r) {
        auto real = build_realization(*c.model, *c.region, *c.window, c.seed, r);
        auto f = block_field(real, n, {z0, z1}, {k0, k1});
        json rows = json::array();
        for (int k = k0; k <= k1; ++k) {
            json row = json::array();
            for (int z = z0; z <= z1; ++z) row.push_back(int(f.at(k, z)));
            rows.push_back(row);
        }
        return json{{"replica", r}, {"z_min", z0}, {"k_min", k0}, {"eta", rows}}.dump();
    });
    std::string out;
    for (const auto& l : fields) out += l + "\n";
    return {{{"block_field.jsonl", out}}, 0};
}

} // namespace detail

inline ExperimentResult execute(const ExperimentConfig& c) {
    validate(c);
    const std::string& k = c.kind;
    try {
            if (k == "gcp-extinction") return detail::run_extinction(c);
            if (k == "lambda-sweep") return detail::run_lambda_sweep(c);
            if (k == "growth") return detail::run_growth(c);
            if (k == "iterperc") return detail::run_iterperc(c);
            if (k == "bad-events") return detail::run_bad_events(c);
            if (k == "un-estimate") return detail::run_un_estimate(c);
            if (k == "crossing") return detail::run_crossing(c);
            if (k == "cascade-verify") return detail::run_cascade_verify(c);
            if (k == "hierarchy") return detail::run_hierarchy(c);
            if (k == "renewal-check") return detail::run_renewal_check(c);
            if (k == "block-field") return detail::run_block_field(c);
    } catch (const json::exception& e) {
        fail(errc::config_invalid, e.what());
    }
    fail(errc::config_invalid, "unknown experiment kind");
}

// Runs the experiment, writes every output atomically into c.out_dir and the
// manifest last.
inline RunManifest run_experiment(const ExperimentConfig& c) {
    RunManifest man;
    man.started = detail::utc_now();
    // Probe the output directory before doing any work.
    io::write_atomic(std::filesystem::path(c.out_dir) / ".probe", "");
    std::filesystem::remove(std::filesystem::path(c.out_dir) / ".probe");
    ExperimentResult res = execute(c);
    man.config_hash = c.hash();
    man.seed = c.seed;
    man.code_version = code_version();
    man.threads = c.threads;
    man.violations = res.violations;
    for (const auto& o : res.outputs) {
        io::write_atomic(std::filesystem::path(c.out_dir) / o.name, o.content);
        man.outputs.push_back({o.name, io::hex64(io::fnv1a64(o.content)), o.content.size()});
    }
    man.finished = detail::utc_now();
    io::write_atomic(std::filesystem::path(c.out_dir) / kManifestName, man.to_json().dump(2) + "\n");
    return man;
}

// Recomputes the checksums of the files listed in a manifest.
inline bool verify_manifest(const std::filesystem::path& dir) {
    auto j = json::parse(io::read_file(dir / kManifestName));
    for (const auto& o : j.at("outputs")) {
        std::string body;
        try {
            body = io::read_file(dir / o.at("file").get<std::string>());
        } catch (const error&) {
            return false;
        }
        if (io::hex64(io::fnv1a64(body)) != o.at("fnv1a64").get<std::string>()) return false;
    }
    return true;
}

} // namespace gcp::harness
