#pragma once

// JSON for model parameters, realization dumps (JSONL), CSV tables, checksums
// and atomic file output.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "lattice.hpp"
#include "marks.hpp"
#include "realization.hpp"

namespace gcp {

using json = nlohmann::json;

namespace io {

// ---------------------------------------------------------------------------
// small helpers

// Shortest decimal form that reads back to the same double.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(bool(in), errc::invalid_argument, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to a sibling temporary and renames it into place.
inline void write_atomic(const std::filesystem::path& p, std::string_view content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    if (ec) fail(errc::output_path_unwritable, "cannot create " + p.parent_path().string());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(errc::output_path_unwritable, "cannot open " + tmp.string());
        out.write(content.data(), std::streamsize(content.size()));
        out.flush();
        if (!out) fail(errc::output_path_unwritable, "write failed for " + tmp.string());
    }
    fs::rename(tmp, p, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(errc::output_path_unwritable, "cannot move output into " + p.string());
    }
}

// Tiny CSV builder. Cells containing separators or quotes are quoted.
class Csv {
public:
    explicit Csv(std::vector<std::string> header) : cols_(header.size()) { line(header); }

    Csv& row(const std::vector<std::string>& cells) {
        require(cells.size() == cols_, errc::invalid_argument, "csv row width mismatch");
        line(cells);
        ++rows_;
        return *this;
    }
    std::size_t rows() const { return rows_; }
    const std::string& str() const { return buf_; }

    static std::string cell(double x) { return fmt(x); }
    static std::string cell(bool x) { return x ? "1" : "0"; }
    template <class I, std::enable_if_t<std::is_integral_v<I> && !std::is_same_v<I, bool>, int> = 0>
    static std::string cell(I x) {
        return std::to_string(x);
    }
    static std::string cell(std::string s) { return s; }
    static std::string cell(const char* s) { return s; }

private:
    void line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) buf_ += ',';
            const auto& c = cells[i];
            if (c.find_first_of(",\"\n") != std::string::npos) {
                buf_ += '"';
                for (char ch : c) {
                    if (ch == '"') buf_ += '"';
                    buf_ += ch;
                }
                buf_ += '"';
            } else {
                buf_ += c;
            }
        }
        buf_ += '\n';
    }
    std::size_t cols_;
    std::size_t rows_ = 0;
    std::string buf_;
};

template <class... Ts>
std::vector<std::string> cells(const Ts&... xs) {
    return {Csv::cell(xs)...};
}

// ---------------------------------------------------------------------------
// config-side JSON. Parse failures raise ConfigInvalid.

namespace detail {

inline const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) fail(errc::config_invalid, std::string("missing field '") + key + "'");
    return j.at(key);
}

inline double num(const json& j, const char* key) {
    const json& v = field(j, key);
    if (!v.is_number()) fail(errc::config_invalid, std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

inline double num_or(const json& j, const char* key, double dflt) {
    return j.is_object() && j.contains(key) ? num(j, key) : dflt;
}

template <class F>
auto config_guard(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const error& e) {
        if (e.code() == errc::config_invalid) throw;
        fail(errc::config_invalid, e.what());
    } catch (const json::exception& e) {
        fail(errc::config_invalid, e.what());
    }
}

inline json site_json(const Site& x, int d) {
    json a = json::array();
    for (int i = 0; i < d; ++i) a.push_back(x[i]);
    return a;
}

inline Site site_from(const json& a, int d) {
    if (!a.is_array() || int(a.size()) != d) fail(errc::config_invalid, "site must be an array of length d");
    Site x;
    for (int i = 0; i < d; ++i) {
        if (!a[std::size_t(i)].is_number_integer()) fail(errc::config_invalid, "site coordinates must be integers");
        x[i] = a[std::size_t(i)].get<int>();
    }
    return x;
}

} // namespace detail

inline json to_json(const InterarrivalSpec& s) {
    json j;
    j["family"] = family_name(s.family);
    switch (s.family) {
    case Family::Exponential: j["rate"] = s.p1; break;
    case Family::Pareto:
        j["alpha"] = s.p1;
        j["scale"] = s.p2;
        break;
    case Family::Weibull:
        j["shape"] = s.p1;
        j["scale"] = s.p2;
        break;
    case Family::Uniform:
        j["a"] = s.p1;
        j["b"] = s.p2;
        break;
    case Family::Deterministic: j["period"] = s.p1; break;
    }
    j["delta"] = s.delta;
    return j;
}

inline InterarrivalSpec interarrival_from_json(const json& j) {
    return detail::config_guard([&] {
        const json& f = detail::field(j, "family");
        if (!f.is_string()) fail(errc::config_invalid, "family must be a string");
        const std::string fam = f.get<std::string>();
        InterarrivalSpec s;
        if (fam == "exponential") s = InterarrivalSpec::exponential(detail::num_or(j, "rate", 1.0));
        else if (fam == "pareto") s = InterarrivalSpec::pareto(detail::num(j, "alpha"), detail::num_or(j, "scale", 1.0));
        else if (fam == "weibull") s = InterarrivalSpec::weibull(detail::num(j, "shape"), detail::num_or(j, "scale", 1.0));
        else if (fam == "uniform") s = InterarrivalSpec::uniform(detail::num(j, "a"), detail::num(j, "b"));
        else if (fam == "deterministic") s = InterarrivalSpec::deterministic(detail::num(j, "period"));
        else fail(errc::config_invalid, "unknown family '" + fam + "'");
        double dl = detail::num_or(j, "delta", 1.0);
        if (!(dl > 0)) fail(errc::config_invalid, "delta must be positive");
        s.delta = dl;
        return s;
    });
}

inline json to_json(const StartPolicy& p) {
    switch (p.kind) {
    case StartPolicy::Kind::AtOrigin: return {{"kind", "at_origin"}};
    case StartPolicy::Kind::Delayed: return {{"kind", "delayed"}, {"tau", p.value}};
    case StartPolicy::Kind::Stationary: return {{"kind", "stationary"}};
    case StartPolicy::Kind::BurnIn: return {{"kind", "burn_in"}, {"duration", p.value}};
    }
    return {};
}

inline StartPolicy start_from_json(const json& j) {
    return detail::config_guard([&] {
        if (j.is_string()) return start_from_json(json{{"kind", j}});
        const std::string k = detail::field(j, "kind").get<std::string>();
        if (k == "at_origin") return StartPolicy::at_origin();
        if (k == "delayed") return StartPolicy::delayed(detail::num(j, "tau"));
        if (k == "stationary") return StartPolicy::stationary();
        if (k == "burn_in") return StartPolicy::burn_in(detail::num(j, "duration"));
        fail(errc::config_invalid, "unknown start policy '" + k + "'");
    });
}

inline json to_json(const Window& w) { return json::array({w.t0, w.t1}); }

inline Window window_from_json(const json& j) {
    return detail::config_guard([&] {
        if (!j.is_array() || j.size() != 2) fail(errc::config_invalid, "window must be [t0, t1]");
        double a = j[0].get<double>(), b = j[1].get<double>();
        if (!(std::isfinite(a) && std::isfinite(b) && a < b)) fail(errc::config_invalid, "window needs t0 < t1");
        return Window{a, b};
    });
}

inline json to_json(const SpatialBox& b) {
    return {{"d", b.d}, {"lo", detail::site_json(b.lo, b.d)}, {"hi", detail::site_json(b.hi, b.d)}};
}

// Accepts {"d":2,"lo":[..],"hi":[..]} or {"d":2,"radius":r}.
inline SpatialBox box_from_json(const json& j) {
    return detail::config_guard([&] {
        const json& dj = detail::field(j, "d");
        if (!dj.is_number_integer()) fail(errc::config_invalid, "d must be an integer");
        int d = dj.get<int>();
        if (d < 1 || d > kMaxDim) fail(errc::config_invalid, "d out of range");
        if (j.contains("radius")) {
            int r = detail::field(j, "radius").get<int>();
            if (r < 0) fail(errc::config_invalid, "radius must be >= 0");
            return SpatialBox::centered(d, r);
        }
        Site lo = detail::site_from(detail::field(j, "lo"), d), hi = detail::site_from(detail::field(j, "hi"), d);
        for (int i = 0; i < d; ++i)
            if (lo[i] > hi[i]) fail(errc::config_invalid, "box needs lo <= hi");
        return SpatialBox(d, lo, hi);
    });
}

inline json to_json(const Model& m) {
    if (auto* g = std::get_if<GcpModel>(&m))
        return {{"type", "gcp"}, {"edge", to_json(g->edge)}, {"site", to_json(g->site)},
                {"start", to_json(g->start)}, {"cures", g->cures}};
    if (auto* c = std::get_if<CpdeModel>(&m))
        return {{"type", "cpde"}, {"v", c->v}, {"p", c->p}, {"lambda", c->lambda}, {"lambda_max", c->lambda_max}};
    const auto& e = std::get<ErcpModel>(m);
    return {{"type", "ercp"}, {"mu", to_json(e.mu)}, {"nu", to_json(e.nu)}, {"delta", e.delta},
            {"start", to_json(e.start)}, {"cures", e.cures}};
}

inline Model model_from_json(const json& j) {
    return detail::config_guard([&]() -> Model {
        const std::string t = detail::field(j, "type").get<std::string>();
        auto flag = [&](const char* k, bool dflt) { return j.contains(k) ? j.at(k).get<bool>() : dflt; };
        if (t == "gcp") {
            GcpModel g;
            if (j.contains("edge")) g.edge = interarrival_from_json(j.at("edge"));
            if (j.contains("site")) g.site = interarrival_from_json(j.at("site"));
            if (j.contains("start")) g.start = start_from_json(j.at("start"));
            g.cures = flag("cures", true);
            return g;
        }
        if (t == "cpde") {
            CpdeModel c;
            c.v = detail::num_or(j, "v", c.v);
            c.p = detail::num_or(j, "p", c.p);
            c.lambda = detail::num_or(j, "lambda", c.lambda);
            c.lambda_max = detail::num_or(j, "lambda_max", 0.0);
            if (!(c.v >= 0 && c.p >= 0 && c.p <= 1 && c.lambda >= 0 && c.lambda_max >= 0))
                fail(errc::config_invalid, "bad CPDE parameters");
            return c;
        }
        if (t == "ercp") {
            ErcpModel e;
            if (j.contains("mu")) e.mu = interarrival_from_json(j.at("mu"));
            if (j.contains("nu")) e.nu = interarrival_from_json(j.at("nu"));
            e.delta = detail::num_or(j, "delta", 1.0);
            if (!(e.delta > 0)) fail(errc::config_invalid, "delta must be positive");
            if (j.contains("start")) e.start = start_from_json(j.at("start"));
            e.cures = flag("cures", true);
            return e;
        }
        fail(errc::config_invalid, "unknown model type '" + t + "'");
    });
}

// ---------------------------------------------------------------------------
// Realization dump.
//
// Line 1: {"format":"gcp-realization","version":1,"d":..,"lo":[..],"hi":[..],
//          "window":[t0,t1],"env":bool}
// Then one JSON object per line:
//   {"k":"CURE","x":[..],"t":..}
//   {"k":"TRANS","x":[..],"dir":j,"t":..}      edge from x to x + e_j
//   {"k":"INIT","x":[..],"dir":j,"open":bool}  only when env is true
//   {"k":"OPEN"|"CLOSE","x":[..],"dir":j,"t":..}
// Doubles are written in shortest round-trip form.

inline constexpr int kDumpVersion = 1;

inline void dump_realization(const Realization& real, std::ostream& out) {
    const auto& R = real.region();
    const int d = R.d;
    json h{{"format", "gcp-realization"}, {"version", kDumpVersion}, {"d", d},
           {"lo", detail::site_json(R.lo, d)}, {"hi", detail::site_json(R.hi, d)},
           {"window", to_json(real.window())}, {"env", real.has_env()}};
    out << h.dump() << '\n';
    auto pos = [&](const Site& x) { return detail::site_json(x, d).dump(); };
    for (std::size_t i = 0; i < R.size(); ++i) {
        const auto& tr = real.cure(i);
        if (tr.empty()) continue;
        std::string xs = pos(R.site(i));
        for (double t : tr.times) out << "{\"k\":\"CURE\",\"x\":" << xs << ",\"t\":" << fmt(t) << "}\n";
    }
    R.for_each_edge([&](const Edge& e, std::size_t s) {
        std::string head = "\"x\":" + pos(e.a) + ",\"dir\":" + std::to_string(e.dir);
        for (double t : real.trans(s).times) out << "{\"k\":\"TRANS\"," << head << ",\"t\":" << fmt(t) << "}\n";
        if (!real.has_env()) return;
        const auto& en = real.env(s);
        out << "{\"k\":\"INIT\"," << head << ",\"open\":" << (en.initially_open ? "true" : "false") << "}\n";
        for (double t : en.opens.times) out << "{\"k\":\"OPEN\"," << head << ",\"t\":" << fmt(t) << "}\n";
        for (double t : en.closes.times) out << "{\"k\":\"CLOSE\"," << head << ",\"t\":" << fmt(t) << "}\n";
    });
}

inline std::string dump_realization(const Realization& real) {
    std::ostringstream ss;
    dump_realization(real, ss);
    return ss.str();
}

inline Realization load_realization(std::istream& in) {
    std::string line;
    require(bool(std::getline(in, line)), errc::invalid_argument, "empty realization dump");
    json h;
    try {
        h = json::parse(line);
    } catch (const json::exception& e) {
        fail(errc::invalid_argument, std::string("bad dump header: ") + e.what());
    }
    require(h.value("format", "") == "gcp-realization", errc::invalid_argument, "not a realization dump");
    require(h.value("version", 0) == kDumpVersion, errc::invalid_argument, "unsupported dump version");
    const int d = h.at("d").get<int>();
    SpatialBox R(d, detail::site_from(h.at("lo"), d), detail::site_from(h.at("hi"), d));
    Window w{h.at("window")[0].get<double>(), h.at("window")[1].get<double>()};
    const bool has_env = h.at("env").get<bool>();

    std::vector<std::vector<double>> cure(R.size()), trans(R.edge_slots()), opens, closes;
    std::vector<char> init;
    if (has_env) {
        opens.resize(R.edge_slots());
        closes.resize(R.edge_slots());
        init.assign(R.edge_slots(), 0);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(errc::invalid_argument, "bad dump line " + std::to_string(lineno) + ": " + e.what());
        }
        const std::string k = j.at("k").get<std::string>();
        Site x = detail::site_from(j.at("x"), d);
        if (k == "CURE") {
            require(R.contains(x), errc::invalid_argument, "cure outside region");
            cure[R.index(x)].push_back(j.at("t").get<double>());
            continue;
        }
        Edge e{x, j.at("dir").get<int>()};
        require(e.dir >= 0 && e.dir < d && R.contains(e), errc::invalid_argument, "edge outside region");
        std::size_t s = R.edge_slot(e);
        if (k == "TRANS") trans[s].push_back(j.at("t").get<double>());
        else if (has_env && k == "INIT") init[s] = j.at("open").get<bool>();
        else if (has_env && k == "OPEN") opens[s].push_back(j.at("t").get<double>());
        else if (has_env && k == "CLOSE") closes[s].push_back(j.at("t").get<double>());
        else fail(errc::invalid_argument, "unknown record kind '" + k + "'");
    }
    std::vector<MarkTrain> c, t;
    c.reserve(cure.size());
    t.reserve(trans.size());
    for (auto& v : cure) c.push_back(make_train(std::move(v), w));
    for (auto& v : trans) t.push_back(make_train(std::move(v), w));
    std::optional<std::vector<EdgeEnv>> env;
    if (has_env) {
        env.emplace();
        env->reserve(R.edge_slots());
        for (std::size_t s = 0; s < R.edge_slots(); ++s)
            env->push_back(make_env(init[s], make_train(std::move(opens[s]), w), make_train(std::move(closes[s]), w), w));
    }
    return Realization(R, w, std::move(c), std::move(t), std::move(env));
}

inline Realization load_realization(const std::string& text) {
    std::istringstream ss(text);
    return load_realization(ss);
}

} // namespace io
} // namespace gcp
