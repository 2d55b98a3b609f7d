// Command line front end over the experiment harness.

#include <CLI11.hpp>

#include <iostream>

#include "gcp/harness.hpp"

using namespace gcp;
using gcp::harness::ExperimentConfig;

namespace {

enum Exit { ok = 0, config_error = 2, runtime_error = 3, violation = 4 };

json default_config(const std::string& cmd, const std::string& model) {
    if (cmd == "simulate") {
        json m{{"type", model}};
        if (model == "cpde") m = {{"type", "cpde"}, {"v", 1.0}, {"p", 0.5}, {"lambda", 2.0}};
        if (model == "ercp") m = {{"type", "ercp"}, {"delta", 1.0}};
        return {{"kind", "gcp-extinction"}, {"model", m}, {"region", {{"d", 1}, {"radius", 10}}},
                {"window", {0.0, 50.0}}, {"replicas", 100}};
    }
    if (cmd == "growth")
        return {{"kind", "growth"},
                {"model", {{"type", "ercp"}}},
                {"region", {{"d", 1}, {"radius", 2000}}},
                {"replicas", 200},
                {"params", {{"t_min", 10.0}, {"t_max", 1e5}, {"per_decade", 5}}}};
    if (cmd == "crossing")
        return {{"kind", "crossing"},
                {"model", {{"type", "gcp"}}},
                {"replicas", 100},
                {"params", {{"box", {{"space", {{"d", 1}, {"radius", 2}}}, {"s", 0.0}, {"t", 6.0}}}}}};
    if (cmd == "cascade-verify")
        return {{"kind", "cascade-verify"},
                {"model", {{"type", "gcp"}, {"edge", {{"family", "exponential"}, {"rate", 2.0}}}}},
                {"scales", {{"d", 1}, {"l0", 1}, {"h0", 1.0}, {"alpha", 4}, {"beta", 6}}},
                {"replicas", 100},
                {"params", {{"k", 2}}}};
    if (cmd == "hierarchy")
        return {{"kind", "hierarchy"}, {"scales", {{"d", 1}}}, {"replicas", 10}, {"params", {{"n", 1}, {"sample_depth", 2}}}};
    if (cmd == "un-estimate")
        return {{"kind", "un-estimate"},
                {"model", {{"type", "gcp"}}},
                {"scales", {{"d", 1}, {"l0", 1}, {"h0", 1.0}}},
                {"replicas", 1000},
                {"params", {{"n_min", 0}, {"n_max", 2}}}};
    if (cmd == "renewal-check")
        return {{"kind", "renewal-check"},
                {"replicas", 10000},
                {"params", {{"spec", {{"family", "pareto"}, {"alpha", 0.5}, {"scale", 1.0}, {"delta", 1.0}}}}}};
    if (cmd == "bad-events")
        return {{"kind", "bad-events"},
                {"model", {{"type", "ercp"}, {"delta", 4.0}}},
                {"replicas", 10000},
                {"params", {{"n_min", 4}, {"n_max", 10}, {"beta", 0.09}, {"eps4", 0.3}, {"eta", 0.55}}}};
    if (cmd == "iterperc")
        return {{"kind", "iterperc"}, {"replicas", 100}, {"params", {{"p", 0.3}, {"d", 2}, {"steps", 100}}}};
    return {};
}

// Kinds a subcommand accepts from a config file.
bool kind_allowed(const std::string& cmd, const std::string& kind) {
    if (cmd == "simulate") return kind == "gcp-extinction" || kind == "lambda-sweep" || kind == "block-field";
    return kind == cmd;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contact-process experiments on space-time graphical constructions"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    std::size_t replicas = 0;
    unsigned threads = 1;
    bool dump = false;
    app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "master seed");
    auto* rep_opt = app.add_option("--replicas", replicas, "number of replicas")->check(CLI::PositiveNumber);
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    auto* out_opt = app.add_option("--out", out_dir, "output directory");

    std::string model = "gcp";
    auto* sim = app.add_subcommand("simulate", "run replicas of a model and record extinction times");
    sim->add_option("model", model, "gcp | cpde | ercp")->check(CLI::IsMember({"gcp", "cpde", "ercp"}))->required();
    sim->add_flag("--dump", dump, "also write replica 0 as a JSONL realization dump");
    for (const char* name : {"growth", "crossing", "cascade-verify", "hierarchy", "un-estimate", "renewal-check",
                             "bad-events", "iterperc"})
        app.add_subcommand(name);
    app.get_subcommand("growth")->description("ERCP growth r_t and its log-log exponent");
    app.get_subcommand("crossing")->description("crossing reports for one space-time box, JSONL per replica");
    app.get_subcommand("cascade-verify")->description("cascade half-crossings down to scale 0 and verify");
    app.get_subcommand("hierarchy")->description("catalogue dump and sampled hierarchies");
    app.get_subcommand("un-estimate")->description("u_n table with the recurrence bound");
    app.get_subcommand("renewal-check")->description("renewal conditions and w0/h0 for an interarrival law");
    app.get_subcommand("bad-events")->description("U_n, V_n, W_n estimates over n");
    app.get_subcommand("iterperc")->description("iterated percolation radii R_n");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        json j;
        if (!config_path.empty()) {
            try {
                j = json::parse(io::read_file(config_path));
            } catch (const json::exception& e) {
                fail(errc::config_invalid, std::string("config is not valid JSON: ") + e.what());
            } catch (const error& e) {
                fail(errc::config_invalid, e.what());
            }
            if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string() ||
                !kind_allowed(cmd, j["kind"].get<std::string>()))
                fail(errc::config_invalid, "config kind does not match subcommand '" + cmd + "'");
            if (cmd == "simulate" && j.contains("model") && j["model"].value("type", "") != model)
                fail(errc::config_invalid, "config model type differs from '" + model + "'");
        } else {
            j = default_config(cmd, model);
        }
        if (*seed_opt) j["seed"] = seed;
        if (*rep_opt) j["replicas"] = replicas;
        j["threads"] = threads;
        if (*out_opt) j["out"] = out_dir;
        else if (!j.contains("out")) j["out"] = "out/" + cmd;
        ExperimentConfig cfg = harness::config_from_json(j);

        auto man = harness::run_experiment(cfg);
        if (dump && cmd == "simulate" && cfg.model && cfg.region && cfg.window) {
            auto real = build_realization(*cfg.model, *cfg.region, *cfg.window, cfg.seed, 0);
            io::write_atomic(std::filesystem::path(cfg.out_dir) / "realization_0.jsonl", io::dump_realization(real));
        }
        std::cout << man.to_json().dump(2) << "\n";
        if (man.violations > 0) {
            std::cerr << cmd << ": " << man.violations << " replicas violate the verified property\n";
            return violation;
        }
        return ok;
    } catch (const error& e) {
        std::cerr << e.what() << "\n";
        return e.code() == errc::config_invalid ? config_error : runtime_error;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return runtime_error;
    }
}
