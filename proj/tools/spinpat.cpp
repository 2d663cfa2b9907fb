#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "spinpat/config.hpp"
#include "spinpat/errors.hpp"
#include "spinpat/experiments.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kAssertion = 1;
constexpr int kUsage = 2;

int thread_budget() {
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("SPINPAT_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap >= 1) threads = std::min(threads, cap);
        } catch (const std::exception&) {
            fmt::print(stderr, "ignoring SPINPAT_THREADS='{}'\n", env);
        }
    }
    return threads;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("spinpat"));
    CLI::App app{"All-spin-logic pattern detector simulator"};
    std::string experiment;
    std::string config_path = "config/default.json";
    std::uint64_t seed = 0;
    std::string out_dir;
    std::vector<std::string> sets;
    int max_p = 0;
    bool list = false;

    std::string names;
    for (const auto& n : spinpat::experiment_names()) names += (names.empty() ? "" : ", ") + n;
    app.add_option("experiment", experiment, "One of: " + names);
    app.add_option("--config", config_path, "Parameter file")->capture_default_str();
    app.add_option("--seed", seed, "Master seed")->capture_default_str();
    app.add_option("--out", out_dir, "Output directory (default out/<experiment>)");
    app.add_option("--set", sets, "Override as dot.path=value, repeatable");
    app.add_option("--max-p", max_p, "prop1: largest odd P to enumerate")->check(CLI::PositiveNumber);
    app.add_flag("--list", list, "List experiments and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kPass : kUsage;
    }
    if (list) {
        for (const auto& n : spinpat::experiment_names()) fmt::print("{}\n", n);
        return kPass;
    }
    if (experiment.empty()) {
        fmt::print(stderr, "missing experiment name; one of: {}\n", names);
        return kUsage;
    }

    spinpat::RunContext ctx;
    try {
        std::vector<spinpat::Override> overrides;
        for (const auto& s : sets) overrides.push_back(spinpat::parse_override(s));
        ctx.config = spinpat::load_config(config_path, overrides);
        if (max_p > 0) ctx.config.experiments.prop1_max_p = max_p;
    } catch (const std::exception& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kUsage;
    }
    ctx.seed = seed;
    ctx.threads = thread_budget();
    if (out_dir.empty()) out_dir = "out/" + experiment;

    spinpat::ExperimentOutput output;
    try {
        output = spinpat::run_experiment(experiment, ctx);
        spinpat::write_outputs(output, out_dir);
    } catch (const spinpat::Error& e) {
        fmt::print(stderr, "{}\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kUsage;
    }

    for (const auto& c : output.checks) {
        fmt::print("{} {}{}{}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail.empty() ? "" : ": ", c.detail);
    }
    fmt::print("wrote {} files to {}\n", output.files.size() + 1, out_dir);
    return output.passed() ? kPass : kAssertion;
}
