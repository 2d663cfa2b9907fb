// Acceptance run: one PASS/FAIL line per criterion 1-12.
//
//   acceptance [--report FILE] [--xfail N]... [--only N]...
//
// A criterion listed with --xfail still prints FAIL; it just does not fail the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spinpat/circuit.hpp"
#include "spinpat/config.hpp"
#include "spinpat/experiments.hpp"
#include "spinpat/magnetodynamics.hpp"
#include "spinpat/rng.hpp"
#include "spinpat/transport.hpp"

using namespace spinpat;

namespace {

struct Verdict {
    bool passed{false};
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int thread_count() {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("SPINPAT_THREADS")) n = std::clamp(std::atoi(env), 1, n);
    return n;
}

std::string fmt_s(double s) {
    std::ostringstream o;
    o.precision(3);
    o << s << " s";
    return o.str();
}

// Folds a set of experiment checks into one verdict.
Verdict from_checks(const ExperimentOutput& out, const std::function<bool(const Check&)>& select) {
    Verdict v{true, ""};
    int n = 0;
    for (const auto& c : out.checks) {
        if (!select(c)) continue;
        ++n;
        v.passed = v.passed && c.passed;
        v.detail += (v.detail.empty() ? "" : "; ") + (c.passed ? std::string() : "FAILED ") + c.name +
                    (c.detail.empty() ? "" : " (" + c.detail + ")");
    }
    if (n == 0) return {false, "no checks selected from " + out.experiment};
    return v;
}

bool mentions(const Check& c, const std::string& word) { return c.name.find(word) != std::string::npos; }
bool is_budget(const Check& c) { return mentions(c, "power") || mentions(c, "area"); }

Verdict thermal_statistics(const DeviceParams& d) {
    const double eb = barrier_energy(d.magnet_material, d.magnet_geometry);
    const double expected = std::sqrt(d.constants.boltzmann * d.temperature / eb);
    Rng rng(2024);
    const int draws = 10000;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) {
        const Vec3 m = sample_initial_tilt(i % 2 ? 1 : -1, d.theta0(), rng);
        const double angle = std::acos(std::min(1.0, std::abs(m.x)));
        sum += angle * angle;
    }
    const double rms = std::sqrt(sum / draws);
    const double rel = std::abs(rms - expected) / expected;
    std::ostringstream o;
    o << "RMS " << rms << " rad vs sqrt(kT/Eb) = " << expected << " rad, " << 100.0 * rel << "% off";
    return {rel <= 0.10, o.str()};
}

Verdict transport(const DeviceParams& d) {
    std::ostringstream o;
    bool ok = true;

    const double lambda = spin_diffusion_length(d.channel_material());
    const bool lambda_ok = std::abs(lambda - 391.3e-9) <= 1e-9;
    ok = ok && lambda_ok;
    o << "lambda_s = " << lambda * 1e9 << " nm";

    // Charge conservation on random star-and-chain networks.
    Rng rng(77);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        Netlist n;
        const int hubs = 1 + static_cast<int>(rng.uniform() * 3);
        const int inputs = 1 + static_cast<int>(rng.uniform() * 4);
        for (int h = 0; h < hubs; ++h) {
            const std::string id = "o" + std::to_string(h);
            n.magnets.push_back({id, MagnetRole::Output, {}, {}});
            n.interfaces.push_back({id + ".sns", id, "h" + std::to_string(h), ContactKind::Sense, {}});
            if (h > 0)
                n.channels.push_back(make_channel("c" + std::to_string(h), "h" + std::to_string(h - 1),
                                                  "h" + std::to_string(h), 40e-9 + 300e-9 * rng.uniform(), d));
        }
        for (int k = 0; k < inputs; ++k) {
            const std::string id = "i" + std::to_string(k);
            n.magnets.push_back({id, MagnetRole::Input, {}, {}});
            n.interfaces.push_back({id + ".drv", id, id + ".d", ContactKind::Drive, {}});
            n.supplies.push_back(make_supply(id + ".v", id + ".drv", rng.uniform() < 0.5 ? -1 : 1, d));
            n.channels.push_back(make_channel("ch" + std::to_string(k), id + ".d",
                                              "h" + std::to_string(static_cast<int>(rng.uniform() * hubs)),
                                              40e-9 + 300e-9 * rng.uniform(), d));
        }
        const auto net = build_network(n, d.channel_material(), 5e-9 + 20e-9 * rng.uniform(), d.interface);
        std::vector<Vec3> states;
        for (std::size_t i = 0; i < net.magnet_ids.size(); ++i)
            states.push_back(normalized({rng.normal(), rng.normal(), rng.normal()}));
        std::vector<double> volts;
        for (std::size_t s = 0; s < net.supply_ids.size(); ++s) volts.push_back(10e-3 * (rng.uniform() - 0.5));
        const auto st = solve_steady_state_full(net, states, volts);
        double total = 0.0;
        for (double i : st.supply_currents) total += std::abs(i);
        for (std::size_t node = 0; node < net.node_count(); ++node) {
            worst = std::max(worst, std::abs(node_charge_imbalance(net, st, static_cast<int>(node))) / total);
        }
    }
    ok = ok && worst <= 1e-9;
    o << "; worst charge imbalance " << worst;

    // Two-magnet link against the sinh profile between its end accumulations.
    const double length = 400e-9;
    Netlist n;
    n.magnets.push_back({"a", MagnetRole::Input, {}, {}});
    n.magnets.push_back({"b", MagnetRole::Output, {}, {}});
    n.interfaces.push_back({"a.drv", "a", "na", ContactKind::Drive, {}});
    n.interfaces.push_back({"b.sns", "b", "nb", ContactKind::Sense, {}});
    n.supplies.push_back(make_supply("a.v", "a.drv", -1, d));
    n.channels.push_back(make_channel("ch", "na", "nb", length, d));
    const auto net = build_network(n, d.channel_material(), 2.5e-9, d.interface);
    const auto st = solve_steady_state_full(net, {{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}}, {-d.supply_voltage});
    const double mu0 = st.accumulation[net.node_index("na")].x;
    const double mul = st.accumulation[net.node_index("nb")].x;
    const int segments = net.channel_segments.at("ch");
    double profile = 0.0;
    for (int k = 1; k < segments; ++k) {
        const double x = length * k / segments;
        const double closed =
            (mu0 * std::sinh((length - x) / lambda) + mul * std::sinh(x / lambda)) / std::sinh(length / lambda);
        const double got = st.accumulation[net.node_index("ch#" + std::to_string(k))].x;
        profile = std::max(profile, std::abs(got - closed) / std::max(std::abs(mu0), std::abs(mul)));
    }
    ok = ok && profile <= 0.05;
    o << "; 1D profile max deviation " << 100.0 * profile << "%";

    // With no contact at the far end the accumulation there falls to 1/cosh(L/lambda).
    Netlist open = n;
    open.magnets.pop_back();
    open.interfaces.pop_back();
    const auto open_net = build_network(open, d.channel_material(), 2.5e-9, d.interface);
    const auto open_st = solve_steady_state_full(open_net, {{1.0, 0.0, 0.0}}, {-d.supply_voltage});
    const double ratio =
        open_st.accumulation[open_net.node_index("nb")].x / open_st.accumulation[open_net.node_index("na")].x;
    const double closed_ratio = 1.0 / std::cosh(length / lambda);
    const double attenuation = std::abs(ratio - closed_ratio) / closed_ratio;
    ok = ok && attenuation <= 0.05;
    o << "; open-end attenuation " << ratio << " vs 1/cosh(L/lambda) = " << closed_ratio;
    return {ok, o.str()};
}

Verdict determinism(const Config& base, int threads) {
    const auto root = std::filesystem::temp_directory_path() / "spinpat_acceptance_determinism";
    std::filesystem::remove_all(root);
    std::ostringstream o;
    bool ok = true;
    for (const auto& name : experiment_names()) {
        RunContext ctx;
        ctx.config = base;
        ctx.seed = 12;
        // Seed counts trimmed on the slow runners; the code paths are unchanged.
        ctx.config.experiments.compare_seeds = 3;
        ctx.config.experiments.detect_seeds = 2;
        ctx.config.experiments.calibration_seeds = 6;
        std::map<std::string, std::string> bytes[2];
        for (int run = 0; run < 2; ++run) {
            ctx.threads = run == 0 ? 1 : std::max(2, threads);
            const auto dir = root / name / std::to_string(run);
            write_outputs(run_experiment(name, ctx), dir);
            for (const auto& e : std::filesystem::directory_iterator(dir)) {
                std::ifstream in(e.path(), std::ios::binary);
                std::ostringstream s;
                s << in.rdbuf();
                bytes[run][e.path().filename().string()] = s.str();
            }
        }
        const bool same = bytes[0] == bytes[1];
        ok = ok && same;
        o << (o.tellp() > 0 ? ", " : "") << name << (same ? " identical" : " DIFFERS") << " (" << bytes[0].size()
          << " files)";
    }
    std::filesystem::remove_all(root);
    return {ok, o.str()};
}

}  // namespace

int main(int argc, char** argv) {
    std::filesystem::path report_path;
    std::set<int> xfail;
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if ((arg == "--report" || arg == "--xfail" || arg == "--only") && i + 1 < argc) {
            const std::string value = argv[++i];
            if (arg == "--report") report_path = value;
            else (arg == "--xfail" ? xfail : only).insert(std::atoi(value.c_str()));
        } else {
            std::cerr << "usage: acceptance [--report FILE] [--xfail N]... [--only N]...\n";
            return 2;
        }
    }

    Config config;
    try {
        config = load_config(std::filesystem::path(SPINPAT_SOURCE_DIR) / "config" / "default.json");
    } catch (const std::exception& e) {
        std::cerr << "cannot load parameters: " << e.what() << "\n";
        return 2;
    }
    const int threads = thread_count();
    const DeviceParams& d = config.device;

    std::map<std::string, ExperimentOutput> runs;
    std::map<std::string, double> runtime;
    auto run = [&](const std::string& name) -> const ExperimentOutput& {
        if (!runs.count(name)) {
            RunContext ctx{config, 0, threads};
            const auto t0 = Clock::now();
            runs[name] = run_experiment(name, ctx);
            runtime[name] = seconds_since(t0);
        }
        return runs.at(name);
    };

    std::map<int, Verdict> verdicts;
    auto guarded = [&](int id, const std::function<Verdict()>& fn) {
        if (only.size() && !only.count(id)) return;
        try {
            verdicts[id] = fn();
        } catch (const std::exception& e) {
            verdicts[id] = {false, std::string("error: ") + e.what()};
        }
    };

    guarded(1, [&] {
        auto v = from_checks(run("prop1"), [](const Check&) { return true; });
        v.passed = v.passed && runtime["prop1"] < 1.0;
        v.detail += ", " + fmt_s(runtime["prop1"]);
        return v;
    });
    guarded(2, [&] {
        auto v = from_checks(run("fanin-study"), [](const Check& c) { return mentions(c, "steady-state"); });
        v.passed = v.passed && runtime["fanin-study"] < 300.0;
        v.detail += ", fan-in study " + fmt_s(runtime["fanin-study"]);
        return v;
    });
    guarded(3, [&] { return from_checks(run("xnor-table"), [](const Check& c) { return !is_budget(c); }); });
    guarded(4, [&] { return from_checks(run("comparator-equivalence"), [](const Check&) { return true; }); });
    guarded(5, [&] {
        auto v = from_checks(run("fanin-study"), [](const Check& c) {
            return mentions(c, "ordering") || mentions(c, "IQR");
        });
        v.passed = v.passed && runtime["fanin-study"] < 900.0;
        return v;
    });
    guarded(6, [&] { return from_checks(run("voltage-sweep"), [](const Check&) { return true; }); });
    guarded(7, [&] { return from_checks(run("compare3x3"), [](const Check& c) { return !is_budget(c); }); });
    guarded(8, [&] { return from_checks(run("train-detect9x9"), [](const Check& c) { return !is_budget(c); }); });
    guarded(9, [&] { return thermal_statistics(d); });
    guarded(10, [&] { return transport(d); });
    guarded(11, [&] {
        Verdict v{true, ""};
        for (const char* name : {"xnor-table", "fanin-study", "compare3x3", "train-detect9x9"}) {
            const auto part = from_checks(run(name), is_budget);
            v.passed = v.passed && part.passed;
            v.detail += (v.detail.empty() ? "" : "; ") + part.detail;
        }
        return v;
    });
    guarded(12, [&] { return determinism(config, threads); });

    static const std::map<int, std::string> titles{
        {1, "compare/majority identity, exhaustive"},  {2, "majority steady-state oracle"},
        {3, "XNOR truth table"},                        {4, "architecture equivalence"},
        {5, "strength ordering"},                       {6, "voltage sweep"},
        {7, "3x3 example"},                             {8, "9x9 example"},
        {9, "thermal statistics"},                      {10, "transport"},
        {11, "power/area calibration"},                 {12, "determinism"}};

    std::ostringstream out;
    int unexpected = 0;
    for (const auto& [id, v] : verdicts) {
        out << (v.passed ? "PASS" : "FAIL") << " criterion " << id << " " << titles.at(id) << ": " << v.detail;
        if (!v.passed && xfail.count(id)) out << " [expected failure]";
        out << "\n";
        if (!v.passed && !xfail.count(id)) ++unexpected;
    }
    std::cout << out.str();
    if (!report_path.empty()) {
        std::ofstream f(report_path);
        f << out.str();
    }
    return unexpected == 0 ? 0 : 1;
}
