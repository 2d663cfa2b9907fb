#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "spinpat/circuit.hpp"
#include "spinpat/errors.hpp"
#include "spinpat/experiments.hpp"
#include "support.hpp"

using namespace spinpat;

namespace {

const DeviceParams& device() { return testing::default_config().device; }

SimulationOptions quiet(double t_end, double temperature = 0.0, std::uint64_t seed = 0) {
    SimulationOptions o;
    o.t_end = t_end;
    o.temperature = temperature;
    o.seed = seed;
    return o;
}

SimulationTrace run_majority(const std::vector<int>& inputs, int out_initial, double t_end, double temperature = 0.0,
                             std::uint64_t seed = 0) {
    const Netlist net = build_majority_gate(static_cast<int>(inputs.size()), device());
    std::map<std::string, int> bits{{"out", out_initial}};
    for (std::size_t k = 0; k < inputs.size(); ++k) bits["in" + std::to_string(k)] = inputs[k];
    const auto o = quiet(t_end, temperature, seed);
    return simulate(net, SupplySchedule::phased(net, device().supply_voltage),
                    make_initial_states(net, bits, device(), o), device(), o);
}

int bit(Logic v) { return v == Logic::One ? 1 : v == Logic::Zero ? 0 : -1; }

}  // namespace

TEST_CASE("majority gate structure") {
    for (int n : {1, 3, 5}) {
        const Netlist net = build_majority_gate(n, device());
        CHECK(net.magnets.size() == static_cast<std::size_t>(n + 1));
        CHECK(net.supplies.size() == static_cast<std::size_t>(n));
        CHECK(net.channels.size() == static_cast<std::size_t>(n));
        CHECK(net.pin("out") == "out");
        CHECK_NOTHROW(net.validate());
    }
    CHECK_THROWS_AS(build_majority_gate(4, device()), Error);
    CHECK_THROWS_AS(build_majority_gate(0, device()), Error);
    CHECK_THROWS_AS(build_majority_gate(7, device()), Error);
    MajorityOptions steady;
    steady.transient_readout = false;
    CHECK(build_majority_gate(7, device(), steady).magnets.size() == 8);
}

TEST_CASE("XNOR cell structure") {
    const Netlist cell = build_xnor_cell(device());
    CHECK(cell.magnets.size() == 8);
    for (const char* pin : {"a", "a_bar", "b", "b_bar", "bias", "bias_bar", "carry", "out"}) {
        CHECK_NOTHROW(cell.pin(pin));
    }
    for (const auto& s : cell.supplies) CHECK(s.sign == -1);
}

TEST_CASE("majority oracle") {
    CHECK(majority({1, 1, 0}) == 1);
    CHECK(majority({0, 1, 0}) == 0);
    CHECK(majority({1, 0, 1, 0, 1}) == 1);
    CHECK(majority({1, 1, 0, 0}) == 0);
    CHECK(majority({1}) == 1);
}

TEST_CASE("state is retained with the supplies off") {
    for (int initial : {0, 1}) {
        const Netlist net = build_majority_gate(3, device());
        const std::map<std::string, int> bits{{"in0", 1 - initial}, {"in1", 1 - initial}, {"in2", 1 - initial},
                                              {"out", initial}};
        auto o = quiet(2e-9);
        o.hold_inputs = false;
        const auto init = make_initial_states(net, bits, device(), o);
        const auto tr = simulate(net, SupplySchedule::off(net), init, device(), o);
        CHECK(bit(steady_logic_value(tr, "out", 0.1e-9)) == initial);
        CHECK(tr.events.empty());
        for (const auto& id : {"in0", "in1", "in2"}) CHECK(bit(steady_logic_value(tr, id, 0.1e-9)) == 1 - initial);
    }
    const Netlist net = build_majority_gate(3, device());
    const InitialStates exact{{"in0", {1, 0, 0}}, {"in1", {-1, 0, 0}}, {"in2", {1, 0, 0}}, {"out", {-1, 0, 0}}};
    const auto tr = simulate(net, SupplySchedule::off(net), exact, device(), quiet(0.5e-9));
    for (std::size_t m = 0; m < tr.magnet_ids.size(); ++m) {
        CHECK(tr.series[m].back() == exact.at(tr.magnet_ids[m]));
    }
}

TEST_CASE("noise-free majority evaluates every input pattern") {
    for (int n : {3, 5}) {
        for (int pattern = 0; pattern < (1 << n); ++pattern) {
            std::vector<int> in;
            for (int k = 0; k < n; ++k) in.push_back((pattern >> k) & 1);
            const int expected = majority(in);
            const auto tr = run_majority(in, 1 - expected, 3e-9);
            CAPTURE(n);
            CAPTURE(pattern);
            CHECK(bit(steady_logic_value(tr, "out", 0.1e-9)) == expected);
        }
    }
}

TEST_CASE("XNOR truth table") {
    const Netlist cell = build_xnor_cell(device());
    const auto schedule = SupplySchedule::phased(cell, device().supply_voltage);
    for (int a : {0, 1}) {
        for (int b : {0, 1}) {
            const std::map<std::string, int> bits{{"A", a}, {"Abar", 1 - a}, {"B", b}, {"Bbar", 1 - b},
                                                  {"C", 0}, {"Cbar", 1},     {"K", 0}, {"S", 1 - (a == b)}};
            const auto o = quiet(3e-9);
            const auto tr = simulate(cell, schedule, make_initial_states(cell, bits, device(), o), device(), o);
            CAPTURE(a);
            CAPTURE(b);
            CHECK(bit(steady_logic_value(tr, "S", 0.1e-9)) == (a == b ? 1 : 0));
            CHECK(bit(steady_logic_value(tr, "K", 0.1e-9)) == (a & b));
        }
    }
}

TEST_CASE("steady logic value") {
    SimulationTrace tr;
    tr.magnet_ids = {"m"};
    tr.series.resize(1);
    for (int k = 0; k <= 10; ++k) {
        tr.times.push_back(k * 1e-12);
        tr.series[0].push_back({k < 8 ? -1.0 : 0.95, 0.0, 0.0});
    }
    CHECK(steady_logic_value(tr, "m", 2e-12) == Logic::One);
    CHECK(steady_logic_value(tr, "m", 10e-12) == Logic::Undecided);
    CHECK(steady_logic_value(tr, "m", 10e-12, 0.4) == Logic::Zero);
    CHECK_THROWS_AS(steady_logic_value(tr, "m", 20e-12), Error);
    CHECK_THROWS_AS(steady_logic_value(tr, "x", 1e-12), Error);
}

TEST_CASE("delay classification") {
    CalibrationTable t;
    CHECK_THROWS_AS(classify_delay(1e-10, t), Error);
    t.median_delay = {{2, 600e-12}, {3, 220e-12}, {4, 150e-12}};
    CHECK_FALSE(classify_delay(std::nullopt, t).switched);
    CHECK(classify_delay(650e-12, t).aligned == 2);
    CHECK(classify_delay(200e-12, t).aligned == 3);
    CHECK(classify_delay(10e-12, t).aligned == 4);
    CHECK(classify_delay(220e-12, t).switched);
}

TEST_CASE("power and area") {
    const Netlist empty;
    CHECK(estimate_area(empty, device()) == 0.0);
    CHECK(measure_power(empty, {}, device()).total == 0.0);

    const Netlist maj = build_majority_gate(3, device());
    CHECK(measure_power(maj, SupplySchedule::off(maj), device()).total == 0.0);
    const auto report = measure_power(maj, SupplySchedule::phased(maj, device().supply_voltage), device());
    CHECK(report.total > 1e-6);
    CHECK(report.total < 1e-4);
    CHECK(report.per_terminal.size() == 3);
    CHECK(report.per_gate.size() == 1);
    CHECK(report.per_gate.begin()->first == "out");
    // Ohmic: doubling the supply quadruples the dissipation.
    const auto doubled = measure_power(maj, SupplySchedule::phased(maj, 2.0 * device().supply_voltage), device());
    CHECK(doubled.total == doctest::Approx(4.0 * report.total).epsilon(1e-9));

    const double expected_area = 4.0 * device().magnet_geometry.footprint() + 3.0 * device().channel.length * device().channel.width;
    CHECK(estimate_area(maj, device()) == doctest::Approx(expected_area));
    CHECK(estimate_area(maj, device()) < 0.2e-12);
}

TEST_CASE("supply schedule") {
    const Netlist maj = build_majority_gate(3, device());
    const auto s = SupplySchedule::phased(maj, 5e-3, {1e-9});
    CHECK(s.voltage("in0.v", 0.5e-9) == 0.0);
    CHECK(s.voltage("in0.v", 1.5e-9) == doctest::Approx(-5e-3));
    CHECK_NOTHROW(s.validate(20e-3));
    CHECK_THROWS_AS(SupplySchedule::phased(maj, 25e-3).validate(20e-3), Error);
}

TEST_CASE("simulation is reproducible per seed") {
    const auto a = run_majority({1, 1, 0}, 0, 1e-9, 300.0, 7);
    const auto b = run_majority({1, 1, 0}, 0, 1e-9, 300.0, 7);
    const auto c = run_majority({1, 1, 0}, 0, 1e-9, 300.0, 8);
    REQUIRE(a.series.size() == b.series.size());
    CHECK(a.series == b.series);
    CHECK(a.series != c.series);
}

TEST_CASE("delay falls as more inputs align") {
    const auto three = majority_delays(5, 3, device().supply_voltage, 300.0, 50, 11, 3e-9, device());
    const auto five = majority_delays(5, 5, device().supply_voltage, 300.0, 50, 11, 3e-9, device());
    const auto s3 = delay_stats(three);
    const auto s5 = delay_stats(five);
    REQUIRE(s3.median);
    REQUIRE(s5.median);
    CHECK(*s5.median < *s3.median);
    CHECK(s5.switched == 50);
    CHECK(majority_overdrive(5, 5, 5e-3, device()) > majority_overdrive(5, 3, 5e-3, device()));
    CHECK(majority_overdrive(5, 3, 10e-3, device()) == doctest::Approx(2.0 * majority_overdrive(5, 3, 5e-3, device())));
}

TEST_CASE("netlist JSON round trip") {
    for (const Netlist& n : {build_majority_gate(5, device()), build_xnor_cell(device())}) {
        const auto j = to_json(n);
        const Netlist back = netlist_from_json(j);
        CHECK(to_json(back) == j);
        CHECK(back.magnets.size() == n.magnets.size());
        CHECK_NOTHROW(back.validate());
    }
    auto j = to_json(build_majority_gate(3, device()));
    j["interfaces"][0]["magnet"] = "ghost";
    CHECK_THROWS_AS(netlist_from_json(j).validate(), Error);
}

TEST_CASE("trace CSV") {
    const auto tr = run_majority({1, 1, 1}, 0, 0.05e-9);
    std::ostringstream out;
    tr.write_csv(out);
    const std::string csv = out.str();
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header.rfind("time_s,", 0) == 0);
    CHECK(header.find("out_mx,out_my,out_mz") != std::string::npos);
    const auto rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == static_cast<long>(tr.times.size()) + 1);
}
