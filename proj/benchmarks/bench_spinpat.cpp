#include <benchmark/benchmark.h>

#include <filesystem>

#include "spinpat/circuit.hpp"
#include "spinpat/config.hpp"
#include "spinpat/detector.hpp"
#include "spinpat/recognition.hpp"
#include "spinpat/transport.hpp"

using namespace spinpat;

namespace {

const DeviceParams& device() {
    static const Config c = load_config(std::filesystem::path(SPINPAT_SOURCE_DIR) / "config" / "default.json");
    return c.device;
}

std::vector<Vec3> majority_states(const TransportNetwork& net) {
    std::vector<Vec3> states;
    for (const auto& id : net.magnet_ids) states.push_back(id == "out" ? Vec3{0.0, 1.0, 0.0} : Vec3{1.0, 0.0, 0.0});
    return states;
}

}  // namespace

static void BM_LlgStep(benchmark::State& state) {
    const MagnetModel model(device().magnet_material, device().magnet_geometry, device().constants);
    Vec3 m = normalized({1.0, 0.05, 0.01});
    for (auto _ : state) {
        m = llg_step(m, model, {1e-6, 2e-6, 0.0}, 0.1e-12);
        benchmark::DoNotOptimize(m);
    }
}
BENCHMARK(BM_LlgStep);

static void BM_SteadyStateFull(benchmark::State& state) {
    const Netlist n = build_majority_gate(static_cast<int>(state.range(0)), device());
    const auto net = build_network(n, device().channel_material(), device().channel.dx, device().interface);
    const auto states = majority_states(net);
    const std::vector<double> volts(net.supply_ids.size(), -5e-3);
    for (auto _ : state) benchmark::DoNotOptimize(solve_steady_state_full(net, states, volts));
    state.counters["nodes"] = static_cast<double>(net.node_count());
}
BENCHMARK(BM_SteadyStateFull)->Arg(3)->Arg(5);

static void BM_PortSolver(benchmark::State& state) {
    const Netlist n = build_majority_gate(static_cast<int>(state.range(0)), device());
    const auto net = build_network(n, device().channel_material(), device().channel.dx, device().interface);
    const auto states = majority_states(net);
    const std::vector<double> volts(net.supply_ids.size(), -5e-3);
    PortSolver solver(net);
    std::vector<SpinCurrent> currents;
    for (auto _ : state) {
        solver.solve(states, volts, currents);
        benchmark::DoNotOptimize(currents.data());
    }
}
BENCHMARK(BM_PortSolver)->Arg(3)->Arg(5);

static void BM_MajoritySimulation(benchmark::State& state) {
    const Netlist n = build_majority_gate(3, device());
    const auto schedule = SupplySchedule::phased(n, device().supply_voltage);
    SimulationOptions o;
    o.t_end = 1e-9;
    o.temperature = 300.0;
    o.record = {"out"};
    const auto init = make_initial_states(n, {{"in0", 1}, {"in1", 1}, {"in2", 1}, {"out", 0}}, device(), o);
    for (auto _ : state) benchmark::DoNotOptimize(simulate(n, schedule, init, device(), o));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(o.t_end / o.dt));
}
BENCHMARK(BM_MajoritySimulation)->Unit(benchmark::kMillisecond);

static void BM_DetectorCell(benchmark::State& state) {
    DetectorConfig cfg;
    cfg.training_count = static_cast<int>(state.range(0));
    const TrainingSet training(static_cast<std::size_t>(cfg.training_count), BinaryImage(3, 3, 1));
    const auto cell = learn(build_smart_detector_cell(cfg, device()), training);
    CalibrationTable table;
    table.median_delay = {{2, 1.3e-9}, {3, 1.1e-9}};
    DetectOptions o;
    o.t_end = 0.5e-9;
    o.record = cell.rows;
    for (auto _ : state) benchmark::DoNotOptimize(detect_cell(cell, BinaryImage(3, 3, 1), device(), table, o));
    state.counters["magnets"] = static_cast<double>(cell.netlist.magnets.size());
}
BENCHMARK(BM_DetectorCell)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_Prop1(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(prop1_check(7));
}
BENCHMARK(BM_Prop1);

BENCHMARK_MAIN();
