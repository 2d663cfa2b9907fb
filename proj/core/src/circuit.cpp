#include "spinpat/circuit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "spinpat/errors.hpp"

namespace spinpat {

ChannelParams DeviceParams::channel_material() const {
    ChannelParams c = channel;
    if (apply_size_effects) c.conductivity = effective_conductivity(size_effects, channel, channel.conductivity);
    return c;
}

double DeviceParams::theta0() const {
    return thermal_cone_angle(
        make_thermal_environment(magnet_material, magnet_geometry, temperature, constants));
}

double DeviceParams::critical_current() const {
    return critical_spin_current(magnet_material, magnet_geometry, constants);
}

double SupplySchedule::voltage(const std::string& id, double t) const {
    const auto it = terminals.find(id);
    if (it == terminals.end()) return 0.0;
    double v = 0.0;
    for (const auto& [time, value] : it->second) {
        if (time <= t) v = value;
        else break;
    }
    return v;
}

void SupplySchedule::validate(double breakdown_cap) const {
    for (const auto& [id, points] : terminals) {
        double last = -1.0;
        for (const auto& [time, value] : points) {
            if (!std::isfinite(time) || !std::isfinite(value)) {
                throw Error(ErrorKind::InvalidInput, "non-finite schedule entry on '" + id + "'");
            }
            if (time < last) throw Error(ErrorKind::InvalidInput, "schedule times must not decrease on '" + id + "'");
            if (std::abs(value) > breakdown_cap * (1.0 + 1e-12)) {
                throw Error(ErrorKind::InvalidParameter, "supply on '" + id + "' exceeds the breakdown cap");
            }
            last = time;
        }
    }
}

SupplySchedule SupplySchedule::phased(const Netlist& netlist, double magnitude,
                                      const std::vector<double>& phase_starts) {
    SupplySchedule s;
    for (const auto& sup : netlist.supplies) {
        if (sup.phase >= static_cast<int>(phase_starts.size())) {
            throw Error(ErrorKind::InvalidInput, "no start time for phase " + std::to_string(sup.phase));
        }
        s.terminals[sup.id] = {{phase_starts[sup.phase], sup.sign * magnitude}};
    }
    return s;
}

SupplySchedule SupplySchedule::off(const Netlist& netlist) {
    SupplySchedule s;
    for (const auto& sup : netlist.supplies) s.terminals[sup.id] = {{0.0, 0.0}};
    return s;
}

namespace {

constexpr double kGoldenAngle = 2.399963229728653;
constexpr std::uint64_t kTiltStream = 1ULL << 40;

MagnetModel model_for(const MagnetSpec& spec, const DeviceParams& device) {
    return MagnetModel(spec.material.value_or(device.magnet_material),
                       spec.geometry.value_or(device.magnet_geometry), device.constants);
}

}  // namespace

InitialStates make_initial_states(const Netlist& netlist, const std::map<std::string, int>& bits,
                                  const DeviceParams& device, const SimulationOptions& options) {
    InitialStates out;
    for (std::size_t i = 0; i < netlist.magnets.size(); ++i) {
        const auto& spec = netlist.magnets[i];
        const auto it = bits.find(spec.id);
        if (it == bits.end()) throw Error(ErrorKind::InvalidInput, "no initial bit for magnet '" + spec.id + "'");
        const int sign = it->second ? 1 : -1;
        if (options.hold_inputs && spec.role == MagnetRole::Input) {
            out[spec.id] = {static_cast<double>(sign), 0.0, 0.0};
        } else if (options.temperature > 0.0) {
            const auto& mat = spec.material.value_or(device.magnet_material);
            const auto& geo = spec.geometry.value_or(device.magnet_geometry);
            const double theta0 = thermal_cone_angle(
                make_thermal_environment(mat, geo, options.temperature, device.constants));
            Rng rng(options.seed, kTiltStream + i);
            out[spec.id] = sample_initial_tilt(sign, theta0, rng);
        } else {
            out[spec.id] = tilted_state(sign, device.initial_tilt, kGoldenAngle * static_cast<double>(i + 1));
        }
    }
    return out;
}

SimulationTrace simulate(const Netlist& netlist, const SupplySchedule& schedule,
                         const InitialStates& initial, const DeviceParams& device,
                         const SimulationOptions& options) {
    const auto wall_start = std::chrono::steady_clock::now();
    if (!(options.t_end > 0.0)) throw Error(ErrorKind::InvalidParameter, "t_end must be positive");
    if (!(options.dt > 0.0) || options.dt > device.dt_max * (1.0 + 1e-12)) {
        throw Error(ErrorKind::InvalidParameter, "dt must lie in (0, dt_max]");
    }
    schedule.validate(device.breakdown_cap);

    const TransportNetwork network =
        build_network(netlist, device.channel_material(), device.channel.dx, device.interface);
    PortSolver solver(network);

    const std::size_t n = netlist.magnets.size();
    std::vector<MagnetModel> models;
    std::vector<char> held(n, 0);
    std::vector<Vec3> m(n);
    std::vector<double> sigma(n, 0.0);
    std::vector<Rng> rngs;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& spec = netlist.magnets[i];
        models.push_back(model_for(spec, device));
        held[i] = options.hold_inputs && spec.role == MagnetRole::Input;
        const auto it = initial.find(spec.id);
        if (it == initial.end()) throw Error(ErrorKind::InvalidInput, "no initial state for magnet '" + spec.id + "'");
        if (!is_finite(it->second) || !(norm(it->second) > 0.0)) {
            throw Error(ErrorKind::InvalidInput, "invalid initial state for magnet '" + spec.id + "'");
        }
        m[i] = normalized(it->second);
        sigma[i] = models[i].thermal_sigma(options.temperature, options.dt);
        rngs.emplace_back(options.seed, i);
    }
    if (std::find(held.begin(), held.end(), 1) != held.end()) solver.hold(held, m);

    std::vector<std::size_t> rec;
    SimulationTrace trace;
    trace.seed = options.seed;
    if (options.record.empty()) {
        for (std::size_t i = 0; i < n; ++i) rec.push_back(i);
    } else {
        for (const auto& id : options.record) rec.push_back(netlist.magnet_index(id));
    }
    for (std::size_t i : rec) trace.magnet_ids.push_back(netlist.magnets[i].id);
    trace.series.resize(rec.size());

    const long steps = std::lround(options.t_end / options.dt);
    const long stride = std::max(1L, std::lround(options.sample_interval / options.dt));
    trace.sample_period = stride * options.dt;
    auto record = [&](double t) {
        trace.times.push_back(t);
        for (std::size_t k = 0; k < rec.size(); ++k) trace.series[k].push_back(m[rec[k]]);
    };
    record(0.0);

    std::vector<double> breakpoints;
    for (const auto& [id, pts] : schedule.terminals)
        for (const auto& p : pts) breakpoints.push_back(p.first);
    std::sort(breakpoints.begin(), breakpoints.end());
    std::size_t next_bp = 0;
    std::vector<double> volts(network.supply_ids.size(), 0.0);
    bool driven = false;
    auto refresh_voltages = [&](double t) {
        driven = false;
        for (std::size_t s = 0; s < volts.size(); ++s) {
            volts[s] = schedule.voltage(network.supply_ids[s], t);
            driven = driven || volts[s] != 0.0;
        }
    };
    refresh_voltages(0.0);

    std::vector<SpinCurrent> contact;
    std::vector<Vec3> is0(n), is1(n), field(n), f0(n), mp(n);
    auto currents = [&](const std::vector<Vec3>& state, std::vector<Vec3>& out) {
        std::fill(out.begin(), out.end(), Vec3{});
        if (!driven) return;
        solver.solve(state, volts, contact);
        for (std::size_t k = 0; k < contact.size(); ++k) out[network.contacts[k].magnet] += contact[k].spin;
    };

    const double dt = options.dt;
    for (long s = 0; s < steps; ++s) {
        const double t = s * dt;
        bool changed = false;
        while (next_bp < breakpoints.size() && breakpoints[next_bp] <= t + 1e-18) {
            ++next_bp;
            changed = true;
        }
        if (changed) refresh_voltages(t);

        for (std::size_t i = 0; i < n; ++i) {
            if (held[i] || sigma[i] == 0.0) {
                field[i] = {};
                continue;
            }
            field[i] = {sigma[i] * rngs[i].normal(), sigma[i] * rngs[i].normal(), sigma[i] * rngs[i].normal()};
        }
        currents(m, is0);
        for (std::size_t i = 0; i < n; ++i) {
            if (held[i]) {
                mp[i] = m[i];
                continue;
            }
            f0[i] = models[i].rhs(m[i], field[i], is0[i]);
            mp[i] = normalized(m[i] + f0[i] * dt);
        }
        currents(mp, is1);
        for (std::size_t i = 0; i < n; ++i) {
            if (held[i]) continue;
            const Vec3 f1 = models[i].rhs(mp[i], field[i], is1[i]);
            m[i] = normalized(m[i] + (f0[i] + f1) * (0.5 * dt));
        }
        if ((s + 1) % stride == 0) record((s + 1) * dt);
    }

    for (const auto& id : trace.magnet_ids) {
        if (const auto t = detect_switching(trace, id, options.settle_threshold)) {
            const int sign = trace.series_of(id).back().x > 0.0 ? 1 : -1;
            trace.events.push_back({id, *t, sign});
        }
    }
    trace.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return trace;
}

Logic steady_logic_value(const SimulationTrace& trace, const std::string& magnet_id, double window,
                         double threshold) {
    const auto& series = trace.series_of(magnet_id);
    if (trace.empty()) throw Error(ErrorKind::InvalidInput, "empty trace");
    const double t_end = trace.times.back();
    if (!(window >= 0.0) || window > t_end - trace.times.front() + 1e-18) {
        throw Error(ErrorKind::InvalidParameter, "window exceeds the trace");
    }
    double sum = 0.0;
    int count = 0;
    for (std::size_t k = 0; k < trace.times.size(); ++k) {
        if (trace.times[k] >= t_end - window - 1e-18) {
            sum += series[k].x;
            ++count;
        }
    }
    const double mean = sum / count;
    if (mean >= threshold) return Logic::One;
    if (mean <= -threshold) return Logic::Zero;
    return Logic::Undecided;
}

StrengthClass classify_delay(std::optional<double> delay, const CalibrationTable& table) {
    if (table.median_delay.empty()) throw Error(ErrorKind::CalibrationRequired, "empty calibration table");
    if (!delay) return {false, 0};
    int best = 0;
    double best_gap = 0.0;
    for (const auto& [aligned, median] : table.median_delay) {
        const double gap = std::abs(*delay - median);
        if (best == 0 || gap < best_gap) {
            best = aligned;
            best_gap = gap;
        }
    }
    return {true, best};
}

StrengthClass classify_majority_strength(const SimulationTrace& trace, const std::string& output_id,
                                         const CalibrationTable& table) {
    if (table.median_delay.empty()) throw Error(ErrorKind::CalibrationRequired, "empty calibration table");
    std::optional<double> delay;
    for (const auto& e : trace.events) {
        if (e.magnet_id == output_id && (table.window <= 0.0 || e.time <= table.window)) {
            delay = e.time;
            break;
        }
    }
    trace.index_of(output_id);
    return classify_delay(delay, table);
}

PowerReport measure_power(const Netlist& netlist, const SupplySchedule& schedule,
                          const DeviceParams& device, const InitialStates& states) {
    PowerReport report;
    if (netlist.supplies.empty()) return report;
    const TransportNetwork network =
        build_network(netlist, device.channel_material(), device.channel.dx, device.interface);
    double t_final = 0.0;
    for (const auto& [id, pts] : schedule.terminals)
        for (const auto& p : pts) t_final = std::max(t_final, p.first);
    std::vector<double> volts;
    for (const auto& id : network.supply_ids) volts.push_back(schedule.voltage(id, t_final));
    std::vector<Vec3> m;
    for (const auto& spec : netlist.magnets) {
        const auto it = states.find(spec.id);
        m.push_back(it == states.end() ? Vec3{1.0, 0.0, 0.0} : normalized(it->second));
    }
    const SteadyState ss = solve_steady_state_full(network, m, volts);

    std::map<int, std::string> gate_of_component;
    for (const auto& c : network.contacts) {
        if (c.kind == ContactKind::Sense) {
            gate_of_component.emplace(network.node_component[c.node], network.magnet_ids[c.magnet]);
        }
    }
    for (const auto& c : network.contacts) {
        if (c.supply < 0) continue;
        const double p = volts[c.supply] * ss.supply_currents[c.supply];
        report.total += p;
        report.per_terminal[network.supply_ids[c.supply]] += p;
        const auto it = gate_of_component.find(network.node_component[c.node]);
        report.per_gate[it == gate_of_component.end() ? network.magnet_ids[c.magnet] : it->second] += p;
    }
    return report;
}

double estimate_area(const Netlist& netlist, const DeviceParams& device) {
    double area = 0.0;
    for (const auto& m : netlist.magnets) area += m.geometry.value_or(device.magnet_geometry).footprint();
    for (const auto& c : netlist.channels) area += c.length * c.width;
    return area;
}

ChannelSpec make_channel(const std::string& id, const std::string& from, const std::string& to,
                         double length, const DeviceParams& device) {
    return {id, from, to, length, device.channel.width, device.channel.thickness};
}

SupplySpec make_supply(const std::string& id, const std::string& iface, int sign, const DeviceParams& device,
                       int phase) {
    return {id, iface, sign, phase, device.ground_length, device.channel.width, device.channel.thickness};
}

Netlist build_majority_gate(int fan_in, const DeviceParams& device, const MajorityOptions& options) {
    if (fan_in < 1 || fan_in % 2 == 0) {
        throw Error(ErrorKind::InvalidFanIn, "fan-in must be odd and positive, got " + std::to_string(fan_in));
    }
    if (fan_in > device.fan_in_cap && options.transient_readout) {
        throw Error(ErrorKind::FanInCap, "fan-in " + std::to_string(fan_in) + " exceeds the cap");
    }
    const double length = options.channel_length > 0.0 ? options.channel_length : device.channel.length;
    Netlist n;
    for (int k = 0; k < fan_in; ++k) {
        const std::string id = "in" + std::to_string(k);
        n.magnets.push_back({id, MagnetRole::Input, {}, {}});
        n.interfaces.push_back({id + ".drv", id, id + ".d", ContactKind::Drive, {}});
        n.supplies.push_back(make_supply(id + ".v", id + ".drv", options.sign, device));
        n.channels.push_back(make_channel("ch" + std::to_string(k), id + ".d", "out.s", length, device));
        n.pins[id] = id;
    }
    n.magnets.push_back({"out", MagnetRole::Output, {}, {}});
    n.interfaces.push_back({"out.sns", "out", "out.s", ContactKind::Sense, {}});
    n.pins["out"] = "out";
    n.validate();
    return n;
}

Netlist build_xnor_cell(const DeviceParams& device) {
    const double l = device.local_channel_length;
    Netlist n;
    // Carry network copies MAJ(A, B, C) onto K. Sum network copies MAJ(!A, !B, !C, K, K) onto S,
    // which is XNOR(A, B) while C stores 0. Every supply copies, so no network mixes polarities.
    for (const char* id : {"A", "B", "C"}) {
        const std::string s = id;
        const std::string bar = s + "bar";
        n.magnets.push_back({s, MagnetRole::Input, {}, {}});
        n.magnets.push_back({bar, MagnetRole::Input, {}, {}});
        const double lk = s == "C" ? device.bias_channel_length : l;
        n.interfaces.push_back({s + ".drv", s, s + ".d", ContactKind::Drive, {}});
        n.supplies.push_back(make_supply(s + ".v", s + ".drv", -1, device));
        n.channels.push_back(make_channel(s + "K", s + ".d", "K.s", lk, device));
        n.interfaces.push_back({bar + ".drv", bar, bar + ".d", ContactKind::Drive, {}});
        n.supplies.push_back(make_supply(bar + ".v", bar + ".drv", -1, device));
        n.channels.push_back(make_channel(bar + "S", bar + ".d", "S.s", l, device));
    }
    n.magnets.push_back({"K", MagnetRole::Internal, {}, {}});
    n.magnets.push_back({"S", MagnetRole::Output, {}, {}});
    n.interfaces.push_back({"K.sns", "K", "K.s", ContactKind::Sense, {}});
    for (const char* k : {"1", "2"}) {
        const std::string s = k;
        n.interfaces.push_back({"K.drv" + s, "K", "K.d" + s, ContactKind::Drive, {}});
        n.supplies.push_back(make_supply("K.v" + s, "K.drv" + s, -1, device));
        n.channels.push_back(make_channel("K" + s + "S", "K.d" + s, "S.s", l, device));
    }
    n.interfaces.push_back({"S.sns", "S", "S.s", ContactKind::Sense, {}});
    n.pins = {{"a", "A"},         {"a_bar", "Abar"}, {"b", "B"},     {"b_bar", "Bbar"},
              {"bias", "C"},      {"bias_bar", "Cbar"}, {"carry", "K"}, {"out", "S"}};
    n.validate();
    return n;
}

int majority(const std::vector<int>& bits) {
    const auto ones = std::count_if(bits.begin(), bits.end(), [](int b) { return b != 0; });
    return 2 * ones > static_cast<long>(bits.size()) ? 1 : 0;
}

}  // namespace spinpat
