#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spinpat/magnetodynamics.hpp"
#include "spinpat/netlist.hpp"
#include "spinpat/trace.hpp"
#include "spinpat/transport.hpp"

namespace spinpat {

// Everything a device-level simulation consumes besides the netlist itself.
struct DeviceParams {
    PhysicalConstants constants{};
    MagnetGeometry magnet_geometry{};
    MagnetMaterial magnet_material{};
    ChannelParams channel{};
    InterfaceParams interface{};
    SizeEffectParams size_effects{};
    bool apply_size_effects{false};

    double temperature{300.0};
    double tau0{100e-12};
    double supply_voltage{5e-3};
    double breakdown_cap{20e-3};
    int fan_in_cap{5};
    double dt{0.1e-12};
    double dt_max{0.1e-12};
    double sample_interval{1e-12};
    double settle_threshold{0.9};
    // Tilt used for noise-free runs, where an exactly collinear state feels no torque.
    double initial_tilt{0.05};

    double ground_length{100e-9};
    // Length of the short interconnects inside XNOR cells and decision stages.
    double local_channel_length{50e-9};
    // Weak bias link into the carry magnet so (1, 1) is not slowed by the opposing bias.
    double bias_channel_length{200e-9};
    // Channels from XNOR outputs into the pixel majority; longer than the local links so an
    // output is not pinned by the accumulation its neighbours leave at the shared node.
    double stage_channel_length{100e-9};

    ChannelParams channel_material() const;
    double theta0() const;
    double critical_current() const;
};

struct SupplySchedule {
    // Breakpoints (time, voltage) per supply terminal; the voltage before the first one is 0.
    std::map<std::string, std::vector<std::pair<double, double>>> terminals;

    double voltage(const std::string& id, double t) const;
    void validate(double breakdown_cap) const;

    // Each terminal switches to sign * magnitude at the start time of its phase.
    static SupplySchedule phased(const Netlist& netlist, double magnitude,
                                 const std::vector<double>& phase_starts = {0.0});
    static SupplySchedule off(const Netlist& netlist);
};

struct SimulationOptions {
    double t_end{2e-9};
    double dt{0.1e-12};
    double sample_interval{1e-12};
    double temperature{0.0};
    std::uint64_t seed{0};
    // Stored-data magnets are held by their write path while the logic evaluates.
    bool hold_inputs{true};
    // Magnets to record; empty records all.
    std::vector<std::string> record;
    double settle_threshold{0.9};
};

using InitialStates = std::map<std::string, Vec3>;

// Builds starting magnetizations from logic bits: held inputs sit exactly on the easy axis,
// other magnets get a thermal tilt (T > 0) or the deterministic noise-free tilt.
InitialStates make_initial_states(const Netlist& netlist, const std::map<std::string, int>& bits,
                                  const DeviceParams& device, const SimulationOptions& options);

SimulationTrace simulate(const Netlist& netlist, const SupplySchedule& schedule,
                         const InitialStates& initial, const DeviceParams& device,
                         const SimulationOptions& options);

enum class Logic { Zero, One, Undecided };

Logic steady_logic_value(const SimulationTrace& trace, const std::string& magnet_id,
                         double window, double threshold = 0.9);

struct CalibrationTable {
    int fan_in{0};
    double supply{0.0};
    double temperature{0.0};
    double window{0.0};
    std::map<int, double> median_delay;  // aligned-input count -> median delay (s)
};

struct StrengthClass {
    bool switched{false};
    int aligned{0};
};

StrengthClass classify_majority_strength(const SimulationTrace& trace, const std::string& output_id,
                                         const CalibrationTable& table);
StrengthClass classify_delay(std::optional<double> delay, const CalibrationTable& table);

struct PowerReport {
    double total{0.0};
    std::map<std::string, double> per_terminal;
    std::map<std::string, double> per_gate;  // keyed by the sense-side magnet each network feeds
};

// DC dissipation sum(V*I) with every terminal at its final scheduled voltage.
PowerReport measure_power(const Netlist& netlist, const SupplySchedule& schedule,
                          const DeviceParams& device, const InitialStates& states = {});

// Magnet footprints plus channel footprints; ground leads are vertical and excluded.
double estimate_area(const Netlist& netlist, const DeviceParams& device);

// Channel with the device cross-section, and a supply whose ground lead uses the device defaults.
ChannelSpec make_channel(const std::string& id, const std::string& from, const std::string& to,
                         double length, const DeviceParams& device);
SupplySpec make_supply(const std::string& id, const std::string& iface, int sign, const DeviceParams& device,
                       int phase = 0);

struct MajorityOptions {
    int sign{-1};
    double channel_length{0.0};  // 0 selects the default channel length
    bool transient_readout{true};
};

Netlist build_majority_gate(int fan_in, const DeviceParams& device, const MajorityOptions& options = {});

// Full adder used as XNOR on dual-rail data: A, B and their complements Abar, Bbar, bias C
// stored 0 with Cbar stored 1. K holds the carry, S holds the inverted sum = XNOR(A, B).
Netlist build_xnor_cell(const DeviceParams& device);

// Logic oracle of a netlist built by build_majority_gate.
int majority(const std::vector<int>& bits);

}  // namespace spinpat
