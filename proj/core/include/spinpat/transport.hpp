#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinpat/netlist.hpp"
#include "spinpat/transport_params.hpp"
#include "spinpat/vec3.hpp"

namespace spinpat {

struct SpinCurrent {
    double charge{0.0};  // A
    Vec3 spin{};  // A

    SpinCurrent& operator+=(const SpinCurrent& o) {
        charge += o.charge;
        spin += o.spin;
        return *this;
    }
};

double spin_diffusion_length(const ChannelParams& channel);

// Current flowing from the magnet into the channel node across a driven interface.
// `applied_voltage` is the drop V_magnet - V_node.
SpinCurrent interface_currents(const Vec3& m, const Vec3& node_spin_accumulation,
                               double applied_voltage, const InterfaceParams& iface);

// Same for a floating (unsupplied) contact: the magnet potential adjusts so no charge flows.
SpinCurrent floating_interface_currents(const Vec3& m, const Vec3& node_spin_accumulation,
                                        const InterfaceParams& iface);

double effective_conductivity(const SizeEffectParams& size, const ChannelParams& channel,
                              double bulk_conductivity);

inline constexpr int kGround = -1;

struct TransportEdge {
    int a{0};
    int b{0};  // kGround for the ground reservoir
    double conductance{0.0};
};

struct TransportContact {
    std::string interface_id;
    int magnet{0};
    int node{0};
    ContactKind kind{ContactKind::Sense};
    InterfaceParams params{};
    int supply{-1};
};

struct TransportNetwork {
    std::vector<std::string> node_names;
    std::vector<int> node_component;
    std::vector<double> spin_shunt;  // relaxation conductance to zero accumulation, per node
    std::vector<TransportEdge> edges;
    std::vector<TransportContact> contacts;
    std::vector<std::string> magnet_ids;
    std::vector<std::string> supply_ids;
    std::map<std::string, int> channel_segments;
    int component_count{0};

    std::size_t node_count() const { return node_names.size(); }
    int node_index(const std::string& name) const;
};

// Discretizes every channel and ground lead into ceil(L/dx) segments.
TransportNetwork build_network(const Netlist& netlist, const ChannelParams& material, double dx,
                               const InterfaceParams& default_interface = {});

struct SteadyState {
    std::vector<double> potential;  // per node
    std::vector<Vec3> accumulation;  // per node
    std::vector<SpinCurrent> contact_currents;  // per contact, magnet -> node
    std::vector<SpinCurrent> magnet_currents;  // per magnet, summed over its contacts
    std::vector<double> supply_currents;  // per supply terminal
};

// Direct sparse solve over every node. `states` is indexed like network.magnet_ids and
// `supply_voltages` like network.supply_ids.
SteadyState solve_steady_state_full(const TransportNetwork& network,
                                    const std::vector<Vec3>& states,
                                    const std::vector<double>& supply_voltages);

std::map<std::string, SpinCurrent> solve_steady_state(const TransportNetwork& network,
                                                      const std::vector<Vec3>& states,
                                                      const std::vector<double>& supply_voltages);

// Net charge current into a node from edges and contacts.
double node_charge_imbalance(const TransportNetwork& network, const SteadyState& state, int node);

// Reduces each connected component to its contact nodes once, then solves small dense
// systems per call. Agrees with solve_steady_state_full to round-off.
class PortSolver {
public:
    explicit PortSolver(const TransportNetwork& network);

    // Fills contact_currents (one per network contact).
    void solve(const std::vector<Vec3>& states, const std::vector<double>& supply_voltages,
               std::vector<SpinCurrent>& contact_currents);

    // Eliminates ports whose magnets stay fixed from every later system. Afterwards solve()
    // reports currents only for contacts of magnets that are not held.
    void hold(const std::vector<char>& held, const std::vector<Vec3>& states);

    const TransportNetwork& network() const { return *network_; }

private:
    struct Component {
        std::vector<int> ports;  // network node indices
        std::vector<int> charge_ports;  // indices into ports
        std::vector<int> contacts;
        std::vector<int> contact_port;  // per entry of contacts
        std::vector<int> contact_charge;  // charge-port slot or -1
        Eigen::MatrixXd charge_y;
        Eigen::MatrixXd spin_y;
        std::vector<int> supplies;  // supply indices driving this component
        int size{0};
        std::vector<double> system;  // row-major size x size
        std::vector<double> rhs;

        // Held-port elimination: full unknown index -> reduced index (-1 when eliminated).
        bool reduced{false};
        std::vector<int> slot;
        std::vector<char> contact_held;
        std::vector<double> base;  // reduced constant matrix, row-major
        Eigen::MatrixXd coupling;  // Y_fh * inverse(A_hh)
        std::vector<int> held_unknowns;
        std::vector<double> held_rhs_volts;  // voltages the cached shift was built for
        std::vector<double> shift;  // coupling * b_h
    };

    void refresh_shift(Component& comp, const std::vector<Vec3>& states, const std::vector<double>& volts);

    const TransportNetwork* network_;
    std::vector<Component> components_;
    std::vector<Vec3> held_states_;
};

}  // namespace spinpat
