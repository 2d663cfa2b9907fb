#include "spinpat/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Sparse>
#include <spdlog/spdlog.h>

#include "spinpat/errors.hpp"

namespace spinpat {

void ChannelParams::validate() const {
    if (!(length > 0.0) || !(width > 0.0) || !(thickness > 0.0) || !(dx > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "channel dimensions must be positive");
    }
    if (!(conductivity > 0.0) || !(diffusion > 0.0) || !(spin_relaxation > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "channel transport parameters must be positive");
    }
}

void InterfaceParams::validate() const {
    if (!(g_down > 0.0) || !(g_up > g_down)) {
        throw Error(ErrorKind::InvalidParameter, "interface conductances need G_up > G_down > 0");
    }
    if (!(re_mix >= 0.0)) throw Error(ErrorKind::InvalidParameter, "Re G_mix must be >= 0");
}

void SizeEffectParams::validate() const {
    if (specularity < 0.0 || specularity > 1.0 || reflectivity < 0.0 || reflectivity >= 1.0) {
        throw Error(ErrorKind::InvalidParameter, "specularity and reflectivity must lie in [0,1)");
    }
    if (!(grain_size > 0.0) || !(mean_free_path >= 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "grain size must be positive");
    }
}

double spin_diffusion_length(const ChannelParams& channel) {
    if (channel.diffusion < 0.0 || channel.spin_relaxation < 0.0) {
        throw Error(ErrorKind::InvalidParameter, "D and tau_s must be non-negative");
    }
    return std::sqrt(channel.diffusion * channel.spin_relaxation);
}

namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 outer(const Vec3& m) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = m[i] * m[j];
    return r;
}

Mat3 cross_matrix(const Vec3& m) {
    Mat3 r;
    r << 0.0, -m.z, m.y, m.z, 0.0, -m.x, -m.y, m.x, 0.0;
    return r;
}

// Spin block of the interface conductance; `longitudinal` scales the collinear part.
Mat3 spin_block(const Vec3& m, const InterfaceParams& p, double longitudinal) {
    const Mat3 mm = outer(m);
    return longitudinal * mm + p.re_mix * (Mat3::Identity() - mm) + p.im_mix * cross_matrix(m);
}

Vec3 apply(const Mat3& a, const Vec3& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
            a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
            a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

SpinCurrent contact_current(const TransportContact& c, const Vec3& m, double node_v,
                            const Vec3& node_vs, const std::vector<double>& supply_voltages) {
    if (c.kind == ContactKind::Sense) return floating_interface_currents(m, node_vs, c.params);
    return interface_currents(m, node_vs, supply_voltages[c.supply] - node_v, c.params);
}

int segment_count(double length, double dx, const std::string& id) {
    if (dx > length) {
        spdlog::warn("grid spacing exceeds length of '{}'; using a single segment", id);
        return 1;
    }
    return std::max(1, static_cast<int>(std::ceil(length / dx - 1e-9)));
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

SpinCurrent interface_currents(const Vec3& m, const Vec3& node_spin_accumulation,
                               double applied_voltage, const InterfaceParams& iface) {
    const double g = iface.total();
    const double pg = iface.polarization() * g;
    SpinCurrent out;
    out.charge = g * applied_voltage - pg * dot(m, node_spin_accumulation);
    out.spin = m * (pg * applied_voltage) - apply(spin_block(m, iface, g), node_spin_accumulation);
    return out;
}

SpinCurrent floating_interface_currents(const Vec3& m, const Vec3& node_spin_accumulation,
                                        const InterfaceParams& iface) {
    const double p = iface.polarization();
    SpinCurrent out;
    out.spin = -apply(spin_block(m, iface, iface.total() * (1.0 - p * p)), node_spin_accumulation);
    return out;
}

double effective_conductivity(const SizeEffectParams& size, const ChannelParams& channel,
                              double bulk_conductivity) {
    size.validate();
    const double lambda = size.mean_free_path;
    // Grain-boundary scattering.
    double grain = 1.0;
    if (size.reflectivity > 0.0 && lambda > 0.0) {
        const double a = lambda / size.grain_size * size.reflectivity / (1.0 - size.reflectivity);
        grain = 1.0 - 1.5 * a + 3.0 * a * a - 3.0 * a * a * a * std::log1p(1.0 / a);
    }
    // Diffuse sidewall scattering, large-dimension limit for a rectangular wire.
    const double surface =
        0.375 * (1.0 - size.specularity) * lambda * (1.0 / channel.width + 1.0 / channel.thickness);
    return bulk_conductivity / (1.0 / grain + surface);
}

int TransportNetwork::node_index(const std::string& name) const {
    const auto it = std::find(node_names.begin(), node_names.end(), name);
    if (it == node_names.end()) throw Error(ErrorKind::Lookup, "unknown node '" + name + "'");
    return static_cast<int>(it - node_names.begin());
}

TransportNetwork build_network(const Netlist& netlist, const ChannelParams& material, double dx,
                               const InterfaceParams& default_interface) {
    netlist.validate();
    if (!(dx > 0.0)) throw Error(ErrorKind::InvalidParameter, "grid spacing must be positive");
    const double lambda = spin_diffusion_length(material);
    if (!(lambda > 0.0)) throw Error(ErrorKind::InvalidParameter, "spin relaxation must be positive");

    TransportNetwork net;
    std::map<std::string, int> index;
    auto node_of = [&](const std::string& name) {
        const auto it = index.find(name);
        if (it != index.end()) return it->second;
        const int id = static_cast<int>(net.node_names.size());
        index.emplace(name, id);
        net.node_names.push_back(name);
        net.spin_shunt.push_back(0.0);
        return id;
    };

    auto add_line = [&](const std::string& id, int from, int to, double length, double width,
                        double thickness) {
        const int n = segment_count(length, dx, id);
        const double h = length / n;
        const double area = width * thickness;
        const double g = material.conductivity * area / h;
        const double shunt = material.conductivity * area * h / (2.0 * lambda * lambda);
        int prev = from;
        for (int k = 1; k <= n; ++k) {
            const int next = (k == n) ? to : node_of(id + "#" + std::to_string(k));
            net.edges.push_back({prev, next, g});
            net.spin_shunt[prev] += shunt;
            if (next != kGround) net.spin_shunt[next] += shunt;
            prev = next;
        }
        return n;
    };

    for (const auto& ch : netlist.channels) {
        const int a = node_of(ch.from);
        const int b = node_of(ch.to);
        net.channel_segments[ch.id] = add_line(ch.id, a, b, ch.length, ch.width, ch.thickness);
    }

    for (const auto& m : netlist.magnets) net.magnet_ids.push_back(m.id);

    std::map<std::string, int> supply_of;
    for (std::size_t s = 0; s < netlist.supplies.size(); ++s) {
        supply_of[netlist.supplies[s].interface] = static_cast<int>(s);
        net.supply_ids.push_back(netlist.supplies[s].id);
    }

    for (const auto& iface : netlist.interfaces) {
        if (!index.count(iface.node) && !supply_of.count(iface.id)) {
            throw Error(ErrorKind::Topology, "interface '" + iface.id + "' attaches to node '" +
                                                 iface.node + "' which has no channel");
        }
        TransportContact c;
        c.interface_id = iface.id;
        c.magnet = static_cast<int>(netlist.magnet_index(iface.magnet));
        c.node = node_of(iface.node);
        c.kind = iface.kind;
        c.params = iface.params.value_or(default_interface);
        c.params.validate();
        const auto it = supply_of.find(iface.id);
        if (iface.kind == ContactKind::Drive) {
            if (it == supply_of.end()) {
                throw Error(ErrorKind::Topology, "drive interface '" + iface.id + "' has no supply");
            }
            c.supply = it->second;
        } else if (it != supply_of.end()) {
            throw Error(ErrorKind::Topology, "supply on sense interface '" + iface.id + "'");
        }
        net.contacts.push_back(c);
    }

    for (const auto& s : netlist.supplies) {
        const auto& iface = *std::find_if(netlist.interfaces.begin(), netlist.interfaces.end(),
                                          [&](const InterfaceSpec& i) { return i.id == s.interface; });
        add_line(s.id + ".gnd", index.at(iface.node), kGround, s.ground_length, s.ground_width,
                 s.ground_thickness);
    }

    UnionFind uf(net.node_names.size());
    for (const auto& e : net.edges)
        if (e.b != kGround) uf.unite(e.a, e.b);
    std::map<int, int> comp;
    net.node_component.resize(net.node_names.size());
    for (std::size_t i = 0; i < net.node_names.size(); ++i) {
        const int root = uf.find(static_cast<int>(i));
        const auto [it, inserted] = comp.emplace(root, static_cast<int>(comp.size()));
        net.node_component[i] = it->second;
    }
    net.component_count = static_cast<int>(comp.size());
    return net;
}

SteadyState solve_steady_state_full(const TransportNetwork& net, const std::vector<Vec3>& states,
                                    const std::vector<double>& supply_voltages) {
    if (states.size() != net.magnet_ids.size()) {
        throw Error(ErrorKind::InvalidInput, "one magnetization per magnet is required");
    }
    if (supply_voltages.size() != net.supply_ids.size()) {
        throw Error(ErrorKind::InvalidInput, "one voltage per supply terminal is required");
    }
    for (double v : supply_voltages)
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "non-finite supply voltage");

    const int n = static_cast<int>(net.node_count());
    std::vector<char> grounded(net.component_count, 0);
    for (const auto& e : net.edges)
        if (e.b == kGround) grounded[net.node_component[e.a]] = 1;
    for (const auto& c : net.contacts) {
        if (c.kind == ContactKind::Drive && !grounded[net.node_component[c.node]]) {
            throw Error(ErrorKind::Topology, "supplied component has no ground reference");
        }
    }

    std::vector<Eigen::Triplet<double>> t;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(4 * n);
    auto add_edge = [&](int a, int b, double g, int k) {
        t.emplace_back(4 * a + k, 4 * a + k, g);
        if (b != kGround) {
            t.emplace_back(4 * b + k, 4 * b + k, g);
            t.emplace_back(4 * a + k, 4 * b + k, -g);
            t.emplace_back(4 * b + k, 4 * a + k, -g);
        }
    };
    for (const auto& e : net.edges) {
        for (int k = 0; k < 4; ++k) add_edge(e.a, e.b, e.conductance, k);
    }
    for (int i = 0; i < n; ++i) {
        for (int k = 1; k < 4; ++k) t.emplace_back(4 * i + k, 4 * i + k, net.spin_shunt[i]);
        if (!grounded[net.node_component[i]]) t.emplace_back(4 * i, 4 * i, 1.0);
    }
    for (const auto& c : net.contacts) {
        const Vec3& m = states[c.magnet];
        const int p = c.node;
        const double g = c.params.total();
        const double pg = c.params.polarization() * g;
        if (c.kind == ContactKind::Drive) {
            const double vf = supply_voltages[c.supply];
            const Mat3 gs = spin_block(m, c.params, g);
            t.emplace_back(4 * p, 4 * p, g);
            rhs[4 * p] += g * vf;
            for (int i = 0; i < 3; ++i) {
                t.emplace_back(4 * p, 4 * p + 1 + i, pg * m[i]);
                t.emplace_back(4 * p + 1 + i, 4 * p, pg * m[i]);
                rhs[4 * p + 1 + i] += pg * m[i] * vf;
                for (int j = 0; j < 3; ++j) t.emplace_back(4 * p + 1 + i, 4 * p + 1 + j, gs(i, j));
            }
        } else {
            const double p2 = c.params.polarization() * c.params.polarization();
            const Mat3 gf = spin_block(m, c.params, g * (1.0 - p2));
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) t.emplace_back(4 * p + 1 + i, 4 * p + 1 + j, gf(i, j));
        }
    }

    Eigen::SparseMatrix<double> a(4 * n, 4 * n);
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::Topology, "singular transport system");
    const Eigen::VectorXd x = lu.solve(rhs);

    SteadyState out;
    out.potential.resize(n);
    out.accumulation.resize(n);
    for (int i = 0; i < n; ++i) {
        out.potential[i] = x[4 * i];
        out.accumulation[i] = {x[4 * i + 1], x[4 * i + 2], x[4 * i + 3]};
    }
    out.magnet_currents.assign(net.magnet_ids.size(), {});
    out.supply_currents.assign(net.supply_ids.size(), 0.0);
    for (const auto& c : net.contacts) {
        const SpinCurrent cur = contact_current(c, states[c.magnet], out.potential[c.node],
                                                out.accumulation[c.node], supply_voltages);
        out.contact_currents.push_back(cur);
        out.magnet_currents[c.magnet] += cur;
        if (c.supply >= 0) out.supply_currents[c.supply] += cur.charge;
    }
    return out;
}

std::map<std::string, SpinCurrent> solve_steady_state(const TransportNetwork& network,
                                                      const std::vector<Vec3>& states,
                                                      const std::vector<double>& supply_voltages) {
    const SteadyState s = solve_steady_state_full(network, states, supply_voltages);
    std::map<std::string, SpinCurrent> out;
    for (std::size_t i = 0; i < network.magnet_ids.size(); ++i) out[network.magnet_ids[i]] = s.magnet_currents[i];
    return out;
}

double node_charge_imbalance(const TransportNetwork& network, const SteadyState& state, int node) {
    double sum = 0.0;
    for (const auto& e : network.edges) {
        const double vb = e.b == kGround ? 0.0 : state.potential[e.b];
        if (e.a == node) sum -= e.conductance * (state.potential[e.a] - vb);
        if (e.b == node) sum += e.conductance * (state.potential[e.a] - vb);
    }
    for (std::size_t k = 0; k < network.contacts.size(); ++k) {
        if (network.contacts[k].node == node) sum += state.contact_currents[k].charge;
    }
    return sum;
}

namespace {

Eigen::MatrixXd schur(const Eigen::MatrixXd& l, const std::vector<int>& keep) {
    const int n = static_cast<int>(l.rows());
    std::vector<char> is_kept(n, 0);
    for (int k : keep) is_kept[k] = 1;
    std::vector<int> elim;
    for (int i = 0; i < n; ++i)
        if (!is_kept[i]) elim.push_back(i);
    const int p = static_cast<int>(keep.size());
    const int q = static_cast<int>(elim.size());
    Eigen::MatrixXd lpp(p, p), lpi(p, q), lii(q, q);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) lpp(i, j) = l(keep[i], keep[j]);
        for (int j = 0; j < q; ++j) lpi(i, j) = l(keep[i], elim[j]);
    }
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) lii(i, j) = l(elim[i], elim[j]);
    if (q == 0) return lpp;
    const Eigen::LLT<Eigen::MatrixXd> llt(lii);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::Topology, "floating channel section");
    return lpp - lpi * llt.solve(lpi.transpose());
}

}  // namespace

PortSolver::PortSolver(const TransportNetwork& network) : network_(&network) {
    const int nc = network.component_count;
    std::vector<std::vector<int>> nodes(nc);
    for (std::size_t i = 0; i < network.node_count(); ++i) nodes[network.node_component[i]].push_back(static_cast<int>(i));
    std::vector<std::vector<int>> contacts(nc);
    for (std::size_t k = 0; k < network.contacts.size(); ++k)
        contacts[network.node_component[network.contacts[k].node]].push_back(static_cast<int>(k));

    for (int c = 0; c < nc; ++c) {
        if (contacts[c].empty()) continue;
        Component comp;
        std::map<int, int> local;
        for (std::size_t i = 0; i < nodes[c].size(); ++i) local[nodes[c][i]] = static_cast<int>(i);
        const int m = static_cast<int>(nodes[c].size());
        Eigen::MatrixXd lc = Eigen::MatrixXd::Zero(m, m);
        bool grounded = false;
        for (const auto& e : network.edges) {
            if (network.node_component[e.a] != c) continue;
            const int a = local[e.a];
            lc(a, a) += e.conductance;
            if (e.b == kGround) {
                grounded = true;
                continue;
            }
            const int b = local[e.b];
            lc(b, b) += e.conductance;
            lc(a, b) -= e.conductance;
            lc(b, a) -= e.conductance;
        }
        Eigen::MatrixXd ls = lc;
        for (int i = 0; i < m; ++i) ls(i, i) += network.spin_shunt[nodes[c][i]];

        std::vector<int> port_local;
        std::vector<int> charge_local;
        for (int k : contacts[c]) {
            const auto& ct = network.contacts[k];
            const int l = local[ct.node];
            auto it = std::find(port_local.begin(), port_local.end(), l);
            int port = static_cast<int>(it - port_local.begin());
            if (it == port_local.end()) {
                port_local.push_back(l);
                comp.ports.push_back(ct.node);
            }
            comp.contacts.push_back(k);
            comp.contact_port.push_back(port);
        }
        for (std::size_t i = 0; i < comp.contacts.size(); ++i) {
            const auto& ct = network.contacts[comp.contacts[i]];
            int slot = -1;
            if (ct.kind == ContactKind::Drive) {
                if (!grounded) throw Error(ErrorKind::Topology, "supplied component has no ground reference");
                const int l = port_local[comp.contact_port[i]];
                auto it = std::find(charge_local.begin(), charge_local.end(), l);
                slot = static_cast<int>(it - charge_local.begin());
                if (it == charge_local.end()) {
                    charge_local.push_back(l);
                    comp.charge_ports.push_back(comp.contact_port[i]);
                }
            }
            comp.contact_charge.push_back(slot);
        }
        if (!charge_local.empty()) comp.charge_y = schur(lc, charge_local);
        comp.spin_y = schur(ls, port_local);
        for (int k : comp.contacts) {
            if (network.contacts[k].supply >= 0) comp.supplies.push_back(network.contacts[k].supply);
        }
        comp.size = static_cast<int>(charge_local.size() + 3 * port_local.size());
        comp.system.resize(static_cast<std::size_t>(comp.size) * comp.size);
        comp.rhs.resize(comp.size);
        components_.push_back(std::move(comp));
    }
}

namespace {

// In-place elimination without pivoting. The symmetric part of every port system is positive
// definite, so all pivots stay positive.
void solve_dense(std::vector<double>& a, std::vector<double>& b, int n) {
    for (int k = 0; k < n; ++k) {
        const double* rk = &a[static_cast<std::size_t>(k) * n];
        const double inv = 1.0 / rk[k];
        for (int i = k + 1; i < n; ++i) {
            double* ri = &a[static_cast<std::size_t>(i) * n];
            const double f = ri[k] * inv;
            if (f == 0.0) continue;
            for (int j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
            b[i] -= f * b[k];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        const double* ri = &a[static_cast<std::size_t>(i) * n];
        double v = b[i];
        for (int j = i + 1; j < n; ++j) v -= ri[j] * b[j];
        b[i] = v / ri[i];
    }
}

}  // namespace

void PortSolver::hold(const std::vector<char>& held, const std::vector<Vec3>& states) {
    const auto& net = *network_;
    for (auto& comp : components_) {
        const int nq = static_cast<int>(comp.charge_ports.size());
        const int np = static_cast<int>(comp.ports.size());
        const int n = comp.size;
        std::vector<char> port_held(np, 1);
        comp.contact_held.assign(comp.contacts.size(), 0);
        for (std::size_t ci = 0; ci < comp.contacts.size(); ++ci) {
            if (!held[net.contacts[comp.contacts[ci]].magnet]) port_held[comp.contact_port[ci]] = 0;
        }
        std::vector<char> unknown_held(n, 0);
        for (int q = 0; q < nq; ++q) unknown_held[q] = port_held[comp.charge_ports[q]];
        for (int p = 0; p < np; ++p)
            for (int k = 0; k < 3; ++k) unknown_held[nq + 3 * p + k] = port_held[p];
        for (std::size_t ci = 0; ci < comp.contacts.size(); ++ci) comp.contact_held[ci] = port_held[comp.contact_port[ci]];

        std::vector<int> f, h;
        comp.slot.assign(n, -1);
        for (int i = 0; i < n; ++i) {
            if (unknown_held[i]) {
                h.push_back(i);
            } else {
                comp.slot[i] = static_cast<int>(f.size());
                f.push_back(i);
            }
        }
        comp.reduced = true;
        comp.held_unknowns = h;
        comp.held_rhs_volts.clear();

        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n);
        if (nq > 0) y.topLeftCorner(nq, nq) = comp.charge_y;
        for (int i = 0; i < np; ++i)
            for (int j = 0; j < np; ++j)
                for (int k = 0; k < 3; ++k) y(nq + 3 * i + k, nq + 3 * j + k) = comp.spin_y(i, j);
        for (std::size_t ci = 0; ci < comp.contacts.size(); ++ci) {
            if (!comp.contact_held[ci]) continue;
            const auto& ct = net.contacts[comp.contacts[ci]];
            const Vec3& m = states[ct.magnet];
            const int s0 = nq + 3 * comp.contact_port[ci];
            const double g = ct.params.total();
            if (ct.kind == ContactKind::Drive) {
                const int q = comp.contact_charge[ci];
                const double pg = ct.params.polarization() * g;
                y(q, q) += g;
                for (int i = 0; i < 3; ++i) {
                    y(q, s0 + i) += pg * m[i];
                    y(s0 + i, q) += pg * m[i];
                }
                y.block<3, 3>(s0, s0) += spin_block(m, ct.params, g);
            } else {
                const double p2 = ct.params.polarization() * ct.params.polarization();
                y.block<3, 3>(s0, s0) += spin_block(m, ct.params, g * (1.0 - p2));
            }
        }
        const int nf = static_cast<int>(f.size());
        const int nh = static_cast<int>(h.size());
        Eigen::MatrixXd yff(nf, nf), yfh(nf, nh), yhf(nh, nf), yhh(nh, nh);
        for (int i = 0; i < nf; ++i) {
            for (int j = 0; j < nf; ++j) yff(i, j) = y(f[i], f[j]);
            for (int j = 0; j < nh; ++j) yfh(i, j) = y(f[i], h[j]);
        }
        for (int i = 0; i < nh; ++i) {
            for (int j = 0; j < nf; ++j) yhf(i, j) = y(h[i], f[j]);
            for (int j = 0; j < nh; ++j) yhh(i, j) = y(h[i], h[j]);
        }
        if (nh > 0) {
            comp.coupling = yhh.transpose().partialPivLu().solve(yfh.transpose()).transpose();
            yff -= comp.coupling * yhf;
        } else {
            comp.coupling.resize(nf, 0);
        }
        comp.base.resize(static_cast<std::size_t>(nf) * nf);
        for (int i = 0; i < nf; ++i)
            for (int j = 0; j < nf; ++j) comp.base[static_cast<std::size_t>(i) * nf + j] = yff(i, j);
        comp.shift.assign(nf, 0.0);
        comp.system.resize(static_cast<std::size_t>(nf) * nf);
        comp.rhs.resize(nf);
    }
    held_states_ = states;
}

void PortSolver::refresh_shift(Component& comp, const std::vector<Vec3>& states, const std::vector<double>& volts) {
    const auto& net = *network_;
    const int nq = static_cast<int>(comp.charge_ports.size());
    const int nh = static_cast<int>(comp.held_unknowns.size());
    comp.held_rhs_volts.clear();
    for (int s : comp.supplies) comp.held_rhs_volts.push_back(volts[s]);
    std::fill(comp.shift.begin(), comp.shift.end(), 0.0);
    if (nh == 0) return;
    std::vector<double> full(comp.size, 0.0);
    for (std::size_t ci = 0; ci < comp.contacts.size(); ++ci) {
        const auto& ct = net.contacts[comp.contacts[ci]];
        if (!comp.contact_held[ci] || ct.kind != ContactKind::Drive) continue;
        const Vec3& m = states[ct.magnet];
        const int s0 = nq + 3 * comp.contact_port[ci];
        const double g = ct.params.total();
        const double vf = volts[ct.supply];
        full[comp.contact_charge[ci]] += g * vf;
        for (int i = 0; i < 3; ++i) full[s0 + i] += ct.params.polarization() * g * m[i] * vf;
    }
    Eigen::VectorXd bh(nh);
    for (int i = 0; i < nh; ++i) bh[i] = full[comp.held_unknowns[i]];
    const Eigen::VectorXd w = comp.coupling * bh;
    for (int i = 0; i < w.size(); ++i) comp.shift[i] = w[i];
}

void PortSolver::solve(const std::vector<Vec3>& states, const std::vector<double>& supply_voltages,
                       std::vector<SpinCurrent>& contact_currents) {
    const auto& net = *network_;
    contact_currents.assign(net.contacts.size(), {});
    for (auto& comp : components_) {
        if (std::all_of(comp.supplies.begin(), comp.supplies.end(),
                        [&](int s) { return supply_voltages[s] == 0.0; })) {
            continue;
        }
        const int nq = static_cast<int>(comp.charge_ports.size());
        const int np = static_cast<int>(comp.ports.size());
        auto& a = comp.system;
        auto& b = comp.rhs;
        int n = comp.size;
        auto index = [&](int i) { return comp.reduced ? comp.slot[i] : i; };
        if (comp.reduced) {
            n = static_cast<int>(comp.rhs.size());
            if (n == 0) continue;
            bool stale = comp.held_rhs_volts.size() != comp.supplies.size();
            for (std::size_t k = 0; !stale && k < comp.supplies.size(); ++k) {
                stale = comp.held_rhs_volts[k] != supply_voltages[comp.supplies[k]];
            }
            if (stale) refresh_shift(comp, held_states_, supply_voltages);
            std::copy(comp.base.begin(), comp.base.end(), a.begin());
            for (int i = 0; i < n; ++i) b[i] = -comp.shift[i];
        } else {
            std::fill(a.begin(), a.end(), 0.0);
            std::fill(b.begin(), b.end(), 0.0);
            for (int i = 0; i < nq; ++i)
                for (int j = 0; j < nq; ++j) a[static_cast<std::size_t>(i) * n + j] = comp.charge_y(i, j);
            for (int i = 0; i < np; ++i)
                for (int j = 0; j < np; ++j)
                    for (int k = 0; k < 3; ++k)
                        a[static_cast<std::size_t>(nq + 3 * i + k) * n + nq + 3 * j + k] = comp.spin_y(i, j);
        }
        auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(index(i)) * n + index(j)]; };
        for (std::size_t ci = 0; ci < comp.contacts.size(); ++ci) {
            if (comp.reduced && comp.contact_held[ci]) continue;
            const auto& ct = net.contacts[comp.contacts[ci]];
            const Vec3& m = states[ct.magnet];
            const int s0 = nq + 3 * comp.contact_port[ci];
            const double g = ct.params.total();
            const double pg = ct.params.polarization() * g;
            if (ct.kind == ContactKind::Drive) {
                const int q = comp.contact_charge[ci];
                const double vf = supply_voltages[ct.supply];
                const Mat3 gs = spin_block(m, ct.params, g);
                at(q, q) += g;
                b[index(q)] += g * vf;
                for (int i = 0; i < 3; ++i) {
                    at(q, s0 + i) += pg * m[i];
                    at(s0 + i, q) += pg * m[i];
                    b[index(s0 + i)] += pg * m[i] * vf;
                    for (int j = 0; j < 3; ++j) at(s0 + i, s0 + j) += gs(i, j);
                }
            } else {
                const double p2 = ct.params.polarization() * ct.params.polarization();
                const Mat3 gf = spin_block(m, ct.params, g * (1.0 - p2));
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) at(s0 + i, s0 + j) += gf(i, j);
            }
        }
        solve_dense(a, b, n);
        for (std::size_t ci = 0; ci < comp.contacts.size(); ++ci) {
            if (comp.reduced && comp.contact_held[ci]) continue;
            const int k = comp.contacts[ci];
            const auto& ct = net.contacts[k];
            const int s0 = nq + 3 * comp.contact_port[ci];
            const Vec3 vs{b[index(s0)], b[index(s0 + 1)], b[index(s0 + 2)]};
            const double v = comp.contact_charge[ci] >= 0 ? b[index(comp.contact_charge[ci])] : 0.0;
            contact_currents[k] = contact_current(ct, states[ct.magnet], v, vs, supply_voltages);
        }
    }
}

}  // namespace spinpat
