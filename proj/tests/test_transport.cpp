#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "spinpat/circuit.hpp"
#include "spinpat/errors.hpp"
#include "spinpat/rng.hpp"
#include "spinpat/transport.hpp"
#include "support.hpp"

using namespace spinpat;

namespace {

const DeviceParams& device() { return testing::default_config().device; }

// Magnet `a` drives a channel of the given length whose far end is sensed by magnet `b`.
Netlist link(double length) {
    Netlist n;
    n.magnets.push_back({"a", MagnetRole::Input, {}, {}});
    n.magnets.push_back({"b", MagnetRole::Output, {}, {}});
    n.interfaces.push_back({"a.drv", "a", "na", ContactKind::Drive, {}});
    n.interfaces.push_back({"b.sns", "b", "nb", ContactKind::Sense, {}});
    n.supplies.push_back(make_supply("a.v", "a.drv", -1, device()));
    n.channels.push_back(make_channel("ch", "na", "nb", length, device()));
    return n;
}

TransportNetwork network_of(const Netlist& n, double dx) {
    return build_network(n, device().channel_material(), dx, device().interface);
}

Vec3 random_unit(Rng& rng) { return normalized({rng.normal(), rng.normal(), rng.normal()}); }

// Random star-and-chain topology: inputs feed hub h0, hubs are chained, each hub is sensed.
Netlist random_netlist(Rng& rng) {
    Netlist n;
    const int inputs = 1 + static_cast<int>(rng.uniform() * 4);
    const int hubs = 1 + static_cast<int>(rng.uniform() * 3);
    for (int h = 0; h < hubs; ++h) {
        const std::string id = "o" + std::to_string(h);
        n.magnets.push_back({id, MagnetRole::Output, {}, {}});
        n.interfaces.push_back({id + ".sns", id, "h" + std::to_string(h), ContactKind::Sense, {}});
        if (h > 0) {
            n.channels.push_back(make_channel("c" + std::to_string(h), "h" + std::to_string(h - 1),
                                              "h" + std::to_string(h), 40e-9 + 300e-9 * rng.uniform(), device()));
        }
    }
    for (int k = 0; k < inputs; ++k) {
        const std::string id = "i" + std::to_string(k);
        n.magnets.push_back({id, MagnetRole::Input, {}, {}});
        n.interfaces.push_back({id + ".drv", id, id + ".d", ContactKind::Drive, {}});
        n.supplies.push_back(make_supply(id + ".v", id + ".drv", rng.uniform() < 0.5 ? -1 : 1, device()));
        const int hub = static_cast<int>(rng.uniform() * hubs);
        n.channels.push_back(make_channel("ch" + std::to_string(k), id + ".d", "h" + std::to_string(hub),
                                          40e-9 + 300e-9 * rng.uniform(), device()));
    }
    return n;
}

double max_abs(const std::vector<SpinCurrent>& v) {
    double m = 0.0;
    for (const auto& c : v) m = std::max({m, std::abs(c.charge), norm(c.spin)});
    return m;
}

}  // namespace

TEST_CASE("spin diffusion length") {
    ChannelParams ch;
    CHECK(spin_diffusion_length(ch) == doctest::Approx(391.3e-9).epsilon(1e-9 / 391.3e-9));
    CHECK(std::abs(spin_diffusion_length(device().channel_material()) - 391.3e-9) <= 1e-9);
    ChannelParams fast = ch;
    fast.diffusion *= 4.0;
    CHECK(spin_diffusion_length(fast) == doctest::Approx(2.0 * spin_diffusion_length(ch)));
    ChannelParams none = ch;
    none.spin_relaxation = 0.0;
    CHECK(spin_diffusion_length(none) == 0.0);
}

TEST_CASE("channel discretization") {
    const auto net = network_of(link(212.5e-9), 10e-9);
    CHECK(net.channel_segments.at("ch") == 22);
    int interior = 0;
    for (const auto& name : net.node_names) interior += name.rfind("ch#", 0) == 0;
    CHECK(interior + 2 == 23);
    CHECK(network_of(link(212.5e-9), 500e-9).channel_segments.at("ch") == 1);
    CHECK_THROWS_AS(network_of(link(212.5e-9), 0.0), Error);
}

TEST_CASE("interface currents") {
    const InterfaceParams p;
    CHECK(p.polarization() == doctest::Approx(0.5));
    const Vec3 m{1.0, 0.0, 0.0};
    const auto zero = interface_currents(m, {}, 0.0, p);
    CHECK(zero.charge == 0.0);
    CHECK(norm(zero.spin) == 0.0);
    for (double v : {0.0, 5e-3, -3e-3}) {
        const auto c = interface_currents(m, {2e-3, 0.0, 0.0}, v, p);
        CHECK(std::abs(c.spin.y) <= 1e-15);
        CHECK(std::abs(c.spin.z) <= 1e-15);
    }
    const auto transverse = interface_currents(m, {0.0, 1e-3, 0.0}, 0.0, p);
    CHECK(std::abs(transverse.spin.y) > 0.0);
    const auto floating = floating_interface_currents(m, {1e-3, 2e-3, 0.0}, p);
    CHECK(std::abs(floating.charge) <= 1e-15);
}

TEST_CASE("steady state is linear in the supplies") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const Netlist n = random_netlist(rng);
        const auto net = network_of(n, 10e-9);
        std::vector<Vec3> states;
        for (std::size_t i = 0; i < net.magnet_ids.size(); ++i) states.push_back(random_unit(rng));
        std::vector<double> v1, v2, sum, twice, off(net.supply_ids.size(), 0.0);
        for (std::size_t s = 0; s < net.supply_ids.size(); ++s) {
            v1.push_back(10e-3 * (rng.uniform() - 0.5));
            v2.push_back(10e-3 * (rng.uniform() - 0.5));
            sum.push_back(v1.back() + v2.back());
            twice.push_back(2.0 * v1.back());
        }
        CHECK(max_abs(solve_steady_state_full(net, states, off).contact_currents) == 0.0);
        const auto a = solve_steady_state_full(net, states, v1).contact_currents;
        const auto b = solve_steady_state_full(net, states, v2).contact_currents;
        const auto ab = solve_steady_state_full(net, states, sum).contact_currents;
        const auto a2 = solve_steady_state_full(net, states, twice).contact_currents;
        const double scale = std::max(max_abs(a), max_abs(b));
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(std::abs(ab[k].charge - a[k].charge - b[k].charge) <= 1e-9 * scale);
            CHECK(norm(ab[k].spin - a[k].spin - b[k].spin) <= 1e-9 * scale);
            CHECK(norm(a2[k].spin - a[k].spin * 2.0) <= 1e-9 * scale);
            CHECK(std::abs(a2[k].charge - 2.0 * a[k].charge) <= 1e-9 * scale);
        }
    }
}

TEST_CASE("charge is conserved at every node") {
    Rng rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        const Netlist n = random_netlist(rng);
        const auto net = network_of(n, 5e-9 + 20e-9 * rng.uniform());
        std::vector<Vec3> states;
        for (std::size_t i = 0; i < net.magnet_ids.size(); ++i) states.push_back(random_unit(rng));
        std::vector<double> volts;
        for (std::size_t s = 0; s < net.supply_ids.size(); ++s) volts.push_back(10e-3 * (rng.uniform() - 0.5));
        const auto st = solve_steady_state_full(net, states, volts);
        double total = 0.0;
        for (double i : st.supply_currents) total += std::abs(i);
        REQUIRE(total > 0.0);
        for (std::size_t node = 0; node < net.node_count(); ++node) {
            CHECK(std::abs(node_charge_imbalance(net, st, static_cast<int>(node))) <= 1e-9 * total);
        }
    }
}

TEST_CASE("majority output current is the sum of the input contributions") {
    const Netlist n = build_majority_gate(5, device());
    const auto net = network_of(n, device().channel.dx);
    Rng rng(43);
    std::vector<Vec3> states;
    for (const auto& id : net.magnet_ids) states.push_back(id == "out" ? Vec3{0.0, 1.0, 0.0} : random_unit(rng));
    const std::vector<double> volts(net.supply_ids.size(), -5e-3);
    const Vec3 total = solve_steady_state(net, states, volts).at("out").spin;
    Vec3 sum{};
    for (std::size_t s = 0; s < volts.size(); ++s) {
        std::vector<double> one(volts.size(), 0.0);
        one[s] = volts[s];
        sum += solve_steady_state(net, states, one).at("out").spin;
    }
    CHECK(norm(total - sum) <= 1e-9 * norm(total));
}

TEST_CASE("port reduction matches the full solve") {
    Rng rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        const Netlist n = random_netlist(rng);
        const auto net = network_of(n, 10e-9);
        std::vector<Vec3> states;
        for (std::size_t i = 0; i < net.magnet_ids.size(); ++i) states.push_back(random_unit(rng));
        std::vector<double> volts;
        for (std::size_t s = 0; s < net.supply_ids.size(); ++s) volts.push_back(10e-3 * (rng.uniform() - 0.5));
        const auto full = solve_steady_state_full(net, states, volts).contact_currents;
        const double scale = max_abs(full);

        PortSolver solver(net);
        std::vector<SpinCurrent> ports;
        solver.solve(states, volts, ports);
        for (std::size_t k = 0; k < full.size(); ++k) {
            CHECK(std::abs(ports[k].charge - full[k].charge) <= 1e-9 * scale);
            CHECK(norm(ports[k].spin - full[k].spin) <= 1e-9 * scale);
        }

        // Hold the input magnets, then move the outputs and change the supplies.
        std::vector<char> held;
        for (const auto& id : net.magnet_ids) held.push_back(id[0] == 'i');
        PortSolver reduced(net);
        reduced.hold(held, states);
        for (int round = 0; round < 3; ++round) {
            for (std::size_t i = 0; i < states.size(); ++i)
                if (!held[i]) states[i] = random_unit(rng);
            if (round == 2)
                for (auto& v : volts) v *= -0.5;
            const auto ref = solve_steady_state_full(net, states, volts).contact_currents;
            std::vector<SpinCurrent> got;
            reduced.solve(states, volts, got);
            const double s = max_abs(ref);
            for (std::size_t k = 0; k < ref.size(); ++k) {
                if (held[net.contacts[k].magnet]) continue;
                CHECK(std::abs(got[k].charge - ref[k].charge) <= 1e-9 * s);
                CHECK(norm(got[k].spin - ref[k].spin) <= 1e-9 * s);
            }
        }
    }
}

TEST_CASE("two-magnet link follows the 1D diffusion profile") {
    const double length = 400e-9;
    const double dx = 2.5e-9;
    const auto net = network_of(link(length), dx);
    const std::vector<Vec3> states{{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};
    const auto st = solve_steady_state_full(net, states, {-5e-3});
    const double lambda = spin_diffusion_length(device().channel_material());
    const double mu0 = st.accumulation[net.node_index("na")].x;
    const double mul = st.accumulation[net.node_index("nb")].x;
    REQUIRE(std::abs(mu0) > 0.0);
    const int segments = net.channel_segments.at("ch");
    double worst = 0.0;
    for (int k = 1; k < segments; ++k) {
        const double x = length * k / segments;
        const double closed = (mu0 * std::sinh((length - x) / lambda) + mul * std::sinh(x / lambda)) /
                              std::sinh(length / lambda);
        const double got = st.accumulation[net.node_index("ch#" + std::to_string(k))].x;
        worst = std::max(worst, std::abs(got - closed) / std::max(std::abs(mu0), std::abs(mul)));
    }
    CHECK(worst <= 0.05);

    // Longer links deliver less: the delivered current decays on the scale of lambda.
    auto delivered = [&](double l) {
        const auto n = network_of(link(l), dx);
        return std::abs(solve_steady_state(n, {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}, {-5e-3}).at("b").spin.x);
    };
    CHECK(delivered(100e-9) > delivered(400e-9));
    CHECK(delivered(400e-9) > delivered(1600e-9));
}

TEST_CASE("attenuation is reciprocal") {
    auto ratio = [&](bool forward) {
        Netlist n;
        const std::string src = forward ? "a" : "b";
        const std::string dst = forward ? "b" : "a";
        n.magnets.push_back({src, MagnetRole::Input, {}, {}});
        n.magnets.push_back({dst, MagnetRole::Output, {}, {}});
        n.interfaces.push_back({src + ".drv", src, "n" + src, ContactKind::Drive, {}});
        n.interfaces.push_back({dst + ".sns", dst, "n" + dst, ContactKind::Sense, {}});
        n.supplies.push_back(make_supply(src + ".v", src + ".drv", -1, device()));
        n.channels.push_back(make_channel("ch", "na", "nb", 300e-9, device()));
        const auto net = network_of(n, 5e-9);
        std::vector<Vec3> states(2);
        states[net.magnet_ids[0] == src ? 0 : 1] = {1.0, 0.0, 0.0};
        states[net.magnet_ids[0] == src ? 1 : 0] = {0.0, 1.0, 0.0};
        const auto st = solve_steady_state_full(net, states, {-5e-3});
        return st.accumulation[net.node_index("n" + dst)].x / st.accumulation[net.node_index("n" + src)].x;
    };
    CHECK(ratio(true) == doctest::Approx(ratio(false)).epsilon(1e-9));
}

TEST_CASE("grid convergence") {
    auto out_current = [&](double dx) {
        const Netlist n = build_majority_gate(3, device());
        const auto net = network_of(n, dx);
        std::vector<Vec3> states;
        for (const auto& id : net.magnet_ids) states.push_back(id == "out" ? Vec3{0.0, 1.0, 0.0} : Vec3{1.0, 0.0, 0.0});
        return solve_steady_state(net, states, std::vector<double>(net.supply_ids.size(), -5e-3)).at("out").spin;
    };
    const Vec3 coarse = out_current(10e-9);
    const Vec3 fine = out_current(5e-9);
    CHECK(norm(coarse - fine) <= 0.01 * norm(fine));
}

TEST_CASE("size-effect conductivity") {
    ChannelParams wide;
    wide.width = 1.0;
    wide.thickness = 1.0;
    SizeEffectParams clean;
    clean.specularity = 1.0;
    clean.reflectivity = 0.0;
    CHECK(effective_conductivity(clean, wide, 5.96e7) == doctest::Approx(5.96e7));

    Rng rng(45);
    for (int i = 0; i < 200; ++i) {
        SizeEffectParams s;
        s.specularity = rng.uniform();
        s.reflectivity = 0.9 * rng.uniform();
        s.grain_size = 5e-9 + 100e-9 * rng.uniform();
        ChannelParams ch;
        ch.width = 10e-9 + 200e-9 * rng.uniform();
        ch.thickness = 10e-9 + 200e-9 * rng.uniform();
        CHECK(effective_conductivity(s, ch, 5.96e7) <= 5.96e7);
    }

    SizeEffectParams reference;
    ChannelParams ch;
    const double sigma = effective_conductivity(reference, ch, 5.96e7);
    CHECK(sigma < 5.96e7);
    CHECK(sigma > 0.3 * 5.96e7);
}

TEST_CASE("open-ended link attenuates as 1/cosh") {
    for (double length : {100e-9, 400e-9, 1000e-9}) {
        Netlist n = link(length);
        n.magnets.pop_back();
        n.interfaces.pop_back();
        const auto net = network_of(n, 2.5e-9);
        const auto st = solve_steady_state_full(net, {{1.0, 0.0, 0.0}}, {-5e-3});
        const double ratio = st.accumulation[net.node_index("nb")].x / st.accumulation[net.node_index("na")].x;
        const double lambda = spin_diffusion_length(device().channel_material());
        CHECK(ratio == doctest::Approx(1.0 / std::cosh(length / lambda)).epsilon(0.01));
    }
}
