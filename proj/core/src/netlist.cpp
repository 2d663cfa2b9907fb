#include "spinpat/netlist.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "spinpat/errors.hpp"

namespace spinpat {

using nlohmann::json;

std::string to_string(MagnetRole role) {
    switch (role) {
        case MagnetRole::Input: return "input";
        case MagnetRole::Internal: return "internal";
        case MagnetRole::Output: return "output";
    }
    return "internal";
}

std::string to_string(ContactKind kind) { return kind == ContactKind::Drive ? "drive" : "sense"; }

namespace {

MagnetRole role_from(const std::string& s) {
    if (s == "input") return MagnetRole::Input;
    if (s == "internal") return MagnetRole::Internal;
    if (s == "output") return MagnetRole::Output;
    throw Error(ErrorKind::Parse, "unknown magnet role '" + s + "'");
}

ContactKind kind_from(const std::string& s) {
    if (s == "drive") return ContactKind::Drive;
    if (s == "sense") return ContactKind::Sense;
    throw Error(ErrorKind::Parse, "unknown interface kind '" + s + "'");
}

template <class T>
void check_unique(const std::vector<T>& items, const char* what) {
    std::set<std::string> seen;
    for (const auto& item : items) {
        if (item.id.empty()) throw Error(ErrorKind::InvalidInput, std::string("empty ") + what + " id");
        if (!seen.insert(item.id).second) {
            throw Error(ErrorKind::InvalidInput, std::string("duplicate ") + what + " id '" + item.id + "'");
        }
    }
}

const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw Error(ErrorKind::Parse, where + ": missing field '" + key + "'");
    return j.at(key);
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
            throw Error(ErrorKind::Parse, where + ": unknown field '" + k + "'");
        }
    }
}

}  // namespace

const MagnetSpec& Netlist::magnet(const std::string& id) const { return magnets[magnet_index(id)]; }

MagnetSpec& Netlist::magnet(const std::string& id) { return magnets[magnet_index(id)]; }

bool Netlist::has_magnet(const std::string& id) const {
    return std::any_of(magnets.begin(), magnets.end(), [&](const MagnetSpec& m) { return m.id == id; });
}

std::size_t Netlist::magnet_index(const std::string& id) const {
    for (std::size_t i = 0; i < magnets.size(); ++i)
        if (magnets[i].id == id) return i;
    throw Error(ErrorKind::Lookup, "unknown magnet id '" + id + "'");
}

const std::string& Netlist::pin(const std::string& name) const {
    const auto it = pins.find(name);
    if (it == pins.end()) throw Error(ErrorKind::Lookup, "unknown pin '" + name + "'");
    return it->second;
}

void Netlist::validate() const {
    check_unique(magnets, "magnet");
    check_unique(channels, "channel");
    check_unique(interfaces, "interface");
    check_unique(supplies, "supply");

    for (const auto& m : magnets) {
        if (m.geometry) m.geometry->validate();
        if (m.material) m.material->validate();
    }
    for (const auto& c : channels) {
        if (!(c.length > 0.0) || !(c.width > 0.0) || !(c.thickness > 0.0)) {
            throw Error(ErrorKind::InvalidParameter, "channel '" + c.id + "' needs positive dimensions");
        }
        if (c.from == c.to) throw Error(ErrorKind::Topology, "channel '" + c.id + "' is a self-loop");
    }
    std::map<std::string, const InterfaceSpec*> iface_by_id;
    for (const auto& i : interfaces) {
        magnet_index(i.magnet);
        iface_by_id[i.id] = &i;
    }
    std::set<std::string> supplied;
    for (const auto& s : supplies) {
        const auto it = iface_by_id.find(s.interface);
        if (it == iface_by_id.end()) {
            throw Error(ErrorKind::Lookup, "supply '" + s.id + "' references unknown interface '" + s.interface + "'");
        }
        if (it->second->kind != ContactKind::Drive) {
            throw Error(ErrorKind::Topology, "supply '" + s.id + "' is on a sense interface");
        }
        if (s.sign != 1 && s.sign != -1) throw Error(ErrorKind::InvalidParameter, "supply sign must be +1 or -1");
        if (s.phase < 0) throw Error(ErrorKind::InvalidParameter, "supply phase must be >= 0");
        if (!(s.ground_length > 0.0) || !(s.ground_width > 0.0) || !(s.ground_thickness > 0.0)) {
            throw Error(ErrorKind::InvalidParameter, "ground lead of '" + s.id + "' needs positive dimensions");
        }
        if (!supplied.insert(s.interface).second) {
            throw Error(ErrorKind::Topology, "interface '" + s.interface + "' has two supplies");
        }
    }

    // Node connectivity through channels.
    std::map<std::string, std::string> parent;
    auto find = [&](std::string x) {
        if (!parent.count(x)) parent[x] = x;
        while (parent[x] != x) x = parent[x];
        return x;
    };
    for (const auto& c : channels) parent[find(c.from)] = find(c.to);

    std::map<std::string, std::vector<std::string>> drivers_of_component;
    std::map<std::string, std::vector<std::string>> senses_of_component;
    std::set<std::string> has_supply;
    for (const auto& i : interfaces) {
        const std::string comp = find(i.node);
        if (i.kind == ContactKind::Drive) {
            if (!supplied.count(i.id)) throw Error(ErrorKind::Topology, "drive interface '" + i.id + "' has no supply");
            drivers_of_component[comp].push_back(i.magnet);
            has_supply.insert(i.magnet);
        } else {
            senses_of_component[comp].push_back(i.magnet);
        }
    }
    for (const auto& m : magnets) {
        if (m.role == MagnetRole::Input && !has_supply.count(m.id)) {
            throw Error(ErrorKind::Topology, "input magnet '" + m.id + "' has no supply");
        }
    }

    std::map<std::string, std::set<std::string>> fanout;
    for (const auto& [comp, drivers] : drivers_of_component) {
        for (const auto& d : drivers)
            for (const auto& s : senses_of_component[comp]) fanout[d].insert(s);
    }
    std::set<std::string> reached;
    std::deque<std::string> queue;
    for (const auto& m : magnets) {
        if (m.role == MagnetRole::Input) {
            reached.insert(m.id);
            queue.push_back(m.id);
        }
    }
    while (!queue.empty()) {
        const std::string cur = queue.front();
        queue.pop_front();
        for (const auto& next : fanout[cur]) {
            if (reached.insert(next).second) queue.push_back(next);
        }
    }
    for (const auto& m : magnets) {
        if (m.role == MagnetRole::Output && !reached.count(m.id)) {
            throw Error(ErrorKind::Topology, "output magnet '" + m.id + "' is not reachable from any input");
        }
    }
    for (const auto& [name, id] : pins) magnet_index(id);
}

void Netlist::append(const Netlist& other, const std::string& prefix,
                     const std::map<std::string, std::string>& aliases) {
    auto mag = [&](const std::string& id) {
        const auto it = aliases.find(id);
        return it == aliases.end() ? prefix + id : it->second;
    };
    for (auto m : other.magnets) {
        if (aliases.count(m.id)) {
            if (!has_magnet(aliases.at(m.id))) {
                throw Error(ErrorKind::Lookup, "alias target '" + aliases.at(m.id) + "' does not exist");
            }
            continue;
        }
        m.id = prefix + m.id;
        magnets.push_back(std::move(m));
    }
    for (auto c : other.channels) {
        c.id = prefix + c.id;
        c.from = prefix + c.from;
        c.to = prefix + c.to;
        channels.push_back(std::move(c));
    }
    for (auto i : other.interfaces) {
        i.id = prefix + i.id;
        i.magnet = mag(i.magnet);
        i.node = prefix + i.node;
        interfaces.push_back(std::move(i));
    }
    for (auto s : other.supplies) {
        s.id = prefix + s.id;
        s.interface = prefix + s.interface;
        supplies.push_back(std::move(s));
    }
}

namespace {

json geometry_json(const MagnetGeometry& g) {
    return {{"length_m", g.length}, {"width_m", g.width}, {"height_m", g.height}};
}

MagnetGeometry geometry_from(const json& j, const std::string& where) {
    reject_unknown(j, {"length_m", "width_m", "height_m"}, where);
    MagnetGeometry g;
    g.length = field(j, "length_m", where).get<double>();
    g.width = field(j, "width_m", where).get<double>();
    g.height = field(j, "height_m", where).get<double>();
    return g;
}

json material_json(const MagnetMaterial& m) {
    return {{"damping", m.damping},
            {"gyromagnetic_ratio_per_s_T", m.gyromagnetic_ratio},
            {"saturation_magnetization_A_per_m", m.saturation_magnetization},
            {"spin_count", m.spin_count},
            {"anisotropy_density_J_per_m3", m.anisotropy_density},
            {"demag_factors", {m.demag_factors.x, m.demag_factors.y, m.demag_factors.z}},
            {"torque_efficiency", m.torque_efficiency}};
}

MagnetMaterial material_from(const json& j, const std::string& where) {
    reject_unknown(j,
                   {"damping", "gyromagnetic_ratio_per_s_T", "saturation_magnetization_A_per_m",
                    "spin_count", "anisotropy_density_J_per_m3", "demag_factors", "torque_efficiency"},
                   where);
    MagnetMaterial m;
    m.damping = field(j, "damping", where).get<double>();
    m.gyromagnetic_ratio = field(j, "gyromagnetic_ratio_per_s_T", where).get<double>();
    m.saturation_magnetization = field(j, "saturation_magnetization_A_per_m", where).get<double>();
    m.spin_count = field(j, "spin_count", where).get<double>();
    m.anisotropy_density = field(j, "anisotropy_density_J_per_m3", where).get<double>();
    const auto& n = field(j, "demag_factors", where);
    m.demag_factors = {n.at(0).get<double>(), n.at(1).get<double>(), n.at(2).get<double>()};
    m.torque_efficiency = field(j, "torque_efficiency", where).get<double>();
    return m;
}

json iface_json(const InterfaceParams& p) {
    return {{"g_up_S", p.g_up}, {"g_down_S", p.g_down}, {"re_g_mix_S", p.re_mix}, {"im_g_mix_S", p.im_mix}};
}

InterfaceParams iface_from(const json& j, const std::string& where) {
    reject_unknown(j, {"g_up_S", "g_down_S", "re_g_mix_S", "im_g_mix_S"}, where);
    InterfaceParams p;
    p.g_up = field(j, "g_up_S", where).get<double>();
    p.g_down = field(j, "g_down_S", where).get<double>();
    p.re_mix = field(j, "re_g_mix_S", where).get<double>();
    p.im_mix = field(j, "im_g_mix_S", where).get<double>();
    return p;
}

}  // namespace

json to_json(const Netlist& n) {
    json j;
    j["magnets"] = json::array();
    for (const auto& m : n.magnets) {
        json e = {{"id", m.id}, {"role", to_string(m.role)}};
        if (m.geometry) e["geometry"] = geometry_json(*m.geometry);
        if (m.material) e["material"] = material_json(*m.material);
        j["magnets"].push_back(e);
    }
    j["channels"] = json::array();
    for (const auto& c : n.channels) {
        j["channels"].push_back({{"id", c.id},
                                 {"from", c.from},
                                 {"to", c.to},
                                 {"length_m", c.length},
                                 {"width_m", c.width},
                                 {"thickness_m", c.thickness}});
    }
    j["interfaces"] = json::array();
    for (const auto& i : n.interfaces) {
        json e = {{"id", i.id}, {"magnet", i.magnet}, {"node", i.node}, {"kind", to_string(i.kind)}};
        if (i.params) e["params"] = iface_json(*i.params);
        j["interfaces"].push_back(e);
    }
    j["supplies"] = json::array();
    for (const auto& s : n.supplies) {
        j["supplies"].push_back({{"id", s.id},
                                 {"interface", s.interface},
                                 {"sign", s.sign},
                                 {"phase", s.phase},
                                 {"ground_length_m", s.ground_length},
                                 {"ground_width_m", s.ground_width},
                                 {"ground_thickness_m", s.ground_thickness}});
    }
    j["pins"] = json::object();
    for (const auto& [k, v] : n.pins) j["pins"][k] = v;
    return j;
}

Netlist netlist_from_json(const json& j) {
    Netlist n;
    try {
        reject_unknown(j, {"magnets", "channels", "interfaces", "supplies", "pins"}, "netlist");
        for (const auto& e : field(j, "magnets", "netlist")) {
            const std::string where = "magnets[" + e.value("id", std::string("?")) + "]";
            reject_unknown(e, {"id", "role", "geometry", "material"}, where);
            MagnetSpec m;
            m.id = field(e, "id", where).get<std::string>();
            m.role = role_from(field(e, "role", where).get<std::string>());
            if (e.contains("geometry")) m.geometry = geometry_from(e.at("geometry"), where);
            if (e.contains("material")) m.material = material_from(e.at("material"), where);
            n.magnets.push_back(std::move(m));
        }
        for (const auto& e : field(j, "channels", "netlist")) {
            const std::string where = "channels[" + e.value("id", std::string("?")) + "]";
            reject_unknown(e, {"id", "from", "to", "length_m", "width_m", "thickness_m"}, where);
            ChannelSpec c;
            c.id = field(e, "id", where).get<std::string>();
            c.from = field(e, "from", where).get<std::string>();
            c.to = field(e, "to", where).get<std::string>();
            c.length = field(e, "length_m", where).get<double>();
            c.width = field(e, "width_m", where).get<double>();
            c.thickness = field(e, "thickness_m", where).get<double>();
            n.channels.push_back(std::move(c));
        }
        for (const auto& e : field(j, "interfaces", "netlist")) {
            const std::string where = "interfaces[" + e.value("id", std::string("?")) + "]";
            reject_unknown(e, {"id", "magnet", "node", "kind", "params"}, where);
            InterfaceSpec i;
            i.id = field(e, "id", where).get<std::string>();
            i.magnet = field(e, "magnet", where).get<std::string>();
            i.node = field(e, "node", where).get<std::string>();
            i.kind = kind_from(field(e, "kind", where).get<std::string>());
            if (e.contains("params")) i.params = iface_from(e.at("params"), where);
            n.interfaces.push_back(std::move(i));
        }
        for (const auto& e : field(j, "supplies", "netlist")) {
            const std::string where = "supplies[" + e.value("id", std::string("?")) + "]";
            reject_unknown(e, {"id", "interface", "sign", "phase", "ground_length_m", "ground_width_m", "ground_thickness_m"},
                           where);
            SupplySpec s;
            s.id = field(e, "id", where).get<std::string>();
            s.interface = field(e, "interface", where).get<std::string>();
            s.sign = field(e, "sign", where).get<int>();
            s.phase = field(e, "phase", where).get<int>();
            s.ground_length = field(e, "ground_length_m", where).get<double>();
            s.ground_width = field(e, "ground_width_m", where).get<double>();
            s.ground_thickness = field(e, "ground_thickness_m", where).get<double>();
            n.supplies.push_back(std::move(s));
        }
        if (j.contains("pins")) {
            for (const auto& [k, v] : j.at("pins").items()) n.pins[k] = v.get<std::string>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("netlist: ") + e.what());
    }
    n.validate();
    return n;
}

}  // namespace spinpat
