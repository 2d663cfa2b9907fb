#include "spinpat/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "spinpat/errors.hpp"
#include "spinpat/transport.hpp"

namespace spinpat {

namespace {

using nlohmann::json;

struct UnitEntry {
    double factor;
    const char* note;  // non-null when the unit is a reinterpretation
};

const std::map<std::string, std::map<std::string, UnitEntry>>& unit_table() {
    static const std::map<std::string, std::map<std::string, UnitEntry>> table{
        {"1", {{"", {1.0, nullptr}}, {"1/V", {1.0, "unit 1/V read as a dimensionless spin count"}}}},
        {"m", {{"m", {1.0, nullptr}}, {"um", {1e-6, nullptr}}, {"nm", {1e-9, nullptr}}}},
        {"m^2", {{"m^2", {1.0, nullptr}}, {"um^2", {1e-12, nullptr}}, {"nm^2", {1e-18, nullptr}}}},
        {"s", {{"s", {1.0, nullptr}}, {"ns", {1e-9, nullptr}}, {"ps", {1e-12, nullptr}}, {"fs", {1e-15, nullptr}}}},
        {"V", {{"V", {1.0, nullptr}}, {"mV", {1e-3, nullptr}}}},
        {"S", {{"S", {1.0, nullptr}}, {"1/Ohm", {1.0, nullptr}}}},
        {"S/m",
         {{"S/m", {1.0, nullptr}},
          {"1/(Ohm*m)", {1.0, nullptr}},
          {"1/(uOhm*m)", {1e6, nullptr}},
          {"1/uOhm m^2", {1e6, "unit 1/(uOhm*m^2) read as 1/(uOhm*m)"}}}},
        {"m^2/s", {{"m^2/s", {1.0, nullptr}}, {"cm^2/s", {1e-4, nullptr}}}},
        {"m^2/(V*s)", {{"m^2/(V*s)", {1.0, nullptr}}, {"m^2/Vs", {1.0, nullptr}}}},
        {"1/(s*T)", {{"1/(s*T)", {1.0, nullptr}}, {"1/sT", {1.0, nullptr}}}},
        {"A/m", {{"A/m", {1.0, nullptr}}}},
        {"J/m^3", {{"J/m^3", {1.0, nullptr}}, {"J/m^2", {1.0, "unit J/m^2 read as J/m^3"}}}},
        {"K", {{"K", {1.0, nullptr}}}},
        {"J/K", {{"J/K", {1.0, nullptr}}}},
        {"C", {{"C", {1.0, nullptr}}}},
        {"T*m/A", {{"T*m/A", {1.0, nullptr}}, {"H/m", {1.0, nullptr}}}},
    };
    return table;
}

enum class Kind { Quantity, QuantityList, Integer, Boolean, Path, PathList };

struct Field {
    std::string path;
    Kind kind;
    std::string unit;  // canonical unit for quantities
    bool required;
    std::function<void(Config&, const json&)> set;  // receives SI numbers or raw values
    std::function<json(const Config&)> get;
};

#define SPINPAT_Q(path, unit, req, expr)                                                      \
    Field {                                                                                  \
        path, Kind::Quantity, unit, req, [](Config& c, const json& v) { expr = v.get<double>(); }, \
            [](const Config& c) -> json { return expr; }                                     \
    }
#define SPINPAT_I(path, expr)                                                                 \
    Field {                                                                                  \
        path, Kind::Integer, "", false, [](Config& c, const json& v) { expr = v.get<int>(); },  \
            [](const Config& c) -> json { return expr; }                                     \
    }
#define SPINPAT_B(path, expr)                                                                  \
    Field {                                                                                   \
        path, Kind::Boolean, "", false, [](Config& c, const json& v) { expr = v.get<bool>(); },  \
            [](const Config& c) -> json { return expr; }                                      \
    }
#define SPINPAT_P(path, expr)                                                                          \
    Field {                                                                                           \
        path, Kind::Path, "", false, [](Config& c, const json& v) { expr = v.get<std::string>(); },      \
            [](const Config& c) -> json { return expr.generic_string(); }                             \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> f{
        SPINPAT_Q("constants.kB", "J/K", false, c.device.constants.boltzmann),
        SPINPAT_Q("constants.q", "C", false, c.device.constants.elementary_charge),
        SPINPAT_Q("constants.mu0", "T*m/A", false, c.device.constants.vacuum_permeability),

        SPINPAT_Q("magnet.Lx", "m", true, c.device.magnet_geometry.length),
        SPINPAT_Q("magnet.Ly", "m", true, c.device.magnet_geometry.width),
        SPINPAT_Q("magnet.Lz", "m", true, c.device.magnet_geometry.height),
        SPINPAT_Q("magnet.alpha", "1", true, c.device.magnet_material.damping),
        SPINPAT_Q("magnet.gamma", "1/(s*T)", true, c.device.magnet_material.gyromagnetic_ratio),
        SPINPAT_Q("magnet.Ms", "A/m", true, c.device.magnet_material.saturation_magnetization),
        SPINPAT_Q("magnet.Ns", "1", true, c.device.magnet_material.spin_count),
        SPINPAT_Q("magnet.Ku", "J/m^3", true, c.device.magnet_material.anisotropy_density),
        SPINPAT_Q("magnet.Nx", "1", false, c.device.magnet_material.demag_factors.x),
        SPINPAT_Q("magnet.Ny", "1", false, c.device.magnet_material.demag_factors.y),
        SPINPAT_Q("magnet.Nz", "1", false, c.device.magnet_material.demag_factors.z),
        SPINPAT_Q("magnet.torque_efficiency", "1", false, c.device.magnet_material.torque_efficiency),

        SPINPAT_Q("channel.L_int", "m", true, c.device.channel.length),
        SPINPAT_Q("channel.W_int", "m", true, c.device.channel.width),
        SPINPAT_Q("channel.H_int", "m", true, c.device.channel.thickness),
        SPINPAT_Q("channel.AR", "1", true, c.device.channel.aspect_ratio),
        Field{"channel.A", Kind::Quantity, "m^2", true, [](Config&, const json&) {},
              [](const Config& c) -> json { return c.device.channel.area(); }},
        SPINPAT_Q("channel.dx", "m", true, c.device.channel.dx),
        SPINPAT_Q("channel.sigma", "S/m", true, c.device.channel.conductivity),
        SPINPAT_Q("channel.D", "m^2/s", true, c.device.channel.diffusion),
        SPINPAT_Q("channel.mu", "m^2/(V*s)", true, c.device.channel.mobility),
        SPINPAT_Q("channel.tau_s", "s", true, c.device.channel.spin_relaxation),

        SPINPAT_Q("interface.G_up", "S", true, c.device.interface.g_up),
        SPINPAT_Q("interface.G_down", "S", true, c.device.interface.g_down),
        SPINPAT_Q("interface.ReG_mix", "S", true, c.device.interface.re_mix),
        SPINPAT_Q("interface.ImG_mix", "S", true, c.device.interface.im_mix),

        SPINPAT_Q("size_effects.p", "1", true, c.device.size_effects.specularity),
        SPINPAT_Q("size_effects.R", "1", true, c.device.size_effects.reflectivity),
        SPINPAT_Q("size_effects.grain_size", "m", false, c.device.size_effects.grain_size),
        SPINPAT_Q("size_effects.mean_free_path", "m", false, c.device.size_effects.mean_free_path),
        SPINPAT_B("size_effects.enabled", c.device.apply_size_effects),

        SPINPAT_Q("simulation.temperature", "K", false, c.device.temperature),
        SPINPAT_Q("simulation.dt", "s", false, c.device.dt),
        SPINPAT_Q("simulation.dt_max", "s", false, c.device.dt_max),
        SPINPAT_Q("simulation.sample_interval", "s", false, c.device.sample_interval),
        SPINPAT_Q("simulation.settle_threshold", "1", false, c.device.settle_threshold),
        SPINPAT_Q("simulation.initial_tilt", "1", false, c.device.initial_tilt),
        SPINPAT_Q("simulation.tau0", "s", false, c.device.tau0),
        SPINPAT_Q("simulation.supply_voltage", "V", false, c.device.supply_voltage),
        SPINPAT_Q("simulation.breakdown_cap", "V", false, c.device.breakdown_cap),
        SPINPAT_I("simulation.fan_in_cap", c.device.fan_in_cap),

        SPINPAT_Q("layout.ground_length", "m", false, c.device.ground_length),
        SPINPAT_Q("layout.local_channel_length", "m", false, c.device.local_channel_length),
        SPINPAT_Q("layout.bias_channel_length", "m", false, c.device.bias_channel_length),
        SPINPAT_Q("layout.stage_channel_length", "m", false, c.device.stage_channel_length),

        SPINPAT_I("detector.image_rows", c.detector.image_rows),
        SPINPAT_I("detector.image_cols", c.detector.image_cols),
        SPINPAT_I("detector.training_count", c.detector.training_count),
        SPINPAT_I("detector.cell_rows", c.detector.cell_rows),
        SPINPAT_I("detector.cell_cols", c.detector.cell_cols),
        SPINPAT_I("detector.pixel_sign", c.detector.pixel_sign),
        SPINPAT_I("detector.row_sign", c.detector.row_sign),
        SPINPAT_I("detector.cell_sign", c.detector.cell_sign),
        SPINPAT_I("detector.xnor_initial", c.detector.xnor_initial),
        SPINPAT_I("detector.pixel_initial", c.detector.pixel_initial),
        SPINPAT_I("detector.row_initial", c.detector.row_initial),
        SPINPAT_I("detector.cell_initial", c.detector.cell_initial),
        SPINPAT_Q("detector.pixel_phase", "s", false, c.detector.pixel_phase),
        SPINPAT_Q("detector.row_phase", "s", false, c.detector.row_phase),
        SPINPAT_Q("detector.cell_phase", "s", false, c.detector.cell_phase),
        SPINPAT_Q("detector.row_channel_length", "m", false, c.detector.row_channel_length),
        SPINPAT_B("detector.cell_gate", c.detector.cell_gate),

        SPINPAT_I("experiments.fanin_seeds", c.experiments.fanin_seeds),
        SPINPAT_Q("experiments.fanin_t_end", "s", false, c.experiments.fanin_t_end),
        Field{"experiments.sweep_voltages", Kind::QuantityList, "V", false,
              [](Config& c, const json& v) { c.experiments.sweep_voltages = v.get<std::vector<double>>(); },
              [](const Config& c) -> json { return c.experiments.sweep_voltages; }},
        SPINPAT_I("experiments.sweep_seeds", c.experiments.sweep_seeds),
        SPINPAT_I("experiments.compare_seeds", c.experiments.compare_seeds),
        SPINPAT_I("experiments.detect_seeds", c.experiments.detect_seeds),
        SPINPAT_Q("experiments.detect_window", "s", false, c.experiments.detect_window),
        SPINPAT_I("experiments.calibration_seeds", c.experiments.calibration_seeds),
        SPINPAT_I("experiments.prop1_max_p", c.experiments.prop1_max_p),
        SPINPAT_Q("experiments.xnor_t_end", "s", false, c.experiments.xnor_t_end),
        SPINPAT_Q("experiments.equivalence_t_end", "s", false, c.experiments.equivalence_t_end),

        SPINPAT_P("fixtures.compare3x3_pattern", c.experiments.compare3x3_pattern),
        SPINPAT_P("fixtures.compare3x3_input", c.experiments.compare3x3_input),
        Field{"fixtures.training", Kind::PathList, "", false,
              [](Config& c, const json& v) {
                  c.experiments.training.clear();
                  for (const auto& p : v) c.experiments.training.emplace_back(p.get<std::string>());
              },
              [](const Config& c) -> json {
                  json out = json::array();
                  for (const auto& p : c.experiments.training) out.push_back(p.generic_string());
                  return out;
              }},
        SPINPAT_P("fixtures.detection_input", c.experiments.detection_input),
        SPINPAT_P("fixtures.training_mean", c.experiments.training_mean),
    };
    return f;
}

#undef SPINPAT_Q
#undef SPINPAT_I
#undef SPINPAT_B
#undef SPINPAT_P

const Field* find_field(const std::string& path) {
    for (const auto& f : fields())
        if (f.path == path) return &f;
    return nullptr;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
    return parts;
}

const json* lookup(const json& doc, const std::string& path) {
    const json* node = &doc;
    for (const auto& part : split_path(path)) {
        if (!node->is_object() || !node->contains(part)) return nullptr;
        node = &(*node)[part];
    }
    return node;
}

bool is_quantity_object(const json& v) { return v.is_object() && v.contains("value"); }

void collect_leaves(const json& node, const std::string& prefix, std::vector<std::string>& out) {
    if (node.is_object() && !is_quantity_object(node) && !(node.contains("values") && node.contains("unit"))) {
        for (auto it = node.begin(); it != node.end(); ++it) {
            collect_leaves(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
        }
        return;
    }
    out.push_back(prefix);
}

json parse_value_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
    }
    // "5 mV" style quantity.
    std::istringstream in(text);
    double number = 0.0;
    if (in >> number) {
        std::string unit;
        std::getline(in >> std::ws, unit);
        if (!unit.empty()) return json{{"value", number}, {"unit", unit}};
    }
    return text;
}

void apply_override(json& doc, const Override& o) {
    const Field* field = find_field(o.path);
    if (!field) throw Error(ErrorKind::Config, "unknown key '" + o.path + "' in override");
    json* node = &doc;
    for (const auto& part : split_path(o.path)) {
        if (!node->is_object()) throw Error(ErrorKind::Config, "cannot override '" + o.path + "'");
        node = &(*node)[part];
    }
    const json value = parse_value_text(o.value);
    if (field->kind == Kind::Quantity && is_quantity_object(*node) && !is_quantity_object(value)) {
        (*node)["value"] = value;
    } else if (field->kind == Kind::QuantityList && node->is_object() && value.is_array()) {
        (*node)["values"] = value;
    } else {
        *node = value;
    }
}

std::string location(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

double quantity(const json& v, const Field& f, std::vector<std::string>& notes) {
    double number = 0.0;
    std::string unit = f.unit == "1" ? "" : f.unit;
    if (v.is_number()) {
        number = v.get<double>();
    } else if (is_quantity_object(v) && v["value"].is_number()) {
        number = v["value"].get<double>();
        if (v.contains("unit")) {
            if (!v["unit"].is_string()) throw Error(ErrorKind::Config, "field '" + f.path + "': unit must be a string");
            unit = v["unit"].get<std::string>();
        }
    } else {
        throw Error(ErrorKind::Config, "field '" + f.path + "': expected a number or {value, unit}");
    }
    std::string note;
    const double si = to_si(number, unit, f.unit, &note);
    if (!note.empty()) notes.push_back(f.path + ": " + note);
    return si;
}

void check_consistency(Config& c, const json& doc) {
    const auto& ch = c.device.channel;
    std::vector<std::string> sink;
    if (const json* a = lookup(doc, "channel.A")) {
        const double area = quantity(*a, *find_field("channel.A"), sink);
        if (std::abs(area - ch.area()) > 1e-6 * ch.area()) {
            spdlog::warn("channel.A = {:g} m^2 differs from W_int*H_int = {:g} m^2; using W_int*H_int", area, ch.area());
        }
    }
    if (std::abs(ch.aspect_ratio - ch.thickness / ch.width) > 1e-6 * ch.aspect_ratio) {
        spdlog::warn("channel.AR = {:g} differs from H_int/W_int = {:g}", ch.aspect_ratio, ch.thickness / ch.width);
    }
}

}  // namespace

double to_si(double value, const std::string& unit, const std::string& canonical, std::string* note) {
    const auto& table = unit_table();
    const auto group = table.find(canonical);
    if (group == table.end()) throw Error(ErrorKind::Config, "unknown canonical unit '" + canonical + "'");
    const auto it = group->second.find(unit);
    if (it == group->second.end()) {
        throw Error(ErrorKind::Config, "unit '" + unit + "' is not convertible to '" + canonical + "'");
    }
    if (note) *note = it->second.note ? it->second.note : "";
    return value * it->second.factor;
}

Override parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorKind::Config, "override '" + text + "' is not of the form key=value");
    }
    return {text.substr(0, eq), text.substr(eq + 1)};
}

Config config_from_json(const json& source, const std::filesystem::path& base_dir,
                        const std::vector<Override>& overrides) {
    if (!source.is_object()) throw Error(ErrorKind::Config, "parameter document must be an object");
    json doc = source;
    for (const auto& o : overrides) apply_override(doc, o);

    std::vector<std::string> leaves;
    collect_leaves(doc, "", leaves);
    for (const auto& leaf : leaves) {
        if (leaf.empty() || leaf.front() == '_' || leaf.find("._") != std::string::npos) continue;  // comments
        if (!find_field(leaf)) throw Error(ErrorKind::Config, "unknown key '" + leaf + "'");
    }

    Config c;
    for (const auto& f : fields()) {
        const json* v = lookup(doc, f.path);
        if (!v) {
            if (f.required) throw Error(ErrorKind::Config, "missing required field '" + f.path + "'");
            continue;
        }
        try {
            switch (f.kind) {
                case Kind::Quantity:
                    f.set(c, quantity(*v, f, c.notes));
                    break;
                case Kind::QuantityList: {
                    std::vector<double> values;
                    const json& list = v->is_object() ? (*v)["values"] : *v;
                    const std::string unit = v->is_object() ? v->value("unit", f.unit) : f.unit;
                    if (!list.is_array()) throw Error(ErrorKind::Config, "expected a list");
                    for (const auto& x : list) values.push_back(to_si(x.get<double>(), unit, f.unit));
                    f.set(c, values);
                    break;
                }
                case Kind::Integer:
                    if (!v->is_number_integer()) throw Error(ErrorKind::Config, "expected an integer");
                    f.set(c, *v);
                    break;
                case Kind::Boolean:
                    if (!v->is_boolean()) throw Error(ErrorKind::Config, "expected true or false");
                    f.set(c, *v);
                    break;
                case Kind::Path: {
                    if (!v->is_string()) throw Error(ErrorKind::Config, "expected a path string");
                    const std::filesystem::path p(v->get<std::string>());
                    f.set(c, (p.is_relative() ? base_dir / p : p).lexically_normal().string());
                    break;
                }
                case Kind::PathList: {
                    if (!v->is_array()) throw Error(ErrorKind::Config, "expected a list of paths");
                    json resolved = json::array();
                    for (const auto& x : *v) {
                        const std::filesystem::path p(x.get<std::string>());
                        resolved.push_back((p.is_relative() ? base_dir / p : p).lexically_normal().string());
                    }
                    f.set(c, resolved);
                    break;
                }
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Config) throw;
            const std::string what = e.what();
            const std::string prefix = std::string(to_string(ErrorKind::Config)) + ": ";
            const std::string message = what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
            if (message.find(f.path) != std::string::npos) throw;
            throw Error(ErrorKind::Config, "field '" + f.path + "': " + message);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Config, "field '" + f.path + "': " + e.what());
        }
    }
    for (const auto& note : c.notes) spdlog::info("unit reinterpretation, {}", note);
    check_consistency(c, doc);

    c.detector.supply = c.device.supply_voltage;
    c.detector.fan_in_cap = c.device.fan_in_cap;
    c.device.magnet_geometry.validate();
    c.device.magnet_material.validate();
    c.device.channel.validate();
    c.device.interface.validate();
    c.device.size_effects.validate();
    c.detector.validate();
    return c;
}

Config load_config(const std::filesystem::path& path, const std::vector<Override>& overrides) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open parameter file '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, path.string() + ":" + location(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
    }
    return config_from_json(doc, path.parent_path(), overrides);
}

json describe(const Config& c) {
    json out;
    for (const auto& f : fields()) {
        json* node = &out;
        for (const auto& part : split_path(f.path)) node = &(*node)[part];
        *node = f.get(c);
    }
    const auto& d = c.device;
    out["derived"] = {
        {"lambda_s_m", spin_diffusion_length(d.channel)},
        {"barrier_energy_J", barrier_energy(d.magnet_material, d.magnet_geometry)},
        {"theta0_rad", d.theta0()},
        {"critical_spin_current_A", d.critical_current()},
        {"interface_polarization", d.interface.polarization()},
        {"anisotropy_field_A_per_m", anisotropy_field(d.magnet_material, d.constants)},
        {"channel_conductivity_S_per_m", d.channel_material().conductivity},
    };
    out["unit_notes"] = c.notes;
    return out;
}

}  // namespace spinpat
