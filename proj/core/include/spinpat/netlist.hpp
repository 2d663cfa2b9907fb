#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spinpat/magnetodynamics.hpp"
#include "spinpat/transport_params.hpp"

namespace spinpat {

enum class MagnetRole { Input, Internal, Output };
enum class ContactKind { Drive, Sense };

struct MagnetSpec {
    std::string id;
    MagnetRole role{MagnetRole::Internal};
    std::optional<MagnetGeometry> geometry;
    std::optional<MagnetMaterial> material;
};

// A channel between two named nodes. Lengths in metres.
struct ChannelSpec {
    std::string id;
    std::string from;
    std::string to;
    double length{212.5e-9};
    double width{50e-9};
    double thickness{100e-9};
};

struct InterfaceSpec {
    std::string id;
    std::string magnet;
    std::string node;
    ContactKind kind{ContactKind::Sense};
    std::optional<InterfaceParams> params;
};

// Supply terminal on a drive interface. The applied voltage is sign * |V|; -1 copies, +1 inverts.
// The return path to ground is a lead of the given dimensions attached at the interface node.
struct SupplySpec {
    std::string id;
    std::string interface;
    int sign{-1};
    int phase{0};
    double ground_length{100e-9};
    double ground_width{50e-9};
    double ground_thickness{100e-9};
};

struct Netlist {
    std::vector<MagnetSpec> magnets;
    std::vector<ChannelSpec> channels;
    std::vector<InterfaceSpec> interfaces;
    std::vector<SupplySpec> supplies;
    std::map<std::string, std::string> pins;

    const MagnetSpec& magnet(const std::string& id) const;
    MagnetSpec& magnet(const std::string& id);
    bool has_magnet(const std::string& id) const;
    std::size_t magnet_index(const std::string& id) const;
    const std::string& pin(const std::string& name) const;

    // Ids unique, references resolve, drive contacts supplied, outputs reachable from inputs.
    void validate() const;

    // Appends `other` with every id and node prefixed. Magnets named in `aliases` are not
    // copied; references to them resolve to the mapped existing magnet. Pins are not copied.
    void append(const Netlist& other, const std::string& prefix,
                const std::map<std::string, std::string>& aliases = {});
};

std::string to_string(MagnetRole role);
std::string to_string(ContactKind kind);

nlohmann::json to_json(const Netlist& netlist);
Netlist netlist_from_json(const nlohmann::json& j);

}  // namespace spinpat
