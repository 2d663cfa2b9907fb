#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spinpat/vec3.hpp"

namespace spinpat {

struct SwitchingEvent {
    std::string magnet_id;
    double time{0.0};
    int new_sign{0};
};

struct SimulationTrace {
    double sample_period{0.0};
    std::vector<double> times;
    std::vector<std::string> magnet_ids;
    std::vector<std::vector<Vec3>> series;
    std::vector<SwitchingEvent> events;
    std::uint64_t seed{0};
    double wall_time_s{0.0};

    std::size_t index_of(const std::string& id) const;
    const std::vector<Vec3>& series_of(const std::string& id) const;
    bool empty() const { return times.empty(); }

    // Columns time_s,<id>_mx,<id>_my,<id>_mz,...
    void write_csv(std::ostream& out) const;
};

}  // namespace spinpat
