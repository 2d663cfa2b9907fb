#include "spinpat/trace.hpp"

#include <ostream>

#include <fmt/format.h>

#include "spinpat/errors.hpp"

namespace spinpat {

std::size_t SimulationTrace::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < magnet_ids.size(); ++i) {
        if (magnet_ids[i] == id) return i;
    }
    throw Error(ErrorKind::Lookup, "unknown magnet id '" + id + "'");
}

const std::vector<Vec3>& SimulationTrace::series_of(const std::string& id) const {
    return series[index_of(id)];
}

void SimulationTrace::write_csv(std::ostream& out) const {
    out << "time_s";
    for (const auto& id : magnet_ids) out << ',' << id << "_mx," << id << "_my," << id << "_mz";
    out << '\n';
    for (std::size_t k = 0; k < times.size(); ++k) {
        out << fmt::format("{:.6e}", times[k]);
        for (const auto& s : series) {
            const Vec3& m = s[k];
            out << fmt::format(",{:.9f},{:.9f},{:.9f}", m.x, m.y, m.z);
        }
        out << '\n';
    }
}

}  // namespace spinpat
