#pragma once

#include <filesystem>
#include <string>

#include "spinpat/config.hpp"

namespace spinpat::testing {

inline std::filesystem::path source_path(const std::string& relative) {
    return std::filesystem::path(SPINPAT_SOURCE_DIR) / relative;
}

inline const Config& default_config() {
    static const Config config = load_config(source_path("config/default.json"));
    return config;
}

inline std::string fixture(const std::string& name) { return source_path("data/fixtures/" + name).string(); }

}  // namespace spinpat::testing
