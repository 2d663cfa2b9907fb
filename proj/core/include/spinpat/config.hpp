#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spinpat/circuit.hpp"
#include "spinpat/detector.hpp"

namespace spinpat {

// Knobs of the experiment runners that are not device physics.
struct ExperimentSettings {
    int fanin_seeds{30};
    double fanin_t_end{3e-9};
    std::vector<double> sweep_voltages{5e-3, 10e-3, 15e-3, 20e-3};
    int sweep_seeds{30};
    int compare_seeds{20};
    int detect_seeds{20};
    double detect_window{2e-9};
    int calibration_seeds{30};
    int prop1_max_p{7};
    double xnor_t_end{3e-9};
    double equivalence_t_end{5e-9};

    std::filesystem::path compare3x3_pattern;
    std::filesystem::path compare3x3_input;
    std::vector<std::filesystem::path> training;
    std::filesystem::path detection_input;
    std::filesystem::path training_mean;  // optional cross-check of the computed mean
};

struct Config {
    DeviceParams device;
    DetectorConfig detector;
    ExperimentSettings experiments;
    // Unit reinterpretations applied while loading, one line each.
    std::vector<std::string> notes;
};

// A "dot.path=value" override. The value keeps the unit written in the file.
struct Override {
    std::string path;
    std::string value;
};

Override parse_override(const std::string& text);

// Parses a parameter document. Relative fixture paths resolve against `base_dir`.
Config config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                        const std::vector<Override>& overrides = {});

Config load_config(const std::filesystem::path& path, const std::vector<Override>& overrides = {});

// Converts `value` given in `unit` to SI for a field of the given canonical unit.
// Returns the factor-applied value; `note` is filled when the unit needed reinterpretation.
double to_si(double value, const std::string& unit, const std::string& canonical, std::string* note = nullptr);

// Resolved parameter set in SI plus derived quantities, for reports.
nlohmann::json describe(const Config& config);

}  // namespace spinpat
