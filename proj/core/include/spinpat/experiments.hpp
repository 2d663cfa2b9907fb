#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spinpat/config.hpp"

namespace spinpat {

struct Check {
    std::string name;
    bool passed{false};
    std::string detail;
};

struct ExperimentOutput {
    std::string experiment;
    nlohmann::json report;
    std::map<std::string, std::string> files;  // file name -> contents, report.json excluded
    std::vector<Check> checks;

    bool passed() const;
};

struct RunContext {
    Config config;
    std::uint64_t seed{0};
    int threads{1};
};

const std::vector<std::string>& experiment_names();

ExperimentOutput run_experiment(const std::string& name, const RunContext& ctx);

ExperimentOutput run_fanin_study(const RunContext& ctx);
ExperimentOutput run_voltage_sweep(const RunContext& ctx);
ExperimentOutput run_xnor_table(const RunContext& ctx);
ExperimentOutput run_compare3x3(const RunContext& ctx);
ExperimentOutput run_train_detect9x9(const RunContext& ctx);
ExperimentOutput run_prop1(const RunContext& ctx);
ExperimentOutput run_calibrate_tau0(const RunContext& ctx);
ExperimentOutput run_comparator_equivalence(const RunContext& ctx);

// Writes report.json and every file into `dir`, each through a temporary file and a rename.
void write_outputs(const ExperimentOutput& output, const std::filesystem::path& dir);

// Ratio of the spin current a majority gate delivers into its output to the critical current.
// The output is placed perpendicular to the easy axis so the whole drive is transverse.
double majority_overdrive(int fan_in, int aligned, double voltage, const DeviceParams& device);

struct DelayStats {
    int runs{0};
    int switched{0};
    std::optional<double> q1;
    std::optional<double> median;
    std::optional<double> q3;
};

DelayStats delay_stats(const std::vector<std::optional<double>>& delays);

// Seeded switching delays of the output of a fan-in N gate with `aligned` inputs at 1 and the
// output starting at 0, copying supply of magnitude `voltage`.
std::vector<std::optional<double>> majority_delays(int fan_in, int aligned, double voltage, double temperature,
                                                   int seeds, std::uint64_t master_seed, double t_end,
                                                   const DeviceParams& device, int threads = 1);

struct EquivalenceCase {
    std::vector<int> training;
    int input{0};
    int expected{0};  // 1 when the input equals the training majority
    int standard{-1};  // settled pixel value, -1 when undecided
    int comparator_first{-1};
};

// Every training/input assignment through both pixel comparators, noise off.
std::vector<EquivalenceCase> comparator_equivalence(int p, const DeviceParams& device, double t_end, int threads = 1);

// Least-squares fit y = a * x through the origin; returns {a, R^2}.
std::pair<double, double> fit_proportional(const std::vector<double>& x, const std::vector<double>& y);

// Image pixels that differ from the training mean in exactly one training image.
std::vector<std::pair<int, int>> single_user_pixels(const TrainingSet& training);

}  // namespace spinpat
