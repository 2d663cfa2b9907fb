#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spinpat/circuit.hpp"
#include "spinpat/netlist.hpp"
#include "spinpat/recognition.hpp"

namespace spinpat {

// Stage order used for supply phases.
enum class Stage { Xnor = 0, Pixel = 1, Row = 2, Cell = 3 };

struct DetectorConfig {
    int image_rows{3};
    int image_cols{3};
    int training_count{1};
    int cell_rows{3};
    int cell_cols{3};
    int fan_in_cap{5};
    double supply{5e-3};

    // Supply sign of each logic stage: -1 copies the majority, +1 inverts it.
    int pixel_sign{-1};
    int row_sign{-1};
    int cell_sign{-1};
    // Logic value each stage output starts from.
    int xnor_initial{0};
    int pixel_initial{0};
    int row_initial{0};
    int cell_initial{0};
    // Supply turn-on time of each stage.
    double pixel_phase{0.0};
    double row_phase{0.0};
    double cell_phase{0.0};

    double row_channel_length{0.0};  // 0 selects the device local channel length
    bool cell_gate{true};

    void validate() const;
    // Value a row output reaches when its cluster is mainly similar.
    int row_match_value() const { return row_sign < 0 ? 1 : 0; }
};

// Magnet naming inside one cell; r and c are 0-based, k indexes training images.
std::string training_magnet(int r, int c, int k);
std::string input_magnet(int r, int c);
std::string complement(const std::string& id);

Netlist build_pixel_comparator_standard(int p, const DeviceParams& device);
Netlist build_pixel_comparator_first(int p, const DeviceParams& device);

struct SmartDetectorCell {
    DetectorConfig config;
    Netlist netlist;
    std::vector<std::vector<std::string>> pixels;  // [r][c] Pixel magnet ids
    std::vector<std::string> rows;
    std::string cell;  // empty without a cell gate
    std::map<std::string, int> stored;
    bool learned{false};
};

SmartDetectorCell build_smart_detector_cell(const DetectorConfig& config, const DeviceParams& device);

// Writes each training pixel (and its complement) into the stored magnets.
SmartDetectorCell learn(SmartDetectorCell cell, const TrainingSet& training);
TrainingSet stored_training(const SmartDetectorCell& cell);

SupplySchedule detection_schedule(const SmartDetectorCell& cell);
std::map<std::string, int> detection_bits(const SmartDetectorCell& cell, const BinaryImage& input);

struct DetectOptions {
    std::uint64_t seed{0};
    double temperature{300.0};
    double t_end{2e-9};
    double window{2e-9};  // a row that has not switched by then counts as no-switch
    std::vector<std::string> record;  // empty records every magnet
    bool keep_trace{false};
};

struct RowOutcome {
    std::optional<double> delay;
    StrengthClass strength;
};

struct CellOutcome {
    std::vector<RowOutcome> rows;
    Logic cell_gate{Logic::Undecided};
    std::optional<double> decision_time;
    double power{0.0};
    std::optional<SimulationTrace> trace;
};

CellOutcome detect_cell(const SmartDetectorCell& cell, const BinaryImage& input, const DeviceParams& device,
                        const CalibrationTable& table, const DetectOptions& options);

struct TileLayout {
    int image_rows{0};
    int image_cols{0};
    int cell_rows{0};
    int cell_cols{0};
    std::vector<std::pair<int, int>> origins;            // top-left pixel of each cell
    std::vector<std::vector<ClusterIndex>> clusters;      // [cell][row]
    BinaryImage block(const BinaryImage& image, std::size_t cell) const;
};

TileLayout tile_detectors(int image_rows, int image_cols, int cell_rows = 3, int cell_cols = 3);

struct ClusterRecord {
    ClusterIndex cluster;
    std::optional<double> delay;
    int klass{0};           // classified match count, 0 for no switch
    int expected_class{0};  // oracle match count when a switch is expected, else 0
    int match_count{0};
};

struct CellVerdict {
    std::size_t cell{0};
    int rows_switched{0};
    Logic cell_gate{Logic::Undecided};
};

struct DetectionReport {
    std::vector<ClusterRecord> clusters;
    std::vector<CellVerdict> cells;
    std::optional<double> decision_time;
    double power{0.0};
    double area{0.0};
    std::uint64_t seed{0};
};

struct DetectRunOptions {
    DetectOptions cell;  // the per-cell seed is derived from cell.seed and the cell index
    int threads{1};
};

// Tiles the image into cells, learns each block, and evaluates the cells independently.
DetectionReport detect(const DetectorConfig& config, const DeviceParams& device, const TrainingSet& training,
                       const BinaryImage& input, const CalibrationTable& table, const DetectRunOptions& options,
                       std::vector<CellOutcome>* outcomes = nullptr);

nlohmann::json to_json(const DetectionReport& report);

// Median row delays for each match count, measured on a single cell with synthetic blocks.
CalibrationTable calibrate_cell(const DetectorConfig& config, const DeviceParams& device, int seeds,
                                double temperature, std::uint64_t master_seed, int threads = 1);

}  // namespace spinpat
