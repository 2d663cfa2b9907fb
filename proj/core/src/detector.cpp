#include "spinpat/detector.hpp"

#include <algorithm>
#include <cmath>

#include "spinpat/errors.hpp"
#include "spinpat/parallel.hpp"
#include "spinpat/rng.hpp"

namespace spinpat {

namespace {

std::string idx(int r, int c) { return std::to_string(r + 1) + std::to_string(c + 1); }

void check_comparator_fan_in(int p, const DeviceParams& device) {
    if (p < 1 || p % 2 == 0) {
        throw Error(ErrorKind::InvalidFanIn, "training count must be odd and positive, got " + std::to_string(p));
    }
    if (p > device.fan_in_cap) {
        throw Error(ErrorKind::FanInCap, "training count " + std::to_string(p) + " exceeds the fan-in cap");
    }
}

void add_dual_rail_input(Netlist& n, const std::string& id) {
    n.magnets.push_back({id, MagnetRole::Input, {}, {}});
    n.magnets.push_back({complement(id), MagnetRole::Input, {}, {}});
}

void set_role(Netlist& n, const std::string& id, MagnetRole role) {
    for (auto& m : n.magnets) {
        if (m.id == id) m.role = role;
    }
}

// Adds a drive contact on `source` feeding `sense_node`.
void add_driver(Netlist& n, const std::string& source, const std::string& tag, const std::string& sense_node,
                int sign, int phase, double length, const DeviceParams& device) {
    const std::string node = source + "." + tag;
    n.interfaces.push_back({node + "drv", source, node, ContactKind::Drive, {}});
    n.supplies.push_back(make_supply(node + "v", node + "drv", sign, device, phase));
    n.channels.push_back(make_channel(node + "ch", node, sense_node, length, device));
}

void add_sense(Netlist& n, const std::string& id, MagnetRole role) {
    n.magnets.push_back({id, role, {}, {}});
    n.interfaces.push_back({id + ".sns", id, id + ".s", ContactKind::Sense, {}});
}

// Comparator-first pixel: one XNOR per training magnet against the shared input magnet,
// then a majority over the XNOR outputs. Returns the Pixel magnet id.
std::string add_comparator_first(Netlist& n, const std::string& prefix, const std::vector<std::string>& training,
                                 const std::string& input, int pixel_sign, const DeviceParams& device,
                                 const Netlist& xnor) {
    std::vector<std::string> outs;
    for (std::size_t k = 0; k < training.size(); ++k) {
        const std::string px = prefix + "x" + std::to_string(k + 1) + ".";
        n.append(xnor, px,
                 {{"A", training[k]}, {"Abar", complement(training[k])}, {"B", input}, {"Bbar", complement(input)}});
        outs.push_back(px + "S");
    }
    if (outs.size() == 1) return outs.front();
    const std::string pix = prefix + "pix";
    for (const auto& s : outs) {
        set_role(n, s, MagnetRole::Internal);
        add_driver(n, s, "p", pix + ".s", pixel_sign, static_cast<int>(Stage::Pixel), device.stage_channel_length,
                   device);
    }
    add_sense(n, pix, MagnetRole::Output);
    return pix;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

void DetectorConfig::validate() const {
    if (training_count < 1 || training_count % 2 == 0) {
        throw Error(ErrorKind::InvalidTrainingSet, "training count must be odd, got " + std::to_string(training_count));
    }
    if (training_count > fan_in_cap) {
        throw Error(ErrorKind::FanInCap, "training count exceeds the fan-in cap");
    }
    if (cell_rows != 3 || cell_cols != 3) {
        throw Error(ErrorKind::InvalidParameter, "only 3x3 detector cells are supported");
    }
    if (image_rows < 1 || image_cols < 1 || image_rows % cell_rows || image_cols % cell_cols) {
        throw Error(ErrorKind::Partition, "cell dimensions must divide the image dimensions");
    }
    for (int s : {pixel_sign, row_sign, cell_sign}) {
        if (s != 1 && s != -1) throw Error(ErrorKind::InvalidParameter, "stage supply signs must be +1 or -1");
    }
    for (int v : {xnor_initial, pixel_initial, row_initial, cell_initial}) {
        if (v != 0 && v != 1) throw Error(ErrorKind::InvalidParameter, "initial conditions must be 0 or 1");
    }
    if (!(supply > 0.0)) throw Error(ErrorKind::InvalidParameter, "supply must be positive");
    for (double t : {pixel_phase, row_phase, cell_phase}) {
        if (!(t >= 0.0)) throw Error(ErrorKind::InvalidParameter, "phase start times must be non-negative");
    }
    if (row_channel_length < 0.0) throw Error(ErrorKind::InvalidParameter, "row channel length must be >= 0");
}

std::string training_magnet(int r, int c, int k) { return "P" + idx(r, c) + ".T" + std::to_string(k + 1); }
std::string input_magnet(int r, int c) { return "P" + idx(r, c) + ".Q"; }
std::string complement(const std::string& id) { return id + "bar"; }

Netlist build_pixel_comparator_standard(int p, const DeviceParams& device) {
    check_comparator_fan_in(p, device);
    Netlist n;
    for (int k = 0; k < p; ++k) add_dual_rail_input(n, "T" + std::to_string(k + 1));
    add_dual_rail_input(n, "Q");
    // Mean and its complement, each a copying majority over one rail of the training magnets.
    for (const std::string mean : {"M", "Mbar"}) {
        for (int k = 0; k < p; ++k) {
            const std::string t = "T" + std::to_string(k + 1);
            add_driver(n, mean == "M" ? t : complement(t), "m", mean + ".s", -1, 0, device.local_channel_length,
                       device);
        }
        add_sense(n, mean, MagnetRole::Internal);
    }
    Netlist x = build_xnor_cell(device);
    for (auto& s : x.supplies) s.phase = 1;
    n.append(x, "x.", {{"A", "M"}, {"Abar", "Mbar"}, {"B", "Q"}, {"Bbar", "Qbar"}});
    for (int k = 0; k < p; ++k) {
        const std::string t = "T" + std::to_string(k + 1);
        n.pins["t" + std::to_string(k + 1)] = t;
        n.pins["t" + std::to_string(k + 1) + "_bar"] = complement(t);
    }
    n.pins["q"] = "Q";
    n.pins["q_bar"] = "Qbar";
    n.pins["mean"] = "M";
    n.pins["mean_bar"] = "Mbar";
    n.pins["pixel"] = "x.S";
    n.validate();
    return n;
}

Netlist build_pixel_comparator_first(int p, const DeviceParams& device) {
    check_comparator_fan_in(p, device);
    Netlist n;
    std::vector<std::string> training;
    for (int k = 0; k < p; ++k) {
        training.push_back("T" + std::to_string(k + 1));
        add_dual_rail_input(n, training.back());
        n.pins["t" + std::to_string(k + 1)] = training.back();
        n.pins["t" + std::to_string(k + 1) + "_bar"] = complement(training.back());
    }
    add_dual_rail_input(n, "Q");
    n.pins["q"] = "Q";
    n.pins["q_bar"] = "Qbar";
    n.pins["pixel"] = add_comparator_first(n, "", training, "Q", -1, device, build_xnor_cell(device));
    n.validate();
    return n;
}

SmartDetectorCell build_smart_detector_cell(const DetectorConfig& config, const DeviceParams& device) {
    DetectorConfig local = config;
    local.image_rows = config.cell_rows;
    local.image_cols = config.cell_cols;
    local.validate();
    SmartDetectorCell cell;
    cell.config = config;
    const Netlist xnor = build_xnor_cell(device);
    const double row_length =
        config.row_channel_length > 0.0 ? config.row_channel_length : device.local_channel_length;
    Netlist& n = cell.netlist;
    cell.pixels.assign(config.cell_rows, std::vector<std::string>(config.cell_cols));
    for (int r = 0; r < config.cell_rows; ++r) {
        for (int c = 0; c < config.cell_cols; ++c) {
            std::vector<std::string> training;
            for (int k = 0; k < config.training_count; ++k) {
                training.push_back(training_magnet(r, c, k));
                add_dual_rail_input(n, training.back());
            }
            add_dual_rail_input(n, input_magnet(r, c));
            cell.pixels[r][c] = add_comparator_first(n, "P" + idx(r, c) + ".", training, input_magnet(r, c),
                                                     config.pixel_sign, device, xnor);
        }
    }
    for (int r = 0; r < config.cell_rows; ++r) {
        const std::string row = "R" + std::to_string(r + 1);
        for (int c = 0; c < config.cell_cols; ++c) {
            set_role(n, cell.pixels[r][c], MagnetRole::Internal);
            add_driver(n, cell.pixels[r][c], "r", row + ".s", config.row_sign, static_cast<int>(Stage::Row),
                       row_length, device);
        }
        add_sense(n, row, MagnetRole::Output);
        cell.rows.push_back(row);
    }
    if (config.cell_gate) {
        cell.cell = "cell";
        for (const auto& row : cell.rows) {
            add_driver(n, row, "c", "cell.s", config.cell_sign, static_cast<int>(Stage::Cell), row_length, device);
        }
        add_sense(n, cell.cell, MagnetRole::Output);
    }
    for (std::size_t r = 0; r < cell.rows.size(); ++r) n.pins["row" + std::to_string(r + 1)] = cell.rows[r];
    if (config.cell_gate) n.pins["cell"] = cell.cell;
    n.validate();
    return cell;
}

SmartDetectorCell learn(SmartDetectorCell cell, const TrainingSet& training) {
    const auto& cfg = cell.config;
    if (static_cast<int>(training.size()) != cfg.training_count) {
        throw Error(ErrorKind::DimensionMismatch, "cell expects " + std::to_string(cfg.training_count) +
                                                      " training images, got " + std::to_string(training.size()));
    }
    cell.stored.clear();
    for (int k = 0; k < cfg.training_count; ++k) {
        const auto& img = training[k];
        if (img.rows() != cfg.cell_rows || img.cols() != cfg.cell_cols) {
            throw Error(ErrorKind::DimensionMismatch, "training image does not match the cell dimensions");
        }
        for (int r = 0; r < cfg.cell_rows; ++r) {
            for (int c = 0; c < cfg.cell_cols; ++c) {
                const int bit = img.at(r, c) ? 1 : 0;
                cell.stored[training_magnet(r, c, k)] = bit;
                cell.stored[complement(training_magnet(r, c, k))] = 1 - bit;
            }
        }
    }
    cell.learned = true;
    return cell;
}

TrainingSet stored_training(const SmartDetectorCell& cell) {
    if (!cell.learned) throw Error(ErrorKind::State, "cell has not been trained");
    const auto& cfg = cell.config;
    TrainingSet out;
    for (int k = 0; k < cfg.training_count; ++k) {
        BinaryImage img(cfg.cell_rows, cfg.cell_cols);
        for (int r = 0; r < cfg.cell_rows; ++r)
            for (int c = 0; c < cfg.cell_cols; ++c)
                img.set(r, c, static_cast<std::uint8_t>(cell.stored.at(training_magnet(r, c, k))));
        out.push_back(std::move(img));
    }
    return out;
}

SupplySchedule detection_schedule(const SmartDetectorCell& cell) {
    const auto& c = cell.config;
    return SupplySchedule::phased(cell.netlist, c.supply, {0.0, c.pixel_phase, c.row_phase, c.cell_phase});
}

std::map<std::string, int> detection_bits(const SmartDetectorCell& cell, const BinaryImage& input) {
    if (!cell.learned) throw Error(ErrorKind::State, "cell has not been trained");
    const auto& cfg = cell.config;
    if (input.rows() != cfg.cell_rows || input.cols() != cfg.cell_cols) {
        throw Error(ErrorKind::DimensionMismatch, "input block does not match the cell dimensions");
    }
    std::map<std::string, int> bits = cell.stored;
    for (int r = 0; r < cfg.cell_rows; ++r) {
        for (int c = 0; c < cfg.cell_cols; ++c) {
            const int bit = input.at(r, c) ? 1 : 0;
            bits[input_magnet(r, c)] = bit;
            bits[complement(input_magnet(r, c))] = 1 - bit;
        }
    }
    auto ends_with = [](const std::string& s, const std::string& tail) {
        return s.size() >= tail.size() && s.compare(s.size() - tail.size(), tail.size(), tail) == 0;
    };
    for (const auto& m : cell.netlist.magnets) {
        if (bits.count(m.id)) continue;
        int v = 0;
        if (ends_with(m.id, ".Cbar")) v = 1;
        else if (ends_with(m.id, ".C") || ends_with(m.id, ".K")) v = 0;
        else if (ends_with(m.id, ".S")) v = cfg.xnor_initial;
        else if (ends_with(m.id, ".pix")) v = cfg.pixel_initial;
        else if (m.id == cell.cell) v = cfg.cell_initial;
        else if (std::find(cell.rows.begin(), cell.rows.end(), m.id) != cell.rows.end()) v = cfg.row_initial;
        else throw Error(ErrorKind::State, "no initial condition for magnet '" + m.id + "'");
        bits[m.id] = v;
    }
    return bits;
}

CellOutcome detect_cell(const SmartDetectorCell& cell, const BinaryImage& input, const DeviceParams& device,
                        const CalibrationTable& table, const DetectOptions& options) {
    const auto bits = detection_bits(cell, input);
    SimulationOptions sim;
    sim.t_end = options.t_end;
    sim.dt = device.dt;
    sim.sample_interval = device.sample_interval;
    sim.temperature = options.temperature;
    sim.seed = options.seed;
    sim.settle_threshold = device.settle_threshold;
    sim.record = options.record;
    if (!sim.record.empty() && !cell.cell.empty() &&
        std::find(sim.record.begin(), sim.record.end(), cell.cell) == sim.record.end()) {
        sim.record.push_back(cell.cell);
    }
    const auto schedule = detection_schedule(cell);
    const auto initial = make_initial_states(cell.netlist, bits, device, sim);
    SimulationTrace trace = simulate(cell.netlist, schedule, initial, device, sim);

    CellOutcome out;
    for (const auto& row : cell.rows) {
        RowOutcome ro;
        for (const auto& e : trace.events) {
            if (e.magnet_id == row && e.time <= options.window) {
                ro.delay = e.time;
                break;
            }
        }
        ro.strength = classify_delay(ro.delay, table);
        if (ro.delay && (!out.decision_time || *ro.delay > *out.decision_time)) out.decision_time = ro.delay;
        out.rows.push_back(ro);
    }
    if (!cell.cell.empty()) {
        out.cell_gate = steady_logic_value(trace, cell.cell, std::min(0.1e-9, 0.25 * options.t_end));
    }
    InitialStates final_states;
    for (std::size_t k = 0; k < trace.magnet_ids.size(); ++k) final_states[trace.magnet_ids[k]] = trace.series[k].back();
    for (const auto& m : cell.netlist.magnets) {
        if (!final_states.count(m.id)) final_states[m.id] = initial.at(m.id);
    }
    out.power = measure_power(cell.netlist, schedule, device, final_states).total;
    if (options.keep_trace) out.trace = std::move(trace);
    return out;
}

BinaryImage TileLayout::block(const BinaryImage& image, std::size_t cell) const {
    if (image.rows() != image_rows || image.cols() != image_cols) {
        throw Error(ErrorKind::DimensionMismatch, "image does not match the tiling");
    }
    const auto [r0, c0] = origins.at(cell);
    BinaryImage out(cell_rows, cell_cols);
    for (int r = 0; r < cell_rows; ++r)
        for (int c = 0; c < cell_cols; ++c) out.set(r, c, image.at(r0 + r, c0 + c));
    return out;
}

TileLayout tile_detectors(int image_rows, int image_cols, int cell_rows, int cell_cols) {
    if (cell_rows < 1 || cell_cols < 1 || image_rows < 1 || image_cols < 1 || image_rows % cell_rows ||
        image_cols % cell_cols) {
        throw Error(ErrorKind::Partition, "cell dimensions must divide the image dimensions");
    }
    TileLayout t{image_rows, image_cols, cell_rows, cell_cols, {}, {}};
    for (int br = 0; br < image_rows / cell_rows; ++br) {
        for (int bc = 0; bc < image_cols / cell_cols; ++bc) {
            t.origins.emplace_back(br * cell_rows, bc * cell_cols);
            std::vector<ClusterIndex> rows;
            for (int r = 0; r < cell_rows; ++r) rows.push_back({br * cell_rows + r + 1, bc + 1});
            t.clusters.push_back(std::move(rows));
        }
    }
    return t;
}

DetectionReport detect(const DetectorConfig& config, const DeviceParams& device, const TrainingSet& training,
                       const BinaryImage& input, const CalibrationTable& table, const DetectRunOptions& options,
                       std::vector<CellOutcome>* outcomes) {
    config.validate();
    if (static_cast<int>(training.size()) != config.training_count) {
        throw Error(ErrorKind::DimensionMismatch, "training set size does not match the configuration");
    }
    for (const auto& img : training) {
        if (img.rows() != config.image_rows || img.cols() != config.image_cols) {
            throw Error(ErrorKind::DimensionMismatch, "training image does not match the configured dimensions");
        }
    }
    if (input.rows() != config.image_rows || input.cols() != config.image_cols) {
        throw Error(ErrorKind::DimensionMismatch, "input image does not match the configured dimensions");
    }
    const TileLayout layout = tile_detectors(config.image_rows, config.image_cols, config.cell_rows, config.cell_cols);
    const SmartDetectorCell blank = build_smart_detector_cell(config, device);

    std::vector<CellOutcome> results(layout.origins.size());
    parallel_for(results.size(), options.threads, [&](std::size_t i) {
        TrainingSet blocks;
        for (const auto& img : training) blocks.push_back(layout.block(img, i));
        const SmartDetectorCell cell = learn(blank, blocks);
        DetectOptions o = options.cell;
        o.seed = derive_seed(options.cell.seed, i);
        results[i] = detect_cell(cell, layout.block(input, i), device, table, o);
    });

    std::map<ClusterIndex, ClusterExpectation> expected;
    for (const auto& e : logic_oracle_detect(training, input, config.cell_cols)) expected[e.index] = e;

    DetectionReport report;
    report.seed = options.cell.seed;
    report.area = estimate_area(blank.netlist, device) * static_cast<double>(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& res = results[i];
        CellVerdict verdict{i, 0, res.cell_gate};
        for (std::size_t r = 0; r < res.rows.size(); ++r) {
            const auto& e = expected.at(layout.clusters[i][r]);
            const auto& row = res.rows[r];
            report.clusters.push_back({e.index, row.delay, row.strength.switched ? row.strength.aligned : 0,
                                       e.switch_expected ? e.match_count : 0, e.match_count});
            verdict.rows_switched += row.delay.has_value();
        }
        report.cells.push_back(verdict);
        report.power += res.power;
        if (res.decision_time && (!report.decision_time || *res.decision_time > *report.decision_time)) {
            report.decision_time = res.decision_time;
        }
    }
    std::sort(report.clusters.begin(), report.clusters.end(),
              [](const ClusterRecord& a, const ClusterRecord& b) { return a.cluster < b.cluster; });
    if (outcomes) *outcomes = std::move(results);
    return report;
}

nlohmann::json to_json(const DetectionReport& report) {
    using nlohmann::json;
    auto logic = [](Logic v) -> json {
        if (v == Logic::One) return 1;
        if (v == Logic::Zero) return 0;
        return nullptr;
    };
    json clusters = json::array();
    for (const auto& c : report.clusters) {
        clusters.push_back({{"cluster", c.cluster.label()},
                            {"delay_s", c.delay ? json(*c.delay) : json(nullptr)},
                            {"class", c.klass},
                            {"expected_class", c.expected_class},
                            {"match_count", c.match_count}});
    }
    json cells = json::array();
    for (const auto& v : report.cells) {
        cells.push_back({{"cell", v.cell}, {"rows_switched", v.rows_switched}, {"cell_gate", logic(v.cell_gate)}});
    }
    return {{"clusters", clusters},
            {"cells", cells},
            {"decision_time_s", report.decision_time ? json(*report.decision_time) : json(nullptr)},
            {"power_W", report.power},
            {"area_m2", report.area},
            {"seed", report.seed}};
}

CalibrationTable calibrate_cell(const DetectorConfig& config, const DeviceParams& device, int seeds,
                                double temperature, std::uint64_t master_seed, int threads) {
    if (seeds < 1) throw Error(ErrorKind::InvalidParameter, "calibration needs at least one seed");
    DetectorConfig cfg = config;
    cfg.image_rows = cfg.cell_rows;
    cfg.image_cols = cfg.cell_cols;
    const SmartDetectorCell blank = build_smart_detector_cell(cfg, device);
    CalibrationTable placeholder;
    placeholder.median_delay[cfg.cell_cols] = 0.0;

    // Each run places one row of every mismatch count 0..2 at a rotating row position.
    std::vector<std::vector<std::pair<int, double>>> found(seeds);
    parallel_for(static_cast<std::size_t>(seeds), threads, [&](std::size_t s) {
        Rng rng(master_seed, s);
        TrainingSet training;
        for (int k = 0; k < cfg.training_count; ++k) {
            BinaryImage img(cfg.cell_rows, cfg.cell_cols);
            for (int r = 0; r < cfg.cell_rows; ++r)
                for (int c = 0; c < cfg.cell_cols; ++c) img.set(r, c, rng.uniform() < 0.5);
            training.push_back(img);
        }
        const BinaryImage mean = mean_image(training);
        BinaryImage input = mean;
        for (int r = 0; r < cfg.cell_rows; ++r) {
            const int mismatches = static_cast<int>((r + s) % 3);
            const int start = static_cast<int>(rng.uniform() * cfg.cell_cols) % cfg.cell_cols;
            for (int m = 0; m < mismatches; ++m) {
                const int c = (start + m) % cfg.cell_cols;
                input.set(r, c, 1 - input.at(r, c));
            }
        }
        DetectOptions o;
        o.seed = derive_seed(master_seed, s);
        o.temperature = temperature;
        o.record = blank.rows;
        const SmartDetectorCell cell = learn(blank, training);
        const CellOutcome res = detect_cell(cell, input, device, placeholder, o);
        for (int r = 0; r < cfg.cell_rows; ++r) {
            if (res.rows[r].delay) {
                found[s].emplace_back(cfg.cell_cols - static_cast<int>((r + s) % 3), *res.rows[r].delay);
            }
        }
    });
    std::map<int, std::vector<double>> delays;
    for (const auto& run : found)
        for (const auto& [count, d] : run) delays[count].push_back(d);

    CalibrationTable table;
    table.fan_in = cfg.cell_cols;
    table.supply = cfg.supply;
    table.temperature = temperature;
    table.window = DetectOptions{}.window;
    for (const auto& [count, v] : delays) {
        if (2 * count > cfg.cell_cols) table.median_delay[count] = median(v);
    }
    if (table.median_delay.empty()) throw Error(ErrorKind::NoSwitching, "no row switched during calibration");
    return table;
}

}  // namespace spinpat
