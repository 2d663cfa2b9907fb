#include "spinpat/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "spinpat/detector.hpp"
#include "spinpat/errors.hpp"
#include "spinpat/magnetodynamics.hpp"
#include "spinpat/parallel.hpp"
#include "spinpat/recognition.hpp"
#include "spinpat/rng.hpp"
#include "spinpat/trace.hpp"
#include "spinpat/transport.hpp"

namespace spinpat {

namespace {

using nlohmann::json;

// Reference figures used by the order-of-magnitude and bound checks.
constexpr double kXnorPower = 11e-6;
constexpr double kMajorityPower = 3.75e-6;
constexpr double kCellPower = 115e-6;
constexpr double kArrayPower = 990e-6;
constexpr double kXnorArea = 0.3e-12;
constexpr double kMajorityArea = 0.2e-12;
constexpr double kCellArea = 0.5e-12;

std::string num(double x) { return fmt::format("{:.9g}", x); }
std::string num(std::optional<double> x) { return x ? num(*x) : std::string(); }
json opt(std::optional<double> x) { return x ? json(*x) : json(nullptr); }

std::string ps(std::optional<double> x) { return x ? fmt::format("{:.1f} ps", *x * 1e12) : std::string("none"); }

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::optional<double> median_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    return quantile(v, 0.5);
}

bool within_decade(double value, double reference) { return value >= 0.1 * reference && value <= 10.0 * reference; }

std::string trace_csv(const SimulationTrace& trace) {
    std::ostringstream out;
    trace.write_csv(out);
    return out.str();
}

json stats_json(const DelayStats& s) {
    return {{"runs", s.runs}, {"switched", s.switched}, {"q1_s", opt(s.q1)}, {"median_s", opt(s.median)},
            {"q3_s", opt(s.q3)}};
}

SimulationOptions sim_options(const DeviceParams& device, double temperature, std::uint64_t seed, double t_end) {
    SimulationOptions o;
    o.t_end = t_end;
    o.dt = device.dt;
    o.sample_interval = device.sample_interval;
    o.temperature = temperature;
    o.seed = seed;
    o.settle_threshold = device.settle_threshold;
    return o;
}

std::optional<double> switch_time(const SimulationTrace& trace, const std::string& id, int new_sign) {
    for (const auto& e : trace.events)
        if (e.magnet_id == id && e.new_sign == new_sign) return e.time;
    return std::nullopt;
}

int to_bit(Logic v) { return v == Logic::One ? 1 : v == Logic::Zero ? 0 : -1; }

SimulationTrace run_majority(int fan_in, const std::vector<int>& inputs, int sign, int out_initial, double voltage,
                             double temperature, std::uint64_t seed, double t_end, const DeviceParams& device,
                             bool record_all = false) {
    MajorityOptions mo;
    mo.sign = sign;
    const Netlist net = build_majority_gate(fan_in, device, mo);
    std::map<std::string, int> bits;
    for (int k = 0; k < fan_in; ++k) bits["in" + std::to_string(k)] = inputs[k];
    bits["out"] = out_initial;
    SimulationOptions o = sim_options(device, temperature, seed, t_end);
    if (!record_all) o.record = {"out"};
    return simulate(net, SupplySchedule::phased(net, voltage), make_initial_states(net, bits, device, o), device, o);
}

std::vector<int> aligned_inputs(int fan_in, int aligned) {
    std::vector<int> bits(fan_in, 0);
    for (int k = 0; k < aligned; ++k) bits[k] = 1;
    return bits;
}

DetectorConfig cell_config(const Config& config, int rows, int cols, int training) {
    DetectorConfig cfg = config.detector;
    cfg.image_rows = rows;
    cfg.image_cols = cols;
    cfg.training_count = training;
    cfg.supply = config.device.supply_voltage;
    cfg.fan_in_cap = config.device.fan_in_cap;
    return cfg;
}

json table_json(const CalibrationTable& t) {
    json medians = json::object();
    for (const auto& [k, v] : t.median_delay) medians[std::to_string(k)] = v;
    return {{"fan_in", t.fan_in},
            {"supply_V", t.supply},
            {"temperature_K", t.temperature},
            {"window_s", t.window},
            {"median_delay_s", medians}};
}

std::filesystem::path require_path(const std::filesystem::path& p, const std::string& key) {
    if (p.empty()) throw Error(ErrorKind::Config, "fixture path '" + key + "' is not configured");
    return p;
}

// Records one delay row per cluster and seed into a CSV body.
void append_cluster_rows(std::ostringstream& csv, int seed, const DetectionReport& report) {
    for (const auto& c : report.clusters) {
        csv << seed << ',' << c.cluster.label() << ',' << num(c.delay) << ',' << c.klass << ','
            << c.expected_class << ',' << c.match_count << '\n';
    }
}

}  // namespace

bool ExperimentOutput::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

DelayStats delay_stats(const std::vector<std::optional<double>>& delays) {
    DelayStats s;
    s.runs = static_cast<int>(delays.size());
    std::vector<double> v;
    for (const auto& d : delays)
        if (d) v.push_back(*d);
    s.switched = static_cast<int>(v.size());
    if (!v.empty()) {
        s.q1 = quantile(v, 0.25);
        s.median = quantile(v, 0.5);
        s.q3 = quantile(v, 0.75);
    }
    return s;
}

std::pair<double, double> fit_proportional(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InvalidInput, "fit needs matching samples");
    double sxy = 0.0;
    double sxx = 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        mean += y[i];
    }
    mean /= static_cast<double>(y.size());
    const double a = sxy / sxx;
    double res = 0.0;
    double tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        res += (y[i] - a * x[i]) * (y[i] - a * x[i]);
        tot += (y[i] - mean) * (y[i] - mean);
    }
    return {a, tot > 0.0 ? 1.0 - res / tot : 1.0};
}

double majority_overdrive(int fan_in, int aligned, double voltage, const DeviceParams& device) {
    const Netlist net = build_majority_gate(fan_in, device);
    const TransportNetwork network =
        build_network(net, device.channel_material(), device.channel.dx, device.interface);
    std::vector<Vec3> states;
    for (const auto& id : network.magnet_ids) {
        if (id == "out") {
            states.push_back({0.0, 1.0, 0.0});
        } else {
            const int k = std::stoi(id.substr(2));
            states.push_back({k < aligned ? 1.0 : -1.0, 0.0, 0.0});
        }
    }
    std::vector<double> volts;
    for (const auto& id : network.supply_ids) {
        const auto it = std::find_if(net.supplies.begin(), net.supplies.end(), [&](const SupplySpec& s) { return s.id == id; });
        volts.push_back(it->sign * voltage);
    }
    const auto currents = solve_steady_state(network, states, volts);
    return std::abs(currents.at("out").spin.x) / device.critical_current();
}

std::vector<std::optional<double>> majority_delays(int fan_in, int aligned, double voltage, double temperature,
                                                   int seeds, std::uint64_t master_seed, double t_end,
                                                   const DeviceParams& device, int threads) {
    std::vector<std::optional<double>> out(static_cast<std::size_t>(std::max(0, seeds)));
    const auto inputs = aligned_inputs(fan_in, aligned);
    parallel_for(out.size(), threads, [&](std::size_t s) {
        const auto trace = run_majority(fan_in, inputs, -1, 0, voltage, temperature, derive_seed(master_seed, s),
                                        t_end, device);
        out[s] = switch_time(trace, "out", 1);
    });
    return out;
}

std::vector<std::pair<int, int>> single_user_pixels(const TrainingSet& training) {
    const BinaryImage mean = mean_image(training);
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < mean.rows(); ++r) {
        for (int c = 0; c < mean.cols(); ++c) {
            int differ = 0;
            for (const auto& img : training) differ += img.at(r, c) != mean.at(r, c);
            if (differ == 1) out.emplace_back(r, c);
        }
    }
    return out;
}

// Strength ordering at fan-in 5, the 3-input vs 5-input comparison, and the
// noise-free steady-state majority table for both supply signs.
ExperimentOutput run_fanin_study(const RunContext& ctx) {
    const auto& d = ctx.config.device;
    const auto& ex = ctx.config.experiments;
    const double v = d.supply_voltage;
    const double temp = d.temperature;
    ExperimentOutput out;
    out.experiment = "fanin-study";

    std::ostringstream delays;
    delays << "fan_in,aligned,seed,delay_s\n";
    std::map<int, DelayStats> strength;
    for (int aligned : {5, 4, 3}) {
        const auto ds = majority_delays(5, aligned, v, temp, ex.fanin_seeds, derive_seed(ctx.seed, 100 + aligned),
                                        ex.fanin_t_end, d, ctx.threads);
        for (std::size_t s = 0; s < ds.size(); ++s) delays << 5 << ',' << aligned << ',' << s << ',' << num(ds[s]) << '\n';
        strength[aligned] = delay_stats(ds);
        const auto trace = run_majority(5, aligned_inputs(5, aligned), -1, 0, v, temp,
                                        derive_seed(derive_seed(ctx.seed, 100 + aligned), 0), ex.fanin_t_end, d, true);
        out.files["trace_fanin5_aligned" + std::to_string(aligned) + ".csv"] = trace_csv(trace);
    }
    const auto three = majority_delays(3, 3, v, temp, ex.fanin_seeds, derive_seed(ctx.seed, 203), ex.fanin_t_end, d,
                                       ctx.threads);
    for (std::size_t s = 0; s < three.size(); ++s) delays << 3 << ',' << 3 << ',' << s << ',' << num(three[s]) << '\n';
    out.files["delays.csv"] = delays.str();

    CalibrationTable table;
    table.fan_in = 5;
    table.supply = v;
    table.temperature = temp;
    table.window = ex.fanin_t_end;
    for (const auto& [aligned, st] : strength)
        if (st.median) table.median_delay[aligned] = *st.median;
    out.files["calibration.json"] = table_json(table).dump(2) + "\n";

    // Steady-state majority oracle, noise off, both output initial states.
    std::ostringstream steady;
    steady << "fan_in,pattern,sign,initial,final,expected\n";
    int agree = 0;
    int total = 0;
    struct Case {
        int fan_in, pattern, sign, initial;
    };
    std::vector<Case> cases;
    for (int n : {3, 5})
        for (int pattern = 0; pattern < (1 << n); ++pattern)
            for (int sign : {-1, 1})
                for (int initial : {0, 1}) cases.push_back({n, pattern, sign, initial});
    std::vector<int> finals(cases.size());
    parallel_for(cases.size(), ctx.threads, [&](std::size_t i) {
        const auto& c = cases[i];
        std::vector<int> bits(c.fan_in);
        for (int k = 0; k < c.fan_in; ++k) bits[k] = (c.pattern >> k) & 1;
        const auto trace = run_majority(c.fan_in, bits, c.sign, c.initial, v, 0.0, 0, ex.fanin_t_end, d);
        finals[i] = to_bit(steady_logic_value(trace, "out", 0.1e-9, d.settle_threshold));
    });
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        std::vector<int> bits(c.fan_in);
        for (int k = 0; k < c.fan_in; ++k) bits[k] = (c.pattern >> k) & 1;
        const int maj = majority(bits);
        const int expected = c.sign < 0 ? maj : 1 - maj;
        agree += finals[i] == expected;
        ++total;
        std::string pattern;
        for (int b : bits) pattern += static_cast<char>('0' + b);
        steady << c.fan_in << ',' << pattern << ',' << c.sign << ',' << c.initial << ',' << finals[i] << ','
               << expected << '\n';
    }
    out.files["steady.csv"] = steady.str();

    const Netlist gate = build_majority_gate(3, d);
    std::map<std::string, int> ones;
    for (const auto& m : gate.magnets) ones[m.id] = 1;
    SimulationOptions noiseless = sim_options(d, 0.0, 0, 1e-9);
    const double power =
        measure_power(gate, SupplySchedule::phased(gate, v), d, make_initial_states(gate, ones, d, noiseless)).total;
    const double area = estimate_area(gate, d);

    const auto& s5 = strength[5];
    const auto& s4 = strength[4];
    const auto& s3 = strength[3];
    const bool ordered = s5.median && s4.median && s3.median && *s5.median < *s4.median && *s4.median < *s3.median;
    const bool iqr = s5.q3 && s3.q1 && *s5.q3 < *s3.q1;
    out.checks.push_back({"strength ordering 5 < 4 < 3 aligned", ordered,
                          fmt::format("medians {} / {} / {}", ps(s5.median), ps(s4.median), ps(s3.median))});
    out.checks.push_back({"IQR of 5-aligned below IQR of 3-aligned", iqr,
                          fmt::format("q3(5) = {}, q1(3) = {}", ps(s5.q3), ps(s3.q1))});
    out.checks.push_back({"steady-state majority table", agree == total, fmt::format("{}/{} agree", agree, total)});
    out.checks.push_back({"3-input majority power within a decade of 3.75 uW", within_decade(power, kMajorityPower),
                          fmt::format("{:.3f} uW", power * 1e6)});
    out.checks.push_back({"3-input majority area below 0.2 um^2", area < kMajorityArea,
                          fmt::format("{:.4f} um^2", area * 1e12)});

    out.report = {{"strength", {{"5", stats_json(s5)}, {"4", stats_json(s4)}, {"3", stats_json(s3)}}},
                  {"fan_in3_all_aligned", stats_json(delay_stats(three))},
                  {"steady_state", {{"agree", agree}, {"total", total}}},
                  {"majority3_power_W", power},
                  {"majority3_area_m2", area},
                  {"calibration", table_json(table)}};
    return out;
}

// Delay against supply magnitude, fitted against 1/(chi - 1).
ExperimentOutput run_voltage_sweep(const RunContext& ctx) {
    const auto& d = ctx.config.device;
    const auto& ex = ctx.config.experiments;
    ExperimentOutput out;
    out.experiment = "voltage-sweep";
    if (ex.sweep_voltages.size() < 2) throw Error(ErrorKind::Config, "voltage sweep needs at least two voltages");

    std::ostringstream delays;
    delays << "voltage_V,seed,delay_s\n";
    std::ostringstream table;
    table << "voltage_V,chi,median_delay_s,q1_s,q3_s,switched,runs,analytic_delay_s\n";
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::optional<double>> medians;
    json points = json::array();
    bool chi_ok = true;
    const double theta0 = d.theta0();
    for (std::size_t i = 0; i < ex.sweep_voltages.size(); ++i) {
        const double v = std::abs(ex.sweep_voltages[i]);
        const auto ds = majority_delays(3, 3, v, d.temperature, ex.sweep_seeds, derive_seed(ctx.seed, 300 + i),
                                        ex.fanin_t_end, d, ctx.threads);
        for (std::size_t s = 0; s < ds.size(); ++s) delays << num(v) << ',' << s << ',' << num(ds[s]) << '\n';
        const auto st = delay_stats(ds);
        const double chi = majority_overdrive(3, 3, v, d);
        std::optional<double> analytic;
        if (chi > 1.0 && theta0 > 0.0) analytic = analytic_switching_delay({d.tau0, theta0, chi});
        chi_ok = chi_ok && chi > 1.0;
        if (chi > 1.0 && st.median) {
            x.push_back(1.0 / (chi - 1.0));
            y.push_back(*st.median);
        }
        medians.push_back(st.median);
        table << num(v) << ',' << num(chi) << ',' << num(st.median) << ',' << num(st.q1) << ',' << num(st.q3) << ','
              << st.switched << ',' << st.runs << ',' << num(analytic) << '\n';
        points.push_back({{"voltage_V", v}, {"chi", chi}, {"stats", stats_json(st)}, {"analytic_delay_s", opt(analytic)}});
    }
    out.files["delays.csv"] = delays.str();
    out.files["delay_table.csv"] = table.str();

    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < medians.size(); ++i) {
        decreasing = decreasing && medians[i] && medians[i + 1] && *medians[i + 1] < *medians[i];
    }
    std::string medians_text;
    for (const auto& m : medians) medians_text += (medians_text.empty() ? "" : " / ") + ps(m);
    out.checks.push_back({"median delay strictly decreases with |V|", decreasing, medians_text});

    double slope = 0.0;
    double r2 = 0.0;
    const bool fit_possible = chi_ok && x.size() == ex.sweep_voltages.size();
    if (fit_possible) std::tie(slope, r2) = fit_proportional(x, y);
    out.checks.push_back({"delay fits 1/(chi - 1) with R^2 >= 0.9", fit_possible && r2 >= 0.9,
                          fit_possible ? fmt::format("R^2 = {:.4f}, slope = {:.2f} ps", r2, slope * 1e12)
                                       : std::string("chi <= 1 or a point without switching")});
    out.report = {{"points", points}, {"fit", {{"slope_s", slope}, {"r2", r2}}}, {"theta0_rad", theta0}};
    return out;
}

// Every input combination from both output initial states, noise off.
ExperimentOutput run_xnor_table(const RunContext& ctx) {
    const auto& d = ctx.config.device;
    const auto& ex = ctx.config.experiments;
    ExperimentOutput out;
    out.experiment = "xnor-table";
    const Netlist cell = build_xnor_cell(d);
    const auto schedule = SupplySchedule::phased(cell, d.supply_voltage);

    struct Case {
        int a, b, s0;
    };
    std::vector<Case> cases;
    for (int a : {0, 1})
        for (int b : {0, 1})
            for (int s0 : {0, 1}) cases.push_back({a, b, s0});
    std::vector<SimulationTrace> traces(cases.size());
    parallel_for(cases.size(), ctx.threads, [&](std::size_t i) {
        const auto& c = cases[i];
        const std::map<std::string, int> bits{{"A", c.a}, {"Abar", 1 - c.a}, {"B", c.b}, {"Bbar", 1 - c.b},
                                              {"C", 0},   {"Cbar", 1},       {"K", 0},   {"S", c.s0}};
        const SimulationOptions o = sim_options(d, 0.0, ctx.seed, ex.xnor_t_end);
        traces[i] = simulate(cell, schedule, make_initial_states(cell, bits, d, o), d, o);
    });

    std::ostringstream table;
    table << "a,b,s_initial,s_final,expected,carry_final,delay_s\n";
    int correct = 0;
    json rows = json::array();
    double power = 0.0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        const auto& tr = traces[i];
        const int s = to_bit(steady_logic_value(tr, "S", 0.1e-9, d.settle_threshold));
        const int k = to_bit(steady_logic_value(tr, "K", 0.1e-9, d.settle_threshold));
        const int expected = c.a == c.b ? 1 : 0;
        const auto delay = switch_time(tr, "S", expected ? 1 : -1);
        correct += s == expected && k == (c.a & c.b);
        table << c.a << ',' << c.b << ',' << c.s0 << ',' << s << ',' << expected << ',' << k << ',' << num(delay) << '\n';
        rows.push_back({{"a", c.a}, {"b", c.b}, {"s_initial", c.s0}, {"s_final", s}, {"expected", expected},
                        {"carry_final", k}, {"delay_s", opt(delay)}});
        out.files[fmt::format("trace_a{}_b{}_s{}.csv", c.a, c.b, c.s0)] = trace_csv(tr);
        InitialStates final_states;
        for (std::size_t m = 0; m < tr.magnet_ids.size(); ++m) final_states[tr.magnet_ids[m]] = tr.series[m].back();
        power = std::max(power, measure_power(cell, schedule, d, final_states).total);
    }
    out.files["delay_table.csv"] = table.str();
    const double area = estimate_area(cell, d);
    out.checks.push_back({"XNOR truth table, 4 inputs x 2 initial states", correct == static_cast<int>(cases.size()),
                          fmt::format("{}/{} cases settle to XNOR with the expected carry", correct, cases.size())});
    out.checks.push_back({"XNOR power within a decade of 11 uW", within_decade(power, kXnorPower),
                          fmt::format("{:.2f} uW", power * 1e6)});
    out.checks.push_back({"XNOR area below 0.3 um^2", area < kXnorArea, fmt::format("{:.4f} um^2", area * 1e12)});
    out.report = {{"cases", rows}, {"power_W", power}, {"area_m2", area}, {"magnets", cell.magnets.size()}};
    return out;
}

// One stored pattern against one input, rows 1 and 3 similar and row 2 not.
ExperimentOutput run_compare3x3(const RunContext& ctx) {
    const auto& d = ctx.config.device;
    const auto& ex = ctx.config.experiments;
    ExperimentOutput out;
    out.experiment = "compare3x3";
    const BinaryImage pattern = load_image(require_path(ex.compare3x3_pattern, "fixtures.compare3x3_pattern").string());
    const BinaryImage input = load_image(require_path(ex.compare3x3_input, "fixtures.compare3x3_input").string());
    const DetectorConfig cfg = cell_config(ctx.config, pattern.rows(), pattern.cols(), 1);
    const TrainingSet training{pattern};
    const auto oracle = logic_oracle_detect(training, input, cfg.cell_cols);

    const CalibrationTable table =
        calibrate_cell(cfg, d, ex.calibration_seeds, d.temperature, derive_seed(ctx.seed, 1000), ctx.threads);
    const SmartDetectorCell blank = build_smart_detector_cell(cfg, d);

    const int seeds = ex.compare_seeds;
    std::vector<DetectionReport> reports(seeds);
    std::vector<CellOutcome> first;
    for (int s = 0; s < seeds; ++s) {
        DetectRunOptions o;
        o.threads = ctx.threads;
        o.cell.seed = derive_seed(ctx.seed, s);
        o.cell.temperature = d.temperature;
        o.cell.t_end = ex.detect_window;
        o.cell.window = ex.detect_window;
        if (s == 0) {
            o.cell.keep_trace = true;
        } else {
            o.cell.record = blank.rows;
            if (!blank.cell.empty()) o.cell.record.push_back(blank.cell);
        }
        reports[s] = detect(cfg, d, training, input, table, o, s == 0 ? &first : nullptr);
    }

    std::ostringstream delays;
    delays << "seed,cluster,delay_s,class,expected_class,match_count\n";
    int correct_runs = 0;
    std::vector<double> decision;
    for (int s = 0; s < seeds; ++s) {
        append_cluster_rows(delays, s, reports[s]);
        bool ok = true;
        for (std::size_t r = 0; r < reports[s].clusters.size(); ++r) {
            ok = ok && reports[s].clusters[r].delay.has_value() == oracle[r].switch_expected;
        }
        correct_runs += ok;
        if (reports[s].decision_time) decision.push_back(*reports[s].decision_time);
    }
    out.files["delays.csv"] = delays.str();
    if (!first.empty() && first[0].trace) {
        SimulationTrace tr = *first[0].trace;
        out.files["trace_seed0.csv"] = trace_csv(tr);
    }

    const double fraction = static_cast<double>(correct_runs) / seeds;
    const auto median_decision = median_of(decision);
    const double power = reports[0].power;
    const double area = reports[0].area;
    std::string expected_text;
    for (const auto& e : oracle) expected_text += e.switch_expected ? "S" : "-";
    out.checks.push_back({"row switching matches the logic oracle in >= 95% of runs", fraction >= 0.95,
                          fmt::format("{}/{} runs, oracle rows {}", correct_runs, seeds, expected_text)});
    out.checks.push_back({"median decision time within [0.2, 1.2] ns",
                          median_decision && *median_decision >= 0.2e-9 && *median_decision <= 1.2e-9,
                          fmt::format("median {}", ps(median_decision))});
    out.checks.push_back({"cell power within a decade of 115 uW", within_decade(power, kCellPower),
                          fmt::format("{:.1f} uW", power * 1e6)});
    out.checks.push_back({"cell area below 0.5 um^2", area < kCellArea, fmt::format("{:.4f} um^2", area * 1e12)});

    json runs = json::array();
    for (const auto& r : reports) runs.push_back(to_json(r));
    json expected = json::array();
    for (const auto& e : oracle) {
        expected.push_back({{"cluster", e.index.label()}, {"match_count", e.match_count}, {"switch_expected", e.switch_expected}});
    }
    out.report = {{"runs", runs},
                  {"oracle", expected},
                  {"calibration", table_json(table)},
                  {"correct_fraction", fraction},
                  {"decision_time_median_s", opt(median_decision)},
                  {"power_W", power},
                  {"area_m2", area},
                  {"magnets", blank.netlist.magnets.size()}};
    return out;
}

// Three training images, one input, tiled into 3x3 cells.
ExperimentOutput run_train_detect9x9(const RunContext& ctx) {
    const auto& d = ctx.config.device;
    const auto& ex = ctx.config.experiments;
    ExperimentOutput out;
    out.experiment = "train-detect9x9";
    if (ex.training.empty()) throw Error(ErrorKind::Config, "fixture path 'fixtures.training' is not configured");
    TrainingSet training;
    for (const auto& p : ex.training) training.push_back(load_image(p.string()));
    const BinaryImage input = load_image(require_path(ex.detection_input, "fixtures.detection_input").string());
    const BinaryImage mean = mean_image(training);
    const DetectorConfig cfg = cell_config(ctx.config, input.rows(), input.cols(), static_cast<int>(training.size()));

    // Logic route: the mean removes pixels set by a single user.
    const auto strays = single_user_pixels(training);
    bool mean_ok = !strays.empty();
    for (const auto& [r, c] : strays) {
        int ones = 0;
        for (const auto& img : training) ones += img.at(r, c);
        mean_ok = mean_ok && mean.at(r, c) == (2 * ones > static_cast<int>(training.size()) ? 1 : 0);
    }
    if (!ex.training_mean.empty()) mean_ok = mean_ok && mean == load_image(ex.training_mean.string());
    std::string stray_text;
    for (const auto& [r, c] : strays) stray_text += fmt::format("{}P{}{}", stray_text.empty() ? "" : " ", r + 1, c + 1);
    out.checks.push_back({"mean image corrects single-user pixels", mean_ok, stray_text});

    const CalibrationTable table =
        calibrate_cell(cfg, d, ex.calibration_seeds, d.temperature, derive_seed(ctx.seed, 1000), ctx.threads);
    const TileLayout layout = tile_detectors(cfg.image_rows, cfg.image_cols, cfg.cell_rows, cfg.cell_cols);
    const SmartDetectorCell blank = build_smart_detector_cell(cfg, d);

    const int seeds = ex.detect_seeds;
    std::vector<DetectionReport> reports(seeds);
    std::vector<CellOutcome> first;
    for (int s = 0; s < seeds; ++s) {
        DetectRunOptions o;
        o.threads = ctx.threads;
        o.cell.seed = derive_seed(ctx.seed, s);
        o.cell.temperature = d.temperature;
        o.cell.t_end = ex.detect_window;
        o.cell.window = ex.detect_window;
        o.cell.record = blank.rows;
        if (!blank.cell.empty()) o.cell.record.push_back(blank.cell);
        o.cell.keep_trace = s == 0;
        reports[s] = detect(cfg, d, training, input, table, o, s == 0 ? &first : nullptr);
    }

    std::ostringstream delays;
    delays << "seed,cluster,delay_s,class,expected_class,match_count\n";
    std::map<std::string, std::vector<std::optional<double>>> by_cluster;
    std::vector<double> decision;
    for (int s = 0; s < seeds; ++s) {
        append_cluster_rows(delays, s, reports[s]);
        for (const auto& c : reports[s].clusters) by_cluster[c.cluster.label()].push_back(c.delay);
        if (reports[s].decision_time) decision.push_back(*reports[s].decision_time);
    }
    out.files["delays.csv"] = delays.str();
    for (std::size_t i = 0; i < first.size(); ++i) {
        if (first[i].trace) out.files[fmt::format("trace_seed0_cell{}.csv", i)] = trace_csv(*first[i].trace);
    }

    const std::vector<std::string> perfect{"C11", "C22", "C41"};
    const std::vector<std::string> one_mismatch{"C52", "C42", "C32"};
    const std::vector<std::string> mismatch{"C43", "C72"};
    auto pooled = [&](const std::vector<std::string>& ids) {
        std::vector<std::optional<double>> all;
        for (const auto& id : ids) all.insert(all.end(), by_cluster[id].begin(), by_cluster[id].end());
        return delay_stats(all);
    };
    const auto fast = pooled(perfect);
    const auto slow = pooled(one_mismatch);
    const auto none = pooled(mismatch);

    // Golden route: the listed clusters carry the listed match counts.
    std::map<std::string, int> counts;
    for (const auto& e : logic_oracle_detect(training, input, cfg.cell_cols)) counts[e.index.label()] = e.match_count;
    bool golden = true;
    for (const auto& id : perfect) golden = golden && counts[id] == 3;
    for (const auto& id : one_mismatch) golden = golden && counts[id] == 2;
    for (const auto& id : mismatch) golden = golden && counts[id] <= 1;
    out.checks.push_back({"logic oracle match counts of the listed clusters", golden,
                          "C11 C22 C41 = 3, C52 C42 C32 = 2, C43 C72 <= 1"});

    out.checks.push_back({"perfect-match clusters switch faster than one-mismatch clusters (median)",
                          fast.median && slow.median && *fast.median < *slow.median,
                          fmt::format("{} vs {} ({} / {} switched)", ps(fast.median), ps(slow.median), fast.switched,
                                      slow.switched)});
    out.checks.push_back({"C43 and C72 never switch within the window", none.switched == 0,
                          fmt::format("{} of {} runs switched", none.switched, none.runs)});
    const auto median_decision = median_of(decision);
    out.checks.push_back({"median decision time within [0.3, 2] ns",
                          median_decision && *median_decision >= 0.3e-9 && *median_decision <= 2e-9,
                          fmt::format("median {}", ps(median_decision))});
    const double power = reports[0].power;
    out.checks.push_back({"9x9 array power within a decade of 990 uW", within_decade(power, kArrayPower),
                          fmt::format("{:.1f} uW over {} cells of {} magnets", power * 1e6, layout.origins.size(),
                                      blank.netlist.magnets.size())});

    json clusters = json::object();
    for (const auto& [id, ds] : by_cluster) {
        clusters[id] = stats_json(delay_stats(ds));
        clusters[id]["match_count"] = counts[id];
    }
    std::ostringstream mean_text;
    write_ascii_image(mean_text, mean);
    json stray_list = json::array();
    for (const auto& [r, c] : strays) stray_list.push_back(fmt::format("P{}{}", r + 1, c + 1));
    out.report = {{"first_run", to_json(reports[0])},
                  {"clusters", clusters},
                  {"groups", {{"perfect", stats_json(fast)}, {"one_mismatch", stats_json(slow)}, {"mismatch", stats_json(none)}}},
                  {"calibration", table_json(table)},
                  {"mean_image", mean_text.str()},
                  {"single_user_pixels", stray_list},
                  {"decision_time_median_s", opt(median_decision)},
                  {"power_W", power},
                  {"area_m2", reports[0].area},
                  {"cells", layout.origins.size()},
                  {"magnets_per_cell", blank.netlist.magnets.size()}};
    return out;
}

ExperimentOutput run_prop1(const RunContext& ctx) {
    ExperimentOutput out;
    out.experiment = "prop1";
    const int max_p = ctx.config.experiments.prop1_max_p;
    if (max_p < 1) throw Error(ErrorKind::Config, "prop1 needs max P >= 1");
    std::ostringstream csv;
    csv << "p,cases,all_equal\n";
    bool all = true;
    json rows = json::array();
    for (int p = 1; p <= max_p; p += 2) {
        const bool ok = prop1_check(p);
        all = all && ok;
        csv << p << ',' << (1 << (p + 1)) << ',' << (ok ? 1 : 0) << '\n';
        rows.push_back({{"p", p}, {"cases", 1 << (p + 1)}, {"all_equal", ok}});
    }
    out.files["prop1.csv"] = csv.str();
    out.checks.push_back({"x xor mean(y) equals mean(x xor y) exhaustively for odd P <= " + std::to_string(max_p), all, ""});
    out.report = {{"all_equal", all}, {"rows", rows}};
    return out;
}

// Fits tau0 so the analytic delay reproduces the simulated 3-input majority median at the
// configured supply.
ExperimentOutput run_calibrate_tau0(const RunContext& ctx) {
    const auto& d = ctx.config.device;
    const auto& ex = ctx.config.experiments;
    ExperimentOutput out;
    out.experiment = "calibrate-tau0";
    const double v = d.supply_voltage;
    const auto ds = majority_delays(3, 3, v, d.temperature, ex.calibration_seeds, derive_seed(ctx.seed, 500),
                                    ex.fanin_t_end, d, ctx.threads);
    const auto st = delay_stats(ds);
    const double chi = majority_overdrive(3, 3, v, d);
    const double theta0 = d.theta0();
    std::optional<double> tau0;
    if (st.median && chi > 1.0 && theta0 > 0.0) tau0 = *st.median * (chi - 1.0) / std::log(std::numbers::pi / theta0);

    std::ostringstream csv;
    csv << "seed,delay_s\n";
    for (std::size_t s = 0; s < ds.size(); ++s) csv << s << ',' << num(ds[s]) << '\n';
    out.files["delays.csv"] = csv.str();
    out.files["tau0.json"] = json{{"simulation.tau0", {{"value", tau0 ? *tau0 * 1e12 : 0.0}, {"unit", "ps"}}}}.dump(2) + "\n";

    out.checks.push_back({"overdrive above 1", chi > 1.0, fmt::format("chi = {:.3f}", chi)});
    out.checks.push_back({"3-input majority median below 0.6 ns", st.median && *st.median < 0.6e-9,
                          fmt::format("median {}", ps(st.median))});
    out.checks.push_back({"tau0 fitted", tau0.has_value() && *tau0 > 0.0, fmt::format("tau0 = {}", ps(tau0))});
    out.report = {{"stats", stats_json(st)},
                  {"chi", chi},
                  {"theta0_rad", theta0},
                  {"tau0_s", opt(tau0)},
                  {"configured_tau0_s", d.tau0}};
    return out;
}

std::vector<EquivalenceCase> comparator_equivalence(int p, const DeviceParams& device, double t_end, int threads) {
    const Netlist standard = build_pixel_comparator_standard(p, device);
    const Netlist first = build_pixel_comparator_first(p, device);
    const auto standard_schedule = SupplySchedule::phased(standard, device.supply_voltage, {0.0, 1e-9});
    const auto first_schedule = SupplySchedule::phased(first, device.supply_voltage, {0.0, 0.0});
    const int count = 1 << (p + 1);
    std::vector<EquivalenceCase> cases(count);
    parallel_for(static_cast<std::size_t>(count), threads, [&](std::size_t i) {
        auto& c = cases[i];
        c.input = static_cast<int>(i & 1);
        for (int k = 0; k < p; ++k) c.training.push_back(static_cast<int>((i >> (k + 1)) & 1));
        c.expected = majority(c.training) == c.input ? 1 : 0;
        auto run = [&](const Netlist& n, const SupplySchedule& schedule) {
            std::map<std::string, int> bits;
            for (const auto& m : n.magnets) {
                const bool bar = m.id.size() > 4 && m.id.compare(m.id.size() - 4, 4, "Cbar") == 0;
                bits[m.id] = bar || m.id == "Mbar" ? 1 : 0;
            }
            for (int k = 0; k < p; ++k) {
                const std::string t = "T" + std::to_string(k + 1);
                bits[t] = c.training[k];
                bits[t + "bar"] = 1 - c.training[k];
            }
            bits["Q"] = c.input;
            bits["Qbar"] = 1 - c.input;
            SimulationOptions o = sim_options(device, 0.0, 0, t_end);
            o.record = {n.pin("pixel")};
            const auto tr = simulate(n, schedule, make_initial_states(n, bits, device, o), device, o);
            return to_bit(steady_logic_value(tr, n.pin("pixel"), 0.1e-9, device.settle_threshold));
        };
        c.standard = run(standard, standard_schedule);
        c.comparator_first = run(first, first_schedule);
    });
    return cases;
}

ExperimentOutput run_comparator_equivalence(const RunContext& ctx) {
    const auto& d = ctx.config.device;
    const auto& training = ctx.config.experiments.training;
    const int p = training.empty() ? 3 : static_cast<int>(training.size());
    ExperimentOutput out;
    out.experiment = "comparator-equivalence";
    const auto cases = comparator_equivalence(p, d, ctx.config.experiments.equivalence_t_end, ctx.threads);
    std::ostringstream csv;
    csv << "training,input,expected,standard,comparator_first\n";
    int agree = 0;
    for (const auto& c : cases) {
        std::string t;
        for (int b : c.training) t += static_cast<char>('0' + b);
        csv << t << ',' << c.input << ',' << c.expected << ',' << c.standard << ',' << c.comparator_first << '\n';
        agree += c.standard == c.expected && c.comparator_first == c.expected;
    }
    out.files["equivalence.csv"] = csv.str();
    out.checks.push_back({"standard and comparator-first pixels agree with the logic oracle",
                          agree == static_cast<int>(cases.size()), fmt::format("{}/{} cases", agree, cases.size())});
    out.report = {{"training_count", p},
                  {"cases", cases.size()},
                  {"agree", agree},
                  {"standard_magnets", build_pixel_comparator_standard(p, d).magnets.size()},
                  {"comparator_first_magnets", build_pixel_comparator_first(p, d).magnets.size()}};
    return out;
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"fanin-study", "voltage-sweep", "xnor-table",    "compare3x3",
                                                "train-detect9x9", "prop1",    "calibrate-tau0", "comparator-equivalence"};
    return names;
}

ExperimentOutput run_experiment(const std::string& name, const RunContext& ctx) {
    ExperimentOutput out;
    if (name == "fanin-study") {
        out = run_fanin_study(ctx);
    } else if (name == "voltage-sweep") {
        out = run_voltage_sweep(ctx);
    } else if (name == "xnor-table") {
        out = run_xnor_table(ctx);
    } else if (name == "compare3x3") {
        out = run_compare3x3(ctx);
    } else if (name == "train-detect9x9") {
        out = run_train_detect9x9(ctx);
    } else if (name == "prop1") {
        out = run_prop1(ctx);
    } else if (name == "calibrate-tau0") {
        out = run_calibrate_tau0(ctx);
    } else if (name == "comparator-equivalence") {
        out = run_comparator_equivalence(ctx);
    } else {
        throw Error(ErrorKind::UnknownExperiment, "unknown experiment '" + name + "'");
    }
    json checks = json::array();
    for (const auto& c : out.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    out.report["experiment"] = name;
    out.report["seed"] = ctx.seed;
    out.report["checks"] = checks;
    out.report["passed"] = out.passed();
    out.report["parameters"] = describe(ctx.config);
    return out;
}

void write_outputs(const ExperimentOutput& output, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& contents) {
        const auto target = dir / name;
        auto tmp = target;
        tmp += ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
            f << contents;
            if (!f) throw Error(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
        }
        std::filesystem::rename(tmp, target);
    };
    for (const auto& [name, contents] : output.files) write(name, contents);
    write("report.json", output.report.dump(2) + "\n");
}

}  // namespace spinpat
