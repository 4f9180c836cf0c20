#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "anonphy/simulation.hpp"

#ifndef ANONPHY_VERSION
#define ANONPHY_VERSION "unknown"
#endif

namespace anonphy {

/// Bad configuration input. `line` is 1-based, 0 when the input has no line
/// (command-line overrides).
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& msg)
        : std::runtime_error(format(source, line, msg)), line_(line) {}

    int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& source, int line, const std::string& msg) {
        std::string out = source;
        if (line > 0) out += ":" + std::to_string(line);
        return out + ": " + msg;
    }
    int line_;
};

/// A runnable experiment: base system, the precoders to compare and a sweep axis.
struct Experiment {
    std::string name;
    SystemConfig base;
    std::vector<Precoder> precoders;
    SweepAxis axis;
    bool seed_explicit = false;  // seed came from the config file or an override
};

// ---------------------------------------------------------------------------
// Value parsing shared by config files and overrides

namespace detail {

inline std::string trim(std::string s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && ws(s.back())) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && ws(s[i])) ++i;
    s.erase(0, i);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline double parse_double(const std::string& v) {
    std::size_t pos = 0;
    const std::string t = trim(v);
    double d = 0.0;
    try {
        d = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("expected a number, got '" + t + "'");
    }
    if (pos != t.size()) throw std::invalid_argument("expected a number, got '" + t + "'");
    return d;
}

inline long long parse_integer(const std::string& v) {
    const double d = parse_double(v);
    if (d != std::floor(d) || std::abs(d) > 9.0e15) throw std::invalid_argument("expected an integer, got '" + trim(v) + "'");
    return static_cast<long long>(d);
}

inline bool parse_bool(const std::string& v) {
    const std::string t = lower(trim(v));
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw std::invalid_argument("expected true or false, got '" + trim(v) + "'");
}

/// Splits "[a, b, [c, d]]" into its top-level items.
inline std::vector<std::string> split_list(const std::string& v) {
    std::string t = trim(v);
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
    std::vector<std::string> items;
    std::string cur;
    int depth = 0;
    for (char c : t) {
        if (c == '[') ++depth;
        if (c == ']') --depth;
        if (depth < 0) throw std::invalid_argument("unbalanced brackets in list");
        if (c == ',' && depth == 0) {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (depth != 0) throw std::invalid_argument("unbalanced brackets in list");
    if (!trim(cur).empty()) items.push_back(trim(cur));
    return items;
}

inline std::vector<double> parse_numbers(const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_double(item));
    return out;
}

inline Precoder parse_precoder(const std::string& v) {
    const std::string t = lower(trim(v));
    if (t == "isa") return Precoder::ISA;
    if (t == "cia") return Precoder::CIA;
    if (t == "mmse") return Precoder::MMSE;
    if (t == "svd") return Precoder::SVD;
    if (t == "ci") return Precoder::CI;
    throw std::invalid_argument("unknown precoder '" + trim(v) + "' (ISA, CIA, MMSE, SVD, CI)");
}

inline Scenario parse_scenario(const std::string& v) {
    const std::string t = lower(trim(v));
    if (t == "strong-sender" || t == "strongsender" || t == "ss") return Scenario::StrongSender;
    if (t == "strong-receiver" || t == "strongreceiver" || t == "sr") return Scenario::StrongReceiver;
    throw std::invalid_argument("unknown scenario '" + trim(v) + "' (strong-sender, strong-receiver)");
}

inline DetectorChoice parse_detector(const std::string& v) {
    const std::string t = lower(trim(v));
    if (t == "auto") return DetectorChoice::Auto;
    if (t == "mle") return DetectorChoice::MLE;
    if (t == "mnorm" || t == "m-norm") return DetectorChoice::MNorm;
    if (t == "mmse") return DetectorChoice::MMSE;
    if (t == "uniform") return DetectorChoice::Uniform;
    throw std::invalid_argument("unknown detector '" + trim(v) + "' (auto, MLE, MNorm, MMSE, uniform)");
}

inline AxisKind parse_axis(const std::string& v) {
    const std::string t = lower(trim(v));
    if (t == "snr") return AxisKind::Snr;
    if (t == "antennas") return AxisKind::Antennas;
    if (t == "threshold" || t == "thresholds") return AxisKind::Threshold;
    throw std::invalid_argument("unknown sweep axis '" + trim(v) + "' (snr, antennas, threshold)");
}

inline Aggregation parse_aggregation(const std::string& v) {
    const std::string t = lower(trim(v));
    if (t == "block") return Aggregation::Block;
    if (t == "symbol") return Aggregation::Symbol;
    throw std::invalid_argument("unknown aggregation '" + trim(v) + "' (block, symbol)");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Presets

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"ss-snr",          "ss-antennas", "ss-thresholds", "isa-convergence",
                                                "sr-snr",          "sr-antennas", "sr-thresholds"};
    return names;
}

/// Built-in experiments. `fast` swaps the 10-antenna arrays for 4-antenna
/// ones; the strong sender thresholds are scaled by (4/10)^2 with them.
inline Experiment make_preset(const std::string& name, bool fast = false) {
    Experiment e;
    e.name = fast ? name + "-fast" : name;
    SystemConfig& c = e.base;
    const bool ss = name.rfind("ss-", 0) == 0 || name == "isa-convergence";
    const bool sr = name.rfind("sr-", 0) == 0;
    if (!ss && !sr) throw std::invalid_argument("unknown preset '" + name + "'");

    const double scale = fast ? 0.16 : 1.0;
    if (ss) {
        c.scenario = Scenario::StrongSender;
        c.n_r = c.n_t = fast ? 4 : 10;
        c.epsilon = 20.0 * scale;
        c.zeta = 8.0 * scale;
        e.precoders = {Precoder::ISA, Precoder::CIA, Precoder::MMSE, Precoder::SVD, Precoder::CI};
    } else {
        c.scenario = Scenario::StrongReceiver;
        c.n_r = fast ? 4 : 10;
        c.n_t = fast ? 3 : 9;
        c.delta = 0.03;
        e.precoders = {Precoder::CIA, Precoder::MMSE, Precoder::SVD, Precoder::CI};
    }

    if (name == "ss-snr" || name == "sr-snr") {
        e.axis.kind = AxisKind::Snr;
        c.snr_grid = {0, 5, 10, 15, 20, 25, 30};
    } else if (name == "ss-antennas") {
        e.axis.kind = AxisKind::Antennas;
        c.snr_grid = {20};
        for (int nt : fast ? std::vector<int>{4, 5, 6, 7} : std::vector<int>{10, 12, 14, 16})
            e.axis.antennas.push_back({c.n_r, nt});
    } else if (name == "sr-antennas") {
        e.axis.kind = AxisKind::Antennas;
        c.snr_grid = {20};
        for (int nt : fast ? std::vector<int>{2, 3, 4, 5} : std::vector<int>{5, 7, 9, 11})
            e.axis.antennas.push_back({nt + 1, nt});
    } else if (name == "ss-thresholds") {
        e.axis.kind = AxisKind::Threshold;
        c.snr_grid = {20};
        const std::vector<double> eps{5, 10, 20, 30, 45}, zeta{2, 4, 6, 8, 32};
        for (std::size_t i = 0; i < eps.size(); ++i) e.axis.thresholds.push_back({eps[i] * scale, zeta[i] * scale, c.delta});
    } else if (name == "sr-thresholds") {
        e.axis.kind = AxisKind::Threshold;
        c.snr_grid = {20};
        for (double d : {0.01, 0.03, 0.1, 0.3, 1.0}) e.axis.thresholds.push_back({c.epsilon, c.zeta, d});
    } else if (name == "isa-convergence") {
        e.axis.kind = AxisKind::Snr;
        c.snr_grid = {20};
        e.precoders = {Precoder::ISA};
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    c.precoder = e.precoders.front();
    return e;
}

// ---------------------------------------------------------------------------
// Configuration keys

/// Applies one `key = value` setting. Throws std::invalid_argument on bad input.
inline void set_key(Experiment& e, const std::string& raw_key, const std::string& value) {
    using namespace detail;
    std::string key = lower(trim(raw_key));
    std::replace(key.begin(), key.end(), '-', '_');
    SystemConfig& c = e.base;
    auto positive_int = [&](const char* what) {
        const long long v = parse_integer(value);
        if (v < 1 || v > 1000000000) throw std::invalid_argument(std::string(what) + " must be a positive integer");
        return static_cast<int>(v);
    };

    if (key == "name") e.name = trim(value);
    else if (key == "k") c.k = positive_int("k");
    else if (key == "n_r") c.n_r = positive_int("n_r");
    else if (key == "n_t") c.n_t = positive_int("n_t");
    else if (key == "p_max") c.p_max = parse_double(value);
    else if (key == "snr_grid" || key == "snr") c.snr_grid = parse_numbers(value);
    else if (key == "m") c.m = positive_int("m");
    else if (key == "epsilon") c.epsilon = parse_double(value);
    else if (key == "zeta") c.zeta = parse_double(value);
    else if (key == "delta") c.delta = parse_double(value);
    else if (key == "beta") c.beta = parse_double(value);
    else if (key == "tau") c.tau = parse_double(value);
    else if (key == "gamma_l") c.gamma_l = parse_double(value);
    else if (key == "gamma_r") c.gamma_r = parse_double(value);
    else if (key == "block_len") c.block_len = positive_int("block_len");
    else if (key == "n_blocks" || key == "blocks") c.n_blocks = positive_int("n_blocks");
    else if (key == "seed") {
        const long long v = parse_integer(value);
        if (v < 0) throw std::invalid_argument("seed must be non-negative");
        c.seed = static_cast<std::uint64_t>(v);
        e.seed_explicit = true;
    } else if (key == "scenario") c.scenario = parse_scenario(value);
    else if (key == "precoder" || key == "precoders") {
        e.precoders.clear();
        for (const auto& item : split_list(value)) e.precoders.push_back(parse_precoder(item));
        if (e.precoders.empty()) throw std::invalid_argument("precoders must not be empty");
        c.precoder = e.precoders.front();
    } else if (key == "detector") c.detector = parse_detector(value);
    else if (key == "aggregation") c.aggregation = parse_aggregation(value);
    else if (key == "svd_genie") c.svd_genie = parse_bool(value);
    else if (key == "mmse_instantaneous") c.mmse_instantaneous = parse_bool(value);
    else if (key == "failure_budget") c.failure_budget = parse_double(value);
    else if (key == "axis") e.axis.kind = parse_axis(value);
    else if (key == "antennas") {
        e.axis.antennas.clear();
        for (const auto& item : split_list(value)) {
            const auto pair = parse_numbers(item);
            if (pair.size() != 2) throw std::invalid_argument("antennas entries must be [n_r, n_t] pairs");
            e.axis.antennas.push_back({static_cast<int>(pair[0]), static_cast<int>(pair[1])});
        }
    } else if (key == "thresholds") {
        e.axis.thresholds.clear();
        for (const auto& item : split_list(value)) {
            const auto t = parse_numbers(item);
            if (t.size() != 3) throw std::invalid_argument("thresholds entries must be [epsilon, zeta, delta] triples");
            e.axis.thresholds.push_back({t[0], t[1], t[2]});
        }
    } else {
        throw std::invalid_argument("unknown key '" + trim(raw_key) + "'");
    }
}

/// Checks the experiment as a whole, including every sweep point.
inline void validate_experiment(const Experiment& e) {
    if (e.precoders.empty()) throw std::invalid_argument("invalid configuration: no precoders selected");
    if (e.name.empty()) throw std::invalid_argument("invalid configuration: empty experiment name");
    for (Precoder p : e.precoders) {
        SystemConfig c = e.base;
        c.precoder = p;
        for (const auto& [pc, snr] : sweep_points(c, e.axis)) pc.validate();
    }
}

/// Reads an INI-style file: `[section]` tables of `key = value` lines, `#`
/// or `;` comments, lists written as `[a, b]`. An optional `preset` key
/// (with optional `fast = true`) selects the starting point; every other key
/// overrides it. Section names are only for grouping.
inline Experiment load_experiment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open configuration file");
    std::stringstream buf;
    buf << in.rdbuf();
    // Drop trailing "# ..." / "; ..." comments; the INI reader only knows whole-line ones.
    std::string text;
    {
        std::string line;
        while (std::getline(buf, line)) {
            for (std::size_t i = 1; i < line.size(); ++i) {
                if ((line[i] == '#' || line[i] == ';') && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
                    line.erase(i);
                    break;
                }
            }
            text += line + "\n";
        }
    }

    boost::property_tree::ptree tree;
    try {
        std::istringstream is(text);
        boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& err) {
        throw ConfigError(path, static_cast<int>(err.line()), err.message());
    }

    // Line of each key, for messages; the INI reader does not keep positions.
    std::map<std::string, int> line_of;
    {
        std::istringstream is(text);
        std::string line, section;
        int no = 0;
        while (std::getline(is, line)) {
            ++no;
            const std::string t = detail::trim(line);
            if (t.empty() || t[0] == '#' || t[0] == ';') continue;
            if (t.front() == '[' && t.back() == ']') {
                section = detail::trim(t.substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = detail::trim(t.substr(0, eq));
            line_of.emplace(section.empty() ? key : section + "." + key, no);
        }
    }

    // Flatten to (qualified key, key, value) in file order.
    struct Entry {
        std::string qualified, key, value;
    };
    std::vector<Entry> entries;
    for (const auto& [name, node] : tree) {
        if (node.empty()) {
            entries.push_back({name, name, node.data()});
        } else {
            for (const auto& [k, v] : node) entries.push_back({name + "." + k, k, v.data()});
        }
    }
    auto line_for = [&](const std::string& q) {
        auto it = line_of.find(q);
        return it == line_of.end() ? 0 : it->second;
    };

    std::string preset;
    bool fast = false;
    int preset_line = 0;
    for (const auto& en : entries) {
        const std::string k = detail::lower(en.key);
        if (k == "preset") {
            preset = detail::trim(en.value);
            preset_line = line_for(en.qualified);
        } else if (k == "fast") {
            try {
                fast = detail::parse_bool(en.value);
            } catch (const std::invalid_argument& err) {
                throw ConfigError(path, line_for(en.qualified), err.what());
            }
        }
    }

    Experiment e;
    if (!preset.empty()) {
        try {
            e = make_preset(preset, fast);
        } catch (const std::invalid_argument& err) {
            throw ConfigError(path, preset_line, err.what());
        }
    } else {
        e.name = std::filesystem::path(path).stem().string();
        e.precoders = {e.base.precoder};
    }
    for (const auto& en : entries) {
        const std::string k = detail::lower(en.key);
        if (k == "preset" || k == "fast") continue;
        try {
            set_key(e, en.key, en.value);
        } catch (const std::invalid_argument& err) {
            throw ConfigError(path, line_for(en.qualified), std::string(err.what()) + " (key '" + en.key + "')");
        }
    }
    try {
        validate_experiment(e);
    } catch (const std::invalid_argument& err) {
        throw ConfigError(path, 0, err.what());
    }
    return e;
}

// ---------------------------------------------------------------------------
// Running and reporting

struct ExperimentRun {
    Experiment experiment;
    std::vector<std::pair<Precoder, SweepReport>> reports;
    double wall_seconds = 0.0;
    long total_blocks = 0;
    long failed_blocks = 0;

    bool over_failure_budget() const {
        return total_blocks > 0 &&
               static_cast<double>(failed_blocks) / static_cast<double>(total_blocks) > experiment.base.failure_budget;
    }
};

/// Threshold sweeps only vary the anonymous designs; the benchmarks ignore
/// the thresholds and run once at the first point.
inline SweepAxis axis_for(const Experiment& e, Precoder p) {
    SweepAxis a = e.axis;
    const bool uses_threshold = p == Precoder::ISA || p == Precoder::CIA;
    if (a.kind == AxisKind::Threshold && !uses_threshold && a.thresholds.size() > 1) a.thresholds.resize(1);
    return a;
}

inline ExperimentRun run_experiment(const Experiment& e, const SweepOptions& opt = {}) {
    validate_experiment(e);
    ExperimentRun run;
    run.experiment = e;
    const auto t0 = std::chrono::steady_clock::now();
    for (Precoder p : e.precoders) {
        SystemConfig c = e.base;
        c.precoder = p;
        SweepReport rep = run_sweep(c, axis_for(e, p), opt);
        run.total_blocks += rep.total_blocks();
        run.failed_blocks += rep.failed_blocks();
        run.reports.emplace_back(p, std::move(rep));
    }
    run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

inline constexpr const char* kCsvHeader =
    "scenario,precoder,detector,snr_db,n_t,n_r,k,epsilon,zeta,delta,blocks,der,ser,entropy_bits,mean_objective,"
    "mean_iterations,seed";

inline std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string csv_row(const SweepPoint& p) {
    const SystemConfig& c = p.cfg;
    const PointMetrics& m = p.metrics;
    std::string row;
    row += std::string(to_string(c.scenario)) + ",";
    row += std::string(to_string(c.precoder)) + ",";
    row += std::string(to_string(c.resolved_detector())) + ",";
    row += format_g6(p.snr_db) + ",";
    row += std::to_string(c.n_t) + "," + std::to_string(c.n_r) + "," + std::to_string(c.k) + ",";
    row += format_g6(c.epsilon) + "," + format_g6(c.zeta) + "," + format_g6(c.delta) + ",";
    row += std::to_string(m.blocks) + ",";
    row += format_g6(m.der) + "," + format_g6(m.ser) + "," + format_g6(m.entropy_bits) + ",";
    row += format_g6(m.mean_objective) + "," + format_g6(m.mean_iterations) + ",";
    row += std::to_string(c.seed);
    return row;
}

inline std::string csv_text(const ExperimentRun& run) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& [p, rep] : run.reports)
        for (const auto& pt : rep.points) out += csv_row(pt) + "\n";
    return out;
}

inline nlohmann::json config_to_json(const SystemConfig& c) {
    return {{"k", c.k},
            {"n_r", c.n_r},
            {"n_t", c.n_t},
            {"p_max", c.p_max},
            {"snr_grid", c.snr_grid},
            {"m", c.m},
            {"epsilon", c.epsilon},
            {"zeta", c.zeta},
            {"delta", c.delta},
            {"beta", c.beta},
            {"tau", c.tau},
            {"gamma_l", c.gamma_l},
            {"gamma_r", c.gamma_r},
            {"block_len", c.block_len},
            {"n_blocks", c.n_blocks},
            {"seed", c.seed},
            {"scenario", to_string(c.scenario)},
            {"detector", to_string(c.detector)},
            {"aggregation", to_string(c.aggregation)},
            {"svd_genie", c.svd_genie},
            {"mmse_instantaneous", c.mmse_instantaneous},
            {"failure_budget", c.failure_budget}};
}

inline nlohmann::json manifest_json(const ExperimentRun& run, const std::vector<std::string>& command = {}) {
    const Experiment& e = run.experiment;
    nlohmann::json j;
    j["name"] = e.name;
    j["version"] = ANONPHY_VERSION;
    j["rng"] = kRngIdentity;
    j["command"] = command;
    j["config"] = config_to_json(e.base);
    std::vector<std::string> pre;
    for (Precoder p : e.precoders) pre.push_back(to_string(p));
    j["config"]["precoders"] = pre;
    j["sweep"]["axis"] = to_string(e.axis.kind);
    if (e.axis.kind == AxisKind::Antennas) {
        for (const auto& a : e.axis.antennas) j["sweep"]["antennas"].push_back({a.n_r, a.n_t});
    }
    if (e.axis.kind == AxisKind::Threshold) {
        for (const auto& t : e.axis.thresholds) j["sweep"]["thresholds"].push_back({t.epsilon, t.zeta, t.delta});
    }
    j["snr_definition"] = "snr_db = 10 log10(p_max / sigma2)";
    j["wall_time_seconds"] = run.wall_seconds;
    j["total_blocks"] = run.total_blocks;
    j["failed_blocks"] = run.failed_blocks;
    j["failure_budget_exceeded"] = run.over_failure_budget();
    for (const auto& [p, rep] : run.reports) {
        for (const auto& pt : rep.points) {
            const auto& m = pt.metrics;
            j["points"].push_back({{"precoder", to_string(p)},
                                   {"snr_db", pt.snr_db},
                                   {"n_r", pt.cfg.n_r},
                                   {"n_t", pt.cfg.n_t},
                                   {"epsilon", pt.cfg.epsilon},
                                   {"zeta", pt.cfg.zeta},
                                   {"delta", pt.cfg.delta},
                                   {"blocks", m.blocks},
                                   {"failed", m.failed},
                                   {"infeasible", m.infeasible},
                                   {"degraded", m.degraded},
                                   {"symbols", m.symbols},
                                   {"symbol_errors", m.symbol_errors},
                                   {"misdeclared", m.misdeclared},
                                   {"declared_distribution", m.declared_distribution},
                                   {"max_iterations", m.max_iterations},
                                   {"max_power_ratio", m.max_power_ratio},
                                   {"max_anonymity_ratio", m.max_anonymity_ratio},
                                   {"min_margin_slack", std::isfinite(m.min_margin_slack)
                                                            ? nlohmann::json(m.min_margin_slack)
                                                            : nlohmann::json(nullptr)}});
        }
    }
    return j;
}

/// Per-block ISA bisection rounds, written by the convergence experiment.
inline std::string iterations_csv(const ExperimentRun& run) {
    std::string out = "precoder,snr_db,block,iterations,objective\n";
    for (const auto& [p, rep] : run.reports) {
        if (p != Precoder::ISA) continue;
        for (const auto& pt : rep.points) {
            for (std::size_t b = 0; b < pt.records.size(); ++b) {
                const auto& r = pt.records[b];
                out += std::string(to_string(p)) + "," + format_g6(pt.snr_db) + "," + std::to_string(b) + "," +
                       std::to_string(r.iterations) + "," + format_g6(r.objective) + "\n";
            }
        }
    }
    return out;
}

inline double axis_value(const SweepPoint& pt, AxisKind axis, Precoder p) {
    switch (axis) {
        case AxisKind::Snr: return pt.snr_db;
        case AxisKind::Antennas: return pt.cfg.n_t;
        case AxisKind::Threshold:
            if (p == Precoder::ISA) return pt.cfg.epsilon;
            return pt.cfg.scenario == Scenario::StrongSender ? pt.cfg.zeta : pt.cfg.delta;
    }
    return 0.0;
}

/// Static SVG line chart of one metric against the sweep axis (log scale on y).
inline std::string svg_plot(const ExperimentRun& run, bool ser) {
    const double w = 640, h = 420, ml = 70, mr = 120, mt = 30, mb = 50;
    const AxisKind axis = run.experiment.axis.kind;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    const double floor_v = 1e-4;
    for (const auto& [p, rep] : run.reports)
        for (const auto& pt : rep.points) {
            const double x = axis_value(pt, axis, p);
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
        }
    if (!(xmax > xmin)) {
        xmin -= 1.0;
        xmax += 1.0;
    }
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double v) {
        const double lv = std::log10(std::max(v, floor_v));
        return mt + (0.0 - lv) / 4.0 * (h - mt - mb);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << run.experiment.name << ": "
      << (ser ? "SER" : "DER") << "</text>\n";
    for (int d = 0; d <= 4; ++d) {
        const double y = py(std::pow(10.0, -d));
        o << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << w - mr << "\" y2=\"" << y
          << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\" font-size=\"11\">1e-" << d
          << "</text>\n";
    }
    o << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << (axis == AxisKind::Snr ? "SNR (dB)" : axis == AxisKind::Antennas ? "N_t" : "threshold") << "</text>\n";
    int ci = 0;
    for (const auto& [p, rep] : run.reports) {
        const char* col = colors[ci % 5];
        std::ostringstream pts;
        for (const auto& pt : rep.points)
            pts << px(axis_value(pt, axis, p)) << "," << py(ser ? pt.metrics.ser : pt.metrics.der) << " ";
        o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
        for (const auto& pt : rep.points)
            o << "<circle cx=\"" << px(axis_value(pt, axis, p)) << "\" cy=\""
              << py(ser ? pt.metrics.ser : pt.metrics.der) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
        o << "<text x=\"" << w - mr + 10 << "\" y=\"" << mt + 18 * (ci + 1) << "\" font-size=\"12\" fill=\"" << col
          << "\">" << to_string(p) << "</text>\n";
        ++ci;
    }
    o << "</svg>\n";
    return o.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

/// Writes the CSV, the manifest and optionally the plots; returns the paths written.
inline std::vector<std::filesystem::path> write_outputs(const ExperimentRun& run, const std::filesystem::path& dir,
                                                        bool plots, const std::vector<std::string>& command = {}) {
    std::filesystem::create_directories(dir);
    const std::string stem = run.experiment.name;
    std::vector<std::filesystem::path> written;
    written.push_back(dir / (stem + ".csv"));
    write_file(written.back(), csv_text(run));
    written.push_back(dir / (stem + ".manifest.json"));
    write_file(written.back(), manifest_json(run, command).dump(2) + "\n");
    const bool has_isa = std::any_of(run.reports.begin(), run.reports.end(),
                                     [](const auto& r) { return r.first == Precoder::ISA; });
    if (has_isa && stem.rfind("isa-convergence", 0) == 0) {
        written.push_back(dir / (stem + "_iterations.csv"));
        write_file(written.back(), iterations_csv(run));
    }
    if (plots) {
        written.push_back(dir / (stem + "_der.svg"));
        write_file(written.back(), svg_plot(run, false));
        written.push_back(dir / (stem + "_ser.svg"));
        write_file(written.back(), svg_plot(run, true));
    }
    return written;
}

}  // namespace anonphy
