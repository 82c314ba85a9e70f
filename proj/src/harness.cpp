// Copyright 2026 The spectree Authors
// SPDX-License-Identifier: Apache-2.0

#include "spectree/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "spectree/stats.hpp"

namespace fs = std::filesystem;

namespace spectree {

namespace {

constexpr std::uint64_t kPairSalt = 0x3c6ef372fe94f82bULL;
constexpr std::uint64_t kTrialSalt = 0xa54ff53a5f1d36f1ULL;
constexpr std::uint64_t kTraceSalt = 0x510e527fade682d1ULL;

const char* const kCycleHeader = "cycle,policy,N,accepted_len,surrogate,t_draft,t_verify,t_aux,cum_tokens,cum_time";
const char* const kSummaryHeader = "pair,policy,trials,mean_speedup,se_speedup,mean_tau,se_tau,mean_n,se_n";

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("'" + key + "': not a number: '" + text + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
        throw std::invalid_argument("'" + key + "': not a non-negative integer: '" + text + "'");
    }
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        out.push_back(trim(cur));
    }
    if (!s.empty() && s.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "': file not found or unreadable");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Header-indexed CSV table of strings.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw std::invalid_argument("csv: missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    }
};

CsvTable read_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("csv '" + path.string() + "' is empty");
    }
    t.header = split(trim(line), ',');
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != t.header.size()) {
            throw std::invalid_argument("csv '" + path.string() + "' line " + std::to_string(lineno) +
                                        ": expected " + std::to_string(t.header.size()) + " fields");
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

std::string cell_file_name(const CellKey& key, const std::string& policy) {
    return "pair" + std::to_string(key.pair) + "_trial" + std::to_string(key.trial) + "_" + policy + ".csv";
}

SummaryRow summarize(std::size_t pair, const std::string& policy, const std::vector<TrialMetrics>& trials) {
    std::vector<double> sp;
    std::vector<double> tau;
    std::vector<double> n;
    for (const TrialMetrics& m : trials) {
        sp.push_back(m.speedup);
        tau.push_back(m.tau);
        n.push_back(m.mean_n);
    }
    SummaryRow row;
    row.pair = pair;
    row.policy = policy;
    row.trials = trials.size();
    row.mean_speedup = mean(sp);
    row.se_speedup = standard_error(sp);
    row.mean_tau = mean(tau);
    row.se_tau = standard_error(tau);
    row.mean_n = mean(n);
    row.se_n = standard_error(n);
    return row;
}

std::string summary_csv_text(const std::vector<SummaryRow>& rows) {
    std::string out = std::string(kSummaryHeader) + "\n";
    for (const SummaryRow& r : rows) {
        out += std::to_string(r.pair) + "," + r.policy + "," + std::to_string(r.trials) + "," +
               fmt(r.mean_speedup) + "," + fmt(r.se_speedup) + "," + fmt(r.mean_tau) + "," + fmt(r.se_tau) + "," +
               fmt(r.mean_n) + "," + fmt(r.se_n) + "\n";
    }
    return out;
}

} // namespace

SimulatedHardware HardwareProfile::hardware(std::uint64_t seed) const {
    SimulatedHardware hw;
    hw.params = params;
    hw.slope = sim_slope;
    hw.intercept = sim_intercept;
    hw.noise = sim_noise;
    hw.seed = seed;
    return hw;
}

HardwareProfile parse_profile(std::istream& in, std::string name) {
    HardwareProfile p;
    p.name = std::move(name);
    std::map<std::string, double> extra;
    p.params = parse_cost_params(in, &extra);
    for (const auto& [key, value] : extra) {
        if (key == "sim_slope") {
            p.sim_slope = value;
        } else if (key == "sim_intercept") {
            p.sim_intercept = value;
        } else if (key == "sim_noise") {
            p.sim_noise = value;
        } else if (key == "t_draft") {
            p.t_draft = value;
        } else if (key == "t_aux") {
            p.t_aux = value;
        } else {
            throw std::invalid_argument("profile: unknown key '" + key + "'");
        }
    }
    if (!(p.sim_slope > 0.0) || p.sim_intercept < 0.0 || p.sim_noise < 0.0 || p.sim_noise >= 0.5 ||
        p.t_draft < 0.0 || p.t_aux < 0.0) {
        throw std::invalid_argument("profile: sim_slope must be > 0; sim_intercept, t_draft, t_aux >= 0; "
                                    "sim_noise in [0, 0.5)");
    }
    return p;
}

HardwareProfile load_profile(const fs::path& path) {
    std::istringstream in(read_text(path));
    try {
        return parse_profile(in, path.stem().string());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void ExperimentConfig::validate() const {
    if (pairs.empty()) {
        throw std::invalid_argument("config: no synthetic pair (set alignment)");
    }
    for (const auto& p : pairs) {
        p.validate();
    }
    if (policies.empty()) {
        throw std::invalid_argument("config: empty policy list");
    }
    if (run_length == 0 || trials == 0) {
        throw std::invalid_argument("config: run_length and trials must be positive");
    }
    if (prompt_len == 0 || top_k == 0 || n_max == 0 || workers == 0) {
        throw std::invalid_argument("config: prompt_len, top_k, n_max and workers must be positive");
    }
    if (!(temperature >= 0.0)) {
        throw std::invalid_argument("config: temperature must be >= 0");
    }
    profile.params.validate();
}

ExperimentConfig parse_experiment_config(std::istream& in, const fs::path& base_dir) {
    ExperimentConfig cfg;
    SyntheticPairConfig pair_base;
    std::vector<double> alignments;
    std::vector<std::string> policy_names;
    bool have_profile = false;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not 'key = value'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "alignment") {
            alignments.push_back(to_double(key, value));
        } else if (key == "policy") {
            policy_names.push_back(value);
        } else if (key == "gamma") {
            pair_base.gamma = to_u64(key, value);
        } else if (key == "vocab") {
            pair_base.vocab_size = to_u64(key, value);
        } else if (key == "concentration") {
            pair_base.concentration = value == "inf" ? std::numeric_limits<double>::infinity() : to_double(key, value);
        } else if (key == "target") {
            if (value == "greedy") {
                cfg.target_mode = TargetMode::greedy_aligned;
            } else if (value == "sampled") {
                cfg.target_mode = TargetMode::sampled;
            } else {
                throw std::invalid_argument("config: target must be 'greedy' or 'sampled'");
            }
        } else if (key == "fixed_grid") {
            cfg.fixed_grid.clear();
            for (const auto& tok : split(value, ',')) {
                cfg.fixed_grid.push_back(to_u64(key, tok));
            }
        } else if (key == "profile") {
            fs::path p(value);
            cfg.profile = load_profile(p.is_absolute() ? p : base_dir / p);
            have_profile = true;
        } else if (key == "run_length") {
            cfg.run_length = to_u64(key, value);
        } else if (key == "trials") {
            cfg.trials = to_u64(key, value);
        } else if (key == "prompt_len") {
            cfg.prompt_len = to_u64(key, value);
        } else if (key == "top_k") {
            cfg.top_k = to_u64(key, value);
        } else if (key == "n_max") {
            cfg.n_max = to_u64(key, value);
        } else if (key == "temperature") {
            cfg.temperature = to_double(key, value);
        } else if (key == "variant") {
            cfg.variant = parse_variant(value);
        } else if (key == "seed") {
            cfg.seed = to_u64(key, value);
        } else if (key == "out") {
            cfg.out_dir = value;
        } else if (key == "workers") {
            cfg.workers = to_u64(key, value);
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    if (!have_profile) {
        throw std::invalid_argument("config: missing 'profile'");
    }
    for (double a : alignments) {
        SyntheticPairConfig pc = pair_base;
        pc.alignment = a;
        cfg.pairs.push_back(pc);
    }
    for (const auto& name : policy_names) {
        if (name == "fixed-grid") {
            for (std::size_t n : cfg.fixed_grid) {
                cfg.policies.push_back(Policy::fixed(n));
            }
        } else {
            cfg.policies.push_back(Policy::parse(name));
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::istringstream in(read_text(path));
    try {
        return parse_experiment_config(in, path.parent_path());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::vector<TraceRow> synthesize_trace(const HardwareProfile& profile, std::uint64_t seed) {
    SimulatedHardware hw = profile.hardware(mix(seed, kTraceSalt));
    std::vector<TraceRow> rows;
    std::uint64_t nonce = 0;
    for (std::int64_t c : {64, 256, 1024, 4096}) {
        for (std::int64_t s = 1; s <= 2048; s *= 2) {
            for (std::int64_t s_probe : {s, s + s / 2}) {
                TraceRow r;
                r.s = s_probe;
                r.c = c;
                r.observed = hw.verify_latency({r.s, r.c}, nonce++);
                rows.push_back(r);
            }
        }
    }
    return rows;
}

LatencyEstimator make_estimator(const HardwareProfile& profile, EstimatorVariant variant, std::uint64_t seed) {
    std::optional<CalibrationFit> fit;
    std::optional<EmaBias> bias;
    if (variant != EstimatorVariant::ema) {
        std::vector<TraceRow> trace = synthesize_trace(profile, seed);
        std::vector<LatencyPair> pairs = predict_trace(profile.params, trace);
        fit = fit_static_calibration(pairs);
    }
    if (variant != EstimatorVariant::static_calib) {
        bias = EmaBias{};
    }
    return LatencyEstimator(variant, profile.params, fit, bias);
}

double ar_step_latency(const HardwareProfile& profile, std::size_t context_len) {
    return profile.hardware(0).noise_free_latency({1, static_cast<std::int64_t>(context_len)});
}

TrialMetrics trial_metrics(std::span<const CycleRecord> records) {
    TrialMetrics m;
    m.speedup = realized_speedup(records);
    std::size_t tokens = 0;
    std::size_t nodes = 0;
    for (const CycleRecord& r : records) {
        tokens += r.accepted_len;
        nodes += r.tree_size;
    }
    const auto cycles = static_cast<double>(records.size());
    m.tau = static_cast<double>(tokens) / cycles;
    m.mean_n = static_cast<double>(nodes) / cycles;
    return m;
}

SyntheticPair cell_pair(const ExperimentConfig& cfg, std::size_t pair_index) {
    SyntheticPairConfig pc = cfg.pairs.at(pair_index);
    pc.seed = mix(mix(cfg.seed, kPairSalt), pair_index);
    return SyntheticPair(pc, cfg.target_mode);
}

DecodeConfig cell_decode_config(const ExperimentConfig& cfg, const CellKey& key) {
    const std::uint64_t trial_seed = mix(mix(cfg.seed, kTrialSalt), key.trial);
    DecodeConfig dc;
    dc.controller.n_max = cfg.n_max;
    dc.controller.variant = cfg.variant;
    dc.controller.latencies.t_draft = cfg.profile.t_draft;
    dc.controller.latencies.t_aux = cfg.profile.t_aux;
    dc.controller.latencies.l_ar = ar_step_latency(cfg.profile, cfg.prompt_len);
    dc.run_length = cfg.run_length;
    dc.prompt_len = cfg.prompt_len;
    dc.top_k = cfg.top_k;
    dc.temperature = cfg.temperature;
    dc.prompt_seed = trial_seed;
    dc.hardware = cfg.profile.hardware(trial_seed);
    if (cfg.policies.at(key.policy).kind == Policy::Kind::adaptive) {
        dc.estimator = make_estimator(cfg.profile, cfg.variant, cfg.seed);
    }
    return dc;
}

void write_cycle_csv(std::ostream& out, const std::string& policy, std::span<const CycleRecord> records) {
    out << kCycleHeader << '\n';
    std::size_t cum_tokens = 0;
    double cum_time = 0.0;
    for (const CycleRecord& r : records) {
        cum_tokens += r.accepted_len;
        cum_time += r.cycle_time();
        out << r.cycle << ',' << policy << ',' << r.tree_size << ',' << r.accepted_len << ',' << fmt(r.surrogate)
            << ',' << fmt(r.t_draft) << ',' << fmt(r.t_verify) << ',' << fmt(r.t_aux) << ',' << cum_tokens << ','
            << fmt(cum_time) << '\n';
    }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        }
        out << text;
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot finalize '" + path.string() + "'");
    }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path cells_dir = cfg.out_dir / "cells";
    {
        std::error_code ec;
        fs::create_directories(cells_dir, ec);
        if (ec) {
            throw std::runtime_error("output directory '" + cfg.out_dir.string() + "' is not writable: " +
                                     ec.message());
        }
        fs::path probe = cfg.out_dir / ".write_probe";
        std::ofstream out(probe);
        if (!out) {
            throw std::runtime_error("output directory '" + cfg.out_dir.string() + "' is not writable");
        }
        out.close();
        fs::remove(probe, ec);
    }

    std::vector<CellKey> cells;
    for (std::size_t p = 0; p < cfg.pairs.size(); ++p) {
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            for (std::size_t k = 0; k < cfg.policies.size(); ++k) {
                cells.push_back({p, t, k});
            }
        }
    }
    std::vector<SyntheticPair> pairs;
    for (std::size_t p = 0; p < cfg.pairs.size(); ++p) {
        pairs.push_back(cell_pair(cfg, p));
    }

    struct CellOutput {
        std::vector<CycleRecord> records;
        std::string error;
    };
    std::vector<CellOutput> outputs(cells.size());
    const auto n_cells = static_cast<std::int64_t>(cells.size());

#pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(cfg.workers))
    for (std::int64_t i = 0; i < n_cells; ++i) {
        const CellKey& key = cells[static_cast<std::size_t>(i)];
        CellOutput& slot = outputs[static_cast<std::size_t>(i)];
        const Policy& policy = cfg.policies[key.policy];
        try {
            DecodeResult res = decode(pairs[key.pair], cell_decode_config(cfg, key), policy);
            std::ostringstream csv;
            write_cycle_csv(csv, policy.name(), res.records);
            write_file_atomic(cells_dir / cell_file_name(key, policy.name()), csv.str());
            slot.records = std::move(res.records);
        } catch (const std::exception& e) {
            slot.records.clear();
            slot.error = "pair " + std::to_string(key.pair) + " trial " + std::to_string(key.trial) + " " +
                         policy.name() + ": " + e.what();
        }
    }

    ExperimentResult result;
    result.raw_csv = cfg.out_dir / "raw.csv";
    result.summary_csv = cfg.out_dir / "summary.csv";

    std::ostringstream raw;
    raw << "pair,trial,l_ar," << kCycleHeader << '\n';
    // metrics[pair][policy] holds per-trial metrics in trial order.
    std::vector<std::vector<std::vector<TrialMetrics>>> metrics(
        cfg.pairs.size(), std::vector<std::vector<TrialMetrics>>(cfg.policies.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const CellKey& key = cells[i];
        if (!outputs[i].error.empty()) {
            result.failures.push_back(outputs[i].error);
            continue;
        }
        const auto& records = outputs[i].records;
        std::ostringstream body;
        write_cycle_csv(body, cfg.policies[key.policy].name(), records);
        std::istringstream lines(body.str());
        std::string line;
        std::getline(lines, line); // header
        const std::string prefix =
            std::to_string(key.pair) + "," + std::to_string(key.trial) + "," + fmt(records.front().l_ar) + ",";
        while (std::getline(lines, line)) {
            raw << prefix << line << '\n';
        }
        metrics[key.pair][key.policy].push_back(trial_metrics(records));
    }
    for (std::size_t p = 0; p < cfg.pairs.size(); ++p) {
        for (std::size_t k = 0; k < cfg.policies.size(); ++k) {
            if (!metrics[p][k].empty()) {
                result.summary.push_back(summarize(p, cfg.policies[k].name(), metrics[p][k]));
            }
        }
    }
    write_file_atomic(result.raw_csv, raw.str());
    write_file_atomic(result.summary_csv, summary_csv_text(result.summary));
    return result;
}

std::vector<SummaryRow> summarize_raw_csv(const fs::path& raw_csv) {
    CsvTable t = read_csv(raw_csv);
    const std::size_t c_pair = t.column("pair");
    const std::size_t c_trial = t.column("trial");
    const std::size_t c_lar = t.column("l_ar");
    const std::size_t c_policy = t.column("policy");
    const std::size_t c_n = t.column("N");
    const std::size_t c_tokens = t.column("cum_tokens");
    const std::size_t c_time = t.column("cum_time");

    // A run is a maximal block of rows sharing (pair, trial, policy); the
    // last row of a run carries its cumulative totals.
    struct Run {
        std::size_t pair;
        std::string policy;
        std::size_t cycles = 0;
        std::size_t nodes = 0;
        std::size_t tokens = 0;
        double time = 0.0;
        double l_ar = 0.0;
    };
    std::vector<Run> runs;
    std::string prev_key;
    for (const auto& row : t.rows) {
        std::string key = row[c_pair] + "/" + row[c_trial] + "/" + row[c_policy];
        if (runs.empty() || key != prev_key) {
            runs.push_back({to_u64("pair", row[c_pair]), row[c_policy]});
            prev_key = key;
        }
        Run& r = runs.back();
        r.cycles += 1;
        r.nodes += to_u64("N", row[c_n]);
        r.tokens = to_u64("cum_tokens", row[c_tokens]);
        r.time = to_double("cum_time", row[c_time]);
        r.l_ar = to_double("l_ar", row[c_lar]);
    }

    // Group runs by (pair, policy) keeping first-appearance order within a
    // pair, which is the config's policy order.
    std::vector<std::pair<std::size_t, std::string>> order;
    std::map<std::pair<std::size_t, std::string>, std::vector<TrialMetrics>> groups;
    for (const Run& r : runs) {
        auto k = std::make_pair(r.pair, r.policy);
        if (!groups.count(k)) {
            order.push_back(k);
        }
        TrialMetrics m;
        m.speedup = static_cast<double>(r.tokens) * r.l_ar / r.time;
        m.tau = static_cast<double>(r.tokens) / static_cast<double>(r.cycles);
        m.mean_n = static_cast<double>(r.nodes) / static_cast<double>(r.cycles);
        groups[k].push_back(m);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<SummaryRow> out;
    for (const auto& k : order) {
        out.push_back(summarize(k.first, k.second, groups[k]));
    }
    return out;
}

std::vector<SummaryRow> read_summary_csv(const fs::path& summary_csv) {
    CsvTable t = read_csv(summary_csv);
    std::vector<SummaryRow> out;
    for (const auto& row : t.rows) {
        SummaryRow r;
        r.pair = to_u64("pair", row[t.column("pair")]);
        r.policy = row[t.column("policy")];
        r.trials = to_u64("trials", row[t.column("trials")]);
        r.mean_speedup = to_double("mean_speedup", row[t.column("mean_speedup")]);
        r.se_speedup = to_double("se_speedup", row[t.column("se_speedup")]);
        r.mean_tau = to_double("mean_tau", row[t.column("mean_tau")]);
        r.se_tau = to_double("se_tau", row[t.column("se_tau")]);
        r.mean_n = to_double("mean_n", row[t.column("mean_n")]);
        r.se_n = to_double("se_n", row[t.column("se_n")]);
        out.push_back(std::move(r));
    }
    return out;
}

CalibrationFit calibrate(const HardwareProfile& profile, const fs::path& trace,
                         const fs::path& report_path) {
    std::istringstream in(read_text(trace));
    std::vector<TraceRow> rows = read_latency_trace(in);
    std::vector<LatencyPair> pairs = predict_trace(profile.params, rows);
    CalibrationFit fit = fit_static_calibration(pairs);
    if (!report_path.empty()) {
        std::ostringstream rep;
        rep << "profile = " << profile.name << '\n'
            << "points = " << rows.size() << '\n'
            << "slope = " << fmt(fit.slope) << '\n'
            << "intercept = " << fmt(fit.intercept) << '\n'
            << "rmse_before = " << fmt(fit.rmse_before) << '\n'
            << "rmse_after = " << fmt(fit.rmse_after) << '\n'
            << "reduction_percent = " << fmt(100.0 * fit.rmse_reduction()) << '\n';
        write_file_atomic(report_path, rep.str());
    }
    return fit;
}

Correlation correlate(std::span<const double> surrogate, std::span<const double> accepted_len) {
    if (surrogate.size() != accepted_len.size()) {
        throw std::invalid_argument("correlate: columns differ in length");
    }
    if (surrogate.size() < 30) {
        throw std::invalid_argument("correlate: need at least 30 cycles, got " + std::to_string(surrogate.size()));
    }
    Correlation c;
    c.n = surrogate.size();
    c.pearson = pearson(surrogate, accepted_len);
    c.spearman = spearman(surrogate, accepted_len);
    return c;
}

Correlation correlate(const fs::path& cycle_csv) {
    CsvTable t = read_csv(cycle_csv);
    const std::size_t cs = t.column("surrogate");
    const std::size_t ca = t.column("accepted_len");
    std::vector<double> s;
    std::vector<double> a;
    for (const auto& row : t.rows) {
        s.push_back(to_double("surrogate", row[cs]));
        a.push_back(to_double("accepted_len", row[ca]));
    }
    return correlate(s, a);
}

TopologyComparison compare_topologies(const SyntheticPair& pair, std::size_t width, std::size_t depth,
                                      std::size_t top_k, std::size_t cycles, std::uint64_t prompt_seed,
                                      std::size_t prompt_len) {
    if (cycles == 0) {
        throw std::invalid_argument("compare_topologies: cycles must be >= 1");
    }
    const TargetRule& target = pair.target();
    SimCache cache = make_prompt(prompt_len, pair.config().vocab_size, prompt_seed);
    TopologyComparison out;
    for (std::size_t i = 0; i < cycles; ++i) {
        auto block = std::make_shared<const MarginalBlock>(pair.draft(cache.hash()));
        CandidateLattice lattice = top_k_truncate(block, std::min(top_k, block->vocab_size()));
        const std::size_t prefix_len = cache.size() - 1;

        DraftTree beam = beam_expand(lattice, width, std::min(depth, lattice.gamma()));
        DraftTree best = best_first_expand(lattice, beam.draft_count());
        DraftTree chain = beam_expand(lattice, 1, lattice.gamma());

        auto accept = [&](const DraftTree& tree) {
            return verify_tree(linearize(tree, prefix_len), tree, target, 0.0, cache);
        };
        AcceptanceRecord rb = accept(best);
        out.best_first.push_back(static_cast<double>(rb.accepted_len));
        out.beam.push_back(static_cast<double>(accept(beam).accepted_len));
        out.chain.push_back(static_cast<double>(accept(chain).accepted_len));
        out.budgets.push_back(beam.draft_count());
        cache = commit(cache, rb, best);
    }
    return out;
}

} // namespace spectree
