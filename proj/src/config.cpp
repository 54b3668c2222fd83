#include "config.hpp"

#include <fstream>

#include "csv.hpp"
#include "errors.hpp"

namespace crx {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    fail(CRX_E_INVALID_ARG, "config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), CRX_E_IO, "cannot open config " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, CRX_E_INVALID_ARG,
                path + ":" + std::to_string(lineno) + ": expected key=value");
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto num = [&] { return csv::parse_double(value, "config " + key); };
    auto positive = [&](double v) {
        require(v > 0, CRX_E_INVALID_ARG, "config: " + key + " must be positive");
        return v;
    };

    if (key == "analysis_rate_hz") analysis_rate_hz = positive(num());
    else if (key == "ecg_rate_hz") ecg_rate_hz = positive(num());
    else if (key == "window_short_s") windows.short_s = positive(num());
    else if (key == "window_long_s") windows.long_s = positive(num());
    else if (key == "window_power_s") windows.power_s = positive(num());
    else if (key == "window_stft_s") windows.stft_s = positive(num());
    else if (key == "window_corr_s") windows.corr_s = positive(num());
    else if (key == "theta_mvt") patterns.theta_mvt = num();
    else if (key == "theta_pau") patterns.theta_pau = num();
    else if (key == "theta_phase_deg") patterns.theta_phase_deg = num();
    else if (key == "label_smooth_s") patterns.smooth_s = num();
    else if (key == "patterns_full_ettcpap") patterns_full_ettcpap = parse_bool(value, key);
    else if (key == "rho_cf_source") {
        require(value == "ecg" || value == "ppg", CRX_E_INVALID_ARG,
                "config: rho_cf_source must be ecg or ppg");
        rho_cf_source = value;
    } else if (key == "hrv_epoch") {
        require(value == "ettcpap" || value == "imv", CRX_E_INVALID_ARG,
                "config: hrv_epoch must be ettcpap or imv");
        hrv_epoch = value;
    } else if (key == "rule_ga_min_weeks") rule_ga_min_weeks = positive(num());
    else if (key == "rule_bw_min_g") rule_bw_min_g = positive(num());
    else if (key == "folds") {
        const double v = num();
        require(v >= 2 && v == static_cast<int>(v), CRX_E_INVALID_ARG,
                "config: folds must be an integer >= 2");
        folds = static_cast<int>(v);
    } else if (key == "seed") seed = static_cast<uint64_t>(num());
    else if (key == "threads") {
        const double v = num();
        require(v >= 0 && v == static_cast<unsigned>(v), CRX_E_INVALID_ARG,
                "config: threads must be a nonnegative integer");
        threads = static_cast<unsigned>(v);
    } else if (key == "rf_bootstrap") rf_bootstrap = parse_bool(value, key);
    else if (key == "undersample_with_replacement")
        undersample_with_replacement = parse_bool(value, key);
    else if (key == "dump_metrics") dump_metrics = parse_bool(value, key);
    else if (key == "dump_peaks") dump_peaks = parse_bool(value, key);
    else if (key == "dump_patterns") dump_patterns = parse_bool(value, key);
    else fail(CRX_E_INVALID_ARG, "config: unknown key '" + key + "'");

    require(windows.short_s < windows.long_s, CRX_E_INVALID_ARG,
            "config: window_short_s must be smaller than window_long_s");
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["analysis_rate_hz"] = analysis_rate_hz;
    j["ecg_rate_hz"] = ecg_rate_hz;
    j["window_short_s"] = windows.short_s;
    j["window_long_s"] = windows.long_s;
    j["window_power_s"] = windows.power_s;
    j["window_stft_s"] = windows.stft_s;
    j["window_corr_s"] = windows.corr_s;
    j["theta_mvt"] = patterns.theta_mvt;
    j["theta_pau"] = patterns.theta_pau;
    j["theta_phase_deg"] = patterns.theta_phase_deg;
    j["label_smooth_s"] = patterns.smooth_s;
    j["patterns_full_ettcpap"] = patterns_full_ettcpap;
    j["rho_cf_source"] = rho_cf_source;
    j["hrv_epoch"] = hrv_epoch;
    j["rule_ga_min_weeks"] = rule_ga_min_weeks;
    j["rule_bw_min_g"] = rule_bw_min_g;
    j["folds"] = folds;
    j["seed"] = seed;
    j["threads"] = threads;
    j["rf_bootstrap"] = rf_bootstrap;
    j["undersample_with_replacement"] = undersample_with_replacement;
    return j;
}

}  // namespace crx
