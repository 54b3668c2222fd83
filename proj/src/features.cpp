#include "features.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "cardiac.hpp"
#include "csv.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "patterns.hpp"
#include "stats.hpp"

namespace crx {

namespace {

constexpr double kMinValidFraction = 0.5;

std::array<std::string, kNumFeatures> build_names() {
    std::array<std::string, kNumFeatures> names;
    int i = 0;
    for (int m = 0; m < kNumMetrics; ++m) {
        const std::string base = metric_name(static_cast<MetricKind>(m));
        names[i++] = base + "_median";
        names[i++] = base + "_iqr";
        names[i++] = base + "_power_median";
        names[i++] = base + "_power_iqr";
    }
    names[i++] = "sat_kurtosis";
    names[i++] = "sat_skewness";
    names[i++] = "sat_power_median";
    names[i++] = "sat_power_iqr";
    names[i++] = "hrv_sdnn_ms";
    names[i++] = "hrv_sdsd_ms";
    names[i++] = "hrv_triangular_index";
    for (int p = 0; p < kNumPatterns; ++p) {
        const std::string base = pattern_name(static_cast<PatternKind>(p));
        names[i++] = base + "_count";
        names[i++] = base + "_total_s";
        names[i++] = base + "_max_s";
        names[i++] = base + "_density";
        names[i++] = base + "_freq_per_s";
    }
    names[i++] = "bw_g";
    names[i++] = "ga_weeks";
    return names;
}

// Moving-average power: population variance over a trailing window; NaN
// where the window is incomplete or touches an invalid sample.
std::vector<double> moving_power(std::span<const double> x, std::span<const uint8_t> valid,
                                 size_t w) {
    const size_t n = x.size();
    std::vector<double> out(n, std::nan(""));
    if (w == 0 || n < w) return out;
    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0), ok(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const double v = valid.empty() || valid[i] ? x[i] : 0.0;
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
        ok[i + 1] = ok[i] + ((valid.empty() || valid[i]) ? 1.0 : 0.0);
    }
    const auto wd = static_cast<double>(w);
    for (size_t i = w - 1; i < n; ++i) {
        const size_t a = i + 1 - w;
        if (ok[i + 1] - ok[a] < wd) continue;
        const double mean = (s1[i + 1] - s1[a]) / wd;
        out[i] = std::max(0.0, (s2[i + 1] - s2[a]) / wd - mean * mean);
    }
    return out;
}

MetricSeries slice_series(const MetricSeries& s, size_t i0, size_t i1) {
    MetricSeries out;
    out.kind = s.kind;
    out.rate_hz = s.rate_hz;
    out.values.assign(s.values.begin() + static_cast<long>(i0),
                      s.values.begin() + static_cast<long>(i1));
    out.valid.assign(s.valid.begin() + static_cast<long>(i0),
                     s.valid.begin() + static_cast<long>(i1));
    return out;
}

void dump_metric_csv(const DumpOptions& dumps, const std::string& pid,
                     const MetricSeries& s) {
    const auto path = std::filesystem::path(dumps.dir) /
                      (pid + "_metric_" + metric_name(s.kind) + ".csv");
    std::ofstream out(path);
    require(out.good(), CRX_E_IO, "cannot write " + path.string());
    out << "t_s," << metric_name(s.kind) << ",valid\n";
    for (size_t i = 0; i < s.size(); ++i)
        out << csv::format_sample(static_cast<double>(i) / s.rate_hz) << ','
            << csv::format_sample(s.values[i]) << ',' << int(s.valid[i]) << '\n';
}

}  // namespace

const std::array<std::string, kNumFeatures>& feature_names() {
    static const auto names = build_names();
    return names;
}

uint64_t feature_registry_hash() {
    // FNV-1a over the newline-joined names
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& name : feature_names()) {
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        h ^= static_cast<unsigned char>('\n');
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string feature_registry_hash_hex() {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(feature_registry_hash()));
    return buf;
}

void FeatureMatrix::set(size_t r, int c, double v) {
    values[r * kNumFeatures + c] = v;
    missing[r * kNumFeatures + c] = 0;
}

void FeatureMatrix::set_missing(size_t r, int c) {
    values[r * kNumFeatures + c] = std::nan("");
    missing[r * kNumFeatures + c] = 1;
}

void FeatureMatrix::add_row(const std::string& id, Outcome outcome) {
    patient_ids.push_back(id);
    outcomes.push_back(outcome);
    values.resize(values.size() + kNumFeatures, std::nan(""));
    missing.resize(missing.size() + kNumFeatures, 1);
}

ScalarFeatures scalarize_metric(const MetricSeries& s, double power_s) {
    ScalarFeatures out;
    const size_t n = s.size();
    if (n == 0) return out;

    std::vector<double> valid_values;
    valid_values.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (s.valid[i]) valid_values.push_back(s.values[i]);
    if (static_cast<double>(valid_values.size()) < kMinValidFraction * static_cast<double>(n))
        return out;  // InsufficientValidSamples: all four stay missing

    out.v[0] = median_of(valid_values);
    out.v[1] = iqr_of(valid_values);
    out.present[0] = out.present[1] = true;

    const auto w = static_cast<size_t>(std::llround(power_s * s.rate_hz));
    auto power = moving_power(s.values, s.valid, w);
    std::vector<double> defined;
    defined.reserve(power.size());
    for (double p : power)
        if (!std::isnan(p)) defined.push_back(p);
    if (!defined.empty()) {
        out.v[2] = median_of(defined);
        out.v[3] = iqr_of(defined);
        out.present[2] = out.present[3] = true;
    }
    return out;
}

ScalarFeatures sat_features(std::span<const double> sat, double rate_hz, double power_s) {
    ScalarFeatures out;
    if (sat.empty()) return out;

    out.v[0] = kurtosis_excess_population(sat);
    out.v[1] = skewness_population(sat);
    out.present[0] = out.present[1] = true;

    const auto w = static_cast<size_t>(std::llround(power_s * rate_hz));
    auto power = moving_power(sat, {}, w);
    std::vector<double> defined;
    for (double p : power)
        if (!std::isnan(p)) defined.push_back(p);
    if (!defined.empty()) {
        out.v[2] = median_of(defined);
        out.v[3] = iqr_of(defined);
        out.present[2] = out.present[3] = true;
    }
    return out;
}

PatientFeatures extract_patient_features(const Recording& rec, const RunConfig& cfg,
                                         const DumpOptions* dumps) {
    PatientFeatures out;
    out.missing.fill(1);
    for (auto& v : out.values) v = std::nan("");

    const Recording res = resample_recording(rec, cfg.analysis_rate_hz, cfg.ecg_rate_hz);
    const RecordingView ett = slice_epoch(res, Epoch::EttCpap);
    const auto rcg = ett.channel(ChannelKind::Rcg);
    const auto abd = ett.channel(ChannelKind::Abd);
    const auto ppg = ett.channel(ChannelKind::Ppg);
    const auto sat = ett.channel(ChannelKind::Sat);
    const auto ecg = ett.channel(ChannelKind::Ecg);
    const double rate = cfg.analysis_rate_hz;
    const size_t n50 = rcg.samples.size();
    const WindowConfig& w = cfg.windows;

    // --- the ten metric tracks over the whole ETT-CPAP epoch ---
    std::array<MetricSeries, kNumMetrics> tracks;
    tracks[0] = pause_power(rcg.samples, rate, MetricKind::RpRc, w);
    tracks[1] = pause_power(abd.samples, rate, MetricKind::RpAb, w);
    tracks[2] = respiratory_frequency(abd.samples, rate, w);
    tracks[3] = cardiac_frequency(ecg.samples, cfg.ecg_rate_hz, MetricKind::CfEc, w, rate, n50);
    tracks[4] = cardiac_frequency(ppg.samples, rate, MetricKind::CfPp, w, rate, n50);
    tracks[5] = rms_sum(rcg.samples, abd.samples, rate, w);
    tracks[6] = thoraco_abdominal_phase(rcg.samples, abd.samples, rate, w);
    tracks[7] = movement_power(rcg.samples, rate, MetricKind::BmpRc, w);
    tracks[8] = movement_power(abd.samples, rate, MetricKind::BmpAb, w);
    const MetricSeries& cf_for_rho = (cfg.rho_cf_source == "ppg") ? tracks[4] : tracks[3];
    tracks[9] = rf_cf_correlation(tracks[2], cf_for_rho, w);

    // --- scalarize on minute 2 ---
    const auto i60 = static_cast<size_t>(std::llround(60.0 * rate));
    const auto i120 = static_cast<size_t>(std::llround(120.0 * rate));
    require(i120 <= n50, CRX_E_EPOCH_OUT_OF_RANGE,
            rec.patient_id + ": ETT-CPAP too short for minute 2");
    for (int m = 0; m < kNumMetrics; ++m) {
        const auto scal = scalarize_metric(slice_series(tracks[m], i60, i120), w.power_s);
        for (int k = 0; k < 4; ++k) {
            if (scal.present[k]) {
                out.values[m * 4 + k] = scal.v[k];
                out.missing[m * 4 + k] = 0;
            }
        }
    }

    const auto satf = sat_features(sat.samples.subspan(i60, i120 - i60), rate, w.power_s);
    for (int k = 0; k < 4; ++k) {
        if (satf.present[k]) {
            out.values[40 + k] = satf.v[k];
            out.missing[40 + k] = 0;
        }
    }

    // --- R peaks, HRV and the heart-rate track ---
    bool have_peaks = false;
    RPeakTrain peaks;
    try {
        peaks = detect_r_peaks(ecg.samples, cfg.ecg_rate_hz);
        have_peaks = true;
    } catch (const Error& e) {
        if (e.code() != CRX_E_NO_PEAKS_FOUND && e.code() != CRX_E_TOO_SHORT &&
            e.code() != CRX_E_TOO_FEW_PEAKS)
            throw;
    }
    try {
        HrvFeatures hrv;
        if (cfg.hrv_epoch == "imv") {
            const auto imv_ecg = slice_epoch(res, Epoch::Imv).channel(ChannelKind::Ecg);
            hrv = hrv_features(detect_r_peaks(imv_ecg.samples, cfg.ecg_rate_hz));
        } else {
            require(have_peaks, CRX_E_NO_PEAKS_FOUND, "no peaks");
            hrv = hrv_features(peaks);
        }
        out.values[44] = hrv.sdnn_ms;
        out.values[45] = hrv.sdsd_ms;
        out.values[46] = hrv.triangular_index;
        out.missing[44] = out.missing[45] = out.missing[46] = 0;
    } catch (const Error& e) {
        if (e.code() != CRX_E_NO_PEAKS_FOUND && e.code() != CRX_E_TOO_SHORT &&
            e.code() != CRX_E_TOO_FEW_PEAKS)
            throw;
    }

    // --- patterns over ETT-CPAP minus the first (transition) minute ---
    auto labels = segment_respiration(tracks[0], tracks[1], tracks[7], tracks[8],
                                      tracks[6], cfg.patterns);
    std::vector<uint8_t> mvt_mask(n50, 0);
    for (size_t i = 0; i < n50; ++i) mvt_mask[i] = labels[i] == RespLabel::Mvt ? 1 : 0;

    std::vector<uint8_t> bdy(n50, 0);
    MetricSeries hr;
    if (have_peaks) {
        hr = heart_rate_track(peaks, rate, 0.0, n50);
        bdy = detect_bradycardia(hr, mvt_mask);
    }
    const auto ppg_mask = ppg_artifact_mask(ppg.samples, rate, w, cfg.patterns.theta_mvt);
    const auto dst = detect_desaturation(sat.samples, ppg_mask);

    const size_t p0 = cfg.patterns_full_ettcpap ? 0 : i60;
    const double t_total = static_cast<double>(n50 - p0) / rate;
    const auto stats = pattern_stats(
        std::span<const RespLabel>(labels).subspan(p0),
        std::span<const uint8_t>(bdy).subspan(p0),
        std::span<const uint8_t>(dst).subspan(p0), rate, t_total);
    for (int p = 0; p < kNumPatterns; ++p) {
        const int base = 47 + p * 5;
        out.values[base + 0] = stats[p].count;
        out.values[base + 1] = stats[p].total_s;
        out.values[base + 2] = stats[p].max_s;
        out.values[base + 3] = stats[p].density;
        out.values[base + 4] = stats[p].freq_per_s;
        for (int k = 0; k < 5; ++k) out.missing[base + k] = 0;
    }

    // --- optional debug dumps ---
    if (dumps && (dumps->metrics || dumps->peaks || dumps->patterns)) {
        std::filesystem::create_directories(dumps->dir);
        if (dumps->metrics)
            for (const auto& t : tracks) dump_metric_csv(*dumps, rec.patient_id, t);
        if (dumps->peaks && have_peaks) {
            std::ofstream f(std::filesystem::path(dumps->dir) / (rec.patient_id + "_peaks.csv"));
            f << "peak_time_s\n";
            for (double t : peaks.peak_times_s) f << csv::format_sample(t) << '\n';
        }
        if (dumps->patterns) {
            std::ofstream f(std::filesystem::path(dumps->dir) /
                            (rec.patient_id + "_patterns.csv"));
            f << "t_s,resp_label,bdy,dst\n";
            static const char* kLabelNames[] = {"pau", "mvt", "syb", "asb"};
            for (size_t i = 0; i < n50; ++i)
                f << csv::format_sample(static_cast<double>(i) / rate) << ','
                  << kLabelNames[static_cast<int>(labels[i])] << ',' << int(bdy[i]) << ','
                  << int(dst[i]) << '\n';
        }
    }

    return out;
}

FeatureMatrix assemble(const std::vector<Recording>& recordings,
                       const std::vector<ClinicalRecord>& clinical,
                       const RunConfig& cfg) {
    std::map<std::string, const ClinicalRecord*> by_id;
    for (const auto& c : clinical) {
        require(!by_id.count(c.patient_id), CRX_E_DUPLICATE_PATIENT,
                "duplicate clinical record for " + c.patient_id);
        by_id[c.patient_id] = &c;
    }

    std::vector<size_t> order(recordings.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return recordings[a].patient_id < recordings[b].patient_id;
    });
    for (size_t i = 1; i < order.size(); ++i)
        require(recordings[order[i - 1]].patient_id != recordings[order[i]].patient_id,
                CRX_E_DUPLICATE_PATIENT,
                "duplicate recording for " + recordings[order[i]].patient_id);
    require(recordings.size() == clinical.size(), CRX_E_UNKNOWN_PATIENT,
            "recordings and clinical records do not cover the same patients");
    for (const auto& rec : recordings)
        require(by_id.count(rec.patient_id), CRX_E_UNKNOWN_PATIENT,
                "no clinical record for " + rec.patient_id);

    std::vector<PatientFeatures> rows(recordings.size());
    parallel_for(order.size(), cfg.threads, [&](size_t k) {
        rows[k] = extract_patient_features(recordings[order[k]], cfg);
    });

    FeatureMatrix m;
    for (size_t k = 0; k < order.size(); ++k) {
        const Recording& rec = recordings[order[k]];
        const ClinicalRecord& clin = *by_id.at(rec.patient_id);
        m.add_row(rec.patient_id, clin.outcome);
        for (int c = 0; c < kNumFeatures; ++c)
            if (!rows[k].missing[c]) m.set(k, c, rows[k].values[c]);
        m.set(k, kBwFeatureIndex, clin.bw_g);
        m.set(k, kGaFeatureIndex, clin.ga_weeks);
    }
    return m;
}

FeatureMatrix subset_rows(const FeatureMatrix& m, std::span<const size_t> rows) {
    FeatureMatrix out;
    for (size_t r : rows) {
        const size_t k = out.rows();
        out.add_row(m.patient_ids[r], m.outcomes[r]);
        for (int c = 0; c < kNumFeatures; ++c)
            if (!m.is_missing(r, c)) out.set(k, c, m.value(r, c));
    }
    return out;
}

ImputationTable impute_fit(const FeatureMatrix& m, std::span<const size_t> fit_rows) {
    ImputationTable t;
    for (int c = 0; c < kNumFeatures; ++c) {
        std::vector<double> all, succ, fail;
        for (size_t r : fit_rows) {
            if (m.is_missing(r, c)) continue;
            const double v = m.value(r, c);
            all.push_back(v);
            if (m.outcomes[r] == Outcome::Success) succ.push_back(v);
            if (m.outcomes[r] == Outcome::Failure) fail.push_back(v);
        }
        require(!all.empty(), CRX_E_ALL_MISSING_FEATURE,
                "feature '" + feature_names()[c] + "' has no observed value in the fit rows");
        t.overall[c] = median_of(all);
        t.has_overall[c] = 1;
        if (!succ.empty()) {
            t.success[c] = median_of(succ);
            t.has_success[c] = 1;
        }
        if (!fail.empty()) {
            t.failure[c] = median_of(fail);
            t.has_failure[c] = 1;
        }
    }
    return t;
}

void impute_apply(FeatureMatrix& m, const ImputationTable& t,
                  std::span<const size_t> fit_rows) {
    std::vector<uint8_t> in_fit(m.rows(), 0);
    for (size_t r : fit_rows) in_fit[r] = 1;
    for (size_t r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < kNumFeatures; ++c) {
            if (!m.is_missing(r, c)) continue;
            double v = t.overall[c];
            if (in_fit[r]) {
                // group medians fall back to the overall median when a group
                // had nothing observed
                if (m.outcomes[r] == Outcome::Success && t.has_success[c])
                    v = t.success[c];
                else if (m.outcomes[r] == Outcome::Failure && t.has_failure[c])
                    v = t.failure[c];
            }
            require(t.has_overall[c], CRX_E_ALL_MISSING_FEATURE,
                    "imputation table lacks feature '" + feature_names()[c] + "'");
            m.set(r, c, v);
        }
    }
}

nlohmann::ordered_json ImputationTable::to_json() const {
    nlohmann::ordered_json j;
    auto emit = [&](const char* key, const std::array<double, kNumFeatures>& v,
                    const std::array<uint8_t, kNumFeatures>& has) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (int c = 0; c < kNumFeatures; ++c) {
            if (has[c])
                arr.push_back(v[c]);
            else
                arr.push_back(nullptr);
        }
        j[key] = std::move(arr);
    };
    emit("success", success, has_success);
    emit("failure", failure, has_failure);
    emit("overall", overall, has_overall);
    return j;
}

ImputationTable ImputationTable::from_json(const nlohmann::json& j) {
    ImputationTable t;
    auto read = [&](const char* key, std::array<double, kNumFeatures>& v,
                    std::array<uint8_t, kNumFeatures>& has) {
        require(j.contains(key) && j[key].is_array() && j[key].size() == kNumFeatures,
                CRX_E_CORRUPT_MODEL, "imputation table: bad '" + std::string(key) + "'");
        for (int c = 0; c < kNumFeatures; ++c) {
            if (j[key][c].is_null()) {
                has[c] = 0;
                v[c] = 0.0;
            } else {
                has[c] = 1;
                v[c] = j[key][c].get<double>();
            }
        }
    };
    read("success", t.success, t.has_success);
    read("failure", t.failure, t.has_failure);
    read("overall", t.overall, t.has_overall);
    return t;
}

void write_feature_csv(const std::string& path, const FeatureMatrix& m) {
    std::vector<std::string> header = {"patient_id", "outcome"};
    for (const auto& name : feature_names()) header.push_back(name);

    std::vector<std::vector<std::string>> rows;
    rows.reserve(m.rows());
    for (size_t r = 0; r < m.rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(kNumFeatures + 2);
        row.push_back(m.patient_ids[r]);
        row.push_back(outcome_name(m.outcomes[r]));
        for (int c = 0; c < kNumFeatures; ++c)
            row.push_back(m.is_missing(r, c) ? "" : csv::format_double(m.value(r, c)));
        rows.push_back(std::move(row));
    }
    csv::write_file(path, header, rows);
}

FeatureMatrix read_feature_csv(const std::string& path) {
    auto table = csv::read_file(path);
    require(table.header.size() == kNumFeatures + 2, CRX_E_SCHEMA_MISMATCH,
            path + ": expected " + std::to_string(kNumFeatures + 2) + " columns, got " +
                std::to_string(table.header.size()));
    require(table.header[0] == "patient_id" && table.header[1] == "outcome",
            CRX_E_SCHEMA_MISMATCH, path + ": header must start patient_id,outcome");
    for (int c = 0; c < kNumFeatures; ++c)
        require(table.header[c + 2] == feature_names()[c], CRX_E_SCHEMA_MISMATCH,
                path + ": column " + std::to_string(c + 2) + " is '" + table.header[c + 2] +
                    "', expected '" + feature_names()[c] + "'");

    FeatureMatrix m;
    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        m.add_row(row[0], outcome_from_string(row[1]));
        for (int c = 0; c < kNumFeatures; ++c) {
            const std::string& cell = row[c + 2];
            if (cell.empty()) continue;  // stays missing
            m.set(r, c, csv::parse_double(cell, path + " " + row[0]));
        }
    }
    return m;
}

}  // namespace crx
