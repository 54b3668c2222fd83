#include "signals.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "csv.hpp"
#include "errors.hpp"
#include "fft.hpp"

namespace crx {

namespace {

constexpr double kAntiAliasCutoffFrac = 0.45;
constexpr double kMinEttCpapSeconds = 120.0;

// Sample index of an absolute time on a channel grid (sample i sits at i/rate).
size_t index_at(double t_s, double rate_hz) {
    return static_cast<size_t>(std::llround(t_s * rate_hz));
}

}  // namespace

const char* channel_name(ChannelKind kind) {
    switch (kind) {
        case ChannelKind::Rcg: return "rcg";
        case ChannelKind::Abd: return "abd";
        case ChannelKind::Ecg: return "ecg";
        case ChannelKind::Ppg: return "ppg";
        case ChannelKind::Sat: return "sat";
    }
    return "?";
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Success: return "success";
        case Outcome::Failure: return "failure";
        case Outcome::Unknown: return "unknown";
    }
    return "?";
}

Outcome outcome_from_string(const std::string& s) {
    if (s == "success") return Outcome::Success;
    if (s == "failure") return Outcome::Failure;
    if (s == "unknown") return Outcome::Unknown;
    fail(CRX_E_PARSE, "bad outcome '" + s + "' (expected success|failure|unknown)");
}

void Recording::validate() const {
    require(!patient_id.empty(), CRX_E_INVALID_ARG, "recording without patient_id");
    require(imv.start_s >= 0.0, CRX_E_EPOCH_OUT_OF_RANGE,
            patient_id + ": IMV span starts before the recording");
    require(imv.start_s < imv.end_s && ettcpap.start_s < ettcpap.end_s,
            CRX_E_EPOCH_OUT_OF_RANGE, patient_id + ": degenerate epoch span");
    require(imv.end_s <= ettcpap.start_s, CRX_E_EPOCH_OUT_OF_RANGE,
            patient_id + ": IMV span must precede ETT-CPAP without overlap");
    require(ettcpap.duration_s() >= kMinEttCpapSeconds, CRX_E_SHORT_ETTCPAP,
            patient_id + ": ETT-CPAP span shorter than " +
                std::to_string(static_cast<int>(kMinEttCpapSeconds)) + " s");
    for (int c = 0; c < kNumChannels; ++c) {
        const Channel& ch = channels[c];
        const auto* name = channel_name(static_cast<ChannelKind>(c));
        require(ch.rate_hz > 0, CRX_E_INVALID_RATE,
                patient_id + ": " + name + " has nonpositive rate");
        require(!ch.samples.empty(), CRX_E_MISSING_CHANNEL,
                patient_id + ": " + name + " has no samples");
        const double covered = static_cast<double>(ch.samples.size()) / ch.rate_hz;
        require(covered + 0.5 / ch.rate_hz >= ettcpap.end_s, CRX_E_EPOCH_OUT_OF_RANGE,
                patient_id + ": " + name + " does not cover the ETT-CPAP span");
        for (double v : ch.samples)
            require(std::isfinite(v), CRX_E_PARSE,
                    patient_id + ": non-finite sample in " + name);
    }
}

Span Recording::epoch_span(Epoch epoch) const {
    Span s;
    switch (epoch) {
        case Epoch::Imv: s = imv; break;
        case Epoch::EttCpap: s = ettcpap; break;
        case Epoch::EttCpapMin2:
            s = {ettcpap.start_s + 60.0, ettcpap.start_s + 120.0};
            break;
        case Epoch::EttCpapAfterMin1:
            s = {ettcpap.start_s + 60.0, ettcpap.end_s};
            break;
    }
    const Span& parent = (epoch == Epoch::Imv) ? imv : ettcpap;
    require(s.start_s >= parent.start_s - 1e-9 && s.end_s <= parent.end_s + 1e-9 &&
                s.start_s < s.end_s,
            CRX_E_EPOCH_OUT_OF_RANGE,
            patient_id + ": requested epoch does not exist within the recording");
    return s;
}

void ClinicalRecord::validate() const {
    require(!patient_id.empty(), CRX_E_INVALID_ARG, "clinical record without patient_id");
    require(bw_g > 0, CRX_E_PARSE, patient_id + ": birth weight must be positive");
    require(ga_weeks > 0, CRX_E_PARSE, patient_id + ": gestational age must be positive");
}

ChannelSlice RecordingView::channel(ChannelKind kind) const {
    const Channel& ch = rec->channel(kind);
    const size_t i0 = index_at(span.start_s, ch.rate_hz);
    size_t i1 = index_at(span.end_s, ch.rate_hz);
    i1 = std::min(i1, ch.samples.size());
    require(i0 < i1 && i1 <= ch.samples.size(), CRX_E_EPOCH_OUT_OF_RANGE,
            rec->patient_id + ": epoch slice outside channel data");
    return {std::span<const double>(ch.samples).subspan(i0, i1 - i0), ch.rate_hz,
            span.start_s};
}

RecordingView slice_epoch(const Recording& rec, Epoch epoch) {
    return {&rec, rec.epoch_span(epoch)};
}

Channel resample(const Channel& ch, double target_rate_hz) {
    require(target_rate_hz > 0, CRX_E_INVALID_RATE, "resample: bad target rate");
    require(ch.rate_hz > 0, CRX_E_INVALID_RATE, "resample: bad source rate");
    Channel out;
    out.rate_hz = target_rate_hz;
    out.samples = fft::resample_fourier(ch.samples, ch.rate_hz, target_rate_hz,
                                        kAntiAliasCutoffFrac);
    return out;
}

Recording resample_recording(const Recording& rec, double analysis_rate_hz,
                             double ecg_rate_hz) {
    Recording out = rec;
    for (int c = 0; c < kNumChannels; ++c) {
        const auto kind = static_cast<ChannelKind>(c);
        const double target = (kind == ChannelKind::Ecg) ? ecg_rate_hz : analysis_rate_hz;
        out.channels[c] = resample(rec.channels[c], target);
    }
    return out;
}

Recording load_recording(const std::string& path, const std::string& patient_id,
                         Span imv, Span ettcpap) {
    auto table = csv::read_file(path);
    const std::vector<std::string> expected = {"t", "rcg", "abd", "ecg", "ppg", "sat"};
    require(table.header.size() == expected.size(), CRX_E_MISSING_CHANNEL,
            path + ": expected header t,rcg,abd,ecg,ppg,sat");
    for (size_t i = 0; i < expected.size(); ++i)
        require(table.header[i] == expected[i], CRX_E_MISSING_CHANNEL,
                path + ": column " + std::to_string(i) + " is '" + table.header[i] +
                    "', expected '" + expected[i] + "'");
    require(table.rows.size() >= 2, CRX_E_TOO_SHORT, path + ": needs at least 2 samples");

    const size_t n = table.rows.size();
    std::vector<double> t(n);
    std::array<std::vector<double>, kNumChannels> cols;
    for (auto& c : cols) c.resize(n);
    for (size_t r = 0; r < n; ++r) {
        const auto& row = table.rows[r];
        const std::string ctx = path + " row " + std::to_string(r + 2);
        t[r] = csv::parse_double(row[0], ctx);
        for (int c = 0; c < kNumChannels; ++c) {
            const double v = csv::parse_double(row[c + 1], ctx);
            require(std::isfinite(v), CRX_E_PARSE, ctx + ": non-finite sample");
            cols[c][r] = v;
        }
    }

    // Uniform, strictly increasing timebase.
    const double total = t[n - 1] - t[0];
    require(total > 0, CRX_E_NONUNIFORM_RATE, path + ": time column not increasing");
    const double dt = total / static_cast<double>(n - 1);
    for (size_t r = 1; r < n; ++r) {
        const double step = t[r] - t[r - 1];
        require(step > 0 && std::abs(step - dt) <= 1e-6 * dt + 1e-12,
                CRX_E_NONUNIFORM_RATE,
                path + ": non-uniform sample spacing at row " + std::to_string(r + 2));
    }
    const double rate = 1.0 / dt;

    Recording rec;
    rec.patient_id = patient_id;
    rec.imv = imv;
    rec.ettcpap = ettcpap;
    for (int c = 0; c < kNumChannels; ++c) {
        rec.channels[c].samples = std::move(cols[c]);
        rec.channels[c].rate_hz = rate;
    }
    rec.validate();
    return rec;
}

void write_signal_csv(const std::string& path, const Recording& rec) {
    const double rate = rec.channel(ChannelKind::Rcg).rate_hz;
    for (int c = 1; c < kNumChannels; ++c)
        require(rec.channels[c].rate_hz == rate, CRX_E_NONUNIFORM_RATE,
                rec.patient_id + ": signal CSV requires one shared rate");
    const size_t n = rec.channel(ChannelKind::Rcg).samples.size();

    std::ofstream out(path, std::ios::trunc);
    require(out.good(), CRX_E_IO, "cannot write " + path);
    out << "t,rcg,abd,ecg,ppg,sat\n";
    for (size_t i = 0; i < n; ++i) {
        out << csv::format_sample(static_cast<double>(i) / rate);
        for (int c = 0; c < kNumChannels; ++c) {
            out << ',' << csv::format_sample(rec.channels[c].samples[i]);
        }
        out << '\n';
    }
    out.flush();
    require(out.good(), CRX_E_IO, "write failed for " + path);
}

std::map<std::string, std::pair<Span, Span>> load_epoch_sidecar(const std::string& path) {
    auto table = csv::read_file(path);
    const std::vector<std::string> expected = {"patient_id", "imv_start_s", "imv_end_s",
                                               "ettcpap_start_s", "ettcpap_end_s"};
    require(table.header == expected, CRX_E_SCHEMA_MISMATCH,
            path + ": bad epoch sidecar header");
    std::map<std::string, std::pair<Span, Span>> out;
    for (const auto& row : table.rows) {
        const std::string& pid = row[0];
        require(!out.count(pid), CRX_E_DUPLICATE_PATIENT,
                path + ": duplicate patient " + pid);
        Span imv{csv::parse_double(row[1], pid), csv::parse_double(row[2], pid)};
        Span ett{csv::parse_double(row[3], pid), csv::parse_double(row[4], pid)};
        out[pid] = {imv, ett};
    }
    return out;
}

void write_epoch_sidecar(const std::string& path,
                         const std::vector<Recording>& recordings) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(recordings.size());
    for (const auto& rec : recordings) {
        rows.push_back({rec.patient_id, csv::format_sample(rec.imv.start_s),
                        csv::format_sample(rec.imv.end_s),
                        csv::format_sample(rec.ettcpap.start_s),
                        csv::format_sample(rec.ettcpap.end_s)});
    }
    csv::write_file(path,
                    {"patient_id", "imv_start_s", "imv_end_s", "ettcpap_start_s",
                     "ettcpap_end_s"},
                    rows);
}

std::vector<ClinicalRecord> load_clinical_csv(const std::string& path) {
    auto table = csv::read_file(path);
    const std::vector<std::string> expected = {"patient_id", "bw_g", "ga_weeks", "outcome"};
    require(table.header == expected, CRX_E_SCHEMA_MISMATCH,
            path + ": bad clinical header");
    std::vector<ClinicalRecord> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        ClinicalRecord rec;
        rec.patient_id = row[0];
        rec.bw_g = csv::parse_double(row[1], path + " " + row[0]);
        rec.ga_weeks = csv::parse_double(row[2], path + " " + row[0]);
        rec.outcome = outcome_from_string(row[3]);
        rec.validate();
        out.push_back(std::move(rec));
    }
    return out;
}

void write_clinical_csv(const std::string& path,
                        const std::vector<ClinicalRecord>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size());
    for (const auto& rec : records) {
        rows.push_back({rec.patient_id, csv::format_sample(rec.bw_g),
                        csv::format_sample(rec.ga_weeks), outcome_name(rec.outcome)});
    }
    csv::write_file(path, {"patient_id", "bw_g", "ga_weeks", "outcome"}, rows);
}

}  // namespace crx
