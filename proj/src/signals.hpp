#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace crx {

// ---------------------------------------------------------------------
// Recording data model: five synchronized cardiorespiratory channels per
// patient with two marked epochs (IMV, then ETT-CPAP).
// ---------------------------------------------------------------------

enum class ChannelKind : int { Rcg = 0, Abd = 1, Ecg = 2, Ppg = 3, Sat = 4 };
constexpr int kNumChannels = 5;
const char* channel_name(ChannelKind kind);

enum class Outcome : int { Success = 0, Failure = 1, Unknown = 2 };
const char* outcome_name(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct Channel {
    std::vector<double> samples;
    double rate_hz = 0.0;
};

struct Span {
    double start_s = 0.0;
    double end_s = 0.0;
    double duration_s() const { return end_s - start_s; }
};

enum class Epoch { Imv, EttCpap, EttCpapMin2, EttCpapAfterMin1 };

struct Recording {
    std::string patient_id;
    std::array<Channel, kNumChannels> channels;
    Span imv;
    Span ettcpap;

    const Channel& channel(ChannelKind kind) const {
        return channels[static_cast<int>(kind)];
    }
    Channel& channel(ChannelKind kind) { return channels[static_cast<int>(kind)]; }

    // Enforces the data-model invariants; throws on violation.
    void validate() const;

    // Absolute time span of an epoch; throws EpochOutOfRange when the
    // requested span does not exist within the recording.
    Span epoch_span(Epoch epoch) const;
};

struct ClinicalRecord {
    std::string patient_id;
    double bw_g = 0.0;
    double ga_weeks = 0.0;
    Outcome outcome = Outcome::Unknown;

    void validate() const;
};

// Zero-copy view of one epoch of a recording.
struct ChannelSlice {
    std::span<const double> samples;
    double rate_hz = 0.0;
    double start_s = 0.0;
};

struct RecordingView {
    const Recording* rec = nullptr;
    Span span;
    ChannelSlice channel(ChannelKind kind) const;
};

RecordingView slice_epoch(const Recording& rec, Epoch epoch);

// ---------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------

// Anti-alias filtered decimation onto a lower (or equal) rate. Equal rates
// return the input unchanged.
Channel resample(const Channel& ch, double target_rate_hz);

// Resamples RCG/ABD/PPG/SAT to analysis_rate_hz and ECG to ecg_rate_hz.
Recording resample_recording(const Recording& rec, double analysis_rate_hz,
                             double ecg_rate_hz);

// Signal CSV (t,rcg,abd,ecg,ppg,sat) + spans -> validated Recording.
Recording load_recording(const std::string& path, const std::string& patient_id,
                         Span imv, Span ettcpap);

void write_signal_csv(const std::string& path, const Recording& rec);

// Epoch sidecar: patient_id,imv_start_s,imv_end_s,ettcpap_start_s,ettcpap_end_s
std::map<std::string, std::pair<Span, Span>> load_epoch_sidecar(const std::string& path);
void write_epoch_sidecar(const std::string& path,
                         const std::vector<Recording>& recordings);

// Clinical CSV: patient_id,bw_g,ga_weeks,outcome
std::vector<ClinicalRecord> load_clinical_csv(const std::string& path);
void write_clinical_csv(const std::string& path,
                        const std::vector<ClinicalRecord>& records);

}  // namespace crx
