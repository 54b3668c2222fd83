#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "errors.hpp"
#include "helpers.hpp"
#include "signals.hpp"
#include "synth.hpp"

using namespace crx;
using namespace crxtest;

namespace {

void check_error(crx_status expected, const std::function<void()>& body) {
    try {
        body();
        FAIL_CHECK("expected error ", crx_status_name(expected), " was not thrown");
    } catch (const Error& e) {
        CHECK(e.code() == expected);
    }
}

}  // namespace

TEST_SUITE("signals") {

TEST_CASE("load_recording accepts a well-formed five-channel file") {
    TempDir tmp;
    const double rate = 10.0;
    const size_t n = static_cast<size_t>(3300 * rate);
    std::vector<double> flat(n, 1.0);
    write_signal_file(tmp.file("p.csv"), rate, flat, flat, flat, flat, flat);

    auto rec = load_recording(tmp.file("p.csv"), "p", {0.0, 3000.0}, {3000.0, 3300.0});
    CHECK(rec.patient_id == "p");
    for (int c = 0; c < kNumChannels; ++c) {
        CHECK(rec.channels[c].samples.size() == n);
        CHECK(rec.channels[c].rate_hz == doctest::Approx(rate).epsilon(1e-9));
    }
}

TEST_CASE("load_recording rejects a file without the sat column") {
    TempDir tmp;
    std::ofstream f(tmp.file("p.csv"));
    f << "t,rcg,abd,ecg,ppg\n0,1,1,1,1\n0.1,1,1,1,1\n";
    f.close();
    check_error(CRX_E_MISSING_CHANNEL, [&] {
        load_recording(tmp.file("p.csv"), "p", {0.0, 0.05}, {0.05, 0.2});
    });
}

TEST_CASE("load_recording rejects a 90 s ETT-CPAP span") {
    TempDir tmp;
    const double rate = 20.0;
    const size_t n = static_cast<size_t>(150 * rate);
    std::vector<double> flat(n, 0.0);
    write_signal_file(tmp.file("p.csv"), rate, flat, flat, flat, flat, flat);
    check_error(CRX_E_SHORT_ETTCPAP, [&] {
        load_recording(tmp.file("p.csv"), "p", {0.0, 30.0}, {30.0, 120.0});
    });
}

TEST_CASE("load_recording rejects non-finite samples") {
    TempDir tmp;
    std::ofstream f(tmp.file("p.csv"));
    f << "t,rcg,abd,ecg,ppg,sat\n";
    for (int i = 0; i < 2600; ++i)
        f << i * 0.1 << (i == 700 ? ",nan" : ",1") << ",1,1,1,1\n";
    f.close();
    check_error(CRX_E_PARSE, [&] {
        load_recording(tmp.file("p.csv"), "p", {0.0, 100.0}, {100.0, 250.0});
    });
}

TEST_CASE("load_recording rejects a non-uniform timebase") {
    TempDir tmp;
    std::ofstream f(tmp.file("p.csv"));
    f << "t,rcg,abd,ecg,ppg,sat\n";
    double t = 0.0;
    for (int i = 0; i < 2600; ++i) {
        f << t << ",1,1,1,1,1\n";
        t += (i == 1000) ? 0.35 : 0.1;
    }
    f.close();
    check_error(CRX_E_NONUNIFORM_RATE, [&] {
        load_recording(tmp.file("p.csv"), "p", {0.0, 100.0}, {100.0, 240.0});
    });
}

TEST_CASE("resample keeps a constant signal constant") {
    Channel ch;
    ch.rate_hz = 1000.0;
    ch.samples.assign(10000, 3.25);
    auto out = resample(ch, 50.0);
    CHECK(out.samples.size() == 500);
    for (double v : out.samples) CHECK(v == doctest::Approx(3.25).epsilon(1e-9));
}

TEST_CASE("resample preserves an in-band sinusoid within 5%") {
    Channel ch;
    ch.rate_hz = 1000.0;
    ch.samples = make_sine(20000, 1000.0, 1.0);
    auto out = resample(ch, 50.0);
    CHECK(out.samples.size() == 1000);
    const double amp = fit_sine_amplitude(out.samples, 50.0, 1.0);
    CHECK(amp == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("resample attenuates an out-of-band sinusoid by more than 20 dB") {
    Channel ch;
    ch.rate_hz = 1000.0;
    ch.samples = make_sine(20000, 1000.0, 30.0);
    const double rms_in = rms_of(ch.samples);
    auto out = resample(ch, 50.0);
    const double rms_out = rms_of(out.samples);
    const double attenuation_db = 20.0 * std::log10(rms_in / std::max(rms_out, 1e-300));
    CHECK(attenuation_db > 20.0);
}

TEST_CASE("resample at the source rate returns the input bit-exactly") {
    Channel ch;
    ch.rate_hz = 200.0;
    Rng rng(7);
    ch.samples.resize(4000);
    for (auto& v : ch.samples) v = rng.normal();
    auto out = resample(ch, 200.0);
    CHECK(out.samples == ch.samples);
}

TEST_CASE("resample refuses upsampling") {
    Channel ch;
    ch.rate_hz = 50.0;
    ch.samples.assign(500, 0.0);
    check_error(CRX_E_UPSAMPLING_REQUESTED, [&] { resample(ch, 100.0); });
}

TEST_CASE("resample output length is round(n * target / source)") {
    Channel ch;
    ch.rate_hz = 333.0;
    ch.samples.assign(10007, 1.0);
    auto out = resample(ch, 50.0);
    CHECK(out.samples.size() ==
          static_cast<size_t>(std::llround(10007.0 * 50.0 / 333.0)));
}

TEST_CASE("slice_epoch selects the documented spans") {
    auto rec = make_recording("p", 50.0, 320.0, {0.0, 10.0}, {10.0, 310.0});

    SUBCASE("minute 2 of a 300 s ETT-CPAP") {
        auto view = slice_epoch(rec, Epoch::EttCpapMin2);
        CHECK(view.span.start_s == doctest::Approx(70.0));
        CHECK(view.span.end_s == doctest::Approx(130.0));
        CHECK(view.channel(ChannelKind::Rcg).samples.size() == 3000);
    }
    SUBCASE("everything after minute 1") {
        auto view = slice_epoch(rec, Epoch::EttCpapAfterMin1);
        CHECK(view.span.start_s == doctest::Approx(70.0));
        CHECK(view.span.end_s == doctest::Approx(310.0));
    }
    SUBCASE("minute 2 of a 100 s ETT-CPAP does not exist") {
        auto short_rec = make_recording("p", 50.0, 110.0, {0.0, 10.0}, {10.0, 110.0});
        check_error(CRX_E_EPOCH_OUT_OF_RANGE,
                    [&] { slice_epoch(short_rec, Epoch::EttCpapMin2); });
    }
}

TEST_CASE("slices concatenate back to the original in-span samples") {
    SynthParams p;
    p.n_patients = 1;
    p.failure_rate = 0.5;
    p.seed = 11;
    auto plans = plan_cohort(p);
    auto rec = synth_recording(p, plans[0]);

    auto imv = slice_epoch(rec, Epoch::Imv);
    auto ett = slice_epoch(rec, Epoch::EttCpap);
    for (int c = 0; c < kNumChannels; ++c) {
        const auto kind = static_cast<ChannelKind>(c);
        const auto a = imv.channel(kind).samples;
        const auto b = ett.channel(kind).samples;
        const auto& orig = rec.channel(kind).samples;
        REQUIRE(a.size() + b.size() <= orig.size());
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == orig[i]);
        const size_t off = static_cast<size_t>(
            std::llround(rec.ettcpap.start_s * rec.channel(kind).rate_hz));
        for (size_t i = 0; i < b.size(); ++i) CHECK(b[i] == orig[off + i]);
    }
}

TEST_CASE("synth_cohort produces exact outcome counts") {
    SynthParams p;
    p.n_patients = 200;
    p.failure_rate = 0.15;
    p.seed = 7;
    auto plans = plan_cohort(p);
    int failures = 0;
    for (const auto& plan : plans) failures += plan.clinical.outcome == Outcome::Failure;
    CHECK(failures == 30);
    CHECK(plans.size() == 200);
}

TEST_CASE("synth_cohort rule-positive patients are ~40% and >= 90% successes") {
    SynthParams p;
    p.n_patients = 200;
    p.failure_rate = 0.15;
    p.seed = 3;
    auto plans = plan_cohort(p);
    int rule_pos = 0, rule_pos_success = 0;
    for (const auto& plan : plans) {
        const bool pos = plan.clinical.ga_weeks >= 27.0 || plan.clinical.bw_g > 1000.0;
        CHECK(pos == plan.rule_positive);
        if (pos) {
            ++rule_pos;
            rule_pos_success += plan.clinical.outcome == Outcome::Success;
        }
    }
    CHECK(rule_pos == 80);  // round(0.4 * 200)
    CHECK(static_cast<double>(rule_pos_success) / rule_pos >= 0.90);
}

TEST_CASE("synth_cohort with separability 0 injects no failure signatures") {
    SynthParams p;
    p.n_patients = 40;
    p.failure_rate = 0.5;
    p.separability = 0.0;
    p.seed = 5;
    auto plans = plan_cohort(p);
    for (const auto& plan : plans) {
        const auto prof = synth_profile(p, plan);
        CHECK_FALSE(prof.any_signature());
        CHECK(prof.phase_extra_rad == 0.0);
    }
}

TEST_CASE("synth_cohort at full separability marks every failure") {
    SynthParams p;
    p.n_patients = 30;
    p.failure_rate = 0.4;
    p.separability = 1.0;
    p.seed = 5;
    for (const auto& plan : plan_cohort(p)) {
        const auto prof = synth_profile(p, plan);
        if (plan.clinical.outcome == Outcome::Failure)
            CHECK(prof.any_signature());
        else
            CHECK_FALSE(prof.any_signature());
    }
}

TEST_CASE("synth recordings are bit-identical across repeated calls") {
    SynthParams p;
    p.n_patients = 2;
    p.failure_rate = 0.5;
    p.seed = 123;
    auto plans = plan_cohort(p);
    auto a = synth_recording(p, plans[0]);
    auto b = synth_recording(p, plans[0]);
    for (int c = 0; c < kNumChannels; ++c)
        CHECK(a.channels[c].samples == b.channels[c].samples);
}

TEST_CASE("different seeds give different label sequences") {
    SynthParams a, b;
    a.n_patients = b.n_patients = 60;
    a.failure_rate = b.failure_rate = 0.3;
    a.seed = 1;
    b.seed = 2;
    auto pa = plan_cohort(a), pb = plan_cohort(b);
    bool differ = false;
    for (size_t i = 0; i < pa.size(); ++i)
        differ |= pa[i].clinical.outcome != pb[i].clinical.outcome;
    CHECK(differ);
}

TEST_CASE("generated ETT-CPAP spans are exactly 300 s and validate") {
    SynthParams p;
    p.n_patients = 3;
    p.failure_rate = 0.34;
    p.seed = 9;
    auto plans = plan_cohort(p);
    for (const auto& plan : plans) {
        auto rec = synth_recording(p, plan);
        rec.validate();
        CHECK(rec.ettcpap.duration_s() == doctest::Approx(300.0).epsilon(1e-12));
        CHECK(rec.imv.end_s <= rec.ettcpap.start_s);
    }
}

TEST_CASE("synth rejects a failure rate outside (0,1)") {
    SynthParams p;
    p.n_patients = 10;
    p.failure_rate = 1.5;
    check_error(CRX_E_INVALID_RATE, [&] { plan_cohort(p); });
}

TEST_CASE("epoch sidecar and clinical CSV round-trip") {
    TempDir tmp;
    auto rec = make_recording("p01", 50.0, 320.0, {0.0, 10.0}, {10.0, 310.0});
    write_epoch_sidecar(tmp.file("epochs.csv"), {rec});
    auto spans = load_epoch_sidecar(tmp.file("epochs.csv"));
    REQUIRE(spans.count("p01"));
    CHECK(spans["p01"].second.end_s == doctest::Approx(310.0));

    ClinicalRecord clin{"p01", 900.0, 26.5, Outcome::Failure};
    write_clinical_csv(tmp.file("clinical.csv"), {clin});
    auto back = load_clinical_csv(tmp.file("clinical.csv"));
    REQUIRE(back.size() == 1);
    CHECK(back[0].bw_g == doctest::Approx(900.0));
    CHECK(back[0].outcome == Outcome::Failure);
}

}  // TEST_SUITE
