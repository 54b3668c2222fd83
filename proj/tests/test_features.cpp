#include <doctest.h>

#include <set>

#include "errors.hpp"
#include "features.hpp"
#include "helpers.hpp"
#include "synth.hpp"

using namespace crx;
using namespace crxtest;

namespace {

MetricSeries series_of(std::vector<double> values, std::vector<uint8_t> valid,
                       double rate = 50.0) {
    MetricSeries s;
    s.kind = MetricKind::RpRc;
    s.rate_hz = rate;
    s.valid = valid.empty() ? std::vector<uint8_t>(values.size(), 1) : std::move(valid);
    s.values = std::move(values);
    return s;
}

FeatureMatrix tiny_matrix(const std::vector<Outcome>& outcomes) {
    FeatureMatrix m;
    for (size_t r = 0; r < outcomes.size(); ++r) {
        m.add_row("p" + std::to_string(r), outcomes[r]);
        for (int c = 0; c < kNumFeatures; ++c)
            m.set(r, c, static_cast<double>(r * 100 + c));
    }
    return m;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("registry is exactly 79 unique stable names") {
    const auto& names = feature_names();
    CHECK(names.size() == 79);
    std::set<std::string> unique(names.begin(), names.end());
    CHECK(unique.size() == 79);
    CHECK(names[kBwFeatureIndex] == "bw_g");
    CHECK(names[kGaFeatureIndex] == "ga_weeks");
    CHECK(names[0] == "rp_rc_median");
    CHECK(names[44] == "hrv_sdnn_ms");
    // 40 metric + 4 sat + 3 hrv + 30 pattern + 2 clinical
    CHECK(feature_registry_hash() == feature_registry_hash());
    CHECK(feature_registry_hash_hex().size() == 16);
}

TEST_CASE("scalarize of a constant series is (c, 0, 0, 0)") {
    auto s = series_of(std::vector<double>(600, 4.5), {});
    auto out = scalarize_metric(s, 6.0);
    for (bool p : out.present) CHECK(p);
    CHECK(out.v[0] == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(out.v[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.v[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.v[3] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("scalarize quantiles use linear interpolation") {
    auto s = series_of({1, 2, 3, 4, 5}, {});
    auto out = scalarize_metric(s, 100.0);  // power window longer than series
    CHECK(out.present[0]);
    CHECK(out.present[1]);
    CHECK(out.v[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(out.v[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_FALSE(out.present[2]);  // no complete power window exists
    CHECK_FALSE(out.present[3]);
}

TEST_CASE("scalarize with under half the samples valid is missing") {
    std::vector<uint8_t> valid(100, 0);
    for (size_t i = 0; i < 49; ++i) valid[i] = 1;
    auto out = scalarize_metric(series_of(std::vector<double>(100, 1.0), valid), 1.0);
    for (bool p : out.present) CHECK_FALSE(p);
}

TEST_CASE("scalarize median/IQR are order-invariant") {
    Rng rng(8);
    std::vector<double> vals(400);
    for (auto& v : vals) v = rng.normal();
    auto a = scalarize_metric(series_of(vals, {}), 2.0);
    rng.shuffle(vals);
    auto b = scalarize_metric(series_of(vals, {}), 2.0);
    CHECK(a.v[0] == doctest::Approx(b.v[0]).epsilon(1e-12));
    CHECK(a.v[1] == doctest::Approx(b.v[1]).epsilon(1e-12));
}

TEST_CASE("sat features: symmetry, degeneracy and the hand-moment case") {
    SUBCASE("alternating two-point series has zero skewness") {
        std::vector<double> sat(300);
        for (size_t i = 0; i < sat.size(); ++i) sat[i] = i % 2 ? 96.0 : 90.0;
        auto out = sat_features(sat, 50.0, 6.0);
        CHECK(out.v[1] == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("constant series has zero skewness and kurtosis by convention") {
        std::vector<double> sat(300, 95.0);
        auto out = sat_features(sat, 50.0, 6.0);
        CHECK(out.v[0] == 0.0);
        CHECK(out.v[1] == 0.0);
        CHECK(out.v[2] == doctest::Approx(0.0));
    }
    SUBCASE("population skewness of [2,2,2,10]") {
        std::vector<double> sat = {2, 2, 2, 10};
        auto out = sat_features(sat, 50.0, 100.0);
        CHECK(out.v[1] == doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-12));
    }
}

TEST_CASE("assemble produces complete rows for healthy synthetic patients") {
    SynthParams p;
    p.n_patients = 2;
    p.failure_rate = 0.5;
    p.seed = 31;
    auto plans = plan_cohort(p);
    std::vector<Recording> recs;
    std::vector<ClinicalRecord> clin;
    for (const auto& plan : plans) {
        recs.push_back(synth_recording(p, plan));
        clin.push_back(plan.clinical);
    }
    RunConfig cfg;
    cfg.threads = 1;
    auto m = assemble(recs, clin, cfg);
    CHECK(m.rows() == 2);
    for (size_t r = 0; r < m.rows(); ++r)
        for (int c = 0; c < kNumFeatures; ++c) CHECK_FALSE(m.is_missing(r, c));
    CHECK(m.value(0, kBwFeatureIndex) == doctest::Approx(clin[0].bw_g));
}

TEST_CASE("a flatline ECG leaves exactly the three HRV features missing") {
    SynthParams p;
    p.n_patients = 1;
    p.failure_rate = 0.5;
    p.seed = 31;
    auto plans = plan_cohort(p);
    auto rec = synth_recording(p, plans[0]);
    auto& ecg = rec.channel(ChannelKind::Ecg).samples;
    std::fill(ecg.begin(), ecg.end(), 0.0);

    RunConfig cfg;
    cfg.threads = 1;
    auto m = assemble({rec}, {plans[0].clinical}, cfg);
    for (int c = 0; c < kNumFeatures; ++c) {
        const bool is_hrv = c >= 44 && c <= 46;
        CHECK(m.is_missing(0, c) == is_hrv);
    }
}

TEST_CASE("assemble rejects mismatched and duplicate ids") {
    SynthParams p;
    p.n_patients = 1;
    p.failure_rate = 0.5;
    p.seed = 31;
    auto plans = plan_cohort(p);
    auto rec = synth_recording(p, plans[0]);
    RunConfig cfg;
    cfg.threads = 1;

    ClinicalRecord other = plans[0].clinical;
    other.patient_id = "someone_else";
    CHECK_THROWS_AS(assemble({rec}, {other}, cfg), Error);
    CHECK_THROWS_AS(assemble({rec, rec}, {plans[0].clinical, plans[0].clinical}, cfg),
                    Error);
}

TEST_CASE("median imputation follows the group rule") {
    FeatureMatrix m = tiny_matrix({Outcome::Success, Outcome::Success, Outcome::Success,
                                   Outcome::Failure, Outcome::Failure, Outcome::Unknown});
    // feature 3 observed as 1, 3, 100 in success rows; missing in row 2
    m.set(0, 3, 1.0);
    m.set(1, 3, 3.0);
    m.set(2, 3, 100.0);
    m.set_missing(1, 3);  // missing success entry, observed 1 and 100 remain
    m.set(3, 3, 7.0);
    m.set(4, 3, 9.0);
    m.set_missing(5, 3);  // unknown-outcome row

    std::vector<size_t> fit_rows = {0, 1, 2, 3, 4};
    auto table = impute_fit(m, fit_rows);
    CHECK(table.success[3] == doctest::Approx(50.5));  // median of {1, 100}
    CHECK(table.failure[3] == doctest::Approx(8.0));
    CHECK(table.overall[3] == doctest::Approx(8.0));  // median of {1,100,7,9}

    impute_apply(m, table, fit_rows);
    CHECK(m.value(1, 3) == doctest::Approx(50.5));  // group median
    CHECK(m.value(5, 3) == doctest::Approx(8.0));   // overall median
    for (size_t r = 0; r < m.rows(); ++r)
        for (int c = 0; c < kNumFeatures; ++c) CHECK_FALSE(m.is_missing(r, c));
}

TEST_CASE("imputing a complete matrix changes nothing and is idempotent") {
    FeatureMatrix m = tiny_matrix({Outcome::Success, Outcome::Failure});
    const auto before = m.values;
    std::vector<size_t> rows = {0, 1};
    auto table = impute_fit(m, rows);
    impute_apply(m, table, rows);
    CHECK(m.values == before);
    impute_apply(m, table, rows);
    CHECK(m.values == before);
}

TEST_CASE("a feature with no observed value at all cannot be imputed") {
    FeatureMatrix m = tiny_matrix({Outcome::Success, Outcome::Failure});
    m.set_missing(0, 10);
    m.set_missing(1, 10);
    std::vector<size_t> rows = {0, 1};
    CHECK_THROWS_AS(impute_fit(m, rows), Error);
}

TEST_CASE("the median-oracle example: observed 1,3,100 gives 3") {
    FeatureMatrix m =
        tiny_matrix({Outcome::Success, Outcome::Success, Outcome::Success, Outcome::Success});
    m.set(0, 5, 1.0);
    m.set(1, 5, 3.0);
    m.set(2, 5, 100.0);
    m.set_missing(3, 5);
    std::vector<size_t> rows = {0, 1, 2, 3};
    auto table = impute_fit(m, rows);
    impute_apply(m, table, rows);
    CHECK(m.value(3, 5) == doctest::Approx(3.0));
}

TEST_CASE("feature CSV round trip is lossless") {
    TempDir tmp;
    Rng rng(17);
    FeatureMatrix m;
    for (size_t r = 0; r < 7; ++r) {
        m.add_row("p" + std::to_string(r),
                  r % 3 == 0 ? Outcome::Failure
                             : (r % 3 == 1 ? Outcome::Success : Outcome::Unknown));
        for (int c = 0; c < kNumFeatures; ++c) {
            if (rng.uniform01() < 0.1)
                m.set_missing(r, c);
            else
                m.set(r, c, rng.normal(0.0, 1e3));
        }
    }
    write_feature_csv(tmp.file("f.csv"), m);
    auto back = read_feature_csv(tmp.file("f.csv"));
    REQUIRE(back.rows() == m.rows());
    CHECK(back.patient_ids == m.patient_ids);
    for (size_t r = 0; r < m.rows(); ++r) {
        CHECK(back.outcomes[r] == m.outcomes[r]);
        for (int c = 0; c < kNumFeatures; ++c) {
            CHECK(back.is_missing(r, c) == m.is_missing(r, c));
            if (!m.is_missing(r, c)) CHECK(back.value(r, c) == m.value(r, c));
        }
    }
}

TEST_CASE("a permuted header is a schema mismatch") {
    TempDir tmp;
    FeatureMatrix m = tiny_matrix({Outcome::Success});
    write_feature_csv(tmp.file("f.csv"), m);

    // swap two feature names in the header line
    std::ifstream in(tmp.file("f.csv"));
    std::string header, rest((std::istreambuf_iterator<char>(in)), {});
    const auto nl = rest.find('\n');
    header = rest.substr(0, nl);
    auto pos_a = header.find("rp_rc_median");
    auto pos_b = header.find("rp_rc_iqr");
    REQUIRE(pos_a != std::string::npos);
    REQUIRE(pos_b != std::string::npos);
    std::string swapped = header;
    swapped.replace(pos_a, 12, "rp_rc_iqr___");  // corrupt a name
    std::ofstream out(tmp.file("g.csv"));
    out << swapped << rest.substr(nl);
    out.close();

    try {
        read_feature_csv(tmp.file("g.csv"));
        FAIL_CHECK("expected SchemaMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == CRX_E_SCHEMA_MISMATCH);
    }
}

}  // TEST_SUITE
