#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mgtwin/engine.hpp"
#include "mgtwin/validate.hpp"
#include "helpers.hpp"

using namespace mgtwin;

namespace {

const ValidatedConfig& full_config() {
    static const ValidatedConfig cfg = validate_config(MicrogridConfig::defaults());
    return cfg;
}

const std::vector<DatasetMatrix>& corpus() {
    static const std::vector<DatasetMatrix> runs = [] {
        std::vector<DatasetMatrix> out;
        for (int c = 0; c < kNumClasses; ++c)
            out.push_back(run_scenario(full_config(), builtin_scenario(c, full_config().config())));
        return out;
    }();
    return runs;
}

bool has_failure(const ValidationReport& r, const std::string& needle) {
    for (const auto& f : r.failures())
        if (f.find(needle) != std::string::npos) return true;
    return false;
}

} // namespace

TEST_CASE("every class validates on its own generated data") {
    const auto trace = record_feedback(full_config(), builtin_scenario(10, full_config().config()));
    for (int c = 0; c < kNumClasses; ++c) {
        CAPTURE(c);
        const auto rep = validate_scenario(corpus()[c], c, full_config(), {}, c == 10 ? &trace : nullptr);
        for (const auto& f : rep.failures()) MESSAGE(f);
        CHECK(rep.passed);
        CHECK(rep.class_id == c);
        CHECK(rep.rows == 500001);
        if (c > 0) {
            REQUIRE(rep.label_onset);
            CHECK(*rep.label_onset == *rep.scheduled_onset);
        }
    }
}

TEST_CASE("class 10 needs the feedback trace") {
    const auto rep = validate_scenario(corpus()[10], 10, full_config());
    CHECK_FALSE(rep.passed);
    CHECK(has_failure(rep, "feedback trace unavailable"));
}

TEST_CASE("no event detector fires on the baseline") {
    const auto rep = validate_scenario(corpus()[0], 0, full_config());
    CHECK(rep.passed);
    for (const auto& d : rep.detections)
        if (d.kind == EventKind::Step) CHECK_FALSE(d.passed);
    CHECK_FALSE(rep.label_onset);
}

TEST_CASE("a class-1 file validated as class 2 reports a missing sag") {
    const auto rep = validate_scenario(corpus()[1], 2, full_config());
    CHECK_FALSE(rep.passed);
    CHECK(has_failure(rep, "sag signature absent"));
}

TEST_CASE("every wrong expectation fails") {
    const auto trace = record_feedback(full_config(), builtin_scenario(10, full_config().config()));
    for (int actual : {1, 2, 5, 8})
        for (int expected = 1; expected < kNumClasses; ++expected) {
            if (expected == actual) continue;
            CAPTURE(actual);
            CAPTURE(expected);
            const auto rep = validate_scenario(corpus()[actual], expected, full_config(), {},
                                               expected == 10 ? &trace : nullptr);
            CHECK_FALSE(rep.passed);
        }
}

TEST_CASE("tampered labels fail the onset cross-check") {
    auto m = corpus()[1];
    for (SampleIndex n = 300000; n < 350000; ++n) m(n, col::label) = 1.0;
    const auto rep = validate_scenario(m, 1, full_config());
    CHECK_FALSE(rep.passed);
    CHECK(has_failure(rep, "does not match physical onset"));

    auto late = corpus()[6];
    for (SampleIndex n = 250000; n < 252000; ++n) late(n, col::label) = 0.0;
    CHECK_FALSE(validate_scenario(late, 6, full_config()).passed);

    auto holes = corpus()[7];
    holes(400000, col::label) = 0.0;
    CHECK(has_failure(validate_scenario(holes, 7, full_config()), "label_values"));
}

TEST_CASE("report JSON and extracts") {
    testing::TempDir dir;
    const auto rep = validate_scenario(corpus()[8], 8, full_config());
    const auto j = report_to_json(rep, true);
    CHECK(j["class_id"] == 8);
    CHECK(j["passed"] == true);
    CHECK(j["detections"].size() == rep.detections.size());
    CHECK(!rep.extracts.empty());
    write_extracts_csv(rep, dir / "x.csv");
    std::ifstream in(dir / "x.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("time,", 0) == 0);
    std::size_t lines = 1;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == rep.extract_time.size() + 1);
}

TEST_CASE("feedback sidecar round trip") {
    testing::TempDir dir;
    auto raw = testing::coarse_config();
    const auto cfg = validate_config(raw);
    ScenarioSpec spec = builtin_scenario(10, raw);
    spec.schedule.push_back({0.6, action::LoadStep{10e3, 0.0}});
    const auto trace = record_feedback(cfg, spec);
    CHECK(trace.delay_samples == 1000);
    CHECK(trace.activation == 25000);
    CHECK(feedback_is_pure_shift(trace));
    write_feedback_csv(trace, raw.grid.dt, dir / "fb.csv");
    const auto back = read_feedback_csv(dir / "fb.csv");
    CHECK(back.f_meas == trace.f_meas);
    CHECK(back.f_fb == trace.f_fb);
    CHECK(back.activation == trace.activation);
    CHECK(back.delay_samples == trace.delay_samples);

    auto broken = trace;
    broken.f_fb[30000] += 1e-12;
    CHECK_FALSE(feedback_is_pure_shift(broken));
}
