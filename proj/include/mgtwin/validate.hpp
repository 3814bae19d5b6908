#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mgtwin/dataset.hpp"
#include "mgtwin/detect.hpp"
#include "mgtwin/engine.hpp"
#include "mgtwin/model.hpp"

namespace mgtwin {

/// Detector thresholds. Defaults are the artifact's documented choices.
struct ValidationOptions {
    double timing_tolerance = 2e-3;
    double smooth_window = 10e-3;       // f and P series
    double noise_smooth_window = 100e-6;  // waveform high-pass split
    double baseline_window = 100e-3;    // ends just before the first event
    double step_tolerance = 0.02;       // relative error on configured step size
    double ramp_tolerance_p = 0.02;
    double ramp_tolerance_f = 0.05;
    double share_tolerance = 0.005;
    double droop_offset_tolerance = 0.05;
    double sag_threshold = 0.1;         // vpcc below 0.9x baseline
    double power_excursion = 0.01;
    double current_rise = 0.10;
    double quiet_step_fraction = 0.01;  // max step allowed where none is expected
    double unbalance_threshold = 0.05;
    double i0_quiet_fraction = 1e-3;    // of rated current
    double unbalance_quiet = 1e-3;
    double noise_variance_ratio = 10.0;
    double f_flat = 1e-3;               // Hz, class 0 peak-to-peak
    double v_flat = 1e-3;               // relative
    double p_flat = 1e-3;               // relative
    std::size_t extract_stride = 50;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double expected = 0.0;
    std::string detail;
};

struct SeriesExtract {
    std::string name;
    std::vector<double> values;
};

struct ValidationReport {
    int class_id = 0;
    std::string scenario;
    SampleIndex rows = 0;
    std::optional<SampleIndex> label_onset;
    std::optional<SampleIndex> scheduled_onset;
    std::optional<SampleIndex> physical_onset;
    std::vector<EventDetection> detections;
    std::vector<CheckResult> checks;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<double> extract_time;
    std::vector<SeriesExtract> extracts;
    bool passed = false;

    std::vector<std::string> failures() const;
};

/// Runs the class's expected detector set and cross-checks label timing
/// against the detected physical onset. Failures are recorded, not thrown.
/// `trace` supplies the feedback streams for the delay class.
ValidationReport validate_scenario(const DatasetMatrix& m, int class_id,
                                   const ValidatedConfig& cfg,
                                   const ValidationOptions& options = {},
                                   const FeedbackTrace* trace = nullptr);

nlohmann::json report_to_json(const ValidationReport& report, bool include_extracts = false);

/// time plus every extracted series, decimated by options.extract_stride.
void write_extracts_csv(const ValidationReport& report, const std::filesystem::path& path);

/// Feedback trace sidecar: time,f_meas,f_fb with the activation in a header comment.
void write_feedback_csv(const FeedbackTrace& trace, double dt, const std::filesystem::path& path);
FeedbackTrace read_feedback_csv(const std::filesystem::path& path);

/// |f_fb[n] - f_meas[n - D]| == 0 for every n past activation + D.
bool feedback_is_pure_shift(const FeedbackTrace& trace);

} // namespace mgtwin
