#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "mgtwin/model.hpp"

namespace mgtwin {

enum class EventKind { Step, Sag, Ramp, Trip, Tie, QStep, Slg, Noise, Delay };

const char* to_string(EventKind kind);

struct EventDetection {
    EventKind kind = EventKind::Step;
    std::string signal;           // series the detector ran on
    SampleIndex onset = -1;
    double magnitude = 0.0;
    SampleIndex window_start = -1;
    SampleIndex window_end = -1;  // inclusive
    bool passed = false;
    std::string note;
};

nlohmann::json detection_to_json(const EventDetection& d);

using SeriesRef = Eigen::Ref<const Eigen::VectorXd>;

struct StepParams {
    double t_hint = 0.0;
    double search_radius = 10e-3;
    double locate_window = 0.5e-3;  // short windows pin the onset
    double pre_window = 50e-3;
    double post_window = 100e-3;
    double settle = 150e-3;         // gap before the post window
    double min_magnitude = 0.0;
    double timing_tolerance = 2e-3;
};

/// Onset where mean(post) - mean(pre) over the locating windows is largest in
/// magnitude near t_hint; magnitude from the settled pre/post levels.
EventDetection detect_step(SeriesRef x, double dt, const StepParams& p);

enum class Direction { Below, Above };

struct ExcursionParams {
    Direction direction = Direction::Below;
    double threshold_fraction = 0.1;   // relative to the baseline mean
    double baseline_start = 0.0;
    double baseline_end = 0.1;
    double absolute_threshold = 0.0;   // used instead when > 0
    bool require_clear = true;
};

/// Longest contiguous run that departs from the baseline mean by at least
/// the threshold in the given direction.
EventDetection detect_window_excursion(SeriesRef x, double dt, const ExcursionParams& p);

struct RampParams {
    double start = 0.0;
    double end = 0.0;
    double min_total = 0.0;
    double smooth_window = 10e-3;
    double pre_window = 20e-3;
    double settle = 0.0;              // gap after `end` before the post level
    double post_window = 20e-3;
    double min_positive_fraction = 0.9;
};

/// Passed iff the smoothed slope is positive on >= 90% of the window and
/// the settled total change reaches min_total.
EventDetection detect_ramp(SeriesRef x, double dt, const RampParams& p);

struct TripParams {
    double t_hint = 0.0;
    double pre_window = 50e-3;
    double tolerance = 150e-3;    // allowed delay of the drop after t_hint
    double early_tolerance = 2e-3;
    double fraction = 0.01;
};

/// First index (from t_hint) where the unit's power falls below 1% of its
/// pre-trip mean and stays there.
EventDetection detect_trip(SeriesRef p_dg, double dt, const TripParams& p);

/// Index near t_hint where the slope changes most, from second differences
/// over `window`. Pins the start of a ramp or of a lagged response.
SampleIndex locate_kink(SeriesRef x, double dt, double t_hint, double search_radius, double window);

} // namespace mgtwin
