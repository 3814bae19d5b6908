#include "mgtwin/detect.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mgtwin/metrics.hpp"

namespace mgtwin {

const char* to_string(EventKind kind) {
    switch (kind) {
    case EventKind::Step: return "step";
    case EventKind::Sag: return "sag";
    case EventKind::Ramp: return "ramp";
    case EventKind::Trip: return "trip";
    case EventKind::Tie: return "tie";
    case EventKind::QStep: return "qstep";
    case EventKind::Slg: return "slg";
    case EventKind::Noise: return "noise";
    case EventKind::Delay: return "delay";
    }
    return "unknown";
}

nlohmann::json detection_to_json(const EventDetection& d) {
    nlohmann::json j{{"kind", to_string(d.kind)},
                     {"signal", d.signal},
                     {"onset", d.onset},
                     {"magnitude", d.magnitude},
                     {"window", {d.window_start, d.window_end}},
                     {"passed", d.passed}};
    if (!d.note.empty()) j["note"] = d.note;
    return j;
}

namespace {

using Index = Eigen::Index;

SampleIndex to_index(double t, double dt) { return static_cast<SampleIndex>(std::llround(t / dt)); }

// Mean of x[lo, hi) from prefix sums; lo/hi are clipped to the series.
std::optional<double> window_mean(const std::vector<long double>& sums, Index lo, Index hi) {
    const Index size = static_cast<Index>(sums.size()) - 1;
    lo = std::clamp<Index>(lo, 0, size);
    hi = std::clamp<Index>(hi, 0, size);
    if (hi <= lo) return std::nullopt;
    return static_cast<double>((sums[hi] - sums[lo]) / static_cast<long double>(hi - lo));
}

} // namespace

EventDetection detect_step(SeriesRef x, double dt, const StepParams& p) {
    EventDetection d;
    d.kind = EventKind::Step;
    const Index size = x.size();
    const auto sums = prefix_sums(x);
    const Index hint = to_index(p.t_hint, dt);
    const Index radius = window_samples(p.search_radius, dt);
    const Index w = window_samples(p.locate_window, dt);

    const Index lo = std::max<Index>(w, hint - radius);
    const Index hi = std::min<Index>(size - w, hint + radius);
    if (hi < lo) {
        d.note = "series too short for the search window";
        return d;
    }
    double best = -1.0;
    for (Index n = lo; n <= hi; ++n) {
        const double diff = *window_mean(sums, n, n + w) - *window_mean(sums, n - w, n);
        if (std::abs(diff) > best) {
            best = std::abs(diff);
            d.onset = n;
        }
    }

    const Index pre = window_samples(p.pre_window, dt);
    const Index post = window_samples(p.post_window, dt);
    const Index settle = static_cast<Index>(std::llround(p.settle / dt));
    const auto before = window_mean(sums, d.onset - pre, d.onset);
    const auto after = window_mean(sums, d.onset + settle, d.onset + settle + post);
    if (!before || !after) {
        d.note = "pre/post windows fall outside the series";
        return d;
    }
    d.magnitude = *after - *before;
    d.window_start = std::max<Index>(0, d.onset - pre);
    d.window_end = std::min<Index>(size, d.onset + settle + post) - 1;

    const Index tol = static_cast<Index>(std::llround(p.timing_tolerance / dt));
    const bool big = d.magnitude != 0.0 && std::abs(d.magnitude) >= p.min_magnitude;
    const bool timely = std::abs(d.onset - hint) <= tol;
    d.passed = big && timely;
    if (!big)
        d.note = "step magnitude below threshold";
    else if (!timely)
        d.note = "step onset outside timing tolerance";
    return d;
}

EventDetection detect_window_excursion(SeriesRef x, double dt, const ExcursionParams& p) {
    EventDetection d;
    d.kind = EventKind::Sag;
    const Index size = x.size();
    const Index b0 = std::max<Index>(0, to_index(p.baseline_start, dt));
    const Index b1 = std::min<Index>(size, to_index(p.baseline_end, dt));
    if (b1 <= b0) {
        d.note = "empty baseline window";
        return d;
    }
    const double base = x.segment(b0, b1 - b0).mean();
    const bool absolute = p.absolute_threshold > 0.0;
    const double level = absolute ? p.absolute_threshold
                                  : (p.direction == Direction::Below ? base * (1.0 - p.threshold_fraction)
                                                                     : base * (1.0 + p.threshold_fraction));
    auto beyond = [&](double v) {
        return p.direction == Direction::Below ? v <= level : v >= level;
    };

    Index best_start = -1, best_len = 0;
    for (Index n = 0; n < size;) {
        if (!beyond(x[n])) {
            ++n;
            continue;
        }
        Index m = n;
        while (m < size && beyond(x[m])) ++m;
        if (m - n > best_len) {
            best_len = m - n;
            best_start = n;
        }
        n = m;
    }
    if (best_len == 0) {
        d.note = "no excursion beyond threshold";
        return d;
    }
    d.onset = best_start;
    d.window_start = best_start;
    d.window_end = best_start + best_len - 1;
    const auto seg = x.segment(best_start, best_len);
    const double extreme = p.direction == Direction::Below ? seg.minCoeff() : seg.maxCoeff();
    d.magnitude = absolute || base == 0.0 ? extreme : (extreme - base) / base;
    const bool cleared = d.window_end < size - 1;
    d.passed = cleared || !p.require_clear;
    if (!d.passed) d.note = "excursion does not clear before the end of the series";
    return d;
}

EventDetection detect_ramp(SeriesRef x, double dt, const RampParams& p) {
    EventDetection d;
    d.kind = EventKind::Ramp;
    const Index size = x.size();
    const Index s0 = to_index(p.start, dt);
    const Index s1 = std::min<Index>(size - 1, to_index(p.end, dt));
    if (s0 < 0 || s1 <= s0) {
        d.note = "ramp window outside the series";
        return d;
    }
    const Eigen::VectorXd rate = slope(x, window_samples(p.smooth_window, dt), dt);
    Index positive = 0;
    for (Index n = s0; n <= s1; ++n)
        if (rate[n] > 0.0) ++positive;
    const double fraction = static_cast<double>(positive) / static_cast<double>(s1 - s0 + 1);

    const auto sums = prefix_sums(x);
    const Index settle = static_cast<Index>(std::llround(p.settle / dt));
    const auto before = window_mean(sums, s0 - window_samples(p.pre_window, dt), s0);
    const auto after = window_mean(sums, s1 + settle, s1 + settle + window_samples(p.post_window, dt));
    d.onset = s0;
    d.window_start = s0;
    d.window_end = s1;
    if (!before || !after) {
        d.note = "pre/post windows fall outside the series";
        return d;
    }
    d.magnitude = *after - *before;
    const bool monotone = fraction >= p.min_positive_fraction;
    const bool big = d.magnitude > 0.0 && d.magnitude >= p.min_total;
    d.passed = monotone && big;
    d.note = "positive slope on " + std::to_string(fraction * 100.0).substr(0, 5) + "% of window";
    if (!big) d.note += "; total change below threshold";
    return d;
}

EventDetection detect_trip(SeriesRef p_dg, double dt, const TripParams& p) {
    EventDetection d;
    d.kind = EventKind::Trip;
    const Index size = p_dg.size();
    const Index hint = to_index(p.t_hint, dt);
    const Index pre = window_samples(p.pre_window, dt);
    const auto sums = prefix_sums(p_dg);
    const auto before = window_mean(sums, hint - pre, hint);
    if (!before || !(*before > 0.0)) {
        d.note = "pre-trip mean is not positive";
        return d;
    }
    const double level = p.fraction * *before;
    const Index from = std::max<Index>(0, hint - static_cast<Index>(std::llround(p.early_tolerance / dt)));
    Index onset = -1;
    for (Index n = from; n < size; ++n) {
        if (std::abs(p_dg[n]) < level) {
            onset = n;
            break;
        }
    }
    if (onset < 0) {
        d.note = "unit never falls below the trip threshold";
        return d;
    }
    d.onset = onset;
    d.window_start = onset;
    d.window_end = size - 1;
    d.magnitude = p_dg[onset] - *before;
    bool stays = true;
    for (Index n = onset; n < size && stays; ++n) stays = std::abs(p_dg[n]) < level;
    const bool timely = onset <= hint + static_cast<Index>(std::llround(p.tolerance / dt));
    d.passed = stays && timely;
    if (!stays)
        d.note = "unit output recovers after the trip";
    else if (!timely)
        d.note = "trip settles later than the tolerance";
    return d;
}

SampleIndex locate_kink(SeriesRef x, double dt, double t_hint, double search_radius, double window) {
    const Index size = x.size();
    const Index hint = to_index(t_hint, dt);
    const Index radius = window_samples(search_radius, dt);
    const Index w = window_samples(window, dt);
    const Index lo = std::max<Index>(w, hint - radius);
    const Index hi = std::min<Index>(size - 1 - w, hint + radius);
    SampleIndex best_n = -1;
    double best = -1.0;
    for (Index n = lo; n <= hi; ++n) {
        const double bend = std::abs(x[n + w] - 2.0 * x[n] + x[n - w]);
        if (bend > best) {
            best = bend;
            best_n = n;
        }
    }
    return best_n;
}

} // namespace mgtwin
