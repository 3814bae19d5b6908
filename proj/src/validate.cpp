#include "mgtwin/validate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "mgtwin/metrics.hpp"
#include "mgtwin/scenarios.hpp"

namespace mgtwin {

std::vector<std::string> ValidationReport::failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
        if (!c.passed) out.push_back(c.name + (c.detail.empty() ? "" : ": " + c.detail));
    return out;
}

namespace {

using Index = Eigen::Index;

struct Context {
    const DatasetMatrix& m;
    const ValidatedConfig& cfg;
    const ValidationOptions& opt;
    ValidationReport& rep;
    double dt;
    Index size;
    Index tol;       // timing tolerance in samples
    double settle;   // 5 lag time constants, seconds
    Eigen::VectorXd p_total, q_total, f_mean, v_pcc, i_pcc;

    Index idx(double t) const { return static_cast<Index>(std::llround(t / dt)); }

    double mean(const Eigen::VectorXd& x, double t0, double t1) const {
        const Index a = std::clamp<Index>(idx(t0), 0, size);
        const Index b = std::clamp<Index>(idx(t1), 0, size);
        if (b <= a) return std::nan("");
        return x.segment(a, b - a).mean();
    }

    // Largest |x - base| / |base| over [t0, t1).
    double max_rel_dev(const Eigen::VectorXd& x, double base, double t0, double t1) const {
        const Index a = std::clamp<Index>(idx(t0), 0, size);
        const Index b = std::clamp<Index>(idx(t1), 0, size);
        if (b <= a || base == 0.0) return std::nan("");
        return ((x.segment(a, b - a).array() - base).abs() / std::abs(base)).maxCoeff();
    }

    CheckResult& check(const std::string& name, bool passed, double value, double expected,
                       std::string detail = "") {
        rep.checks.push_back({name, passed, value, expected, std::move(detail)});
        return rep.checks.back();
    }

    EventDetection detection(EventDetection d, EventKind kind, const std::string& signal) {
        d.kind = kind;
        d.signal = signal;
        rep.detections.push_back(d);
        return d;
    }

    StepParams step_params(double t_hint, double min_magnitude) const {
        StepParams p;
        p.t_hint = t_hint;
        p.settle = settle;
        p.min_magnitude = min_magnitude;
        p.timing_tolerance = opt.timing_tolerance;
        return p;
    }
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

double rel_err(double value, double expected) {
    return expected == 0.0 ? std::abs(value) : std::abs(value - expected) / std::abs(expected);
}

double droop_m_p(const Context& c) { return c.cfg->dgs.front().droop.m_p; }
double nominal_f(const Context& c) { return c.cfg->dgs.front().droop.f0; }
double nominal_v(const Context& c) { return c.cfg->dgs.front().droop.v0; }

// ---- per-class signatures --------------------------------------------------

void check_baseline(Context& c) {
    const double f_pp = c.f_mean.maxCoeff() - c.f_mean.minCoeff();
    c.check("f_mean_flat", f_pp <= c.opt.f_flat, f_pp, c.opt.f_flat, "peak-to-peak Hz");
    const double v_base = c.v_pcc.mean();
    const double v_pp = (c.v_pcc.maxCoeff() - c.v_pcc.minCoeff()) / v_base;
    c.check("v_pcc_flat", v_pp <= c.opt.v_flat, v_pp, c.opt.v_flat, "relative peak-to-peak");
    const double p_base = c.p_total.mean();
    const double p_pp = p_base == 0.0 ? 0.0 : (c.p_total.maxCoeff() - c.p_total.minCoeff()) / p_base;
    c.check("p_total_flat", p_pp <= c.opt.p_flat, p_pp, c.opt.p_flat, "relative peak-to-peak");

    // No detector may fire anywhere in the interior.
    struct Probe {
        const char* name;
        const Eigen::VectorXd* x;
        double min;
    };
    const double duration = (c.size - 1) * c.dt;
    const Probe probes[] = {
        {"p_total", &c.p_total, c.opt.quiet_step_fraction * std::abs(p_base)},
        {"f_mean", &c.f_mean, c.opt.f_flat},
        {"v_pcc", &c.v_pcc, c.opt.quiet_step_fraction * v_base},
        {"i_pcc", &c.i_pcc, c.opt.quiet_step_fraction * c.i_pcc.mean()},
    };
    for (const auto& pr : probes) {
        StepParams sp = c.step_params(0.5 * duration, pr.min);
        sp.search_radius = 0.4 * duration;
        sp.timing_tolerance = sp.search_radius;
        sp.settle = std::min(sp.settle, 0.05 * duration);
        sp.pre_window = std::min(sp.pre_window, 0.05 * duration);
        sp.post_window = std::min(sp.post_window, 0.05 * duration);
        const auto d = c.detection(detect_step(*pr.x, c.dt, sp), EventKind::Step, pr.name);
        c.check(std::string("no_step_") + pr.name, !d.passed, d.magnitude, 0.0,
                d.passed ? "unexpected step at sample " + std::to_string(d.onset) : "");
    }
    ExcursionParams sag;
    sag.threshold_fraction = c.opt.sag_threshold;
    sag.baseline_end = duration;
    const auto d = c.detection(detect_window_excursion(c.v_pcc, c.dt, sag), EventKind::Sag, "v_pcc");
    c.check("no_sag", d.window_start < 0, d.magnitude, 0.0);
}

void check_load_step(Context& c) {
    const auto& sc = c.cfg->scenario;
    const double t0 = sc.load_step_time;
    const double dp = sc.load_step_p;
    const auto d = c.detection(detect_step(c.p_total, c.dt, c.step_params(t0, (1.0 - c.opt.step_tolerance) * dp)),
                          EventKind::Step, "p_total");
    if (d.window_start < 0 && d.onset < 0) {
        c.check("load_step", false, 0.0, dp, "step signature absent");
        return;
    }
    c.rep.physical_onset = d.onset;
    const double err = rel_err(d.magnitude, dp);
    c.check("step_magnitude", err <= c.opt.step_tolerance && d.magnitude > 0.0, d.magnitude, dp,
            err <= c.opt.step_tolerance ? "" : "step signature absent or off by " + fmt(err * 100) + "%");
    const double onset_err = (d.onset - c.idx(t0)) * c.dt;
    c.check("step_onset", std::abs(onset_err) <= c.opt.timing_tolerance, onset_err, 0.0, "seconds");

    // Frequency dip: minimum right after the step, then recovery.
    const Index a = c.idx(t0);
    const Index b = c.size;
    Index at_min = a;
    c.f_mean.segment(a, b - a).minCoeff(&at_min);
    at_min += a;
    const double t_min = at_min * c.dt;
    const double base = c.mean(c.f_mean, t0 - c.opt.baseline_window, t0);
    const double depth = base - c.f_mean[at_min];
    const double end_level = c.mean(c.f_mean, (c.size - 1) * c.dt - 20e-3, (c.size - 1) * c.dt);
    const bool in_window = t_min >= t0 && t_min <= t0 + 0.05;
    c.check("f_dip_timing", in_window && depth > 0.0, t_min, t0,
            in_window ? "" : "f_mean minimum outside [t0, t0 + 50 ms]");
    const double recovered = depth > 0.0 ? (end_level - c.f_mean[at_min]) / depth : 0.0;
    c.check("f_recovery", recovered >= 0.5, recovered, 1.0, "fraction of the dip recovered by the end");

    const double i_base = c.mean(c.i_pcc, t0 - c.opt.baseline_window, t0);
    const Index i_a = c.idx(t0), i_b = std::min<Index>(c.size, c.idx(t0 + 0.05));
    const double i_peak = c.i_pcc.segment(i_a, i_b - i_a).maxCoeff();
    const double rise = (i_peak - i_base) / i_base;
    c.check("pcc_current_rise", rise >= c.opt.current_rise, rise, c.opt.current_rise);
}

void check_sag(Context& c) {
    const auto& sc = c.cfg->scenario;
    ExcursionParams ep;
    ep.direction = Direction::Below;
    ep.threshold_fraction = c.opt.sag_threshold;
    ep.baseline_start = sc.sag_start - c.opt.baseline_window;
    ep.baseline_end = sc.sag_start;
    const auto d = c.detection(detect_window_excursion(c.v_pcc, c.dt, ep), EventKind::Sag, "v_pcc");
    if (d.window_start < 0) {
        c.check("sag_window", false, 0.0, 0.0, "sag signature absent");
        return;
    }
    c.rep.physical_onset = d.window_start;
    const double start_err = (d.window_start - c.idx(sc.sag_start)) * c.dt;
    const double end_err = (d.window_end + 1 - c.idx(sc.sag_end)) * c.dt;
    const bool confined = std::abs(start_err) <= c.opt.timing_tolerance &&
                          std::abs(end_err) <= c.opt.timing_tolerance && d.passed;
    c.check("sag_window", confined, start_err, 0.0,
            confined ? "" : "sag window misaligned (end error " + fmt(end_err) + " s)");

    // Aligned P_total departure.
    const double p_base = c.mean(c.p_total, ep.baseline_start, ep.baseline_end);
    Index first = -1;
    for (Index n = std::max<Index>(0, c.idx(sc.sag_start) - c.tol); n < c.idx(sc.sag_end); ++n) {
        if (std::abs(c.p_total[n] - p_base) >= c.opt.power_excursion * std::abs(p_base)) {
            first = n;
            break;
        }
    }
    const double p_err = first < 0 ? std::nan("") : (first - c.idx(sc.sag_start)) * c.dt;
    c.check("p_total_excursion", first >= 0 && std::abs(p_err) <= c.opt.timing_tolerance, p_err, 0.0,
            first < 0 ? "no aligned P_total excursion" : "");
}

void check_load_ramp(Context& c) {
    const auto& sc = c.cfg->scenario;
    RampParams rp;
    rp.start = sc.load_ramp_start;
    rp.end = sc.load_ramp_end;
    rp.min_total = (1.0 - c.opt.ramp_tolerance_p) * sc.load_ramp_total;
    rp.smooth_window = c.opt.smooth_window;
    rp.settle = c.settle;
    rp.min_positive_fraction = 0.9;
    const auto d = c.detection(detect_ramp(c.p_total, c.dt, rp), EventKind::Ramp, "p_total");
    const double err = rel_err(d.magnitude, sc.load_ramp_total);
    c.check("ramp_total", err <= c.opt.ramp_tolerance_p, d.magnitude, sc.load_ramp_total,
            err <= c.opt.ramp_tolerance_p ? "" : "ramp signature absent or off by " + fmt(err * 100) + "%");
    c.check("ramp_monotone", d.passed, 0.0, 0.0, d.note);
    c.rep.physical_onset =
        locate_kink(c.p_total, c.dt, sc.load_ramp_start, 10e-3, 0.5e-3);
}

void check_freq_ramp(Context& c) {
    const auto& sc = c.cfg->scenario;
    RampParams rp;
    rp.start = sc.freq_ramp_start;
    rp.end = sc.freq_ramp_end;
    rp.min_total = (1.0 - c.opt.ramp_tolerance_f) * sc.freq_ramp_total;
    rp.smooth_window = c.opt.smooth_window;
    rp.settle = c.settle;
    const auto d = c.detection(detect_ramp(c.f_mean, c.dt, rp), EventKind::Ramp, "f_mean");
    const double err = rel_err(d.magnitude, sc.freq_ramp_total);
    c.check("freq_ramp_total", err <= c.opt.ramp_tolerance_f && d.passed, d.magnitude,
            sc.freq_ramp_total, d.passed ? "" : "ramp signature absent: " + d.note);
    const double p_base = c.mean(c.p_total, rp.start - c.opt.baseline_window, rp.start);
    const double dev = c.max_rel_dev(c.p_total, p_base, rp.start, rp.end);
    c.check("p_total_unchanged", dev < c.opt.power_excursion, dev, c.opt.power_excursion);
    c.rep.physical_onset = locate_kink(c.f_mean, c.dt, rp.start, 10e-3, 0.5e-3);
}

void check_dg_trip(Context& c) {
    const auto& sc = c.cfg->scenario;
    std::array<bool, kNumDgs> online;
    online.fill(true);
    const double lag5 = c.settle;
    for (std::size_t k = 0; k < sc.trip_ids.size(); ++k) {
        const int id = sc.trip_ids[k];
        const double t = sc.trip_times[k];
        const std::string name = "P_DG" + std::to_string(id);
        TripParams tp;
        tp.t_hint = t;
        tp.tolerance = lag5;
        tp.early_tolerance = c.opt.timing_tolerance;
        const auto d = c.detection(detect_trip(c.m.channel(col::p(id - 1)), c.dt, tp), EventKind::Trip, name);
        c.check("trip_" + name, d.passed, (d.onset - c.idx(t)) * c.dt, lag5,
                d.passed ? "" : "trip signature absent: " + d.note);

        const auto s = c.detection(detect_step(c.m.channel(col::p(id - 1)), c.dt, c.step_params(t, 0.0)),
                              EventKind::Trip, name + "_onset");
        if (k == 0) c.rep.physical_onset = s.onset;

        // Shares of the units still online rise after each trip.
        const double before_t = t - c.opt.timing_tolerance;
        online[id - 1] = false;
        const double next_t = k + 1 < sc.trip_times.size() ? sc.trip_times[k + 1] : (c.size - 1) * c.dt;
        bool rose = true;
        for (int j = 0; j < kNumDgs; ++j) {
            if (!online[j]) continue;
            const auto pj = c.m.channel(col::p(j));
            const Eigen::VectorXd x = pj;
            const double pre = c.mean(x, before_t - 20e-3, before_t);
            const double post = c.mean(x, next_t - 20e-3, next_t);
            rose = rose && post > pre;
        }
        c.check("shares_rise_after_" + name, rose, 0.0, 0.0);
    }

    // Final sharing: the DG-served load at the measured voltage, split evenly.
    const double t_last = sc.trip_times.empty() ? 0.0 : *std::max_element(sc.trip_times.begin(), sc.trip_times.end());
    const double w0 = t_last + lag5;
    const double w1 = (c.size - 1) * c.dt;
    const double v = c.mean(c.v_pcc, w0, w1);
    const auto& net = c.cfg->network;
    const double factor = std::pow(v / nominal_v(c), net.load_voltage_exponent);
    const int n_online = static_cast<int>(std::count(online.begin(), online.end(), true));
    const double served = net.load_p * factor - (net.grid_connected_initial ? net.grid_import_p : 0.0);
    const double share = n_online > 0 ? served / n_online : 0.0;
    double worst = 0.0;
    for (int j = 0; j < kNumDgs; ++j) {
        if (!online[j]) continue;
        const Eigen::VectorXd x = c.m.channel(col::p(j));
        worst = std::max(worst, rel_err(c.mean(x, w0, w1), share));
    }
    c.check("final_shares", n_online > 0 && worst <= c.opt.share_tolerance, worst, c.opt.share_tolerance,
            "expected share " + fmt(share) + " W per online unit");
}

void check_tie_trip(Context& c) {
    const auto& sc = c.cfg->scenario;
    const double t0 = sc.tie_open_time;
    const double i_base = c.mean(c.i_pcc, t0 - c.opt.baseline_window, t0);
    const auto d = c.detection(detect_step(c.i_pcc, c.dt, c.step_params(t0, 0.9 * i_base)), EventKind::Tie,
                          "i_pcc");
    const bool dropped = d.passed && d.magnitude < 0.0;
    c.check("pcc_current_drop", dropped, d.magnitude, -i_base,
            dropped ? "" : "tie signature absent: " + d.note);
    c.rep.physical_onset = d.onset;

    const double n_online = kNumDgs;
    const double expected = -droop_m_p(c) * c.cfg->network.grid_import_p / n_online;
    const double w1 = (c.size - 1) * c.dt;
    const double offset = c.mean(c.f_mean, w1 - 100e-3, w1) - nominal_f(c);
    const double err = rel_err(offset, expected);
    c.check("f_droop_offset", err <= c.opt.droop_offset_tolerance, offset, expected);
}

void check_q_step(Context& c) {
    const auto& sc = c.cfg->scenario;
    const double t0 = sc.q_step_time;
    const auto& net = c.cfg->network;
    StepParams sp = c.step_params(t0, 0.0);
    const auto d = c.detection(detect_step(c.q_total, c.dt, sp), EventKind::QStep, "q_total");
    c.rep.physical_onset = d.onset;
    const double v_pre = c.mean(c.v_pcc, t0 - sp.pre_window, t0);
    const double v_post = c.mean(c.v_pcc, t0 + sp.settle, t0 + sp.settle + sp.post_window);
    const double e = net.load_voltage_exponent, v0 = nominal_v(c);
    const double expected_dq =
        (net.load_q + sc.q_step) * std::pow(v_post / v0, e) - net.load_q * std::pow(v_pre / v0, e);
    const double err = rel_err(d.magnitude, expected_dq);
    const bool ok = d.passed && err <= c.opt.step_tolerance;
    c.check("q_step_magnitude", ok, d.magnitude, expected_dq,
            ok ? "" : "q-step signature absent or off by " + fmt(err * 100) + "%");

    const double dv = v_post - v_pre;
    const double expected_dv = -c.cfg->dgs.front().droop.m_q * d.magnitude / kNumDgs;
    const double v_err = rel_err(dv, expected_dv);
    c.check("voltage_response", v_err <= c.opt.droop_offset_tolerance, dv, expected_dv);

    const double p_pre = c.mean(c.p_total, t0 - sp.pre_window, t0);
    const double p_post = c.mean(c.p_total, t0 + sp.settle, t0 + sp.settle + sp.post_window);
    const auto ps = c.detection(detect_step(c.p_total, c.dt, c.step_params(t0, 0.0)), EventKind::QStep, "p_total");
    // A gradual change: the sharpest half-millisecond move stays tiny.
    const Index w = window_samples(0.5e-3, c.dt);
    double sharpest = 0.0;
    for (Index n = c.idx(t0 - 10e-3); n + w < c.idx(t0 + 50e-3); ++n)
        sharpest = std::max(sharpest, std::abs(c.p_total[n + w] - c.p_total[n]));
    const bool gradual = p_post < p_pre && sharpest < c.opt.quiet_step_fraction * std::abs(p_pre);
    c.check("p_gradual_change", gradual, p_post - p_pre, 0.0,
            "sharpest 0.5 ms move " + fmt(sharpest) + " W");
    (void)ps;
}

void check_slg(Context& c) {
    const auto& sc = c.cfg->scenario;
    const Index cycle = window_samples(1.0 / nominal_f(c), c.dt);
    const Index half = cycle / 2;
    const Eigen::VectorXd i0 = rms_envelope(zero_sequence_current(c.m), cycle);
    Eigen::VectorXd unb;
    try {
        unb = voltage_unbalance(c.m, cycle);
    } catch (const Error& e) {
        c.check("unbalance", false, 0.0, 0.0, e.what());
        return;
    }
    const Index s = c.idx(sc.slg_start), e = c.idx(sc.slg_end);
    const double i0_quiet = c.opt.i0_quiet_fraction * c.cfg.rated_current();

    // Outside the fault (beyond half an envelope window, away from the series edges).
    double i0_out = 0.0, unb_out = 0.0;
    auto scan = [&](Index a, Index b) {
        a = std::max<Index>(a, half);
        b = std::min<Index>(b, c.size - half);
        for (Index n = a; n < b; ++n) {
            i0_out = std::max(i0_out, i0[n]);
            unb_out = std::max(unb_out, unb[n]);
        }
    };
    scan(0, s - half);
    scan(e + half, c.size);
    c.check("i0_quiet_outside", i0_out < i0_quiet, i0_out, i0_quiet);
    c.check("unbalance_quiet_outside", unb_out < c.opt.unbalance_quiet, unb_out, c.opt.unbalance_quiet);

    // Inside the fault, fully covered by the envelope window.
    const Index in_a = s + half, in_b = e - half;
    if (in_b <= in_a) {
        c.check("slg_inside", false, 0.0, 0.0, "fault shorter than one cycle");
        return;
    }
    const double i0_in = i0.segment(in_a, in_b - in_a).minCoeff();
    const double unb_in = unb.segment(in_a, in_b - in_a).minCoeff();
    const bool inside = i0_in > i0_quiet && unb_in > c.opt.unbalance_threshold;
    c.check("slg_inside", inside, i0_in, i0_quiet, inside ? "" : "slg signature absent");

    ExcursionParams ep;
    ep.direction = Direction::Above;
    ep.absolute_threshold = i0_quiet;
    const auto d = c.detection(detect_window_excursion(i0, c.dt, ep), EventKind::Slg, "i0");
    ExcursionParams eu = ep;
    eu.absolute_threshold = c.opt.unbalance_threshold;
    const auto du = c.detection(detect_window_excursion(unb, c.dt, eu), EventKind::Slg, "unbalance");
    const Index lo = s - half - c.tol, hi = e + half + c.tol;
    const bool confined = d.window_start >= lo && d.window_end <= hi && du.window_start >= lo &&
                          du.window_end <= hi && d.window_start >= 0 && du.window_start >= 0;
    c.check("slg_confined", confined, 0.0, 0.0, confined ? "" : "excursion leaks outside the fault window");

    // Onset where the faulted phase's mean-square envelope crosses halfway
    // between its pre-fault and in-fault levels.
    const Eigen::VectorXd va = rms_envelope(c.m.channel(col::v(sc.slg_phase)), cycle);
    const double pre_ms = std::pow(va.segment(std::max<Index>(half, s - half - cycle), cycle).mean(), 2);
    const double in_ms = std::pow(va.segment(in_a, std::min<Index>(cycle, in_b - in_a)).mean(), 2);
    const double mid = 0.5 * (pre_ms + in_ms);
    Index onset = -1;
    for (Index n = std::max<Index>(0, s - half); n < in_b; ++n) {
        if ((va[n] * va[n] - mid) * (pre_ms - mid) <= 0.0) {
            onset = n;
            break;
        }
    }
    c.rep.physical_onset = onset >= 0 ? std::optional<SampleIndex>(onset) : std::nullopt;
    const double onset_err = onset < 0 ? std::nan("") : (onset - s) * c.dt;
    c.check("fault_onset", onset >= 0 && std::abs(onset_err) <= c.opt.timing_tolerance, onset_err, 0.0);

    c.rep.extracts.push_back({"i0", {}});
    c.rep.extracts.push_back({"unbalance", {}});
    for (Index n = 0; n < c.size; n += static_cast<Index>(c.opt.extract_stride)) {
        c.rep.extracts[c.rep.extracts.size() - 2].values.push_back(i0[n]);
        c.rep.extracts.back().values.push_back(unb[n]);
    }
}

double residual_variance(const Eigen::VectorXd& x, Index width, Index a, Index b) {
    const Eigen::VectorXd smooth = moving_average(x, width);
    const Eigen::ArrayXd r = (x - smooth).segment(a, b - a).array();
    return (r - r.mean()).square().mean();
}

void check_noise(Context& c) {
    const Index width = window_samples(c.opt.noise_smooth_window, c.dt);
    const Index a = width, b = c.size - width;
    // Clean reference: the nominal balanced waveform on the same grid.
    Eigen::VectorXd ref(c.size);
    const double amp = kSqrt2 * nominal_v(c);
    for (Index n = 0; n < c.size; ++n) ref[n] = amp * std::sin(2.0 * kPi * nominal_f(c) * n * c.dt);
    const double ref_var = residual_variance(ref, width, a, b);
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        const Eigen::VectorXd v = c.m.channel(col::v(k));
        const double var = residual_variance(v, width, a, b);
        worst = std::min(worst, ref_var > 0.0 ? var / ref_var : std::numeric_limits<double>::infinity());
    }
    const bool noisy = worst >= c.opt.noise_variance_ratio;
    c.check("noise_residual_ratio", noisy, worst, c.opt.noise_variance_ratio,
            noisy ? "" : "noise signature absent");
    EventDetection d;
    d.onset = 0;
    d.window_start = 0;
    d.window_end = c.size - 1;
    d.magnitude = worst;
    d.passed = noisy;
    c.detection(d, EventKind::Noise, "V1..V3 residual");
    if (noisy) c.rep.physical_onset = 0;
}

void check_delay(Context& c, const FeedbackTrace* trace) {
    const auto& sc = c.cfg->scenario;
    const double t0 = sc.delay_start;
    if (!trace) {
        c.check("feedback_shift", false, 0.0, 0.0, "feedback trace unavailable");
    } else {
        const SampleIndex expected_d = grid_index(sc.delay_tau, c.dt);
        const bool shift = trace->delay_samples == expected_d && trace->activation == c.idx(t0) &&
                           trace->f_meas.size() == c.size && feedback_is_pure_shift(*trace);
        c.check("feedback_shift", shift, static_cast<double>(trace->delay_samples),
                static_cast<double>(expected_d), shift ? "" : "delay signature absent");
        EventDetection d;
        d.onset = trace->activation;
        d.window_start = trace->activation;
        d.window_end = c.size - 1;
        d.magnitude = static_cast<double>(trace->delay_samples);
        d.passed = shift;
        c.detection(d, EventKind::Delay, "f_fb");
        if (shift) c.rep.physical_onset = trace->activation;
    }
    for (auto [name, x] : {std::pair{"v_pcc", &c.v_pcc}, std::pair{"i_pcc", &c.i_pcc}}) {
        const double base = c.mean(*x, t0 - c.opt.baseline_window, t0);
        const auto d = c.detection(detect_step(*x, c.dt, c.step_params(t0, c.opt.quiet_step_fraction * base)),
                              EventKind::Step, name);
        const double dev = c.max_rel_dev(*x, base, t0, (c.size - 1) * c.dt);
        const bool quiet = !d.passed && dev < c.opt.quiet_step_fraction;
        c.check(std::string("no_step_") + name, quiet, dev, c.opt.quiet_step_fraction);
    }
}

} // namespace

ValidationReport validate_scenario(const DatasetMatrix& m, int class_id, const ValidatedConfig& cfg,
                                   const ValidationOptions& options, const FeedbackTrace* trace) {
    ValidationReport rep;
    rep.class_id = class_id;
    rep.rows = m.rows();
    if (class_id < 0 || class_id >= kNumClasses) {
        rep.scenario = "unknown";
        rep.checks.push_back({"class", false, double(class_id), 0.0, "unknown scenario class"});
        return rep;
    }
    rep.scenario = scenario_name(class_id);
    const double dt = cfg->grid.dt;

    const auto diag = dataset_diagnostics(m, dt);
    const bool rows_ok = m.rows() == cfg.sample_count();
    rep.checks.push_back({"schema", diag.empty() && rows_ok, double(m.rows()), double(cfg.sample_count()),
                          diag.empty() ? (rows_ok ? "" : "row count differs from the grid") : diag.front()});
    if (!rows_ok || m.rows() < 16) return rep;

    Context c{m, cfg, options, rep, dt, static_cast<Index>(m.rows()),
              static_cast<Index>(std::llround(options.timing_tolerance / dt)),
              5.0 * cfg->lag_tau_e, {}, {}, {}, {}, {}};
    auto pq = totals(m);
    c.p_total = std::move(pq.p_total);
    c.q_total = std::move(pq.q_total);
    c.f_mean = f_mean(m);
    c.v_pcc = vpcc_proxy(m);
    c.i_pcc = ipcc_proxy(m);
    if (class_id == 9) {
        // Noise rides on the waveforms; the aggregate proxies are compared smoothed.
        const Index w = window_samples(options.noise_smooth_window, dt);
        c.v_pcc = moving_average(c.v_pcc, w);
        c.i_pcc = moving_average(c.i_pcc, w);
    }

    // Labels: a single one-way step to class_id.
    const auto label = m.channel(col::label);
    bool labels_ok = true;
    for (Index n = 0; n < c.size; ++n) {
        const double y = label[n];
        if (y != 0.0 && !rep.label_onset) rep.label_onset = n;
        const double want = rep.label_onset ? double(class_id) : 0.0;
        if (y != want) labels_ok = false;
    }
    const ScenarioSpec spec = builtin_scenario(class_id, cfg.config());
    rep.scheduled_onset = label_onset(spec, dt);
    c.check("label_values", labels_ok, 0.0, double(class_id),
            labels_ok ? "" : "label column is not a single step from 0 to " + std::to_string(class_id));
    const bool sched_ok = rep.label_onset == rep.scheduled_onset;
    c.check("label_schedule", sched_ok, rep.label_onset ? double(*rep.label_onset) : -1.0,
            rep.scheduled_onset ? double(*rep.scheduled_onset) : -1.0,
            sched_ok ? "" : "label onset differs from the scheduled event index");

    switch (class_id) {
    case 0: check_baseline(c); break;
    case 1: check_load_step(c); break;
    case 2: check_sag(c); break;
    case 3: check_load_ramp(c); break;
    case 4: check_freq_ramp(c); break;
    case 5: check_dg_trip(c); break;
    case 6: check_tie_trip(c); break;
    case 7: check_q_step(c); break;
    case 8: check_slg(c); break;
    case 9: check_noise(c); break;
    case 10: check_delay(c, trace); break;
    default: break;
    }

    if (rep.scheduled_onset) {
        const bool aligned = rep.label_onset && rep.physical_onset &&
                             std::abs(*rep.label_onset - *rep.physical_onset) <= c.tol;
        std::string detail;
        if (!aligned)
            detail = "label onset " + (rep.label_onset ? std::to_string(*rep.label_onset) : "none") +
                     " does not match physical onset " +
                     (rep.physical_onset ? std::to_string(*rep.physical_onset) : "none");
        const double err = rep.label_onset && rep.physical_onset
                               ? (*rep.physical_onset - *rep.label_onset) * dt
                               : std::nan("");
        c.check("label_physical_onset", aligned, err, 0.0, detail);
    }

    // Plot-ready decimated series.
    const Index stride = static_cast<Index>(std::max<std::size_t>(1, options.extract_stride));
    std::vector<SeriesExtract> common{{"p_total", {}}, {"q_total", {}}, {"f_mean", {}}, {"v_pcc", {}}, {"i_pcc", {}}};
    const Eigen::VectorXd* src[] = {&c.p_total, &c.q_total, &c.f_mean, &c.v_pcc, &c.i_pcc};
    for (Index n = 0; n < c.size; n += stride) {
        rep.extract_time.push_back(m(n, col::time));
        for (int k = 0; k < 5; ++k) common[k].values.push_back((*src[k])[n]);
    }
    common.insert(common.end(), rep.extracts.begin(), rep.extracts.end());
    rep.extracts = std::move(common);

    rep.passed = std::all_of(rep.checks.begin(), rep.checks.end(), [](const auto& ck) { return ck.passed; });
    rep.summary = {{"label_onset", rep.label_onset ? nlohmann::json(*rep.label_onset) : nlohmann::json()},
                   {"scheduled_onset", rep.scheduled_onset ? nlohmann::json(*rep.scheduled_onset) : nlohmann::json()},
                   {"physical_onset", rep.physical_onset ? nlohmann::json(*rep.physical_onset) : nlohmann::json()},
                   {"p_total_mean", c.p_total.mean()},
                   {"f_mean_min", c.f_mean.minCoeff()},
                   {"f_mean_max", c.f_mean.maxCoeff()},
                   {"v_pcc_min", c.v_pcc.minCoeff()},
                   {"v_pcc_max", c.v_pcc.maxCoeff()}};
    if (rep.label_onset && rep.physical_onset)
        rep.summary["onset_error_s"] = (*rep.physical_onset - *rep.label_onset) * dt;
    return rep;
}

nlohmann::json report_to_json(const ValidationReport& report, bool include_extracts) {
    nlohmann::json doc{{"class_id", report.class_id},
                       {"scenario", report.scenario},
                       {"rows", report.rows},
                       {"passed", report.passed},
                       {"summary", report.summary}};
    doc["detections"] = nlohmann::json::array();
    for (const auto& d : report.detections) doc["detections"].push_back(detection_to_json(d));
    doc["checks"] = nlohmann::json::array();
    for (const auto& c : report.checks) {
        nlohmann::json j{{"name", c.name}, {"passed", c.passed}};
        j["value"] = std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json();
        j["expected"] = std::isfinite(c.expected) ? nlohmann::json(c.expected) : nlohmann::json();
        if (!c.detail.empty()) j["detail"] = c.detail;
        doc["checks"].push_back(j);
    }
    if (include_extracts) {
        doc["extracts"] = {{"time", report.extract_time}};
        for (const auto& e : report.extracts) doc["extracts"][e.name] = e.values;
    }
    return doc;
}

void write_extracts_csv(const ValidationReport& report, const std::filesystem::path& path) {
    CsvWriter w(path);
    std::string line = "time";
    for (const auto& e : report.extracts) line += "," + e.name;
    w.write_line(line);
    for (std::size_t n = 0; n < report.extract_time.size(); ++n) {
        line.clear();
        append_number(line, report.extract_time[n]);
        for (const auto& e : report.extracts) {
            line += ',';
            append_number(line, n < e.values.size() ? e.values[n] : std::nan(""));
        }
        w.write_line(line);
    }
    w.close();
}

namespace {

void append_exact(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

} // namespace

void write_feedback_csv(const FeedbackTrace& trace, double dt, const std::filesystem::path& path) {
    CsvWriter w(path);
    w.write_line("# activation=" + std::to_string(trace.activation) +
                 " delay_samples=" + std::to_string(trace.delay_samples));
    w.write_line("time,f_meas,f_fb");
    std::string line;
    for (Index n = 0; n < trace.f_meas.size(); ++n) {
        line.clear();
        append_number(line, n * dt);
        line += ',';
        append_exact(line, trace.f_meas[n]);
        line += ',';
        append_exact(line, trace.f_fb[n]);
        w.write_line(line);
    }
    w.close();
}

FeedbackTrace read_feedback_csv(const std::filesystem::path& path) {
    FeedbackTrace trace;
    LineReader reader(path);
    std::string_view line;
    if (!reader.next(line) || line.rfind("# activation=", 0) != 0)
        throw Error(ErrorKind::SchemaMismatch, "feedback file lacks its header comment: " + path.string());
    {
        std::istringstream in{std::string(line.substr(2))};
        std::string tok;
        while (in >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const auto key = tok.substr(0, eq);
            const long long v = std::stoll(tok.substr(eq + 1));
            if (key == "activation") trace.activation = v;
            if (key == "delay_samples") trace.delay_samples = v;
        }
    }
    if (!reader.next(line) || line != "time,f_meas,f_fb")
        throw Error(ErrorKind::SchemaMismatch, "feedback file header mismatch: " + path.string());
    std::vector<double> meas, fb;
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == line.npos || c2 == line.npos)
            throw Error(ErrorKind::Parse, "feedback row " + std::to_string(meas.size()) + ": expected 3 fields");
        const auto a = parse_number(line.substr(c1 + 1, c2 - c1 - 1));
        const auto b = parse_number(line.substr(c2 + 1));
        if (!a || !b) throw Error(ErrorKind::Parse, "feedback row " + std::to_string(meas.size()) + ": bad number");
        meas.push_back(*a);
        fb.push_back(*b);
    }
    trace.f_meas = Eigen::Map<Eigen::VectorXd>(meas.data(), static_cast<Index>(meas.size()));
    trace.f_fb = Eigen::Map<Eigen::VectorXd>(fb.data(), static_cast<Index>(fb.size()));
    return trace;
}

bool feedback_is_pure_shift(const FeedbackTrace& trace) {
    const Index size = trace.f_meas.size();
    const Index d = trace.delay_samples;
    if (trace.f_fb.size() != size || trace.activation < 0 || trace.activation - d < 0) return false;
    for (Index n = trace.activation; n < size; ++n)
        if (std::memcmp(&trace.f_fb[n], &trace.f_meas[n - d], sizeof(double)) != 0) return false;
    return true;
}

} // namespace mgtwin
