#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>

#include <Eigen/Core>

#include "mgtwin/dataset.hpp"
#include "mgtwin/errors.hpp"
#include "mgtwin/model.hpp"
#include "mgtwin/scenarios.hpp"
#include "mgtwin/schema.hpp"

namespace mgtwin {

/// One Euler step of a first-order lag. Throws StepTooLarge when dt > tau.
template <typename Scalar>
Scalar low_pass_step(Scalar y_prev, Scalar u, Scalar tau, Scalar dt) {
    if (!(tau > Scalar(0)) || !(dt > Scalar(0)) || dt > tau)
        throw Error(ErrorKind::StepTooLarge, "low-pass step requires 0 < dt <= tau");
    return y_prev + (dt / tau) * (u - y_prev);
}

inline double freq_from_omega(double omega) { return omega / (2.0 * kPi); }

inline const Eigen::Vector3d& phase_offsets() {
    static const Eigen::Vector3d offsets(0.0, -2.0 * kPi / 3.0, 2.0 * kPi / 3.0);
    return offsets;
}

/// sqrt(2) * rms[i] * sin(theta + phi_i), phi = {0, -2pi/3, +2pi/3}.
template <typename Derived>
Eigen::Vector3d synthesize_three_phase(const Eigen::MatrixBase<Derived>& rms, double theta,
                                       double shift = 0.0) {
    Eigen::Vector3d out;
    for (int k = 0; k < 3; ++k)
        out[k] = kSqrt2 * rms[k] * std::sin(theta + phase_offsets()[k] - shift);
    return out;
}

struct PowerTarget {
    double p = 0.0;
    double q = 0.0;
};

/// Steady-state droop sharing of (load_p, load_q) among the online units:
/// all online units settle at a common frequency (and common voltage).
/// Offline units get zero. Throws NoSource when nothing can supply the load.
std::array<PowerTarget, kNumDgs> dispatch_targets(double load_p, double load_q,
                                                  const std::array<bool, kNumDgs>& online,
                                                  const MicrogridConfig& cfg,
                                                  bool tie_closed = false);

struct DGState {
    double p_elec = 0.0;
    double p_filt = 0.0;
    double q_elec = 0.0;
    double q_filt = 0.0;
    double p_ref = 0.0;  // active setpoint, moved by restoration while tied
    double freq = 0.0;
    bool online = true;
    SampleIndex trip_index = -1;
};

struct PccState {
    double theta = 0.0;
    Eigen::Vector3d v_rms = Eigen::Vector3d::Zero();
    Eigen::Vector3d i_rms = Eigen::Vector3d::Zero();
    Eigen::Vector3d v_inst = Eigen::Vector3d::Zero();
    Eigen::Vector3d i_inst = Eigen::Vector3d::Zero();
    double current_angle = 0.0;
};

struct EngineState {
    SampleIndex n = 0;
    double t = 0.0;
    std::array<DGState, kNumDgs> dgs{};
    PccState pcc;
    bool tie_closed = true;
    double f_ref = 0.0;    // droop reference incl. the frequency-ramp offset
    double f_meas = 0.0;   // mean online DG frequency at n
    double f_fb = 0.0;     // feedback seen by the restoration/angle path
    double f_sys = 0.0;    // frequency advancing theta from n to n+1
    double v_droop = 0.0;
    double grid_p = 0.0;   // tie-line exchange
    double grid_q = 0.0;
    bool delay_active = false;
};

/// Reduced-order fixed-step microgrid: droop dynamics plus three-phase
/// synthesis at the PCC. Strictly sequential; separate instances are
/// independent.
class Engine {
public:
    Engine(const ValidatedConfig& cfg, const ScenarioSpec& spec);

    /// Applies the actions scheduled at the current sample, emits its row,
    /// and advances the state to the next sample.
    const Row& step();

    /// Dynamic state after the last step; its index points at the next sample.
    const EngineState& state() const noexcept { return state_; }
    /// Snapshot taken when the last row was emitted, before the dynamics advanced.
    const EngineState& measured() const noexcept { return measured_; }
    const FrequencyDelayLine& delay_line() const noexcept { return delay_line_; }
    SampleIndex sample_count() const noexcept { return total_; }
    bool done() const noexcept { return state_.n >= total_; }

private:
    struct PendingAction {
        SampleIndex index;
        ActionKind kind;
    };

    void apply_breakers(SampleIndex n);
    void measure(SampleIndex n, const ProfileValue& profile);
    void advance(SampleIndex n, const ProfileValue& profile);
    double load_factor() const;

    MicrogridConfig cfg_;
    ScenarioSpec spec_;
    SampleIndex total_;
    double dt_;
    std::optional<SampleIndex> label_onset_;
    std::vector<PendingAction> breakers_;
    std::size_t next_breaker_ = 0;
    SampleIndex delay_start_ = 0;
    SampleIndex delay_samples_ = 0;
    SampleIndex settle_samples_ = 0;
    EngineState state_;
    EngineState measured_;
    double load_p_ = 0.0;
    double load_q_ = 0.0;
    FrequencyDelayLine delay_line_;
    std::optional<GaussianSource> noise_rng_;
    Row row_{};
};

/// Per-sample hooks for streaming consumers and property checks.
using RowSink = std::function<void(SampleIndex, const Row&)>;
using StateObserver = std::function<void(const Engine&)>;

/// Streams all N rows to `sink`; `observer` sees the engine after every step.
void run_scenario(const ValidatedConfig& cfg, const ScenarioSpec& spec, const RowSink& sink,
                  const StateObserver& observer = {});

DatasetMatrix run_scenario(const ValidatedConfig& cfg, const ScenarioSpec& spec);

/// Measured and delayed frequency streams (class 10 evidence).
struct FeedbackTrace {
    Eigen::VectorXd f_meas;
    Eigen::VectorXd f_fb;
    SampleIndex activation = 0;
    SampleIndex delay_samples = 0;
};

/// Runs the scenario, streaming rows to `sink`, and returns the feedback streams.
FeedbackTrace record_feedback(const ValidatedConfig& cfg, const ScenarioSpec& spec,
                              const RowSink& sink = {});

} // namespace mgtwin
