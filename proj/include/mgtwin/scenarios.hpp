#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mgtwin/model.hpp"

namespace mgtwin {

inline constexpr int kNumClasses = 11;

namespace action {

struct LoadStep { double dp = 0.0; double dq = 0.0; };
struct LoadRampStart { double rate_p = 0.0; };  // W/s
struct LoadRampEnd {};
struct FreqRampStart { double rate = 0.0; };    // Hz/s
struct FreqRampEnd {};
/// Balanced or partial sag: retained voltage `depth` on the flagged phases.
struct Sag { double depth = 1.0; std::array<bool, 3> phases{true, true, true}; };
struct SagClear {};
struct DGTrip { int id = 1; };
struct TieOpen {};
struct QStep { double dq = 0.0; };
struct SLG { int phase = 0; double depth = 1.0; double fault_current = 0.0; };
struct SLGClear {};

} // namespace action

using ActionKind = std::variant<action::LoadStep, action::LoadRampStart, action::LoadRampEnd,
                                action::FreqRampStart, action::FreqRampEnd, action::Sag,
                                action::SagClear, action::DGTrip, action::TieOpen,
                                action::QStep, action::SLG, action::SLGClear>;

struct TimedAction {
    double t_e = 0.0;
    ActionKind kind;
};

std::string action_name(const ActionKind& kind);

struct NoiseSpec {
    double sigma_v = 0.0;
    double sigma_i = 0.0;
    std::uint64_t seed = 0;
    std::optional<std::pair<double, double>> window;  // [start, end) seconds
};

struct DelaySpec {
    double tau = 0.0;
    double start = 0.0;
};

struct ScenarioSpec {
    int class_id = 0;
    std::string name;
    std::vector<TimedAction> schedule;
    std::optional<NoiseSpec> noise;
    std::optional<DelaySpec> delay;
};

/// Catalog entry for class 0..10. Throws UnknownClass otherwise.
ScenarioSpec builtin_scenario(int class_id, const MicrogridConfig& cfg);

/// Short machine name used in file names.
std::string scenario_name(int class_id);

/// Throws NonIntegralGrid / Config on off-grid times or unsorted schedules.
void check_scenario(const ScenarioSpec& spec, double dt);

/// First sample carrying the class label, or nullopt for class 0.
std::optional<SampleIndex> label_onset(const ScenarioSpec& spec, double dt);

int label_at(const ScenarioSpec& spec, SampleIndex n, double dt);

/// Additive signal modifiers at time t.
struct ProfileValue {
    double load_p = 0.0;       // W added to the base load
    double load_q = 0.0;       // var added to the base load
    double freq_offset = 0.0;  // Hz added to the droop reference
    Eigen::Vector3d sag_gains = Eigen::Vector3d::Ones();
    Eigen::Vector3d fault_current = Eigen::Vector3d::Zero();  // A rms per phase
};

ProfileValue profile_value(const std::vector<TimedAction>& schedule, double t);

/// Standard normal draws via Box-Muller over mt19937_64.
/// Both pieces are fully specified, so a seed reproduces the same stream anywhere.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

    double next();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

enum class ChannelGroup { Voltage, Current };

bool noise_active(const NoiseSpec& spec, double t);

/// x + sigma*z for the group when t lies inside the noise window; x otherwise.
/// Draws are consumed only inside the window.
double apply_noise(double x, ChannelGroup group, const NoiseSpec& spec, double t,
                   GaussianSource& rng);

/// History of measured frequency, indexed by absolute sample number.
class FrequencyDelayLine {
public:
    explicit FrequencyDelayLine(SampleIndex max_delay);

    void push(double f);  // value for the next sample index
    SampleIndex size() const noexcept { return count_; }
    SampleIndex capacity() const noexcept { return static_cast<SampleIndex>(ring_.size()); }

    // Value recorded at sample n; n must still be buffered.
    double at(SampleIndex n) const;
    SampleIndex oldest() const noexcept;

private:
    std::vector<double> ring_;
    SampleIndex count_ = 0;
};

/// f_meas[n - D] with D = tau/dt; the oldest buffered value while fewer
/// than D samples of history exist. With `active` false returns f_meas[n].
double delayed_feedback(const FrequencyDelayLine& buffer, SampleIndex n, double tau, double dt,
                        bool active = true);

nlohmann::json scenario_to_json(const ScenarioSpec& spec, double dt);
nlohmann::json catalog_json(const MicrogridConfig& cfg);

} // namespace mgtwin
