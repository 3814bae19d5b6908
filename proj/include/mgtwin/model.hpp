#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mgtwin {

inline constexpr int kNumDgs = 10;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;

using SampleIndex = std::int64_t;

/// Fixed simulation/export grid. N counts both endpoints.
struct SampleGrid {
    double dt = 2e-6;
    double duration = 1.0;
};

struct DroopParams {
    double f0 = 60.0;    // Hz
    double v0 = 230.0;   // V rms, phase
    double m_p = 1e-5;   // Hz/W
    double m_q = 1e-3;   // V/var
};

struct DGConfig {
    int id = 1;
    DroopParams droop;
    double p_set = 10e3;  // W
    double q_set = 3e3;   // var
    double p_max = 20e3;  // W
};

struct NetworkConfig {
    bool grid_connected_initial = true;
    double grid_stiffness = 0.98;
    double load_p = 120e3;          // W at nominal voltage
    double load_q = 30e3;           // var at nominal voltage
    double power_factor_angle = 0.0;  // rad, of the tie-line import
    double grid_import_p = 20e3;    // W drawn through the tie while connected
    double load_voltage_exponent = 2.0;
};

/// Magnitudes of the built-in disturbance catalog.
struct ScenarioParams {
    double load_step_p = 16.6e3;
    double load_step_time = 0.70;
    double sag_depth = 0.5;
    double sag_start = 0.50;
    double sag_end = 0.60;
    double load_ramp_total = 15e3;
    double load_ramp_start = 0.50;
    double load_ramp_end = 0.70;
    double freq_ramp_total = 0.3;
    double freq_ramp_start = 0.50;
    double freq_ramp_end = 0.70;
    std::vector<int> trip_ids{1, 5, 10};
    std::vector<double> trip_times{0.50, 0.60, 0.70};
    double tie_open_time = 0.50;
    double q_step = 10e3;
    double q_step_time = 0.50;
    int slg_phase = 0;
    double slg_depth = 0.3;
    double slg_fault_current = 100.0;  // A rms
    double slg_start = 0.50;
    double slg_end = 0.60;
    double noise_fraction = 0.02;      // sigma as a fraction of nominal peak
    std::uint64_t noise_seed = 20240501;
    bool noise_windowed = false;
    double noise_start = 0.0;
    double noise_end = 1.0;
    double delay_tau = 20e-3;
    double delay_start = 0.50;
};

struct MicrogridConfig {
    SampleGrid grid;
    std::vector<DGConfig> dgs;
    NetworkConfig network;
    double filter_tau_p = 16e-3;
    double lag_tau_e = 30e-3;
    double restore_tau = 20e-3;
    ScenarioParams scenario;

    /// Ten identical units with the default droop settings.
    static MicrogridConfig defaults();
};

/// A config whose invariants have been checked, with N frozen.
class ValidatedConfig {
public:
    const MicrogridConfig& config() const noexcept { return cfg_; }
    const MicrogridConfig* operator->() const noexcept { return &cfg_; }
    SampleIndex sample_count() const noexcept { return n_; }

    // Aggregate DG rating in W.
    double rated_power() const noexcept;
    // Rated per-phase rms current at nominal voltage.
    double rated_current() const noexcept;

private:
    friend ValidatedConfig validate_config(const MicrogridConfig& cfg);
    ValidatedConfig(MicrogridConfig cfg, SampleIndex n) : cfg_(std::move(cfg)), n_(n) {}

    MicrogridConfig cfg_;
    SampleIndex n_;
};

/// Number of samples on [0, T] with stride dt, both ends included.
/// Throws NonIntegralGrid if T/dt is not an integer to 1e-9 relative.
SampleIndex sample_count(double duration, double dt);

/// Index of time t on the grid; throws NonIntegralGrid when t is off-grid.
SampleIndex grid_index(double t, double dt);

double droop_frequency(double p_filt, const DGConfig& dg);
double droop_voltage(double q_filt, const DGConfig& dg);

// Droop about an active setpoint and a shifted frequency reference.
// With p_ref == P* and offset == 0 this equals droop_frequency bitwise.
inline double droop_frequency(double p_filt, const DroopParams& droop, double p_ref,
                              double f_offset) {
    return (droop.f0 + f_offset) - droop.m_p * (p_filt - p_ref);
}

inline double droop_voltage(double q_filt, const DroopParams& droop, double q_ref) {
    return droop.v0 - droop.m_q * (q_filt - q_ref);
}

/// One message per violated invariant; empty when valid.
std::vector<std::string> config_diagnostics(const MicrogridConfig& cfg);

/// Throws ConfigError carrying all diagnostics.
ValidatedConfig validate_config(const MicrogridConfig& cfg);

} // namespace mgtwin
