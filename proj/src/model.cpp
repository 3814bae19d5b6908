#include "mgtwin/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include "mgtwin/errors.hpp"

namespace mgtwin {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::NonIntegralGrid: return "NonIntegralGrid";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::NoSource: return "NoSource";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::AllInvalid: return "AllInvalid";
    case ErrorKind::DegenerateWindow: return "DegenerateWindow";
    case ErrorKind::Io: return "IoError";
    }
    return "Error";
}

namespace {

std::string join(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        if (!out.empty()) out += "; ";
        out += l;
    }
    return out;
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : Error(ErrorKind::Config, "invalid config: " + join(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

MicrogridConfig MicrogridConfig::defaults() {
    MicrogridConfig cfg;
    cfg.dgs.resize(kNumDgs);
    for (int k = 0; k < kNumDgs; ++k) cfg.dgs[k].id = k + 1;
    return cfg;
}

namespace {

// Ratio T/dt as an integer, or nullopt when off by more than 1e-9 relative.
std::optional<SampleIndex> integral_ratio(double num, double dt) {
    const double ratio = num / dt;
    const double rounded = std::round(ratio);
    if (!std::isfinite(ratio)) return std::nullopt;
    const double scale = std::max(1.0, std::abs(ratio));
    if (std::abs(ratio - rounded) > 1e-9 * scale) return std::nullopt;
    return static_cast<SampleIndex>(rounded);
}

} // namespace

SampleIndex sample_count(double duration, double dt) {
    if (!(duration > 0.0) || !(dt > 0.0))
        throw Error(ErrorKind::NonIntegralGrid, "duration and dt must be positive");
    const auto steps = integral_ratio(duration, dt);
    if (!steps)
        throw Error(ErrorKind::NonIntegralGrid, "T/dt is not an integer");
    return *steps + 1;
}

SampleIndex grid_index(double t, double dt) {
    if (t == 0.0) return 0;
    const auto n = integral_ratio(t, dt);
    if (!n || *n < 0) {
        std::ostringstream msg;
        msg << "time " << t << " s is not on the " << dt << " s grid";
        throw Error(ErrorKind::NonIntegralGrid, msg.str());
    }
    return *n;
}

double droop_frequency(double p_filt, const DGConfig& dg) {
    return dg.droop.f0 - dg.droop.m_p * (p_filt - dg.p_set);
}

double droop_voltage(double q_filt, const DGConfig& dg) {
    return dg.droop.v0 - dg.droop.m_q * (q_filt - dg.q_set);
}

std::vector<std::string> config_diagnostics(const MicrogridConfig& cfg) {
    std::vector<std::string> out;
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) out.push_back(msg);
    };

    need(cfg.grid.dt > 0.0, "grid.dt must be positive");
    need(cfg.grid.duration > 0.0, "grid.duration must be positive");
    if (cfg.grid.dt > 0.0 && cfg.grid.duration > 0.0) {
        try {
            sample_count(cfg.grid.duration, cfg.grid.dt);
        } catch (const Error&) {
            out.push_back("grid.duration / grid.dt must be an integer");
        }
    }

    if (cfg.dgs.size() != kNumDgs)
        out.push_back("expected 10 DGs, got " + std::to_string(cfg.dgs.size()));

    std::set<int> ids;
    for (std::size_t k = 0; k < cfg.dgs.size(); ++k) {
        const auto& dg = cfg.dgs[k];
        const std::string tag = "dgs[" + std::to_string(k) + "]";
        ids.insert(dg.id);
        need(dg.droop.m_p > 0.0, tag + ": m_p must be positive");
        need(dg.droop.m_q > 0.0, tag + ": m_q must be positive");
        need(dg.droop.f0 > 0.0, tag + ": f0 must be positive");
        need(dg.droop.v0 > 0.0, tag + ": V0 must be positive");
        need(dg.p_set >= 0.0, tag + ": p_set must be >= 0");
        need(dg.p_set <= dg.p_max, tag + ": p_set must be <= p_max");
    }
    if (cfg.dgs.size() == kNumDgs) {
        bool contiguous = ids.size() == kNumDgs && *ids.begin() == 1 && *ids.rbegin() == kNumDgs;
        need(contiguous, "DG ids must be unique and contiguous 1..10");
    }

    const auto& net = cfg.network;
    need(net.grid_stiffness >= 0.0 && net.grid_stiffness <= 1.0,
         "network.grid_stiffness must lie in [0, 1]");
    need(net.load_p >= 0.0, "network.load_p must be >= 0");
    need(std::isfinite(net.power_factor_angle), "network.power_factor_angle must be finite");

    need(cfg.filter_tau_p > 0.0, "filter_tau_p must be positive");
    need(cfg.lag_tau_e > 0.0, "lag_tau_e must be positive");
    need(cfg.restore_tau > 0.0, "restore_tau must be positive");
    if (cfg.grid.dt > 0.0) {
        need(cfg.grid.dt <= cfg.filter_tau_p, "filter_tau_p must be >= dt");
        need(cfg.grid.dt <= cfg.lag_tau_e, "lag_tau_e must be >= dt");
        need(cfg.grid.dt <= cfg.restore_tau, "restore_tau must be >= dt");
    }

    const auto& sc = cfg.scenario;
    need(sc.trip_ids.size() == sc.trip_times.size(),
         "scenario.trip_ids and scenario.trip_times must have equal length");
    for (int id : sc.trip_ids)
        need(id >= 1 && id <= kNumDgs, "scenario.trip_ids entries must lie in 1..10");
    need(sc.slg_phase >= 0 && sc.slg_phase <= 2, "scenario.slg_phase must be 0, 1 or 2");
    need(sc.noise_fraction >= 0.0, "scenario.noise_fraction must be >= 0");
    need(sc.delay_tau >= 0.0, "scenario.delay_tau must be >= 0");
    return out;
}

ValidatedConfig validate_config(const MicrogridConfig& cfg) {
    auto diagnostics = config_diagnostics(cfg);
    if (!diagnostics.empty()) throw ConfigError(std::move(diagnostics));
    return ValidatedConfig(cfg, sample_count(cfg.grid.duration, cfg.grid.dt));
}

double ValidatedConfig::rated_power() const noexcept {
    double sum = 0.0;
    for (const auto& dg : cfg_.dgs) sum += dg.p_max;
    return sum;
}

double ValidatedConfig::rated_current() const noexcept {
    return rated_power() / (3.0 * cfg_.dgs.front().droop.v0);
}

} // namespace mgtwin
