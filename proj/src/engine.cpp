#include "mgtwin/engine.hpp"

#include <cmath>
#include <numeric>

#include "mgtwin/errors.hpp"

namespace mgtwin {

std::array<PowerTarget, kNumDgs> dispatch_targets(double load_p, double load_q,
                                                  const std::array<bool, kNumDgs>& online,
                                                  const MicrogridConfig& cfg, bool tie_closed) {
    std::array<PowerTarget, kNumDgs> out{};
    double sum_p_set = 0.0, sum_q_set = 0.0, inv_mp = 0.0, inv_mq = 0.0;
    int n_online = 0;
    for (int k = 0; k < kNumDgs; ++k) {
        if (!online[k]) continue;
        const auto& dg = cfg.dgs[k];
        sum_p_set += dg.p_set;
        sum_q_set += dg.q_set;
        inv_mp += 1.0 / dg.droop.m_p;
        inv_mq += 1.0 / dg.droop.m_q;
        ++n_online;
    }
    if (n_online == 0) {
        if (tie_closed) return out;
        throw Error(ErrorKind::NoSource, "no DG online and tie line open");
    }

    // Common frequency (voltage) deviation that balances the load.
    const double dp = (load_p - sum_p_set) / inv_mp;
    const double dq = (load_q - sum_q_set) / inv_mq;
    for (int k = 0; k < kNumDgs; ++k) {
        if (!online[k]) continue;
        const auto& dg = cfg.dgs[k];
        out[k].p = dg.p_set + dp / dg.droop.m_p;
        out[k].q = dg.q_set + dq / dg.droop.m_q;
    }
    return out;
}

Engine::Engine(const ValidatedConfig& cfg, const ScenarioSpec& spec)
    : cfg_(cfg.config()),
      spec_(spec),
      total_(cfg.sample_count()),
      dt_(cfg->grid.dt),
      delay_line_(spec.delay ? grid_index(spec.delay->tau, cfg->grid.dt) : 0) {
    check_scenario(spec_, dt_);
    label_onset_ = label_onset(spec_, dt_);

    for (const auto& a : spec_.schedule) {
        if (std::holds_alternative<action::DGTrip>(a.kind) ||
            std::holds_alternative<action::TieOpen>(a.kind))
            breakers_.push_back({grid_index(a.t_e, dt_), a.kind});
    }
    if (spec_.delay) {
        delay_samples_ = grid_index(spec_.delay->tau, dt_);
        delay_start_ = grid_index(spec_.delay->start, dt_);
    }
    settle_samples_ = static_cast<SampleIndex>(std::ceil(5.0 * cfg_.lag_tau_e / dt_));
    if (spec_.noise) noise_rng_.emplace(spec_.noise->seed);

    // Start at the droop equilibrium of the base load.
    auto& st = state_;
    st.tie_closed = cfg_.network.grid_connected_initial;
    const double v0 = cfg_.dgs.front().droop.v0;
    st.v_droop = v0;
    st.pcc.v_rms.setConstant(v0);
    std::array<bool, kNumDgs> online;
    online.fill(true);
    std::array<PowerTarget, kNumDgs> targets{};
    for (int iter = 0; iter < 100; ++iter) {
        const double factor = load_factor();
        double p = cfg_.network.load_p * factor;
        double q = cfg_.network.load_q * factor;
        if (st.tie_closed) {
            p -= cfg_.network.grid_import_p;
            q -= cfg_.network.grid_import_p * std::tan(cfg_.network.power_factor_angle);
        }
        targets = dispatch_targets(p, q, online, cfg_, st.tie_closed);
        double v = 0.0;
        for (int k = 0; k < kNumDgs; ++k)
            v += droop_voltage(targets[k].q, cfg_.dgs[k].droop, cfg_.dgs[k].q_set);
        v /= kNumDgs;
        const bool converged = v == st.v_droop;
        st.v_droop = v;
        st.pcc.v_rms.setConstant(v);
        if (converged) break;
    }
    for (int k = 0; k < kNumDgs; ++k) {
        auto& dg = st.dgs[k];
        dg.p_elec = dg.p_filt = targets[k].p;
        dg.q_elec = dg.q_filt = targets[k].q;
        // Restoration holds the reference where the unit already sits.
        dg.p_ref = st.tie_closed ? dg.p_filt : cfg_.dgs[k].p_set;
        dg.online = true;
    }
    st.f_ref = cfg_.dgs.front().droop.f0;
}

double Engine::load_factor() const {
    const double v0 = cfg_.dgs.front().droop.v0;
    const double e = cfg_.network.load_voltage_exponent;
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) sum += std::pow(state_.pcc.v_rms[k] / v0, e);
    return sum / 3.0;
}

void Engine::apply_breakers(SampleIndex n) {
    while (next_breaker_ < breakers_.size() && breakers_[next_breaker_].index == n) {
        const auto& kind = breakers_[next_breaker_].kind;
        if (const auto* trip = std::get_if<action::DGTrip>(&kind)) {
            auto& dg = state_.dgs[trip->id - 1];
            if (dg.online) {
                dg.online = false;
                dg.trip_index = n;
            }
        } else {
            state_.tie_closed = false;
        }
        ++next_breaker_;
    }
}

void Engine::measure(SampleIndex n, const ProfileValue& profile) {
    auto& st = state_;
    const auto& net = cfg_.network;
    const double offset = profile.freq_offset;
    st.f_ref = cfg_.dgs.front().droop.f0 + offset;

    double f_sum = 0.0, v_sum = 0.0;
    int n_online = 0;
    for (int k = 0; k < kNumDgs; ++k) {
        auto& dg = st.dgs[k];
        if (!dg.online) continue;
        const auto& droop = cfg_.dgs[k].droop;
        dg.freq = droop_frequency(dg.p_filt, droop, dg.p_ref, offset);
        f_sum += dg.freq;
        v_sum += droop_voltage(dg.q_filt, droop, cfg_.dgs[k].q_set);
        ++n_online;
    }
    st.f_meas = n_online > 0 ? f_sum / n_online : st.f_ref;
    st.v_droop = n_online > 0 ? v_sum / n_online : cfg_.dgs.front().droop.v0;

    delay_line_.push(st.f_meas);
    st.delay_active = spec_.delay && n >= delay_start_;
    st.f_fb = st.delay_active ? delayed_feedback(delay_line_, n, spec_.delay->tau, dt_) : st.f_meas;

    const double s = st.tie_closed ? net.grid_stiffness : 0.0;
    st.f_sys = (1.0 - s) * st.f_fb + s * st.f_ref;
    for (auto& dg : st.dgs)
        if (!dg.online) dg.freq = st.f_sys;

    auto& pcc = st.pcc;
    pcc.v_rms = st.v_droop * profile.sag_gains;

    const double factor = load_factor();
    load_p_ = (net.load_p + profile.load_p) * factor;
    load_q_ = (net.load_q + profile.load_q) * factor;
    if (st.tie_closed) {
        double p_dg = 0.0, q_dg = 0.0;
        for (const auto& dg : st.dgs) {
            p_dg += dg.p_elec;
            q_dg += dg.q_elec;
        }
        st.grid_p = load_p_ - p_dg;
        st.grid_q = load_q_ - q_dg;
    } else {
        st.grid_p = st.grid_q = 0.0;
    }

    const double s_phase = std::hypot(st.grid_p, st.grid_q) / 3.0;
    const double v_floor = 1e-6 * cfg_.dgs.front().droop.v0;
    for (int k = 0; k < 3; ++k) pcc.i_rms[k] = s_phase / std::max(pcc.v_rms[k], v_floor);
    pcc.current_angle = s_phase > 0.0 ? std::atan2(st.grid_q, st.grid_p) : 0.0;

    pcc.v_inst = synthesize_three_phase(pcc.v_rms, pcc.theta);
    pcc.i_inst = synthesize_three_phase(pcc.i_rms, pcc.theta, pcc.current_angle);
    if ((profile.fault_current.array() != 0.0).any())
        pcc.i_inst += synthesize_three_phase(profile.fault_current, pcc.theta, kPi / 2.0);

    auto& row = row_;
    row[col::time] = static_cast<double>(n) * dt_;
    for (int k = 0; k < 3; ++k) {
        row[col::v(k)] = pcc.v_inst[k];
        row[col::i(k)] = pcc.i_inst[k];
    }
    if (noise_rng_) {
        const double t = row[col::time];
        for (int k = 0; k < 3; ++k)
            row[col::v(k)] = apply_noise(row[col::v(k)], ChannelGroup::Voltage, *spec_.noise, t, *noise_rng_);
        for (int k = 0; k < 3; ++k)
            row[col::i(k)] = apply_noise(row[col::i(k)], ChannelGroup::Current, *spec_.noise, t, *noise_rng_);
    }
    for (int k = 0; k < kNumDgs; ++k) {
        row[col::p(k)] = st.dgs[k].p_elec;
        row[col::q(k)] = st.dgs[k].q_elec;
        row[col::f(k)] = st.dgs[k].freq;
    }
    row[col::label] = label_onset_ && n >= *label_onset_ ? spec_.class_id : 0;
}

void Engine::advance(SampleIndex n, const ProfileValue& profile) {
    auto& st = state_;
    const auto& net = cfg_.network;

    double served_p = load_p_, served_q = load_q_;
    if (st.tie_closed) {
        served_p -= net.grid_import_p;
        served_q -= net.grid_import_p * std::tan(net.power_factor_angle);
    }
    std::array<bool, kNumDgs> online;
    for (int k = 0; k < kNumDgs; ++k) online[k] = st.dgs[k].online;

    std::array<PowerTarget, kNumDgs> targets;
    try {
        targets = dispatch_targets(served_p, served_q, online, cfg_, st.tie_closed);
    } catch (const Error& e) {
        throw EngineError(e.kind(), n, e.what());
    }

    const double s = st.tie_closed ? net.grid_stiffness : 0.0;
    for (int k = 0; k < kNumDgs; ++k) {
        auto& dg = st.dgs[k];
        const auto& droop = cfg_.dgs[k].droop;
        const double p_prev = dg.p_elec;
        const double q_prev = dg.q_elec;
        dg.p_elec = low_pass_step(dg.p_elec, targets[k].p, cfg_.lag_tau_e, dt_);
        dg.q_elec = low_pass_step(dg.q_elec, targets[k].q, cfg_.lag_tau_e, dt_);
        if (!dg.online && n + 1 - dg.trip_index >= settle_samples_) dg.p_elec = dg.q_elec = 0.0;
        dg.p_filt = low_pass_step(dg.p_filt, p_prev, cfg_.filter_tau_p, dt_);
        dg.q_filt = low_pass_step(dg.q_filt, q_prev, cfg_.filter_tau_p, dt_);
        if (dg.online && s > 0.0) {
            const double error = (droop.f0 + profile.freq_offset) - st.f_fb;
            dg.p_ref += (dt_ / cfg_.restore_tau) * s * error / droop.m_p;
        }
    }

    st.pcc.theta += 2.0 * kPi * st.f_sys * dt_;
    st.n = n + 1;
    st.t = static_cast<double>(st.n) * dt_;
}

const Row& Engine::step() {
    const SampleIndex n = state_.n;
    apply_breakers(n);
    const ProfileValue profile = profile_value(spec_.schedule, state_.t);
    measure(n, profile);
    measured_ = state_;
    advance(n, profile);
    return row_;
}

void run_scenario(const ValidatedConfig& cfg, const ScenarioSpec& spec, const RowSink& sink,
                  const StateObserver& observer) {
    Engine engine(cfg, spec);
    while (!engine.done()) {
        const SampleIndex n = engine.state().n;
        const Row& row = engine.step();
        if (sink) sink(n, row);
        if (observer) observer(engine);
    }
}

DatasetMatrix run_scenario(const ValidatedConfig& cfg, const ScenarioSpec& spec) {
    DatasetMatrix m(cfg.sample_count());
    run_scenario(cfg, spec, [&](SampleIndex n, const Row& row) { m.set_row(n, row); });
    return m;
}

FeedbackTrace record_feedback(const ValidatedConfig& cfg, const ScenarioSpec& spec,
                              const RowSink& sink) {
    FeedbackTrace trace;
    const SampleIndex total = cfg.sample_count();
    trace.f_meas.resize(total);
    trace.f_fb.resize(total);
    if (spec.delay) {
        trace.activation = grid_index(spec.delay->start, cfg->grid.dt);
        trace.delay_samples = grid_index(spec.delay->tau, cfg->grid.dt);
    }
    run_scenario(cfg, spec, sink, [&](const Engine& e) {
        const auto& m = e.measured();
        trace.f_meas[m.n] = m.f_meas;
        trace.f_fb[m.n] = m.f_fb;
    });
    return trace;
}

} // namespace mgtwin
