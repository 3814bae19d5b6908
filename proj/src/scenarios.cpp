#include "mgtwin/scenarios.hpp"

#include <algorithm>
#include <cmath>

#include "mgtwin/errors.hpp"

namespace mgtwin {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const std::array<const char*, kNumClasses> kNames = {
    "normal",   "load_step", "voltage_sag", "load_ramp", "freq_ramp",  "dg_trip",
    "tie_trip", "q_step",    "slg_fault",   "noise",     "comm_delay",
};

void sort_schedule(std::vector<TimedAction>& schedule) {
    std::stable_sort(schedule.begin(), schedule.end(),
                     [](const TimedAction& a, const TimedAction& b) { return a.t_e < b.t_e; });
}

} // namespace

std::string scenario_name(int class_id) {
    if (class_id < 0 || class_id >= kNumClasses)
        throw Error(ErrorKind::UnknownClass, "unknown scenario class " + std::to_string(class_id));
    return kNames[class_id];
}

std::string action_name(const ActionKind& kind) {
    return std::visit(overloaded{
                          [](const action::LoadStep&) { return "LoadStep"; },
                          [](const action::LoadRampStart&) { return "LoadRampStart"; },
                          [](const action::LoadRampEnd&) { return "LoadRampEnd"; },
                          [](const action::FreqRampStart&) { return "FreqRampStart"; },
                          [](const action::FreqRampEnd&) { return "FreqRampEnd"; },
                          [](const action::Sag&) { return "Sag"; },
                          [](const action::SagClear&) { return "SagClear"; },
                          [](const action::DGTrip&) { return "DGTrip"; },
                          [](const action::TieOpen&) { return "TieOpen"; },
                          [](const action::QStep&) { return "QStep"; },
                          [](const action::SLG&) { return "SLG"; },
                          [](const action::SLGClear&) { return "SLGClear"; },
                      },
                      kind);
}

ScenarioSpec builtin_scenario(int class_id, const MicrogridConfig& cfg) {
    ScenarioSpec spec;
    spec.class_id = class_id;
    spec.name = scenario_name(class_id);
    const auto& sc = cfg.scenario;
    auto& s = spec.schedule;

    switch (class_id) {
    case 0:
        break;
    case 1:
        s.push_back({sc.load_step_time, action::LoadStep{sc.load_step_p, 0.0}});
        break;
    case 2:
        s.push_back({sc.sag_start, action::Sag{sc.sag_depth, {true, true, true}}});
        s.push_back({sc.sag_end, action::SagClear{}});
        break;
    case 3: {
        const double rate = sc.load_ramp_total / (sc.load_ramp_end - sc.load_ramp_start);
        s.push_back({sc.load_ramp_start, action::LoadRampStart{rate}});
        s.push_back({sc.load_ramp_end, action::LoadRampEnd{}});
        break;
    }
    case 4: {
        const double rate = sc.freq_ramp_total / (sc.freq_ramp_end - sc.freq_ramp_start);
        s.push_back({sc.freq_ramp_start, action::FreqRampStart{rate}});
        s.push_back({sc.freq_ramp_end, action::FreqRampEnd{}});
        break;
    }
    case 5:
        for (std::size_t k = 0; k < sc.trip_ids.size() && k < sc.trip_times.size(); ++k)
            s.push_back({sc.trip_times[k], action::DGTrip{sc.trip_ids[k]}});
        break;
    case 6:
        s.push_back({sc.tie_open_time, action::TieOpen{}});
        break;
    case 7:
        s.push_back({sc.q_step_time, action::QStep{sc.q_step}});
        break;
    case 8:
        s.push_back({sc.slg_start, action::SLG{sc.slg_phase, sc.slg_depth, sc.slg_fault_current}});
        s.push_back({sc.slg_end, action::SLGClear{}});
        break;
    case 9: {
        const double v0 = cfg.dgs.empty() ? 230.0 : cfg.dgs.front().droop.v0;
        // Current noise is relative to the nominal PCC (tie exchange) current, so
        // both groups carry the same relative level. Rated current if islanded.
        double nominal_p = std::abs(cfg.network.grid_import_p);
        if (nominal_p == 0.0)
            for (const auto& dg : cfg.dgs) nominal_p += dg.p_max;
        const double nominal_i = nominal_p / (3.0 * v0);
        NoiseSpec noise;
        noise.sigma_v = sc.noise_fraction * kSqrt2 * v0;
        noise.sigma_i = sc.noise_fraction * kSqrt2 * nominal_i;
        noise.seed = sc.noise_seed;
        if (sc.noise_windowed) noise.window = std::make_pair(sc.noise_start, sc.noise_end);
        spec.noise = noise;
        break;
    }
    case 10:
        spec.delay = DelaySpec{sc.delay_tau, sc.delay_start};
        break;
    default:
        throw Error(ErrorKind::UnknownClass, "unknown scenario class " + std::to_string(class_id));
    }
    sort_schedule(s);
    return spec;
}

void check_scenario(const ScenarioSpec& spec, double dt) {
    if (spec.class_id < 0 || spec.class_id >= kNumClasses)
        throw Error(ErrorKind::UnknownClass, "unknown scenario class " + std::to_string(spec.class_id));
    for (std::size_t k = 0; k < spec.schedule.size(); ++k) {
        grid_index(spec.schedule[k].t_e, dt);
        if (k > 0 && spec.schedule[k].t_e < spec.schedule[k - 1].t_e)
            throw Error(ErrorKind::Config, "scenario schedule must be sorted by time");
    }
    if (spec.noise) {
        if (spec.noise->sigma_v < 0.0 || spec.noise->sigma_i < 0.0)
            throw Error(ErrorKind::Config, "noise sigma must be >= 0");
        if (spec.noise->window) {
            grid_index(spec.noise->window->first, dt);
            grid_index(spec.noise->window->second, dt);
        }
    }
    if (spec.delay) {
        if (spec.delay->tau < 0.0) throw Error(ErrorKind::Config, "delay tau must be >= 0");
        grid_index(spec.delay->tau, dt);
        grid_index(spec.delay->start, dt);
    }
}

std::optional<SampleIndex> label_onset(const ScenarioSpec& spec, double dt) {
    if (spec.class_id == 0) return std::nullopt;
    std::optional<SampleIndex> first;
    auto consider = [&](double t) {
        const SampleIndex n = grid_index(t, dt);
        if (!first || n < *first) first = n;
    };
    if (!spec.schedule.empty()) consider(spec.schedule.front().t_e);
    if (spec.noise) consider(spec.noise->window ? spec.noise->window->first : 0.0);
    if (spec.delay) consider(spec.delay->start);
    return first;
}

int label_at(const ScenarioSpec& spec, SampleIndex n, double dt) {
    const auto onset = label_onset(spec, dt);
    return onset && n >= *onset ? spec.class_id : 0;
}

ProfileValue profile_value(const std::vector<TimedAction>& schedule, double t) {
    ProfileValue out;
    std::optional<std::pair<double, double>> load_ramp;  // (start, rate)
    std::optional<std::pair<double, double>> freq_ramp;
    Eigen::Vector3d sag = Eigen::Vector3d::Ones();
    Eigen::Vector3d slg = Eigen::Vector3d::Ones();

    for (const auto& a : schedule) {
        if (a.t_e > t) break;
        std::visit(overloaded{
                       [&](const action::LoadStep& s) {
                           out.load_p += s.dp;
                           out.load_q += s.dq;
                       },
                       [&](const action::LoadRampStart& s) { load_ramp = {a.t_e, s.rate_p}; },
                       [&](const action::LoadRampEnd&) {
                           if (load_ramp) out.load_p += load_ramp->second * (a.t_e - load_ramp->first);
                           load_ramp.reset();
                       },
                       [&](const action::FreqRampStart& s) { freq_ramp = {a.t_e, s.rate}; },
                       [&](const action::FreqRampEnd&) {
                           if (freq_ramp)
                               out.freq_offset += freq_ramp->second * (a.t_e - freq_ramp->first);
                           freq_ramp.reset();
                       },
                       [&](const action::Sag& s) {
                           for (int k = 0; k < 3; ++k) sag[k] = s.phases[k] ? s.depth : 1.0;
                       },
                       [&](const action::SagClear&) { sag.setOnes(); },
                       [&](const action::QStep& s) { out.load_q += s.dq; },
                       [&](const action::SLG& s) {
                           slg.setOnes();
                           out.fault_current.setZero();
                           slg[s.phase] = s.depth;
                           out.fault_current[s.phase] = s.fault_current;
                       },
                       [&](const action::SLGClear&) {
                           slg.setOnes();
                           out.fault_current.setZero();
                       },
                       [](const action::DGTrip&) {},
                       [](const action::TieOpen&) {},
                   },
                   a.kind);
    }
    if (load_ramp) out.load_p += load_ramp->second * (t - load_ramp->first);
    if (freq_ramp) out.freq_offset += freq_ramp->second * (t - freq_ramp->first);
    out.sag_gains = sag.cwiseProduct(slg);
    return out;
}

double GaussianSource::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    const double u1 = 1.0 - static_cast<double>(engine_() >> 11) * scale;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * scale;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

bool noise_active(const NoiseSpec& spec, double t) {
    if (!spec.window) return true;
    return t >= spec.window->first && t < spec.window->second;
}

double apply_noise(double x, ChannelGroup group, const NoiseSpec& spec, double t,
                   GaussianSource& rng) {
    const double sigma = group == ChannelGroup::Voltage ? spec.sigma_v : spec.sigma_i;
    if (!noise_active(spec, t)) return x;
    const double z = rng.next();
    return sigma == 0.0 ? x : x + sigma * z;
}

FrequencyDelayLine::FrequencyDelayLine(SampleIndex max_delay)
    : ring_(static_cast<std::size_t>(std::max<SampleIndex>(0, max_delay) + 1), 0.0) {}

void FrequencyDelayLine::push(double f) {
    ring_[static_cast<std::size_t>(count_ % capacity())] = f;
    ++count_;
}

SampleIndex FrequencyDelayLine::oldest() const noexcept {
    return std::max<SampleIndex>(0, count_ - capacity());
}

double FrequencyDelayLine::at(SampleIndex n) const {
    if (n < oldest() || n >= count_)
        throw Error(ErrorKind::Config, "sample " + std::to_string(n) + " is not buffered");
    return ring_[static_cast<std::size_t>(n % capacity())];
}

double delayed_feedback(const FrequencyDelayLine& buffer, SampleIndex n, double tau, double dt,
                        bool active) {
    if (!active) return buffer.at(n);
    const SampleIndex d = grid_index(tau, dt);
    return buffer.at(std::max(n - d, buffer.oldest()));
}

nlohmann::json scenario_to_json(const ScenarioSpec& spec, double dt) {
    using nlohmann::json;
    json schedule = json::array();
    for (const auto& a : spec.schedule) {
        json params = std::visit(
            overloaded{
                [](const action::LoadStep& s) { return json{{"dp", s.dp}, {"dq", s.dq}}; },
                [](const action::LoadRampStart& s) { return json{{"rate_p", s.rate_p}}; },
                [](const action::LoadRampEnd&) { return json::object(); },
                [](const action::FreqRampStart& s) { return json{{"rate", s.rate}}; },
                [](const action::FreqRampEnd&) { return json::object(); },
                [](const action::Sag& s) {
                    return json{{"depth", s.depth}, {"phases", {s.phases[0], s.phases[1], s.phases[2]}}};
                },
                [](const action::SagClear&) { return json::object(); },
                [](const action::DGTrip& s) { return json{{"id", s.id}}; },
                [](const action::TieOpen&) { return json::object(); },
                [](const action::QStep& s) { return json{{"dq", s.dq}}; },
                [](const action::SLG& s) {
                    return json{{"phase", s.phase}, {"depth", s.depth}, {"fault_current", s.fault_current}};
                },
                [](const action::SLGClear&) { return json::object(); },
            },
            a.kind);
        schedule.push_back({{"t_e", a.t_e},
                            {"index", grid_index(a.t_e, dt)},
                            {"kind", action_name(a.kind)},
                            {"params", params}});
    }
    json out = {{"id", spec.class_id}, {"name", spec.name}, {"schedule", schedule}};
    if (auto onset = label_onset(spec, dt)) out["label_onset"] = *onset;
    else out["label_onset"] = nullptr;
    if (spec.noise) {
        json n = {{"sigma_v", spec.noise->sigma_v},
                  {"sigma_i", spec.noise->sigma_i},
                  {"seed", spec.noise->seed},
                  {"draw_order", {"V1", "V2", "V3", "I1", "I2", "I3"}},
                  {"generator", "mt19937_64 + Box-Muller"}};
        if (spec.noise->window) n["window"] = {spec.noise->window->first, spec.noise->window->second};
        else n["window"] = "full";
        out["noise"] = n;
    }
    if (spec.delay) out["delay"] = {{"tau", spec.delay->tau}, {"start", spec.delay->start}};
    return out;
}

nlohmann::json catalog_json(const MicrogridConfig& cfg) {
    nlohmann::json out = nlohmann::json::array();
    for (int c = 0; c < kNumClasses; ++c)
        out.push_back(scenario_to_json(builtin_scenario(c, cfg), cfg.grid.dt));
    return out;
}

} // namespace mgtwin
