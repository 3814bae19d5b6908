#include "mgtwin/config_io.hpp"

#include <fstream>

#include "mgtwin/errors.hpp"

namespace mgtwin {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

void read_droop(const json& j, DroopParams& d) {
    read_opt(j, "f0", d.f0);
    read_opt(j, "v0", d.v0);
    read_opt(j, "m_p", d.m_p);
    read_opt(j, "m_q", d.m_q);
}

json droop_json(const DroopParams& d) {
    return {{"f0", d.f0}, {"v0", d.v0}, {"m_p", d.m_p}, {"m_q", d.m_q}};
}

void read_dg(const json& j, DGConfig& dg) {
    read_opt(j, "id", dg.id);
    read_opt(j, "p_set", dg.p_set);
    read_opt(j, "q_set", dg.q_set);
    read_opt(j, "p_max", dg.p_max);
    if (auto it = j.find("droop"); it != j.end()) read_droop(*it, dg.droop);
}

} // namespace

MicrogridConfig config_from_json(const json& doc) {
    MicrogridConfig cfg = MicrogridConfig::defaults();
    if (!doc.is_object()) throw Error(ErrorKind::Config, "config root must be an object");

    try {
        if (auto g = doc.find("grid"); g != doc.end()) {
            read_opt(*g, "dt", cfg.grid.dt);
            read_opt(*g, "duration", cfg.grid.duration);
        }

        DGConfig tmpl;
        if (auto d = doc.find("droop"); d != doc.end()) read_droop(*d, tmpl.droop);
        if (auto d = doc.find("dg"); d != doc.end()) read_dg(*d, tmpl);
        for (int k = 0; k < kNumDgs; ++k) {
            cfg.dgs[k] = tmpl;
            cfg.dgs[k].id = k + 1;
        }
        if (auto list = doc.find("dgs"); list != doc.end()) {
            if (!list->is_array()) throw Error(ErrorKind::Config, "\"dgs\" must be an array");
            cfg.dgs.resize(list->size(), tmpl);
            for (std::size_t k = 0; k < list->size(); ++k) {
                if (k >= kNumDgs) cfg.dgs[k].id = static_cast<int>(k + 1);
                read_dg((*list)[k], cfg.dgs[k]);
            }
        }

        if (auto n = doc.find("network"); n != doc.end()) {
            auto& net = cfg.network;
            read_opt(*n, "grid_connected_initial", net.grid_connected_initial);
            read_opt(*n, "grid_stiffness", net.grid_stiffness);
            read_opt(*n, "load_p", net.load_p);
            read_opt(*n, "load_q", net.load_q);
            read_opt(*n, "power_factor_angle", net.power_factor_angle);
            read_opt(*n, "grid_import_p", net.grid_import_p);
            read_opt(*n, "load_voltage_exponent", net.load_voltage_exponent);
        }

        if (auto d = doc.find("dynamics"); d != doc.end()) {
            read_opt(*d, "filter_tau_p", cfg.filter_tau_p);
            read_opt(*d, "lag_tau_e", cfg.lag_tau_e);
            read_opt(*d, "restore_tau", cfg.restore_tau);
        }

        if (auto s = doc.find("scenario"); s != doc.end()) {
            auto& sc = cfg.scenario;
            read_opt(*s, "load_step_p", sc.load_step_p);
            read_opt(*s, "load_step_time", sc.load_step_time);
            read_opt(*s, "sag_depth", sc.sag_depth);
            read_opt(*s, "sag_start", sc.sag_start);
            read_opt(*s, "sag_end", sc.sag_end);
            read_opt(*s, "load_ramp_total", sc.load_ramp_total);
            read_opt(*s, "load_ramp_start", sc.load_ramp_start);
            read_opt(*s, "load_ramp_end", sc.load_ramp_end);
            read_opt(*s, "freq_ramp_total", sc.freq_ramp_total);
            read_opt(*s, "freq_ramp_start", sc.freq_ramp_start);
            read_opt(*s, "freq_ramp_end", sc.freq_ramp_end);
            read_opt(*s, "trip_ids", sc.trip_ids);
            read_opt(*s, "trip_times", sc.trip_times);
            read_opt(*s, "tie_open_time", sc.tie_open_time);
            read_opt(*s, "q_step", sc.q_step);
            read_opt(*s, "q_step_time", sc.q_step_time);
            read_opt(*s, "slg_phase", sc.slg_phase);
            read_opt(*s, "slg_depth", sc.slg_depth);
            read_opt(*s, "slg_fault_current", sc.slg_fault_current);
            read_opt(*s, "slg_start", sc.slg_start);
            read_opt(*s, "slg_end", sc.slg_end);
            read_opt(*s, "noise_fraction", sc.noise_fraction);
            read_opt(*s, "noise_seed", sc.noise_seed);
            read_opt(*s, "noise_windowed", sc.noise_windowed);
            read_opt(*s, "noise_start", sc.noise_start);
            read_opt(*s, "noise_end", sc.noise_end);
            read_opt(*s, "delay_tau", sc.delay_tau);
            read_opt(*s, "delay_start", sc.delay_start);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("config: ") + e.what());
    }
    return cfg;
}

json config_to_json(const MicrogridConfig& cfg) {
    json dgs = json::array();
    for (const auto& dg : cfg.dgs) {
        dgs.push_back({{"id", dg.id},
                       {"p_set", dg.p_set},
                       {"q_set", dg.q_set},
                       {"p_max", dg.p_max},
                       {"droop", droop_json(dg.droop)}});
    }
    const auto& net = cfg.network;
    const auto& sc = cfg.scenario;
    return {
        {"grid", {{"dt", cfg.grid.dt}, {"duration", cfg.grid.duration}}},
        {"dgs", dgs},
        {"network",
         {{"grid_connected_initial", net.grid_connected_initial},
          {"grid_stiffness", net.grid_stiffness},
          {"load_p", net.load_p},
          {"load_q", net.load_q},
          {"power_factor_angle", net.power_factor_angle},
          {"grid_import_p", net.grid_import_p},
          {"load_voltage_exponent", net.load_voltage_exponent}}},
        {"dynamics",
         {{"filter_tau_p", cfg.filter_tau_p},
          {"lag_tau_e", cfg.lag_tau_e},
          {"restore_tau", cfg.restore_tau}}},
        {"scenario",
         {{"load_step_p", sc.load_step_p},
          {"load_step_time", sc.load_step_time},
          {"sag_depth", sc.sag_depth},
          {"sag_start", sc.sag_start},
          {"sag_end", sc.sag_end},
          {"load_ramp_total", sc.load_ramp_total},
          {"load_ramp_start", sc.load_ramp_start},
          {"load_ramp_end", sc.load_ramp_end},
          {"freq_ramp_total", sc.freq_ramp_total},
          {"freq_ramp_start", sc.freq_ramp_start},
          {"freq_ramp_end", sc.freq_ramp_end},
          {"trip_ids", sc.trip_ids},
          {"trip_times", sc.trip_times},
          {"tie_open_time", sc.tie_open_time},
          {"q_step", sc.q_step},
          {"q_step_time", sc.q_step_time},
          {"slg_phase", sc.slg_phase},
          {"slg_depth", sc.slg_depth},
          {"slg_fault_current", sc.slg_fault_current},
          {"slg_start", sc.slg_start},
          {"slg_end", sc.slg_end},
          {"noise_fraction", sc.noise_fraction},
          {"noise_seed", sc.noise_seed},
          {"noise_windowed", sc.noise_windowed},
          {"noise_start", sc.noise_start},
          {"noise_end", sc.noise_end},
          {"delay_tau", sc.delay_tau},
          {"delay_start", sc.delay_start}}},
    };
}

MicrogridConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

void save_config(const MicrogridConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write config " + path.string());
    out << config_to_json(cfg).dump(2) << '\n';
}

} // namespace mgtwin
