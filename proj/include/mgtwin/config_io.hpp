#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mgtwin/model.hpp"

namespace mgtwin {

// Config file layout (JSON, every key optional, missing keys keep defaults):
//
//   {
//     "grid":     { "dt": 2e-6, "duration": 1.0 },
//     "droop":    { "f0": 60, "v0": 230, "m_p": 1e-5, "m_q": 1e-3 },
//     "dg":       { "p_set": 10000, "q_set": 3000, "p_max": 20000 },
//     "dgs":      [ { "id": 1, "p_set": ..., "droop": { ... } }, ... ],
//     "network":  { "grid_connected_initial": true, "grid_stiffness": 0.98, ... },
//     "dynamics": { "filter_tau_p": 0.016, "lag_tau_e": 0.03, "restore_tau": 0.02 },
//     "scenario": { "load_step_p": 16600, ... }
//   }
//
// "droop" and "dg" set the template for all ten units; entries of "dgs"
// override individual units by position.

MicrogridConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const MicrogridConfig& cfg);

MicrogridConfig load_config(const std::filesystem::path& path);
void save_config(const MicrogridConfig& cfg, const std::filesystem::path& path);

} // namespace mgtwin
