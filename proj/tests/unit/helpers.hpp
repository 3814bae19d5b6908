#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "mgtwin/model.hpp"

namespace testing {

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("mgtwin_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

// Coarser grid for engine-level tests; event times stay on the grid.
inline mgtwin::MicrogridConfig coarse_config(double dt = 2e-5) {
    auto cfg = mgtwin::MicrogridConfig::defaults();
    cfg.grid.dt = dt;
    return cfg;
}

} // namespace testing
