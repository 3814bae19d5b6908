#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mgtwin/errors.hpp"

namespace mgtwin {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int io = 3;
inline constexpr int schema = 4;
inline constexpr int validation = 5;
inline constexpr int repair = 6;  // a channel with no valid sample
} // namespace exit_code

int exit_code_for(ErrorKind kind);

/// "all", "3", "0,2,5", "1-4" -> sorted unique class ids. Throws UnknownClass.
std::vector<int> parse_selection(const std::string& text);

/// scenario_<id>_<name>.csv
std::string scenario_file_name(int class_id);

/// Class id from a scenario_<id>_... file name, if it has that shape.
std::optional<int> class_from_file_name(const std::filesystem::path& path);

/// Entry point of the mgtwin tool.
int run_cli(int argc, char** argv);

} // namespace mgtwin
