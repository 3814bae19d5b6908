#pragma once

#include <array>
#include <string>
#include <string_view>

#include "mgtwin/model.hpp"

namespace mgtwin {

inline constexpr int kChannels = 38;

// Column layout: time, V1..V3, I1..I3, P_DG1..10, Q_DG1..10, f_DG1..10, label.
namespace col {
inline constexpr int time = 0;
inline constexpr int v1 = 1;
inline constexpr int i1 = 4;
inline constexpr int p_dg1 = 7;
inline constexpr int q_dg1 = p_dg1 + kNumDgs;
inline constexpr int f_dg1 = q_dg1 + kNumDgs;
inline constexpr int label = f_dg1 + kNumDgs;
static_assert(label == kChannels - 1);

constexpr int v(int phase) { return v1 + phase; }
constexpr int i(int phase) { return i1 + phase; }
constexpr int p(int dg) { return p_dg1 + dg; }  // dg is 0-based
constexpr int q(int dg) { return q_dg1 + dg; }
constexpr int f(int dg) { return f_dg1 + dg; }
} // namespace col

enum class Quantity { Time, Voltage, Current, ActivePower, ReactivePower, Frequency, Label };

Quantity channel_quantity(int column);
const std::array<std::string, kChannels>& channel_names();
std::string_view channel_unit(int column);

/// Header line without trailing newline.
const std::string& csv_header();

using Row = std::array<double, kChannels>;

} // namespace mgtwin
