#include "mgtwin/schema.hpp"

namespace mgtwin {

Quantity channel_quantity(int column) {
    if (column == col::time) return Quantity::Time;
    if (column < col::i1) return Quantity::Voltage;
    if (column < col::p_dg1) return Quantity::Current;
    if (column < col::q_dg1) return Quantity::ActivePower;
    if (column < col::f_dg1) return Quantity::ReactivePower;
    if (column < col::label) return Quantity::Frequency;
    return Quantity::Label;
}

const std::array<std::string, kChannels>& channel_names() {
    static const std::array<std::string, kChannels> names = [] {
        std::array<std::string, kChannels> out;
        out[col::time] = "time";
        for (int k = 0; k < 3; ++k) {
            out[col::v(k)] = "V" + std::to_string(k + 1);
            out[col::i(k)] = "I" + std::to_string(k + 1);
        }
        for (int k = 0; k < kNumDgs; ++k) {
            const std::string id = std::to_string(k + 1);
            out[col::p(k)] = "P_DG" + id;
            out[col::q(k)] = "Q_DG" + id;
            out[col::f(k)] = "f_DG" + id;
        }
        out[col::label] = "label";
        return out;
    }();
    return names;
}

std::string_view channel_unit(int column) {
    switch (channel_quantity(column)) {
    case Quantity::Time: return "s";
    case Quantity::Voltage: return "V";
    case Quantity::Current: return "A";
    case Quantity::ActivePower: return "W";
    case Quantity::ReactivePower: return "var";
    case Quantity::Frequency: return "Hz";
    case Quantity::Label: return "";
    }
    return "";
}

const std::string& csv_header() {
    static const std::string header = [] {
        std::string out;
        for (const auto& n : channel_names()) {
            if (!out.empty()) out += ',';
            out += n;
        }
        return out;
    }();
    return header;
}

} // namespace mgtwin
