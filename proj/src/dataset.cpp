#include "mgtwin/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>

namespace mgtwin {

bool DatasetMatrix::operator==(const DatasetMatrix& other) const {
    if (rows() != other.rows()) return false;
    if (data_.size() == 0) return true;
    return std::memcmp(data_.data(), other.data_.data(), sizeof(double) * data_.size()) == 0;
}

std::vector<std::string> dataset_diagnostics(const DatasetMatrix& m, double dt) {
    std::vector<std::string> out;
    if (m.empty()) {
        out.push_back("dataset is empty");
        return out;
    }
    const auto t = m.channel(col::time);
    const double tol = 1e-6 * dt;
    for (SampleIndex n = 0; n < m.rows(); ++n) {
        if (!std::isfinite(t[n])) {
            out.push_back("time is not finite at row " + std::to_string(n));
            break;
        }
        if (n > 0 && std::abs(t[n] - t[n - 1] - dt) > tol) {
            out.push_back("time stride deviates from dt at row " + std::to_string(n));
            break;
        }
    }
    const auto y = m.channel(col::label);
    for (SampleIndex n = 0; n < m.rows(); ++n) {
        const double v = y[n];
        if (!(v >= 0.0 && v <= 10.0) || v != std::floor(v)) {
            out.push_back("label outside {0..10} at row " + std::to_string(n));
            break;
        }
    }
    return out;
}

// ---- CSV -------------------------------------------------------------------

void append_number(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "nan";
        return;
    }
    if (std::isinf(v)) {
        out += v > 0 ? "inf" : "-inf";
        return;
    }
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 10);
    out.append(buf, res.ptr);
}

void append_row(std::string& out, const Row& row) {
    for (int c = 0; c < kChannels; ++c) {
        if (c) out += ',';
        append_number(out, row[c]);
    }
    out += '\n';
}

namespace {

Error io_error(const std::filesystem::path& path, const std::string& what) {
    return Error(ErrorKind::Io, what + ": " + path.string() + " (" + std::strerror(errno) + ")");
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

// Splits on ',' into at most kChannels + 1 views; returns the field count.
int split_fields(std::string_view line, std::array<std::string_view, kChannels + 1>& fields) {
    int count = 0;
    std::size_t pos = 0;
    for (;;) {
        const std::size_t comma = line.find(',', pos);
        const auto field = line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos);
        if (count <= kChannels) fields[count] = field;
        ++count;
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return count;
}

} // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, std::size_t buffer_bytes)
    : path_(path), limit_(buffer_bytes) {
    file_ = std::fopen(path.string().c_str(), "wb");
    if (!file_) throw io_error(path, "cannot open for writing");
    buffer_.reserve(limit_ + 1024);
}

CsvWriter::~CsvWriter() {
    if (file_) {
        try {
            flush();
        } catch (...) {
        }
        std::fclose(file_);
    }
}

void CsvWriter::flush() {
    if (buffer_.empty()) return;
    if (std::fwrite(buffer_.data(), 1, buffer_.size(), file_) != buffer_.size())
        throw io_error(path_, "write failed");
    buffer_.clear();
}

void CsvWriter::write_row(const Row& row) {
    append_row(buffer_, row);
    ++rows_;
    if (buffer_.size() >= limit_) flush();
}

void CsvWriter::write_line(std::string_view line) {
    buffer_.append(line);
    buffer_ += '\n';
    if (buffer_.size() >= limit_) flush();
}

void CsvWriter::close() {
    if (!file_) return;
    flush();
    const int rc = std::fclose(file_);
    file_ = nullptr;
    if (rc != 0) throw io_error(path_, "close failed");
}

LineReader::LineReader(const std::filesystem::path& path, std::size_t buffer_bytes)
    : path_(path), buf_(buffer_bytes) {
    file_ = std::fopen(path.string().c_str(), "rb");
    if (!file_) throw io_error(path, "cannot open for reading");
}

LineReader::~LineReader() {
    if (file_) std::fclose(file_);
}

bool LineReader::fill() {
    if (eof_) return false;
    const std::size_t got = std::fread(buf_.data(), 1, buf_.size(), file_);
    begin_ = 0;
    end_ = got;
    if (got == 0) {
        if (std::ferror(file_)) throw io_error(path_, "read failed");
        eof_ = true;
        return false;
    }
    return true;
}

bool LineReader::next(std::string_view& line) {
    carry_.clear();
    bool carried = false;
    for (;;) {
        if (begin_ < end_) {
            const char* start = buf_.data() + begin_;
            const void* hit = std::memchr(start, '\n', end_ - begin_);
            if (hit) {
                const std::size_t len = static_cast<const char*>(hit) - start;
                if (carried) {
                    carry_.append(start, len);
                    line = carry_;
                } else {
                    line = std::string_view(start, len);
                }
                begin_ += len + 1;
                ++line_no_;
                return true;
            }
            carry_.append(start, end_ - begin_);
            carried = true;
            begin_ = end_;
        }
        if (!fill()) {
            if (carried && !carry_.empty()) {
                line = carry_;
                ++line_no_;
                return true;
            }
            return false;
        }
    }
}

std::optional<double> parse_number(std::string_view field) {
    field = trim(field);
    if (field.empty()) return std::nullopt;
    if (field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec == std::errc::result_out_of_range) {
        // Overflowing literals are kept as +-Inf so cleaning can flag them.
        const bool neg = field.front() == '-';
        std::string probe(field);
        const double parsed = std::strtod(probe.c_str(), nullptr);
        if (std::isinf(parsed)) return neg ? -HUGE_VAL : HUGE_VAL;
        return parsed;
    }
    if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
    return v;
}

Row parse_row(std::string_view line, SampleIndex row_index) {
    std::array<std::string_view, kChannels + 1> fields;
    const int count = split_fields(trim(line), fields);
    if (count != kChannels)
        throw Error(ErrorKind::SchemaMismatch, "row " + std::to_string(row_index) + ": expected " +
                                                   std::to_string(kChannels) + " columns, got " +
                                                   std::to_string(count));
    Row row;
    for (int c = 0; c < kChannels; ++c) {
        const auto v = parse_number(fields[c]);
        if (!v)
            throw Error(ErrorKind::Parse, "row " + std::to_string(row_index) + ", column " +
                                              channel_names()[c] + ": cannot parse '" +
                                              std::string(fields[c]) + "'");
        row[c] = *v;
    }
    return row;
}

void check_header(std::string_view line) {
    std::array<std::string_view, kChannels + 1> fields;
    const int count = split_fields(trim(line), fields);
    if (count != kChannels)
        throw Error(ErrorKind::SchemaMismatch, "header: expected " + std::to_string(kChannels) +
                                                   " columns, got " + std::to_string(count));
    for (int c = 0; c < kChannels; ++c) {
        if (trim(fields[c]) != channel_names()[c])
            throw Error(ErrorKind::SchemaMismatch, "header column " + std::to_string(c) +
                                                       ": expected " + channel_names()[c] +
                                                       ", got " + std::string(fields[c]));
    }
}

void write_csv(const DatasetMatrix& m, const std::filesystem::path& path) {
    if (m.empty()) throw Error(ErrorKind::EmptyDataset, "refusing to write an empty dataset");
    CsvWriter w(path);
    w.write_line(csv_header());
    for (SampleIndex r = 0; r < m.rows(); ++r) w.write_row(m.row(r));
    w.close();
}

namespace {

SampleIndex count_data_lines(const std::filesystem::path& path) {
    LineReader reader(path);
    std::string_view line;
    SampleIndex n = 0;
    while (reader.next(line)) {
        if (!trim(line).empty()) ++n;
    }
    return n > 0 ? n - 1 : 0;
}

} // namespace

DatasetMatrix read_csv(const std::filesystem::path& path) {
    const SampleIndex rows = count_data_lines(path);
    LineReader reader(path);
    std::string_view line;
    if (!reader.next(line)) throw Error(ErrorKind::SchemaMismatch, "missing header: " + path.string());
    check_header(line);
    DatasetMatrix m(rows);
    SampleIndex r = 0;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        m.set_row(r, parse_row(line, r));
        ++r;
    }
    return m;
}

// ---- cleaning --------------------------------------------------------------

AdmissibleRanges AdmissibleRanges::defaults(const ValidatedConfig& cfg) {
    const auto& droop = cfg->dgs.front().droop;
    const double v_peak = 10.0 * kSqrt2 * droop.v0;
    const double i_peak = 10.0 * kSqrt2 * cfg.rated_current();
    const double power = 10.0 * cfg.rated_power();
    AdmissibleRanges r;
    r.voltage = {-v_peak, v_peak};
    r.current = {-i_peak, i_peak};
    r.active_power = {-power, power};
    r.reactive_power = {-power, power};
    r.frequency = {droop.f0 - 10.0, droop.f0 + 10.0};
    return r;
}

const AdmissibleRange& AdmissibleRanges::for_column(int column) const {
    switch (channel_quantity(column)) {
    case Quantity::Voltage: return voltage;
    case Quantity::Current: return current;
    case Quantity::ActivePower: return active_power;
    case Quantity::ReactivePower: return reactive_power;
    case Quantity::Frequency: return frequency;
    default: break;
    }
    throw Error(ErrorKind::Config, "no admissible range for column " + channel_names()[column]);
}

namespace {

const std::array<std::pair<const char*, AdmissibleRange AdmissibleRanges::*>, 5> kRangeKeys{{
    {"voltage", &AdmissibleRanges::voltage},
    {"current", &AdmissibleRanges::current},
    {"active_power", &AdmissibleRanges::active_power},
    {"reactive_power", &AdmissibleRanges::reactive_power},
    {"frequency", &AdmissibleRanges::frequency},
}};

} // namespace

AdmissibleRanges ranges_from_json(const nlohmann::json& doc, AdmissibleRanges base) {
    std::vector<std::string> problems;
    if (!doc.is_object()) throw ConfigError({"ranges: expected a JSON object"});
    for (const auto& [key, member] : kRangeKeys) {
        if (!doc.contains(key)) continue;
        const auto& v = doc.at(key);
        AdmissibleRange& r = base.*member;
        try {
            if (v.is_array() && v.size() == 2) {
                r = {v[0].get<double>(), v[1].get<double>()};
            } else {
                r.lo = v.value("lo", r.lo);
                r.hi = v.value("hi", r.hi);
            }
        } catch (const nlohmann::json::exception&) {
            problems.push_back(std::string("ranges.") + key + ": expected [lo, hi] or {lo, hi}");
            continue;
        }
        if (!(r.lo < r.hi)) problems.push_back(std::string("ranges.") + key + ": lo must be < hi");
    }
    for (const auto& item : doc.items()) {
        const bool known = std::any_of(kRangeKeys.begin(), kRangeKeys.end(),
                                       [&](const auto& k) { return item.key() == k.first; });
        if (!known) problems.push_back("ranges: unknown key '" + item.key() + "'");
    }
    if (!problems.empty()) throw ConfigError(problems);
    return base;
}

nlohmann::json ranges_to_json(const AdmissibleRanges& r) {
    nlohmann::json doc;
    for (const auto& [key, member] : kRangeKeys) {
        const AdmissibleRange& v = r.*member;
        doc[key] = {{"lo", v.lo}, {"hi", v.hi}};
    }
    return doc;
}

double interpolate_gap(SampleIndex n, SampleIndex n1, double x1, SampleIndex n2, double x2) {
    const double frac = static_cast<double>(n - n1) / static_cast<double>(n2 - n1);
    const double v = x1 + (x2 - x1) * frac;
    return std::clamp(v, std::min(x1, x2), std::max(x1, x2));
}

Eigen::VectorXd repair_channel(const Eigen::Ref<const Eigen::VectorXd>& x, const IndexSet& invalid) {
    Eigen::VectorXd out = x;
    if (invalid.empty()) return out;
    const auto n = static_cast<SampleIndex>(x.size());
    if (static_cast<SampleIndex>(invalid.size()) >= n)
        throw Error(ErrorKind::AllInvalid, "no valid sample to repair from");

    std::size_t k = 0;
    while (k < invalid.size()) {
        std::size_t j = k;
        while (j + 1 < invalid.size() && invalid[j + 1] == invalid[j] + 1) ++j;
        const SampleIndex start = invalid[k];
        const SampleIndex end = invalid[j];
        const SampleIndex left = start - 1;
        const SampleIndex right = end + 1;
        if (left < 0) {
            out.segment(start, end - start + 1).setConstant(x[right]);
        } else if (right >= n) {
            out.segment(start, end - start + 1).setConstant(x[left]);
        } else {
            for (SampleIndex i = start; i <= end; ++i)
                out[i] = interpolate_gap(i, left, x[left], right, x[right]);
        }
        k = j + 1;
    }
    return out;
}

SampleIndex RepairReport::total_repaired() const noexcept {
    SampleIndex total = 0;
    for (const auto& c : channels) total += c.repaired();
    return total;
}

nlohmann::json report_to_json(const RepairReport& report) {
    nlohmann::json doc;
    doc["rows"] = report.rows;
    doc["total_repaired"] = report.total_repaired();
    doc["channels"] = nlohmann::json::array();
    for (const auto& c : report.channels) {
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& r : c.runs) runs.push_back({r.start, r.end});
        doc["channels"].push_back({{"channel", c.channel},
                                   {"nan", c.nan_count},
                                   {"inf", c.inf_count},
                                   {"out_of_range", c.out_of_range},
                                   {"repaired", c.repaired()},
                                   {"runs", runs},
                                   {"leading_extension", c.leading_extension},
                                   {"trailing_extension", c.trailing_extension}});
    }
    return doc;
}

namespace {

void tally(ChannelRepair& rep, double v) {
    if (std::isnan(v))
        ++rep.nan_count;
    else if (std::isinf(v))
        ++rep.inf_count;
    else
        ++rep.out_of_range;
}

std::vector<RepairRun> runs_of(const IndexSet& invalid) {
    std::vector<RepairRun> out;
    for (SampleIndex n : invalid) {
        if (!out.empty() && out.back().end + 1 == n)
            out.back().end = n;
        else
            out.push_back({n, n});
    }
    return out;
}

bool is_measurement(int c) { return c != col::time && c != col::label; }

Error all_invalid(int c) {
    return Error(ErrorKind::AllInvalid, "channel " + channel_names()[c] + " has no valid samples");
}

} // namespace

CleanResult clean_dataset(const DatasetMatrix& m, const AdmissibleRanges& ranges) {
    CleanResult result{m, {}};
    result.report.rows = m.rows();
    for (int c = 0; c < kChannels; ++c) {
        if (!is_measurement(c)) continue;
        const auto x = m.channel(c);
        const IndexSet invalid = detect_invalid(x, ranges.for_column(c));
        if (invalid.empty()) continue;
        if (static_cast<SampleIndex>(invalid.size()) == m.rows()) throw all_invalid(c);

        ChannelRepair rep;
        rep.channel = channel_names()[c];
        for (SampleIndex n : invalid) tally(rep, x[n]);
        rep.runs = runs_of(invalid);
        rep.leading_extension = rep.runs.front().start == 0;
        rep.trailing_extension = rep.runs.back().end == m.rows() - 1;
        result.data.channel(c) = repair_channel(x, invalid);
        result.report.channels.push_back(std::move(rep));
    }
    return result;
}

namespace {

// A run of invalid samples plus the valid values that bracket it.
struct PendingRun {
    SampleIndex start = 0;
    SampleIndex end = 0;
    SampleIndex left = -1;
    double left_value = 0.0;
    double right_value = 0.0;
    bool closed = false;
};

struct ColumnScan {
    ChannelRepair rep;
    std::vector<PendingRun> runs;
    SampleIndex last_valid = -1;
    double last_value = 0.0;
    std::size_t cursor = 0;
};

} // namespace

RepairReport clean_csv_file(const std::filesystem::path& in, const std::filesystem::path& out,
                            const AdmissibleRanges& ranges) {
    std::array<ColumnScan, kChannels> scan;
    SampleIndex rows = 0;
    {
        LineReader reader(in);
        std::string_view line;
        if (!reader.next(line)) throw Error(ErrorKind::SchemaMismatch, "missing header: " + in.string());
        check_header(line);
        while (reader.next(line)) {
            if (trim(line).empty()) continue;
            const Row row = parse_row(line, rows);
            for (int c = 0; c < kChannels; ++c) {
                if (!is_measurement(c)) continue;
                auto& s = scan[c];
                const double v = row[c];
                const auto& range = ranges.for_column(c);
                if (std::isfinite(v) && range.contains(v)) {
                    if (!s.runs.empty() && !s.runs.back().closed) {
                        s.runs.back().right_value = v;
                        s.runs.back().closed = true;
                    }
                    s.last_valid = rows;
                    s.last_value = v;
                    continue;
                }
                tally(s.rep, v);
                if (!s.runs.empty() && !s.runs.back().closed) {
                    s.runs.back().end = rows;
                } else {
                    s.runs.push_back({rows, rows, s.last_valid, s.last_value, 0.0, false});
                }
            }
            ++rows;
        }
    }

    RepairReport report;
    report.rows = rows;
    for (int c = 0; c < kChannels; ++c) {
        if (!is_measurement(c)) continue;
        auto& s = scan[c];
        if (s.runs.empty()) continue;
        if (s.last_valid < 0) throw all_invalid(c);
        s.rep.channel = channel_names()[c];
        for (const auto& r : s.runs) s.rep.runs.push_back({r.start, r.end});
        s.rep.leading_extension = s.runs.front().start == 0;
        s.rep.trailing_extension = !s.runs.back().closed;
        report.channels.push_back(s.rep);
    }

    LineReader reader(in);
    CsvWriter writer(out);
    std::string_view line;
    reader.next(line);
    writer.write_line(trim(line));
    SampleIndex r = 0;
    std::string rebuilt;
    std::array<std::string_view, kChannels + 1> fields;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        bool touched = false;
        for (int c = 0; c < kChannels && !touched; ++c) {
            auto& s = scan[c];
            while (s.cursor < s.runs.size() && s.runs[s.cursor].end < r) ++s.cursor;
            touched = s.cursor < s.runs.size() && s.runs[s.cursor].start <= r;
        }
        if (!touched) {
            writer.write_line(line);
            ++r;
            continue;
        }
        split_fields(trim(line), fields);
        rebuilt.clear();
        for (int c = 0; c < kChannels; ++c) {
            if (c) rebuilt += ',';
            auto& s = scan[c];
            if (is_measurement(c)) {
                while (s.cursor < s.runs.size() && s.runs[s.cursor].end < r) ++s.cursor;
                if (s.cursor < s.runs.size() && s.runs[s.cursor].start <= r) {
                    const auto& run = s.runs[s.cursor];
                    double v;
                    if (run.left < 0)
                        v = run.right_value;
                    else if (!run.closed)
                        v = run.left_value;
                    else
                        v = interpolate_gap(r, run.left, run.left_value, run.end + 1, run.right_value);
                    append_number(rebuilt, v);
                    continue;
                }
            }
            rebuilt.append(fields[c]);
        }
        writer.write_line(rebuilt);
        ++r;
    }
    writer.close();
    return report;
}

} // namespace mgtwin
