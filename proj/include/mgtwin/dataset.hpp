#pragma once

#include <cmath>
#include <cstdio>
#include <string_view>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mgtwin/errors.hpp"
#include "mgtwin/model.hpp"
#include "mgtwin/schema.hpp"

namespace mgtwin {

/// N x 38 synchronized samples, column-major so each channel is contiguous.
class DatasetMatrix {
public:
    using Storage = Eigen::Matrix<double, Eigen::Dynamic, kChannels, Eigen::ColMajor>;

    DatasetMatrix() = default;
    explicit DatasetMatrix(SampleIndex rows) : data_(rows, kChannels) {}

    SampleIndex rows() const noexcept { return data_.rows(); }
    bool empty() const noexcept { return data_.rows() == 0; }

    auto channel(int c) { return data_.col(c); }
    auto channel(int c) const { return data_.col(c); }
    double& operator()(SampleIndex r, int c) { return data_(r, c); }
    double operator()(SampleIndex r, int c) const { return data_(r, c); }

    void set_row(SampleIndex r, const Row& row) {
        for (int c = 0; c < kChannels; ++c) data_(r, c) = row[c];
    }
    Row row(SampleIndex r) const {
        Row out;
        for (int c = 0; c < kChannels; ++c) out[c] = data_(r, c);
        return out;
    }

    Storage& storage() noexcept { return data_; }
    const Storage& storage() const noexcept { return data_; }

    bool operator==(const DatasetMatrix& other) const;

private:
    Storage data_;
};

/// Checks the time stride and the label set; returns one message per problem.
std::vector<std::string> dataset_diagnostics(const DatasetMatrix& m, double dt);

// ---- CSV -------------------------------------------------------------------

/// Appends v with 10 significant digits (general format); NaN/Inf as "nan"/"inf".
void append_number(std::string& out, double v);
void append_row(std::string& out, const Row& row);

/// Row-at-a-time CSV writer with a bounded output buffer.
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path, std::size_t buffer_bytes = 1 << 20);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void write_row(const Row& row);
    void write_line(std::string_view line);  // raw line, newline appended
    void close();
    SampleIndex rows_written() const noexcept { return rows_; }

private:
    void flush();

    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
    std::string buffer_;
    std::size_t limit_;
    SampleIndex rows_ = 0;
};

/// Buffered line reader over a file; lines are returned without '\n'.
class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path, std::size_t buffer_bytes = 1 << 20);
    ~LineReader();
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    bool next(std::string_view& line);
    SampleIndex line_number() const noexcept { return line_no_; }

private:
    bool fill();

    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
    std::vector<char> buf_;
    std::size_t begin_ = 0;
    std::size_t end_ = 0;
    bool eof_ = false;
    std::string carry_;
    SampleIndex line_no_ = 0;
};

/// Parses one numeric field; accepts NaN/Inf/-Inf tokens case-insensitively.
/// Returns nullopt on malformed input.
std::optional<double> parse_number(std::string_view field);

/// Splits a data line into 38 values; throws ParseError / SchemaMismatch.
Row parse_row(std::string_view line, SampleIndex row_index);

/// Throws SchemaMismatch unless `line` is exactly the 38-column header.
void check_header(std::string_view line);

void write_csv(const DatasetMatrix& m, const std::filesystem::path& path);
DatasetMatrix read_csv(const std::filesystem::path& path);

// ---- cleaning --------------------------------------------------------------

struct AdmissibleRange {
    double lo = -1.0;
    double hi = 1.0;
    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

struct AdmissibleRanges {
    AdmissibleRange voltage;
    AdmissibleRange current;
    AdmissibleRange active_power;
    AdmissibleRange reactive_power;
    AdmissibleRange frequency;

    /// 10x headroom around nominal ratings.
    static AdmissibleRanges defaults(const ValidatedConfig& cfg);
    const AdmissibleRange& for_column(int column) const;
};

AdmissibleRanges ranges_from_json(const nlohmann::json& doc, AdmissibleRanges base);
nlohmann::json ranges_to_json(const AdmissibleRanges& r);

using IndexSet = std::vector<SampleIndex>;  // sorted, unique

/// Indices that are NaN, +-Inf or outside [lo, hi].
template <typename Derived>
IndexSet detect_invalid(const Eigen::DenseBase<Derived>& x, const AdmissibleRange& range) {
    IndexSet out;
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        const double v = x.derived().coeff(n);
        if (!std::isfinite(v) || !range.contains(v)) out.push_back(n);
    }
    return out;
}

/// Linear interpolation across invalid runs, nearest-valid extension at the
/// ends. Valid samples are returned untouched. Throws AllInvalid.
Eigen::VectorXd repair_channel(const Eigen::Ref<const Eigen::VectorXd>& x, const IndexSet& invalid);

/// Value for an invalid sample n between valid neighbours (n1, x1) and (n2, x2).
double interpolate_gap(SampleIndex n, SampleIndex n1, double x1, SampleIndex n2, double x2);

struct RepairRun {
    SampleIndex start = 0;  // inclusive
    SampleIndex end = 0;    // inclusive
};

struct ChannelRepair {
    std::string channel;
    SampleIndex nan_count = 0;
    SampleIndex inf_count = 0;
    SampleIndex out_of_range = 0;
    std::vector<RepairRun> runs;
    bool leading_extension = false;
    bool trailing_extension = false;

    SampleIndex repaired() const noexcept { return nan_count + inf_count + out_of_range; }
};

struct RepairReport {
    SampleIndex rows = 0;
    std::vector<ChannelRepair> channels;  // only channels with repairs

    SampleIndex total_repaired() const noexcept;
    bool empty() const noexcept { return channels.empty(); }
};

nlohmann::json report_to_json(const RepairReport& report);

struct CleanResult {
    DatasetMatrix data;
    RepairReport report;
};

/// Repairs every measurement channel; time and label are never touched.
CleanResult clean_dataset(const DatasetMatrix& m, const AdmissibleRanges& ranges);

/// Two-pass streaming clean of a CSV file: memory grows with the number of
/// invalid runs only. Rows without repairs are copied byte for byte.
RepairReport clean_csv_file(const std::filesystem::path& in, const std::filesystem::path& out,
                            const AdmissibleRanges& ranges);

} // namespace mgtwin
