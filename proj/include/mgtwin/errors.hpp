#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgtwin {

enum class ErrorKind {
    Config,
    NonIntegralGrid,
    StepTooLarge,
    NoSource,
    UnknownClass,
    EmptyDataset,
    SchemaMismatch,
    Parse,
    AllInvalid,
    DegenerateWindow,
    Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Carries every violated invariant found by validate_config.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> diagnostics);

    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<std::string> diagnostics_;
};

/// Engine failure tagged with the sample index where it happened.
class EngineError : public Error {
public:
    EngineError(ErrorKind kind, std::int64_t sample, const std::string& what)
        : Error(kind, what + " at sample " + std::to_string(sample)), sample_(sample) {}

    std::int64_t sample() const noexcept { return sample_; }

private:
    std::int64_t sample_;
};

} // namespace mgtwin
