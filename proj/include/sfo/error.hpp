#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace sfo {

enum class ErrorCode {
    InvalidOrder,
    InsufficientSamples,
    Range,
    EmptyState,
    SingularHessian,
    Parameter,
    Io,
};

[[nodiscard]] constexpr const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidOrder: return "invalid-order";
    case ErrorCode::InsufficientSamples: return "insufficient-samples";
    case ErrorCode::Range: return "range";
    case ErrorCode::EmptyState: return "empty-state";
    case ErrorCode::SingularHessian: return "singular-hessian";
    case ErrorCode::Parameter: return "parameter";
    case ErrorCode::Io: return "io";
    }
    return "unknown";
}

/// Single exception type for the library; callers branch on code().
/// Range errors carry the first offending sample index.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::optional<std::ptrdiff_t> index = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), _code(code), _index(index) {}

    [[nodiscard]] ErrorCode code() const noexcept { return _code; }
    [[nodiscard]] std::optional<std::ptrdiff_t> index() const noexcept { return _index; }

private:
    ErrorCode                     _code;
    std::optional<std::ptrdiff_t> _index;
};

} // namespace sfo
