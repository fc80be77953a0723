// Copyright 2026 The mway Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mway {

enum class Errc : std::uint8_t {
    InvalidInput,
    RankZero,
    InvalidRank,
    ShapeError,
    FormatError,
    CorrespondenceError,
    NumericalError,
    LookupError,
    InvalidSpec,
    ConfigError,
};

inline constexpr std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::RankZero: return "RankZero";
    case Errc::InvalidRank: return "InvalidRank";
    case Errc::ShapeError: return "ShapeError";
    case Errc::FormatError: return "FormatError";
    case Errc::CorrespondenceError: return "CorrespondenceError";
    case Errc::NumericalError: return "NumericalError";
    case Errc::LookupError: return "LookupError";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure in the library is reported as an `Error` carrying a category
/// code. Format errors additionally carry the byte offset where decoding failed.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::optional<std::uint64_t> offset = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), offset_(offset) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }
    [[nodiscard]] std::optional<std::uint64_t> offset() const noexcept { return offset_; }

private:
    Errc code_;
    std::optional<std::uint64_t> offset_;
};

} // namespace mway
