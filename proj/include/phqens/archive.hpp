#pragma once

// Versioned, checksummed binary model archive.
//
// Layout: "PHQENS" | u32 version | u8 kind | u64 payload size | payload |
// SHA-256 of all preceding bytes. The payload is a portable binary cereal
// archive of the trained parameters and the configuration snapshot.

#include "phqens/ensemble.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>

namespace phqens {

enum class SystemKind : std::uint8_t { BottomUp = 1, TopDown = 2 };

std::string_view to_string(SystemKind kind);
SystemKind parse_system_kind(std::string_view name);

struct ModelArchive {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t version = kFormatVersion;
  std::variant<BottomUpEnsemble, TopDownMoE> models;
  std::string data_fingerprint;

  SystemKind kind() const {
    return std::holds_alternative<BottomUpEnsemble>(models) ? SystemKind::BottomUp
                                                            : SystemKind::TopDown;
  }
  friend bool operator==(const ModelArchive&, const ModelArchive&) = default;
};

std::string serialize_archive(const ModelArchive& archive);

/// Verifies magic, checksum, version and (when given) the expected kind, in
/// that order.
ModelArchive deserialize_archive(std::string_view bytes,
                                 std::optional<SystemKind> expected = std::nullopt);

void save_model(const ModelArchive& archive, const std::filesystem::path& path);
ModelArchive load_model(const std::filesystem::path& path,
                        std::optional<SystemKind> expected = std::nullopt);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Content hash over the given files, in order.
std::string fingerprint_files(std::span<const std::filesystem::path> files);

}  // namespace phqens
