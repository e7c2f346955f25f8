#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recgeo {

inline constexpr std::string_view kVersion = "0.1.0";

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::string to_hex(std::uint64_t value);

/// FNV-1a 64 of a file's bytes as 16 lowercase hex digits.
std::string file_digest(const std::filesystem::path& path);

/// Provenance record written next to every command's outputs.
class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::json config);

  void add_input(const std::filesystem::path& path);
  /// Digest is taken when the manifest is written.
  void add_output(const std::filesystem::path& path);
  nlohmann::json& results() noexcept { return results_; }

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::string timestamp_;
  nlohmann::json config_;
  nlohmann::json inputs_ = nlohmann::json::object();
  std::vector<std::filesystem::path> outputs_;
  nlohmann::json results_ = nlohmann::json::object();
};

/// Removes every registered path on destruction unless commit() was called.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard();

  std::filesystem::path track(const std::filesystem::path& path);
  void commit() noexcept { committed_ = true; }

 private:
  std::vector<std::filesystem::path> paths_;
  bool committed_ = false;
};

}  // namespace recgeo
