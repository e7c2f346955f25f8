#include "recgeo/manifest.hpp"

#include "recgeo/error.hpp"

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>

namespace recgeo {

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string to_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xfu];
    value >>= 4;
  }
  return out;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      hash *= 0x100000001b3ULL;
    }
  }
  return to_hex(hash);
}

RunManifest::RunManifest(std::string command, nlohmann::json config)
    : command_(std::move(command)), timestamp_(utc_timestamp()), config_(std::move(config)) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_[path.string()] = file_digest(path);
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& p : outputs_) outputs[p.string()] = file_digest(p);
  return {{"command", command_},
          {"version", std::string(kVersion)},
          {"timestamp", timestamp_},
          {"config", config_},
          {"inputs", inputs_},
          {"outputs", outputs},
          {"results", results_}};
}

void RunManifest::write(const std::filesystem::path& path) const {
  const auto j = to_json();
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

OutputGuard::~OutputGuard() {
  if (committed_) return;
  for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) {
    std::error_code ec;
    std::filesystem::remove_all(*it, ec);
  }
}

std::filesystem::path OutputGuard::track(const std::filesystem::path& path) {
  paths_.push_back(path);
  return paths_.back();
}

}  // namespace recgeo
