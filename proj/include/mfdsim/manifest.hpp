#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mfdsim {

inline constexpr std::string_view kSoftwareVersion = "1.0.0";

std::string sha256_hex(std::string_view bytes);
/// Throws std::runtime_error when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string path;  // relative to the manifest directory, or absolute for inputs outside it
  std::string sha256;
};

struct RunManifest {
  std::string config_hash;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::string software_version{kSoftwareVersion};
  /// Wall-clock seconds per stage; empty unless timings were requested.
  std::vector<std::pair<std::string, double>> timings;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Digests of `files` (relative to `dir`).
std::vector<FileDigest> digest_files(const std::filesystem::path& dir, const std::vector<std::string>& files);

/// Re-hashes every listed file. Returns one message per missing or changed file.
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path);

}  // namespace mfdsim
