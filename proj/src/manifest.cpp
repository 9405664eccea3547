#include "mfdsim/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "mfdsim/errors.hpp"

namespace mfdsim {

namespace {

struct Hasher {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

  Hasher() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  }
  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx.get(), data, n) != 1) throw std::runtime_error("sha256 update failed");
  }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) throw std::runtime_error("sha256 final failed");
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(digits[md[i] >> 4]);
      out.push_back(digits[md[i] & 15]);
    }
    return out;
  }
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Hasher h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Hasher h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

nlohmann::json to_json(const RunManifest& m) {
  auto list = [](const std::vector<FileDigest>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& f : v) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return a;
  };
  nlohmann::json j = {{"config_hash", m.config_hash},
                      {"software_version", m.software_version},
                      {"inputs", list(m.inputs)},
                      {"outputs", list(m.outputs)}};
  if (!m.timings.empty()) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& [stage, s] : m.timings) t.push_back({{"stage", stage}, {"seconds", s}});
    j["timings"] = t;
  }
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.config_hash = j.at("config_hash").get<std::string>();
    m.software_version = j.at("software_version").get<std::string>();
    for (const auto& f : j.at("inputs")) m.inputs.push_back({f.at("path"), f.at("sha256")});
    for (const auto& f : j.at("outputs")) m.outputs.push_back({f.at("path"), f.at("sha256")});
    if (j.contains("timings"))
      for (const auto& t : j.at("timings")) m.timings.emplace_back(t.at("stage"), t.at("seconds"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest.json", 0, e.what());
  }
}

std::vector<FileDigest> digest_files(const std::filesystem::path& dir, const std::vector<std::string>& files) {
  std::vector<FileDigest> out;
  for (const auto& f : files) out.push_back({f, sha256_file(dir / f)});
  return out;
}

std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ParseError(manifest_path.string(), 0, "cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest_path.string(), 0, e.what());
  }
  const RunManifest m = manifest_from_json(j);
  const auto dir = manifest_path.parent_path();
  std::vector<std::string> problems;
  auto check = [&](const FileDigest& f) {
    const std::filesystem::path rel(f.path);
    const std::filesystem::path p = rel.is_absolute() ? rel : dir / rel;
    if (!std::filesystem::exists(p)) {
      problems.push_back(f.path + ": missing");
      return;
    }
    if (sha256_file(p) != f.sha256) problems.push_back(f.path + ": digest mismatch");
  };
  for (const auto& f : m.inputs) check(f);
  for (const auto& f : m.outputs) check(f);
  return problems;
}

}  // namespace mfdsim
