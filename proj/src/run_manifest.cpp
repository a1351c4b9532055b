#include "hrrp/run_manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace fs = std::filesystem;
using nlohmann::json;

namespace hrrp {

std::string sha256_bytes(const void* data, size_t len) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int dlen = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data, len) != 1 ||
      EVP_DigestFinal_ex(ctx, digest, &dlen) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * dlen);
  for (unsigned int i = 0; i < dlen; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  return sha256_bytes(buf.data(), buf.size());
}

std::string dataset_content_hash(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files.push_back(fs::relative(e.path(), dir).generic_string());
    }
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) {
    acc += f;
    acc += ':';
    acc += sha256_file((fs::path(dir) / f).string());
    acc += '\n';
  }
  return sha256_bytes(acc.data(), acc.size());
}

void write_run_manifest(const std::string& path, const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["seed"] = m.seed;
  json ins = json::array(), outs = json::array();
  for (const auto& [p, h] : m.inputs) ins.push_back({{"path", p}, {"sha256", h}});
  for (const auto& [p, h] : m.outputs) outs.push_back({{"path", p}, {"sha256", h}});
  j["inputs"] = ins;
  j["outputs"] = outs;
  j["duration_s"] = m.duration_s;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write run manifest: " + path);
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

}  // namespace hrrp
