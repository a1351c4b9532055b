#pragma once

#include <string>
#include <utility>
#include <vector>

namespace hrrp {

std::string sha256_bytes(const void* data, size_t len);
std::string sha256_file(const std::string& path);

/// Content hash of a whole dataset directory: the concatenated hashes of its
/// payload files (manifest, records, trajectories) in sorted path order.
std::string dataset_content_hash(const std::string& dir);

/// Provenance record written by every CLI command next to its output.
struct RunManifest {
  std::string command;
  std::string config_path;
  uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
  double duration_s = 0.0;
};

void write_run_manifest(const std::string& path, const RunManifest& m);

}  // namespace hrrp
