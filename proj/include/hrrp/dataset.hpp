#pragma once

#include <string>
#include <vector>

#include "hrrp/config.hpp"
#include "hrrp/simulator.hpp"

namespace hrrp {

struct DatasetConfig {
  int n_classes = 10;
  std::string preset = "ambiguous";  // ambiguous | distinct
  int trajectories_per_class = 2;
  int samples_per_trajectory = 100;
  int n_bins = 128;
  double delta_r = 1.0;
  double noise_sigma = 0.02;
  double amp_jitter = 0.1;
  PlanarPoint radar{0.0, -40000.0};
  double dt = 30.0;
  double meas_sigma = 30.0;
  double speed_min = 6.0, speed_max = 14.0;
  double turn_prob = 0.35;         // fraction of trajectories with a turn
  double turn_max = 0.016;         // rad/s
  std::vector<double> length_pool;  // empty -> preset default
  double width_frac = 0.14;         // width = width_frac * length
  uint64_t seed = 0;

  static DatasetConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

/// A generated or loaded dataset. Records are stored with the same 32-bit
/// precision they have on disk, so the in-memory and round-tripped views are
/// identical. Trajectories keep full precision (they feed the Kalman filter).
struct Dataset {
  DatasetConfig config;
  std::vector<TargetModel> classes;
  std::vector<ProfileRecord> records;
  std::vector<int> record_traj;  // global trajectory id per record
  std::vector<std::vector<TrajectorySample>> trajectories;
  std::vector<int> traj_class;
  std::vector<bool> pred_warmup;  // per record, set by attach

  std::vector<int> labels() const;
};

/// Builds the synthetic corpus. The "ambiguous" preset creates mirror pairs:
/// class 2g+1 is class 2g with the scatterer layout flipped fore-aft, so the
/// two ships trace identical profile sets over aspect (profile at phi equals
/// the twin's at pi - phi) and are only separable given the angle. Lengths
/// are drawn from a small shared pool. The "distinct" preset gives every
/// class its own length and layout.
Dataset build_dataset(const DatasetConfig& config);

void write_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectorySample>& samples);
std::vector<TrajectorySample> read_trajectory_csv(const std::string& path);

/// Predicted-aspect sidecar: record_index,aspect_pred,warmup rows.
void write_aspects_csv(const std::string& path, const Dataset& ds);
void load_aspects_csv(const std::string& path, Dataset& ds);

}  // namespace hrrp
