#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "hrrp/geometry.hpp"

namespace hrrp {

struct Scatterer {
  double dx = 0.0;   // meters along-ship, from centroid (bow positive)
  double dy = 0.0;   // meters cross-ship
  double amp = 1.0;  // RCS weight, >= 0
};

struct TargetModel {
  int class_id = 0;
  double length = 0.0;  // meters
  double width = 0.0;   // meters
  std::vector<Scatterer> scatterers;

  /// Checks the geometric invariants: >= 3 scatterers inside the hull box
  /// with at least one near each ship end.
  void validate() const;

  /// Same hull, fore-aft mirrored scatterer layout (dx -> -dx). The mirrored
  /// ship at aspect phi returns exactly the original's profile at pi - phi.
  TargetModel mirrored(int new_class_id) const;
};

struct RenderParams {
  int n_bins = 128;
  double delta_r = 1.0;       // meters per bin
  double noise_sigma = 0.0;   // additive noise std, profile units
  double amp_jitter = 0.0;    // std of the log of the multiplicative jitter
  uint64_t seed = 0;
};

struct TrajectorySample {
  double t = 0.0;        // seconds
  PlanarPoint pos;       // true position
  PlanarPoint meas;      // noisy position measurement
  AngleRad hdg_true;     // instantaneous velocity direction
};

struct ProfileRecord {
  std::vector<double> profile;
  int class_id = 0;
  double t = 0.0;
  AngleRad aspect_ref;
  bool has_aspect_pred = false;
  AngleRad aspect_pred;
};

/// Projects every scatterer onto the line of sight at the given aspect:
/// offset = dx*cos(phi) + dy*sin(phi). Amplitudes pass through.
std::vector<std::pair<double, double>> project_scatterers(
    const TargetModel& target, AngleRad aspect);

/// Renders one profile: projected scatterers are deposited into range bins
/// (nearest-bin, span centered on the centroid), multiplicative lognormal
/// jitter and additive Gaussian noise applied, negatives clamped, then the
/// profile is normalized to unit max.
/// Throws std::invalid_argument when a scatterer falls outside the span.
std::vector<double> render_hrrp(const TargetModel& target, AngleRad aspect,
                                const RenderParams& params,
                                std::mt19937_64& rng);

/// Piecewise-constant turn-rate schedule: omega (rad/s) applies from t_start
/// until the next entry. Entries must be time-sorted.
struct TurnSegment {
  double t_start = 0.0;
  double omega = 0.0;
};

struct TrajectoryParams {
  double speed = 10.0;      // m/s, constant
  std::vector<TurnSegment> turns;  // empty means straight
  double duration = 600.0;  // seconds
  double dt = 30.0;         // seconds between samples
  double meas_sigma = 0.0;  // isotropic position-noise std, meters
  PlanarPoint start{0.0, 0.0};
  double hdg0 = 0.0;        // initial heading, radians
  double t0 = 0.0;          // timestamp of the first sample
};

/// Constant-speed path with piecewise-constant turn rate, integrated exactly
/// per step (circular arcs). Measurements are true positions plus isotropic
/// Gaussian noise.
std::vector<TrajectorySample> gen_trajectory(const TrajectoryParams& params,
                                             std::mt19937_64& rng);

/// Deterministic ship layout: strong scatterers on the four hull corners,
/// bow/stern keel points, and a few interior points. Bow amplitudes dominate
/// stern ones so the layout is fore-aft asymmetric.
TargetModel make_ship_target(int class_id, double length, double width,
                             std::mt19937_64& rng);

}  // namespace hrrp
