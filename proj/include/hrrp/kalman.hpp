#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "hrrp/geometry.hpp"
#include "hrrp/simulator.hpp"

namespace hrrp {

/// Constant-velocity track state (x, y, vx, vy) with covariance.
struct TrackState {
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();

  double speed() const;
  PlanarPoint position() const { return {x, y}; }
};

struct KfParams {
  double q = 0.08;   // process-noise intensity, m^2/s^3
  double r = 900.0;  // measurement-noise variance, m^2
  double p0 = 10.0;  // initial covariance scale

  void validate() const;
};

struct KfStepResult {
  TrackState state;
  bool measurement_used = true;
};

/// Heading below this speed is considered noise; callers hold the last
/// valid heading instead.
inline constexpr double kLowSpeedFloor = 0.2;  // m/s

/// Position from the first measurement, zero velocity, diagonal covariance
/// with the velocity block inflated x100.
TrackState kf_init(PlanarPoint first_meas, const KfParams& params);

/// One predict/update cycle with white-acceleration process noise and a
/// position-only measurement. A non-finite measurement is rejected and the
/// step degrades to predict-only (flagged in the result).
KfStepResult kf_step(const TrackState& state, double dt, PlanarPoint meas,
                     const KfParams& params);

/// Heading from the velocity estimate. Empty below the low-speed floor.
std::optional<AngleRad> try_heading(const TrackState& state);

/// Throwing variant of try_heading (std::domain_error below the floor).
AngleRad estimate_heading(const TrackState& state);

/// Heading from two successive positions. Throws on coincident points.
AngleRad heading_from_positions(PlanarPoint prev, PlanarPoint curr);

enum class HeadingMethod { kVelocity, kPositionDiff };

struct AspectEstimate {
  double t = 0.0;
  AngleRad aspect;
  bool valid = false;  // false until the filter has a usable heading
};

/// Causal aspect series: filters the measurements in time order and at each
/// step emits wrap(heading - los_azimuth(filtered position, radar)). The
/// estimate at step i uses no sample after i. Low-speed steps hold the last
/// valid heading. Throws std::invalid_argument on unsorted timestamps or
/// fewer than 2 samples.
std::vector<AspectEstimate> estimate_aspect_series(
    std::span<const TrajectorySample> samples, PlanarPoint radar,
    const KfParams& params, HeadingMethod method = HeadingMethod::kVelocity);

/// Splits a time-sorted sample list wherever the gap between consecutive
/// timestamps exceeds max_gap seconds (default 20 minutes).
std::vector<std::vector<TrajectorySample>> segment_trajectory(
    std::span<const TrajectorySample> samples, double max_gap = 1200.0);

struct EstimatorReport {
  int k_min = 2, k_max = 10;
  int segments_evaluated = 0;
  int segments_skipped = 0;
  std::vector<double> mean_error_per_k;  // indexed k - k_min, radians
  std::vector<double> segment_scores;    // per-segment mean over k, radians
  double median = 0.0;
  double mean = 0.0;
  std::vector<double> deciles;  // 10%..90% quantiles of segment scores
  double worst_decile_mean = 0.0;
};

/// The context-length protocol: for each segment and each k in [k_min,k_max],
/// runs the causal estimator on the first k samples and scores the wrapped
/// error of the k-th estimate against the reference aspect (true heading and
/// true position). Errors are averaged over k to give one score per segment.
/// Segments shorter than k_max are skipped and counted.
EstimatorReport evaluate_estimator(
    const std::vector<std::vector<TrajectorySample>>& segments,
    PlanarPoint radar, const KfParams& params, int k_min = 2, int k_max = 10,
    HeadingMethod method = HeadingMethod::kVelocity);

}  // namespace hrrp
