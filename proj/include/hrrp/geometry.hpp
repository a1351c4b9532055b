#pragma once

#include <cstddef>
#include <span>

namespace hrrp {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Angle wrapped to [0, 2*pi). Construct through wrap_angle() to keep the
/// invariant; the default constructor gives 0.
class AngleRad {
 public:
  AngleRad() = default;
  double value() const { return value_; }

 private:
  friend AngleRad wrap_angle(double r);
  explicit AngleRad(double v) : value_(v) {}
  double value_ = 0.0;
};

struct PlanarPoint {
  double x = 0.0;  // meters east
  double y = 0.0;  // meters north
};

/// Wraps any finite angle to [0, 2*pi) via r - 2*pi*floor(r / 2*pi).
/// Throws std::domain_error on non-finite input.
AngleRad wrap_angle(double r);

/// Metric distance on the circle: min(|a-b| mod 2pi, 2pi - |a-b| mod 2pi).
/// Symmetric, in [0, pi].
double wrapped_error(AngleRad a, AngleRad b);

/// Bearing from radar to target, counterclockwise from east.
/// Throws std::domain_error when the points coincide.
AngleRad los_azimuth(PlanarPoint target, PlanarPoint radar);

/// Aspect angle: wrap(heading - los_azimuth).
AngleRad aspect_angle(AngleRad hdg, AngleRad theta);

/// Length on Range Profile: range extent of the bins at or above
/// threshold_frac * max(profile), in meters.
/// Throws std::domain_error when the profile has no positive peak.
double lrp(std::span<const double> profile, double delta_r,
           double threshold_frac = 0.1);

}  // namespace hrrp
