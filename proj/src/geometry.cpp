#include "hrrp/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace hrrp {

AngleRad wrap_angle(double r) {
  if (!std::isfinite(r)) {
    throw std::domain_error("wrap_angle: non-finite angle");
  }
  double w = r - kTwoPi * std::floor(r / kTwoPi);
  // floor rounding can land exactly on 2*pi for tiny negative inputs
  if (w >= kTwoPi) w -= kTwoPi;
  if (w < 0.0) w = 0.0;
  return AngleRad(w);
}

double wrapped_error(AngleRad a, AngleRad b) {
  double d = std::fabs(a.value() - b.value());
  d = std::fmod(d, kTwoPi);
  return std::min(d, kTwoPi - d);
}

AngleRad los_azimuth(PlanarPoint target, PlanarPoint radar) {
  const double dx = target.x - radar.x;
  const double dy = target.y - radar.y;
  if (dx == 0.0 && dy == 0.0) {
    throw std::domain_error("los_azimuth: target and radar coincide");
  }
  return wrap_angle(std::atan2(dy, dx));
}

AngleRad aspect_angle(AngleRad hdg, AngleRad theta) {
  return wrap_angle(hdg.value() - theta.value());
}

double lrp(std::span<const double> profile, double delta_r,
           double threshold_frac) {
  if (delta_r <= 0.0) throw std::invalid_argument("lrp: delta_r must be > 0");
  if (threshold_frac <= 0.0 || threshold_frac >= 1.0) {
    throw std::invalid_argument("lrp: threshold_frac must be in (0,1)");
  }
  double peak = 0.0;
  for (double v : profile) peak = std::max(peak, v);
  if (peak <= 0.0) throw std::domain_error("lrp: profile has no target return");

  const double thr = threshold_frac * peak;
  std::ptrdiff_t first = -1, last = -1;
  for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(profile.size()); ++i) {
    if (profile[i] >= thr) {
      if (first < 0) first = i;
      last = i;
    }
  }
  return double(last - first + 1) * delta_r;
}

}  // namespace hrrp
