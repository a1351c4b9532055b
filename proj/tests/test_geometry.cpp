#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "hrrp/geometry.hpp"

using namespace hrrp;

namespace {
constexpr double kPi = 3.14159265358979323846;

// independent bracketing oracle for lrp
double lrp_oracle(const std::vector<double>& p, double dr, double frac) {
  double peak = 0.0;
  for (double v : p) peak = std::max(peak, v);
  int first = -1, last = -1;
  for (int i = 0; i < int(p.size()); ++i) {
    if (p[i] >= frac * peak) {
      if (first < 0) first = i;
      last = i;
    }
  }
  return (last - first + 1) * dr;
}
}  // namespace

TEST_CASE("wrap_angle maps into [0, 2pi)") {
  CHECK(wrap_angle(-kPi / 2).value() == doctest::Approx(3 * kPi / 2).epsilon(1e-15));
  CHECK(wrap_angle(2 * kPi).value() == doctest::Approx(0.0));
  CHECK(wrap_angle(7.0).value() == doctest::Approx(7.0 - 2 * kPi).epsilon(1e-15));
  CHECK_THROWS_AS(wrap_angle(std::nan("")), std::domain_error);
  CHECK_THROWS_AS(wrap_angle(INFINITY), std::domain_error);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int i = 0; i < 2000; ++i) {
    const double r = u(rng);
    const AngleRad w = wrap_angle(r);
    CHECK(w.value() >= 0.0);
    CHECK(w.value() < kTwoPi);
    // idempotence
    CHECK(wrap_angle(w.value()).value() == w.value());
    // congruence mod 2pi
    const double d = std::remainder(w.value() - r, kTwoPi);
    CHECK(std::fabs(d) < 1e-9);
  }
}

TEST_CASE("wrapped_error is the circle metric") {
  CHECK(wrapped_error(wrap_angle(0.0), wrap_angle(kTwoPi - 0.1)) ==
        doctest::Approx(0.1).epsilon(1e-12));
  CHECK(wrapped_error(wrap_angle(kPi / 2), wrap_angle(kPi / 2)) == 0.0);
  CHECK(wrapped_error(wrap_angle(0.2), wrap_angle(6.0)) ==
        doctest::Approx(kTwoPi - 5.8).epsilon(1e-12));

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int i = 0; i < 2000; ++i) {
    const AngleRad a = wrap_angle(u(rng)), b = wrap_angle(u(rng));
    CHECK(wrapped_error(a, b) == wrapped_error(b, a));
    CHECK(wrapped_error(a, b) <= kPi + 1e-12);
    CHECK(wrapped_error(a, b) >= 0.0);
  }
}

TEST_CASE("los_azimuth quadrants") {
  CHECK(los_azimuth({1, 0}, {0, 0}).value() == doctest::Approx(0.0));
  CHECK(los_azimuth({0, 5}, {0, 0}).value() == doctest::Approx(kPi / 2));
  CHECK(los_azimuth({-1, -1}, {0, 0}).value() == doctest::Approx(5 * kPi / 4));
  CHECK_THROWS_AS(los_azimuth({3, 3}, {3, 3}), std::domain_error);
}

TEST_CASE("aspect_angle wraps the heading/los difference") {
  CHECK(aspect_angle(wrap_angle(0), wrap_angle(0)).value() == 0.0);
  CHECK(aspect_angle(wrap_angle(kPi / 4), wrap_angle(kPi / 2)).value() ==
        doctest::Approx(7 * kPi / 4).epsilon(1e-12));
  CHECK(aspect_angle(wrap_angle(3 * kPi / 2), wrap_angle(kPi / 2)).value() ==
        doctest::Approx(kPi).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int i = 0; i < 1000; ++i) {
    const AngleRad hdg = wrap_angle(u(rng)), theta = wrap_angle(u(rng));
    const AngleRad asp = aspect_angle(hdg, theta);
    // aspect + theta must be congruent to hdg mod 2pi
    const double back = wrap_angle(asp.value() + theta.value()).value();
    CHECK(wrapped_error(wrap_angle(back), hdg) < 1e-12);
  }
}

TEST_CASE("lrp measures the thresholded range extent") {
  CHECK(lrp(std::vector<double>{0, 0, 5, 4, 0, 0}, 1.0, 0.5) == doctest::Approx(2.0));
  CHECK(lrp(std::vector<double>{1, 1, 1, 1}, 0.5, 0.1) == doctest::Approx(2.0));

  const std::vector<double> p{0, 3, 0, 0, 3, 0};
  CHECK(lrp(p, 1.0, 0.5) == doctest::Approx(lrp_oracle(p, 1.0, 0.5)));
  CHECK(lrp(p, 1.0, 0.5) == doctest::Approx(4.0));

  CHECK_THROWS_AS(lrp(std::vector<double>{0, 0, 0}, 1.0, 0.5), std::domain_error);

  // invariant under positive scaling
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> q(32);
  for (auto& v : q) v = u(rng) < 0.3 ? 0.0 : u(rng);
  q[3] = 0.9;  // ensure a peak
  for (double s : {0.1, 3.0, 1234.5}) {
    std::vector<double> qs = q;
    for (auto& v : qs) v *= s;
    CHECK(lrp(qs, 0.25, 0.1) == doctest::Approx(lrp(q, 0.25, 0.1)));
  }
}
