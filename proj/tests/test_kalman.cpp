#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "corpus.hpp"
#include "hrrp/kalman.hpp"
#include "hrrp/rng.hpp"

using namespace hrrp;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

// independent textbook filter (plain covariance update, no Joseph form)
struct NaiveKf {
  Eigen::Vector4d s;
  Eigen::Matrix4d P;

  void init(PlanarPoint m, const KfParams& p) {
    s << m.x, m.y, 0, 0;
    P = Eigen::Vector4d(p.p0, p.p0, 100 * p.p0, 100 * p.p0).asDiagonal();
  }
  void step(double dt, PlanarPoint m, const KfParams& p) {
    Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
    F(0, 2) = dt;
    F(1, 3) = dt;
    Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
    Q(0, 0) = Q(1, 1) = p.q * dt * dt * dt / 3.0;
    Q(2, 2) = Q(3, 3) = p.q * dt;
    Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = p.q * dt * dt / 2.0;
    s = F * s;
    P = F * P * F.transpose() + Q;
    Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
    H(0, 0) = H(1, 1) = 1;
    const Eigen::Matrix2d S =
        H * P * H.transpose() + p.r * Eigen::Matrix2d::Identity();
    const Eigen::Matrix<double, 4, 2> K = P * H.transpose() * S.inverse();
    s += K * (Eigen::Vector2d(m.x, m.y) - H * s);
    P = (Eigen::Matrix4d::Identity() - K * H) * P;
  }
};
}  // namespace

TEST_CASE("kf_init places the state on the first measurement") {
  KfParams p;
  const auto s = kf_init({0, 0}, p);
  CHECK(s.x == 0.0);
  CHECK(s.y == 0.0);
  CHECK(s.vx == 0.0);
  CHECK(s.vy == 0.0);
  for (int i = 0; i < 4; ++i) CHECK(s.cov(i, i) > 0.0);
  CHECK(s.cov(2, 2) == doctest::Approx(100.0 * p.p0));

  const auto s2 = kf_init({5, -3}, p);
  CHECK(s2.x == 5.0);
  CHECK(s2.y == -3.0);
  CHECK((s2.cov - s.cov).norm() == 0.0);

  KfParams bad;
  bad.q = 0.0;
  CHECK_THROWS_AS(kf_init({0, 0}, bad), std::invalid_argument);
}

TEST_CASE("kf_step matches an independent textbook filter") {
  KfParams p;
  p.q = 0.1;
  p.r = 25.0;
  p.p0 = 10.0;
  TrackState st = kf_init({0, 0}, p);
  NaiveKf naive;
  naive.init({0, 0}, p);

  auto rng = make_rng(21, "kf_oracle");
  std::normal_distribution<double> g(0.0, 5.0);
  for (int i = 1; i <= 50; ++i) {
    const PlanarPoint m{10.0 * i + g(rng), 3.0 * i + g(rng)};
    st = kf_step(st, 1.0, m, p).state;
    naive.step(1.0, m, p);
    CHECK(st.x == doctest::Approx(naive.s(0)).epsilon(1e-9));
    CHECK(st.vx == doctest::Approx(naive.s(2)).epsilon(1e-9));
    CHECK((st.cov - naive.P).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("noiseless straight line: velocity within 1% after 10 steps") {
  KfParams p;
  p.r = 1.0;
  TrackState st = kf_init({0, 0}, p);
  for (int i = 1; i <= 10; ++i) {
    st = kf_step(st, 1.0, {10.0 * i, 0.0}, p).state;
  }
  CHECK(std::fabs(st.vx - 10.0) / 10.0 < 0.01);
  CHECK(std::fabs(st.vy) < 0.1);
}

TEST_CASE("zero innovation leaves the position untouched") {
  KfParams p;
  TrackState st = kf_init({100, 50}, p);
  st.vx = 4.0;
  st.vy = -2.0;
  const PlanarPoint predicted{st.x + st.vx * 2.0, st.y + st.vy * 2.0};
  const auto out = kf_step(st, 2.0, predicted, p).state;
  CHECK(out.x == doctest::Approx(predicted.x).epsilon(1e-12));
  CHECK(out.y == doctest::Approx(predicted.y).epsilon(1e-12));
}

TEST_CASE("update sub-step never increases the covariance trace") {
  KfParams p;
  p.r = 100.0;
  TrackState st = kf_init({0, 0}, p);
  auto rng = make_rng(31, "kf_trace");
  std::normal_distribution<double> g(0.0, 10.0);
  for (int i = 1; i <= 20; ++i) {
    // predict-only via the rejected-measurement path
    const auto pred =
        kf_step(st, 1.0, {std::nan(""), 0.0}, p);
    CHECK_FALSE(pred.measurement_used);
    const auto full = kf_step(st, 1.0, {5.0 * i + g(rng), g(rng)}, p);
    CHECK(full.measurement_used);
    CHECK(full.state.cov.trace() <= pred.state.cov.trace() + 1e-9);
    st = full.state;
  }
}

TEST_CASE("heading estimators") {
  TrackState st;
  st.vx = 1;
  st.vy = 0;
  CHECK(estimate_heading(st).value() == doctest::Approx(0.0));
  st.vx = 0;
  st.vy = -2;
  CHECK(estimate_heading(st).value() == doctest::Approx(3 * kPi / 2));
  st.vx = 1;
  st.vy = 1;
  CHECK(estimate_heading(st).value() == doctest::Approx(kPi / 4));
  st.vx = 0.05;
  st.vy = 0.05;  // below the 0.2 m/s floor
  CHECK_THROWS_AS(estimate_heading(st), std::domain_error);
  CHECK_FALSE(try_heading(st).has_value());

  CHECK(heading_from_positions({0, 0}, {1, 0}).value() == doctest::Approx(0.0));
  CHECK(heading_from_positions({0, 0}, {0, 1}).value() == doctest::Approx(kPi / 2));
  CHECK(heading_from_positions({2, 2}, {1, 1}).value() ==
        doctest::Approx(5 * kPi / 4));
  CHECK_THROWS_AS(heading_from_positions({1, 1}, {1, 1}), std::domain_error);
}

TEST_CASE("aspect series on a noiseless straight track") {
  TrajectoryParams tp;
  tp.speed = 10.0;
  tp.dt = 10.0;
  tp.duration = 200.0;
  auto rng = make_rng(41, "traj");
  const auto samples = gen_trajectory(tp, rng);  // heading east
  const PlanarPoint radar{0.0, 50000.0};         // far north

  KfParams p;
  p.r = 1.0;
  const auto est = estimate_aspect_series(samples, radar, p);
  REQUIRE(est.size() == samples.size());
  CHECK_FALSE(est[0].valid);

  for (size_t i = 5; i < samples.size(); ++i) {
    REQUIRE(est[i].valid);
    const AngleRad ref = aspect_angle(samples[i].hdg_true,
                                      los_azimuth(samples[i].pos, radar));
    CHECK(wrapped_error(est[i].aspect, ref) < 1e-3);
  }

  SUBCASE("position-difference heading agrees on straight tracks") {
    const auto est2 =
        estimate_aspect_series(samples, radar, p, HeadingMethod::kPositionDiff);
    for (size_t i = 5; i < samples.size(); ++i) {
      REQUIRE(est2[i].valid);
      CHECK(wrapped_error(est2[i].aspect, est[i].aspect) < 1e-3);
    }
  }

  SUBCASE("mirroring the radar side flips the aspect by pi") {
    // track along the radar axis keeps the two LOS directions exactly
    // opposed at every step
    TrajectoryParams north = tp;
    north.hdg0 = kPi / 2;
    auto rng2 = make_rng(42, "traj");
    const auto axis_track = gen_trajectory(north, rng2);
    const auto a = estimate_aspect_series(axis_track, {0.0, 50000.0}, p);
    const auto b = estimate_aspect_series(axis_track, {0.0, -50000.0}, p);
    for (size_t i = 5; i < axis_track.size(); ++i) {
      const double flipped = a[i].aspect.value() + kPi;
      CHECK(wrapped_error(b[i].aspect, wrap_angle(flipped)) < 1e-9);
    }
  }

  SUBCASE("unsorted timestamps are rejected") {
    auto shuffled = samples;
    std::swap(shuffled[2], shuffled[5]);
    CHECK_THROWS_AS(estimate_aspect_series(shuffled, radar, p),
                    std::invalid_argument);
  }

  SUBCASE("too few samples are rejected") {
    CHECK_THROWS_AS(
        estimate_aspect_series(std::span(samples.data(), 1), radar, p),
        std::invalid_argument);
  }
}

TEST_CASE("causality: truncation preserves earlier estimates bit-exactly") {
  const auto segs = testcorpus::make_segments(5, 12, false, 99, 0.7);
  const auto kf = testcorpus::default_kf_params();
  const PlanarPoint radar{0.0, -40000.0};
  for (const auto& seg : segs) {
    const auto full = estimate_aspect_series(seg, radar, kf);
    for (size_t k = 2; k <= seg.size(); ++k) {
      const auto part =
          estimate_aspect_series(std::span(seg.data(), k), radar, kf);
      for (size_t i = 0; i < k; ++i) {
        CHECK(part[i].valid == full[i].valid);
        if (part[i].valid) {
          CHECK(part[i].aspect.value() == full[i].aspect.value());
        }
      }
    }
  }
}

TEST_CASE("translation invariance of aspect estimates") {
  const auto segs = testcorpus::make_segments(3, 12, false, 7, 0.5);
  const auto kf = testcorpus::default_kf_params();
  const PlanarPoint radar{1000.0, -30000.0};
  const double shift_x = 52341.0, shift_y = -91724.0;
  for (const auto& seg : segs) {
    auto moved = seg;
    for (auto& s : moved) {
      s.pos.x += shift_x;
      s.pos.y += shift_y;
      s.meas.x += shift_x;
      s.meas.y += shift_y;
    }
    const auto a = estimate_aspect_series(seg, radar, kf);
    const auto b = estimate_aspect_series(
        moved, {radar.x + shift_x, radar.y + shift_y}, kf);
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i].valid) {
        CHECK(wrapped_error(a[i].aspect, b[i].aspect) < 1e-10);
      }
    }
  }
}

TEST_CASE("covariance stays symmetric PSD over many random steps") {
  KfParams p;
  p.q = 0.5;
  p.r = 50.0;
  TrackState st = kf_init({0, 0}, p);
  auto rng = make_rng(77, "kf_psd");
  std::normal_distribution<double> g(0.0, 30.0);
  std::uniform_real_distribution<double> udt(0.1, 60.0);
  for (int i = 0; i < 10000; ++i) {
    st = kf_step(st, udt(rng), {g(rng), g(rng)}, p).state;
    CHECK((st.cov - st.cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    if (i % 100 == 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(st.cov);
      CHECK(es.eigenvalues().minCoeff() >= -1e-9);
    }
  }
}

TEST_CASE("segment_trajectory splits on gaps over 20 minutes") {
  std::vector<TrajectorySample> s(10);
  for (int i = 0; i < 10; ++i) s[i].t = 100.0 * i;

  auto segs = segment_trajectory(s);
  CHECK(segs.size() == 1);
  CHECK(segs[0].size() == 10);

  s[6].t = s[5].t + 1500.0;
  for (int i = 7; i < 10; ++i) s[i].t = s[6].t + 100.0 * (i - 6);
  segs = segment_trajectory(s);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].size() == 6);
  CHECK(segs[1].size() == 4);
  // concatenation preserves the input
  size_t total = 0;
  for (const auto& seg : segs) total += seg.size();
  CHECK(total == s.size());

  CHECK(segment_trajectory(std::span<const TrajectorySample>{}).empty());

  std::swap(s[1], s[2]);
  CHECK_THROWS_AS(segment_trajectory(s), std::invalid_argument);
}

TEST_CASE("evaluate_estimator protocol") {
  const PlanarPoint radar{0.0, -40000.0};

  SUBCASE("noiseless segments score essentially zero") {
    auto segs = testcorpus::make_segments(200, 12, true, 3);
    const auto rep =
        evaluate_estimator(segs, radar, testcorpus::default_kf_params(true));
    CHECK(rep.segments_evaluated == 200);
    CHECK(rep.median < 0.2 * kDeg);
  }

  SUBCASE("short segments are skipped and counted") {
    auto segs = testcorpus::make_segments(10, 12, true, 5);
    segs.push_back(testcorpus::make_segments(1, 5, true, 6)[0]);
    const auto rep =
        evaluate_estimator(segs, radar, testcorpus::default_kf_params(true));
    CHECK(rep.segments_evaluated == 10);
    CHECK(rep.segments_skipped == 1);
  }

  SUBCASE("error decreases with context and grows with noise") {
    auto segs = testcorpus::make_segments(1000, 12, false, 11);
    const auto kf = testcorpus::default_kf_params();
    const auto rep = evaluate_estimator(segs, radar, kf);
    CHECK(rep.mean_error_per_k.back() <= rep.mean_error_per_k.front());

    // doubling measurement noise must not reduce the median error
    auto noisier = segs;
    auto rng = make_rng(13, "extra_noise");
    const DatasetConfig defaults{};
    std::normal_distribution<double> g(0.0, defaults.meas_sigma);
    for (auto& seg : noisier) {
      for (auto& s : seg) {
        // adding an independent copy of the noise doubles the variance-ish
        s.meas.x += g(rng);
        s.meas.y += g(rng);
      }
    }
    const auto rep2 = evaluate_estimator(noisier, radar, kf);
    CHECK(rep2.median >= rep.median);
  }

  SUBCASE("bad k range is rejected") {
    auto segs = testcorpus::make_segments(2, 12, true, 1);
    CHECK_THROWS_AS(evaluate_estimator(segs, radar,
                                       testcorpus::default_kf_params(), 5, 3),
                    std::invalid_argument);
  }
}
