#include "hrrp/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hrrp {

double TrackState::speed() const { return std::hypot(vx, vy); }

void KfParams::validate() const {
  if (q <= 0.0 || r <= 0.0 || p0 <= 0.0) {
    throw std::invalid_argument("KfParams: q, r, p0 must be > 0");
  }
}

TrackState kf_init(PlanarPoint first_meas, const KfParams& params) {
  params.validate();
  TrackState s;
  s.x = first_meas.x;
  s.y = first_meas.y;
  s.cov = Eigen::Vector4d(params.p0, params.p0, 100.0 * params.p0,
                          100.0 * params.p0)
              .asDiagonal();
  return s;
}

KfStepResult kf_step(const TrackState& state, double dt, PlanarPoint meas,
                     const KfParams& params) {
  if (dt <= 0.0) throw std::invalid_argument("kf_step: dt must be > 0");
  params.validate();

  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;

  const double dt2 = dt * dt;
  const double a = dt * dt2 / 3.0, b = dt2 / 2.0;
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  Q(0, 0) = Q(1, 1) = params.q * a;
  Q(2, 2) = Q(3, 3) = params.q * dt;
  Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = params.q * b;

  Eigen::Vector4d s(state.x, state.y, state.vx, state.vy);
  s = F * s;
  Eigen::Matrix4d P = F * state.cov * F.transpose() + Q;

  KfStepResult out;
  const bool finite = std::isfinite(meas.x) && std::isfinite(meas.y);
  if (finite) {
    Eigen::Matrix<double, 2, 4> H = Eigen::Matrix<double, 2, 4>::Zero();
    H(0, 0) = H(1, 1) = 1.0;
    const Eigen::Matrix2d R = params.r * Eigen::Matrix2d::Identity();

    const Eigen::Vector2d innov = Eigen::Vector2d(meas.x, meas.y) - H * s;
    const Eigen::Matrix2d S = H * P * H.transpose() + R;
    const Eigen::Matrix<double, 4, 2> K = P * H.transpose() * S.inverse();

    s += K * innov;
    // Joseph form keeps the posterior symmetric PSD
    const Eigen::Matrix4d IKH = Eigen::Matrix4d::Identity() - K * H;
    P = IKH * P * IKH.transpose() + K * R * K.transpose();
  }
  P = 0.5 * (P + P.transpose()).eval();

  out.state.x = s(0);
  out.state.y = s(1);
  out.state.vx = s(2);
  out.state.vy = s(3);
  out.state.cov = P;
  out.measurement_used = finite;
  return out;
}

std::optional<AngleRad> try_heading(const TrackState& state) {
  if (state.speed() < kLowSpeedFloor) return std::nullopt;
  return wrap_angle(std::atan2(state.vy, state.vx));
}

AngleRad estimate_heading(const TrackState& state) {
  auto h = try_heading(state);
  if (!h) throw std::domain_error("estimate_heading: speed below floor");
  return *h;
}

AngleRad heading_from_positions(PlanarPoint prev, PlanarPoint curr) {
  if (prev.x == curr.x && prev.y == curr.y) {
    throw std::domain_error("heading_from_positions: coincident points");
  }
  return wrap_angle(std::atan2(curr.y - prev.y, curr.x - prev.x));
}

std::vector<AspectEstimate> estimate_aspect_series(
    std::span<const TrajectorySample> samples, PlanarPoint radar,
    const KfParams& params, HeadingMethod method) {
  if (samples.size() < 2) {
    throw std::invalid_argument("estimate_aspect_series: need >= 2 samples");
  }
  for (size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].t <= samples[i - 1].t) {
      throw std::invalid_argument(
          "estimate_aspect_series: timestamps must strictly increase");
    }
  }

  std::vector<AspectEstimate> out;
  out.reserve(samples.size());

  TrackState state = kf_init(samples[0].meas, params);
  std::optional<AngleRad> heading;
  std::optional<PlanarPoint> prev_pos;

  for (size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) {
      state = kf_step(state, samples[i].t - samples[i - 1].t, samples[i].meas,
                      params)
                  .state;
    }
    const PlanarPoint pos = state.position();
    if (method == HeadingMethod::kVelocity) {
      if (auto h = try_heading(state)) heading = h;
    } else if (prev_pos &&
               (prev_pos->x != pos.x || prev_pos->y != pos.y)) {
      const double step = std::hypot(pos.x - prev_pos->x, pos.y - prev_pos->y);
      const double dt = i > 0 ? samples[i].t - samples[i - 1].t : 1.0;
      if (step / dt >= kLowSpeedFloor) {
        heading = heading_from_positions(*prev_pos, pos);
      }
    }
    prev_pos = pos;

    AspectEstimate est;
    est.t = samples[i].t;
    est.valid = heading.has_value();
    if (heading) {
      est.aspect = aspect_angle(*heading, los_azimuth(pos, radar));
    }
    out.push_back(est);
  }
  return out;
}

std::vector<std::vector<TrajectorySample>> segment_trajectory(
    std::span<const TrajectorySample> samples, double max_gap) {
  std::vector<std::vector<TrajectorySample>> segments;
  if (samples.empty()) return segments;
  for (size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].t < samples[i - 1].t) {
      throw std::invalid_argument("segment_trajectory: input not time-sorted");
    }
  }
  segments.emplace_back();
  segments.back().push_back(samples[0]);
  for (size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].t - samples[i - 1].t > max_gap) segments.emplace_back();
    segments.back().push_back(samples[i]);
  }
  return segments;
}

namespace {

double quantile(std::vector<double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double idx = p * double(sorted.size() - 1);
  const size_t lo = size_t(std::floor(idx));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = idx - double(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

}  // namespace

EstimatorReport evaluate_estimator(
    const std::vector<std::vector<TrajectorySample>>& segments,
    PlanarPoint radar, const KfParams& params, int k_min, int k_max,
    HeadingMethod method) {
  if (k_min < 2 || k_max < k_min) {
    throw std::invalid_argument("evaluate_estimator: need 2 <= k_min <= k_max");
  }
  EstimatorReport rep;
  rep.k_min = k_min;
  rep.k_max = k_max;
  const int n_k = k_max - k_min + 1;
  std::vector<double> k_err_sum(n_k, 0.0);
  std::vector<int> k_err_cnt(n_k, 0);

  for (const auto& seg : segments) {
    if (int(seg.size()) < k_max) {
      ++rep.segments_skipped;
      continue;
    }
    double score_sum = 0.0;
    int score_cnt = 0;
    for (int k = k_min; k <= k_max; ++k) {
      const auto est = estimate_aspect_series(
          std::span(seg.data(), size_t(k)), radar, params, method);
      const auto& e = est[k - 1];
      if (!e.valid) continue;
      const auto& s = seg[k - 1];
      const AngleRad ref = aspect_angle(s.hdg_true, los_azimuth(s.pos, radar));
      const double err = wrapped_error(e.aspect, ref);
      score_sum += err;
      ++score_cnt;
      k_err_sum[k - k_min] += err;
      ++k_err_cnt[k - k_min];
    }
    if (score_cnt == 0) {
      ++rep.segments_skipped;
      continue;
    }
    rep.segment_scores.push_back(score_sum / score_cnt);
    ++rep.segments_evaluated;
  }

  rep.mean_error_per_k.resize(n_k, 0.0);
  for (int i = 0; i < n_k; ++i) {
    if (k_err_cnt[i] > 0) rep.mean_error_per_k[i] = k_err_sum[i] / k_err_cnt[i];
  }

  if (!rep.segment_scores.empty()) {
    std::vector<double> sorted = rep.segment_scores;
    std::sort(sorted.begin(), sorted.end());
    rep.median = quantile(sorted, 0.5);
    rep.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
               double(sorted.size());
    for (int d = 1; d <= 9; ++d) rep.deciles.push_back(quantile(sorted, 0.1 * d));
    const size_t cut = sorted.size() - sorted.size() / 10;
    const size_t n_worst = std::max<size_t>(1, sorted.size() - cut);
    rep.worst_decile_mean =
        std::accumulate(sorted.end() - n_worst, sorted.end(), 0.0) /
        double(n_worst);
  }
  return rep;
}

}  // namespace hrrp
