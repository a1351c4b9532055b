#include "hrrp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hrrp {

void TargetModel::validate() const {
  if (length <= 0.0 || width <= 0.0) {
    throw std::invalid_argument("TargetModel: non-positive dimensions");
  }
  if (scatterers.size() < 3) {
    throw std::invalid_argument("TargetModel: needs at least 3 scatterers");
  }
  const double half_l = 0.5 * length;
  const double half_w = 0.5 * width;
  bool near_bow = false, near_stern = false;
  for (const auto& s : scatterers) {
    if (std::fabs(s.dx) > half_l + 1e-9 || std::fabs(s.dy) > half_w + 1e-9) {
      throw std::invalid_argument("TargetModel: scatterer outside hull box");
    }
    if (s.amp < 0.0) {
      throw std::invalid_argument("TargetModel: negative amplitude");
    }
    if (s.dx >= 0.4 * half_l) near_bow = true;
    if (s.dx <= -0.4 * half_l) near_stern = true;
  }
  if (!near_bow || !near_stern) {
    throw std::invalid_argument("TargetModel: missing end scatterers");
  }
}

TargetModel TargetModel::mirrored(int new_class_id) const {
  TargetModel m = *this;
  m.class_id = new_class_id;
  for (auto& s : m.scatterers) s.dx = -s.dx;
  return m;
}

std::vector<std::pair<double, double>> project_scatterers(
    const TargetModel& target, AngleRad aspect) {
  const double c = std::cos(aspect.value());
  const double s = std::sin(aspect.value());
  std::vector<std::pair<double, double>> out;
  out.reserve(target.scatterers.size());
  for (const auto& sc : target.scatterers) {
    out.emplace_back(sc.dx * c + sc.dy * s, sc.amp);
  }
  return out;
}

std::vector<double> render_hrrp(const TargetModel& target, AngleRad aspect,
                                const RenderParams& params,
                                std::mt19937_64& rng) {
  if (params.n_bins < 2 || params.delta_r <= 0.0 || params.noise_sigma < 0.0 ||
      params.amp_jitter < 0.0) {
    throw std::invalid_argument("render_hrrp: bad render params");
  }
  const double span = params.n_bins * params.delta_r;
  std::vector<double> profile(params.n_bins, 0.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (const auto& [offset, amp] : project_scatterers(target, aspect)) {
    const int bin = int(std::floor((offset + 0.5 * span) / params.delta_r));
    if (bin < 0 || bin >= params.n_bins) {
      throw std::invalid_argument(
          "render_hrrp: scatterer outside range span (n_bins too small)");
    }
    double a = amp;
    if (params.amp_jitter > 0.0) a *= std::exp(params.amp_jitter * gauss(rng));
    profile[bin] += a;
  }
  if (params.noise_sigma > 0.0) {
    for (auto& v : profile) v += params.noise_sigma * gauss(rng);
  }
  for (auto& v : profile) v = std::max(v, 0.0);
  const double peak = *std::max_element(profile.begin(), profile.end());
  if (peak > 0.0) {
    for (auto& v : profile) v /= peak;
  }
  return profile;
}

namespace {

double omega_at(const std::vector<TurnSegment>& turns, double t) {
  double w = 0.0;
  for (const auto& seg : turns) {
    if (t >= seg.t_start) w = seg.omega;
  }
  return w;
}

}  // namespace

std::vector<TrajectorySample> gen_trajectory(const TrajectoryParams& p,
                                             std::mt19937_64& rng) {
  if (p.dt <= 0.0 || p.duration < 2.0 * p.dt) {
    throw std::invalid_argument("gen_trajectory: need dt > 0, duration >= 2*dt");
  }
  for (size_t i = 1; i < p.turns.size(); ++i) {
    if (p.turns[i].t_start < p.turns[i - 1].t_start) {
      throw std::invalid_argument("gen_trajectory: turn schedule unsorted");
    }
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = int(std::floor(p.duration / p.dt)) + 1;

  std::vector<TrajectorySample> out;
  out.reserve(n);
  double x = p.start.x, y = p.start.y, h = p.hdg0;
  for (int i = 0; i < n; ++i) {
    const double rel_t = i * p.dt;
    TrajectorySample s;
    s.t = p.t0 + rel_t;
    s.pos = {x, y};
    s.meas = {x + p.meas_sigma * gauss(rng), y + p.meas_sigma * gauss(rng)};
    s.hdg_true = wrap_angle(h);
    out.push_back(s);

    // advance one step along a circular arc (or straight when omega == 0)
    const double w = omega_at(p.turns, rel_t);
    if (w == 0.0) {
      x += p.speed * p.dt * std::cos(h);
      y += p.speed * p.dt * std::sin(h);
    } else {
      const double h1 = h + w * p.dt;
      x += p.speed / w * (std::sin(h1) - std::sin(h));
      y += p.speed / w * (-std::cos(h1) + std::cos(h));
      h = h1;
    }
  }
  return out;
}

TargetModel make_ship_target(int class_id, double length, double width,
                             std::mt19937_64& rng) {
  TargetModel t;
  t.class_id = class_id;
  t.length = length;
  t.width = width;
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;

  // Corners pin the projected extent; bow side is stronger than stern so the
  // layout is not fore-aft symmetric.
  t.scatterers = {
      {hl, hw, 1.0},   {hl, -hw, 1.0},    // bow corners
      {-hl, hw, 0.55}, {-hl, -hw, 0.55},  // stern corners
      {hl, 0.0, 0.9},  {-hl, 0.0, 0.5},   // bow / stern keel
  };

  // Interior structure: a handful of scatterers at seeded positions with a
  // bow-heavy amplitude ramp. This is what distinguishes two ships that
  // share the same hull dimensions.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n_interior = 6;
  for (int i = 0; i < n_interior; ++i) {
    Scatterer s;
    s.dx = (2.0 * u01(rng) - 1.0) * 0.85 * hl;
    s.dy = (2.0 * u01(rng) - 1.0) * 0.8 * hw;
    s.amp = 0.25 + 0.55 * u01(rng);
    if (s.dx > 0.0) s.amp *= 1.3;  // fore-aft asymmetry
    t.scatterers.push_back(s);
  }
  t.validate();
  return t;
}

}  // namespace hrrp
