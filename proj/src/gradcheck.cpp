#include "hrrp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hrrp::nn {

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<Param*>& params,
                           int samples_per_param, double h, uint64_t seed) {
  GradCheckReport rep;
  std::mt19937_64 rng(seed);

  for (Param* p : params) {
    std::vector<size_t> idx;
    if (int(p->w.size()) <= samples_per_param) {
      idx.resize(p->w.size());
      for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    } else {
      std::uniform_int_distribution<size_t> u(0, p->w.size() - 1);
      for (int i = 0; i < samples_per_param; ++i) idx.push_back(u(rng));
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    }

    for (size_t i : idx) {
      const double keep = p->w[i];
      p->w[i] = keep + h;
      const double lp = loss();
      p->w[i] = keep - h;
      const double lm = loss();
      p->w[i] = keep;

      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = p->g[i];
      const double scale = std::max(std::fabs(numeric), std::fabs(analytic));
      ++rep.checked;
      if (scale < 1e-10) continue;
      const double rel = std::fabs(numeric - analytic) / scale;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

}  // namespace hrrp::nn
