#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hrrp/layers.hpp"

namespace hrrp::nn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int checked = 0;
};

/// Central-difference check of analytic gradients. The caller runs one
/// forward+backward to fill the .g buffers, then passes a pure forward-only
/// loss closure. Up to samples_per_param entries of each parameter block are
/// perturbed by +-h; entries where both gradients are below 1e-10 are
/// treated as matching zeros.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<Param*>& params,
                           int samples_per_param = 8, double h = 1e-5,
                           uint64_t seed = 1234);

}  // namespace hrrp::nn
