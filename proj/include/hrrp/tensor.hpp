#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hrrp::nn {

/// (batch, channel, length) array with a gradient buffer of the same shape.
/// Length-1 tensors double as plain feature matrices (latents, logits).
struct Tensor3 {
  int n = 0, c = 0, l = 0;
  std::vector<double> v;
  std::vector<double> g;

  Tensor3() = default;
  Tensor3(int n_, int c_, int l_)
      : n(n_), c(c_), l(l_), v(size_t(n_) * c_ * l_, 0.0),
        g(size_t(n_) * c_ * l_, 0.0) {
    if (n_ <= 0 || c_ <= 0 || l_ <= 0) {
      throw std::invalid_argument("Tensor3: non-positive dimension");
    }
  }

  size_t size() const { return v.size(); }
  size_t idx(int i, int j, int k) const {
    return (size_t(i) * c + j) * l + k;
  }
  double& at(int i, int j, int k) { return v[idx(i, j, k)]; }
  double at(int i, int j, int k) const { return v[idx(i, j, k)]; }
  double* row(int i, int j) { return v.data() + idx(i, j, 0); }
  const double* row(int i, int j) const { return v.data() + idx(i, j, 0); }
  double* grad_row(int i, int j) { return g.data() + idx(i, j, 0); }
  const double* grad_row(int i, int j) const { return g.data() + idx(i, j, 0); }

  bool same_shape(const Tensor3& o) const {
    return n == o.n && c == o.c && l == o.l;
  }
};

/// (batch, dim) conditioning matrix.
struct CondVector {
  int n = 0, d = 0;
  std::vector<double> v;

  CondVector() = default;
  CondVector(int n_, int d_) : n(n_), d(d_), v(size_t(n_) * d_, 0.0) {
    if (n_ <= 0 || d_ <= 0) {
      throw std::invalid_argument("CondVector: non-positive dimension");
    }
  }
  double& at(int i, int j) { return v[size_t(i) * d + j]; }
  double at(int i, int j) const { return v[size_t(i) * d + j]; }
  const double* row(int i) const { return v.data() + size_t(i) * d; }
};

}  // namespace hrrp::nn
