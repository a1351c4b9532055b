#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hrrp/geometry.hpp"
#include "hrrp/tensor.hpp"

namespace hrrp::nn {

enum class Mode { kTrain, kEval };

/// Named, trainable parameter block.
struct Param {
  std::string name;
  std::vector<double> w;
  std::vector<double> g;

  Param() = default;
  Param(std::string name_, size_t count)
      : name(std::move(name_)), w(count, 0.0), g(count, 0.0) {}
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

/// Non-trainable layer state that still belongs in a checkpoint
/// (batch-norm running statistics).
struct StateRef {
  std::string name;
  std::vector<double>* data = nullptr;
};

/// Harmonic encoding of a wrapped angle:
/// (sin phi, cos phi, sin 2phi, cos 2phi, ...), D = 2 * harmonics.
/// Continuous at the 0/2pi seam; the second harmonic is pi-periodic.
CondVector encode_angles(std::span<const double> phis, int harmonics = 2);
std::vector<double> encode_angle(AngleRad phi, int harmonics = 2);

// ---------------------------------------------------------------------------
// Core layers. Each instance caches its last forward inputs; backward must be
// called with the gradient of the loss w.r.t. that forward's output, and
// accumulates into parameter .g buffers.
// ---------------------------------------------------------------------------

class Linear {
 public:
  Linear(const std::string& name, int in, int out, std::mt19937_64& rng);
  Tensor3 forward(const Tensor3& x);    // (N, in, 1) -> (N, out, 1)
  Tensor3 backward(const Tensor3& dy);
  void collect(std::vector<Param*>& out);

  int in_dim, out_dim;
  Param w;  // out x in
  Param b;  // out

 private:
  Tensor3 x_;
};

class Conv1d {
 public:
  Conv1d(const std::string& name, int cin, int cout, int kernel, int stride,
         int pad, std::mt19937_64& rng);
  Tensor3 forward(const Tensor3& x);
  Tensor3 backward(const Tensor3& dy);
  void collect(std::vector<Param*>& out);
  int out_len(int lin) const { return (lin + 2 * pad - kernel) / stride + 1; }

  int cin, cout, kernel, stride, pad;
  Param w;  // cout x cin x kernel
  Param b;  // cout

 private:
  Tensor3 xpad_;  // cached padded input
  int lin_ = 0;
};

class ReLU {
 public:
  Tensor3 forward(const Tensor3& x);
  Tensor3 backward(const Tensor3& dy);

 private:
  std::vector<char> mask_;
  int n_ = 0, c_ = 0, l_ = 0;
};

class GlobalAvgPool {
 public:
  Tensor3 forward(const Tensor3& x);   // (N,C,L) -> (N,C,1)
  Tensor3 backward(const Tensor3& dy);

 private:
  int n_ = 0, c_ = 0, l_ = 0;
};

/// Channel-wise batch normalization without any conditioning. Statistics are
/// computed over (n, l) in train mode (biased variance) and tracked with an
/// exponential moving average for eval mode. The affine term is optional so
/// CBN can reuse the bare normalization.
class BatchNorm1d {
 public:
  BatchNorm1d(const std::string& name, int channels, bool affine = true,
              double eps = 1e-5, double momentum = 0.1);
  Tensor3 forward(const Tensor3& x, Mode mode);
  Tensor3 backward(const Tensor3& dy);
  void collect(std::vector<Param*>& out);
  void collect_state(std::vector<StateRef>& out);

  int channels;
  bool affine;
  double eps, momentum;
  Param gamma, beta;  // empty when !affine
  std::vector<double> running_mean, running_var;

 private:
  std::string name_;
  Mode mode_ = Mode::kTrain;
  Tensor3 xhat_;
  std::vector<double> invstd_;
};

/// Linear map c -> (gamma, beta), both of width C. Initialized so that
/// gamma = 1 and beta = 0 regardless of c: conditioning starts as identity.
class AffinePredictor {
 public:
  AffinePredictor(const std::string& name, int cond_dim, int channels);
  /// Fills gamma_/beta_ (N x C each) from the conditioning matrix.
  void forward(const CondVector& cond);
  /// Accumulates parameter gradients from d(gamma), d(beta) (N x C each).
  void backward(std::span<const double> dgamma, std::span<const double> dbeta);
  void collect(std::vector<Param*>& out);

  int cond_dim, channels;
  Param w;  // 2C x D, rows [0,C) -> gamma, [C,2C) -> beta
  Param b;  // 2C
  std::vector<double> gamma_, beta_;  // N x C, valid after forward

 private:
  CondVector cond_;
};

/// Feature-wise linear modulation: y[n,c,l] = gamma_c(cond_n) * x[n,c,l]
/// + beta_c(cond_n), broadcast over l.
class FiLM {
 public:
  FiLM(const std::string& name, int cond_dim, int channels);
  Tensor3 forward(const Tensor3& x, const CondVector& cond);
  Tensor3 backward(const Tensor3& dy);
  void collect(std::vector<Param*>& out);

  AffinePredictor pred;

 private:
  Tensor3 x_;
};

/// Conditional batch normalization: FiLM applied to batch-normalized
/// activations. Exactly the composition film(batchnorm(x)).
class CBN {
 public:
  CBN(const std::string& name, int cond_dim, int channels, double eps = 1e-5,
      double momentum = 0.1);
  Tensor3 forward(const Tensor3& x, const CondVector& cond, Mode mode);
  Tensor3 backward(const Tensor3& dy);
  void collect(std::vector<Param*>& out);
  void collect_state(std::vector<StateRef>& out);

  BatchNorm1d bn;  // affine-free
  FiLM film;
};

/// Appends one channel holding proj(cond_n), broadcast along length.
class ConcatCond {
 public:
  ConcatCond(const std::string& name, int cond_dim, std::mt19937_64& rng);
  Tensor3 forward(const Tensor3& x, const CondVector& cond);  // (N,C+1,L)
  Tensor3 backward(const Tensor3& dy);                        // dx (N,C,L)
  void collect(std::vector<Param*>& out);

  int cond_dim;
  Param w;  // 1 x D
  Param b;  // 1

 private:
  CondVector cond_;
  int n_ = 0, c_ = 0, l_ = 0;
};

/// Weighted softmax cross-entropy over (N, K, 1) logits. Per-class weights
/// default to uniform; the loss is the weighted mean of per-sample negative
/// log-likelihoods (weights w[y_n], normalized by their sum).
class SoftmaxCrossEntropy {
 public:
  double forward(const Tensor3& logits, std::span<const int> labels,
                 std::span<const double> class_weights = {});
  Tensor3 backward() const;
  const std::vector<double>& probs() const { return probs_; }

 private:
  int n_ = 0, k_ = 0;
  std::vector<double> probs_;
  std::vector<int> labels_;
  std::vector<double> sample_w_;
  double weight_sum_ = 0.0;
};

/// Single-layer GRU over a sequence of (N, F, 1) inputs; returns the final
/// hidden state (N, H, 1). Gate layout in the stacked weights: r, z, n.
class GRU {
 public:
  GRU(const std::string& name, int input, int hidden, std::mt19937_64& rng);
  Tensor3 forward(const std::vector<Tensor3>& xs);
  /// Backprop through time; returns d(input) per step, oldest first.
  std::vector<Tensor3> backward(const Tensor3& dh_last);
  void collect(std::vector<Param*>& out);

  int input_dim, hidden_dim;
  Param w_ih;  // 3H x F
  Param w_hh;  // 3H x H
  Param b_ih;  // 3H
  Param b_hh;  // 3H

 private:
  struct StepCache {
    Tensor3 x;
    std::vector<double> h_prev, r, z, n, hn;  // N x H each
  };
  std::vector<StepCache> steps_;
  int n_ = 0;
};

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) fill, the init used by every
/// randomly initialized layer in this stack.
void uniform_init(Param& p, int fan_in, std::mt19937_64& rng);

}  // namespace hrrp::nn
