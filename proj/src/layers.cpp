#include "hrrp/layers.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace hrrp::nn {

void uniform_init(Param& p, int fan_in, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(double(fan_in));
  std::uniform_real_distribution<double> u(-s, s);
  for (auto& x : p.w) x = u(rng);
}

CondVector encode_angles(std::span<const double> phis, int harmonics) {
  if (harmonics < 1) throw std::invalid_argument("encode_angles: harmonics < 1");
  CondVector c(int(phis.size()), 2 * harmonics);
  for (size_t i = 0; i < phis.size(); ++i) {
    for (int h = 0; h < harmonics; ++h) {
      c.at(int(i), 2 * h) = std::sin((h + 1) * phis[i]);
      c.at(int(i), 2 * h + 1) = std::cos((h + 1) * phis[i]);
    }
  }
  return c;
}

std::vector<double> encode_angle(AngleRad phi, int harmonics) {
  const double v = phi.value();
  const auto c = encode_angles(std::span(&v, 1), harmonics);
  return c.v;
}

// ----------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in, int out, std::mt19937_64& rng)
    : in_dim(in), out_dim(out), w(name + ".w", size_t(out) * in),
      b(name + ".b", out) {
  uniform_init(w, in, rng);
}

Tensor3 Linear::forward(const Tensor3& x) {
  if (x.c != in_dim || x.l != 1) {
    throw std::invalid_argument("Linear: input shape mismatch");
  }
  x_ = x;
  Tensor3 y(x.n, out_dim, 1);
  for (int i = 0; i < x.n; ++i) {
    const double* xi = x.row(i, 0);
    for (int o = 0; o < out_dim; ++o) {
      const double* wo = w.w.data() + size_t(o) * in_dim;
      double acc = b.w[o];
      for (int j = 0; j < in_dim; ++j) acc += wo[j] * xi[j];
      y.at(i, o, 0) = acc;
    }
  }
  return y;
}

Tensor3 Linear::backward(const Tensor3& dy) {
  Tensor3 dx(x_.n, in_dim, 1);
  for (int i = 0; i < x_.n; ++i) {
    const double* xi = x_.row(i, 0);
    double* dxi = dx.row(i, 0);
    for (int o = 0; o < out_dim; ++o) {
      const double d = dy.at(i, o, 0);
      const double* wo = w.w.data() + size_t(o) * in_dim;
      double* gwo = w.g.data() + size_t(o) * in_dim;
      b.g[o] += d;
      for (int j = 0; j < in_dim; ++j) {
        gwo[j] += d * xi[j];
        dxi[j] += d * wo[j];
      }
    }
  }
  return dx;
}

void Linear::collect(std::vector<Param*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

// ----------------------------------------------------------------- Conv1d

Conv1d::Conv1d(const std::string& name, int cin_, int cout_, int kernel_,
               int stride_, int pad_, std::mt19937_64& rng)
    : cin(cin_), cout(cout_), kernel(kernel_), stride(stride_), pad(pad_),
      w(name + ".w", size_t(cout_) * cin_ * kernel_), b(name + ".b", cout_) {
  if (stride < 1 || kernel < 1 || pad < 0) {
    throw std::invalid_argument("Conv1d: bad geometry");
  }
  uniform_init(w, cin * kernel, rng);
}

Tensor3 Conv1d::forward(const Tensor3& x) {
  if (x.c != cin) throw std::invalid_argument("Conv1d: channel mismatch");
  const int lout = out_len(x.l);
  if (lout < 1) throw std::invalid_argument("Conv1d: input too short");
  lin_ = x.l;
  const int lp = x.l + 2 * pad;

  xpad_ = Tensor3(x.n, cin, lp);
  for (int i = 0; i < x.n; ++i) {
    for (int ci = 0; ci < cin; ++ci) {
      std::memcpy(xpad_.row(i, ci) + pad, x.row(i, ci), sizeof(double) * x.l);
    }
  }

  Tensor3 y(x.n, cout, lout);
  for (int i = 0; i < x.n; ++i) {
    for (int co = 0; co < cout; ++co) {
      double* yr = y.row(i, co);
      const double bias = b.w[co];
      for (int lo = 0; lo < lout; ++lo) yr[lo] = bias;
      for (int ci = 0; ci < cin; ++ci) {
        const double* xr = xpad_.row(i, ci);
        const double* wr = w.w.data() + (size_t(co) * cin + ci) * kernel;
        for (int kk = 0; kk < kernel; ++kk) {
          const double wv = wr[kk];
          const double* xk = xr + kk;
          if (stride == 1) {
            for (int lo = 0; lo < lout; ++lo) yr[lo] += wv * xk[lo];
          } else {
            for (int lo = 0; lo < lout; ++lo) yr[lo] += wv * xk[lo * stride];
          }
        }
      }
    }
  }
  return y;
}

Tensor3 Conv1d::backward(const Tensor3& dy) {
  const int lout = dy.l;
  const int lp = xpad_.l;
  Tensor3 dxpad(xpad_.n, cin, lp);

  for (int i = 0; i < xpad_.n; ++i) {
    for (int co = 0; co < cout; ++co) {
      const double* dyr = dy.row(i, co);
      double acc_b = 0.0;
      for (int lo = 0; lo < lout; ++lo) acc_b += dyr[lo];
      b.g[co] += acc_b;
      for (int ci = 0; ci < cin; ++ci) {
        const double* xr = xpad_.row(i, ci);
        double* dxr = dxpad.row(i, ci);
        const double* wr = w.w.data() + (size_t(co) * cin + ci) * kernel;
        double* gwr = w.g.data() + (size_t(co) * cin + ci) * kernel;
        for (int kk = 0; kk < kernel; ++kk) {
          const double wv = wr[kk];
          double acc_w = 0.0;
          const double* xk = xr + kk;
          double* dxk = dxr + kk;
          if (stride == 1) {
            for (int lo = 0; lo < lout; ++lo) {
              acc_w += dyr[lo] * xk[lo];
              dxk[lo] += wv * dyr[lo];
            }
          } else {
            for (int lo = 0; lo < lout; ++lo) {
              acc_w += dyr[lo] * xk[lo * stride];
              dxk[lo * stride] += wv * dyr[lo];
            }
          }
          gwr[kk] += acc_w;
        }
      }
    }
  }

  Tensor3 dx(xpad_.n, cin, lin_);
  for (int i = 0; i < xpad_.n; ++i) {
    for (int ci = 0; ci < cin; ++ci) {
      std::memcpy(dx.row(i, ci), dxpad.row(i, ci) + pad,
                  sizeof(double) * lin_);
    }
  }
  return dx;
}

void Conv1d::collect(std::vector<Param*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

// ------------------------------------------------------------------- ReLU

Tensor3 ReLU::forward(const Tensor3& x) {
  n_ = x.n;
  c_ = x.c;
  l_ = x.l;
  mask_.assign(x.size(), 0);
  Tensor3 y = x;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x.v[i] > 0.0) {
      mask_[i] = 1;
    } else {
      y.v[i] = 0.0;
    }
  }
  return y;
}

Tensor3 ReLU::backward(const Tensor3& dy) {
  Tensor3 dx(n_, c_, l_);
  for (size_t i = 0; i < dx.size(); ++i) dx.v[i] = mask_[i] ? dy.v[i] : 0.0;
  return dx;
}

// ---------------------------------------------------------- GlobalAvgPool

Tensor3 GlobalAvgPool::forward(const Tensor3& x) {
  n_ = x.n;
  c_ = x.c;
  l_ = x.l;
  Tensor3 y(x.n, x.c, 1);
  for (int i = 0; i < x.n; ++i) {
    for (int j = 0; j < x.c; ++j) {
      const double* xr = x.row(i, j);
      double acc = 0.0;
      for (int k = 0; k < x.l; ++k) acc += xr[k];
      y.at(i, j, 0) = acc / x.l;
    }
  }
  return y;
}

Tensor3 GlobalAvgPool::backward(const Tensor3& dy) {
  Tensor3 dx(n_, c_, l_);
  const double inv = 1.0 / l_;
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < c_; ++j) {
      const double d = dy.at(i, j, 0) * inv;
      double* dxr = dx.row(i, j);
      for (int k = 0; k < l_; ++k) dxr[k] = d;
    }
  }
  return dx;
}

// ------------------------------------------------------------ BatchNorm1d

BatchNorm1d::BatchNorm1d(const std::string& name, int channels_, bool affine_,
                         double eps_, double momentum_)
    : channels(channels_), affine(affine_), eps(eps_), momentum(momentum_),
      running_mean(channels_, 0.0), running_var(channels_, 1.0), name_(name) {
  if (affine) {
    gamma = Param(name + ".gamma", channels);
    beta = Param(name + ".beta", channels);
    std::fill(gamma.w.begin(), gamma.w.end(), 1.0);
  }
}

Tensor3 BatchNorm1d::forward(const Tensor3& x, Mode mode) {
  if (x.c != channels) throw std::invalid_argument("BatchNorm1d: channel mismatch");
  mode_ = mode;
  const size_t m = size_t(x.n) * x.l;
  if (mode == Mode::kTrain && m < 2) {
    throw std::invalid_argument("BatchNorm1d: train mode needs N*L >= 2");
  }
  invstd_.assign(channels, 0.0);
  xhat_ = Tensor3(x.n, x.c, x.l);
  std::vector<double> mean(channels, 0.0), var(channels, 0.0);

  if (mode == Mode::kTrain) {
    for (int j = 0; j < channels; ++j) {
      double acc = 0.0;
      for (int i = 0; i < x.n; ++i) {
        const double* xr = x.row(i, j);
        for (int k = 0; k < x.l; ++k) acc += xr[k];
      }
      mean[j] = acc / double(m);
      double vacc = 0.0;
      for (int i = 0; i < x.n; ++i) {
        const double* xr = x.row(i, j);
        for (int k = 0; k < x.l; ++k) {
          const double d = xr[k] - mean[j];
          vacc += d * d;
        }
      }
      var[j] = vacc / double(m);  // biased
      running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mean[j];
      running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var[j];
    }
  } else {
    mean = running_mean;
    var = running_var;
  }

  Tensor3 y(x.n, x.c, x.l);
  for (int j = 0; j < channels; ++j) {
    const double istd = 1.0 / std::sqrt(var[j] + eps);
    invstd_[j] = istd;
    const double g = affine ? gamma.w[j] : 1.0;
    const double bb = affine ? beta.w[j] : 0.0;
    for (int i = 0; i < x.n; ++i) {
      const double* xr = x.row(i, j);
      double* hr = xhat_.row(i, j);
      double* yr = y.row(i, j);
      for (int k = 0; k < x.l; ++k) {
        const double h = (xr[k] - mean[j]) * istd;
        hr[k] = h;
        yr[k] = g * h + bb;
      }
    }
  }
  return y;
}

Tensor3 BatchNorm1d::backward(const Tensor3& dy) {
  const int n = xhat_.n, l = xhat_.l;
  const double m = double(size_t(n) * l);
  Tensor3 dx(n, channels, l);

  for (int j = 0; j < channels; ++j) {
    const double g = affine ? gamma.w[j] : 1.0;
    double sum_dy = 0.0, sum_dyh = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* dyr = dy.row(i, j);
      const double* hr = xhat_.row(i, j);
      for (int k = 0; k < l; ++k) {
        sum_dy += dyr[k];
        sum_dyh += dyr[k] * hr[k];
      }
    }
    if (affine) {
      gamma.g[j] += sum_dyh;
      beta.g[j] += sum_dy;
    }
    const double istd = invstd_[j];
    if (mode_ == Mode::kTrain) {
      // backprop through the batch statistics
      for (int i = 0; i < n; ++i) {
        const double* dyr = dy.row(i, j);
        const double* hr = xhat_.row(i, j);
        double* dxr = dx.row(i, j);
        for (int k = 0; k < l; ++k) {
          const double dxhat = dyr[k] * g;
          dxr[k] = istd * (dxhat - (g * sum_dy + hr[k] * g * sum_dyh) / m);
        }
      }
    } else {
      for (int i = 0; i < n; ++i) {
        const double* dyr = dy.row(i, j);
        double* dxr = dx.row(i, j);
        for (int k = 0; k < l; ++k) dxr[k] = dyr[k] * g * istd;
      }
    }
  }
  return dx;
}

void BatchNorm1d::collect(std::vector<Param*>& out) {
  if (affine) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
}

void BatchNorm1d::collect_state(std::vector<StateRef>& out) {
  out.push_back({name_ + ".running_mean", &running_mean});
  out.push_back({name_ + ".running_var", &running_var});
}

// -------------------------------------------------------- AffinePredictor

AffinePredictor::AffinePredictor(const std::string& name, int cond_dim_,
                                 int channels_)
    : cond_dim(cond_dim_), channels(channels_),
      w(name + ".w", size_t(2 * channels_) * cond_dim_),
      b(name + ".b", 2 * channels_) {
  // identity start: gamma = 1, beta = 0 for every conditioning input
  for (int j = 0; j < channels; ++j) b.w[j] = 1.0;
}

void AffinePredictor::forward(const CondVector& cond) {
  if (cond.d != cond_dim) {
    throw std::invalid_argument("AffinePredictor: cond dim mismatch");
  }
  cond_ = cond;
  gamma_.assign(size_t(cond.n) * channels, 0.0);
  beta_.assign(size_t(cond.n) * channels, 0.0);
  for (int i = 0; i < cond.n; ++i) {
    const double* ci = cond.row(i);
    for (int j = 0; j < 2 * channels; ++j) {
      const double* wr = w.w.data() + size_t(j) * cond_dim;
      double acc = b.w[j];
      for (int d = 0; d < cond_dim; ++d) acc += wr[d] * ci[d];
      if (j < channels) {
        gamma_[size_t(i) * channels + j] = acc;
      } else {
        beta_[size_t(i) * channels + (j - channels)] = acc;
      }
    }
  }
}

void AffinePredictor::backward(std::span<const double> dgamma,
                               std::span<const double> dbeta) {
  for (int i = 0; i < cond_.n; ++i) {
    const double* ci = cond_.row(i);
    for (int j = 0; j < channels; ++j) {
      const double dg = dgamma[size_t(i) * channels + j];
      const double db = dbeta[size_t(i) * channels + j];
      b.g[j] += dg;
      b.g[channels + j] += db;
      double* gw_g = w.g.data() + size_t(j) * cond_dim;
      double* gw_b = w.g.data() + size_t(channels + j) * cond_dim;
      for (int d = 0; d < cond_dim; ++d) {
        gw_g[d] += dg * ci[d];
        gw_b[d] += db * ci[d];
      }
    }
  }
}

void AffinePredictor::collect(std::vector<Param*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

// ------------------------------------------------------------------- FiLM

FiLM::FiLM(const std::string& name, int cond_dim, int channels)
    : pred(name + ".pred", cond_dim, channels) {}

Tensor3 FiLM::forward(const Tensor3& x, const CondVector& cond) {
  if (x.n != cond.n) throw std::invalid_argument("FiLM: batch mismatch");
  if (x.c != pred.channels) throw std::invalid_argument("FiLM: channel mismatch");
  x_ = x;
  pred.forward(cond);
  Tensor3 y(x.n, x.c, x.l);
  for (int i = 0; i < x.n; ++i) {
    for (int j = 0; j < x.c; ++j) {
      const double g = pred.gamma_[size_t(i) * x.c + j];
      const double bb = pred.beta_[size_t(i) * x.c + j];
      const double* xr = x.row(i, j);
      double* yr = y.row(i, j);
      for (int k = 0; k < x.l; ++k) yr[k] = g * xr[k] + bb;
    }
  }
  return y;
}

Tensor3 FiLM::backward(const Tensor3& dy) {
  const int c = x_.c;
  Tensor3 dx(x_.n, c, x_.l);
  std::vector<double> dgamma(size_t(x_.n) * c, 0.0), dbeta(size_t(x_.n) * c, 0.0);
  for (int i = 0; i < x_.n; ++i) {
    for (int j = 0; j < c; ++j) {
      const double g = pred.gamma_[size_t(i) * c + j];
      const double* dyr = dy.row(i, j);
      const double* xr = x_.row(i, j);
      double* dxr = dx.row(i, j);
      double acc_g = 0.0, acc_b = 0.0;
      for (int k = 0; k < x_.l; ++k) {
        acc_g += dyr[k] * xr[k];
        acc_b += dyr[k];
        dxr[k] = dyr[k] * g;
      }
      dgamma[size_t(i) * c + j] = acc_g;
      dbeta[size_t(i) * c + j] = acc_b;
    }
  }
  pred.backward(dgamma, dbeta);
  return dx;
}

void FiLM::collect(std::vector<Param*>& out) { pred.collect(out); }

// -------------------------------------------------------------------- CBN

CBN::CBN(const std::string& name, int cond_dim, int channels, double eps,
         double momentum)
    : bn(name + ".bn", channels, /*affine=*/false, eps, momentum),
      film(name + ".film", cond_dim, channels) {}

Tensor3 CBN::forward(const Tensor3& x, const CondVector& cond, Mode mode) {
  return film.forward(bn.forward(x, mode), cond);
}

Tensor3 CBN::backward(const Tensor3& dy) { return bn.backward(film.backward(dy)); }

void CBN::collect(std::vector<Param*>& out) { film.collect(out); }

void CBN::collect_state(std::vector<StateRef>& out) { bn.collect_state(out); }

// ------------------------------------------------------------- ConcatCond

ConcatCond::ConcatCond(const std::string& name, int cond_dim_,
                       std::mt19937_64& rng)
    : cond_dim(cond_dim_), w(name + ".w", cond_dim_), b(name + ".b", 1) {
  uniform_init(w, cond_dim, rng);
}

Tensor3 ConcatCond::forward(const Tensor3& x, const CondVector& cond) {
  if (x.n != cond.n) throw std::invalid_argument("ConcatCond: batch mismatch");
  if (cond.d != cond_dim) throw std::invalid_argument("ConcatCond: cond dim mismatch");
  cond_ = cond;
  n_ = x.n;
  c_ = x.c;
  l_ = x.l;
  Tensor3 y(x.n, x.c + 1, x.l);
  for (int i = 0; i < x.n; ++i) {
    for (int j = 0; j < x.c; ++j) {
      std::memcpy(y.row(i, j), x.row(i, j), sizeof(double) * x.l);
    }
    const double* ci = cond_.row(i);
    double tok = b.w[0];
    for (int d = 0; d < cond_dim; ++d) tok += w.w[d] * ci[d];
    double* yr = y.row(i, x.c);
    for (int k = 0; k < x.l; ++k) yr[k] = tok;
  }
  return y;
}

Tensor3 ConcatCond::backward(const Tensor3& dy) {
  Tensor3 dx(n_, c_, l_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < c_; ++j) {
      std::memcpy(dx.row(i, j), dy.row(i, j), sizeof(double) * l_);
    }
    const double* dyr = dy.row(i, c_);
    double dtok = 0.0;
    for (int k = 0; k < l_; ++k) dtok += dyr[k];
    b.g[0] += dtok;
    const double* ci = cond_.row(i);
    for (int d = 0; d < cond_dim; ++d) w.g[d] += dtok * ci[d];
  }
  return dx;
}

void ConcatCond::collect(std::vector<Param*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

// ----------------------------------------------------- SoftmaxCrossEntropy

double SoftmaxCrossEntropy::forward(const Tensor3& logits,
                                    std::span<const int> labels,
                                    std::span<const double> class_weights) {
  if (logits.l != 1) throw std::invalid_argument("SoftmaxCE: logits must be (N,K,1)");
  if (int(labels.size()) != logits.n) {
    throw std::invalid_argument("SoftmaxCE: label count mismatch");
  }
  if (!class_weights.empty() && int(class_weights.size()) != logits.c) {
    throw std::invalid_argument("SoftmaxCE: weight vector length != #classes");
  }
  n_ = logits.n;
  k_ = logits.c;
  labels_.assign(labels.begin(), labels.end());
  probs_.assign(size_t(n_) * k_, 0.0);
  sample_w_.assign(n_, 1.0);

  double loss = 0.0;
  weight_sum_ = 0.0;
  for (int i = 0; i < n_; ++i) {
    const int y = labels_[i];
    if (y < 0 || y >= k_) throw std::invalid_argument("SoftmaxCE: label out of range");
    double mx = logits.at(i, 0, 0);
    for (int j = 1; j < k_; ++j) mx = std::max(mx, logits.at(i, j, 0));
    double z = 0.0;
    for (int j = 0; j < k_; ++j) z += std::exp(logits.at(i, j, 0) - mx);
    const double logz = std::log(z) + mx;
    for (int j = 0; j < k_; ++j) {
      probs_[size_t(i) * k_ + j] = std::exp(logits.at(i, j, 0) - logz);
    }
    const double wi = class_weights.empty() ? 1.0 : class_weights[y];
    sample_w_[i] = wi;
    weight_sum_ += wi;
    loss += wi * (logz - logits.at(i, y, 0));
  }
  return loss / weight_sum_;
}

Tensor3 SoftmaxCrossEntropy::backward() const {
  Tensor3 dl(n_, k_, 1);
  for (int i = 0; i < n_; ++i) {
    const double s = sample_w_[i] / weight_sum_;
    for (int j = 0; j < k_; ++j) {
      dl.at(i, j, 0) = s * (probs_[size_t(i) * k_ + j] - (labels_[i] == j));
    }
  }
  return dl;
}

// -------------------------------------------------------------------- GRU

GRU::GRU(const std::string& name, int input, int hidden, std::mt19937_64& rng)
    : input_dim(input), hidden_dim(hidden),
      w_ih(name + ".w_ih", size_t(3 * hidden) * input),
      w_hh(name + ".w_hh", size_t(3 * hidden) * hidden),
      b_ih(name + ".b_ih", 3 * hidden), b_hh(name + ".b_hh", 3 * hidden) {
  uniform_init(w_ih, hidden, rng);
  uniform_init(w_hh, hidden, rng);
}

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

Tensor3 GRU::forward(const std::vector<Tensor3>& xs) {
  if (xs.empty()) throw std::invalid_argument("GRU: empty sequence");
  n_ = xs[0].n;
  const int H = hidden_dim, F = input_dim;
  steps_.clear();
  steps_.reserve(xs.size());

  std::vector<double> h(size_t(n_) * H, 0.0);
  for (const auto& x : xs) {
    if (x.n != n_ || x.c != F || x.l != 1) {
      throw std::invalid_argument("GRU: step shape mismatch");
    }
    StepCache sc;
    sc.x = x;
    sc.h_prev = h;
    sc.r.resize(size_t(n_) * H);
    sc.z.resize(size_t(n_) * H);
    sc.n.resize(size_t(n_) * H);
    sc.hn.resize(size_t(n_) * H);

    for (int i = 0; i < n_; ++i) {
      const double* xi = x.row(i, 0);
      const double* hp = h.data() + size_t(i) * H;
      for (int j = 0; j < H; ++j) {
        auto gate_in = [&](int block) {
          const double* wr = w_ih.w.data() + size_t(block * H + j) * F;
          double acc = b_ih.w[block * H + j];
          for (int d = 0; d < F; ++d) acc += wr[d] * xi[d];
          return acc;
        };
        auto gate_h = [&](int block) {
          const double* wr = w_hh.w.data() + size_t(block * H + j) * H;
          double acc = b_hh.w[block * H + j];
          for (int d = 0; d < H; ++d) acc += wr[d] * hp[d];
          return acc;
        };
        const double r = sigmoid(gate_in(0) + gate_h(0));
        const double z = sigmoid(gate_in(1) + gate_h(1));
        const double hn = gate_h(2);
        const double nn = std::tanh(gate_in(2) + r * hn);
        sc.r[size_t(i) * H + j] = r;
        sc.z[size_t(i) * H + j] = z;
        sc.n[size_t(i) * H + j] = nn;
        sc.hn[size_t(i) * H + j] = hn;
      }
      // h update needs the full gate row first
      double* hrow = h.data() + size_t(i) * H;
      for (int j = 0; j < H; ++j) {
        const double z = sc.z[size_t(i) * H + j];
        const double nn = sc.n[size_t(i) * H + j];
        hrow[j] = (1.0 - z) * nn + z * sc.h_prev[size_t(i) * H + j];
      }
    }
    steps_.push_back(std::move(sc));
  }

  Tensor3 out(n_, H, 1);
  std::copy(h.begin(), h.end(), out.v.begin());
  return out;
}

std::vector<Tensor3> GRU::backward(const Tensor3& dh_last) {
  const int H = hidden_dim, F = input_dim;
  std::vector<Tensor3> dxs(steps_.size());
  std::vector<double> dh(dh_last.v);

  for (int t = int(steps_.size()) - 1; t >= 0; --t) {
    const StepCache& sc = steps_[t];
    Tensor3 dx(n_, F, 1);
    std::vector<double> dh_prev(size_t(n_) * H, 0.0);

    for (int i = 0; i < n_; ++i) {
      const double* xi = sc.x.row(i, 0);
      const double* hp = sc.h_prev.data() + size_t(i) * H;
      double* dxi = dx.row(i, 0);
      double* dhp = dh_prev.data() + size_t(i) * H;

      for (int j = 0; j < H; ++j) {
        const size_t ij = size_t(i) * H + j;
        const double r = sc.r[ij], z = sc.z[ij], nn = sc.n[ij], hn = sc.hn[ij];
        const double d = dh[ij];

        const double dn = d * (1.0 - z);
        const double dz = d * (hp[j] - nn);
        dhp[j] += d * z;

        const double dn_pre = dn * (1.0 - nn * nn);
        const double dr = dn_pre * hn;
        const double dhn = dn_pre * r;
        const double dz_pre = dz * z * (1.0 - z);
        const double dr_pre = dr * r * (1.0 - r);

        const double dpre[3] = {dr_pre, dz_pre, dn_pre};
        const double dpre_h[3] = {dr_pre, dz_pre, dhn};
        for (int blk = 0; blk < 3; ++blk) {
          const size_t row = size_t(blk * H + j);
          b_ih.g[row] += dpre[blk];
          b_hh.g[row] += dpre_h[blk];
          double* gwi = w_ih.g.data() + row * F;
          const double* wi = w_ih.w.data() + row * F;
          for (int dd = 0; dd < F; ++dd) {
            gwi[dd] += dpre[blk] * xi[dd];
            dxi[dd] += dpre[blk] * wi[dd];
          }
          double* gwh = w_hh.g.data() + row * H;
          const double* wh = w_hh.w.data() + row * H;
          for (int dd = 0; dd < H; ++dd) {
            gwh[dd] += dpre_h[blk] * hp[dd];
            dhp[dd] += dpre_h[blk] * wh[dd];
          }
        }
      }
    }
    dxs[t] = std::move(dx);
    dh = std::move(dh_prev);
  }
  return dxs;
}

void GRU::collect(std::vector<Param*>& out) {
  out.push_back(&w_ih);
  out.push_back(&w_hh);
  out.push_back(&b_ih);
  out.push_back(&b_hh);
}

}  // namespace hrrp::nn
