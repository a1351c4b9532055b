#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hrrp/gradcheck.hpp"
#include "hrrp/layers.hpp"
#include "hrrp/rng.hpp"

using namespace hrrp;
using namespace hrrp::nn;

namespace {
constexpr double kPi = 3.14159265358979323846;

Tensor3 random_tensor(int n, int c, int l, uint64_t seed, double lo = -1.0,
                      double hi = 1.0) {
  Tensor3 x(n, c, l);
  auto rng = make_rng(seed, "tensor");
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : x.v) v = u(rng);
  return x;
}

CondVector random_cond(int n, int d, uint64_t seed) {
  CondVector c(n, d);
  auto rng = make_rng(seed, "cond");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : c.v) v = u(rng);
  return c;
}

// scalar loss used by the gradient checks: weighted sum of the outputs so
// every element contributes a distinct gradient
double weighted_sum(const Tensor3& y) {
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    acc += y.v[i] * std::sin(0.31 * double(i + 1));
  }
  return acc;
}

Tensor3 weighted_sum_grad(const Tensor3& y) {
  Tensor3 d(y.n, y.c, y.l);
  for (size_t i = 0; i < y.size(); ++i) d.v[i] = std::sin(0.31 * double(i + 1));
  return d;
}
}  // namespace

TEST_CASE("encode_angle harmonics") {
  auto e0 = encode_angle(wrap_angle(0.0));
  REQUIRE(e0.size() == 4);
  CHECK(e0[0] == doctest::Approx(0.0));
  CHECK(e0[1] == doctest::Approx(1.0));
  CHECK(e0[2] == doctest::Approx(0.0));
  CHECK(e0[3] == doctest::Approx(1.0));

  auto epi = encode_angle(wrap_angle(kPi));
  CHECK(epi[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(epi[1] == doctest::Approx(-1.0));
  CHECK(epi[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(epi[3] == doctest::Approx(1.0));  // second harmonic is pi-periodic

  for (double phi : {0.3, 2.7, 5.1}) {
    auto a = encode_angle(wrap_angle(phi));
    auto b = encode_angle(wrap_angle(phi + kTwoPi));
    for (int i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9));
  }
}

TEST_CASE("linear layer forward and exact gradients") {
  auto rng = make_rng(1, "init");
  Linear fc("fc", 5, 3, rng);
  Tensor3 x = random_tensor(4, 5, 1, 2);

  Param input("input", x.size());
  input.w = x.v;

  auto loss = [&]() {
    Tensor3 xi(4, 5, 1);
    xi.v = input.w;
    return weighted_sum(fc.forward(xi));
  };
  // analytic pass
  Tensor3 y = fc.forward(x);
  Tensor3 dx = fc.backward(weighted_sum_grad(y));
  input.g = dx.v;

  std::vector<Param*> params{&fc.w, &fc.b, &input};
  const auto rep = grad_check(loss, params, 16, 1e-5);
  CHECK(rep.max_rel_err <= 1e-6);
}

TEST_CASE("conv1d matches a hand computation and its gradients check out") {
  auto rng = make_rng(3, "init");
  SUBCASE("hand-computed valid convolution") {
    Conv1d conv("conv", 1, 1, 3, 1, 0, rng);
    conv.w.w = {1.0, 0.0, -1.0};
    conv.b.w = {0.0};
    Tensor3 x(1, 1, 4);
    x.v = {1, 2, 3, 4};
    Tensor3 y = conv.forward(x);
    REQUIRE(y.l == 2);
    CHECK(y.v[0] == doctest::Approx(-2.0));
    CHECK(y.v[1] == doctest::Approx(-2.0));
  }

  SUBCASE("gradcheck across stride and padding variants") {
    for (auto [stride, pad] : {std::pair{1, 2}, std::pair{2, 1}, std::pair{3, 0}}) {
      Conv1d conv("conv", 3, 4, 5, stride, pad, rng);
      Tensor3 x = random_tensor(2, 3, 12, 11 + stride);
      Param input("input", x.size());
      input.w = x.v;

      auto loss = [&]() {
        Tensor3 xi(2, 3, 12);
        xi.v = input.w;
        return weighted_sum(conv.forward(xi));
      };
      Tensor3 y = conv.forward(x);
      input.g = conv.backward(weighted_sum_grad(y)).v;
      std::vector<Param*> params{&conv.w, &conv.b, &input};
      const auto rep = grad_check(loss, params, 12, 1e-5);
      CHECK(rep.max_rel_err <= 1e-6);
    }
  }
}

TEST_CASE("relu gradcheck away from the kink") {
  ReLU relu;
  Tensor3 x = random_tensor(3, 4, 7, 5);
  for (auto& v : x.v) {
    if (std::fabs(v) < 1e-3) v = 0.1;  // keep clear of the kink
  }
  Param input("input", x.size());
  input.w = x.v;
  auto loss = [&]() {
    Tensor3 xi(3, 4, 7);
    xi.v = input.w;
    return weighted_sum(relu.forward(xi));
  };
  Tensor3 y = relu.forward(x);
  input.g = relu.backward(weighted_sum_grad(y)).v;
  const auto rep = grad_check(loss, {&input}, 24, 1e-5);
  CHECK(rep.max_rel_err <= 1e-8);
}

TEST_CASE("batchnorm statistics, modes, and gradients") {
  SUBCASE("constant channel normalizes to zero") {
    BatchNorm1d bn("bn", 2);
    Tensor3 x(3, 2, 4);
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 4; ++k) {
        x.at(i, 0, k) = 7.5;
        x.at(i, 1, k) = -2.0;
      }
    }
    Tensor3 y = bn.forward(x, Mode::kTrain);
    for (double v : y.v) CHECK(v == doctest::Approx(0.0));
  }

  SUBCASE("train mode gives per-channel mean 0, biased variance 1") {
    BatchNorm1d bn("bn", 3);
    Tensor3 x = random_tensor(4, 3, 9, 8, -3.0, 5.0);
    Tensor3 y = bn.forward(x, Mode::kTrain);
    for (int j = 0; j < 3; ++j) {
      double m = 0.0, v = 0.0;
      for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < 9; ++k) m += y.at(i, j, k);
      }
      m /= 36.0;
      for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < 9; ++k) {
          v += (y.at(i, j, k) - m) * (y.at(i, j, k) - m);
        }
      }
      v /= 36.0;
      CHECK(std::fabs(m) < 1e-6);
      CHECK(v == doctest::Approx(1.0).epsilon(1e-4));  // eps-deflated
    }
  }

  SUBCASE("eval mode converges to train output on a fixed batch") {
    BatchNorm1d bn("bn", 2);
    Tensor3 x = random_tensor(5, 2, 6, 9);
    Tensor3 y_train;
    for (int i = 0; i < 400; ++i) y_train = bn.forward(x, Mode::kTrain);
    Tensor3 y_eval = bn.forward(x, Mode::kEval);
    for (size_t i = 0; i < y_eval.size(); ++i) {
      CHECK(y_eval.v[i] == doctest::Approx(y_train.v[i]).epsilon(1e-6));
    }
  }

  SUBCASE("train mode requires N*L >= 2") {
    BatchNorm1d bn("bn", 1);
    Tensor3 x(1, 1, 1);
    CHECK_THROWS_AS(bn.forward(x, Mode::kTrain), std::invalid_argument);
    CHECK_NOTHROW(bn.forward(x, Mode::kEval));
  }

  SUBCASE("gradcheck through the batch statistics, train and eval") {
    for (Mode mode : {Mode::kTrain, Mode::kEval}) {
      BatchNorm1d bn("bn", 3);
      // non-trivial running stats for the eval branch
      bn.running_mean = {0.3, -0.2, 1.0};
      bn.running_var = {1.5, 0.7, 2.0};
      Tensor3 x = random_tensor(4, 3, 5, 10);
      Param input("input", x.size());
      input.w = x.v;
      auto loss = [&]() {
        Tensor3 xi(4, 3, 5);
        xi.v = input.w;
        // keep the closure pure: stats are restored after each call
        auto rm = bn.running_mean;
        auto rv = bn.running_var;
        const double out = weighted_sum(bn.forward(xi, mode));
        bn.running_mean = rm;
        bn.running_var = rv;
        return out;
      };
      Tensor3 y = bn.forward(x, mode);
      input.g = bn.backward(weighted_sum_grad(y)).v;
      const auto rep = grad_check(loss, {&bn.gamma, &bn.beta, &input}, 16, 1e-5);
      CHECK(rep.max_rel_err <= 1e-6);
    }
  }
}

TEST_CASE("film: identity start, hand example, gradients") {
  SUBCASE("gamma=1, beta=0 is the exact identity") {
    FiLM film("film", 4, 3);  // fresh predictor = identity
    Tensor3 x = random_tensor(2, 3, 5, 12);
    CondVector c = random_cond(2, 4, 13);
    Tensor3 y = film.forward(x, c);
    for (size_t i = 0; i < x.size(); ++i) CHECK(y.v[i] == x.v[i]);
  }

  SUBCASE("constant modulation") {
    FiLM film("film", 4, 3);
    std::fill(film.pred.b.w.begin(), film.pred.b.w.begin() + 3, 0.0);  // gamma=0
    std::fill(film.pred.b.w.begin() + 3, film.pred.b.w.end(), 5.0);    // beta=5
    Tensor3 x = random_tensor(2, 3, 5, 14);
    Tensor3 y = film.forward(x, random_cond(2, 4, 15));
    for (double v : y.v) CHECK(v == doctest::Approx(5.0));
  }

  SUBCASE("hand-applied modulation") {
    FiLM film("film", 2, 2);
    // gamma = (2, -1), beta = (0, 1) for every sample: bias-only predictor
    film.pred.b.w = {2.0, -1.0, 0.0, 1.0};
    Tensor3 x(1, 2, 2);
    x.v = {1, 2, 3, 4};
    Tensor3 y = film.forward(x, random_cond(1, 2, 16));
    CHECK(y.v[0] == doctest::Approx(2.0));
    CHECK(y.v[1] == doctest::Approx(4.0));
    CHECK(y.v[2] == doctest::Approx(-2.0));
    CHECK(y.v[3] == doctest::Approx(-3.0));
  }

  SUBCASE("gradcheck through predictor and input") {
    FiLM film("film", 3, 4);
    auto rng = make_rng(17, "perturb");
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& w : film.pred.w.w) w = u(rng);  // move off the identity
    Tensor3 x = random_tensor(3, 4, 6, 18);
    CondVector c = random_cond(3, 3, 19);
    Param input("input", x.size());
    input.w = x.v;
    auto loss = [&]() {
      Tensor3 xi(3, 4, 6);
      xi.v = input.w;
      return weighted_sum(film.forward(xi, c));
    };
    Tensor3 y = film.forward(x, c);
    input.g = film.backward(weighted_sum_grad(y)).v;
    const auto rep = grad_check(loss, {&film.pred.w, &film.pred.b, &input}, 16, 1e-5);
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("cbn equals the explicit bn-then-film composition bit-exactly") {
  CBN cbn("cbn", 4, 3);
  BatchNorm1d bn("ref.bn", 3, false);
  FiLM film("ref.film", 4, 3);
  // same off-identity predictor on both paths
  auto rng = make_rng(21, "perturb");
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (size_t i = 0; i < cbn.film.pred.w.w.size(); ++i) {
    const double w = u(rng);
    cbn.film.pred.w.w[i] = w;
    film.pred.w.w[i] = w;
  }

  Tensor3 x = random_tensor(4, 3, 7, 22);
  CondVector c = random_cond(4, 4, 23);
  Tensor3 a = cbn.forward(x, c, Mode::kTrain);
  Tensor3 b = film.forward(bn.forward(x, Mode::kTrain), c);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.v[i] == b.v[i]);

  SUBCASE("cbn with identity predictor equals plain batch normalization") {
    CBN id("cbn_id", 4, 3);
    BatchNorm1d plain("plain", 3, false);
    Tensor3 y1 = id.forward(x, c, Mode::kTrain);
    Tensor3 y2 = plain.forward(x, Mode::kTrain);
    for (size_t i = 0; i < y1.size(); ++i) CHECK(y1.v[i] == y2.v[i]);
  }

  SUBCASE("gradcheck") {
    Param input("input", x.size());
    input.w = x.v;
    auto loss = [&]() {
      Tensor3 xi(4, 3, 7);
      xi.v = input.w;
      auto rm = cbn.bn.running_mean;
      auto rv = cbn.bn.running_var;
      const double out = weighted_sum(cbn.forward(xi, c, Mode::kTrain));
      cbn.bn.running_mean = rm;
      cbn.bn.running_var = rv;
      return out;
    };
    Tensor3 y = cbn.forward(x, c, Mode::kTrain);
    input.g = cbn.backward(weighted_sum_grad(y)).v;
    const auto rep =
        grad_check(loss, {&cbn.film.pred.w, &cbn.film.pred.b, &input}, 16, 1e-5);
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("concat conditioning") {
  auto rng = make_rng(31, "init");

  SUBCASE("zero projection appends an all-zero channel") {
    ConcatCond cc("cc", 4, rng);
    std::fill(cc.w.w.begin(), cc.w.w.end(), 0.0);
    cc.b.w[0] = 0.0;
    Tensor3 x = random_tensor(2, 3, 5, 32);
    Tensor3 y = cc.forward(x, random_cond(2, 4, 33));
    REQUIRE(y.c == 4);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 5; ++k) CHECK(y.at(i, j, k) == x.at(i, j, k));
      }
      for (int k = 0; k < 5; ++k) CHECK(y.at(i, 3, k) == 0.0);
    }
  }

  SUBCASE("direct broadcast") {
    ConcatCond cc("cc", 2, rng);
    std::fill(cc.w.w.begin(), cc.w.w.end(), 0.0);
    cc.b.w[0] = 3.0;
    Tensor3 x(1, 1, 2);
    x.v = {1, 2};
    Tensor3 y = cc.forward(x, random_cond(1, 2, 34));
    REQUIRE(y.c == 2);
    CHECK(y.v == std::vector<double>{1, 2, 3, 3});
  }

  SUBCASE("proj-bias gradient of sum(y^2) is 2*sum(appended)") {
    ConcatCond cc("cc", 3, rng);
    Tensor3 x = random_tensor(3, 2, 4, 35);
    CondVector c = random_cond(3, 3, 36);
    Tensor3 y = cc.forward(x, c);
    double appended = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 4; ++k) appended += y.at(i, 2, k);
    }
    Tensor3 dy(3, 3, 4);
    for (size_t i = 0; i < y.size(); ++i) dy.v[i] = 2.0 * y.v[i];
    cc.backward(dy);
    CHECK(cc.b.g[0] == doctest::Approx(2.0 * appended).epsilon(1e-12));

    // and the same via finite differences
    Param input("input", x.size());
    input.w = x.v;
    auto loss = [&]() {
      Tensor3 xi(3, 2, 4);
      xi.v = input.w;
      Tensor3 yy = cc.forward(xi, c);
      double acc = 0.0;
      for (double v : yy.v) acc += v * v;
      return acc;
    };
    cc.w.zero_grad();
    cc.b.zero_grad();
    Tensor3 y2 = cc.forward(x, c);
    Tensor3 dy2(3, 3, 4);
    for (size_t i = 0; i < y2.size(); ++i) dy2.v[i] = 2.0 * y2.v[i];
    input.g = cc.backward(dy2).v;
    const auto rep = grad_check(loss, {&cc.w, &cc.b, &input}, 16, 1e-5);
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("softmax cross-entropy") {
  SUBCASE("uniform weights equal unweighted loss and probs sum to one") {
    Tensor3 logits = random_tensor(6, 5, 1, 41, -3.0, 3.0);
    std::vector<int> labels{0, 1, 2, 3, 4, 0};
    SoftmaxCrossEntropy ce1, ce2;
    const double a = ce1.forward(logits, labels);
    const std::vector<double> w(5, 1.0);
    const double b = ce2.forward(logits, labels, w);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    for (int i = 0; i < 6; ++i) {
      double s = 0.0;
      for (int j = 0; j < 5; ++j) s += ce1.probs()[i * 5 + j];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("loss vanishes as the true logit dominates") {
    std::vector<int> labels{1};
    double prev = 1e9;
    for (double gap : {2.0, 10.0, 30.0}) {
      Tensor3 logits(1, 3, 1);
      logits.v = {0.0, gap, 0.0};
      SoftmaxCrossEntropy ce;
      const double l = ce.forward(logits, labels);
      CHECK(l < prev);
      prev = l;
    }
    CHECK(prev < 1e-10);
  }

  SUBCASE("weight vector length must match classes") {
    Tensor3 logits(2, 3, 1);
    std::vector<int> labels{0, 1};
    std::vector<double> w{1.0, 2.0};
    SoftmaxCrossEntropy ce;
    CHECK_THROWS_AS(ce.forward(logits, labels, w), std::invalid_argument);
  }

  SUBCASE("gradcheck with class weights") {
    Tensor3 logits = random_tensor(4, 3, 1, 42, -2.0, 2.0);
    std::vector<int> labels{2, 0, 1, 2};
    std::vector<double> w{0.5, 1.5, 1.0};
    SoftmaxCrossEntropy ce;
    Param input("logits", logits.size());
    input.w = logits.v;
    auto loss = [&]() {
      Tensor3 li(4, 3, 1);
      li.v = input.w;
      SoftmaxCrossEntropy c2;
      return c2.forward(li, labels, w);
    };
    ce.forward(logits, labels, w);
    input.g = ce.backward().v;
    const auto rep = grad_check(loss, {&input}, 12, 1e-5);
    CHECK(rep.max_rel_err <= 1e-6);
  }
}

TEST_CASE("global average pool gradcheck") {
  GlobalAvgPool gap;
  Tensor3 x = random_tensor(2, 3, 8, 51);
  Param input("input", x.size());
  input.w = x.v;
  auto loss = [&]() {
    Tensor3 xi(2, 3, 8);
    xi.v = input.w;
    return weighted_sum(gap.forward(xi));
  };
  Tensor3 y = gap.forward(x);
  input.g = gap.backward(weighted_sum_grad(y)).v;
  const auto rep = grad_check(loss, {&input}, 24, 1e-5);
  CHECK(rep.max_rel_err <= 1e-8);
}

TEST_CASE("gru: degenerate sequence and BPTT gradients") {
  auto rng = make_rng(61, "init");

  SUBCASE("T=1 equals a single cell application") {
    GRU gru("gru", 3, 4, rng);
    Tensor3 x = random_tensor(2, 3, 1, 62);
    Tensor3 h1 = gru.forward({x});
    Tensor3 h2 = gru.forward({x});
    for (size_t i = 0; i < h1.size(); ++i) CHECK(h1.v[i] == h2.v[i]);
  }

  SUBCASE("three-step gradcheck") {
    GRU gru("gru", 3, 4, rng);
    std::vector<Tensor3> xs{random_tensor(2, 3, 1, 63),
                            random_tensor(2, 3, 1, 64),
                            random_tensor(2, 3, 1, 65)};
    Param input("input", xs[0].size() * 3);
    for (int t = 0; t < 3; ++t) {
      std::copy(xs[t].v.begin(), xs[t].v.end(),
                input.w.begin() + t * xs[0].size());
    }
    auto loss = [&]() {
      std::vector<Tensor3> xi(3, Tensor3(2, 3, 1));
      for (int t = 0; t < 3; ++t) {
        std::copy(input.w.begin() + t * xs[0].size(),
                  input.w.begin() + (t + 1) * xs[0].size(), xi[t].v.begin());
      }
      return weighted_sum(gru.forward(xi));
    };
    Tensor3 h = gru.forward(xs);
    auto dxs = gru.backward(weighted_sum_grad(h));
    for (int t = 0; t < 3; ++t) {
      std::copy(dxs[t].v.begin(), dxs[t].v.end(),
                input.g.begin() + t * xs[0].size());
    }
    const auto rep = grad_check(
        loss, {&gru.w_ih, &gru.w_hh, &gru.b_ih, &gru.b_hh, &input}, 12, 1e-5);
    CHECK(rep.max_rel_err <= 1e-4);
    CHECK(rep.max_rel_err <= 1e-6);  // doubles should do much better
  }
}
