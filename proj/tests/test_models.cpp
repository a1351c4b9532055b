#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "hrrp/gradcheck.hpp"
#include "hrrp/models.hpp"
#include "hrrp/rng.hpp"

using namespace hrrp;
using namespace hrrp::models;
using nn::CondVector;
using nn::Mode;
using nn::Tensor3;

namespace {
constexpr double kPi = 3.14159265358979323846;

Tensor3 random_profiles(int n, int l, uint64_t seed) {
  Tensor3 x(n, 1, l);
  auto rng = make_rng(seed, "profiles");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : x.v) v = u(rng);
  return x;
}

CondVector angles_of(const std::vector<double>& phis) {
  return nn::encode_angles(phis, 2);
}

BackboneSpec small_spec(Family f, Conditioning c, int l = 32) {
  BackboneSpec s;
  s.family = f;
  s.conditioning = c;
  s.channels = f == Family::kMlp ? std::vector<int>{24, 16}
                                 : std::vector<int>{6, 8};
  s.kernel = 5;
  s.n_classes = 3;
  s.input_len = l;
  return s;
}
}  // namespace

TEST_CASE("unconditioned models reject angles and are angle-blind") {
  OneViewModel m(small_spec(Family::kResnet, Conditioning::kNone), 7);
  Tensor3 x = random_profiles(4, 32, 1);
  Tensor3 a = m.forward(x, nullptr, Mode::kEval);
  Tensor3 b = m.forward(x, nullptr, Mode::kEval);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.v[i] == b.v[i]);

  CondVector c = angles_of({0.1, 0.2, 0.3, 0.4});
  CHECK_THROWS_AS(m.forward(x, &c, Mode::kEval), std::invalid_argument);

  OneViewModel mc(small_spec(Family::kResnet, Conditioning::kFilm), 7);
  CHECK_THROWS_AS(mc.forward(x, nullptr, Mode::kEval), std::invalid_argument);
}

TEST_CASE("identity start: film and cbn logits equal the unconditioned model") {
  for (Family f : {Family::kResnet, Family::kConv, Family::kMlp}) {
    Tensor3 x = random_profiles(5, 32, 2);
    CondVector c = angles_of({0.3, 1.1, 2.9, 4.4, 5.8});
    OneViewModel none(small_spec(f, Conditioning::kNone), 99);
    OneViewModel film(small_spec(f, Conditioning::kFilm), 99);
    OneViewModel cbn(small_spec(f, Conditioning::kCbn), 99);

    for (Mode mode : {Mode::kTrain, Mode::kEval}) {
      Tensor3 l0 = none.forward(x, nullptr, mode);
      Tensor3 l1 = film.forward(x, &c, mode);
      Tensor3 l2 = cbn.forward(x, &c, mode);
      for (size_t i = 0; i < l0.size(); ++i) {
        CHECK(l0.v[i] == l1.v[i]);
        CHECK(l0.v[i] == l2.v[i]);
      }
    }
  }
}

TEST_CASE("resnet parameter count matches the analytic formula") {
  BackboneSpec s;  // defaults: 16/32/64, k=7, L=128
  s.n_classes = 10;
  s.resolve_defaults();
  OneViewModel m(s, 3);

  auto conv_params = [](int cin, int cout, int k) { return cout * cin * k + cout; };
  size_t expect = 0;
  expect += conv_params(1, 16, 7) + 2 * 16;            // stem conv + bn
  expect += conv_params(16, 16, 7) + 2 * 16;           // b0 conv1+bn1
  expect += conv_params(16, 16, 7) + 2 * 16;           // b0 conv2+bn2
  expect += 2 * 16;                                    // b0 site bn
  expect += conv_params(16, 32, 7) + 2 * 32;           // b1 conv1+bn1
  expect += conv_params(32, 32, 7) + 2 * 32;           // b1 conv2+bn2
  expect += conv_params(16, 32, 1) + 2 * 32 + 2 * 32;  // b1 proj(+bn), site bn
  expect += conv_params(32, 64, 7) + 2 * 64;           // b2 conv1+bn1
  expect += conv_params(64, 64, 7) + 2 * 64;           // b2 conv2+bn2
  expect += conv_params(32, 64, 1) + 2 * 64 + 2 * 64;  // b2 proj(+bn), site bn
  expect += 64 * 10 + 10;                              // head
  CHECK(m.param_count() == expect);
}

TEST_CASE("one-view determinism and batch equivariance in eval mode") {
  OneViewModel m(small_spec(Family::kConv, Conditioning::kFilm), 11);
  const int n = 6;
  Tensor3 x = random_profiles(n, 32, 3);
  std::vector<double> phis{0.1, 0.9, 1.7, 2.5, 3.3, 4.1};
  CondVector c = angles_of(phis);

  SUBCASE("identical rows give identical logits") {
    Tensor3 same(n, 1, 32);
    for (int i = 0; i < n; ++i) {
      std::copy(x.row(0, 0), x.row(0, 0) + 32, same.row(i, 0));
    }
    CondVector csame = angles_of(std::vector<double>(n, 1.3));
    Tensor3 logits = m.forward(same, &csame, Mode::kEval);
    for (int i = 1; i < n; ++i) {
      for (int j = 0; j < logits.c; ++j) {
        CHECK(logits.at(i, j, 0) == logits.at(0, j, 0));
      }
    }
  }

  SUBCASE("batch permutation permutes logits") {
    Tensor3 logits = m.forward(x, &c, Mode::kEval);
    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    Tensor3 xp(n, 1, 32);
    std::vector<double> phis_p(n);
    for (int i = 0; i < n; ++i) {
      std::copy(x.row(perm[i], 0), x.row(perm[i], 0) + 32, xp.row(i, 0));
      phis_p[i] = phis[perm[i]];
    }
    CondVector cp = angles_of(phis_p);
    Tensor3 lp = m.forward(xp, &cp, Mode::kEval);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < logits.c; ++j) {
        CHECK(lp.at(i, j, 0) == doctest::Approx(logits.at(perm[i], j, 0)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("a trained conditioned model separates phi from phi+pi") {
  // one fixed profile; the label is carried entirely by the angle
  auto spec = small_spec(Family::kMlp, Conditioning::kFilm, 16);
  spec.n_classes = 2;
  OneViewModel m(spec, 5);
  nn::SoftmaxCrossEntropy ce;
  auto params = m.params();

  Tensor3 proto = random_profiles(1, 16, 9);
  auto rng = make_rng(10, "train");
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  for (int step = 0; step < 200; ++step) {
    const int n = 16;
    Tensor3 x(n, 1, 16);
    std::vector<double> phis(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      std::copy(proto.row(0, 0), proto.row(0, 0) + 16, x.row(i, 0));
      phis[i] = u(rng);
      labels[i] = phis[i] < kPi ? 0 : 1;
    }
    CondVector c = angles_of(phis);
    for (auto* p : params) p->zero_grad();
    Tensor3 logits = m.forward(x, &c, Mode::kTrain);
    ce.forward(logits, labels);
    m.backward(ce.backward());
    for (auto* p : params) {
      for (size_t j = 0; j < p->w.size(); ++j) p->w[j] -= 0.05 * p->g[j];
    }
  }

  Tensor3 x1(1, 1, 16);
  std::copy(proto.row(0, 0), proto.row(0, 0) + 16, x1.row(0, 0));
  CondVector ca = angles_of({0.3 * kPi});
  CondVector cb = angles_of({1.3 * kPi});
  Tensor3 la = m.forward(x1, &ca, Mode::kEval);
  Tensor3 lb = m.forward(x1, &cb, Mode::kEval);
  double diff = 0.0;
  for (size_t i = 0; i < la.size(); ++i) {
    diff = std::max(diff, std::fabs(la.v[i] - lb.v[i]));
  }
  CHECK(diff > 1e-3);
  // and the learned decision actually flips
  CHECK((la.at(0, 0, 0) > la.at(0, 1, 0)) != (lb.at(0, 0, 0) > lb.at(0, 1, 0)));
}

TEST_CASE("multi-view aggregation") {
  auto spec = small_spec(Family::kConv, Conditioning::kNone);
  SequenceSpec seq;
  seq.seq_len = 4;
  seq.hidden = 8;

  SUBCASE("mean pooling is order-invariant") {
    seq.aggregator = Aggregator::kMeanPool;
    MultiViewModel m(spec, seq, 21);
    const int n = 3, t = 4;
    Tensor3 flat = random_profiles(n * t, 32, 22);
    Tensor3 l0 = m.forward(flat, nullptr, t, Mode::kEval);

    // reverse each sequence's steps
    Tensor3 rev(n * t, 1, 32);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < t; ++k) {
        std::copy(flat.row(i * t + k, 0), flat.row(i * t + k, 0) + 32,
                  rev.row(i * t + (t - 1 - k), 0));
      }
    }
    Tensor3 l1 = m.forward(rev, nullptr, t, Mode::kEval);
    for (size_t i = 0; i < l0.size(); ++i) {
      CHECK(l0.v[i] == doctest::Approx(l1.v[i]).epsilon(1e-12));
    }
  }

  SUBCASE("gru aggregation is order-sensitive") {
    seq.aggregator = Aggregator::kGru;
    MultiViewModel m(spec, seq, 23);
    const int n = 2, t = 4;
    Tensor3 flat = random_profiles(n * t, 32, 24);
    Tensor3 l0 = m.forward(flat, nullptr, t, Mode::kEval);
    Tensor3 rev(n * t, 1, 32);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < t; ++k) {
        std::copy(flat.row(i * t + k, 0), flat.row(i * t + k, 0) + 32,
                  rev.row(i * t + (t - 1 - k), 0));
      }
    }
    Tensor3 l1 = m.forward(rev, nullptr, t, Mode::kEval);
    double diff = 0.0;
    for (size_t i = 0; i < l0.size(); ++i) {
      diff = std::max(diff, std::fabs(l0.v[i] - l1.v[i]));
    }
    CHECK(diff > 1e-9);
  }

  SUBCASE("ragged batches are rejected") {
    seq.aggregator = Aggregator::kGru;
    MultiViewModel m(spec, seq, 25);
    Tensor3 flat = random_profiles(7, 32, 26);  // 7 % 4 != 0
    CHECK_THROWS_AS(m.forward(flat, nullptr, 4, Mode::kEval),
                    std::invalid_argument);
  }

  SUBCASE("shared extractor: per-step latent equals the one-view latent") {
    seq.aggregator = Aggregator::kGru;
    MultiViewModel m(spec, seq, 27);
    const int t = 4;
    Tensor3 flat = random_profiles(2 * t, 32, 28);
    Tensor3 lat_all = m.backbone().forward(flat, nullptr, Mode::kEval);
    for (int row : {0, 3, 5}) {
      Tensor3 one(1, 1, 32);
      std::copy(flat.row(row, 0), flat.row(row, 0) + 32, one.row(0, 0));
      Tensor3 lat_one = m.backbone().forward(one, nullptr, Mode::kEval);
      for (int f = 0; f < lat_all.c; ++f) {
        CHECK(lat_one.at(0, f, 0) ==
              doctest::Approx(lat_all.at(row, f, 0)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("full conditioned backbones pass the composite gradient check") {
  for (Conditioning cond : {Conditioning::kConcat, Conditioning::kFilm,
                            Conditioning::kCbn}) {
    auto spec = small_spec(Family::kResnet, cond);
    OneViewModel m(spec, 31);
    const int n = 3;
    Tensor3 x = random_profiles(n, 32, 32);
    CondVector c = angles_of({0.5, 2.0, 4.5});
    std::vector<int> labels{0, 1, 2};
    auto params = m.params();

    nn::SoftmaxCrossEntropy ce;
    auto loss = [&]() {
      auto state = m.state();
      std::vector<std::vector<double>> saved;
      for (auto& s : state) saved.push_back(*s.data);
      nn::SoftmaxCrossEntropy c2;
      const double out = c2.forward(m.forward(x, &c, Mode::kTrain), labels);
      for (size_t i = 0; i < state.size(); ++i) *state[i].data = saved[i];
      return out;
    };
    for (auto* p : params) p->zero_grad();
    ce.forward(m.forward(x, &c, Mode::kTrain), labels);
    m.backward(ce.backward());
    const auto rep = nn::grad_check(loss, params, 4, 1e-5);
    CHECK(rep.max_rel_err <= 1e-4);
  }
}
