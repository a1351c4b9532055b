#include "hrrp/models.hpp"

#include <cstring>
#include <stdexcept>

#include "hrrp/rng.hpp"

namespace hrrp::models {

using nn::CondVector;
using nn::Mode;
using nn::Param;
using nn::StateRef;
using nn::Tensor3;

std::string to_string(Family f) {
  switch (f) {
    case Family::kMlp: return "mlp";
    case Family::kConv: return "conv";
    case Family::kResnet: return "resnet";
  }
  return "?";
}

std::string to_string(Conditioning c) {
  switch (c) {
    case Conditioning::kNone: return "none";
    case Conditioning::kConcat: return "concat";
    case Conditioning::kFilm: return "film";
    case Conditioning::kCbn: return "cbn";
  }
  return "?";
}

std::string to_string(Aggregator a) {
  return a == Aggregator::kMeanPool ? "mean_pool" : "gru";
}

Family family_from_string(const std::string& s) {
  if (s == "mlp") return Family::kMlp;
  if (s == "conv") return Family::kConv;
  if (s == "resnet") return Family::kResnet;
  throw std::invalid_argument("unknown backbone family: " + s);
}

Conditioning conditioning_from_string(const std::string& s) {
  if (s == "none") return Conditioning::kNone;
  if (s == "concat") return Conditioning::kConcat;
  if (s == "film") return Conditioning::kFilm;
  if (s == "cbn") return Conditioning::kCbn;
  throw std::invalid_argument("unknown conditioning: " + s);
}

Aggregator aggregator_from_string(const std::string& s) {
  if (s == "mean_pool") return Aggregator::kMeanPool;
  if (s == "gru") return Aggregator::kGru;
  throw std::invalid_argument("unknown aggregator: " + s);
}

std::vector<int> BackboneSpec::default_channels(Family f) {
  switch (f) {
    case Family::kMlp: return {256, 128, 64};
    case Family::kConv: return {16, 32, 64};
    case Family::kResnet: return {16, 32, 64};
  }
  return {};
}

void BackboneSpec::resolve_defaults() {
  if (channels.empty()) channels = default_channels(family);
}

void BackboneSpec::validate() const {
  if (channels.empty()) throw std::invalid_argument("BackboneSpec: no blocks");
  for (int c : channels) {
    if (c < 1) throw std::invalid_argument("BackboneSpec: bad channel count");
  }
  if (kernel < 1 || n_classes < 2 || input_len < 2 || cond_dim < 1) {
    throw std::invalid_argument("BackboneSpec: bad dimensions");
  }
}

void SequenceSpec::validate() const {
  if (seq_len < 2) throw std::invalid_argument("SequenceSpec: T must be >= 2");
  if (hidden < 1) throw std::invalid_argument("SequenceSpec: bad hidden width");
}

// ------------------------------------------------------- ConditioningSite

ConditioningSite::ConditioningSite(const std::string& name, Conditioning m,
                                   int channels_, int cond_dim,
                                   std::mt19937_64& rng)
    : mode(m), channels(channels_) {
  if (mode == Conditioning::kCbn) {
    cbn_ = std::make_unique<nn::CBN>(name + ".cbn", cond_dim, channels);
    return;
  }
  bn_ = std::make_unique<nn::BatchNorm1d>(name + ".bn", channels);
  if (mode == Conditioning::kFilm) {
    film_ = std::make_unique<nn::FiLM>(name + ".film", cond_dim, channels);
  } else if (mode == Conditioning::kConcat) {
    concat_ = std::make_unique<nn::ConcatCond>(name + ".concat", cond_dim, rng);
  }
}

int ConditioningSite::out_channels() const {
  return mode == Conditioning::kConcat ? channels + 1 : channels;
}

Tensor3 ConditioningSite::forward(const Tensor3& x, const CondVector* cond,
                                  Mode m) {
  if (mode != Conditioning::kNone && cond == nullptr) {
    throw std::invalid_argument("ConditioningSite: missing angle input");
  }
  switch (mode) {
    case Conditioning::kNone:
      return bn_->forward(x, m);
    case Conditioning::kFilm:
      return film_->forward(bn_->forward(x, m), *cond);
    case Conditioning::kConcat:
      return concat_->forward(bn_->forward(x, m), *cond);
    case Conditioning::kCbn:
      return cbn_->forward(x, *cond, m);
  }
  throw std::logic_error("unreachable");
}

Tensor3 ConditioningSite::backward(const Tensor3& dy) {
  switch (mode) {
    case Conditioning::kNone:
      return bn_->backward(dy);
    case Conditioning::kFilm:
      return bn_->backward(film_->backward(dy));
    case Conditioning::kConcat:
      return bn_->backward(concat_->backward(dy));
    case Conditioning::kCbn:
      return cbn_->backward(dy);
  }
  throw std::logic_error("unreachable");
}

void ConditioningSite::collect(std::vector<Param*>& out) {
  if (bn_) bn_->collect(out);
  if (film_) film_->collect(out);
  if (concat_) concat_->collect(out);
  if (cbn_) cbn_->collect(out);
}

void ConditioningSite::collect_state(std::vector<StateRef>& out) {
  if (bn_) bn_->collect_state(out);
  if (cbn_) cbn_->collect_state(out);
}

// ---------------------------------------------------------------- helpers

namespace {

Tensor3 add(const Tensor3& a, const Tensor3& b) {
  Tensor3 y = a;
  for (size_t i = 0; i < y.size(); ++i) y.v[i] += b.v[i];
  return y;
}

// (N,1,L) <-> (N,L,1) without reordering (layouts coincide)
Tensor3 flatten_profile(const Tensor3& x) {
  Tensor3 y(x.n, x.c * x.l, 1);
  y.v = x.v;
  return y;
}

Tensor3 unflatten_profile(const Tensor3& d, int c, int l) {
  Tensor3 y(d.n, c, l);
  y.v = d.v;
  return y;
}

}  // namespace

// ---------------------------------------------------------------- ResNet

namespace {

class ResBlock {
 public:
  ResBlock(const std::string& name, int cin, int cout, int kernel, int stride,
           Conditioning cond_mode, int cond_dim, std::mt19937_64& rng)
      : conv1_(name + ".conv1", cin, cout, kernel, stride, kernel / 2, rng),
        bn1_(name + ".bn1", cout),
        conv2_(name + ".conv2", cout, cout, kernel, 1, kernel / 2, rng),
        bn2_(name + ".bn2", cout),
        site_(name + ".site", cond_mode, cout, cond_dim, rng) {
    if (cin != cout || stride != 1) {
      proj_ = std::make_unique<nn::Conv1d>(name + ".proj", cin, cout, 1,
                                           stride, 0, rng);
      proj_bn_ = std::make_unique<nn::BatchNorm1d>(name + ".proj_bn", cout);
    }
  }

  int out_channels() const { return site_.out_channels(); }

  Tensor3 forward(const Tensor3& x, const CondVector* cond, Mode mode) {
    Tensor3 a = relu1_.forward(bn1_.forward(conv1_.forward(x), mode));
    Tensor3 m = bn2_.forward(conv2_.forward(a), mode);
    Tensor3 sc = proj_ ? proj_bn_->forward(proj_->forward(x), mode) : x;
    return relu2_.forward(site_.forward(add(m, sc), cond, mode));
  }

  Tensor3 backward(const Tensor3& dy) {
    Tensor3 dh = site_.backward(relu2_.backward(dy));
    Tensor3 dmain = conv1_.backward(
        bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(dh)))));
    Tensor3 dsc = proj_ ? proj_->backward(proj_bn_->backward(dh)) : dh;
    return add(dmain, dsc);
  }

  void collect(std::vector<Param*>& out) {
    conv1_.collect(out);
    bn1_.collect(out);
    conv2_.collect(out);
    bn2_.collect(out);
    if (proj_) {
      proj_->collect(out);
      proj_bn_->collect(out);
    }
    site_.collect(out);
  }

  void collect_state(std::vector<StateRef>& out) {
    bn1_.collect_state(out);
    bn2_.collect_state(out);
    if (proj_bn_) proj_bn_->collect_state(out);
    site_.collect_state(out);
  }

 private:
  nn::Conv1d conv1_;
  nn::BatchNorm1d bn1_;
  nn::Conv1d conv2_;
  nn::BatchNorm1d bn2_;
  nn::ReLU relu1_, relu2_;
  std::unique_ptr<nn::Conv1d> proj_;
  std::unique_ptr<nn::BatchNorm1d> proj_bn_;
  ConditioningSite site_;
};

class ResnetBackbone : public Backbone {
 public:
  // stride-2 stem: halves the length axis before the residual stages
  ResnetBackbone(const BackboneSpec& spec, std::mt19937_64& rng)
      : stem_(std::make_unique<nn::Conv1d>("stem.conv", 1, spec.channels[0],
                                           spec.kernel, 2, spec.kernel / 2,
                                           rng)),
        stem_bn_("stem.bn", spec.channels[0]) {
    int cin = spec.channels[0];
    for (size_t i = 0; i < spec.channels.size(); ++i) {
      const int stride = i == 0 ? 1 : 2;
      blocks_.push_back(std::make_unique<ResBlock>(
          "block" + std::to_string(i), cin, spec.channels[i], spec.kernel,
          stride, spec.conditioning, spec.cond_dim, rng));
      cin = blocks_.back()->out_channels();
    }
    latent_ = cin;
  }

  Tensor3 forward(const Tensor3& x, const CondVector* cond, Mode mode) override {
    Tensor3 h = stem_relu_.forward(stem_bn_.forward(stem_->forward(x), mode));
    for (auto& b : blocks_) h = b->forward(h, cond, mode);
    return pool_.forward(h);
  }

  Tensor3 backward(const Tensor3& dlatent) override {
    Tensor3 d = pool_.backward(dlatent);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
      d = (*it)->backward(d);
    }
    return stem_->backward(stem_bn_.backward(stem_relu_.backward(d)));
  }

  int latent_dim() const override { return latent_; }

  void collect(std::vector<Param*>& out) override {
    stem_->collect(out);
    stem_bn_.collect(out);
    for (auto& b : blocks_) b->collect(out);
  }

  void collect_state(std::vector<StateRef>& out) override {
    stem_bn_.collect_state(out);
    for (auto& b : blocks_) b->collect_state(out);
  }

 private:
  std::unique_ptr<nn::Conv1d> stem_;
  nn::BatchNorm1d stem_bn_;
  nn::ReLU stem_relu_;
  std::vector<std::unique_ptr<ResBlock>> blocks_;
  nn::GlobalAvgPool pool_;
  int latent_ = 0;
};

// ------------------------------------------------------------------ Conv

class ConvBackbone : public Backbone {
 public:
  ConvBackbone(const BackboneSpec& spec, std::mt19937_64& rng) {
    int cin = 1;
    for (size_t i = 0; i < spec.channels.size(); ++i) {
      const std::string name = "block" + std::to_string(i);
      convs_.push_back(std::make_unique<nn::Conv1d>(
          name + ".conv", cin, spec.channels[i], spec.kernel, 2,
          spec.kernel / 2, rng));
      sites_.push_back(std::make_unique<ConditioningSite>(
          name + ".site", spec.conditioning, spec.channels[i], spec.cond_dim,
          rng));
      relus_.emplace_back(std::make_unique<nn::ReLU>());
      cin = sites_.back()->out_channels();
    }
    latent_ = cin;
  }

  Tensor3 forward(const Tensor3& x, const CondVector* cond, Mode mode) override {
    Tensor3 h = x;
    for (size_t i = 0; i < convs_.size(); ++i) {
      h = relus_[i]->forward(sites_[i]->forward(convs_[i]->forward(h), cond, mode));
    }
    return pool_.forward(h);
  }

  Tensor3 backward(const Tensor3& dlatent) override {
    Tensor3 d = pool_.backward(dlatent);
    for (int i = int(convs_.size()) - 1; i >= 0; --i) {
      d = convs_[i]->backward(sites_[i]->backward(relus_[i]->backward(d)));
    }
    return d;
  }

  int latent_dim() const override { return latent_; }

  void collect(std::vector<Param*>& out) override {
    for (size_t i = 0; i < convs_.size(); ++i) {
      convs_[i]->collect(out);
      sites_[i]->collect(out);
    }
  }

  void collect_state(std::vector<StateRef>& out) override {
    for (auto& s : sites_) s->collect_state(out);
  }

 private:
  std::vector<std::unique_ptr<nn::Conv1d>> convs_;
  std::vector<std::unique_ptr<ConditioningSite>> sites_;
  std::vector<std::unique_ptr<nn::ReLU>> relus_;
  nn::GlobalAvgPool pool_;
  int latent_ = 0;
};

// ------------------------------------------------------------------- MLP

class MlpBackbone : public Backbone {
 public:
  MlpBackbone(const BackboneSpec& spec, std::mt19937_64& rng)
      : in_len_(spec.input_len) {
    int cin = spec.input_len;
    for (size_t i = 0; i < spec.channels.size(); ++i) {
      const std::string name = "hidden" + std::to_string(i);
      linears_.push_back(
          std::make_unique<nn::Linear>(name + ".fc", cin, spec.channels[i], rng));
      sites_.push_back(std::make_unique<ConditioningSite>(
          name + ".site", spec.conditioning, spec.channels[i], spec.cond_dim,
          rng));
      relus_.emplace_back(std::make_unique<nn::ReLU>());
      cin = sites_.back()->out_channels();
    }
    latent_ = cin;
  }

  Tensor3 forward(const Tensor3& x, const CondVector* cond, Mode mode) override {
    Tensor3 h = flatten_profile(x);
    for (size_t i = 0; i < linears_.size(); ++i) {
      h = relus_[i]->forward(
          sites_[i]->forward(linears_[i]->forward(h), cond, mode));
    }
    return h;
  }

  Tensor3 backward(const Tensor3& dlatent) override {
    Tensor3 d = dlatent;
    for (int i = int(linears_.size()) - 1; i >= 0; --i) {
      d = linears_[i]->backward(sites_[i]->backward(relus_[i]->backward(d)));
    }
    return unflatten_profile(d, 1, in_len_);
  }

  int latent_dim() const override { return latent_; }

  void collect(std::vector<Param*>& out) override {
    for (size_t i = 0; i < linears_.size(); ++i) {
      linears_[i]->collect(out);
      sites_[i]->collect(out);
    }
  }

  void collect_state(std::vector<StateRef>& out) override {
    for (auto& s : sites_) s->collect_state(out);
  }

 private:
  std::vector<std::unique_ptr<nn::Linear>> linears_;
  std::vector<std::unique_ptr<ConditioningSite>> sites_;
  std::vector<std::unique_ptr<nn::ReLU>> relus_;
  int latent_ = 0;
  int in_len_;
};

}  // namespace

std::unique_ptr<Backbone> build_backbone(const BackboneSpec& spec,
                                         std::mt19937_64& rng) {
  spec.validate();
  switch (spec.family) {
    case Family::kResnet: return std::make_unique<ResnetBackbone>(spec, rng);
    case Family::kConv: return std::make_unique<ConvBackbone>(spec, rng);
    case Family::kMlp: return std::make_unique<MlpBackbone>(spec, rng);
  }
  throw std::logic_error("unreachable");
}

// ----------------------------------------------------------- OneViewModel

OneViewModel::OneViewModel(const BackboneSpec& spec, uint64_t init_seed)
    : spec_(spec) {
  spec_.resolve_defaults();
  spec_.validate();
  auto rng = make_rng(init_seed, "model_init");
  backbone_ = build_backbone(spec_, rng);
  head_ = std::make_unique<nn::Linear>("head", backbone_->latent_dim(),
                                       spec_.n_classes, rng);
}

Tensor3 OneViewModel::forward(const Tensor3& profiles, const CondVector* cond,
                              Mode mode) {
  const bool wants = spec_.conditioning != Conditioning::kNone;
  if (wants != (cond != nullptr)) {
    throw std::invalid_argument(
        "OneViewModel: angle input must be present iff conditioning is enabled");
  }
  return head_->forward(backbone_->forward(profiles, cond, mode));
}

Tensor3 OneViewModel::backward(const Tensor3& dlogits) {
  return backbone_->backward(head_->backward(dlogits));
}

std::vector<Param*> OneViewModel::params() {
  std::vector<Param*> out;
  backbone_->collect(out);
  head_->collect(out);
  return out;
}

std::vector<StateRef> OneViewModel::state() {
  std::vector<StateRef> out;
  backbone_->collect_state(out);
  return out;
}

size_t OneViewModel::param_count() {
  size_t n = 0;
  for (auto* p : params()) n += p->w.size();
  return n;
}

// --------------------------------------------------------- MultiViewModel

MultiViewModel::MultiViewModel(const BackboneSpec& spec,
                               const SequenceSpec& seq, uint64_t init_seed)
    : spec_(spec), seq_(seq) {
  spec_.resolve_defaults();
  spec_.validate();
  seq_.validate();
  auto rng = make_rng(init_seed, "model_init");
  backbone_ = build_backbone(spec_, rng);
  const int latent = backbone_->latent_dim();
  if (seq_.aggregator == Aggregator::kGru) {
    gru_ = std::make_unique<nn::GRU>("gru", latent, seq_.hidden, rng);
    head_ = std::make_unique<nn::Linear>("head", seq_.hidden, spec_.n_classes,
                                         rng);
  } else {
    head_ = std::make_unique<nn::Linear>("head", latent, spec_.n_classes, rng);
  }
}

Tensor3 MultiViewModel::forward(const Tensor3& flat_profiles,
                                const CondVector* cond, int seq_len,
                                Mode mode) {
  const bool wants = spec_.conditioning != Conditioning::kNone;
  if (wants != (cond != nullptr)) {
    throw std::invalid_argument(
        "MultiViewModel: angle input must be present iff conditioning is enabled");
  }
  if (seq_len < 1 || flat_profiles.n % seq_len != 0) {
    throw std::invalid_argument("MultiViewModel: ragged sequence batch");
  }
  t_ = seq_len;
  n_ = flat_profiles.n / seq_len;

  Tensor3 latents = backbone_->forward(flat_profiles, cond, mode);
  const int F = latents.c;

  if (seq_.aggregator == Aggregator::kMeanPool) {
    Tensor3 pooled(n_, F, 1);
    for (int i = 0; i < n_; ++i) {
      for (int t = 0; t < t_; ++t) {
        const double* lr = latents.row(i * t_ + t, 0);
        double* pr = pooled.row(i, 0);
        for (int f = 0; f < F; ++f) pr[f] += lr[f];
      }
      double* pr = pooled.row(i, 0);
      for (int f = 0; f < F; ++f) pr[f] /= t_;
    }
    return head_->forward(pooled);
  }

  std::vector<Tensor3> xs(t_, Tensor3(n_, F, 1));
  for (int t = 0; t < t_; ++t) {
    for (int i = 0; i < n_; ++i) {
      std::memcpy(xs[t].row(i, 0), latents.row(i * t_ + t, 0),
                  sizeof(double) * F);
    }
  }
  return head_->forward(gru_->forward(xs));
}

Tensor3 MultiViewModel::backward(const Tensor3& dlogits) {
  Tensor3 dagg = head_->backward(dlogits);
  const int F = backbone_->latent_dim();
  Tensor3 dlat(n_ * t_, F, 1);

  if (seq_.aggregator == Aggregator::kMeanPool) {
    for (int i = 0; i < n_; ++i) {
      const double* dr = dagg.row(i, 0);
      for (int t = 0; t < t_; ++t) {
        double* lr = dlat.row(i * t_ + t, 0);
        for (int f = 0; f < F; ++f) lr[f] = dr[f] / t_;
      }
    }
  } else {
    std::vector<Tensor3> dxs = gru_->backward(dagg);
    for (int t = 0; t < t_; ++t) {
      for (int i = 0; i < n_; ++i) {
        std::memcpy(dlat.row(i * t_ + t, 0), dxs[t].row(i, 0),
                    sizeof(double) * F);
      }
    }
  }
  return backbone_->backward(dlat);
}

std::vector<Param*> MultiViewModel::params() {
  std::vector<Param*> out;
  backbone_->collect(out);
  if (gru_) gru_->collect(out);
  head_->collect(out);
  return out;
}

std::vector<StateRef> MultiViewModel::state() {
  std::vector<StateRef> out;
  backbone_->collect_state(out);
  return out;
}

size_t MultiViewModel::param_count() {
  size_t n = 0;
  for (auto* p : params()) n += p->w.size();
  return n;
}

}  // namespace hrrp::models
