#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hrrp/layers.hpp"

namespace hrrp::models {

enum class Family { kMlp, kConv, kResnet };
enum class Conditioning { kNone, kConcat, kFilm, kCbn };
enum class Aggregator { kMeanPool, kGru };

std::string to_string(Family f);
std::string to_string(Conditioning c);
std::string to_string(Aggregator a);
Family family_from_string(const std::string& s);
Conditioning conditioning_from_string(const std::string& s);
Aggregator aggregator_from_string(const std::string& s);

struct BackboneSpec {
  Family family = Family::kResnet;
  std::vector<int> channels;  // per block; empty -> family default
  int kernel = 7;
  Conditioning conditioning = Conditioning::kNone;
  int n_classes = 2;
  int input_len = 128;
  int cond_dim = 4;

  static std::vector<int> default_channels(Family f);
  void resolve_defaults();
  void validate() const;
};

struct SequenceSpec {
  Aggregator aggregator = Aggregator::kGru;
  int hidden = 64;
  int seq_len = 10;
  void validate() const;
};

/// The per-block injection point: a batch normalization whose affine term is
/// either learnable (none / concat / film) or predicted from the conditioning
/// vector (cbn), followed by the selected conditioning op. Applied before the
/// block's closing nonlinearity. With identity-initialized predictors, film
/// and cbn sites produce exactly the unconditioned site's output.
class ConditioningSite {
 public:
  ConditioningSite(const std::string& name, Conditioning mode, int channels,
                   int cond_dim, std::mt19937_64& rng);
  int out_channels() const;
  nn::Tensor3 forward(const nn::Tensor3& x, const nn::CondVector* cond,
                      nn::Mode mode);
  nn::Tensor3 backward(const nn::Tensor3& dy);
  void collect(std::vector<nn::Param*>& out);
  void collect_state(std::vector<nn::StateRef>& out);

  Conditioning mode;
  int channels;

 private:
  std::unique_ptr<nn::BatchNorm1d> bn_;
  std::unique_ptr<nn::FiLM> film_;
  std::unique_ptr<nn::ConcatCond> concat_;
  std::unique_ptr<nn::CBN> cbn_;
};

/// Feature extractor: (N, 1, L) profiles -> (N, F, 1) latents.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual nn::Tensor3 forward(const nn::Tensor3& x, const nn::CondVector* cond,
                              nn::Mode mode) = 0;
  virtual nn::Tensor3 backward(const nn::Tensor3& dlatent) = 0;
  virtual int latent_dim() const = 0;
  virtual void collect(std::vector<nn::Param*>& out) = 0;
  virtual void collect_state(std::vector<nn::StateRef>& out) = 0;
};

std::unique_ptr<Backbone> build_backbone(const BackboneSpec& spec,
                                         std::mt19937_64& rng);

/// Single-profile classifier: backbone + linear head.
class OneViewModel {
 public:
  OneViewModel(const BackboneSpec& spec, uint64_t init_seed);

  /// profiles (N,1,L); cond must be present iff conditioning != none.
  nn::Tensor3 forward(const nn::Tensor3& profiles, const nn::CondVector* cond,
                      nn::Mode mode);
  nn::Tensor3 backward(const nn::Tensor3& dlogits);

  std::vector<nn::Param*> params();
  std::vector<nn::StateRef> state();
  size_t param_count();
  const BackboneSpec& spec() const { return spec_; }
  Backbone& backbone() { return *backbone_; }

 private:
  BackboneSpec spec_;
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<nn::Linear> head_;
};

/// Sequence classifier: shared backbone over T time steps plus a mean-pool
/// or GRU aggregator. Sequences are passed flattened, row (n, t) at index
/// n * T + t, so one backbone pass covers the whole batch.
class MultiViewModel {
 public:
  MultiViewModel(const BackboneSpec& spec, const SequenceSpec& seq,
                 uint64_t init_seed);

  nn::Tensor3 forward(const nn::Tensor3& flat_profiles,
                      const nn::CondVector* cond, int seq_len, nn::Mode mode);
  nn::Tensor3 backward(const nn::Tensor3& dlogits);

  std::vector<nn::Param*> params();
  std::vector<nn::StateRef> state();
  size_t param_count();
  const BackboneSpec& spec() const { return spec_; }
  const SequenceSpec& seq_spec() const { return seq_; }
  Backbone& backbone() { return *backbone_; }

 private:
  BackboneSpec spec_;
  SequenceSpec seq_;
  std::unique_ptr<Backbone> backbone_;
  std::unique_ptr<nn::GRU> gru_;
  std::unique_ptr<nn::Linear> head_;
  int t_ = 0, n_ = 0;
};

}  // namespace hrrp::models
