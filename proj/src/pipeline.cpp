#include "hrrp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "hrrp/rng.hpp"

namespace hrrp::pipeline {

using models::Conditioning;
using nn::CondVector;
using nn::Mode;
using nn::Tensor3;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string to_string(AngleSource a) {
  switch (a) {
    case AngleSource::kNone: return "none";
    case AngleSource::kReference: return "reference";
    case AngleSource::kPredicted: return "predicted";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw std::invalid_argument("unknown split: " + s);
}

AngleSource angle_source_from_string(const std::string& s) {
  if (s == "none") return AngleSource::kNone;
  if (s == "reference") return AngleSource::kReference;
  if (s == "predicted") return AngleSource::kPredicted;
  throw std::invalid_argument("unknown angle source: " + s);
}

std::vector<Split> stratified_split(std::span<const int> labels,
                                    double train_frac, double val_frac,
                                    uint64_t seed) {
  if (train_frac <= 0.0 || val_frac <= 0.0 || train_frac + val_frac >= 1.0) {
    throw std::invalid_argument("stratified_split: bad ratios");
  }
  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(int(i));
  }
  std::vector<Split> out(labels.size(), Split::kTrain);
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < 3) {
      throw std::invalid_argument("stratified_split: class " +
                                  std::to_string(cls) + " has < 3 records");
    }
    auto rng = make_rng(seed, "stratified_split", uint64_t(cls));
    std::shuffle(idx.begin(), idx.end(), rng);
    const int n = int(idx.size());
    int n_train = int(std::llround(train_frac * n));
    int n_val = int(std::llround(val_frac * n));
    n_train = std::max(1, n_train);
    n_val = std::max(1, n_val);
    while (n - n_train - n_val < 1) {
      if (n_train > 1) {
        --n_train;
      } else {
        --n_val;
      }
    }
    for (int i = 0; i < n; ++i) {
      out[idx[i]] = i < n_train            ? Split::kTrain
                    : i < n_train + n_val  ? Split::kVal
                                           : Split::kTest;
    }
  }
  return out;
}

std::vector<double> class_weights(std::span<const int> labels) {
  std::map<int, int> counts;
  int max_class = 0;
  for (int y : labels) {
    ++counts[y];
    max_class = std::max(max_class, y);
  }
  const int k = max_class + 1;
  std::vector<double> w(k, 0.0);
  for (int c = 0; c < k; ++c) {
    auto it = counts.find(c);
    if (it == counts.end() || it->second == 0) {
      throw std::invalid_argument("class_weights: class " + std::to_string(c) +
                                  " is empty");
    }
    w[c] = 1.0 / double(it->second);
  }
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / double(k);
  for (auto& v : w) v /= mean;
  return w;
}

AngleRad jitter_angle(AngleRad phi, double sigma_deg, std::mt19937_64& rng) {
  if (sigma_deg <= 0.0) return phi;
  std::normal_distribution<double> gauss(0.0, sigma_deg * kTwoPi / 360.0);
  return wrap_angle(phi.value() + gauss(rng));
}

SequenceBuild build_sequences(const Dataset& ds, std::span<const Split> split,
                              int seq_len, std::span<const int> eligible) {
  if (seq_len < 2) throw std::invalid_argument("build_sequences: T must be >= 2");
  if (split.size() != ds.records.size()) {
    throw std::invalid_argument("build_sequences: split size mismatch");
  }
  std::vector<int> pool;
  if (eligible.empty()) {
    pool.resize(ds.records.size());
    std::iota(pool.begin(), pool.end(), 0);
  } else {
    pool.assign(eligible.begin(), eligible.end());
  }

  // ship id is the class id; bucket by (ship, split)
  std::map<std::pair<int, int>, std::vector<int>> buckets;
  for (int i : pool) {
    buckets[{ds.records[i].class_id, int(split[i])}].push_back(i);
  }

  SequenceBuild out;
  for (auto& [key, idx] : buckets) {
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
      return ds.records[a].t < ds.records[b].t;
    });
    if (int(idx.size()) < seq_len) {
      ++out.small_buckets;
      out.dropped_records += int(idx.size());
      continue;
    }
    size_t pos = 0;
    while (pos + seq_len <= idx.size()) {
      SequenceSample s;
      s.records.assign(idx.begin() + pos, idx.begin() + pos + seq_len);
      s.label = key.first;
      s.split = Split(key.second);
      out.sequences.push_back(std::move(s));
      pos += seq_len;
    }
    out.dropped_records += int(idx.size() - pos);
  }
  return out;
}

MetricsReport metrics_from_confusion(const std::vector<std::vector<int>>& cm) {
  const int k = int(cm.size());
  MetricsReport rep;
  rep.confusion = cm;
  rep.precision.assign(k, 0.0);
  rep.recall.assign(k, 0.0);
  rep.f1.assign(k, 0.0);

  long total = 0, correct = 0;
  for (int i = 0; i < k; ++i) {
    if (int(cm[i].size()) != k) {
      throw std::invalid_argument("metrics: confusion matrix not square");
    }
    for (int j = 0; j < k; ++j) total += cm[i][j];
    correct += cm[i][i];
  }
  rep.accuracy = total > 0 ? double(correct) / double(total) : 0.0;

  double f1_sum = 0.0;
  for (int c = 0; c < k; ++c) {
    long tp = cm[c][c], fp = 0, fn = 0;
    for (int i = 0; i < k; ++i) {
      if (i != c) {
        fp += cm[i][c];
        fn += cm[c][i];
      }
    }
    const double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    rep.precision[c] = p;
    rep.recall[c] = r;
    rep.f1[c] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    f1_sum += rep.f1[c];
  }
  rep.macro_f1 = k > 0 ? f1_sum / k : 0.0;
  return rep;
}

MetricsReport compute_metrics(std::span<const int> y_true,
                              std::span<const int> y_pred, int n_classes) {
  if (y_true.size() != y_pred.size()) {
    throw std::invalid_argument("metrics: prediction count mismatch");
  }
  std::vector<std::vector<int>> cm(n_classes, std::vector<int>(n_classes, 0));
  for (size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= n_classes || y_pred[i] < 0 ||
        y_pred[i] >= n_classes) {
      throw std::invalid_argument("metrics: label out of range");
    }
    ++cm[y_true[i]][y_pred[i]];
  }
  return metrics_from_confusion(cm);
}

AngleSource TrainConfig::effective_angle_source() const {
  return backbone.conditioning == Conditioning::kNone ? AngleSource::kNone
                                                      : angle_source;
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch < 1 || lr <= 0.0 || momentum < 0.0 ||
      momentum >= 1.0) {
    throw std::invalid_argument("TrainConfig: bad optimizer settings");
  }
  if (backbone.conditioning != Conditioning::kNone &&
      angle_source == AngleSource::kNone) {
    throw std::invalid_argument(
        "TrainConfig: conditioned model needs reference or predicted angles");
  }
  if (multi_view) seq.validate();
}

std::vector<int> eligible_records(const Dataset& ds, AngleSource source) {
  std::vector<int> out;
  out.reserve(ds.records.size());
  for (size_t i = 0; i < ds.records.size(); ++i) {
    if (source == AngleSource::kPredicted) {
      if (!ds.records[i].has_aspect_pred || ds.pred_warmup[i]) continue;
    }
    out.push_back(int(i));
  }
  return out;
}

// --------------------------------------------------------------- training

namespace {

struct Sgd {
  double lr, momentum;
  std::vector<std::vector<double>> velocity;

  void init(const std::vector<nn::Param*>& params) {
    velocity.clear();
    for (auto* p : params) velocity.emplace_back(p->w.size(), 0.0);
  }
  void step(const std::vector<nn::Param*>& params) {
    for (size_t i = 0; i < params.size(); ++i) {
      auto& v = velocity[i];
      auto& w = params[i]->w;
      const auto& g = params[i]->g;
      for (size_t j = 0; j < w.size(); ++j) {
        v[j] = momentum * v[j] - lr * g[j];
        w[j] += v[j];
      }
    }
  }
};

void zero_grads(const std::vector<nn::Param*>& params) {
  for (auto* p : params) p->zero_grad();
}

double record_angle(const Dataset& ds, int idx, AngleSource source) {
  const auto& r = ds.records[idx];
  switch (source) {
    case AngleSource::kReference:
      return r.aspect_ref.value();
    case AngleSource::kPredicted:
      if (!r.has_aspect_pred) {
        throw std::invalid_argument(
            "record " + std::to_string(idx) +
            " has no predicted aspect; run attach-aspects first");
      }
      return r.aspect_pred.value();
    case AngleSource::kNone:
      break;
  }
  throw std::logic_error("record_angle: no angle for source none");
}

Tensor3 batch_profiles(const Dataset& ds, std::span<const int> idx) {
  const int l = ds.config.n_bins;
  Tensor3 x(int(idx.size()), 1, l);
  for (size_t i = 0; i < idx.size(); ++i) {
    std::copy(ds.records[idx[i]].profile.begin(),
              ds.records[idx[i]].profile.end(), x.row(int(i), 0));
  }
  return x;
}

CondVector batch_angles(const Dataset& ds, std::span<const int> idx,
                        AngleSource source, int harmonics, bool jitter,
                        double sigma_deg, std::mt19937_64& rng) {
  std::vector<double> phis(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    AngleRad phi = wrap_angle(record_angle(ds, idx[i], source));
    if (jitter) phi = jitter_angle(phi, sigma_deg, rng);
    phis[i] = phi.value();
  }
  return nn::encode_angles(phis, harmonics);
}

struct Snapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> state;
};

Snapshot take_snapshot(const std::vector<nn::Param*>& params,
                       const std::vector<nn::StateRef>& state) {
  Snapshot s;
  for (auto* p : params) s.params.push_back(p->w);
  for (auto& st : state) s.state.push_back(*st.data);
  return s;
}

void restore_snapshot(const Snapshot& s, const std::vector<nn::Param*>& params,
                      const std::vector<nn::StateRef>& state) {
  for (size_t i = 0; i < params.size(); ++i) params[i]->w = s.params[i];
  for (size_t i = 0; i < state.size(); ++i) *state[i].data = s.state[i];
}

std::vector<int> argmax_rows(const Tensor3& logits) {
  std::vector<int> out(logits.n, 0);
  for (int i = 0; i < logits.n; ++i) {
    int best = 0;
    for (int j = 1; j < logits.c; ++j) {
      if (logits.at(i, j, 0) > logits.at(i, best, 0)) best = j;
    }
    out[i] = best;
  }
  return out;
}

}  // namespace

MetricsReport evaluate_one_view(models::OneViewModel& model, const Dataset& ds,
                                std::span<const Split> split, Split which,
                                AngleSource source) {
  const bool conditioned =
      model.spec().conditioning != Conditioning::kNone;
  std::vector<int> idx;
  for (int i : eligible_records(ds, source)) {
    if (split[i] == which) idx.push_back(i);
  }
  std::vector<int> y_true, y_pred;
  std::mt19937_64 dummy(0);
  const int chunk = 256;
  for (size_t pos = 0; pos < idx.size(); pos += chunk) {
    const auto part =
        std::span(idx).subspan(pos, std::min<size_t>(chunk, idx.size() - pos));
    Tensor3 x = batch_profiles(ds, part);
    CondVector cond;
    if (conditioned) {
      cond = batch_angles(ds, part, source, model.spec().cond_dim / 2, false,
                          0.0, dummy);
    }
    Tensor3 logits =
        model.forward(x, conditioned ? &cond : nullptr, Mode::kEval);
    const auto pred = argmax_rows(logits);
    for (size_t i = 0; i < part.size(); ++i) {
      y_true.push_back(ds.records[part[i]].class_id);
      y_pred.push_back(pred[i]);
    }
  }
  return compute_metrics(y_true, y_pred, model.spec().n_classes);
}

MetricsReport evaluate_multi_view(models::MultiViewModel& model,
                                  const Dataset& ds,
                                  std::span<const Split> split, Split which,
                                  AngleSource source, int seq_len) {
  const bool conditioned =
      model.spec().conditioning != Conditioning::kNone;
  const auto elig = eligible_records(ds, source);
  const auto build = build_sequences(ds, split, seq_len, elig);
  std::vector<const SequenceSample*> seqs;
  for (const auto& s : build.sequences) {
    if (s.split == which) seqs.push_back(&s);
  }
  std::vector<int> y_true, y_pred;
  std::mt19937_64 dummy(0);
  const int chunk = 32;
  for (size_t pos = 0; pos < seqs.size(); pos += chunk) {
    const size_t m = std::min<size_t>(chunk, seqs.size() - pos);
    std::vector<int> flat;
    for (size_t i = 0; i < m; ++i) {
      flat.insert(flat.end(), seqs[pos + i]->records.begin(),
                  seqs[pos + i]->records.end());
    }
    Tensor3 x = batch_profiles(ds, flat);
    CondVector cond;
    if (conditioned) {
      cond = batch_angles(ds, flat, source, model.spec().cond_dim / 2, false,
                          0.0, dummy);
    }
    Tensor3 logits = model.forward(x, conditioned ? &cond : nullptr, seq_len,
                                   Mode::kEval);
    const auto pred = argmax_rows(logits);
    for (size_t i = 0; i < m; ++i) {
      y_true.push_back(seqs[pos + i]->label);
      y_pred.push_back(pred[i]);
    }
  }
  return compute_metrics(y_true, y_pred, model.spec().n_classes);
}

TrainResult train(const TrainConfig& config, const Dataset& ds) {
  config.validate();
  const AngleSource source = config.effective_angle_source();
  const bool conditioned =
      config.backbone.conditioning != Conditioning::kNone;

  TrainResult result;
  result.split = stratified_split(ds.labels(), 0.70, 0.15,
                                  derive_seed(config.seed, "split"));
  const auto elig = eligible_records(ds, source);

  // train/val/test units: record indices (one-view) or sequences
  std::vector<int> train_records;
  std::vector<SequenceSample> train_seqs;
  std::vector<int> train_labels;
  if (config.multi_view) {
    auto build = build_sequences(ds, result.split, config.seq.seq_len, elig);
    for (auto& s : build.sequences) {
      if (s.split == Split::kTrain) {
        train_labels.push_back(s.label);
        train_seqs.push_back(std::move(s));
      }
    }
  } else {
    for (int i : elig) {
      if (result.split[i] == Split::kTrain) {
        train_records.push_back(i);
        train_labels.push_back(ds.records[i].class_id);
      }
    }
  }
  if (train_labels.empty()) {
    throw std::invalid_argument("train: empty training set");
  }
  const auto weights = class_weights(train_labels);

  models::BackboneSpec spec = config.backbone;
  spec.resolve_defaults();
  spec.input_len = ds.config.n_bins;
  if (config.multi_view) {
    result.multi_view = std::make_unique<models::MultiViewModel>(
        spec, config.seq, derive_seed(config.seed, "init"));
  } else {
    result.one_view = std::make_unique<models::OneViewModel>(
        spec, derive_seed(config.seed, "init"));
  }
  const auto params = config.multi_view ? result.multi_view->params()
                                        : result.one_view->params();
  const auto state = config.multi_view ? result.multi_view->state()
                                       : result.one_view->state();

  Sgd sgd{config.lr, config.momentum, {}};
  sgd.init(params);
  nn::SoftmaxCrossEntropy ce;

  auto shuffle_rng = make_rng(config.seed, "shuffle");
  auto jitter_rng = make_rng(config.seed, "jitter");

  const size_t n_units =
      config.multi_view ? train_seqs.size() : train_records.size();
  std::vector<int> order(n_units);
  std::iota(order.begin(), order.end(), 0);

  Snapshot best;
  const int harmonics = spec.cond_dim / 2;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    int n_batches = 0;

    for (size_t pos = 0; pos < order.size(); pos += config.batch) {
      const size_t m = std::min<size_t>(config.batch, order.size() - pos);
      std::vector<int> flat;
      std::vector<int> labels;
      if (config.multi_view) {
        for (size_t i = 0; i < m; ++i) {
          const auto& s = train_seqs[order[pos + i]];
          flat.insert(flat.end(), s.records.begin(), s.records.end());
          labels.push_back(s.label);
        }
      } else {
        for (size_t i = 0; i < m; ++i) {
          flat.push_back(train_records[order[pos + i]]);
          labels.push_back(ds.records[flat.back()].class_id);
        }
      }

      Tensor3 x = batch_profiles(ds, flat);
      CondVector cond;
      if (conditioned) {
        cond = batch_angles(ds, flat, source, harmonics, true,
                            config.jitter_sigma_deg, jitter_rng);
      }

      zero_grads(params);
      Tensor3 logits =
          config.multi_view
              ? result.multi_view->forward(x, conditioned ? &cond : nullptr,
                                           config.seq.seq_len, Mode::kTrain)
              : result.one_view->forward(x, conditioned ? &cond : nullptr,
                                         Mode::kTrain);
      const double loss = ce.forward(logits, labels, weights);
      if (!std::isfinite(loss)) {
        char msg[160];
        std::snprintf(msg, sizeof(msg),
                      "train: non-finite loss at epoch %d, batch %d (lr=%g)",
                      epoch, n_batches, config.lr);
        throw DivergenceError(msg);
      }
      Tensor3 dlogits = ce.backward();
      if (config.multi_view) {
        result.multi_view->backward(dlogits);
      } else {
        result.one_view->backward(dlogits);
      }
      sgd.step(params);
      loss_sum += loss;
      ++n_batches;
    }

    EpochStats es;
    es.train_loss = n_batches > 0 ? loss_sum / n_batches : 0.0;
    es.val = config.multi_view
                 ? evaluate_multi_view(*result.multi_view, ds, result.split,
                                       Split::kVal, source, config.seq.seq_len)
                 : evaluate_one_view(*result.one_view, ds, result.split,
                                     Split::kVal, source);
    if (result.best_epoch < 0 || es.val.macro_f1 > result.best_val_macro_f1) {
      result.best_epoch = epoch;
      result.best_val_macro_f1 = es.val.macro_f1;
      best = take_snapshot(params, state);
    }
    result.epochs.push_back(std::move(es));
  }

  restore_snapshot(best, params, state);
  result.test = config.multi_view
                    ? evaluate_multi_view(*result.multi_view, ds, result.split,
                                          Split::kTest, source,
                                          config.seq.seq_len)
                    : evaluate_one_view(*result.one_view, ds, result.split,
                                        Split::kTest, source);
  return result;
}

AttachStats attach_predicted_aspects(Dataset& ds, const KfParams& params,
                                     HeadingMethod method, double max_gap) {
  AttachStats stats;
  ds.pred_warmup.assign(ds.records.size(), false);

  // record indices per trajectory, in record (== time) order
  std::vector<std::vector<int>> by_traj(ds.trajectories.size());
  for (size_t i = 0; i < ds.records.size(); ++i) {
    by_traj[ds.record_traj[i]].push_back(int(i));
  }

  for (size_t tj = 0; tj < ds.trajectories.size(); ++tj) {
    const auto& samples = ds.trajectories[tj];
    const auto& rec_idx = by_traj[tj];
    if (rec_idx.size() != samples.size()) {
      throw std::invalid_argument(
          "attach_predicted_aspects: trajectory " + std::to_string(tj) +
          " has " + std::to_string(samples.size()) + " samples but " +
          std::to_string(rec_idx.size()) + " records");
    }
    const auto segments = segment_trajectory(samples, max_gap);
    size_t offset = 0;
    for (const auto& seg : segments) {
      if (seg.size() >= 2) {
        const auto est =
            estimate_aspect_series(seg, ds.config.radar, params, method);
        for (size_t i = 0; i < seg.size(); ++i) {
          const int rec = rec_idx[offset + i];
          if (est[i].valid) {
            ds.records[rec].has_aspect_pred = true;
            ds.records[rec].aspect_pred = est[i].aspect;
            ++stats.attached;
          } else {
            ++stats.invalid;
          }
          if (i < 2) {
            ds.pred_warmup[rec] = true;
            ++stats.warmup_flagged;
          }
        }
      } else {
        stats.invalid += int(seg.size());
      }
      offset += seg.size();
    }
  }
  return stats;
}

}  // namespace hrrp::pipeline
