#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hrrp/dataset.hpp"
#include "hrrp/kalman.hpp"
#include "hrrp/models.hpp"

namespace hrrp::pipeline {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };
enum class AngleSource { kNone, kReference, kPredicted };

std::string to_string(Split s);
std::string to_string(AngleSource a);
Split split_from_string(const std::string& s);
AngleSource angle_source_from_string(const std::string& s);

/// Thrown when training hits a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Label-stratified random assignment: per class, a seeded shuffle followed
/// by proportional slicing. Every class must have >= 3 records so each split
/// is non-empty.
std::vector<Split> stratified_split(std::span<const int> labels,
                                    double train_frac = 0.70,
                                    double val_frac = 0.15, uint64_t seed = 0);

/// Inverse-frequency class weights, normalized to mean 1.
std::vector<double> class_weights(std::span<const int> labels);

/// Training-time angle augmentation: wrap(phi + N(0, sigma_deg in radians)).
AngleRad jitter_angle(AngleRad phi, double sigma_deg, std::mt19937_64& rng);

struct SequenceSample {
  std::vector<int> records;  // record indices, time-sorted
  int label = 0;
  Split split = Split::kTrain;
};

struct SequenceBuild {
  std::vector<SequenceSample> sequences;
  int dropped_records = 0;   // remainder after chunking
  int small_buckets = 0;     // (ship, split) buckets shorter than T
};

/// Chunks each (ship, split) bucket's time-sorted records into consecutive
/// non-overlapping length-T sequences. Sequences never span ships or splits.
/// `eligible` restricts the record set (used by predicted-angle runs).
SequenceBuild build_sequences(const Dataset& ds, std::span<const Split> split,
                              int seq_len,
                              std::span<const int> eligible = {});

struct MetricsReport {
  std::vector<std::vector<int>> confusion;  // [true][pred]
  double accuracy = 0.0;
  std::vector<double> precision, recall, f1;
  double macro_f1 = 0.0;
};

MetricsReport metrics_from_confusion(const std::vector<std::vector<int>>& cm);
MetricsReport compute_metrics(std::span<const int> y_true,
                              std::span<const int> y_pred, int n_classes);

struct TrainConfig {
  models::BackboneSpec backbone;
  bool multi_view = false;
  models::SequenceSpec seq;
  AngleSource angle_source = AngleSource::kReference;
  int epochs = 20;
  int batch = 64;
  double lr = 0.01;
  double momentum = 0.9;
  double jitter_sigma_deg = 2.0;
  uint64_t seed = 1;

  /// Unconditioned models ignore angles entirely.
  AngleSource effective_angle_source() const;
  void validate() const;
};

struct EpochStats {
  double train_loss = 0.0;
  MetricsReport val;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_macro_f1 = 0.0;
  MetricsReport test;
  std::vector<Split> split;
  std::unique_ptr<models::OneViewModel> one_view;
  std::unique_ptr<models::MultiViewModel> multi_view;
};

/// Mini-batch SGD with momentum, seeded shuffles, best-validation-macro-F1
/// model selection, and a final test evaluation with the selected weights.
TrainResult train(const TrainConfig& config, const Dataset& ds);

MetricsReport evaluate_one_view(models::OneViewModel& model, const Dataset& ds,
                                std::span<const Split> split, Split which,
                                AngleSource source);
MetricsReport evaluate_multi_view(models::MultiViewModel& model,
                                  const Dataset& ds,
                                  std::span<const Split> split, Split which,
                                  AngleSource source, int seq_len);

struct AttachStats {
  int attached = 0;
  int warmup_flagged = 0;
  int invalid = 0;
};

/// Runs the causal Kalman estimator over every trajectory (segmented at
/// max_gap) and stores the estimate at each record's timestamp. The first
/// two samples of each segment are flagged as warm-up.
AttachStats attach_predicted_aspects(
    Dataset& ds, const KfParams& params,
    HeadingMethod method = HeadingMethod::kVelocity, double max_gap = 1200.0);

/// Record indices usable under the given angle source (predicted drops
/// warm-up and unattached records).
std::vector<int> eligible_records(const Dataset& ds, AngleSource source);

}  // namespace hrrp::pipeline
