#pragma once

#include <cstdint>
#include <vector>

#include "persrep/dataset.hpp"
#include "persrep/lora.hpp"
#include "persrep/losses.hpp"
#include "persrep/pool.hpp"

namespace persrep {

struct TrainConfig {
  LossKind loss_kind = LossKind::infonce;
  double tau = 0.07;
  int n_pairs = 4500;
  int n_neg_per_anchor = 16;
  int epochs = 2;
  int batch_size = 16;
  double learning_rate = 3e-4;
  uint64_t seed = 0;
  double margin = 0.2;  // hinge only
  bool include_positive_in_denominator = true;
  bool augment_enabled = true;

  void validate() const;
  LossParams loss_params() const { return {tau, margin, include_positive_in_denominator}; }
};

// Anchor from the real train images, positive/negatives from the synthetic
// pool, stored as indices into those containers.
struct TrainingPair {
  int anchor_index = 0;
  int positive_index = 0;
  std::vector<int> negative_indices;
};

// Anchors cycle over d_r, positives are drawn uniformly with replacement,
// negatives without replacement within each pair. Deterministic per seed and
// independent of traversal order.
std::vector<TrainingPair> sample_pairs(const std::vector<ImageRecord>& d_r,
                                       const SyntheticPool& pool, const TrainConfig& config,
                                       uint64_t rng_seed);

struct AugmentParams {
  double rotation_deg = 0.0;  // in [-30, 30]
  bool flip = false;
  double area_scale = 1.0;  // in [0.6, 1.0]
  double row_frac = 0.0;    // crop placement in [0, 1]
  double col_frac = 0.0;
};

AugmentParams sample_augment_params(uint64_t seed);

// Rotation, then horizontal flip, then resized crop back to the original
// dims. The mask undergoes the same geometric transforms.
ImageRecord augment_with(const ImageRecord& record, const AugmentParams& params);
ImageRecord augment(const ImageRecord& record, uint64_t rng_seed);

struct TrainResult {
  std::vector<double> loss_trace;  // one value per optimizer step
  int steps = 0;
  SigmoidHead head;  // trained head when loss_kind == cross_entropy
};

// Optimizes the adapter (and the head, for the non-contrastive loss) with
// Adam over epochs * n_pairs presentations batched by batch_size. Base
// encoder weights never change. Bit-reproducible for a fixed seed on one
// executor.
TrainResult train_personalized(AdaptedToyEncoder& encoder, const std::vector<ImageRecord>& d_r,
                               const SyntheticPool& pool, const TrainConfig& config);

}  // namespace persrep
