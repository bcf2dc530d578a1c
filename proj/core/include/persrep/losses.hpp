#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace persrep {

using FeatureVec = Eigen::VectorXd;

enum class LossKind { infonce, infonce_multipos, hinge, cross_entropy };

const char* to_string(LossKind kind);
std::optional<LossKind> loss_kind_from_string(const std::string& s);

struct LossParams {
  double tau = 0.07;
  double margin = 0.2;  // hinge only
  // The displayed formula sums negatives only; standard InfoNCE also counts
  // the positive. Both modes are supported, default is the standard one.
  bool include_positive_in_denominator = true;
};

// Linear + sigmoid head for the non-contrastive loss.
struct SigmoidHead {
  FeatureVec w;
  double bias = 0.0;

  double logit(const FeatureVec& f) const { return w.dot(f) + bias; }
  double prob(const FeatureVec& f) const { return 1.0 / (1.0 + std::exp(-logit(f))); }
};

double cosine_similarity(const FeatureVec& a, const FeatureVec& b);

// -log( exp(s+/tau) / (exp(s+/tau) + sum_i exp(s_i/tau)) ) over cosine
// similarities to the anchor.
double info_nce(const FeatureVec& anchor, const FeatureVec& positive,
                const std::vector<FeatureVec>& negatives, double tau,
                bool include_positive_in_denominator = true);

struct LossGradients {
  double value = 0.0;
  FeatureVec d_anchor;
  std::vector<FeatureVec> d_positives;
  std::vector<FeatureVec> d_negatives;
  FeatureVec d_head_w;  // cross_entropy only
  double d_head_bias = 0.0;
};

LossGradients info_nce_grad(const FeatureVec& anchor, const FeatureVec& positive,
                            const std::vector<FeatureVec>& negatives, double tau,
                            bool include_positive_in_denominator = true);

double alt_loss(LossKind kind, const FeatureVec& anchor, const std::vector<FeatureVec>& positives,
                const std::vector<FeatureVec>& negatives, const LossParams& params,
                const SigmoidHead* head = nullptr);

LossGradients alt_loss_grad(LossKind kind, const FeatureVec& anchor,
                            const std::vector<FeatureVec>& positives,
                            const std::vector<FeatureVec>& negatives, const LossParams& params,
                            const SigmoidHead* head = nullptr);

}  // namespace persrep
