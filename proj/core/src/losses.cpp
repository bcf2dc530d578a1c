#include "persrep/losses.hpp"

#include <algorithm>
#include <cmath>

#include "persrep/errors.hpp"

namespace persrep {

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::infonce: return "infonce";
    case LossKind::infonce_multipos: return "infonce_multipos";
    case LossKind::hinge: return "hinge";
    case LossKind::cross_entropy: return "cross_entropy";
  }
  return "infonce";
}

std::optional<LossKind> loss_kind_from_string(const std::string& s) {
  if (s == "infonce") return LossKind::infonce;
  if (s == "infonce_multipos") return LossKind::infonce_multipos;
  if (s == "hinge") return LossKind::hinge;
  if (s == "cross_entropy") return LossKind::cross_entropy;
  return std::nullopt;
}

double cosine_similarity(const FeatureVec& a, const FeatureVec& b) {
  if (a.size() != b.size()) raise(ErrorCode::DimensionMismatch, "cosine operands");
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

void check_features(const FeatureVec& anchor, const std::vector<FeatureVec>& positives,
                    const std::vector<FeatureVec>& negatives) {
  for (const auto& p : positives) {
    if (p.size() != anchor.size()) raise(ErrorCode::DimensionMismatch, "positive feature length");
  }
  for (const auto& n : negatives) {
    if (n.size() != anchor.size()) raise(ErrorCode::DimensionMismatch, "negative feature length");
  }
}

// d cosine(a, b) / da = b/(|a||b|) - s a/|a|^2
FeatureVec cosine_grad_wrt_a(const FeatureVec& a, const FeatureVec& b, double s) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return FeatureVec::Zero(a.size());
  return b / (na * nb) - (s / (na * na)) * a;
}

struct SoftmaxTerms {
  std::vector<double> pos_sims;
  std::vector<double> neg_sims;
  double pos_sum = 0.0;  // sum exp((s_p - m)/tau)
  double neg_sum = 0.0;
  double shift = 0.0;    // m = max similarity, for stability
};

SoftmaxTerms similarity_terms(const FeatureVec& anchor, const std::vector<FeatureVec>& positives,
                              const std::vector<FeatureVec>& negatives, double tau) {
  SoftmaxTerms t;
  for (const auto& p : positives) t.pos_sims.push_back(cosine_similarity(anchor, p));
  for (const auto& n : negatives) t.neg_sims.push_back(cosine_similarity(anchor, n));
  double m = -std::numeric_limits<double>::infinity();
  for (double s : t.pos_sims) m = std::max(m, s);
  for (double s : t.neg_sims) m = std::max(m, s);
  t.shift = m;
  for (double s : t.pos_sims) t.pos_sum += std::exp((s - m) / tau);
  for (double s : t.neg_sims) t.neg_sum += std::exp((s - m) / tau);
  return t;
}

}  // namespace

double info_nce(const FeatureVec& anchor, const FeatureVec& positive,
                const std::vector<FeatureVec>& negatives, double tau,
                bool include_positive_in_denominator) {
  if (tau <= 0.0) raise(ErrorCode::NonPositiveTemperature, "tau=" + std::to_string(tau));
  check_features(anchor, {positive}, negatives);

  SoftmaxTerms t = similarity_terms(anchor, {positive}, negatives, tau);
  double denom = t.neg_sum + (include_positive_in_denominator ? t.pos_sum : 0.0);
  // -log(exp((s+ - m)/tau) / denom)
  return -((t.pos_sims[0] - t.shift) / tau) + std::log(denom);
}

LossGradients info_nce_grad(const FeatureVec& anchor, const FeatureVec& positive,
                            const std::vector<FeatureVec>& negatives, double tau,
                            bool include_positive_in_denominator) {
  double value = info_nce(anchor, positive, negatives, tau, include_positive_in_denominator);
  SoftmaxTerms t = similarity_terms(anchor, {positive}, negatives, tau);
  double denom = t.neg_sum + (include_positive_in_denominator ? t.pos_sum : 0.0);

  // dL/ds+ and dL/ds_i in similarity space.
  double d_pos_sim = -1.0 / tau;
  if (include_positive_in_denominator) {
    d_pos_sim += std::exp((t.pos_sims[0] - t.shift) / tau) / (tau * denom);
  }

  LossGradients g;
  g.value = value;
  g.d_anchor = FeatureVec::Zero(anchor.size());
  g.d_positives.resize(1);
  g.d_positives[0] = d_pos_sim * cosine_grad_wrt_a(positive, anchor, t.pos_sims[0]);
  g.d_anchor += d_pos_sim * cosine_grad_wrt_a(anchor, positive, t.pos_sims[0]);
  g.d_negatives.resize(negatives.size());
  for (size_t i = 0; i < negatives.size(); ++i) {
    double d_sim = std::exp((t.neg_sims[i] - t.shift) / tau) / (tau * denom);
    g.d_negatives[i] = d_sim * cosine_grad_wrt_a(negatives[i], anchor, t.neg_sims[i]);
    g.d_anchor += d_sim * cosine_grad_wrt_a(anchor, negatives[i], t.neg_sims[i]);
  }
  return g;
}

double alt_loss(LossKind kind, const FeatureVec& anchor, const std::vector<FeatureVec>& positives,
                const std::vector<FeatureVec>& negatives, const LossParams& params,
                const SigmoidHead* head) {
  return alt_loss_grad(kind, anchor, positives, negatives, params, head).value;
}

LossGradients alt_loss_grad(LossKind kind, const FeatureVec& anchor,
                            const std::vector<FeatureVec>& positives,
                            const std::vector<FeatureVec>& negatives, const LossParams& params,
                            const SigmoidHead* head) {
  check_features(anchor, positives, negatives);

  LossGradients g;
  g.d_anchor = FeatureVec::Zero(anchor.size());
  g.d_positives.assign(positives.size(), FeatureVec::Zero(anchor.size()));
  g.d_negatives.assign(negatives.size(), FeatureVec::Zero(anchor.size()));

  switch (kind) {
    case LossKind::infonce: {
      if (positives.empty()) raise(ErrorCode::EmptyPositives, "infonce needs one positive");
      return info_nce_grad(anchor, positives[0], negatives, params.tau,
                           params.include_positive_in_denominator);
    }
    case LossKind::infonce_multipos: {
      if (params.tau <= 0.0) raise(ErrorCode::NonPositiveTemperature, std::to_string(params.tau));
      if (positives.empty()) raise(ErrorCode::EmptyPositives, "multi-positive loss needs >= 1");
      SoftmaxTerms t = similarity_terms(anchor, positives, negatives, params.tau);
      double total = t.pos_sum + t.neg_sum;
      g.value = -std::log(t.pos_sum / total);
      for (size_t p = 0; p < positives.size(); ++p) {
        double e = std::exp((t.pos_sims[p] - t.shift) / params.tau);
        double d_sim = (-e / t.pos_sum + e / total) / params.tau;
        g.d_positives[p] = d_sim * cosine_grad_wrt_a(positives[p], anchor, t.pos_sims[p]);
        g.d_anchor += d_sim * cosine_grad_wrt_a(anchor, positives[p], t.pos_sims[p]);
      }
      for (size_t n = 0; n < negatives.size(); ++n) {
        double d_sim = std::exp((t.neg_sims[n] - t.shift) / params.tau) / (params.tau * total);
        g.d_negatives[n] = d_sim * cosine_grad_wrt_a(negatives[n], anchor, t.neg_sims[n]);
        g.d_anchor += d_sim * cosine_grad_wrt_a(anchor, negatives[n], t.neg_sims[n]);
      }
      return g;
    }
    case LossKind::hinge: {
      if (positives.empty()) raise(ErrorCode::EmptyPositives, "hinge needs >= 1 positive");
      if (negatives.empty()) {
        g.value = 0.0;
        return g;
      }
      double count = static_cast<double>(positives.size() * negatives.size());
      double total = 0.0;
      for (size_t p = 0; p < positives.size(); ++p) {
        double sp = cosine_similarity(anchor, positives[p]);
        for (size_t n = 0; n < negatives.size(); ++n) {
          double sn = cosine_similarity(anchor, negatives[n]);
          double violation = params.margin - sp + sn;
          if (violation <= 0.0) continue;
          total += violation;
          g.d_positives[p] += (-1.0 / count) * cosine_grad_wrt_a(positives[p], anchor, sp);
          g.d_anchor += (-1.0 / count) * cosine_grad_wrt_a(anchor, positives[p], sp);
          g.d_negatives[n] += (1.0 / count) * cosine_grad_wrt_a(negatives[n], anchor, sn);
          g.d_anchor += (1.0 / count) * cosine_grad_wrt_a(anchor, negatives[n], sn);
        }
      }
      g.value = total / count;
      return g;
    }
    case LossKind::cross_entropy: {
      if (!head) raise(ErrorCode::MissingHead, "cross_entropy needs the sigmoid head");
      if (positives.empty() && negatives.empty()) {
        raise(ErrorCode::EmptyPositives, "cross_entropy needs labeled features");
      }
      if (head->w.size() != anchor.size()) {
        raise(ErrorCode::DimensionMismatch, "head width vs feature length");
      }
      double count = static_cast<double>(positives.size() + negatives.size());
      g.d_head_w = FeatureVec::Zero(head->w.size());
      double total = 0.0;
      auto accumulate = [&](const FeatureVec& f, double label, FeatureVec& d_feature) {
        double z = head->prob(f);
        z = std::clamp(z, 1e-12, 1.0 - 1e-12);
        total += label > 0.5 ? -std::log(z) : -std::log(1.0 - z);
        double d_logit = (z - label) / count;
        d_feature += d_logit * head->w;
        g.d_head_w += d_logit * f;
        g.d_head_bias += d_logit;
      };
      for (size_t p = 0; p < positives.size(); ++p) accumulate(positives[p], 1.0, g.d_positives[p]);
      for (size_t n = 0; n < negatives.size(); ++n) accumulate(negatives[n], 0.0, g.d_negatives[n]);
      g.value = total / count;
      return g;
    }
  }
  raise(ErrorCode::ConfigError, "unhandled loss kind");
}

}  // namespace persrep
