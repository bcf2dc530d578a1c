#include "persrep/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace persrep {

double pr_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) raise(ErrorCode::DimensionMismatch, "scores vs labels");
  const long n_pos = std::count(labels.begin(), labels.end(), true);
  if (n_pos == 0) raise(ErrorCode::NoPositives, "pr_auc needs at least one positive label");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return labels[a] < labels[b];  // tied negatives first (worst rank for positives)
  });

  double sum_precision = 0.0;
  long tp = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (!labels[order[rank]]) continue;
    ++tp;
    sum_precision += static_cast<double>(tp) / static_cast<double>(rank + 1);
  }
  return sum_precision / static_cast<double>(n_pos);
}

double ndcg(const std::vector<double>& scores, const std::vector<bool>& relevant) {
  if (scores.size() != relevant.size()) raise(ErrorCode::DimensionMismatch, "scores vs relevance");
  if (scores.empty()) raise(ErrorCode::EmptyRetrievalSet, "nothing to rank");
  const long n_rel = std::count(relevant.begin(), relevant.end(), true);
  if (n_rel == 0) raise(ErrorCode::EmptyRelevance, "no relevant item in the retrieval set");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return relevant[a] < relevant[b];  // tied irrelevant first
  });

  double dcg = 0.0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (relevant[order[rank]]) dcg += 1.0 / std::log2(static_cast<double>(rank) + 2.0);
  }
  double idcg = 0.0;
  for (long i = 0; i < n_rel; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

OtsuResult otsu_threshold(const std::vector<double>& values, bool error_on_constant) {
  if (values.empty()) raise(ErrorCode::ConstantMap, "empty confidence map");
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it, hi = *max_it;

  OtsuResult result;
  if (lo == hi) {
    if (error_on_constant) raise(ErrorCode::ConstantMap, "confidence map is constant");
    result.constant_input = true;
    result.binary.assign(values.size(), 0);
    result.threshold = hi;
    return result;
  }

  constexpr int kBins = 256;
  const double scale = kBins / (hi - lo);
  std::array<long, kBins> count{};
  std::array<double, kBins> sum{};
  for (double v : values) {
    int bin = std::min(kBins - 1, static_cast<int>((v - lo) * scale));
    ++count[static_cast<size_t>(bin)];
    sum[static_cast<size_t>(bin)] += v;
  }
  const double total_sum = std::accumulate(sum.begin(), sum.end(), 0.0);
  const long total_count = static_cast<long>(values.size());

  // Candidate k splits bins [0,k) vs [k,256); t_k = lo + k*(hi-lo)/256, so the
  // returned threshold lies in (lo, hi].
  double best_variance = -1.0;
  int best_k = 1;
  long count0 = 0;
  double sum0 = 0.0;
  for (int k = 1; k <= kBins; ++k) {
    count0 += count[static_cast<size_t>(k - 1)];
    sum0 += sum[static_cast<size_t>(k - 1)];
    long count1 = total_count - count0;
    if (count0 == 0 || count1 == 0) continue;
    double mu0 = sum0 / count0;
    double mu1 = (total_sum - sum0) / count1;
    double w0 = static_cast<double>(count0) / total_count;
    double w1 = static_cast<double>(count1) / total_count;
    double variance = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (variance > best_variance) {
      best_variance = variance;
      best_k = k;
    }
  }

  result.threshold = lo + best_k * (hi - lo) / kBins;
  result.binary.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) result.binary[i] = values[i] >= result.threshold ? 1 : 0;
  return result;
}

double iou_bbox(const BBox& a, const BBox& b) {
  int r0 = std::max(a.row_min, b.row_min);
  int c0 = std::max(a.col_min, b.col_min);
  int r1 = std::min(a.row_max, b.row_max);
  int c1 = std::min(a.col_max, b.col_max);
  long inter = 0;
  if (r1 >= r0 && c1 >= c0) inter = static_cast<long>(r1 - r0 + 1) * (c1 - c0 + 1);
  long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double iou_mask(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) {
    raise(ErrorCode::DimensionMismatch, "mask IoU shapes");
  }
  long inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    bool va = a.data[i] != 0, vb = b.data[i] != 0;
    inter += (va && vb) ? 1 : 0;
    uni += (va || vb) ? 1 : 0;
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<double> coco_iou_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(0.5 + 0.05 * i);
  return grid;
}

namespace {

// score + whether the prediction overlaps its image's object at each grid
// threshold (per-image matching: one prediction, at most one object).
struct ScoredDetection {
  double score = 0.0;
  double iou = 0.0;
};

double threshold_enumeration_ap(std::vector<ScoredDetection> dets, double iou_threshold,
                                long total_gt) {
  if (total_gt == 0) return 0.0;
  std::sort(dets.begin(), dets.end(),
            [](const ScoredDetection& a, const ScoredDetection& b) { return a.score > b.score; });
  double ap = 0.0;
  double prev_recall = 0.0;
  size_t i = 0;
  long tp = 0;
  while (i < dets.size()) {
    size_t j = i;
    long tp_group = 0;
    while (j < dets.size() && dets[j].score == dets[i].score) {
      if (dets[j].iou >= iou_threshold) ++tp_group;
      ++j;
    }
    tp += tp_group;
    double precision = static_cast<double>(tp) / static_cast<double>(j);
    double recall = static_cast<double>(tp) / static_cast<double>(total_gt);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double best_f1(std::vector<ScoredDetection> dets, double iou_threshold, long total_gt) {
  if (total_gt == 0 || dets.empty()) return 0.0;
  std::sort(dets.begin(), dets.end(),
            [](const ScoredDetection& a, const ScoredDetection& b) { return a.score > b.score; });
  double best = 0.0;
  long tp = 0;
  size_t i = 0;
  while (i < dets.size()) {
    size_t j = i;
    while (j < dets.size() && dets[j].score == dets[i].score) {
      if (dets[j].iou >= iou_threshold) ++tp;
      ++j;
    }
    double precision = static_cast<double>(tp) / static_cast<double>(j);
    double recall = static_cast<double>(tp) / static_cast<double>(total_gt);
    if (precision + recall > 0.0) best = std::max(best, 2 * precision * recall / (precision + recall));
    i = j;
  }
  return best;
}

}  // namespace

DenseMetrics dense_ap_f1(const std::vector<DensePrediction>& predictions,
                         const std::vector<DenseGroundTruth>& gts, DenseMode mode,
                         const std::vector<double>& iou_thresholds) {
  if (predictions.size() != gts.size()) {
    raise(ErrorCode::MismatchedImageSets, std::to_string(predictions.size()) +
                                              " predictions vs " + std::to_string(gts.size()) +
                                              " ground-truth images");
  }

  long total_gt = 0;
  std::vector<ScoredDetection> dets;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (gts[i].has_object()) ++total_gt;
    const DensePrediction& pred = predictions[i];
    if (pred.no_detection()) continue;

    ScoredDetection det;
    det.score = mode == DenseMode::bbox ? pred.box_score : pred.mask_score;
    if (gts[i].has_object()) {
      if (mode == DenseMode::bbox) {
        BBox gt_box = gts[i].bbox ? *gts[i].bbox : mask_to_bbox(*gts[i].mask);
        det.iou = iou_bbox(*pred.bbox, gt_box);
      } else {
        if (!gts[i].mask) raise(ErrorCode::MissingMasks, "mask mode needs ground-truth masks");
        det.iou = iou_mask(pred.mask, *gts[i].mask);
      }
    }
    dets.push_back(det);
  }

  DenseMetrics out;
  double ap_sum = 0.0;
  for (double tau : iou_thresholds) ap_sum += threshold_enumeration_ap(dets, tau, total_gt);
  out.ap = iou_thresholds.empty() ? 0.0 : ap_sum / static_cast<double>(iou_thresholds.size());
  out.ap50 = threshold_enumeration_ap(dets, 0.5, total_gt);
  out.f1 = best_f1(dets, 0.5, total_gt);
  return out;
}

}  // namespace persrep
