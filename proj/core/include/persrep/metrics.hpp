#pragma once

#include <optional>
#include <vector>

#include "persrep/image.hpp"

namespace persrep {

// Non-interpolated average precision over a one-vs-all scoring. Ties are
// scored pessimistically: tied negatives rank above tied positives, which
// keeps the value invariant under input permutation.
double pr_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

// Binary-relevance NDCG with gain 1 and discount 1/log2(rank+1). Ties rank
// irrelevant items first (same pessimistic, permutation-invariant rule).
double ndcg(const std::vector<double>& scores, const std::vector<bool>& relevant);

struct OtsuResult {
  double threshold = 0.0;
  std::vector<uint8_t> binary;  // value >= threshold
  bool constant_input = false;  // all-false output, threshold meaningless
};

// 256-bin histogram threshold maximizing between-class variance; the chosen
// threshold lies in (min, max]. A constant input yields the all-false path or
// throws when error_on_constant is set.
OtsuResult otsu_threshold(const std::vector<double>& values, bool error_on_constant = false);

double iou_bbox(const BBox& a, const BBox& b);
double iou_mask(const Mask& a, const Mask& b);

struct DensePrediction {
  Mask mask;
  std::optional<BBox> bbox;
  double mask_score = -1.0;
  double box_score = -1.0;

  bool no_detection() const { return !bbox; }
};

struct DenseGroundTruth {
  std::optional<Mask> mask;  // absent: the image holds no target object
  std::optional<BBox> bbox;

  bool has_object() const { return mask.has_value() || bbox.has_value(); }
};

enum class DenseMode { bbox, mask };

struct DenseMetrics {
  double ap = 0.0;    // mean over the IoU grid
  double ap50 = 0.0;  // at IoU 0.5
  double f1 = 0.0;    // best F1 over score thresholds at IoU 0.5
};

std::vector<double> coco_iou_grid();  // 0.50:0.95:0.05

// predictions[i] and gts[i] describe the same image; exactly one prediction
// per image (possibly the no-detection sentinel).
DenseMetrics dense_ap_f1(const std::vector<DensePrediction>& predictions,
                         const std::vector<DenseGroundTruth>& gts, DenseMode mode,
                         const std::vector<double>& iou_thresholds = coco_iou_grid());

}  // namespace persrep
