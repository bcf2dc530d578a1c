#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "persrep/dataset.hpp"
#include "persrep/encoder.hpp"
#include "persrep/metrics.hpp"

namespace persrep {

// Patch-similarity map against a target feature; values are cosines.
struct ConfidenceMap {
  Eigen::MatrixXd values;  // grid_h × grid_w
  std::string source_image_id;
  std::optional<Eigen::MatrixXd> upscaled;  // source image dims
};

// Memoizes embeddings keyed by encoder weights + pixel content. Optionally
// persists bundles under PERSREP_CACHE_DIR.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path disk_dir);
  static EmbeddingCache from_env();

  EmbeddingBundle embed(const Encoder& encoder, const ImageRecord& record);
  size_t memory_entries() const { return memory_.size(); }

 private:
  std::mutex mutex_;
  std::unordered_map<std::string, EmbeddingBundle> memory_;
  std::optional<std::filesystem::path> disk_;
};

// Max cosine similarity between CLS tokens of the test image and the train
// images.
double classification_confidence(const ImageRecord& test, const std::vector<ImageRecord>& d_r,
                                 const Encoder& encoder, EmbeddingCache* cache = nullptr);

// Full-ranking NDCG of the retrieval set ordered by CLS cosine similarity;
// relevance = same instance as the query.
double retrieval_ndcg(const ImageRecord& query, const std::vector<ImageRecord>& retrieval_set,
                      const Encoder& encoder, EmbeddingCache* cache = nullptr);

// Unit-norm mean of patch vectors whose cell overlaps the downscaled mask by
// more than half, averaged over the train records.
Eigen::VectorXf target_feature(const std::vector<ImageRecord>& d_r, const Encoder& encoder,
                               EmbeddingCache* cache = nullptr);

ConfidenceMap confidence_map(const ImageRecord& test, const Eigen::VectorXf& target,
                             const Encoder& encoder, EmbeddingCache* cache = nullptr);

// Half-pixel-aligned bilinear interpolation; grid values are reproduced
// exactly at patch centers.
Eigen::MatrixXd upscale_bilinear(const Eigen::MatrixXd& grid, int out_h, int out_w);

// Otsu threshold + binarization over the map's patch values.
std::pair<double, Mask> otsu_binarize(const ConfidenceMap& map, bool error_on_constant = false);

DensePrediction dense_predict(const ImageRecord& test, const Eigen::VectorXf& target,
                              const Encoder& encoder, EmbeddingCache* cache = nullptr);

enum class EvalTask { classification, retrieval, detection, segmentation };

const char* to_string(EvalTask task);

struct TaskMetrics {
  std::optional<double> pr_auc;
  std::optional<double> ndcg;
  std::optional<double> det_ap;
  std::optional<double> det_ap50;
  std::optional<double> det_f1;
  std::optional<double> seg_ap;
  std::optional<double> seg_ap50;
  std::optional<double> seg_f1;
};

struct InstanceEval {
  TaskMetrics overall;
  std::map<std::string, TaskMetrics> splits;  // keyed by scene tag
  std::vector<std::string> flags;             // skipped tasks with reasons
};

struct EvalOptions {
  std::set<EvalTask> tasks{EvalTask::classification, EvalTask::retrieval, EvalTask::detection,
                           EvalTask::segmentation};
  // Other instances' annotated test images count as zero-object images for
  // the target's dense metrics.
  bool include_other_instance_dense = true;
  EmbeddingCache* cache = nullptr;
};

// One-vs-all protocols for one instance: classification over the union of all
// instances' test images, retrieval over all train records, dense tasks over
// all annotated test images.
InstanceEval evaluate_instance(const InstanceDataset& dataset, const std::string& instance_id,
                               const Encoder& encoder, const EvalOptions& options = {});

struct EvalReport {
  int schema_version = 1;
  std::string encoder_label;
  std::string dataset_digest;
  std::map<std::string, InstanceEval> per_instance;
  TaskMetrics aggregate;
  std::map<std::string, TaskMetrics> aggregate_splits;
};

EvalReport evaluate_dataset(const InstanceDataset& dataset, const Encoder& encoder,
                            const std::string& encoder_label, const EvalOptions& options = {});

// Rebuilds aggregate and aggregate_splits from per_instance.
void recompute_aggregates(EvalReport& report);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report_json(const std::filesystem::path& path);
// Flat rows: instance_id, task, metric, split, value.
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace persrep
