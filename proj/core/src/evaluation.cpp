#include "persrep/evaluation.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "persrep/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace persrep {

namespace {

std::string cache_key(const Encoder& encoder, const ImageRecord& record) {
  uint64_t h = encoder.weights_digest();
  h = fnv1a(record.id, h);
  h = fnv1a_u64(pixel_digest(record.pixels), h);
  return hex_digest(h);
}

EmbeddingBundle compute_or_cached(const Encoder& encoder, const ImageRecord& record,
                                  EmbeddingCache* cache) {
  if (cache) return cache->embed(encoder, record);
  return encoder.embed(record.pixels);
}

void write_bundle_file(const EmbeddingBundle& bundle, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  auto put = [&out](auto v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  put(static_cast<int32_t>(bundle.grid_h));
  put(static_cast<int32_t>(bundle.grid_w));
  put(static_cast<int32_t>(bundle.patch_size));
  put(static_cast<int32_t>(bundle.source_dims.first));
  put(static_cast<int32_t>(bundle.source_dims.second));
  put(static_cast<int32_t>(bundle.cls.size()));
  out.write(reinterpret_cast<const char*>(bundle.cls.data()),
            static_cast<std::streamsize>(bundle.cls.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(bundle.patches.data()),
            static_cast<std::streamsize>(bundle.patches.size() * sizeof(float)));
}

std::optional<EmbeddingBundle> read_bundle_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  auto get = [&in]() {
    int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  EmbeddingBundle bundle;
  bundle.grid_h = get();
  bundle.grid_w = get();
  bundle.patch_size = get();
  bundle.source_dims.first = get();
  bundle.source_dims.second = get();
  int32_t dim = get();
  if (!in || dim <= 0 || bundle.grid_h <= 0 || bundle.grid_w <= 0) return std::nullopt;
  bundle.cls.resize(dim);
  in.read(reinterpret_cast<char*>(bundle.cls.data()),
          static_cast<std::streamsize>(dim * sizeof(float)));
  bundle.patches.resize(bundle.grid_h * bundle.grid_w, dim);
  in.read(reinterpret_cast<char*>(bundle.patches.data()),
          static_cast<std::streamsize>(bundle.patches.size() * sizeof(float)));
  if (!in) return std::nullopt;
  return bundle;
}

}  // namespace

EmbeddingCache::EmbeddingCache(fs::path disk_dir) : disk_(std::move(disk_dir)) {
  fs::create_directories(*disk_);
}

EmbeddingCache EmbeddingCache::from_env() {
  if (const char* dir = std::getenv("PERSREP_CACHE_DIR"); dir && *dir) {
    return EmbeddingCache(fs::path(dir));
  }
  return EmbeddingCache();
}

EmbeddingBundle EmbeddingCache::embed(const Encoder& encoder, const ImageRecord& record) {
  const std::string key = cache_key(encoder, record);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (disk_) {
    if (auto bundle = read_bundle_file(*disk_ / (key + ".emb"))) {
      std::lock_guard<std::mutex> lock(mutex_);
      memory_.emplace(key, *bundle);
      return *bundle;
    }
  }
  EmbeddingBundle bundle = encoder.embed(record.pixels);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    memory_.emplace(key, bundle);
  }
  if (disk_) write_bundle_file(bundle, *disk_ / (key + ".emb"));
  return bundle;
}

double classification_confidence(const ImageRecord& test, const std::vector<ImageRecord>& d_r,
                                 const Encoder& encoder, EmbeddingCache* cache) {
  EmbeddingBundle test_bundle = compute_or_cached(encoder, test, cache);
  double best = -1.0;
  for (const auto& train : d_r) {
    EmbeddingBundle train_bundle = compute_or_cached(encoder, train, cache);
    best = std::max(best, cosine(test_bundle.cls, train_bundle.cls));
  }
  return best;
}

double retrieval_ndcg(const ImageRecord& query, const std::vector<ImageRecord>& retrieval_set,
                      const Encoder& encoder, EmbeddingCache* cache) {
  if (retrieval_set.empty()) raise(ErrorCode::EmptyRetrievalSet, "retrieval set is empty");
  EmbeddingBundle query_bundle = compute_or_cached(encoder, query, cache);
  std::vector<double> scores;
  std::vector<bool> relevant;
  scores.reserve(retrieval_set.size());
  for (const auto& item : retrieval_set) {
    EmbeddingBundle item_bundle = compute_or_cached(encoder, item, cache);
    scores.push_back(cosine(query_bundle.cls, item_bundle.cls));
    relevant.push_back(item.instance_id == query.instance_id);
  }
  return ndcg(scores, relevant);
}

Eigen::VectorXf target_feature(const std::vector<ImageRecord>& d_r, const Encoder& encoder,
                               EmbeddingCache* cache) {
  if (d_r.empty()) raise(ErrorCode::MissingMasks, "target_feature needs train records");
  Eigen::VectorXf accumulated;
  for (const auto& rec : d_r) {
    if (!rec.mask) raise(ErrorCode::MissingMasks, rec.id + " lacks a mask");
    EmbeddingBundle bundle = compute_or_cached(encoder, rec, cache);

    const int h = rec.pixels.height, w = rec.pixels.width;
    Eigen::VectorXf image_mean = Eigen::VectorXf::Zero(bundle.cls.size());
    int selected = 0;
    for (int pr = 0; pr < bundle.grid_h; ++pr) {
      // Integer partition of the source rows/cols into grid cells.
      int r0 = pr * h / bundle.grid_h, r1 = (pr + 1) * h / bundle.grid_h;
      for (int pc = 0; pc < bundle.grid_w; ++pc) {
        int c0 = pc * w / bundle.grid_w, c1 = (pc + 1) * w / bundle.grid_w;
        long cell = static_cast<long>(r1 - r0) * (c1 - c0);
        if (cell == 0) continue;
        long covered = 0;
        for (int r = r0; r < r1; ++r) {
          for (int c = c0; c < c1; ++c) covered += rec.mask->at(r, c) ? 1 : 0;
        }
        if (covered * 2 > cell) {  // strict > 50%
          image_mean += bundle.patches.row(pr * bundle.grid_w + pc).transpose();
          ++selected;
        }
      }
    }
    if (selected == 0) {
      raise(ErrorCode::EmptyMaskAfterDownscale, rec.id + ": no cell passes the 50% overlap rule");
    }
    image_mean /= static_cast<float>(selected);
    if (accumulated.size() == 0) accumulated = Eigen::VectorXf::Zero(image_mean.size());
    accumulated += image_mean;
  }
  accumulated /= static_cast<float>(d_r.size());
  float norm = accumulated.norm();
  if (norm == 0.0f) {
    raise(ErrorCode::EmptyMaskAfterDownscale, "target feature collapsed to the zero vector");
  }
  return accumulated / norm;
}

ConfidenceMap confidence_map(const ImageRecord& test, const Eigen::VectorXf& target,
                             const Encoder& encoder, EmbeddingCache* cache) {
  EmbeddingBundle bundle = compute_or_cached(encoder, test, cache);
  ConfidenceMap map;
  map.source_image_id = test.id;
  map.values.resize(bundle.grid_h, bundle.grid_w);
  for (int pr = 0; pr < bundle.grid_h; ++pr) {
    for (int pc = 0; pc < bundle.grid_w; ++pc) {
      Eigen::VectorXf patch = bundle.patches.row(pr * bundle.grid_w + pc).transpose();
      map.values(pr, pc) = cosine(patch, target);
    }
  }
  map.upscaled = upscale_bilinear(map.values, test.pixels.height, test.pixels.width);
  return map;
}

Eigen::MatrixXd upscale_bilinear(const Eigen::MatrixXd& grid, int out_h, int out_w) {
  const int h = static_cast<int>(grid.rows()), w = static_cast<int>(grid.cols());
  Eigen::MatrixXd out(out_h, out_w);
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int r = 0; r < out_h; ++r) {
    double gy = (r + 0.5) * sy - 0.5;
    double cy = std::clamp(gy, 0.0, static_cast<double>(h - 1));
    int y0 = std::min(static_cast<int>(std::floor(cy)), h - 1);
    int y1 = std::min(y0 + 1, h - 1);
    double fy = cy - y0;
    for (int c = 0; c < out_w; ++c) {
      double gx = (c + 0.5) * sx - 0.5;
      double cx = std::clamp(gx, 0.0, static_cast<double>(w - 1));
      int x0 = std::min(static_cast<int>(std::floor(cx)), w - 1);
      int x1 = std::min(x0 + 1, w - 1);
      double fx = cx - x0;
      out(r, c) = grid(y0, x0) * (1 - fy) * (1 - fx) + grid(y0, x1) * (1 - fy) * fx +
                  grid(y1, x0) * fy * (1 - fx) + grid(y1, x1) * fy * fx;
    }
  }
  return out;
}

std::pair<double, Mask> otsu_binarize(const ConfidenceMap& map, bool error_on_constant) {
  const int h = static_cast<int>(map.values.rows()), w = static_cast<int>(map.values.cols());
  std::vector<double> values(static_cast<size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) values[static_cast<size_t>(r) * w + c] = map.values(r, c);
  }
  OtsuResult result = otsu_threshold(values, error_on_constant);
  Mask binary(h, w);
  for (size_t i = 0; i < values.size(); ++i) binary.data[i] = result.binary[i];
  return {result.threshold, binary};
}

DensePrediction dense_predict(const ImageRecord& test, const Eigen::VectorXf& target,
                              const Encoder& encoder, EmbeddingCache* cache) {
  ConfidenceMap map = confidence_map(test, target, encoder, cache);
  const Eigen::MatrixXd& up = *map.upscaled;

  std::vector<double> values(static_cast<size_t>(up.rows()) * up.cols());
  for (int r = 0; r < up.rows(); ++r) {
    for (int c = 0; c < up.cols(); ++c) values[static_cast<size_t>(r) * up.cols() + c] = up(r, c);
  }
  OtsuResult otsu = otsu_threshold(values, false);

  DensePrediction pred;
  pred.mask = Mask(static_cast<int>(up.rows()), static_cast<int>(up.cols()));
  if (!otsu.constant_input) {
    for (size_t i = 0; i < values.size(); ++i) pred.mask.data[i] = otsu.binary[i];
  }
  if (pred.mask.empty_mask()) {
    // No-detection sentinel: empty mask, no box, scores -1.
    return pred;
  }

  double mask_sum = 0.0;
  for (int r = 0; r < up.rows(); ++r) {
    for (int c = 0; c < up.cols(); ++c) {
      if (pred.mask.at(r, static_cast<int>(c))) mask_sum += up(r, c);
    }
  }
  pred.mask_score = mask_sum / static_cast<double>(pred.mask.popcount());
  pred.bbox = mask_to_bbox(pred.mask);
  double box_sum = 0.0;
  for (int r = pred.bbox->row_min; r <= pred.bbox->row_max; ++r) {
    for (int c = pred.bbox->col_min; c <= pred.bbox->col_max; ++c) box_sum += up(r, c);
  }
  pred.box_score = box_sum / static_cast<double>(pred.bbox->area());
  return pred;
}

const char* to_string(EvalTask task) {
  switch (task) {
    case EvalTask::classification: return "classification";
    case EvalTask::retrieval: return "retrieval";
    case EvalTask::detection: return "detection";
    case EvalTask::segmentation: return "segmentation";
  }
  return "classification";
}

namespace {

std::optional<std::string> tag_name(const std::optional<SceneTag>& tag) {
  if (!tag) return std::nullopt;
  return std::string(to_string(*tag));
}

struct DenseInputs {
  std::vector<DensePrediction> predictions;
  std::vector<DenseGroundTruth> gts;
  std::vector<std::optional<std::string>> tags;
};

void fill_dense_metrics(TaskMetrics& out, const std::vector<DensePrediction>& preds,
                        const std::vector<DenseGroundTruth>& gts, bool detection,
                        bool segmentation) {
  if (detection) {
    DenseMetrics det = dense_ap_f1(preds, gts, DenseMode::bbox);
    out.det_ap = det.ap;
    out.det_ap50 = det.ap50;
    out.det_f1 = det.f1;
  }
  if (segmentation) {
    DenseMetrics seg = dense_ap_f1(preds, gts, DenseMode::mask);
    out.seg_ap = seg.ap;
    out.seg_ap50 = seg.ap50;
    out.seg_f1 = seg.f1;
  }
}

}  // namespace

InstanceEval evaluate_instance(const InstanceDataset& dataset, const std::string& instance_id,
                               const Encoder& encoder, const EvalOptions& options) {
  const InstanceEntry& target = dataset.at(instance_id);
  InstanceEval eval;
  EmbeddingCache local_cache;
  EmbeddingCache* cache = options.cache ? options.cache : &local_cache;

  // Canonical iteration order: instances by id, records by id.
  std::vector<const ImageRecord*> all_test;
  std::vector<ImageRecord> all_train;
  for (const auto& [id, entry] : dataset.instances) {
    for (const auto& rec : entry.test) all_test.push_back(&rec);
    for (const auto& rec : entry.train) all_train.push_back(rec);
  }
  std::sort(all_test.begin(), all_test.end(),
            [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });
  std::sort(all_train.begin(), all_train.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });

  const bool want_cls = options.tasks.count(EvalTask::classification) > 0;
  const bool want_ret = options.tasks.count(EvalTask::retrieval) > 0;
  const bool want_det = options.tasks.count(EvalTask::detection) > 0;
  const bool want_seg = options.tasks.count(EvalTask::segmentation) > 0;

  if (want_cls) {
    std::vector<double> scores;
    std::vector<bool> labels;
    std::vector<std::optional<std::string>> tags;
    for (const ImageRecord* rec : all_test) {
      scores.push_back(classification_confidence(*rec, target.train, encoder, cache));
      labels.push_back(rec->instance_id == instance_id);
      tags.push_back(tag_name(rec->scene_tag));
    }
    if (std::all_of(labels.begin(), labels.end(), [](bool b) { return b; })) {
      eval.flags.push_back("classification skipped: NoNegatives (one-vs-all needs other instances)");
    } else {
      eval.overall.pr_auc = pr_auc(scores, labels);
      std::set<std::string> present;
      for (const auto& t : tags) {
        if (t) present.insert(*t);
      }
      for (const auto& tag : present) {
        std::vector<double> s;
        std::vector<bool> l;
        for (size_t i = 0; i < scores.size(); ++i) {
          if (tags[i] == tag) {
            s.push_back(scores[i]);
            l.push_back(labels[i]);
          }
        }
        bool has_pos = std::any_of(l.begin(), l.end(), [](bool b) { return b; });
        bool has_neg = std::any_of(l.begin(), l.end(), [](bool b) { return !b; });
        if (has_pos && has_neg) eval.splits[tag].pr_auc = pr_auc(s, l);
      }
    }
  }

  if (want_ret) {
    double sum = 0.0;
    int count = 0;
    std::map<std::string, std::pair<double, int>> split_sums;
    for (const auto& query : target.test) {
      double value = retrieval_ndcg(query, all_train, encoder, cache);
      sum += value;
      ++count;
      if (auto tag = tag_name(query.scene_tag)) {
        split_sums[*tag].first += value;
        split_sums[*tag].second += 1;
      }
    }
    if (count > 0) eval.overall.ndcg = sum / count;
    for (const auto& [tag, acc] : split_sums) eval.splits[tag].ndcg = acc.first / acc.second;
  }

  if (want_det || want_seg) {
    bool masks_ok = std::all_of(target.train.begin(), target.train.end(),
                                [](const ImageRecord& r) { return r.mask.has_value(); });
    if (!masks_ok) {
      eval.flags.push_back("dense tasks skipped: MissingMasks on train images");
    } else {
      Eigen::VectorXf target_vec = target_feature(target.train, encoder, cache);
      DenseInputs dense;
      for (const ImageRecord* rec : all_test) {
        const bool is_target = rec->instance_id == instance_id;
        if (!rec->mask) continue;  // only densely-annotated images participate
        if (!is_target && !options.include_other_instance_dense) continue;
        dense.predictions.push_back(dense_predict(*rec, target_vec, encoder, cache));
        DenseGroundTruth gt;
        if (is_target) {
          gt.mask = *rec->mask;
          gt.bbox = rec->bbox ? *rec->bbox : mask_to_bbox(*rec->mask);
        }
        dense.gts.push_back(std::move(gt));
        dense.tags.push_back(tag_name(rec->scene_tag));
      }
      if (dense.predictions.empty()) {
        eval.flags.push_back("dense tasks skipped: no annotated test images");
      } else {
        fill_dense_metrics(eval.overall, dense.predictions, dense.gts, want_det, want_seg);
        std::set<std::string> present;
        for (const auto& t : dense.tags) {
          if (t) present.insert(*t);
        }
        for (const auto& tag : present) {
          std::vector<DensePrediction> p;
          std::vector<DenseGroundTruth> g;
          bool any_gt = false;
          for (size_t i = 0; i < dense.predictions.size(); ++i) {
            if (dense.tags[i] != tag) continue;
            p.push_back(dense.predictions[i]);
            g.push_back(dense.gts[i]);
            any_gt = any_gt || dense.gts[i].has_object();
          }
          if (any_gt) fill_dense_metrics(eval.splits[tag], p, g, want_det, want_seg);
        }
      }
    }
  }
  return eval;
}

namespace {

const std::vector<std::pair<const char*, std::optional<double> TaskMetrics::*>>& metric_fields() {
  static const std::vector<std::pair<const char*, std::optional<double> TaskMetrics::*>> fields = {
      {"pr_auc", &TaskMetrics::pr_auc},     {"ndcg", &TaskMetrics::ndcg},
      {"det_ap", &TaskMetrics::det_ap},     {"det_ap50", &TaskMetrics::det_ap50},
      {"det_f1", &TaskMetrics::det_f1},     {"seg_ap", &TaskMetrics::seg_ap},
      {"seg_ap50", &TaskMetrics::seg_ap50}, {"seg_f1", &TaskMetrics::seg_f1},
  };
  return fields;
}

json metrics_to_json(const TaskMetrics& m) {
  json j = json::object();
  for (const auto& [name, member] : metric_fields()) {
    if (m.*member) j[name] = *(m.*member);
  }
  return j;
}

TaskMetrics metrics_from_json(const json& j) {
  TaskMetrics m;
  for (const auto& [name, member] : metric_fields()) {
    if (j.contains(name)) m.*member = j[name].get<double>();
  }
  return m;
}

TaskMetrics mean_metrics(const std::vector<const TaskMetrics*>& items) {
  TaskMetrics out;
  for (const auto& [name, member] : metric_fields()) {
    double sum = 0.0;
    int count = 0;
    for (const TaskMetrics* m : items) {
      if (m->*member) {
        sum += *(m->*member);
        ++count;
      }
    }
    if (count > 0) out.*member = sum / count;
  }
  return out;
}

const char* metric_task(const std::string& metric) {
  if (metric == "pr_auc") return "classification";
  if (metric == "ndcg") return "retrieval";
  if (metric.rfind("det_", 0) == 0) return "detection";
  return "segmentation";
}

}  // namespace

EvalReport evaluate_dataset(const InstanceDataset& dataset, const Encoder& encoder,
                            const std::string& encoder_label, const EvalOptions& options) {
  EvalReport report;
  report.encoder_label = encoder_label;
  report.dataset_digest = hex_digest(dataset.digest());

  EmbeddingCache shared_cache = EmbeddingCache::from_env();
  EvalOptions effective = options;
  if (!effective.cache) effective.cache = &shared_cache;

  for (const auto& [id, _] : dataset.instances) {
    report.per_instance.emplace(id, evaluate_instance(dataset, id, encoder, effective));
  }
  recompute_aggregates(report);
  return report;
}

void recompute_aggregates(EvalReport& report) {
  report.aggregate = TaskMetrics{};
  report.aggregate_splits.clear();
  std::vector<const TaskMetrics*> overall;
  std::map<std::string, std::vector<const TaskMetrics*>> split_groups;
  for (const auto& [_, eval] : report.per_instance) {
    overall.push_back(&eval.overall);
    for (const auto& [tag, metrics] : eval.splits) split_groups[tag].push_back(&metrics);
  }
  report.aggregate = mean_metrics(overall);
  for (const auto& [tag, group] : split_groups) report.aggregate_splits[tag] = mean_metrics(group);
}

std::string report_to_json(const EvalReport& report) {
  json doc;
  doc["schema_version"] = report.schema_version;
  doc["encoder_label"] = report.encoder_label;
  doc["dataset_digest"] = report.dataset_digest;
  doc["aggregate"] = metrics_to_json(report.aggregate);
  doc["aggregate_splits"] = json::object();
  for (const auto& [tag, m] : report.aggregate_splits) doc["aggregate_splits"][tag] = metrics_to_json(m);
  doc["per_instance"] = json::object();
  for (const auto& [id, eval] : report.per_instance) {
    json j;
    j["overall"] = metrics_to_json(eval.overall);
    j["splits"] = json::object();
    for (const auto& [tag, m] : eval.splits) j["splits"][tag] = metrics_to_json(m);
    j["flags"] = eval.flags;
    doc["per_instance"][id] = std::move(j);
  }
  return doc.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  json doc = json::parse(text);
  EvalReport report;
  report.schema_version = doc.at("schema_version").get<int>();
  report.encoder_label = doc.at("encoder_label").get<std::string>();
  report.dataset_digest = doc.at("dataset_digest").get<std::string>();
  report.aggregate = metrics_from_json(doc.at("aggregate"));
  for (const auto& [tag, m] : doc.at("aggregate_splits").items()) {
    report.aggregate_splits[tag] = metrics_from_json(m);
  }
  for (const auto& [id, j] : doc.at("per_instance").items()) {
    InstanceEval eval;
    eval.overall = metrics_from_json(j.at("overall"));
    for (const auto& [tag, m] : j.at("splits").items()) eval.splits[tag] = metrics_from_json(m);
    for (const auto& f : j.at("flags")) eval.flags.push_back(f.get<std::string>());
    report.per_instance.emplace(id, std::move(eval));
  }
  return report;
}

void write_report_json(const EvalReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << report_to_json(report) << "\n";
}

EvalReport read_report_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return report_from_json(text);
}

void write_report_csv(const EvalReport& report, const fs::path& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << "instance_id,task,metric,split,value\n";
  auto emit = [&out](const std::string& instance, const TaskMetrics& m, const std::string& split) {
    for (const auto& [name, member] : metric_fields()) {
      if (m.*member) {
        out << instance << "," << metric_task(name) << "," << name << "," << split << ","
            << *(m.*member) << "\n";
      }
    }
  };
  for (const auto& [id, eval] : report.per_instance) {
    emit(id, eval.overall, "overall");
    for (const auto& [tag, m] : eval.splits) emit(id, m, tag);
  }
  emit("aggregate", report.aggregate, "overall");
  for (const auto& [tag, m] : report.aggregate_splits) emit("aggregate", m, tag);
}

}  // namespace persrep
