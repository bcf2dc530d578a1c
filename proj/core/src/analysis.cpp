#include "persrep/analysis.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "persrep/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace persrep {

namespace {

BBox padded_box(const BBox& box, int height, int width) {
  int pad_r = static_cast<int>(std::lround(0.1 * box.height()));
  int pad_c = static_cast<int>(std::lround(0.1 * box.width()));
  return BBox{std::max(0, box.row_min - pad_r), std::max(0, box.col_min - pad_c),
              std::min(height - 1, box.row_max + pad_r), std::min(width - 1, box.col_max + pad_c)};
}

Image object_crop(const ImageRecord& rec) {
  if (rec.mask && !rec.mask->empty_mask()) {
    return crop(rec.pixels, padded_box(mask_to_bbox(*rec.mask), rec.pixels.height, rec.pixels.width));
  }
  return rec.pixels;  // no mask: whole image stands in for the crop
}

}  // namespace

FidelityResult fidelity(const SyntheticPool& pool, const std::vector<ImageRecord>& refs,
                        const PerceptualEmbedder& metric) {
  if (refs.empty()) raise(ErrorCode::MissingMasks, "fidelity needs reference records");
  Eigen::VectorXd ref_mean;
  for (const auto& ref : refs) {
    if (!ref.mask || ref.mask->empty_mask()) {
      raise(ErrorCode::MissingMasks, "fidelity reference lacks a mask: " + ref.id);
    }
    Eigen::VectorXd e = metric.embed(object_crop(ref)).cast<double>();
    if (ref_mean.size() == 0) ref_mean = Eigen::VectorXd::Zero(e.size());
    ref_mean += e;
  }
  ref_mean /= static_cast<double>(refs.size());
  double ref_norm = ref_mean.norm();
  if (ref_norm > 0.0) ref_mean /= ref_norm;

  FidelityResult result;
  result.per_image.reserve(pool.positives.size());
  double sum = 0.0;
  for (const auto& img : pool.positives) {
    Eigen::VectorXd v = metric.embed(object_crop(img.record)).cast<double>();
    double vn = v.norm(), mn = ref_mean.norm();
    double value = (vn == 0.0 || mn == 0.0) ? 0.0 : v.dot(ref_mean) / (vn * mn);
    result.per_image.push_back(value);
    sum += value;
  }
  result.mean = pool.positives.empty() ? 0.0 : sum / static_cast<double>(pool.positives.size());
  return result;
}

double diversity(const SyntheticPool& pool, const PerceptualEmbedder& metric) {
  const size_t n = pool.positives.size();
  if (n < 2) raise(ErrorCode::PoolTooSmall, "diversity needs at least 2 positives");
  std::vector<Eigen::VectorXf> embeddings;
  embeddings.reserve(n);
  for (const auto& img : pool.positives) embeddings.push_back(metric.embed(object_crop(img.record)));

  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) sum += cosine(embeddings[i], embeddings[j]);
  }
  double pairs = static_cast<double>(n) * (n - 1) / 2.0;
  return 1.0 - sum / pairs;
}

PoolAnalysis analyze_pool(const SyntheticPool& pool, const std::vector<ImageRecord>& refs,
                          const PerceptualEmbedder& metric) {
  PoolAnalysis analysis;
  FidelityResult f = fidelity(pool, refs, metric);
  analysis.fidelity_per_image = std::move(f.per_image);
  analysis.fidelity_mean = f.mean;
  analysis.diversity = pool.positives.size() >= 2 ? diversity(pool, metric) : 0.0;
  analysis.pool_digest = hex_digest(pool.digest());
  return analysis;
}

void write_analysis_json(const PoolAnalysis& analysis, const fs::path& path) {
  json doc;
  doc["pool_digest"] = analysis.pool_digest;
  doc["fidelity_mean"] = analysis.fidelity_mean;
  doc["diversity"] = analysis.diversity;
  doc["fidelity_per_image"] = analysis.fidelity_per_image;
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

PoolAnalysis read_analysis_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  json doc;
  in >> doc;
  PoolAnalysis analysis;
  analysis.pool_digest = doc.at("pool_digest").get<std::string>();
  analysis.fidelity_mean = doc.at("fidelity_mean").get<double>();
  analysis.diversity = doc.at("diversity").get<double>();
  for (const auto& v : doc.at("fidelity_per_image")) analysis.fidelity_per_image.push_back(v.get<double>());
  return analysis;
}

void append_analysis_csv(const PoolAnalysis& analysis, const fs::path& path) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  if (fresh) out << "pool_digest,fidelity_mean,diversity\n";
  out << analysis.pool_digest << "," << analysis.fidelity_mean << "," << analysis.diversity << "\n";
}

}  // namespace persrep
