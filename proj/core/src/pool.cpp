#include "persrep/pool.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "persrep/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace persrep {

const char* to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::cut_paste: return "cut_paste";
    case GeneratorKind::dreambooth_like: return "dreambooth_like";
    case GeneratorKind::external: return "external";
    case GeneratorKind::real_only: return "real_only";
  }
  return "cut_paste";
}

std::optional<GeneratorKind> generator_kind_from_string(const std::string& s) {
  if (s == "cut_paste") return GeneratorKind::cut_paste;
  if (s == "dreambooth_like") return GeneratorKind::dreambooth_like;
  if (s == "external") return GeneratorKind::external;
  if (s == "real_only") return GeneratorKind::real_only;
  return std::nullopt;
}

namespace {

uint64_t fold_pool_image(const PoolImage& img, uint64_t h) {
  h = fnv1a(img.record.id, h);
  h = fnv1a_u64(pixel_digest(img.record.pixels), h);
  if (img.record.mask) {
    h = fnv1a(std::span<const uint8_t>(img.record.mask->data.data(), img.record.mask->data.size()), h);
  }
  h = fnv1a(to_string(img.provenance.generator), h);
  h = fnv1a_u64(img.provenance.seed, h);
  if (img.provenance.caption) h = fnv1a(*img.provenance.caption, h);
  if (img.provenance.cfg) {
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    std::memcpy(&bits, &*img.provenance.cfg, sizeof(bits));
    h = fnv1a_u64(bits, h);
  }
  return h;
}

json provenance_to_json(const PoolImage& img) {
  json j;
  j["id"] = img.record.id;
  j["instance_id"] = img.record.instance_id;
  j["generator"] = to_string(img.provenance.generator);
  j["seed"] = img.provenance.seed;
  if (img.provenance.cfg) j["cfg"] = *img.provenance.cfg;
  if (img.provenance.caption) j["caption"] = *img.provenance.caption;
  if (img.provenance.filter_score) j["filter_score"] = *img.provenance.filter_score;
  return j;
}

Provenance provenance_from_json(const json& j) {
  Provenance p;
  auto kind = generator_kind_from_string(j.at("generator").get<std::string>());
  if (!kind) raise(ErrorCode::MalformedAnnotation, "unknown generator kind in provenance");
  p.generator = *kind;
  p.seed = j.at("seed").get<uint64_t>();
  if (j.contains("cfg")) p.cfg = j["cfg"].get<double>();
  if (j.contains("caption")) p.caption = j["caption"].get<std::string>();
  if (j.contains("filter_score")) p.filter_score = j["filter_score"].get<double>();
  return p;
}

std::string index_name(size_t i) {
  std::ostringstream out;
  out << std::setw(4) << std::setfill('0') << i;
  return out.str();
}

void save_side(const std::vector<PoolImage>& images, const fs::path& side_dir, json& entries) {
  fs::create_directories(side_dir);
  for (size_t i = 0; i < images.size(); ++i) {
    const std::string stem = index_name(i);
    save_png(images[i].record.pixels, side_dir / (stem + ".png"));
    if (images[i].record.mask) {
      save_mask_png(*images[i].record.mask, side_dir / (stem + "_mask.png"));
    }
    entries.push_back(provenance_to_json(images[i]));
  }
}

std::vector<PoolImage> load_side(const fs::path& side_dir, const json& entries,
                                 const std::string& instance_id, Split split) {
  std::vector<PoolImage> out;
  for (size_t i = 0; i < entries.size(); ++i) {
    const std::string stem = index_name(i);
    PoolImage img;
    img.record.pixels = load_image(side_dir / (stem + ".png"));
    fs::path mask_file = side_dir / (stem + "_mask.png");
    if (fs::exists(mask_file)) {
      img.record.mask = load_mask(mask_file);
      if (!img.record.mask->empty_mask()) img.record.bbox = mask_to_bbox(*img.record.mask);
    }
    img.record.id = entries[i].at("id").get<std::string>();
    img.record.instance_id = entries[i].at("instance_id").get<std::string>();
    img.record.split = split;
    img.provenance = provenance_from_json(entries[i]);
    out.push_back(std::move(img));
    (void)instance_id;
  }
  return out;
}

}  // namespace

uint64_t SyntheticPool::digest() const {
  uint64_t h = fnv1a(instance_id);
  for (const auto& img : positives) h = fold_pool_image(img, h);
  for (const auto& img : negatives) h = fold_pool_image(img, h);
  return h;
}

void save_pool(const SyntheticPool& pool, const fs::path& dir) {
  fs::create_directories(dir);
  json doc;
  doc["instance_id"] = pool.instance_id;
  doc["positives"] = json::array();
  doc["negatives"] = json::array();
  save_side(pool.positives, dir / "positives", doc["positives"]);
  save_side(pool.negatives, dir / "negatives", doc["negatives"]);
  std::ofstream out(dir / "provenance.json");
  out << doc.dump(2) << "\n";
}

SyntheticPool load_pool(const fs::path& dir) {
  std::ifstream in(dir / "provenance.json");
  if (!in) raise(ErrorCode::IoError, "missing provenance.json under " + dir.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedAnnotation, dir.string() + ": " + e.what());
  }
  SyntheticPool pool;
  pool.instance_id = doc.at("instance_id").get<std::string>();
  pool.positives = load_side(dir / "positives", doc.at("positives"), pool.instance_id, Split::train);
  pool.negatives = load_side(dir / "negatives", doc.at("negatives"), pool.instance_id, Split::train);
  return pool;
}

}  // namespace persrep
