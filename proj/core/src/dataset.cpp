#include "persrep/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <json.hpp>

#include "persrep/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace persrep {

const char* to_string(Split split) { return split == Split::train ? "train" : "test"; }

const char* to_string(SceneTag tag) {
  switch (tag) {
    case SceneTag::id: return "id";
    case SceneTag::pose: return "pose";
    case SceneTag::distractors: return "distractors";
    case SceneTag::both: return "both";
  }
  return "id";
}

std::optional<SceneTag> scene_tag_from_string(const std::string& s) {
  if (s == "id") return SceneTag::id;
  if (s == "pose") return SceneTag::pose;
  if (s == "distractors") return SceneTag::distractors;
  if (s == "both") return SceneTag::both;
  return std::nullopt;
}

const InstanceEntry& InstanceDataset::at(const std::string& id) const {
  auto it = instances.find(id);
  if (it == instances.end()) raise(ErrorCode::UnknownInstance, id);
  return it->second;
}

std::vector<std::string> InstanceDataset::instance_ids() const {
  std::vector<std::string> ids;
  ids.reserve(instances.size());
  for (const auto& [id, _] : instances) ids.push_back(id);
  return ids;
}

uint64_t InstanceDataset::digest() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [id, entry] : instances) {
    h = fnv1a(id, h);
    h = fnv1a(entry.category, h);
    auto fold_records = [&h](const std::vector<ImageRecord>& records) {
      for (const auto& rec : records) {
        h = fnv1a(rec.id, h);
        h = fnv1a_u64(pixel_digest(rec.pixels), h);
        if (rec.mask) {
          h = fnv1a(std::span<const uint8_t>(rec.mask->data.data(), rec.mask->data.size()), h);
        }
      }
    };
    fold_records(entry.train);
    fold_records(entry.test);
  }
  return h;
}

namespace {

struct Annotation {
  std::optional<BBox> bbox;
  std::optional<SceneTag> scene;
};

std::map<std::string, Annotation> load_annotations(const fs::path& file) {
  std::map<std::string, Annotation> out;
  if (!fs::exists(file)) return out;
  std::ifstream in(file);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedAnnotation, file.string() + ": " + e.what());
  }
  if (!doc.is_object()) raise(ErrorCode::MalformedAnnotation, file.string() + ": expected object");
  for (const auto& [stem, entry] : doc.items()) {
    Annotation ann;
    if (entry.contains("bbox")) {
      const auto& b = entry["bbox"];
      if (!b.is_array() || b.size() != 4) {
        raise(ErrorCode::MalformedAnnotation, file.string() + ": bbox for " + stem);
      }
      ann.bbox = BBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    }
    if (entry.contains("scene")) {
      auto tag = scene_tag_from_string(entry["scene"].get<std::string>());
      if (!tag) raise(ErrorCode::MalformedAnnotation, file.string() + ": scene for " + stem);
      ann.scene = tag;
    }
    out[stem] = ann;
  }
  return out;
}

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> sorted_image_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::exists(dir)) return files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ImageRecord load_record(const std::string& instance_id, Split split, const fs::path& file,
                        const fs::path& masks_dir,
                        const std::map<std::string, Annotation>& annotations) {
  ImageRecord rec;
  const std::string stem = file.stem().string();
  rec.id = instance_id + "/" + stem;
  rec.instance_id = instance_id;
  rec.split = split;
  rec.pixels = load_image(file);

  fs::path mask_file = masks_dir / (stem + ".png");
  if (fs::exists(mask_file)) {
    Mask mask = load_mask(mask_file);
    if (mask.height != rec.pixels.height || mask.width != rec.pixels.width) {
      raise(ErrorCode::MaskShapeMismatch, rec.id + ": mask " + std::to_string(mask.height) + "x" +
                                              std::to_string(mask.width) + " vs image " +
                                              std::to_string(rec.pixels.height) + "x" +
                                              std::to_string(rec.pixels.width));
    }
    rec.mask = std::move(mask);
  }

  if (auto it = annotations.find(stem); it != annotations.end()) {
    rec.scene_tag = it->second.scene;
    if (it->second.bbox) {
      const BBox& b = *it->second.bbox;
      if (b.row_min < 0 || b.col_min < 0 || b.row_min > b.row_max || b.col_min > b.col_max ||
          b.row_max >= rec.pixels.height || b.col_max >= rec.pixels.width) {
        raise(ErrorCode::MalformedAnnotation, rec.id + ": bbox out of bounds");
      }
      if (rec.mask && !rec.mask->empty_mask() && mask_to_bbox(*rec.mask) != b) {
        raise(ErrorCode::MalformedAnnotation, rec.id + ": bbox is not the tight box of the mask");
      }
      rec.bbox = b;
    }
  }
  if (!rec.bbox && rec.mask && !rec.mask->empty_mask()) rec.bbox = mask_to_bbox(*rec.mask);
  return rec;
}

}  // namespace

InstanceDataset ingest_dataset(const fs::path& root, int min_test) {
  IngestOptions options;
  options.min_test = min_test;
  return ingest_dataset(root, options);
}

InstanceDataset ingest_dataset(const fs::path& root, const IngestOptions& options) {
  fs::path manifest_file = root / "manifest.json";
  if (!fs::exists(manifest_file)) {
    raise(ErrorCode::MalformedAnnotation, "missing manifest.json under " + root.string());
  }
  json manifest;
  try {
    std::ifstream in(manifest_file);
    in >> manifest;
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedAnnotation, std::string("manifest.json: ") + e.what());
  }
  if (!manifest.contains("instances") || !manifest["instances"].is_object()) {
    raise(ErrorCode::MalformedAnnotation, "manifest.json lacks an \"instances\" object");
  }

  InstanceDataset dataset;
  for (const auto& [instance_id, meta] : manifest["instances"].items()) {
    if (!meta.contains("category") || !meta["category"].is_string()) {
      raise(ErrorCode::MalformedAnnotation, instance_id + ": category must be explicit");
    }
    InstanceEntry entry;
    entry.category = meta["category"].get<std::string>();

    fs::path inst_dir = root / instance_id;
    auto annotations = load_annotations(inst_dir / "annotations.json");
    fs::path masks_dir = inst_dir / "masks";

    for (const auto& file : sorted_image_files(inst_dir / "train")) {
      entry.train.push_back(load_record(instance_id, Split::train, file, masks_dir, annotations));
    }
    for (const auto& file : sorted_image_files(inst_dir / "test")) {
      entry.test.push_back(load_record(instance_id, Split::test, file, masks_dir, annotations));
    }

    if (static_cast<int>(entry.train.size()) != options.train_per_instance) {
      raise(ErrorCode::MissingTrainImages,
            instance_id + " has " + std::to_string(entry.train.size()) + " train images, expected " +
                std::to_string(options.train_per_instance));
    }
    if (static_cast<int>(entry.test.size()) < options.min_test) {
      raise(ErrorCode::InsufficientTestImages,
            instance_id + " has " + std::to_string(entry.test.size()) + " test images, need >= " +
                std::to_string(options.min_test));
    }
    for (const auto& tr : entry.train) {
      for (const auto& te : entry.test) {
        if (tr.id == te.id) {
          raise(ErrorCode::MalformedAnnotation, tr.id + " appears in both train and test");
        }
      }
    }
    dataset.instances.emplace(instance_id, std::move(entry));
  }
  return dataset;
}

void write_dataset(const InstanceDataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  json manifest;
  manifest["instances"] = json::object();
  for (const auto& [id, entry] : dataset.instances) {
    manifest["instances"][id] = {{"category", entry.category}};
    fs::path inst_dir = root / id;
    fs::create_directories(inst_dir / "train");
    fs::create_directories(inst_dir / "test");

    json annotations = json::object();
    auto dump_records = [&](const std::vector<ImageRecord>& records, const char* split_dir) {
      for (const auto& rec : records) {
        std::string stem = rec.id.substr(rec.id.find('/') + 1);
        save_png(rec.pixels, inst_dir / split_dir / (stem + ".png"));
        if (rec.mask) {
          fs::create_directories(inst_dir / "masks");
          save_mask_png(*rec.mask, inst_dir / "masks" / (stem + ".png"));
        }
        json ann = json::object();
        if (rec.bbox) ann["bbox"] = {rec.bbox->row_min, rec.bbox->col_min, rec.bbox->row_max, rec.bbox->col_max};
        if (rec.scene_tag) ann["scene"] = to_string(*rec.scene_tag);
        if (!ann.empty()) annotations[stem] = ann;
      }
    };
    dump_records(entry.train, "train");
    dump_records(entry.test, "test");
    if (!annotations.empty()) {
      std::ofstream out(inst_dir / "annotations.json");
      out << annotations.dump(2) << "\n";
    }
  }
  std::ofstream out(root / "manifest.json");
  out << manifest.dump(2) << "\n";
}

std::pair<InstanceDataset, InstanceDataset> split_validation(const InstanceDataset& dataset,
                                                             int n_val, uint64_t seed) {
  if (n_val >= static_cast<int>(dataset.size())) {
    raise(ErrorCode::TooFewInstances, "n_val=" + std::to_string(n_val) + " with " +
                                          std::to_string(dataset.size()) + " instances");
  }
  std::vector<std::string> ids = dataset.instance_ids();  // sorted by map order
  auto rng = make_rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  InstanceDataset val, rest;
  for (size_t i = 0; i < ids.size(); ++i) {
    auto& target = (static_cast<int>(i) < n_val) ? val : rest;
    target.instances.emplace(ids[i], dataset.instances.at(ids[i]));
  }
  return {std::move(val), std::move(rest)};
}

}  // namespace persrep
