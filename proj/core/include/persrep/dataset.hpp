#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "persrep/image.hpp"

namespace persrep {

enum class Split { train, test };

// PODS-style test-scene tags.
enum class SceneTag { id, pose, distractors, both };

const char* to_string(Split split);
const char* to_string(SceneTag tag);
std::optional<SceneTag> scene_tag_from_string(const std::string& s);

struct ImageRecord {
  std::string id;
  Image pixels;
  std::string instance_id;
  Split split = Split::train;
  std::optional<SceneTag> scene_tag;
  std::optional<Mask> mask;
  std::optional<BBox> bbox;
};

struct InstanceEntry {
  std::string category;  // the generic category text used for prior prompts
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> test;
};

struct InstanceDataset {
  std::map<std::string, InstanceEntry> instances;

  size_t size() const { return instances.size(); }
  const InstanceEntry& at(const std::string& id) const;
  std::vector<std::string> instance_ids() const;

  // Digest over instance ids, categories, and every record's pixels/labels.
  uint64_t digest() const;
};

struct IngestOptions {
  int train_per_instance = 3;
  int min_test = 3;
};

// Reads the on-disk layout:
//   root/manifest.json                 {"instances": {"<id>": {"category": ...}}}
//   root/<id>/train/*.png|jpg
//   root/<id>/test/*.png|jpg
//   root/<id>/masks/<stem>.png         8-bit grayscale, nonzero = foreground
//   root/<id>/annotations.json         optional {"<stem>": {"bbox":[r0,c0,r1,c1], "scene": ...}}
InstanceDataset ingest_dataset(const std::filesystem::path& root, int min_test = 3);
InstanceDataset ingest_dataset(const std::filesystem::path& root, const IngestOptions& options);

// Writes a dataset back into the ingestion layout (fixture/tooling support).
void write_dataset(const InstanceDataset& dataset, const std::filesystem::path& root);

// Class-wise split: first result holds n_val whole instances, second the rest.
std::pair<InstanceDataset, InstanceDataset> split_validation(const InstanceDataset& dataset,
                                                             int n_val, uint64_t seed);

}  // namespace persrep
