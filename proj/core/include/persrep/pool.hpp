#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "persrep/dataset.hpp"

namespace persrep {

inline constexpr const char* kNegativeInstanceId = "negative";

enum class GeneratorKind { cut_paste, dreambooth_like, external, real_only };

const char* to_string(GeneratorKind kind);
std::optional<GeneratorKind> generator_kind_from_string(const std::string& s);

struct Provenance {
  GeneratorKind generator = GeneratorKind::cut_paste;
  std::optional<double> cfg;
  std::optional<std::string> caption;
  uint64_t seed = 0;
  std::optional<double> filter_score;
};

struct PoolImage {
  ImageRecord record;
  Provenance provenance;
};

struct SyntheticPool {
  std::string instance_id;
  std::vector<PoolImage> positives;  // record.instance_id == instance_id
  std::vector<PoolImage> negatives;  // record.instance_id == kNegativeInstanceId

  // Digest over pixels + provenance of every image; stable across runs.
  uint64_t digest() const;
};

// Layout: dir/{positives,negatives}/NNNN.png (+ NNNN_mask.png) + dir/provenance.json
void save_pool(const SyntheticPool& pool, const std::filesystem::path& dir);
SyntheticPool load_pool(const std::filesystem::path& dir);

}  // namespace persrep
