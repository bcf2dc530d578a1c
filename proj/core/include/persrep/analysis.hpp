#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "persrep/generator.hpp"
#include "persrep/pool.hpp"

namespace persrep {

struct PoolAnalysis {
  std::vector<double> fidelity_per_image;  // values in [-1, 1]
  double fidelity_mean = 0.0;
  double diversity = 0.0;  // in [0, 2]
  std::string pool_digest;
};

struct FidelityResult {
  std::vector<double> per_image;
  double mean = 0.0;
};

// Cosine of each synthetic positive's object-crop embedding against the
// renormalized mean embedding of the reference crops. Crops use the mask
// bbox padded by 10% per side.
FidelityResult fidelity(const SyntheticPool& pool, const std::vector<ImageRecord>& refs,
                        const PerceptualEmbedder& metric);

// 1 - mean pairwise cosine over the positives' embeddings (higher = more
// diverse).
double diversity(const SyntheticPool& pool, const PerceptualEmbedder& metric);

PoolAnalysis analyze_pool(const SyntheticPool& pool, const std::vector<ImageRecord>& refs,
                          const PerceptualEmbedder& metric);

void write_analysis_json(const PoolAnalysis& analysis, const std::filesystem::path& path);
PoolAnalysis read_analysis_json(const std::filesystem::path& path);

// Appends "pool_digest,fidelity_mean,diversity" rows for the report plotter.
void append_analysis_csv(const PoolAnalysis& analysis, const std::filesystem::path& path);

}  // namespace persrep
