#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "persrep/encoder.hpp"

namespace persrep {

struct LoRAEntry {
  Eigen::MatrixXf a;  // r × d_in, random init
  Eigen::MatrixXf b;  // d_out × r, zero init (delta starts at exactly zero)
  float alpha = 0.5f;
  int rank = 16;
  float dropout_p = 0.3f;

  Eigen::MatrixXf delta() const { return (alpha / static_cast<float>(rank)) * b * a; }
};

struct LoRAAdapter {
  std::map<std::string, LoRAEntry> entries;

  long trainable_param_count() const;
  uint64_t digest() const;
};

struct AdapterSpec {
  std::vector<std::string> target_maps;  // empty = every map the encoder names
  int rank = 16;
  float alpha = 0.5f;
  float dropout_p = 0.3f;
};

// W x + (alpha/r) B (A drop(x)); inverted dropout on the adapter input, active
// only in training mode.
Eigen::VectorXf lora_forward(const Eigen::MatrixXf& base, const LoRAEntry& entry,
                             const Eigen::VectorXf& x, bool training, uint64_t rng_seed);

// Elementwise inverted-dropout mask (values 0 or 1/(1-p)).
Eigen::MatrixXf dropout_mask(int rows, int cols, float p, uint64_t rng_seed);

// Toy encoder with low-rank deltas on its named maps. Only adapter parameters
// train; the base projections stay frozen.
class AdaptedToyEncoder : public Encoder {
 public:
  AdaptedToyEncoder(std::shared_ptr<const ToyEncoder> base, LoRAAdapter adapter);

  const EncoderDescriptor& descriptor() const override { return base_->descriptor(); }
  EmbeddingBundle embed(const Image& image) const override;
  std::vector<std::string> linear_map_names() const override { return base_->linear_map_names(); }
  uint64_t weights_digest() const override;

  const ToyEncoder& base() const { return *base_; }
  const LoRAAdapter& adapter() const { return adapter_; }
  LoRAAdapter& adapter() { return adapter_; }

 private:
  std::shared_ptr<const ToyEncoder> base_;
  LoRAAdapter adapter_;
};

std::shared_ptr<AdaptedToyEncoder> attach_adapter(std::shared_ptr<const ToyEncoder> encoder,
                                                  const AdapterSpec& spec, uint64_t init_seed = 1);

// Single-file checkpoint: "PRLORA1\0", u32 map count, then per map
// u32 name length + bytes, u32 rank, f32 alpha, f32 dropout, u32 d_in,
// u32 d_out, A row-major f32, B row-major f32. Little-endian throughout.
void save_adapter(const LoRAAdapter& adapter, const std::filesystem::path& path);
LoRAAdapter load_adapter(const std::filesystem::path& path);

}  // namespace persrep
