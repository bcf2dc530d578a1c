#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "persrep/image.hpp"

namespace persrep {

struct EncoderDescriptor {
  std::string name;
  int input_size = 64;  // canonical square input side
  int patch_size = 8;
  int dim = 32;  // embedding width D
  std::string weight_source;  // e.g. "seed:17" for the toy projections
};

struct EmbeddingBundle {
  Eigen::VectorXf cls;      // D
  Eigen::MatrixXf patches;  // (grid_h*grid_w) × D, cells in row-major order
  int grid_h = 0;
  int grid_w = 0;
  int patch_size = 0;
  std::pair<int, int> source_dims{0, 0};

  Eigen::VectorXf patch_at(int r, int c) const {
    return patches.row(r * grid_w + c).transpose();
  }
};

// [cls ∥ mean over all patch vectors], length 2D.
Eigen::VectorXf global_feature(const EmbeddingBundle& bundle);

// Cosine similarity of float vectors, accumulated in double; 0 when either
// operand is the zero vector.
double cosine(const Eigen::VectorXf& a, const Eigen::VectorXf& b);

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual const EncoderDescriptor& descriptor() const = 0;

  // Inference embedding: input resized (bilinear) to the canonical size,
  // dropout disabled, deterministic.
  virtual EmbeddingBundle embed(const Image& image) const = 0;

  virtual std::vector<std::string> linear_map_names() const = 0;

  // Identity of the effective weights; changes whenever outputs can change.
  virtual uint64_t weights_digest() const = 0;
};

// Fixed random-projection patch encoder. Patches are flattened, centered to
// [-0.5, 0.5], projected by a frozen matrix, and squashed with tanh; the CLS
// vector is a second frozen projection of the mean patch embedding. The tanh
// keeps per-patch structure visible in the pooled features instead of
// collapsing everything onto the average patch.
class ToyEncoder : public Encoder {
 public:
  ToyEncoder(uint64_t weight_seed = 17, int input_size = 64, int patch_size = 8, int dim = 32);

  const EncoderDescriptor& descriptor() const override { return descriptor_; }
  EmbeddingBundle embed(const Image& image) const override;
  std::vector<std::string> linear_map_names() const override;
  uint64_t weights_digest() const override;

  // d_out×d_in weight of a named map; throws UnknownTargetMap.
  const Eigen::MatrixXf& weight(const std::string& name) const;

  // Rows = patch cells in row-major order, columns = flattened normalized
  // patch pixels (patch_size² · 3).
  Eigen::MatrixXf patch_matrix(const Image& image) const;

  int patch_input_dim() const { return descriptor_.patch_size * descriptor_.patch_size * 3; }
  int grid_cells() const;

  static constexpr const char* kPatchMap = "patch_proj";
  static constexpr const char* kClsMap = "cls_proj";

 private:
  EncoderDescriptor descriptor_;
  uint64_t weight_seed_;
  Eigen::MatrixXf patch_weight_;  // D × (patch²·3)
  Eigen::MatrixXf cls_weight_;    // D × D
};

// Named encoder registry. "toy" is always available; descriptors for real
// backbones resolve only when their weights are reachable.
std::vector<EncoderDescriptor> registered_encoders();
std::shared_ptr<ToyEncoder> make_toy_encoder(const std::string& name);

}  // namespace persrep
