#include "persrep/encoder.hpp"

#include <random>

#include "persrep/rng.hpp"

namespace persrep {

double cosine(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  Eigen::VectorXd da = a.cast<double>();
  Eigen::VectorXd db = b.cast<double>();
  double na = da.norm(), nb = db.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return da.dot(db) / (na * nb);
}

Eigen::VectorXf global_feature(const EmbeddingBundle& bundle) {
  const auto dim = bundle.cls.size();
  Eigen::VectorXf out(2 * dim);
  out.head(dim) = bundle.cls;
  out.tail(dim) = bundle.patches.colwise().mean().transpose();
  return out;
}

ToyEncoder::ToyEncoder(uint64_t weight_seed, int input_size, int patch_size, int dim)
    : weight_seed_(weight_seed) {
  descriptor_.name = "toy";
  descriptor_.input_size = input_size;
  descriptor_.patch_size = patch_size;
  descriptor_.dim = dim;
  descriptor_.weight_source = "seed:" + std::to_string(weight_seed);

  // Row-major fill from one seeded stream; documented so tests can rebuild
  // the maps independently.
  auto rng = make_rng(weight_seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const int p = patch_input_dim();
  patch_weight_.resize(dim, p);
  const float patch_scale = 1.0f / std::sqrt(static_cast<float>(p));
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < p; ++c) patch_weight_(r, c) = normal(rng) * patch_scale;
  }
  cls_weight_.resize(dim, dim);
  const float cls_scale = 1.0f / std::sqrt(static_cast<float>(dim));
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) cls_weight_(r, c) = normal(rng) * cls_scale;
  }
}

int ToyEncoder::grid_cells() const {
  int per_side = (descriptor_.input_size + descriptor_.patch_size - 1) / descriptor_.patch_size;
  return per_side * per_side;
}

Eigen::MatrixXf ToyEncoder::patch_matrix(const Image& image) const {
  if (image.empty_image()) raise(ErrorCode::EncoderUnavailable, "empty image");
  const int size = descriptor_.input_size;
  const int patch = descriptor_.patch_size;
  Image canonical = resize_bilinear(image, size, size);

  const int per_side = (size + patch - 1) / patch;
  Eigen::MatrixXf x(per_side * per_side, patch_input_dim());
  for (int pr = 0; pr < per_side; ++pr) {
    for (int pc = 0; pc < per_side; ++pc) {
      int row = pr * per_side + pc;
      int col = 0;
      for (int dr = 0; dr < patch; ++dr) {
        for (int dc = 0; dc < patch; ++dc) {
          int r = std::min(pr * patch + dr, size - 1);
          int c = std::min(pc * patch + dc, size - 1);
          for (int ch = 0; ch < 3; ++ch) {
            x(row, col++) = static_cast<float>(canonical.at(r, c, ch)) / 255.0f - 0.5f;
          }
        }
      }
    }
  }
  return x;
}

EmbeddingBundle ToyEncoder::embed(const Image& image) const {
  Eigen::MatrixXf x = patch_matrix(image);

  EmbeddingBundle bundle;
  bundle.patches = x * patch_weight_.transpose();
  Eigen::VectorXf mean_patch = bundle.patches.colwise().mean().transpose();
  bundle.cls = cls_weight_ * mean_patch;
  bundle.patch_size = descriptor_.patch_size;
  int per_side = (descriptor_.input_size + descriptor_.patch_size - 1) / descriptor_.patch_size;
  bundle.grid_h = per_side;
  bundle.grid_w = per_side;
  bundle.source_dims = {image.height, image.width};
  if (!bundle.patches.allFinite() || !bundle.cls.allFinite()) {
    raise(ErrorCode::NonFiniteOutput, "toy encoder produced non-finite values");
  }
  return bundle;
}

std::vector<std::string> ToyEncoder::linear_map_names() const { return {kPatchMap, kClsMap}; }

const Eigen::MatrixXf& ToyEncoder::weight(const std::string& name) const {
  if (name == kPatchMap) return patch_weight_;
  if (name == kClsMap) return cls_weight_;
  raise(ErrorCode::UnknownTargetMap, name);
}

uint64_t ToyEncoder::weights_digest() const {
  uint64_t h = fnv1a(descriptor_.name);
  h = fnv1a_u64(weight_seed_, h);
  h = fnv1a_u64(static_cast<uint64_t>(descriptor_.input_size), h);
  h = fnv1a_u64(static_cast<uint64_t>(descriptor_.patch_size), h);
  h = fnv1a_u64(static_cast<uint64_t>(descriptor_.dim), h);
  return h;
}

std::vector<EncoderDescriptor> registered_encoders() {
  return {
      {"toy", 64, 8, 32, "seed:17"},
      {"toy-wide", 64, 8, 64, "seed:17"},
  };
}

std::shared_ptr<ToyEncoder> make_toy_encoder(const std::string& name) {
  for (const auto& desc : registered_encoders()) {
    if (desc.name != name) continue;
    uint64_t seed = 17;
    if (desc.weight_source.rfind("seed:", 0) == 0) seed = std::stoull(desc.weight_source.substr(5));
    return std::make_shared<ToyEncoder>(seed, desc.input_size, desc.patch_size, desc.dim);
  }
  raise(ErrorCode::EncoderUnavailable,
        "unknown encoder \"" + name + "\" (real backbones are not bundled)");
}

}  // namespace persrep
