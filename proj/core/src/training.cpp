#include "persrep/training.hpp"

#include <cmath>
#include <random>

#include "persrep/rng.hpp"

namespace persrep {

namespace {
constexpr uint64_t kPairStream = 0x9a17;
constexpr uint64_t kAugmentStream = 0xa096;
constexpr uint64_t kDropoutStream = 0xd909;
constexpr uint64_t kHeadStream = 0x4ead;
}  // namespace

void TrainConfig::validate() const {
  if (tau <= 0.0) raise(ErrorCode::NonPositiveTemperature, "tau=" + std::to_string(tau));
  if (n_pairs < 1) raise(ErrorCode::ConfigError, "n_pairs must be >= 1");
  if (n_neg_per_anchor < 1) raise(ErrorCode::ConfigError, "n_neg_per_anchor must be >= 1");
  if (epochs < 1 || batch_size < 1) raise(ErrorCode::ConfigError, "epochs/batch_size must be >= 1");
  if (learning_rate < 0.0) raise(ErrorCode::ConfigError, "learning_rate must be >= 0");
}

std::vector<TrainingPair> sample_pairs(const std::vector<ImageRecord>& d_r,
                                       const SyntheticPool& pool, const TrainConfig& config,
                                       uint64_t rng_seed) {
  config.validate();
  if (d_r.empty()) raise(ErrorCode::EmptyPool, "no real anchor images");
  if (pool.positives.empty()) raise(ErrorCode::EmptyPool, "pool has no positives");
  if (static_cast<int>(pool.negatives.size()) < config.n_neg_per_anchor) {
    raise(ErrorCode::InsufficientNegatives,
          std::to_string(pool.negatives.size()) + " negatives, need " +
              std::to_string(config.n_neg_per_anchor) + " per anchor");
  }

  std::vector<TrainingPair> pairs(static_cast<size_t>(config.n_pairs));
  const int n_pos = static_cast<int>(pool.positives.size());
  const int n_neg = static_cast<int>(pool.negatives.size());
  for (int i = 0; i < config.n_pairs; ++i) {
    auto rng = make_rng(derive_seed(rng_seed, kPairStream, static_cast<uint64_t>(i)));
    TrainingPair pair;
    pair.anchor_index = i % static_cast<int>(d_r.size());
    pair.positive_index = std::uniform_int_distribution<int>(0, n_pos - 1)(rng);

    // Partial Fisher-Yates: first k slots become the without-replacement draw.
    std::vector<int> indices(static_cast<size_t>(n_neg));
    for (int j = 0; j < n_neg; ++j) indices[static_cast<size_t>(j)] = j;
    for (int j = 0; j < config.n_neg_per_anchor; ++j) {
      int swap_with = std::uniform_int_distribution<int>(j, n_neg - 1)(rng);
      std::swap(indices[static_cast<size_t>(j)], indices[static_cast<size_t>(swap_with)]);
    }
    pair.negative_indices.assign(indices.begin(), indices.begin() + config.n_neg_per_anchor);
    pairs[static_cast<size_t>(i)] = std::move(pair);
  }
  return pairs;
}

AugmentParams sample_augment_params(uint64_t seed) {
  auto rng = make_rng(seed);
  AugmentParams p;
  p.rotation_deg = std::uniform_real_distribution<double>(-30.0, 30.0)(rng);
  p.flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.5;
  p.area_scale = std::uniform_real_distribution<double>(0.6, 1.0)(rng);
  p.row_frac = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  p.col_frac = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return p;
}

ImageRecord augment_with(const ImageRecord& record, const AugmentParams& params) {
  ImageRecord out = record;
  out.pixels = rotate(out.pixels, params.rotation_deg);
  if (out.mask) out.mask = rotate(*out.mask, params.rotation_deg);
  if (params.flip) {
    out.pixels = hflip(out.pixels);
    if (out.mask) out.mask = hflip(*out.mask);
  }

  const int h = out.pixels.height, w = out.pixels.width;
  const double side = std::sqrt(params.area_scale);
  const int crop_h = std::max(1, static_cast<int>(std::lround(h * side)));
  const int crop_w = std::max(1, static_cast<int>(std::lround(w * side)));
  const int row0 = static_cast<int>(std::lround(params.row_frac * (h - crop_h)));
  const int col0 = static_cast<int>(std::lround(params.col_frac * (w - crop_w)));
  if (crop_h != h || crop_w != w) {
    BBox box{row0, col0, row0 + crop_h - 1, col0 + crop_w - 1};
    out.pixels = resize_bilinear(crop(out.pixels, box), h, w);
    if (out.mask) out.mask = resize_nearest(crop(*out.mask, box), h, w);
  }

  out.bbox = std::nullopt;
  if (out.mask && !out.mask->empty_mask()) out.bbox = mask_to_bbox(*out.mask);
  return out;
}

ImageRecord augment(const ImageRecord& record, uint64_t rng_seed) {
  if (record.pixels.empty_image()) return record;
  return augment_with(record, sample_augment_params(rng_seed));
}

namespace {

// Adam moments per adapter matrix.
struct AdamState {
  Eigen::MatrixXf m;
  Eigen::MatrixXf v;
};

struct AdamOptimizer {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;

  void step_begin() { ++t; }

  void update(Eigen::MatrixXf& theta, const Eigen::MatrixXf& grad, AdamState& state) const {
    if (state.m.size() == 0) {
      state.m = Eigen::MatrixXf::Zero(theta.rows(), theta.cols());
      state.v = Eigen::MatrixXf::Zero(theta.rows(), theta.cols());
    }
    state.m = static_cast<float>(beta1) * state.m + static_cast<float>(1.0 - beta1) * grad;
    state.v = static_cast<float>(beta2) * state.v +
              static_cast<float>(1.0 - beta2) * grad.cwiseProduct(grad).eval();
    const float bc1 = static_cast<float>(1.0 - std::pow(beta1, static_cast<double>(t)));
    const float bc2 = static_cast<float>(1.0 - std::pow(beta2, static_cast<double>(t)));
    Eigen::MatrixXf m_hat = state.m / bc1;
    Eigen::MatrixXf v_hat = state.v / bc2;
    theta -= (static_cast<float>(lr) * m_hat.array() /
              (v_hat.array().sqrt() + static_cast<float>(eps)))
                 .matrix();
  }
};

struct MapGrads {
  Eigen::MatrixXf d_a;
  Eigen::MatrixXf d_b;
};

// One training batch through the adapted toy encoder, with cached
// intermediates for the manual backward pass.
struct BatchContext {
  Eigen::MatrixXf x;       // (B*N) x P patch inputs
  Eigen::MatrixXf x_drop;  // adapter input after inverted dropout
  Eigen::MatrixXf xa;      // x_drop * Ap^T
  Eigen::MatrixXf patch_mask;
  Eigen::MatrixXf m;       // B x D mean patch embeddings
  Eigen::MatrixXf m_drop;
  Eigen::MatrixXf ma;      // m_drop * Ac^T
  Eigen::MatrixXf cls_mask;
  Eigen::MatrixXf features;  // B x 2D
  int n_patches = 0;
  bool patch_adapted = false;
  bool cls_adapted = false;
};

BatchContext batch_forward(const AdaptedToyEncoder& encoder, const std::vector<Image>& images,
                           uint64_t dropout_seed) {
  const ToyEncoder& base = encoder.base();
  const int n = base.grid_cells();
  const int p = base.patch_input_dim();
  const int d = base.descriptor().dim;
  const int b = static_cast<int>(images.size());

  BatchContext ctx;
  ctx.n_patches = n;
  ctx.x.resize(b * n, p);
  for (int i = 0; i < b; ++i) {
    ctx.x.middleRows(i * n, n) = base.patch_matrix(images[static_cast<size_t>(i)]);
  }

  const auto& entries = encoder.adapter().entries;
  auto patch_it = entries.find(ToyEncoder::kPatchMap);
  auto cls_it = entries.find(ToyEncoder::kClsMap);
  ctx.patch_adapted = patch_it != entries.end();
  ctx.cls_adapted = cls_it != entries.end();

  Eigen::MatrixXf e = ctx.x * base.weight(ToyEncoder::kPatchMap).transpose();
  if (ctx.patch_adapted) {
    const LoRAEntry& pe = patch_it->second;
    ctx.patch_mask = dropout_mask(b * n, p, pe.dropout_p, derive_seed(dropout_seed, 0x1));
    ctx.x_drop = ctx.x.cwiseProduct(ctx.patch_mask);
    ctx.xa = ctx.x_drop * pe.a.transpose();
    e += (pe.alpha / static_cast<float>(pe.rank)) * ctx.xa * pe.b.transpose();
  }

  ctx.m.resize(b, d);
  for (int i = 0; i < b; ++i) ctx.m.row(i) = e.middleRows(i * n, n).colwise().mean();

  Eigen::MatrixXf cls = ctx.m * base.weight(ToyEncoder::kClsMap).transpose();
  if (ctx.cls_adapted) {
    const LoRAEntry& ce = cls_it->second;
    ctx.cls_mask = dropout_mask(b, d, ce.dropout_p, derive_seed(dropout_seed, 0x2));
    ctx.m_drop = ctx.m.cwiseProduct(ctx.cls_mask);
    ctx.ma = ctx.m_drop * ce.a.transpose();
    cls += (ce.alpha / static_cast<float>(ce.rank)) * ctx.ma * ce.b.transpose();
  }

  ctx.features.resize(b, 2 * d);
  ctx.features.leftCols(d) = cls;
  ctx.features.rightCols(d) = ctx.m;
  return ctx;
}

void batch_backward(const AdaptedToyEncoder& encoder, const BatchContext& ctx,
                    const Eigen::MatrixXf& d_features, std::map<std::string, MapGrads>& grads) {
  const ToyEncoder& base = encoder.base();
  const int d = base.descriptor().dim;
  const int b = static_cast<int>(ctx.features.rows());
  const int n = ctx.n_patches;
  const auto& entries = encoder.adapter().entries;

  Eigen::MatrixXf d_cls = d_features.leftCols(d);
  Eigen::MatrixXf d_m = d_features.rightCols(d);

  // cls map: cls = m Wc^T + (a/r) (m_drop Ac^T) Bc^T
  d_m += d_cls * base.weight(ToyEncoder::kClsMap);
  if (ctx.cls_adapted) {
    const LoRAEntry& ce = entries.at(ToyEncoder::kClsMap);
    const float scale = ce.alpha / static_cast<float>(ce.rank);
    MapGrads& g = grads[ToyEncoder::kClsMap];
    g.d_b = scale * d_cls.transpose() * ctx.ma;
    g.d_a = scale * (d_cls * ce.b).transpose() * ctx.m_drop;
    d_m += scale * ((d_cls * ce.b) * ce.a).cwiseProduct(ctx.cls_mask);
  }

  // Mean pooling spreads each image's d_m evenly over its patch rows.
  Eigen::MatrixXf d_e(b * n, d);
  for (int i = 0; i < b; ++i) {
    d_e.middleRows(i * n, n) = (d_m.row(i) / static_cast<float>(n)).replicate(n, 1);
  }

  if (ctx.patch_adapted) {
    const LoRAEntry& pe = entries.at(ToyEncoder::kPatchMap);
    const float scale = pe.alpha / static_cast<float>(pe.rank);
    MapGrads& g = grads[ToyEncoder::kPatchMap];
    g.d_b = scale * d_e.transpose() * ctx.xa;
    g.d_a = scale * (d_e * pe.b).transpose() * ctx.x_drop;
  }
}

}  // namespace

TrainResult train_personalized(AdaptedToyEncoder& encoder, const std::vector<ImageRecord>& d_r,
                               const SyntheticPool& pool, const TrainConfig& config) {
  config.validate();
  if (encoder.adapter().entries.empty()) {
    raise(ErrorCode::UnknownTargetMap, "no adapter attached to the encoder");
  }
  std::vector<TrainingPair> pairs = sample_pairs(d_r, pool, config, config.seed);

  TrainResult result;
  if (config.loss_kind == LossKind::cross_entropy) {
    auto rng = make_rng(derive_seed(config.seed, kHeadStream));
    std::normal_distribution<double> normal(0.0, 0.1);
    const int feature_dim = 2 * encoder.base().descriptor().dim;
    result.head.w = FeatureVec::NullaryExpr(feature_dim, [&] { return normal(rng); });
    result.head.bias = 0.0;
  }

  AdamOptimizer adam{config.learning_rate};
  std::map<std::string, AdamState> adam_a, adam_b;
  AdamState adam_head_w, adam_head_b;
  Eigen::MatrixXf head_w_mat, head_b_mat;
  if (config.loss_kind == LossKind::cross_entropy) {
    head_w_mat = result.head.w.cast<float>().transpose();  // 1 x 2D
    head_b_mat = Eigen::MatrixXf::Constant(1, 1, static_cast<float>(result.head.bias));
  }

  const long total_presentations = static_cast<long>(config.epochs) * config.n_pairs;
  const int images_per_pair = 2 + config.n_neg_per_anchor;
  const LossParams loss_params = config.loss_params();

  long cursor = 0;
  int step = 0;
  while (cursor < total_presentations) {
    const int batch_pairs =
        static_cast<int>(std::min<long>(config.batch_size, total_presentations - cursor));

    // Materialize the batch; augmentation parameters are keyed by pair index,
    // so every epoch sees identical inputs.
    std::vector<Image> images;
    images.reserve(static_cast<size_t>(batch_pairs) * images_per_pair);
    for (int j = 0; j < batch_pairs; ++j) {
      const auto& pair = pairs[static_cast<size_t>((cursor + j) % config.n_pairs)];
      auto push = [&](const ImageRecord& rec, uint64_t slot) {
        uint64_t seed = derive_seed(config.seed, kAugmentStream,
                                    static_cast<uint64_t>((cursor + j) % config.n_pairs) * 64 + slot);
        images.push_back(config.augment_enabled ? augment(rec, seed).pixels : rec.pixels);
      };
      push(d_r[static_cast<size_t>(pair.anchor_index)], 0);
      push(pool.positives[static_cast<size_t>(pair.positive_index)].record, 1);
      for (int k = 0; k < config.n_neg_per_anchor; ++k) {
        push(pool.negatives[static_cast<size_t>(pair.negative_indices[static_cast<size_t>(k)])].record,
             static_cast<uint64_t>(2 + k));
      }
    }

    BatchContext ctx = batch_forward(encoder, images,
                                     derive_seed(config.seed, kDropoutStream,
                                                 static_cast<uint64_t>(step)));

    // Per-pair losses over the features, averaged across the batch.
    const int feature_dim = static_cast<int>(ctx.features.cols());
    Eigen::MatrixXf d_features = Eigen::MatrixXf::Zero(ctx.features.rows(), feature_dim);
    FeatureVec d_head_w = FeatureVec::Zero(config.loss_kind == LossKind::cross_entropy
                                               ? result.head.w.size()
                                               : 0);
    double d_head_bias = 0.0;
    double batch_loss = 0.0;
    const double inv_batch = 1.0 / batch_pairs;

    for (int j = 0; j < batch_pairs; ++j) {
      const int base_row = j * images_per_pair;
      FeatureVec anchor = ctx.features.row(base_row).cast<double>();
      std::vector<FeatureVec> positives{ctx.features.row(base_row + 1).cast<double>()};
      std::vector<FeatureVec> negatives;
      negatives.reserve(static_cast<size_t>(config.n_neg_per_anchor));
      for (int k = 0; k < config.n_neg_per_anchor; ++k) {
        negatives.push_back(ctx.features.row(base_row + 2 + k).cast<double>());
      }

      LossGradients g = alt_loss_grad(config.loss_kind, anchor, positives, negatives, loss_params,
                                      config.loss_kind == LossKind::cross_entropy ? &result.head
                                                                                  : nullptr);
      batch_loss += g.value * inv_batch;
      d_features.row(base_row) += (inv_batch * g.d_anchor).cast<float>();
      d_features.row(base_row + 1) += (inv_batch * g.d_positives[0]).cast<float>();
      for (int k = 0; k < config.n_neg_per_anchor; ++k) {
        d_features.row(base_row + 2 + k) +=
            (inv_batch * g.d_negatives[static_cast<size_t>(k)]).cast<float>();
      }
      if (config.loss_kind == LossKind::cross_entropy) {
        d_head_w += inv_batch * g.d_head_w;
        d_head_bias += inv_batch * g.d_head_bias;
      }
    }

    if (!std::isfinite(batch_loss)) {
      raise(ErrorCode::NonFiniteLoss, "aborting at step " + std::to_string(step) + " after " +
                                          std::to_string(result.loss_trace.size()) +
                                          " recorded steps");
    }

    std::map<std::string, MapGrads> grads;
    batch_backward(encoder, ctx, d_features, grads);

    adam.step_begin();
    for (auto& [name, g] : grads) {
      LoRAEntry& entry = encoder.adapter().entries.at(name);
      adam.update(entry.a, g.d_a, adam_a[name]);
      adam.update(entry.b, g.d_b, adam_b[name]);
    }
    if (config.loss_kind == LossKind::cross_entropy) {
      Eigen::MatrixXf gw = d_head_w.cast<float>().transpose();
      adam.update(head_w_mat, gw, adam_head_w);
      Eigen::MatrixXf gb = Eigen::MatrixXf::Constant(1, 1, static_cast<float>(d_head_bias));
      adam.update(head_b_mat, gb, adam_head_b);
      result.head.w = head_w_mat.transpose().cast<double>();
      result.head.bias = static_cast<double>(head_b_mat(0, 0));
    }

    result.loss_trace.push_back(batch_loss);
    ++step;
    cursor += batch_pairs;
  }

  result.steps = step;
  return result;
}

}  // namespace persrep
