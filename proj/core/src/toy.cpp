#include "persrep/toy.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "persrep/backgrounds.hpp"
#include "persrep/rng.hpp"

namespace persrep {

namespace {

struct ObjectStyle {
  double base[3];
  double accent[3];
  double stripe_freq;
  double stripe_angle;
  double aspect;      // rx / ry
  double shape_p;     // superellipse exponent
};

struct ObjectPose {
  double cy;
  double cx;
  double radius;    // mean radius in pixels
  double rotation;  // radians
};

ObjectStyle instance_style(uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ObjectStyle style;
  for (int ch = 0; ch < 3; ++ch) style.base[ch] = 30 + 200 * unit(rng);
  for (int ch = 0; ch < 3; ++ch) style.accent[ch] = 30 + 200 * unit(rng);
  style.stripe_freq = 1.5 + 4.0 * unit(rng);
  style.stripe_angle = std::numbers::pi * unit(rng);
  style.aspect = 0.6 + 0.8 * unit(rng);
  style.shape_p = 1.2 + 2.3 * unit(rng);
  return style;
}

Mask render_object(Image& canvas, const ObjectStyle& style, const ObjectPose& pose) {
  const int h = canvas.height, w = canvas.width;
  const double ry = pose.radius / std::sqrt(style.aspect);
  const double rx = pose.radius * std::sqrt(style.aspect);
  const double ca = std::cos(pose.rotation), sa = std::sin(pose.rotation);
  const double sca = std::cos(style.stripe_angle), ssa = std::sin(style.stripe_angle);

  Mask mask(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double dy = r - pose.cy, dx = c - pose.cx;
      double u = (ca * dx + sa * dy) / rx;
      double v = (-sa * dx + ca * dy) / ry;
      if (std::pow(std::abs(u), style.shape_p) + std::pow(std::abs(v), style.shape_p) >= 1.0) {
        continue;
      }
      mask.set(r, c, true);
      double stripe = 0.5 + 0.5 * std::sin(style.stripe_freq * std::numbers::pi * (sca * u + ssa * v));
      for (int ch = 0; ch < 3; ++ch) {
        double value = style.base[ch] * (1 - stripe) + style.accent[ch] * stripe;
        canvas.set(r, c, ch, static_cast<uint8_t>(std::clamp(value, 0.0, 255.0)));
      }
    }
  }
  return mask;
}

}  // namespace

InstanceDataset make_toy_dataset(const ToyDatasetConfig& config) {
  InstanceDataset dataset;
  const int size = config.image_size;

  for (int inst = 0; inst < config.n_instances; ++inst) {
    const std::string instance_id = "toy" + std::to_string(inst);
    ObjectStyle style = instance_style(derive_seed(config.seed, 0x0b7, static_cast<uint64_t>(inst)));
    InstanceEntry entry;
    entry.category = config.category;

    auto make_record = [&](Split split, int index, uint64_t scene_seed, bool train_background,
                           bool vary_pose, bool distractors,
                           std::optional<SceneTag> tag) {
      auto rng = make_rng(scene_seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);

      // Train scenes share one low-variation background family; OOD scenes
      // draw from the full texture space.
      uint64_t bg_seed = train_background
                             ? derive_seed(config.seed, 0x7a, static_cast<uint64_t>(index % 3))
                             : derive_seed(scene_seed, 0xb9);
      Image canvas = procedural_texture(size, size, bg_seed);

      if (distractors) {
        int count = 2 + static_cast<int>(unit(rng) * 2);
        for (int k = 0; k < count; ++k) {
          draw_procedural_blob(canvas, derive_seed(scene_seed, 0xd1, static_cast<uint64_t>(k)));
        }
      }

      ObjectPose pose;
      pose.radius = size * (vary_pose ? 0.16 + 0.10 * unit(rng) : 0.20 + 0.03 * unit(rng));
      pose.cy = size * (0.35 + 0.3 * unit(rng));
      pose.cx = size * (0.35 + 0.3 * unit(rng));
      pose.rotation = vary_pose ? (unit(rng) * 2.0 - 1.0) * 1.2 : (unit(rng) * 2.0 - 1.0) * 0.1;

      ImageRecord rec;
      rec.pixels = canvas;
      Mask mask = render_object(rec.pixels, style, pose);
      rec.mask = std::move(mask);
      rec.instance_id = instance_id;
      rec.split = split;
      rec.scene_tag = tag;
      rec.id = instance_id + "/" + (split == Split::train ? "train" : "test") + std::to_string(index);
      if (!rec.mask->empty_mask()) rec.bbox = mask_to_bbox(*rec.mask);
      return rec;
    };

    for (int i = 0; i < config.n_train; ++i) {
      entry.train.push_back(make_record(
          Split::train, i, derive_seed(config.seed, 0x77a1 + static_cast<uint64_t>(inst), static_cast<uint64_t>(i)),
          true, false, false, std::nullopt));
    }
    for (int i = 0; i < config.n_test; ++i) {
      SceneTag tag = i < 2 ? SceneTag::id : (i < 4 ? SceneTag::pose
                                                   : (i == 4 ? SceneTag::distractors : SceneTag::both));
      bool train_bg = tag == SceneTag::id;
      bool vary_pose = tag == SceneTag::pose || tag == SceneTag::both;
      bool with_distractors = tag == SceneTag::distractors || tag == SceneTag::both;
      entry.test.push_back(make_record(
          Split::test, i, derive_seed(config.seed, 0x7e57 + static_cast<uint64_t>(inst), static_cast<uint64_t>(i)),
          train_bg, vary_pose, with_distractors, tag));
    }
    dataset.instances.emplace(instance_id, std::move(entry));
  }
  return dataset;
}

GeneratorConfig toy_generator_config(uint64_t seed) {
  GeneratorConfig config;
  config.kind = GeneratorKind::cut_paste;
  config.n_positives = 96;
  config.n_negatives = 200;
  config.seed = seed;
  return config;
}

TrainConfig toy_train_config(uint64_t seed) {
  TrainConfig config;
  config.n_pairs = 960;
  config.epochs = 2;
  config.batch_size = 16;
  config.n_neg_per_anchor = 8;
  config.seed = seed;
  return config;
}

}  // namespace persrep
