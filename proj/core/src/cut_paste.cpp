#include "persrep/cut_paste.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "persrep/rng.hpp"

namespace persrep {

namespace {

struct ForegroundCrop {
  Image pixels;
  Mask mask;
};

ForegroundCrop tight_crop(const ImageRecord& fg) {
  if (!fg.mask || fg.mask->empty_mask()) {
    raise(ErrorCode::EmptyMask, "cut_and_paste requires a non-empty foreground mask: " + fg.id);
  }
  BBox box = mask_to_bbox(*fg.mask);
  return {crop(fg.pixels, box), crop(*fg.mask, box)};
}

}  // namespace

ImageRecord cut_and_paste_at(const ImageRecord& fg, const Image& bg, const PasteParams& params) {
  ForegroundCrop fc = tight_crop(fg);

  int new_h = std::max(1, static_cast<int>(std::lround(fc.pixels.height * params.scale)));
  int new_w = std::max(1, static_cast<int>(std::lround(fc.pixels.width * params.scale)));
  if (new_h > bg.height || new_w > bg.width || params.row < 0 || params.col < 0 ||
      params.row + new_h > bg.height || params.col + new_w > bg.width) {
    raise(ErrorCode::ForegroundTooLarge,
          "scaled crop " + std::to_string(new_h) + "x" + std::to_string(new_w) +
              " does not fit background " + std::to_string(bg.height) + "x" +
              std::to_string(bg.width));
  }

  Image scaled_pixels = resize_bilinear(fc.pixels, new_h, new_w);
  Mask scaled_mask = resize_nearest(fc.mask, new_h, new_w);

  ImageRecord out;
  out.id = fg.id + "#cp";
  out.instance_id = fg.instance_id;
  out.split = fg.split;
  out.pixels = bg;
  Mask out_mask(bg.height, bg.width);
  for (int r = 0; r < new_h; ++r) {
    for (int c = 0; c < new_w; ++c) {
      if (!scaled_mask.at(r, c)) continue;
      out_mask.set(params.row + r, params.col + c, true);
      for (int ch = 0; ch < 3; ++ch) {
        out.pixels.set(params.row + r, params.col + c, ch, scaled_pixels.at(r, c, ch));
      }
    }
  }
  out.mask = std::move(out_mask);
  if (!out.mask->empty_mask()) out.bbox = mask_to_bbox(*out.mask);
  return out;
}

ImageRecord cut_and_paste(const ImageRecord& fg, const Image& bg,
                          std::pair<double, double> scale_range, uint64_t rng_seed,
                          PasteParams* used_params) {
  ForegroundCrop fc = tight_crop(fg);
  auto rng = make_rng(rng_seed);
  std::uniform_real_distribution<double> scale_dist(scale_range.first, scale_range.second);

  // One re-sample retry when the scaled crop overflows the background.
  for (int attempt = 0; attempt < 2; ++attempt) {
    double s = scale_dist(rng);
    int new_h = std::max(1, static_cast<int>(std::lround(fc.pixels.height * s)));
    int new_w = std::max(1, static_cast<int>(std::lround(fc.pixels.width * s)));
    if (new_h > bg.height || new_w > bg.width) continue;

    std::uniform_int_distribution<int> row_dist(0, bg.height - new_h);
    std::uniform_int_distribution<int> col_dist(0, bg.width - new_w);
    PasteParams params{s, row_dist(rng), col_dist(rng)};
    if (used_params) *used_params = params;
    return cut_and_paste_at(fg, bg, params);
  }
  raise(ErrorCode::ForegroundTooLarge, "no in-bounds placement for " + fg.id);
}

}  // namespace persrep
