#pragma once

#include <cstdint>
#include <utility>

#include "persrep/dataset.hpp"

namespace persrep {

struct PasteParams {
  double scale = 1.0;
  int row = 0;  // top-left corner of the pasted crop in background coords
  int col = 0;
};

// Deterministic compositor: tight-crops the foreground under its mask, scales
// by `params.scale` (bilinear pixels, nearest mask), pastes at the given
// offset. Pixels outside the output mask equal the background exactly.
ImageRecord cut_and_paste_at(const ImageRecord& fg, const Image& bg, const PasteParams& params);

// Samples scale uniformly from scale_range and an in-bounds position uniformly
// at random; one scale re-sample on overflow, then ForegroundTooLarge.
ImageRecord cut_and_paste(const ImageRecord& fg, const Image& bg,
                          std::pair<double, double> scale_range, uint64_t rng_seed,
                          PasteParams* used_params = nullptr);

}  // namespace persrep
