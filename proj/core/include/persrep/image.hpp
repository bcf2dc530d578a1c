#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "persrep/errors.hpp"

namespace persrep {

// Inclusive integer box, row-major corners.
struct BBox {
  int row_min = 0;
  int col_min = 0;
  int row_max = 0;
  int col_max = 0;

  int height() const { return row_max - row_min + 1; }
  int width() const { return col_max - col_min + 1; }
  long area() const { return static_cast<long>(height()) * width(); }

  bool operator==(const BBox&) const = default;
};

// H×W boolean grid stored as 0/1 bytes.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;  // row-major, size height*width

  Mask() = default;
  Mask(int h, int w, uint8_t fill = 0) : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

  uint8_t at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
  void set(int r, int c, bool v) { data[static_cast<size_t>(r) * width + c] = v ? 1 : 0; }
  long popcount() const;
  bool empty_mask() const { return popcount() == 0; }

  bool operator==(const Mask&) const = default;
};

// 8-bit RGB image, row-major interleaved.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> rgb;  // size height*width*3

  Image() = default;
  Image(int h, int w) : height(h), width(w), rgb(static_cast<size_t>(h) * w * 3, 0) {}

  uint8_t at(int r, int c, int ch) const { return rgb[(static_cast<size_t>(r) * width + c) * 3 + ch]; }
  void set(int r, int c, int ch, uint8_t v) { rgb[(static_cast<size_t>(r) * width + c) * 3 + ch] = v; }
  bool empty_image() const { return height == 0 || width == 0; }

  bool operator==(const Image&) const = default;
};

uint64_t pixel_digest(const Image& image);

// Tight inclusive box around the true pixels; EmptyMask when none.
BBox mask_to_bbox(const Mask& mask);

// --- codecs (PNG and JPEG; internal form is always 8-bit RGB) ---
Image load_image(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);
Image decode_image(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_png(const Image& image);

// Mask files are 8-bit grayscale PNGs, nonzero = foreground.
Mask load_mask(const std::filesystem::path& path);
void save_mask_png(const Mask& mask, const std::filesystem::path& path);

// --- geometry ---
Image resize_bilinear(const Image& image, int out_h, int out_w);
Mask resize_nearest(const Mask& mask, int out_h, int out_w);
Image crop(const Image& image, const BBox& box);
Mask crop(const Mask& mask, const BBox& box);

// Rotation about the image center, positive angle counterclockwise, output
// same dims, out-of-frame pixels filled with 0.
Image rotate(const Image& image, double degrees);
Mask rotate(const Mask& mask, double degrees);

Image hflip(const Image& image);
Mask hflip(const Mask& mask);

}  // namespace persrep
