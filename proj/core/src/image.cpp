#include "persrep/image.hpp"

#include <algorithm>
#include <numeric>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "persrep/rng.hpp"

namespace persrep {

namespace {

cv::Mat to_mat(const Image& image) {
  cv::Mat m(image.height, image.width, CV_8UC3);
  for (int r = 0; r < image.height; ++r) {
    auto* row = m.ptr<uint8_t>(r);
    const uint8_t* src = image.rgb.data() + static_cast<size_t>(r) * image.width * 3;
    std::copy(src, src + static_cast<size_t>(image.width) * 3, row);
  }
  return m;
}

Image from_mat(const cv::Mat& m) {
  Image out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<uint8_t>(r);
    std::copy(row, row + static_cast<size_t>(m.cols) * 3,
              out.rgb.data() + static_cast<size_t>(r) * m.cols * 3);
  }
  return out;
}

cv::Mat to_mat(const Mask& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int r = 0; r < mask.height; ++r) {
    std::copy(mask.data.begin() + static_cast<size_t>(r) * mask.width,
              mask.data.begin() + static_cast<size_t>(r + 1) * mask.width, m.ptr<uint8_t>(r));
  }
  return m;
}

Mask mask_from_mat(const cv::Mat& m) {
  Mask out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<uint8_t>(r);
    for (int c = 0; c < m.cols; ++c) out.data[static_cast<size_t>(r) * m.cols + c] = row[c] ? 1 : 0;
  }
  return out;
}

}  // namespace

long Mask::popcount() const {
  return std::accumulate(data.begin(), data.end(), 0L,
                         [](long acc, uint8_t v) { return acc + (v ? 1 : 0); });
}

BBox mask_to_bbox(const Mask& mask) {
  int rmin = mask.height, rmax = -1, cmin = mask.width, cmax = -1;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
    }
  }
  if (rmax < 0) raise(ErrorCode::EmptyMask, "mask has no foreground pixels");
  return BBox{rmin, cmin, rmax, cmax};
}

uint64_t pixel_digest(const Image& image) {
  uint64_t h = fnv1a_u64(static_cast<uint64_t>(image.height), 0xcbf29ce484222325ULL);
  h = fnv1a_u64(static_cast<uint64_t>(image.width), h);
  return fnv1a(std::span<const uint8_t>(image.rgb.data(), image.rgb.size()), h);
}

Image load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) raise(ErrorCode::IoError, "cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_mat(rgb);
}

void save_png(const Image& image, const std::filesystem::path& path) {
  cv::Mat bgr;
  cv::cvtColor(to_mat(image), bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) {
    raise(ErrorCode::IoError, "cannot write " + path.string());
  }
}

Image decode_image(const std::vector<uint8_t>& bytes) {
  cv::Mat bgr = cv::imdecode(cv::Mat(1, static_cast<int>(bytes.size()), CV_8UC1,
                                     const_cast<uint8_t*>(bytes.data())),
                             cv::IMREAD_COLOR);
  if (bgr.empty()) raise(ErrorCode::IoError, "cannot decode image bytes");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_mat(rgb);
}

std::vector<uint8_t> encode_png(const Image& image) {
  cv::Mat bgr;
  cv::cvtColor(to_mat(image), bgr, cv::COLOR_RGB2BGR);
  std::vector<uint8_t> bytes;
  if (!cv::imencode(".png", bgr, bytes)) raise(ErrorCode::IoError, "cannot encode PNG");
  return bytes;
}

Mask load_mask(const std::filesystem::path& path) {
  cv::Mat gray = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (gray.empty()) raise(ErrorCode::IoError, "cannot decode mask " + path.string());
  return mask_from_mat(gray);
}

void save_mask_png(const Mask& mask, const std::filesystem::path& path) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) m.at<uint8_t>(r, c) = mask.at(r, c) ? 255 : 0;
  }
  if (!cv::imwrite(path.string(), m)) {
    raise(ErrorCode::IoError, "cannot write " + path.string());
  }
}

Image resize_bilinear(const Image& image, int out_h, int out_w) {
  if (out_h == image.height && out_w == image.width) return image;
  cv::Mat dst;
  cv::resize(to_mat(image), dst, cv::Size(out_w, out_h), 0, 0, cv::INTER_LINEAR);
  return from_mat(dst);
}

Mask resize_nearest(const Mask& mask, int out_h, int out_w) {
  if (out_h == mask.height && out_w == mask.width) return mask;
  cv::Mat dst;
  cv::resize(to_mat(mask), dst, cv::Size(out_w, out_h), 0, 0, cv::INTER_NEAREST);
  return mask_from_mat(dst);
}

Image crop(const Image& image, const BBox& box) {
  Image out(box.height(), box.width());
  for (int r = 0; r < out.height; ++r) {
    const uint8_t* src = image.rgb.data() +
                         ((static_cast<size_t>(box.row_min + r) * image.width) + box.col_min) * 3;
    std::copy(src, src + static_cast<size_t>(out.width) * 3,
              out.rgb.data() + static_cast<size_t>(r) * out.width * 3);
  }
  return out;
}

Mask crop(const Mask& mask, const BBox& box) {
  Mask out(box.height(), box.width());
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      out.data[static_cast<size_t>(r) * out.width + c] = mask.at(box.row_min + r, box.col_min + c);
    }
  }
  return out;
}

Image rotate(const Image& image, double degrees) {
  if (degrees == 0.0) return image;
  cv::Point2f center(static_cast<float>(image.width) / 2.0f - 0.5f,
                     static_cast<float>(image.height) / 2.0f - 0.5f);
  cv::Mat rot = cv::getRotationMatrix2D(center, degrees, 1.0);
  cv::Mat dst;
  cv::warpAffine(to_mat(image), dst, rot, cv::Size(image.width, image.height), cv::INTER_LINEAR,
                 cv::BORDER_CONSTANT, cv::Scalar(0, 0, 0));
  return from_mat(dst);
}

Mask rotate(const Mask& mask, double degrees) {
  if (degrees == 0.0) return mask;
  cv::Point2f center(static_cast<float>(mask.width) / 2.0f - 0.5f,
                     static_cast<float>(mask.height) / 2.0f - 0.5f);
  cv::Mat rot = cv::getRotationMatrix2D(center, degrees, 1.0);
  cv::Mat dst;
  cv::warpAffine(to_mat(mask), dst, rot, cv::Size(mask.width, mask.height), cv::INTER_NEAREST,
                 cv::BORDER_CONSTANT, cv::Scalar(0));
  return mask_from_mat(dst);
}

Image hflip(const Image& image) {
  Image out(image.height, image.width);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) out.set(r, c, ch, image.at(r, image.width - 1 - c, ch));
    }
  }
  return out;
}

Mask hflip(const Mask& mask) {
  Mask out(mask.height, mask.width);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) out.set(r, c, mask.at(r, mask.width - 1 - c));
  }
  return out;
}

}  // namespace persrep
