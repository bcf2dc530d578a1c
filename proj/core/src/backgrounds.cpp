#include "persrep/backgrounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "persrep/errors.hpp"
#include "persrep/rng.hpp"

namespace fs = std::filesystem;

namespace persrep {

DirectoryBackgrounds::DirectoryBackgrounds(fs::path dir, uint64_t seed)
    : dir_(std::move(dir)), seed_(seed) {}

std::vector<Background> DirectoryBackgrounds::generate(const CaptionCorpus&, int n) {
  if (!fs::is_directory(dir_)) {
    raise(ErrorCode::BackendUnavailable, "background directory missing: " + dir_.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (static_cast<int>(files.size()) < n) {
    raise(ErrorCode::InsufficientSourceImages,
          dir_.string() + " holds " + std::to_string(files.size()) + " images, need " +
              std::to_string(n));
  }
  auto rng = make_rng(seed_);
  std::shuffle(files.begin(), files.end(), rng);

  std::vector<Background> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back({load_image(files[static_cast<size_t>(i)]), files[static_cast<size_t>(i)].filename().string()});
  }
  return out;
}

Image procedural_texture(int height, int width, uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Two-color gradient at a random angle.
  double c0[3], c1[3];
  for (int ch = 0; ch < 3; ++ch) {
    c0[ch] = 40 + 175 * unit(rng);
    c1[ch] = 40 + 175 * unit(rng);
  }
  double angle = 2 * std::numbers::pi * unit(rng);
  double gx = std::cos(angle), gy = std::sin(angle);

  // Sinusoidal stripes.
  double strength = 10 + 30 * unit(rng);
  double freq = 0.05 + 0.4 * unit(rng);
  double phase = 2 * std::numbers::pi * unit(rng);
  double sx = std::cos(2 * std::numbers::pi * unit(rng));
  double sy = std::sin(2 * std::numbers::pi * unit(rng));

  // Value-noise lattice, bilinearly interpolated.
  constexpr int kLattice = 9;
  double lattice[kLattice][kLattice];
  for (auto& row : lattice) {
    for (double& v : row) v = unit(rng) * 2.0 - 1.0;
  }
  double noise_strength = 8 + 22 * unit(rng);

  Image out(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double u = width > 1 ? static_cast<double>(c) / (width - 1) : 0.0;
      double v = height > 1 ? static_cast<double>(r) / (height - 1) : 0.0;
      double t = std::clamp(0.5 + 0.5 * (gx * (u - 0.5) + gy * (v - 0.5)) * 2.0, 0.0, 1.0);
      double stripe = strength * std::sin(2 * std::numbers::pi * freq * (sx * c + sy * r) + phase);

      double lx = u * (kLattice - 1), ly = v * (kLattice - 1);
      int ix = std::min(static_cast<int>(lx), kLattice - 2);
      int iy = std::min(static_cast<int>(ly), kLattice - 2);
      double fx = lx - ix, fy = ly - iy;
      double n00 = lattice[iy][ix], n01 = lattice[iy][ix + 1];
      double n10 = lattice[iy + 1][ix], n11 = lattice[iy + 1][ix + 1];
      double noise = (n00 * (1 - fx) + n01 * fx) * (1 - fy) + (n10 * (1 - fx) + n11 * fx) * fy;

      for (int ch = 0; ch < 3; ++ch) {
        double value = c0[ch] * (1 - t) + c1[ch] * t + stripe + noise_strength * noise;
        out.set(r, c, ch, static_cast<uint8_t>(std::clamp(value, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Mask draw_procedural_blob(Image& canvas, uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int h = canvas.height, w = canvas.width;
  double cy = h * (0.3 + 0.4 * unit(rng));
  double cx = w * (0.3 + 0.4 * unit(rng));
  double ry = h * (0.12 + 0.18 * unit(rng));
  double rx = w * (0.12 + 0.18 * unit(rng));
  bool boxy = unit(rng) < 0.4;
  double angle = 2 * std::numbers::pi * unit(rng);
  double ca = std::cos(angle), sa = std::sin(angle);

  double base[3], accent[3];
  for (int ch = 0; ch < 3; ++ch) {
    base[ch] = 30 + 200 * unit(rng);
    accent[ch] = 30 + 200 * unit(rng);
  }
  double freq = 0.8 + 2.5 * unit(rng);

  Mask mask(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double dy = (r - cy), dx = (c - cx);
      double u = (ca * dx + sa * dy) / rx;
      double v = (-sa * dx + ca * dy) / ry;
      bool inside = boxy ? (std::abs(u) < 1.0 && std::abs(v) < 1.0 && u * u + v * v < 1.8)
                         : (u * u + v * v < 1.0);
      if (!inside) continue;
      mask.set(r, c, true);
      double stripe = 0.5 + 0.5 * std::sin(freq * std::numbers::pi * (u + v));
      for (int ch = 0; ch < 3; ++ch) {
        double value = base[ch] * (1 - stripe) + accent[ch] * stripe;
        canvas.set(r, c, ch, static_cast<uint8_t>(std::clamp(value, 0.0, 255.0)));
      }
    }
  }
  return mask;
}

ProceduralBackgrounds::ProceduralBackgrounds(int height, int width, uint64_t seed)
    : height_(height), width_(width), seed_(seed) {}

std::vector<Background> ProceduralBackgrounds::generate(const CaptionCorpus& corpus, int n) {
  std::vector<std::string> captions;
  for (const auto& entry : corpus.entries) captions.push_back(corpus.background_for(entry));
  std::vector<Background> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Background bg;
    bg.pixels = procedural_texture(height_, width_, derive_seed(seed_, static_cast<uint64_t>(i)));
    bg.caption = captions.empty() ? std::string("procedural texture #") + std::to_string(i)
                                  : captions[static_cast<size_t>(i) % captions.size()];
    out.push_back(std::move(bg));
  }
  return out;
}

std::vector<Background> generate_backgrounds(const CaptionCorpus& corpus, int n,
                                             BackgroundSource& backend) {
  return backend.generate(corpus, n);
}

}  // namespace persrep
