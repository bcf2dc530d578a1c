#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "persrep/captions.hpp"
#include "persrep/image.hpp"

namespace persrep {

struct Background {
  Image pixels;
  std::string caption;  // provenance: corpus background caption or source file
};

class BackgroundSource {
 public:
  virtual ~BackgroundSource() = default;
  virtual std::vector<Background> generate(const CaptionCorpus& corpus, int n) = 0;
};

// Samples image files from a directory without replacement.
class DirectoryBackgrounds : public BackgroundSource {
 public:
  DirectoryBackgrounds(std::filesystem::path dir, uint64_t seed);
  std::vector<Background> generate(const CaptionCorpus& corpus, int n) override;

 private:
  std::filesystem::path dir_;
  uint64_t seed_;
};

// Seeded texture synthesizer (gradient + stripes + value noise); deterministic
// per seed, captions cycled from the corpus backgrounds.
class ProceduralBackgrounds : public BackgroundSource {
 public:
  ProceduralBackgrounds(int height, int width, uint64_t seed);
  std::vector<Background> generate(const CaptionCorpus& corpus, int n) override;

 private:
  int height_;
  int width_;
  uint64_t seed_;
};

// Single procedural texture, used by both the background backend and the toy
// dataset builder.
Image procedural_texture(int height, int width, uint64_t seed);

// Draws a random textured blob (ellipse or rounded box) onto the canvas and
// returns its mask. Desk-scale stand-in for a generic category object.
Mask draw_procedural_blob(Image& canvas, uint64_t seed);

std::vector<Background> generate_backgrounds(const CaptionCorpus& corpus, int n,
                                             BackgroundSource& backend);

}  // namespace persrep
