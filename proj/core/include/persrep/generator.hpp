#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "persrep/backgrounds.hpp"
#include "persrep/captions.hpp"
#include "persrep/encoder.hpp"
#include "persrep/pool.hpp"

namespace persrep {

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::cut_paste;
  double cfg_scale = 5.0;  // the paper sweeps {4.0, 5.0, 7.5}
  bool use_llm_captions = true;
  int n_positives = 450;
  int n_negatives = 1000;
  uint64_t seed = 0;
  std::pair<double, double> scale_range{0.3, 1.3};

  void validate() const;
};

// Maps an image (typically a masked object crop) to a unit-norm embedding.
class PerceptualEmbedder {
 public:
  virtual ~PerceptualEmbedder() = default;
  virtual Eigen::VectorXf embed(const Image& image) const = 0;
};

// Predicts a foreground mask for a generated image. May throw
// Error(MaskerFailure) for images it cannot handle.
class MaskPredictor {
 public:
  virtual ~MaskPredictor() = default;
  virtual Mask predict(const Image& image) const = 0;
};

// Desk-scale fallback masker: everything is foreground.
class FullMaskPredictor : public MaskPredictor {
 public:
  Mask predict(const Image& image) const override { return Mask(image.height, image.width, 1); }
};

// Perceptual metric backed by an encoder's normalized global feature. The toy
// encoder plugs in at desk scale; DreamSim-class models fit the same seam.
class EncoderPerceptualEmbedder : public PerceptualEmbedder {
 public:
  explicit EncoderPerceptualEmbedder(std::shared_ptr<const Encoder> encoder)
      : encoder_(std::move(encoder)) {}

  Eigen::VectorXf embed(const Image& image) const override {
    Eigen::VectorXf f = global_feature(encoder_->embed(image));
    float norm = f.norm();
    return norm > 0.0f ? Eigen::VectorXf(f / norm) : f;
  }

 private:
  std::shared_ptr<const Encoder> encoder_;
};

// Client seam for generators living outside this process.
class GeneratorClient {
 public:
  struct Request {
    std::string instance_id;
    std::string caption;
    double cfg_scale = 5.0;
    uint64_t seed = 0;
    int n = 1;
  };

  virtual ~GeneratorClient() = default;
  virtual std::vector<Image> generate(const Request& request) = 0;
};

// POSTs {instance_id, caption, cfg_scale, seed, n} as JSON to <endpoint>/generate
// and expects {"images": ["<base64 png>", ...]} back.
class HttpGeneratorClient : public GeneratorClient {
 public:
  HttpGeneratorClient(std::string endpoint, double timeout_s = 30.0, int retries = 2);
  std::vector<Image> generate(const Request& request) override;

  // Reads PERSREP_GEN_ENDPOINT / PERSREP_GEN_TIMEOUT_S / PERSREP_GEN_RETRIES;
  // nullptr when no endpoint is configured.
  static std::unique_ptr<HttpGeneratorClient> from_env();

 private:
  std::string host_;
  int port_ = 80;
  double timeout_s_;
  int retries_;
};

// Tight bbox crop of the mask with out-of-mask pixels zeroed.
Image masked_crop(const Image& pixels, const Mask& mask);

SyntheticPool synthesize_pool(const InstanceDataset& dataset, const std::string& instance_id,
                              const GeneratorConfig& config, const CaptionCorpus& corpus,
                              GeneratorClient* client = nullptr,
                              BackgroundSource* backgrounds = nullptr);

enum class MaskerFailurePolicy { drop, error };

struct FilterOptions {
  double threshold = 0.6;
  MaskerFailurePolicy on_masker_failure = MaskerFailurePolicy::drop;
};

// Keeps exactly the positives whose best masked-crop similarity against the
// reference records reaches the threshold (inclusive); negatives pass through.
SyntheticPool filter_pool(const SyntheticPool& pool, const std::vector<ImageRecord>& refs,
                          const PerceptualEmbedder& metric, const MaskPredictor& masker,
                          double threshold);
SyntheticPool filter_pool(const SyntheticPool& pool, const std::vector<ImageRecord>& refs,
                          const PerceptualEmbedder& metric, const MaskPredictor& masker,
                          const FilterOptions& options);

}  // namespace persrep
