#include "persrep/generator.hpp"

#include <cstdlib>
#include <mutex>
#include <iostream>
#include <random>

#include <httplib.h>
#include <json.hpp>

#include "persrep/base64.hpp"
#include "persrep/cut_paste.hpp"
#include "persrep/parallel.hpp"
#include "persrep/rng.hpp"

using json = nlohmann::json;

namespace persrep {

namespace {
constexpr uint64_t kPositiveStream = 0x505;
constexpr uint64_t kNegativeStream = 0x4e4;
constexpr uint64_t kBackgroundStream = 0xba5e;
}  // namespace

void GeneratorConfig::validate() const {
  if (cfg_scale <= 0) raise(ErrorCode::ConfigError, "cfg_scale must be positive");
  if (n_positives < 0 || n_negatives < 0) raise(ErrorCode::ConfigError, "pool sizes must be >= 0");
  if (scale_range.first <= 0 || scale_range.second < scale_range.first) {
    raise(ErrorCode::ConfigError, "invalid scale_range");
  }
}

HttpGeneratorClient::HttpGeneratorClient(std::string endpoint, double timeout_s, int retries)
    : timeout_s_(timeout_s), retries_(retries) {
  std::string rest = endpoint;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  auto colon = rest.find(':');
  if (colon == std::string::npos) {
    host_ = rest;
    port_ = 80;
  } else {
    host_ = rest.substr(0, colon);
    port_ = std::stoi(rest.substr(colon + 1));
  }
}

std::unique_ptr<HttpGeneratorClient> HttpGeneratorClient::from_env() {
  const char* endpoint = std::getenv("PERSREP_GEN_ENDPOINT");
  if (!endpoint || !*endpoint) return nullptr;
  double timeout_s = 30.0;
  if (const char* t = std::getenv("PERSREP_GEN_TIMEOUT_S")) timeout_s = std::atof(t);
  int retries = 2;
  if (const char* r = std::getenv("PERSREP_GEN_RETRIES")) retries = std::atoi(r);
  return std::make_unique<HttpGeneratorClient>(endpoint, timeout_s, retries);
}

std::vector<Image> HttpGeneratorClient::generate(const Request& request) {
  json body;
  body["instance_id"] = request.instance_id;
  body["caption"] = request.caption;
  body["cfg_scale"] = request.cfg_scale;
  body["seed"] = request.seed;
  body["n"] = request.n;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(timeout_s_ * 1000)));
    auto res = client.Post("/generate", payload, "application/json");
    if (!res) {
      last_error = "no response from " + host_ + ":" + std::to_string(port_);
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      json doc = json::parse(res->body);
      std::vector<Image> images;
      for (const auto& b64 : doc.at("images")) {
        images.push_back(decode_image(base64_decode(b64.get<std::string>())));
      }
      if (static_cast<int>(images.size()) != request.n) {
        raise(ErrorCode::ExternalGeneratorError,
              "generator returned " + std::to_string(images.size()) + " images, requested " +
                  std::to_string(request.n));
      }
      return images;
    } catch (const json::exception& e) {
      last_error = std::string("malformed response: ") + e.what();
    }
  }
  raise(ErrorCode::ExternalGeneratorError, last_error);
}

Image masked_crop(const Image& pixels, const Mask& mask) {
  BBox box = mask_to_bbox(mask);
  Image out = crop(pixels, box);
  Mask mcrop = crop(mask, box);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      if (mcrop.at(r, c)) continue;
      for (int ch = 0; ch < 3; ++ch) out.set(r, c, ch, 0);
    }
  }
  return out;
}

namespace {

std::string plain_caption(const std::string& category) {
  return "a photo of a " + std::string(kIdentifierToken) + " " + category;
}

std::string sample_caption(const CaptionCorpus& corpus, const std::string& category, bool use_llm,
                           uint64_t seed) {
  if (!use_llm || corpus.entries.empty()) return plain_caption(category);
  auto rng = make_rng(seed);
  std::uniform_int_distribution<size_t> pick(0, corpus.entries.size() - 1);
  return corpus.entries[pick(rng)].template_text;
}

std::vector<PoolImage> client_side(GeneratorClient& client, const std::string& instance_id,
                                   const std::string& record_instance,
                                   const GeneratorConfig& config, const CaptionCorpus& corpus,
                                   const std::string& category, int count, uint64_t stream,
                                   bool negatives) {
  std::vector<PoolImage> out(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    uint64_t seed = derive_seed(config.seed, stream, static_cast<uint64_t>(i));
    GeneratorClient::Request request;
    request.instance_id = instance_id;
    request.caption = negatives ? "a photo of " + category
                                : sample_caption(corpus, category, config.use_llm_captions,
                                                 derive_seed(seed, 0xca9));
    request.cfg_scale = config.cfg_scale;
    request.seed = seed;
    request.n = 1;
    std::vector<Image> images = client.generate(request);

    PoolImage img;
    img.record.pixels = std::move(images[0]);
    img.record.id = record_instance + "/synth_" + (negatives ? std::string("neg_") : "pos_") +
                    std::to_string(i);
    img.record.instance_id = record_instance;
    img.record.split = Split::train;
    img.provenance = {config.kind, config.cfg_scale, request.caption, seed, std::nullopt};
    out[static_cast<size_t>(i)] = std::move(img);
  }
  return out;
}

}  // namespace

SyntheticPool synthesize_pool(const InstanceDataset& dataset, const std::string& instance_id,
                              const GeneratorConfig& config, const CaptionCorpus& corpus,
                              GeneratorClient* client, BackgroundSource* backgrounds) {
  config.validate();
  const InstanceEntry& entry = dataset.at(instance_id);  // throws UnknownInstance

  SyntheticPool pool;
  pool.instance_id = instance_id;

  switch (config.kind) {
    case GeneratorKind::cut_paste: {
      for (const auto& rec : entry.train) {
        if (!rec.mask || rec.mask->empty_mask()) {
          raise(ErrorCode::MissingMasks, "cut_paste needs masks on train images: " + rec.id);
        }
      }
      const int bg_h = entry.train[0].pixels.height;
      const int bg_w = entry.train[0].pixels.width;
      ProceduralBackgrounds default_bg(bg_h, bg_w, derive_seed(config.seed, kBackgroundStream));
      BackgroundSource& bg_source = backgrounds ? *backgrounds : default_bg;
      std::vector<Background> bgs = bg_source.generate(corpus, config.n_positives);

      pool.positives.resize(static_cast<size_t>(config.n_positives));
      parallel_for(static_cast<size_t>(config.n_positives), [&](size_t i) {
        uint64_t seed = derive_seed(config.seed, kPositiveStream, i);
        auto rng = make_rng(derive_seed(seed, 0xf9));
        std::uniform_int_distribution<size_t> pick_fg(0, entry.train.size() - 1);
        const ImageRecord& fg = entry.train[pick_fg(rng)];

        PoolImage img;
        img.record = cut_and_paste(fg, bgs[i].pixels, config.scale_range, seed);
        img.record.id = instance_id + "/synth_pos_" + std::to_string(i);
        img.record.instance_id = instance_id;
        img.provenance = {GeneratorKind::cut_paste, std::nullopt, bgs[i].caption, seed, std::nullopt};
        pool.positives[i] = std::move(img);
      });

      pool.negatives.resize(static_cast<size_t>(config.n_negatives));
      parallel_for(static_cast<size_t>(config.n_negatives), [&](size_t i) {
        uint64_t seed = derive_seed(config.seed, kNegativeStream, i);
        PoolImage img;
        Image canvas = procedural_texture(bg_h, bg_w, derive_seed(seed, 0x1));
        draw_procedural_blob(canvas, derive_seed(seed, 0x2));
        img.record.pixels = std::move(canvas);
        img.record.id = std::string(kNegativeInstanceId) + "/synth_neg_" + std::to_string(i);
        img.record.instance_id = kNegativeInstanceId;
        img.record.split = Split::train;
        img.provenance = {GeneratorKind::cut_paste, std::nullopt, "a photo of " + entry.category,
                          seed, std::nullopt};
        pool.negatives[i] = std::move(img);
      });
      break;
    }
    case GeneratorKind::real_only: {
      pool.positives.resize(static_cast<size_t>(config.n_positives));
      for (int i = 0; i < config.n_positives; ++i) {
        const ImageRecord& src = entry.train[static_cast<size_t>(i) % entry.train.size()];
        PoolImage img;
        img.record = src;
        img.record.id = instance_id + "/real_pos_" + std::to_string(i);
        img.provenance = {GeneratorKind::real_only, std::nullopt, std::nullopt,
                          derive_seed(config.seed, kPositiveStream, static_cast<uint64_t>(i)),
                          std::nullopt};
        pool.positives[static_cast<size_t>(i)] = std::move(img);
      }
      pool.negatives.resize(static_cast<size_t>(config.n_negatives));
      parallel_for(static_cast<size_t>(config.n_negatives), [&](size_t i) {
        uint64_t seed = derive_seed(config.seed, kNegativeStream, i);
        PoolImage img;
        Image canvas = procedural_texture(entry.train[0].pixels.height,
                                          entry.train[0].pixels.width, derive_seed(seed, 0x1));
        draw_procedural_blob(canvas, derive_seed(seed, 0x2));
        img.record.pixels = std::move(canvas);
        img.record.id = std::string(kNegativeInstanceId) + "/synth_neg_" + std::to_string(i);
        img.record.instance_id = kNegativeInstanceId;
        img.record.split = Split::train;
        img.provenance = {GeneratorKind::real_only, std::nullopt, "a photo of " + entry.category,
                          seed, std::nullopt};
        pool.negatives[i] = std::move(img);
      });
      break;
    }
    case GeneratorKind::dreambooth_like:
    case GeneratorKind::external: {
      if (!client) {
        raise(ErrorCode::ExternalGeneratorError,
              std::string(to_string(config.kind)) + " pools need a registered generator client");
      }
      pool.positives = client_side(*client, instance_id, instance_id, config, corpus,
                                   entry.category, config.n_positives, kPositiveStream, false);
      pool.negatives = client_side(*client, instance_id, kNegativeInstanceId, config, corpus,
                                   entry.category, config.n_negatives, kNegativeStream, true);
      break;
    }
  }
  return pool;
}

SyntheticPool filter_pool(const SyntheticPool& pool, const std::vector<ImageRecord>& refs,
                          const PerceptualEmbedder& metric, const MaskPredictor& masker,
                          double threshold) {
  FilterOptions options;
  options.threshold = threshold;
  return filter_pool(pool, refs, metric, masker, options);
}

SyntheticPool filter_pool(const SyntheticPool& pool, const std::vector<ImageRecord>& refs,
                          const PerceptualEmbedder& metric, const MaskPredictor& masker,
                          const FilterOptions& options) {
  if (refs.empty()) raise(ErrorCode::MissingMasks, "filter_pool needs reference records");
  std::vector<Eigen::VectorXf> ref_embeddings;
  for (const auto& ref : refs) {
    if (!ref.mask || ref.mask->empty_mask()) {
      raise(ErrorCode::MissingMasks, "filter reference lacks a mask: " + ref.id);
    }
    ref_embeddings.push_back(metric.embed(masked_crop(ref.pixels, *ref.mask)));
  }

  struct Scored {
    bool ok = false;
    double score = 0.0;
  };
  std::vector<Scored> scored(pool.positives.size());
  std::exception_ptr masker_error;
  std::mutex error_mutex;

  parallel_for(pool.positives.size(), [&](size_t i) {
    const PoolImage& img = pool.positives[i];
    Mask mask;
    try {
      mask = img.record.mask ? *img.record.mask : masker.predict(img.record.pixels);
      if (mask.empty_mask()) {
        raise(ErrorCode::MaskerFailure, "empty predicted mask for " + img.record.id);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MaskerFailure) throw;
      if (options.on_masker_failure == MaskerFailurePolicy::error) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!masker_error) masker_error = std::current_exception();
        return;
      }
      std::cerr << "filter_pool: dropping " << img.record.id << " (" << e.what() << ")\n";
      return;
    }
    Eigen::VectorXf embedding = metric.embed(masked_crop(img.record.pixels, mask));
    double best = -1.0;
    for (const auto& ref : ref_embeddings) best = std::max(best, cosine(embedding, ref));
    scored[i] = {true, best};
  });
  if (masker_error) std::rethrow_exception(masker_error);

  SyntheticPool out;
  out.instance_id = pool.instance_id;
  for (size_t i = 0; i < pool.positives.size(); ++i) {
    if (!scored[i].ok || scored[i].score < options.threshold) continue;
    PoolImage kept = pool.positives[i];
    kept.provenance.filter_score = scored[i].score;
    out.positives.push_back(std::move(kept));
  }
  out.negatives = pool.negatives;
  return out;
}

}  // namespace persrep
