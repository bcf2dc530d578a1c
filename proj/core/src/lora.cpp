#include "persrep/lora.hpp"

#include <cstring>
#include <fstream>
#include <random>

#include "persrep/rng.hpp"

namespace persrep {

long LoRAAdapter::trainable_param_count() const {
  long count = 0;
  for (const auto& [_, entry] : entries) count += entry.a.size() + entry.b.size();
  return count;
}

uint64_t LoRAAdapter::digest() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, entry] : entries) {
    h = fnv1a(name, h);
    auto fold = [&h](const Eigen::MatrixXf& m) {
      h = fnv1a(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(m.data()),
                                         m.size() * sizeof(float)),
                h);
    };
    fold(entry.a);
    fold(entry.b);
    h = fnv1a_u64(static_cast<uint64_t>(entry.rank), h);
  }
  return h;
}

Eigen::MatrixXf dropout_mask(int rows, int cols, float p, uint64_t rng_seed) {
  Eigen::MatrixXf mask(rows, cols);
  if (p <= 0.0f) {
    mask.setOnes();
    return mask;
  }
  auto rng = make_rng(rng_seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  const float keep_scale = 1.0f / (1.0f - p);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) mask(r, c) = unit(rng) < p ? 0.0f : keep_scale;
  }
  return mask;
}

Eigen::VectorXf lora_forward(const Eigen::MatrixXf& base, const LoRAEntry& entry,
                             const Eigen::VectorXf& x, bool training, uint64_t rng_seed) {
  if (base.cols() != x.size() || entry.a.cols() != x.size() || entry.b.rows() != base.rows() ||
      entry.a.rows() != entry.rank || entry.b.cols() != entry.rank) {
    raise(ErrorCode::ShapeMismatch, "lora_forward operand shapes");
  }
  Eigen::VectorXf adapter_in = x;
  if (training && entry.dropout_p > 0.0f) {
    adapter_in = x.cwiseProduct(
        dropout_mask(static_cast<int>(x.size()), 1, entry.dropout_p, rng_seed).col(0));
  }
  const float scale = entry.alpha / static_cast<float>(entry.rank);
  return base * x + scale * (entry.b * (entry.a * adapter_in));
}

AdaptedToyEncoder::AdaptedToyEncoder(std::shared_ptr<const ToyEncoder> base, LoRAAdapter adapter)
    : base_(std::move(base)), adapter_(std::move(adapter)) {}

EmbeddingBundle AdaptedToyEncoder::embed(const Image& image) const {
  Eigen::MatrixXf x = base_->patch_matrix(image);

  EmbeddingBundle bundle;
  bundle.patches = x * base_->weight(ToyEncoder::kPatchMap).transpose();
  if (auto it = adapter_.entries.find(ToyEncoder::kPatchMap); it != adapter_.entries.end()) {
    const auto& e = it->second;
    bundle.patches += (e.alpha / static_cast<float>(e.rank)) * (x * e.a.transpose()) * e.b.transpose();
  }
  Eigen::VectorXf mean_patch = bundle.patches.colwise().mean().transpose();
  bundle.cls = base_->weight(ToyEncoder::kClsMap) * mean_patch;
  if (auto it = adapter_.entries.find(ToyEncoder::kClsMap); it != adapter_.entries.end()) {
    const auto& e = it->second;
    bundle.cls += (e.alpha / static_cast<float>(e.rank)) * (e.b * (e.a * mean_patch));
  }
  const auto& desc = base_->descriptor();
  bundle.patch_size = desc.patch_size;
  int per_side = (desc.input_size + desc.patch_size - 1) / desc.patch_size;
  bundle.grid_h = per_side;
  bundle.grid_w = per_side;
  bundle.source_dims = {image.height, image.width};
  if (!bundle.patches.allFinite() || !bundle.cls.allFinite()) {
    raise(ErrorCode::NonFiniteOutput, "adapted encoder produced non-finite values");
  }
  return bundle;
}

uint64_t AdaptedToyEncoder::weights_digest() const {
  return fnv1a_u64(adapter_.digest(), base_->weights_digest());
}

std::shared_ptr<AdaptedToyEncoder> attach_adapter(std::shared_ptr<const ToyEncoder> encoder,
                                                  const AdapterSpec& spec, uint64_t init_seed) {
  std::vector<std::string> targets = spec.target_maps;
  if (targets.empty()) targets = encoder->linear_map_names();

  LoRAAdapter adapter;
  for (const auto& name : targets) {
    const Eigen::MatrixXf& w = encoder->weight(name);  // throws UnknownTargetMap

    LoRAEntry entry;
    entry.rank = spec.rank;
    entry.alpha = spec.alpha;
    entry.dropout_p = spec.dropout_p;
    auto rng = make_rng(derive_seed(init_seed, fnv1a(name)));
    std::normal_distribution<float> normal(0.0f, 1.0f);
    const float a_scale = 1.0f / std::sqrt(static_cast<float>(w.cols()));
    entry.a.resize(spec.rank, w.cols());
    for (int r = 0; r < entry.a.rows(); ++r) {
      for (int c = 0; c < entry.a.cols(); ++c) entry.a(r, c) = normal(rng) * a_scale;
    }
    entry.b = Eigen::MatrixXf::Zero(w.rows(), spec.rank);
    adapter.entries.emplace(name, std::move(entry));
  }
  return std::make_shared<AdaptedToyEncoder>(std::move(encoder), std::move(adapter));
}

namespace {

constexpr char kMagic[8] = {'P', 'R', 'L', 'O', 'R', 'A', '1', '\0'};

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) raise(ErrorCode::IoError, "truncated adapter checkpoint");
  return value;
}

void write_matrix(std::ofstream& out, const Eigen::MatrixXf& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) write_pod(out, m(r, c));
  }
}

Eigen::MatrixXf read_matrix(std::ifstream& in, int rows, int cols) {
  Eigen::MatrixXf m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = read_pod<float>(in);
  }
  return m;
}

}  // namespace

void save_adapter(const LoRAAdapter& adapter, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<uint32_t>(out, static_cast<uint32_t>(adapter.entries.size()));
  for (const auto& [name, entry] : adapter.entries) {
    write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(entry.rank));
    write_pod<float>(out, entry.alpha);
    write_pod<float>(out, entry.dropout_p);
    write_pod<uint32_t>(out, static_cast<uint32_t>(entry.a.cols()));
    write_pod<uint32_t>(out, static_cast<uint32_t>(entry.b.rows()));
    write_matrix(out, entry.a);
    write_matrix(out, entry.b);
  }
}

LoRAAdapter load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    raise(ErrorCode::IoError, path.string() + " is not an adapter checkpoint");
  }
  LoRAAdapter adapter;
  uint32_t count = read_pod<uint32_t>(in);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = read_pod<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    LoRAEntry entry;
    entry.rank = static_cast<int>(read_pod<uint32_t>(in));
    entry.alpha = read_pod<float>(in);
    entry.dropout_p = read_pod<float>(in);
    int d_in = static_cast<int>(read_pod<uint32_t>(in));
    int d_out = static_cast<int>(read_pod<uint32_t>(in));
    entry.a = read_matrix(in, entry.rank, d_in);
    entry.b = read_matrix(in, d_out, entry.rank);
    adapter.entries.emplace(std::move(name), std::move(entry));
  }
  return adapter;
}

}  // namespace persrep
