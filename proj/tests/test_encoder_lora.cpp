#include <doctest.h>

#include <random>

#include "persrep/encoder.hpp"
#include "persrep/lora.hpp"
#include "persrep/rng.hpp"
#include "test_helpers.hpp"

using namespace persrep;

TEST_CASE("toy encoder shape contract on a 64x64 image") {
  ToyEncoder encoder(17, 64, 8, 32);
  EmbeddingBundle bundle = encoder.embed(testutil::random_image(64, 64, 1));
  CHECK(bundle.grid_h == 8);
  CHECK(bundle.grid_w == 8);
  CHECK(bundle.patches.rows() == 64);
  CHECK(bundle.patches.cols() == 32);
  CHECK(bundle.cls.size() == 32);
  CHECK(bundle.patch_size == 8);
  CHECK(bundle.source_dims == std::pair<int, int>{64, 64});
}

TEST_CASE("embedding is deterministic in inference mode") {
  ToyEncoder encoder;
  Image image = testutil::random_image(48, 80, 2);  // non-square input resized internally
  EmbeddingBundle a = encoder.embed(image);
  EmbeddingBundle b = encoder.embed(image);
  CHECK(a.cls == b.cls);
  CHECK(a.patches == b.patches);
  CHECK(a.source_dims == std::pair<int, int>{48, 80});
}

TEST_CASE("constant-color image maps to identical patch vectors") {
  ToyEncoder encoder(21, 64, 8, 16);
  Image image = testutil::solid_image(64, 64, 120, 45, 200);
  EmbeddingBundle bundle = encoder.embed(image);
  for (int p = 1; p < bundle.patches.rows(); ++p) {
    CHECK(Eigen::VectorXf(bundle.patches.row(p)) == Eigen::VectorXf(bundle.patches.row(0)));
  }

  // Direct construction of the documented projection: row-major normal draws
  // scaled by 1/sqrt(patch_dim), applied to the centered patch.
  auto rng = make_rng(21);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const int p_dim = 8 * 8 * 3;
  Eigen::MatrixXf w(16, p_dim);
  const float scale = 1.0f / std::sqrt(static_cast<float>(p_dim));
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < p_dim; ++c) w(r, c) = normal(rng) * scale;
  }
  Eigen::VectorXf patch(p_dim);
  for (int i = 0; i < p_dim; ++i) {
    uint8_t channel_value = (i % 3 == 0) ? 120 : (i % 3 == 1 ? 45 : 200);
    patch[i] = channel_value / 255.0f - 0.5f;
  }
  Eigen::VectorXf expected = w * patch;
  CHECK((Eigen::VectorXf(bundle.patches.row(0)) - expected).norm() < 1e-5f);
}

TEST_CASE("global_feature concatenates cls with the patch mean") {
  EmbeddingBundle bundle;
  bundle.cls.resize(2);
  bundle.cls << 1, 2;
  bundle.patches.resize(3, 2);
  bundle.patches << 3, 4, 3, 4, 3, 4;
  bundle.grid_h = 3;
  bundle.grid_w = 1;
  Eigen::VectorXf f = global_feature(bundle);
  REQUIRE(f.size() == 4);
  CHECK(f[0] == 1);
  CHECK(f[1] == 2);
  CHECK(f[2] == doctest::Approx(3));
  CHECK(f[3] == doctest::Approx(4));

  bundle.patches.resize(2, 2);
  bundle.patches << 0, 0, 2, 2;
  bundle.cls << 5, 5;
  bundle.grid_h = 2;
  f = global_feature(bundle);
  CHECK(f[2] == doctest::Approx(1));
  CHECK(f[3] == doctest::Approx(1));
}

TEST_CASE("global_feature equals the explicit-loop mean oracle") {
  std::mt19937_64 rng(6);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  EmbeddingBundle bundle;
  bundle.grid_h = 4;
  bundle.grid_w = 4;
  bundle.cls = Eigen::VectorXf::NullaryExpr(8, [&] { return normal(rng); });
  bundle.patches = Eigen::MatrixXf::NullaryExpr(16, 8, [&] { return normal(rng); });

  Eigen::VectorXf f = global_feature(bundle);
  for (int d = 0; d < 8; ++d) {
    double sum = 0;
    for (int p = 0; p < 16; ++p) sum += bundle.patches(p, d);
    CHECK(static_cast<double>(f[8 + d]) == doctest::Approx(sum / 16.0).epsilon(1e-6));
    CHECK(f[d] == bundle.cls[d]);
  }
}

TEST_CASE("lora_forward with zero B is the base map exactly") {
  Eigen::MatrixXf w = Eigen::MatrixXf::Random(4, 6);
  LoRAEntry entry;
  entry.rank = 2;
  entry.alpha = 0.5f;
  entry.dropout_p = 0.0f;
  entry.a = Eigen::MatrixXf::Random(2, 6);
  entry.b = Eigen::MatrixXf::Zero(4, 2);
  Eigen::VectorXf x = Eigen::VectorXf::Random(6);
  Eigen::VectorXf out = lora_forward(w, entry, x, false, 0);
  CHECK(out == Eigen::VectorXf(w * x));
}

TEST_CASE("lora_forward hand matrix product") {
  Eigen::MatrixXf w = Eigen::MatrixXf::Identity(2, 2);
  LoRAEntry entry;
  entry.rank = 1;
  entry.alpha = 1.0f;
  entry.dropout_p = 0.0f;
  entry.a.resize(1, 2);
  entry.a << 1, 0;
  entry.b.resize(2, 1);
  entry.b << 2, 0;  // B*A = [[2,0],[0,0]]
  Eigen::VectorXf x(2);
  x << 3, 4;
  Eigen::VectorXf out = lora_forward(w, entry, x, false, 0);
  CHECK(out[0] == doctest::Approx(9));
  CHECK(out[1] == doctest::Approx(4));
}

TEST_CASE("doubling alpha doubles the delta") {
  Eigen::MatrixXf w = Eigen::MatrixXf::Random(3, 3);
  LoRAEntry entry;
  entry.rank = 2;
  entry.alpha = 0.7f;
  entry.dropout_p = 0.0f;
  entry.a = Eigen::MatrixXf::Random(2, 3);
  entry.b = Eigen::MatrixXf::Random(3, 2);
  Eigen::VectorXf x = Eigen::VectorXf::Random(3);

  Eigen::VectorXf base = w * x;
  Eigen::VectorXf d1 = lora_forward(w, entry, x, false, 0) - base;
  entry.alpha *= 2;
  Eigen::VectorXf d2 = lora_forward(w, entry, x, false, 0) - base;
  CHECK((d2 - 2 * d1).norm() < 1e-6f);
}

TEST_CASE("lora_forward validates shapes") {
  Eigen::MatrixXf w = Eigen::MatrixXf::Random(3, 3);
  LoRAEntry entry;
  entry.rank = 2;
  entry.a = Eigen::MatrixXf::Random(2, 4);  // wrong d_in
  entry.b = Eigen::MatrixXf::Zero(3, 2);
  try {
    lora_forward(w, entry, Eigen::VectorXf::Random(3), false, 0);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("adapter spec defaults hold the documented invariants") {
  auto base = std::make_shared<ToyEncoder>();
  AdapterSpec spec;  // r=16, alpha=0.5, dropout=0.3
  auto adapted = attach_adapter(base, spec, 5);

  REQUIRE(adapted->adapter().entries.size() == 2);
  for (const auto& [name, entry] : adapted->adapter().entries) {
    CHECK(entry.rank == 16);
    CHECK(entry.alpha == doctest::Approx(0.5f));
    CHECK(entry.dropout_p == doctest::Approx(0.3f));
    CHECK(entry.b.isZero());
    CHECK(entry.delta().isZero());
    // rank(delta) <= r by construction (B: d_out x r).
    CHECK(entry.b.cols() == 16);
  }
  // patch map: 16*(192+32); cls map: 16*(32+32)
  CHECK(adapted->adapter().trainable_param_count() == 16 * (192 + 32) + 16 * (32 + 32));
}

TEST_CASE("adapted encoder at init embeds exactly like the base") {
  auto base = std::make_shared<ToyEncoder>();
  auto adapted = attach_adapter(base, AdapterSpec{}, 5);
  for (int i = 0; i < 20; ++i) {
    Image image = testutil::random_image(64, 64, static_cast<uint64_t>(i));
    EmbeddingBundle b = base->embed(image);
    EmbeddingBundle a = adapted->embed(image);
    REQUIRE(a.cls == b.cls);
    REQUIRE(a.patches == b.patches);
  }
}

TEST_CASE("attach_adapter rejects unknown maps") {
  auto base = std::make_shared<ToyEncoder>();
  AdapterSpec spec;
  spec.target_maps = {"attention_qkv"};
  try {
    attach_adapter(base, spec, 1);
    FAIL("expected UnknownTargetMap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownTargetMap);
  }
}

TEST_CASE("adapter checkpoint round-trips bit-exactly") {
  testutil::TempDir tmp("ckpt");
  auto base = std::make_shared<ToyEncoder>();
  auto adapted = attach_adapter(base, AdapterSpec{}, 7);
  // Make B nonzero so the file is not trivially zeros.
  adapted->adapter().entries.at(ToyEncoder::kPatchMap).b.setRandom();

  save_adapter(adapted->adapter(), tmp.path / "adapter.bin");
  LoRAAdapter loaded = load_adapter(tmp.path / "adapter.bin");
  REQUIRE(loaded.entries.size() == adapted->adapter().entries.size());
  for (const auto& [name, entry] : adapted->adapter().entries) {
    const LoRAEntry& back = loaded.entries.at(name);
    CHECK(back.rank == entry.rank);
    CHECK(back.alpha == entry.alpha);
    CHECK(back.dropout_p == entry.dropout_p);
    CHECK(back.a == entry.a);
    CHECK(back.b == entry.b);
  }
  CHECK(loaded.digest() == adapted->adapter().digest());
}

TEST_CASE("unknown encoder names are reported as unavailable") {
  try {
    make_toy_encoder("dinov2-b14");
    FAIL("expected EncoderUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EncoderUnavailable);
  }
}
