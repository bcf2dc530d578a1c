#include <doctest.h>

#include <fstream>
#include <random>

#include "persrep/analysis.hpp"
#include "persrep/rng.hpp"
#include "persrep/toy.hpp"
#include "test_helpers.hpp"

using namespace persrep;

namespace {

// Embeds by first-pixel red value into a fixed unit vector table.
class TableEmbedder : public PerceptualEmbedder {
 public:
  explicit TableEmbedder(std::map<uint8_t, Eigen::VectorXf> table) : table_(std::move(table)) {}
  Eigen::VectorXf embed(const Image& image) const override {
    return table_.at(image.at(0, 0, 0));
  }

 private:
  std::map<uint8_t, Eigen::VectorXf> table_;
};

PoolImage pool_image(const std::string& instance, int index, uint8_t key, bool with_mask = true) {
  PoolImage img;
  img.record.id = instance + "/s" + std::to_string(index);
  img.record.instance_id = instance;
  img.record.pixels = testutil::solid_image(8, 8, key, key, key);
  if (with_mask) img.record.mask = Mask(8, 8, 1);
  img.provenance.seed = static_cast<uint64_t>(index);
  return img;
}

ImageRecord ref_record(uint8_t key) {
  ImageRecord rec;
  rec.id = "inst/ref";
  rec.instance_id = "inst";
  rec.pixels = testutil::solid_image(8, 8, key, key, key);
  rec.mask = Mask(8, 8, 1);
  return rec;
}

Eigen::VectorXf unit2(double x, double y) {
  Eigen::VectorXf v(2);
  v << static_cast<float>(x), static_cast<float>(y);
  v.normalize();
  return v;
}

}  // namespace

TEST_CASE("fidelity of a self-identical synthetic image is 1") {
  SyntheticPool pool;
  pool.instance_id = "inst";
  pool.positives.push_back(pool_image("inst", 0, 7));
  TableEmbedder metric({{7, unit2(1, 0)}});
  FidelityResult result = fidelity(pool, {ref_record(7)}, metric);
  REQUIRE(result.per_image.size() == 1);
  CHECK(result.per_image[0] == doctest::Approx(1.0));
  CHECK(result.mean == doctest::Approx(1.0));
}

TEST_CASE("fidelity of an orthogonal embedding is 0") {
  SyntheticPool pool;
  pool.instance_id = "inst";
  pool.positives.push_back(pool_image("inst", 0, 7));
  TableEmbedder metric({{7, unit2(0, 1)}, {9, unit2(1, 0)}});
  FidelityResult result = fidelity(pool, {ref_record(9)}, metric);
  CHECK(result.per_image[0] == doctest::Approx(0.0));
}

TEST_CASE("fidelity needs masked references") {
  SyntheticPool pool;
  pool.instance_id = "inst";
  pool.positives.push_back(pool_image("inst", 0, 7));
  ImageRecord no_mask = ref_record(7);
  no_mask.mask.reset();
  TableEmbedder metric({{7, unit2(1, 0)}});
  try {
    fidelity(pool, {no_mask}, metric);
    FAIL("expected MissingMasks");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingMasks);
  }
}

TEST_CASE("fidelity matches the loop-and-normalize oracle on random pools") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::map<uint8_t, Eigen::VectorXf> table;
  for (uint8_t k = 1; k <= 30; ++k) {
    Eigen::VectorXf v = Eigen::VectorXf::NullaryExpr(6, [&] { return normal(rng); });
    v.normalize();
    table[k] = v;
  }
  TableEmbedder metric(table);

  SyntheticPool pool;
  pool.instance_id = "inst";
  for (int i = 0; i < 12; ++i) pool.positives.push_back(pool_image("inst", i, static_cast<uint8_t>(1 + i)));
  std::vector<ImageRecord> refs = {ref_record(20), ref_record(21), ref_record(22)};

  FidelityResult result = fidelity(pool, refs, metric);

  // Oracle: explicit loops, mean embedding renormalized.
  Eigen::VectorXd mean = (table[20].cast<double>() + table[21].cast<double>() +
                          table[22].cast<double>()) /
                         3.0;
  mean /= mean.norm();
  double sum = 0.0;
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd v = table[static_cast<uint8_t>(1 + i)].cast<double>();
    double expected = v.dot(mean) / (v.norm() * mean.norm());
    CHECK(result.per_image[static_cast<size_t>(i)] == doctest::Approx(expected).epsilon(1e-12));
    sum += expected;
  }
  CHECK(result.mean == doctest::Approx(sum / 12.0).epsilon(1e-12));
}

TEST_CASE("diversity extremes") {
  TableEmbedder metric({{1, unit2(1, 0)}, {2, unit2(0, 1)}});

  SyntheticPool identical;
  identical.instance_id = "inst";
  identical.positives.push_back(pool_image("inst", 0, 1));
  identical.positives.push_back(pool_image("inst", 1, 1));
  CHECK(diversity(identical, metric) == doctest::Approx(0.0));

  SyntheticPool orthogonal;
  orthogonal.instance_id = "inst";
  orthogonal.positives.push_back(pool_image("inst", 0, 1));
  orthogonal.positives.push_back(pool_image("inst", 1, 2));
  CHECK(diversity(orthogonal, metric) == doctest::Approx(1.0));
}

TEST_CASE("diversity rejects pools below two positives") {
  SyntheticPool pool;
  pool.instance_id = "inst";
  pool.positives.push_back(pool_image("inst", 0, 1));
  TableEmbedder metric({{1, unit2(1, 0)}});
  try {
    diversity(pool, metric);
    FAIL("expected PoolTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PoolTooSmall);
  }
}

TEST_CASE("diversity equals the pairwise double loop and is permutation stable") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::map<uint8_t, Eigen::VectorXf> table;
  SyntheticPool pool;
  pool.instance_id = "inst";
  for (int i = 0; i < 20; ++i) {
    uint8_t key = static_cast<uint8_t>(1 + i);
    Eigen::VectorXf v = Eigen::VectorXf::NullaryExpr(5, [&] { return normal(rng); });
    v.normalize();
    table[key] = v;
    pool.positives.push_back(pool_image("inst", i, key));
  }
  TableEmbedder metric(table);

  double got = diversity(pool, metric);
  double sum = 0.0;
  for (int i = 0; i < 20; ++i) {
    for (int j = i + 1; j < 20; ++j) {
      Eigen::VectorXd vi = table[static_cast<uint8_t>(1 + i)].cast<double>();
      Eigen::VectorXd vj = table[static_cast<uint8_t>(1 + j)].cast<double>();
      sum += vi.dot(vj) / (vi.norm() * vj.norm());
    }
  }
  double expected = 1.0 - sum / (20.0 * 19.0 / 2.0);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));

  SyntheticPool permuted = pool;
  std::reverse(permuted.positives.begin(), permuted.positives.end());
  CHECK(diversity(permuted, metric) == doctest::Approx(got).epsilon(1e-12));

  // Appending an exact duplicate never increases diversity.
  SyntheticPool with_dupe = pool;
  PoolImage dupe = pool.positives[0];
  dupe.record.id = "inst/dupe";
  with_dupe.positives.push_back(dupe);
  CHECK(diversity(with_dupe, metric) <= got + 1e-12);
}

TEST_CASE("analyze_pool bundles fidelity, diversity, and the digest") {
  ToyDatasetConfig toy_config;
  toy_config.n_instances = 1;
  InstanceDataset dataset = make_toy_dataset(toy_config);
  GeneratorConfig gen = toy_generator_config(3);
  gen.n_positives = 8;
  gen.n_negatives = 4;
  SyntheticPool pool = synthesize_pool(dataset, "toy0", gen, builtin_corpus("toy"));

  auto encoder = make_toy_encoder("toy");
  EncoderPerceptualEmbedder metric(encoder);
  PoolAnalysis analysis = analyze_pool(pool, dataset.at("toy0").train, metric);

  CHECK(analysis.fidelity_per_image.size() == 8);
  double sum = 0.0;
  for (double v : analysis.fidelity_per_image) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
    sum += v;
  }
  CHECK(analysis.fidelity_mean == doctest::Approx(sum / 8.0).epsilon(1e-12));
  CHECK(analysis.diversity >= 0.0);
  CHECK(analysis.diversity <= 2.0);
  CHECK(analysis.pool_digest == hex_digest(pool.digest()));

  testutil::TempDir tmp("analysis");
  write_analysis_json(analysis, tmp.path / "analysis.json");
  PoolAnalysis back = read_analysis_json(tmp.path / "analysis.json");
  CHECK(back.pool_digest == analysis.pool_digest);
  CHECK(back.fidelity_mean == doctest::Approx(analysis.fidelity_mean));
  CHECK(back.diversity == doctest::Approx(analysis.diversity));

  append_analysis_csv(analysis, tmp.path / "rows.csv");
  append_analysis_csv(analysis, tmp.path / "rows.csv");
  std::ifstream in(tmp.path / "rows.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 3);  // header + two rows
}
