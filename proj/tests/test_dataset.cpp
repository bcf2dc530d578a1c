#include <doctest.h>

#include <set>

#include <fstream>
#include <random>

#include "persrep/dataset.hpp"
#include "test_helpers.hpp"

using namespace persrep;
using testutil::TempDir;

namespace {

void write_manifest(const std::filesystem::path& root,
                    const std::vector<std::pair<std::string, std::string>>& instances) {
  std::ofstream out(root / "manifest.json");
  out << "{\"instances\":{";
  for (size_t i = 0; i < instances.size(); ++i) {
    if (i) out << ",";
    out << "\"" << instances[i].first << "\":{\"category\":\"" << instances[i].second << "\"}";
  }
  out << "}}";
}

void write_images(const std::filesystem::path& dir, int count, uint64_t seed, int size = 8,
                  const std::string& prefix = "img") {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < count; ++i) {
    save_png(testutil::random_image(size, size, seed + static_cast<uint64_t>(i)),
             dir / (prefix + std::to_string(i) + ".png"));
  }
}

}  // namespace

TEST_CASE("mask_to_bbox point and hull") {
  Mask point(10, 12);
  point.set(4, 7, true);
  CHECK(mask_to_bbox(point) == BBox{4, 7, 4, 7});

  Mask hull(10, 12);
  hull.set(2, 3, true);
  hull.set(5, 7, true);
  CHECK(mask_to_bbox(hull) == BBox{2, 3, 5, 7});
}

TEST_CASE("mask_to_bbox empty mask throws") {
  Mask empty(4, 4);
  CHECK_THROWS_AS(mask_to_bbox(empty), Error);
  try {
    mask_to_bbox(empty);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMask);
  }
}

TEST_CASE("mask_to_bbox matches scan oracle on random masks") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coin(0, 9);
  for (int trial = 0; trial < 100; ++trial) {
    Mask mask(16, 16);
    for (auto& v : mask.data) v = coin(rng) < 3 ? 1 : 0;
    if (mask.empty_mask()) mask.set(coin(rng), coin(rng), true);

    // Scan-all-pixels oracle.
    int rmin = 16, rmax = -1, cmin = 16, cmax = -1;
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) {
        if (!mask.at(r, c)) continue;
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        cmin = std::min(cmin, c);
        cmax = std::max(cmax, c);
      }
    }
    BBox box = mask_to_bbox(mask);
    CHECK(box == BBox{rmin, cmin, rmax, cmax});

    // Tightness: every true pixel inside, each edge touched.
    for (int r = 0; r < 16; ++r) {
      for (int c = 0; c < 16; ++c) {
        if (mask.at(r, c)) {
          CHECK(r >= box.row_min);
          CHECK(r <= box.row_max);
          CHECK(c >= box.col_min);
          CHECK(c <= box.col_max);
        }
      }
    }
  }
}

TEST_CASE("ingest minimal valid layout") {
  TempDir tmp("ingest_min");
  write_manifest(tmp.path, {{"mug0", "mug"}});
  write_images(tmp.path / "mug0" / "train", 3, 100, 8, "tr");
  write_images(tmp.path / "mug0" / "test", 3, 200, 8, "te");

  InstanceDataset dataset = ingest_dataset(tmp.path);
  REQUIRE(dataset.size() == 1);
  const auto& entry = dataset.at("mug0");
  CHECK(entry.category == "mug");
  CHECK(entry.train.size() == 3);
  CHECK(entry.test.size() == 3);
  CHECK(entry.train[0].split == Split::train);
  CHECK(entry.test[0].split == Split::test);
}

TEST_CASE("ingest rejects a stem shared between train and test") {
  TempDir tmp("ingest_dupe");
  write_manifest(tmp.path, {{"mug0", "mug"}});
  write_images(tmp.path / "mug0" / "train", 3, 100, 8, "img");
  write_images(tmp.path / "mug0" / "test", 3, 200, 8, "img");  // same stems
  try {
    ingest_dataset(tmp.path);
    FAIL("expected MalformedAnnotation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedAnnotation);
  }
}

TEST_CASE("ingest rejects wrong train count") {
  TempDir tmp("ingest_2train");
  write_manifest(tmp.path, {{"mug0", "mug"}});
  write_images(tmp.path / "mug0" / "train", 2, 100, 8, "tr");
  write_images(tmp.path / "mug0" / "test", 3, 200, 8, "te");
  try {
    ingest_dataset(tmp.path);
    FAIL("expected MissingTrainImages");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingTrainImages);
  }
}

TEST_CASE("ingest rejects too few test images") {
  TempDir tmp("ingest_test");
  write_manifest(tmp.path, {{"mug0", "mug"}});
  write_images(tmp.path / "mug0" / "train", 3, 100, 8, "tr");
  write_images(tmp.path / "mug0" / "test", 2, 200, 8, "te");
  try {
    ingest_dataset(tmp.path, 3);
    FAIL("expected InsufficientTestImages");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientTestImages);
  }
}

TEST_CASE("ingest rejects mask dims that disagree with the image") {
  TempDir tmp("ingest_mask");
  write_manifest(tmp.path, {{"mug0", "mug"}});
  write_images(tmp.path / "mug0" / "train", 3, 100, 8, "tr");
  write_images(tmp.path / "mug0" / "test", 3, 200, 8, "te");
  std::filesystem::create_directories(tmp.path / "mug0" / "masks");
  save_mask_png(Mask(4, 4, 1), tmp.path / "mug0" / "masks" / "tr0.png");  // images are 8x8
  try {
    ingest_dataset(tmp.path);
    FAIL("expected MaskShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MaskShapeMismatch);
  }
}

TEST_CASE("ingest rejects a bbox that is not the tight mask box") {
  TempDir tmp("ingest_bbox");
  write_manifest(tmp.path, {{"mug0", "mug"}});
  write_images(tmp.path / "mug0" / "train", 3, 100, 8, "tr");
  write_images(tmp.path / "mug0" / "test", 3, 200, 8, "te");
  std::filesystem::create_directories(tmp.path / "mug0" / "masks");
  Mask mask(8, 8);
  mask.set(2, 2, true);
  mask.set(5, 6, true);
  save_mask_png(mask, tmp.path / "mug0" / "masks" / "tr0.png");
  std::ofstream ann(tmp.path / "mug0" / "annotations.json");
  ann << "{\"tr0\": {\"bbox\": [0, 0, 7, 7], \"scene\": \"pose\"}}";
  ann.close();
  try {
    ingest_dataset(tmp.path);
    FAIL("expected MalformedAnnotation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedAnnotation);
  }
}

TEST_CASE("ingest pods-shaped fixture: 100 instances x 3 train = 300") {
  TempDir tmp("ingest_pods");
  std::vector<std::pair<std::string, std::string>> instances;
  for (int i = 0; i < 100; ++i) {
    instances.push_back({"obj" + std::to_string(i), "mug"});
  }
  write_manifest(tmp.path, instances);
  for (int i = 0; i < 100; ++i) {
    write_images(tmp.path / instances[static_cast<size_t>(i)].first / "train", 3,
                 static_cast<uint64_t>(1000 + i), 4, "tr");
    write_images(tmp.path / instances[static_cast<size_t>(i)].first / "test", 3,
                 static_cast<uint64_t>(5000 + i), 4, "te");
  }
  InstanceDataset dataset = ingest_dataset(tmp.path);
  size_t total_train = 0;
  for (const auto& [_, entry] : dataset.instances) total_train += entry.train.size();
  CHECK(total_train == 300);
}

TEST_CASE("ingestion is lossless for pixels") {
  TempDir tmp("lossless");
  write_manifest(tmp.path, {{"mug0", "mug"}});
  Image original = testutil::random_image(16, 16, 42);
  std::filesystem::create_directories(tmp.path / "mug0" / "train");
  save_png(original, tmp.path / "mug0" / "train" / "img0.png");
  write_images(tmp.path / "mug0" / "train", 0, 0);  // ensure dir exists
  save_png(testutil::random_image(16, 16, 43), tmp.path / "mug0" / "train" / "img1.png");
  save_png(testutil::random_image(16, 16, 44), tmp.path / "mug0" / "train" / "img2.png");
  write_images(tmp.path / "mug0" / "test", 3, 45, 16, "te");

  InstanceDataset dataset = ingest_dataset(tmp.path);
  CHECK(dataset.at("mug0").train[0].pixels == original);

  // Re-encoding reproduces identical pixels.
  TempDir tmp2("lossless2");
  save_png(dataset.at("mug0").train[0].pixels, tmp2.path / "roundtrip.png");
  CHECK(load_image(tmp2.path / "roundtrip.png") == original);
}

TEST_CASE("write_dataset then ingest round-trips records") {
  TempDir tmp("roundtrip_ds");
  InstanceDataset dataset;
  InstanceEntry entry;
  entry.category = "mug";
  for (int i = 0; i < 3; ++i) {
    ImageRecord rec;
    rec.id = "mug0/train" + std::to_string(i);
    rec.instance_id = "mug0";
    rec.split = Split::train;
    rec.pixels = testutil::random_image(12, 12, static_cast<uint64_t>(i));
    rec.mask = testutil::rect_mask(12, 12, 2, 3, 7, 9);
    rec.bbox = BBox{2, 3, 7, 9};
    entry.train.push_back(rec);
  }
  for (int i = 0; i < 3; ++i) {
    ImageRecord rec;
    rec.id = "mug0/test" + std::to_string(i);
    rec.instance_id = "mug0";
    rec.split = Split::test;
    rec.pixels = testutil::random_image(12, 12, static_cast<uint64_t>(10 + i));
    rec.scene_tag = SceneTag::pose;
    entry.test.push_back(rec);
  }
  dataset.instances.emplace("mug0", entry);

  write_dataset(dataset, tmp.path);
  InstanceDataset back = ingest_dataset(tmp.path);
  CHECK(back.at("mug0").train[0].pixels == entry.train[0].pixels);
  CHECK(back.at("mug0").train[0].mask == entry.train[0].mask);
  CHECK(back.at("mug0").train[0].bbox == entry.train[0].bbox);
  CHECK(back.at("mug0").test[0].scene_tag == SceneTag::pose);
  CHECK(back.digest() == dataset.digest());
}

namespace {
InstanceDataset synthetic_dataset(int n) {
  InstanceDataset dataset;
  for (int i = 0; i < n; ++i) {
    InstanceEntry entry;
    entry.category = "mug";
    ImageRecord rec;
    rec.id = "inst" + std::to_string(i) + "/t0";
    rec.instance_id = "inst" + std::to_string(i);
    rec.pixels = Image(2, 2);
    entry.train.push_back(rec);
    dataset.instances.emplace("inst" + std::to_string(i), entry);
  }
  return dataset;
}
}  // namespace

TEST_CASE("split_validation partitions class-wise") {
  InstanceDataset dataset = synthetic_dataset(40);
  auto [val, rest] = split_validation(dataset, 30, 0);
  CHECK(val.size() == 30);
  CHECK(rest.size() == 10);

  std::set<std::string> val_ids, rest_ids;
  for (const auto& id : val.instance_ids()) val_ids.insert(id);
  for (const auto& id : rest.instance_ids()) rest_ids.insert(id);
  for (const auto& id : val_ids) CHECK(rest_ids.count(id) == 0);
  CHECK(val_ids.size() + rest_ids.size() == 40);
}

TEST_CASE("split_validation degenerate and deterministic") {
  InstanceDataset dataset = synthetic_dataset(5);
  auto [val, rest] = split_validation(dataset, 0, 9);
  CHECK(val.size() == 0);
  CHECK(rest.size() == 5);

  InstanceDataset big = synthetic_dataset(12);
  auto [a1, b1] = split_validation(big, 7, 123);
  auto [a2, b2] = split_validation(big, 7, 123);
  CHECK(a1.instance_ids() == a2.instance_ids());
  CHECK(b1.instance_ids() == b2.instance_ids());

  auto [a3, b3] = split_validation(big, 7, 124);
  bool same = a1.instance_ids() == a3.instance_ids();
  CHECK_FALSE(same);  // different seed reshuffles (overwhelmingly likely)
}

TEST_CASE("split_validation rejects n_val >= instance count") {
  InstanceDataset dataset = synthetic_dataset(5);
  try {
    split_validation(dataset, 5, 0);
    FAIL("expected TooFewInstances");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewInstances);
  }
}
