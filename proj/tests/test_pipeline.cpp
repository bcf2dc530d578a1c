#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "persrep/pipeline.hpp"
#include "persrep/rng.hpp"
#include "test_helpers.hpp"

using namespace persrep;
using testutil::TempDir;

namespace {

PipelineConfig smoke_config(const std::filesystem::path& out, uint64_t seed = 0) {
  PipelineConfig config;
  config.toy_dataset = true;
  config.toy_seed = 0;
  config.encoder_name = "toy";
  config.corpus_name = "toy";
  config.generator = toy_generator_config(seed);
  config.generator.n_positives = 12;
  config.generator.n_negatives = 24;
  config.train = toy_train_config(seed);
  config.train.n_pairs = 64;
  config.train.epochs = 1;
  config.train.n_neg_per_anchor = 4;
  config.output_dir = out;
  config.max_workers = 2;
  return config;
}

int count_lines(const std::filesystem::path& file) {
  std::ifstream in(file);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("config json round-trip preserves every field") {
  PipelineConfig config = smoke_config("/tmp/x");
  config.filter_enabled = true;
  config.filter.threshold = 0.55;
  config.n_real = 2;
  SweepGrids grids;
  grids.cfg_scale = {4.0, 5.0, 7.5};
  grids.loss_kind = {LossKind::infonce, LossKind::hinge};
  config.sweep = grids;
  config.background_dir.reset();

  PipelineConfig back = pipeline_config_from_json(pipeline_config_to_json(config));
  CHECK(back.toy_dataset == config.toy_dataset);
  CHECK(back.encoder_name == config.encoder_name);
  CHECK(back.generator.n_positives == config.generator.n_positives);
  CHECK(back.generator.cfg_scale == config.generator.cfg_scale);
  CHECK(back.train.n_pairs == config.train.n_pairs);
  CHECK(back.train.loss_kind == config.train.loss_kind);
  CHECK(back.filter_enabled);
  CHECK(back.filter.threshold == doctest::Approx(0.55));
  CHECK(back.n_real == config.n_real);
  REQUIRE(back.sweep.has_value());
  CHECK(back.sweep->cfg_scale == grids.cfg_scale);
  CHECK(back.sweep->loss_kind == grids.loss_kind);
}

TEST_CASE("toy profile run completes every stage and reports both encoders") {
  TempDir tmp("run_smoke");
  PipelineConfig config = smoke_config(tmp.path / "run");
  RunOutcome outcome = run_pipeline(config);

  CHECK(outcome.failed_instances.empty());
  CHECK(std::filesystem::exists(tmp.path / "run" / "manifest.json"));
  CHECK(std::filesystem::exists(tmp.path / "run" / "eval_base.json"));
  CHECK(std::filesystem::exists(tmp.path / "run" / "eval_personalized.json"));
  CHECK(std::filesystem::exists(tmp.path / "run" / "analysis.csv"));

  for (int i = 0; i < 8; ++i) {
    auto inst = tmp.path / "run" / "instances" / ("toy" + std::to_string(i));
    CHECK(std::filesystem::exists(inst / "pool" / "provenance.json"));
    CHECK(std::filesystem::exists(inst / "adapter.bin"));
    CHECK(std::filesystem::exists(inst / "loss_trace.csv"));
    CHECK(std::filesystem::exists(inst / "eval.json"));
    CHECK(std::filesystem::exists(inst / "analysis.json"));
    CHECK(std::filesystem::exists(inst / "stage_train.done"));
  }

  REQUIRE(outcome.base_report.aggregate.pr_auc.has_value());
  REQUIRE(outcome.personalized_report.aggregate.pr_auc.has_value());
  CHECK(outcome.base_report.per_instance.size() == 8);
  CHECK(outcome.personalized_report.per_instance.size() == 8);
}

TEST_CASE("rerunning a completed run re-executes no stage") {
  TempDir tmp("run_resume");
  PipelineConfig config = smoke_config(tmp.path / "run");
  run_pipeline(config);

  auto sentinel = tmp.path / "run" / "instances" / "toy0" / "stage_train.done";
  auto adapter = tmp.path / "run" / "instances" / "toy0" / "adapter.bin";
  auto t0 = std::filesystem::last_write_time(sentinel);
  auto a0 = std::filesystem::last_write_time(adapter);

  RunOutcome second = run_pipeline(config);
  CHECK(second.failed_instances.empty());
  CHECK(std::filesystem::last_write_time(sentinel) == t0);
  CHECK(std::filesystem::last_write_time(adapter) == a0);
}

TEST_CASE("identical config and seed reproduce the report digests") {
  TempDir tmp("run_det");
  PipelineConfig a = smoke_config(tmp.path / "a", 5);
  PipelineConfig b = smoke_config(tmp.path / "b", 5);
  run_pipeline(a);
  run_pipeline(b);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  std::string ja = slurp(tmp.path / "a" / "eval_personalized.json");
  std::string jb = slurp(tmp.path / "b" / "eval_personalized.json");
  CHECK(fnv1a(ja) == fnv1a(jb));
  CHECK(slurp(tmp.path / "a" / "eval_base.json") == slurp(tmp.path / "b" / "eval_base.json"));
}

TEST_CASE("report compares runs and rejects mismatched datasets") {
  TempDir tmp("report");
  PipelineConfig a = smoke_config(tmp.path / "a", 1);
  run_pipeline(a);

  ReportOutcome report = report_runs({tmp.path / "a"}, tmp.path / "out");
  CHECK(std::filesystem::exists(report.comparison_csv));
  CHECK(std::filesystem::exists(report.scatter_csv));
  CHECK(!report.scaling_csv.has_value());
  REQUIRE(report.per_run.size() == 1);
  CHECK(!report.per_run[0].second.empty());
  CHECK(count_lines(report.scatter_csv) == 9);  // header + 8 instances

  // Re-running the report yields byte-identical CSVs.
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  std::string first = slurp(report.comparison_csv);
  ReportOutcome again = report_runs({tmp.path / "a"}, tmp.path / "out2");
  CHECK(slurp(again.comparison_csv) == first);

  // A run over a different dataset digest is rejected.
  PipelineConfig other = smoke_config(tmp.path / "c", 1);
  other.toy_seed = 99;
  run_pipeline(other);
  try {
    report_runs({tmp.path / "a", tmp.path / "c"}, tmp.path / "out3");
    FAIL("expected IncompatibleRuns");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IncompatibleRuns);
  }
}

TEST_CASE("report emits the scaling curve when runs vary the real-image budget") {
  TempDir tmp("scaling");
  PipelineConfig a = smoke_config(tmp.path / "a", 2);
  a.n_real = 2;
  run_pipeline(a);
  PipelineConfig b = smoke_config(tmp.path / "b", 2);
  b.n_real = 3;
  run_pipeline(b);

  ReportOutcome report = report_runs({tmp.path / "a", tmp.path / "b"}, tmp.path / "out");
  REQUIRE(report.scaling_csv.has_value());
  CHECK(count_lines(*report.scaling_csv) == 3);  // header + 2 runs
}

TEST_CASE("sweep expands the cfg grid into child runs") {
  TempDir tmp("sweep");
  PipelineConfig config = smoke_config(tmp.path / "sweep");
  config.generator.n_positives = 8;
  config.generator.n_negatives = 16;
  config.train.n_pairs = 32;
  SweepGrids grids;
  grids.cfg_scale = {4.0, 5.0, 7.5};
  config.sweep = grids;

  std::vector<std::filesystem::path> children = sweep_pipeline(config);
  REQUIRE(children.size() == 3);
  std::set<double> seen;
  for (const auto& child : children) {
    CHECK(std::filesystem::exists(child / "eval_personalized.json"));
    std::ifstream in(child / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    PipelineConfig parsed = pipeline_config_from_json(
        nlohmann::json::parse(text)["config"].dump());
    seen.insert(parsed.generator.cfg_scale);
  }
  CHECK(seen == std::set<double>{4.0, 5.0, 7.5});
  CHECK(std::filesystem::exists(tmp.path / "sweep" / "sweep_manifest.json"));
}

TEST_CASE("validate rejects broken configs") {
  PipelineConfig config;
  config.output_dir = "/tmp/persrep_cfg_out";
  config.dataset_root = "/nonexistent/persrep/dataset";
  try {
    config.validate();
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}
