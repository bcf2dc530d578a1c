#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "persrep/analysis.hpp"
#include "persrep/evaluation.hpp"
#include "persrep/generator.hpp"
#include "persrep/toy.hpp"
#include "persrep/training.hpp"

namespace persrep {

struct SweepGrids {
  std::vector<double> cfg_scale;
  std::vector<bool> use_llm_captions;
  std::vector<LossKind> loss_kind;
  std::vector<int> n_positives;
  std::vector<int> n_pairs;

  bool empty() const {
    return cfg_scale.empty() && use_llm_captions.empty() && loss_kind.empty() &&
           n_positives.empty() && n_pairs.empty();
  }
};

struct PipelineConfig {
  std::filesystem::path dataset_root;  // ignored when toy_dataset is set
  bool toy_dataset = false;
  uint64_t toy_seed = 0;
  std::string encoder_name = "toy";
  std::string corpus_name = "toy";
  GeneratorConfig generator;
  TrainConfig train;
  std::set<EvalTask> eval_tasks{EvalTask::classification, EvalTask::retrieval,
                                EvalTask::detection, EvalTask::segmentation};
  std::filesystem::path output_dir;
  bool filter_enabled = false;
  FilterOptions filter;
  std::optional<int> n_real;  // cap on |D_R| used downstream (scaling runs)
  std::optional<SweepGrids> sweep;
  bool fail_fast = false;
  int max_workers = 4;
  std::optional<std::filesystem::path> background_dir;

  void validate() const;
};

PipelineConfig pipeline_config_from_json_file(const std::filesystem::path& path);
void write_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path);
std::string pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const std::string& text);

struct RunOutcome {
  std::filesystem::path run_dir;
  std::vector<std::string> failed_instances;
  EvalReport base_report;
  EvalReport personalized_report;
};

// Executes generate -> (filter) -> train -> evaluate -> analyze per instance,
// with stage sentinel files so a rerun resumes after completed stages.
RunOutcome run_pipeline(const PipelineConfig& config);

struct ComparisonRow {
  std::string metric;
  double base = 0.0;
  double personalized = 0.0;
  double delta = 0.0;
};

struct ReportOutcome {
  std::vector<std::pair<std::string, std::vector<ComparisonRow>>> per_run;  // run dir, rows
  std::filesystem::path comparison_csv;
  std::filesystem::path scatter_csv;
  std::optional<std::filesystem::path> scaling_csv;  // present when runs vary |D_R|
};

ReportOutcome report_runs(const std::vector<std::filesystem::path>& run_dirs,
                          const std::filesystem::path& out_dir);

// Expands the config's sweep grids into child runs under output_dir.
std::vector<std::filesystem::path> sweep_pipeline(const PipelineConfig& config);

// The dataset a config points at (toy or ingested).
InstanceDataset load_pipeline_dataset(const PipelineConfig& config);

}  // namespace persrep
