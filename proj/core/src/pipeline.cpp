#include "persrep/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "persrep/parallel.hpp"
#include "persrep/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace persrep {

namespace {

json generator_to_json(const GeneratorConfig& g) {
  json j;
  j["kind"] = to_string(g.kind);
  j["cfg_scale"] = g.cfg_scale;
  j["use_llm_captions"] = g.use_llm_captions;
  j["n_positives"] = g.n_positives;
  j["n_negatives"] = g.n_negatives;
  j["seed"] = g.seed;
  j["scale_min"] = g.scale_range.first;
  j["scale_max"] = g.scale_range.second;
  return j;
}

GeneratorConfig generator_from_json(const json& j) {
  GeneratorConfig g;
  if (j.contains("kind")) {
    auto kind = generator_kind_from_string(j["kind"].get<std::string>());
    if (!kind) raise(ErrorCode::ConfigError, "unknown generator kind");
    g.kind = *kind;
  }
  if (j.contains("cfg_scale")) g.cfg_scale = j["cfg_scale"].get<double>();
  if (j.contains("use_llm_captions")) g.use_llm_captions = j["use_llm_captions"].get<bool>();
  if (j.contains("n_positives")) g.n_positives = j["n_positives"].get<int>();
  if (j.contains("n_negatives")) g.n_negatives = j["n_negatives"].get<int>();
  if (j.contains("seed")) g.seed = j["seed"].get<uint64_t>();
  if (j.contains("scale_min")) g.scale_range.first = j["scale_min"].get<double>();
  if (j.contains("scale_max")) g.scale_range.second = j["scale_max"].get<double>();
  return g;
}

json train_to_json(const TrainConfig& t) {
  json j;
  j["loss_kind"] = to_string(t.loss_kind);
  j["tau"] = t.tau;
  j["n_pairs"] = t.n_pairs;
  j["n_neg_per_anchor"] = t.n_neg_per_anchor;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["seed"] = t.seed;
  j["margin"] = t.margin;
  j["include_positive_in_denominator"] = t.include_positive_in_denominator;
  j["augment_enabled"] = t.augment_enabled;
  return j;
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  if (j.contains("loss_kind")) {
    auto kind = loss_kind_from_string(j["loss_kind"].get<std::string>());
    if (!kind) raise(ErrorCode::ConfigError, "unknown loss kind");
    t.loss_kind = *kind;
  }
  if (j.contains("tau")) t.tau = j["tau"].get<double>();
  if (j.contains("n_pairs")) t.n_pairs = j["n_pairs"].get<int>();
  if (j.contains("n_neg_per_anchor")) t.n_neg_per_anchor = j["n_neg_per_anchor"].get<int>();
  if (j.contains("epochs")) t.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) t.batch_size = j["batch_size"].get<int>();
  if (j.contains("learning_rate")) t.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("seed")) t.seed = j["seed"].get<uint64_t>();
  if (j.contains("margin")) t.margin = j["margin"].get<double>();
  if (j.contains("include_positive_in_denominator")) {
    t.include_positive_in_denominator = j["include_positive_in_denominator"].get<bool>();
  }
  if (j.contains("augment_enabled")) t.augment_enabled = j["augment_enabled"].get<bool>();
  return t;
}

std::set<EvalTask> tasks_from_json(const json& j) {
  std::set<EvalTask> tasks;
  for (const auto& name : j) {
    std::string s = name.get<std::string>();
    if (s == "classification") tasks.insert(EvalTask::classification);
    else if (s == "retrieval") tasks.insert(EvalTask::retrieval);
    else if (s == "detection") tasks.insert(EvalTask::detection);
    else if (s == "segmentation") tasks.insert(EvalTask::segmentation);
    else raise(ErrorCode::ConfigError, "unknown eval task: " + s);
  }
  return tasks;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!toy_dataset && dataset_root.empty()) {
    raise(ErrorCode::ConfigError, "dataset_root required unless toy_dataset is set");
  }
  if (!toy_dataset && !fs::exists(dataset_root)) {
    raise(ErrorCode::ConfigError, "dataset_root does not exist: " + dataset_root.string());
  }
  if (output_dir.empty()) raise(ErrorCode::ConfigError, "output_dir required");
  if (sweep && sweep->empty()) raise(ErrorCode::ConfigError, "sweep grids must be nonempty");
  if (background_dir && !fs::exists(*background_dir)) {
    raise(ErrorCode::ConfigError, "background_dir does not exist: " + background_dir->string());
  }
  generator.validate();
  train.validate();
}

std::string pipeline_config_to_json(const PipelineConfig& config) {
  json doc;
  doc["dataset_root"] = config.dataset_root.string();
  doc["toy_dataset"] = config.toy_dataset;
  doc["toy_seed"] = config.toy_seed;
  doc["encoder_name"] = config.encoder_name;
  doc["corpus_name"] = config.corpus_name;
  doc["generator"] = generator_to_json(config.generator);
  doc["train"] = train_to_json(config.train);
  json tasks = json::array();
  for (EvalTask t : config.eval_tasks) tasks.push_back(to_string(t));
  doc["eval_tasks"] = tasks;
  doc["output_dir"] = config.output_dir.string();
  doc["filter_enabled"] = config.filter_enabled;
  doc["filter_threshold"] = config.filter.threshold;
  if (config.n_real) doc["n_real"] = *config.n_real;
  if (config.sweep) {
    json s;
    if (!config.sweep->cfg_scale.empty()) s["cfg_scale"] = config.sweep->cfg_scale;
    if (!config.sweep->use_llm_captions.empty()) s["use_llm_captions"] = config.sweep->use_llm_captions;
    if (!config.sweep->loss_kind.empty()) {
      json kinds = json::array();
      for (LossKind k : config.sweep->loss_kind) kinds.push_back(to_string(k));
      s["loss_kind"] = kinds;
    }
    if (!config.sweep->n_positives.empty()) s["n_positives"] = config.sweep->n_positives;
    if (!config.sweep->n_pairs.empty()) s["n_pairs"] = config.sweep->n_pairs;
    doc["sweep"] = s;
  }
  doc["fail_fast"] = config.fail_fast;
  doc["max_workers"] = config.max_workers;
  if (config.background_dir) doc["background_dir"] = config.background_dir->string();
  return doc.dump(2);
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::ConfigError, std::string("config parse: ") + e.what());
  }
  PipelineConfig config;
  if (doc.contains("dataset_root")) config.dataset_root = doc["dataset_root"].get<std::string>();
  if (doc.contains("toy_dataset")) config.toy_dataset = doc["toy_dataset"].get<bool>();
  if (doc.contains("toy_seed")) config.toy_seed = doc["toy_seed"].get<uint64_t>();
  if (doc.contains("encoder_name")) config.encoder_name = doc["encoder_name"].get<std::string>();
  if (doc.contains("corpus_name")) config.corpus_name = doc["corpus_name"].get<std::string>();
  if (doc.contains("generator")) config.generator = generator_from_json(doc["generator"]);
  if (doc.contains("train")) config.train = train_from_json(doc["train"]);
  if (doc.contains("eval_tasks")) config.eval_tasks = tasks_from_json(doc["eval_tasks"]);
  if (doc.contains("output_dir")) config.output_dir = doc["output_dir"].get<std::string>();
  if (doc.contains("filter_enabled")) config.filter_enabled = doc["filter_enabled"].get<bool>();
  if (doc.contains("filter_threshold")) config.filter.threshold = doc["filter_threshold"].get<double>();
  if (doc.contains("n_real")) config.n_real = doc["n_real"].get<int>();
  if (doc.contains("sweep")) {
    SweepGrids grids;
    const json& s = doc["sweep"];
    if (s.contains("cfg_scale")) grids.cfg_scale = s["cfg_scale"].get<std::vector<double>>();
    if (s.contains("use_llm_captions")) {
      grids.use_llm_captions = s["use_llm_captions"].get<std::vector<bool>>();
    }
    if (s.contains("loss_kind")) {
      for (const auto& k : s["loss_kind"]) {
        auto kind = loss_kind_from_string(k.get<std::string>());
        if (!kind) raise(ErrorCode::ConfigError, "unknown loss kind in sweep");
        grids.loss_kind.push_back(*kind);
      }
    }
    if (s.contains("n_positives")) grids.n_positives = s["n_positives"].get<std::vector<int>>();
    if (s.contains("n_pairs")) grids.n_pairs = s["n_pairs"].get<std::vector<int>>();
    config.sweep = grids;
  }
  if (doc.contains("fail_fast")) config.fail_fast = doc["fail_fast"].get<bool>();
  if (doc.contains("max_workers")) config.max_workers = doc["max_workers"].get<int>();
  if (doc.contains("background_dir")) config.background_dir = fs::path(doc["background_dir"].get<std::string>());
  return config;
}

PipelineConfig pipeline_config_from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ConfigError, "cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pipeline_config_from_json(text);
}

void write_pipeline_config(const PipelineConfig& config, const fs::path& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path.string());
  out << pipeline_config_to_json(config) << "\n";
}

InstanceDataset load_pipeline_dataset(const PipelineConfig& config) {
  if (config.toy_dataset) {
    ToyDatasetConfig toy;
    toy.seed = config.toy_seed;
    return make_toy_dataset(toy);
  }
  return ingest_dataset(config.dataset_root);
}

namespace {

bool stage_done(const fs::path& dir, const std::string& stage) {
  return fs::exists(dir / ("stage_" + stage + ".done"));
}

void mark_stage(const fs::path& dir, const std::string& stage, const json& info) {
  std::ofstream out(dir / ("stage_" + stage + ".done"));
  out << info.dump(2) << "\n";
}

std::vector<ImageRecord> effective_train(const InstanceEntry& entry, const std::optional<int>& n_real) {
  std::vector<ImageRecord> d_r = entry.train;
  if (n_real && *n_real > 0 && *n_real < static_cast<int>(d_r.size())) {
    d_r.resize(static_cast<size_t>(*n_real));
  }
  return d_r;
}

struct InstanceArtifacts {
  std::optional<InstanceEval> eval;
  std::optional<PoolAnalysis> analysis;
};

// Stages for one instance; sentinels make each stage resumable.
InstanceArtifacts run_instance(const PipelineConfig& config, const InstanceDataset& dataset,
                               const std::string& instance_id, const fs::path& inst_dir,
                               const CaptionCorpus& corpus) {
  fs::create_directories(inst_dir);
  const InstanceEntry& entry = dataset.at(instance_id);
  std::vector<ImageRecord> d_r = effective_train(entry, config.n_real);

  const uint64_t gen_seed = derive_seed(config.generator.seed, fnv1a(instance_id));
  const uint64_t train_seed = derive_seed(config.train.seed, fnv1a(instance_id));

  // generate
  const fs::path pool_dir = inst_dir / "pool";
  if (!stage_done(inst_dir, "generate")) {
    GeneratorConfig gen = config.generator;
    gen.seed = gen_seed;
    InstanceDataset scoped;
    InstanceEntry scoped_entry = entry;
    scoped_entry.train = d_r;
    scoped.instances.emplace(instance_id, std::move(scoped_entry));

    std::unique_ptr<HttpGeneratorClient> client = HttpGeneratorClient::from_env();
    std::unique_ptr<BackgroundSource> bg;
    if (config.background_dir) {
      bg = std::make_unique<DirectoryBackgrounds>(*config.background_dir,
                                                  derive_seed(gen_seed, 0xb9));
    }
    SyntheticPool pool = synthesize_pool(scoped, instance_id, gen, corpus, client.get(), bg.get());
    save_pool(pool, pool_dir);
    mark_stage(inst_dir, "generate",
               {{"seed", gen_seed}, {"pool_digest", hex_digest(pool.digest())}});
  }

  // filter
  fs::path active_pool_dir = pool_dir;
  if (config.filter_enabled) {
    const fs::path filtered_dir = inst_dir / "pool_filtered";
    if (!stage_done(inst_dir, "filter")) {
      SyntheticPool pool = load_pool(pool_dir);
      auto metric_encoder = make_toy_encoder(config.encoder_name);
      EncoderPerceptualEmbedder metric(metric_encoder);
      FullMaskPredictor masker;
      SyntheticPool filtered = filter_pool(pool, d_r, metric, masker, config.filter);
      save_pool(filtered, filtered_dir);
      mark_stage(inst_dir, "filter",
                 {{"threshold", config.filter.threshold},
                  {"kept", filtered.positives.size()},
                  {"pool_digest", hex_digest(filtered.digest())}});
    }
    active_pool_dir = filtered_dir;
  }

  // train
  const fs::path adapter_file = inst_dir / "adapter.bin";
  if (!stage_done(inst_dir, "train")) {
    SyntheticPool pool = load_pool(active_pool_dir);
    auto base = make_toy_encoder(config.encoder_name);
    auto adapted = attach_adapter(base, AdapterSpec{}, derive_seed(train_seed, 0xada));
    TrainConfig train = config.train;
    train.seed = train_seed;
    TrainResult result = train_personalized(*adapted, d_r, pool, train);
    save_adapter(adapted->adapter(), adapter_file);

    std::ofstream trace(inst_dir / "loss_trace.csv");
    trace << "step,loss\n";
    for (size_t i = 0; i < result.loss_trace.size(); ++i) {
      trace << i << "," << result.loss_trace[i] << "\n";
    }
    json manifest;
    manifest["config"] = json::parse(pipeline_config_to_json(config))["train"];
    manifest["seed"] = train_seed;
    manifest["pool_digest"] = hex_digest(pool.digest());
    manifest["steps"] = result.steps;
    manifest["final_loss"] = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
    manifest["loss_trace"] = "loss_trace.csv";
    std::ofstream mf(inst_dir / "train_manifest.json");
    mf << manifest.dump(2) << "\n";
    mark_stage(inst_dir, "train", {{"seed", train_seed}, {"steps", result.steps}});
  }

  InstanceArtifacts artifacts;

  // evaluate
  const fs::path eval_file = inst_dir / "eval.json";
  if (!stage_done(inst_dir, "eval")) {
    auto base = make_toy_encoder(config.encoder_name);
    LoRAAdapter adapter = load_adapter(adapter_file);
    AdaptedToyEncoder personalized(base, std::move(adapter));
    EvalOptions options;
    options.tasks = config.eval_tasks;
    EmbeddingCache cache = EmbeddingCache::from_env();
    options.cache = &cache;
    InstanceEval eval = evaluate_instance(dataset, instance_id, personalized, options);

    EvalReport fragment;
    fragment.encoder_label = config.encoder_name + "+lora";
    fragment.dataset_digest = hex_digest(dataset.digest());
    fragment.per_instance.emplace(instance_id, eval);
    fragment.aggregate = eval.overall;
    write_report_json(fragment, eval_file);
    mark_stage(inst_dir, "eval", {{"instance", instance_id}});
    artifacts.eval = std::move(eval);
  } else {
    EvalReport fragment = read_report_json(eval_file);
    artifacts.eval = fragment.per_instance.at(instance_id);
  }

  // analyze
  const fs::path analysis_file = inst_dir / "analysis.json";
  if (!stage_done(inst_dir, "analyze")) {
    SyntheticPool pool = load_pool(active_pool_dir);
    auto metric_encoder = make_toy_encoder(config.encoder_name);
    EncoderPerceptualEmbedder metric(metric_encoder);
    PoolAnalysis analysis = analyze_pool(pool, d_r, metric);
    write_analysis_json(analysis, analysis_file);
    mark_stage(inst_dir, "analyze", {{"pool_digest", analysis.pool_digest}});
    artifacts.analysis = std::move(analysis);
  } else {
    artifacts.analysis = read_analysis_json(analysis_file);
  }
  return artifacts;
}

}  // namespace

RunOutcome run_pipeline(const PipelineConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);

  InstanceDataset dataset = load_pipeline_dataset(config);
  const std::string dataset_digest = hex_digest(dataset.digest());

  // Manifest (config + seeds + digests) lands before any stage output.
  {
    json manifest;
    manifest["schema_version"] = 1;
    manifest["config"] = json::parse(pipeline_config_to_json(config));
    manifest["dataset_digest"] = dataset_digest;
    manifest["n_real"] = config.n_real ? json(*config.n_real) : json(nullptr);
    std::ofstream out(config.output_dir / "manifest.json");
    out << manifest.dump(2) << "\n";
  }

  RunOutcome outcome;
  outcome.run_dir = config.output_dir;

  // Base (frozen) encoder evaluation, shared across instances.
  const fs::path base_eval_file = config.output_dir / "eval_base.json";
  if (!stage_done(config.output_dir, "eval_base")) {
    auto base = make_toy_encoder(config.encoder_name);
    EvalOptions options;
    options.tasks = config.eval_tasks;
    outcome.base_report = evaluate_dataset(dataset, *base, config.encoder_name, options);
    write_report_json(outcome.base_report, base_eval_file);
    write_report_csv(outcome.base_report, config.output_dir / "eval_base.csv");
    mark_stage(config.output_dir, "eval_base", {{"encoder", config.encoder_name}});
  } else {
    outcome.base_report = read_report_json(base_eval_file);
  }

  CaptionCorpus corpus = builtin_corpus(config.corpus_name);
  std::vector<std::string> ids = dataset.instance_ids();
  std::vector<std::optional<InstanceArtifacts>> artifacts(ids.size());
  std::vector<std::string> errors(ids.size());

  parallel_for(
      ids.size(),
      [&](size_t i) {
        const fs::path inst_dir = config.output_dir / "instances" / ids[i];
        try {
          artifacts[i] = run_instance(config, dataset, ids[i], inst_dir, corpus);
        } catch (const std::exception& e) {
          errors[i] = e.what();
          fs::create_directories(inst_dir);
          std::ofstream err(inst_dir / "error.txt");
          err << e.what() << "\n";
          if (config.fail_fast) throw;
        }
      },
      static_cast<unsigned>(std::max(1, config.max_workers)));

  // Merge per-instance results (id order keeps this deterministic). The
  // analysis CSV is rebuilt wholesale so reruns do not append duplicates.
  fs::remove(config.output_dir / "analysis.csv");
  outcome.personalized_report.encoder_label = config.encoder_name + "+lora";
  outcome.personalized_report.dataset_digest = dataset_digest;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (!errors[i].empty()) {
      outcome.failed_instances.push_back(ids[i]);
      continue;
    }
    if (artifacts[i] && artifacts[i]->eval) {
      outcome.personalized_report.per_instance.emplace(ids[i], *artifacts[i]->eval);
    }
    if (artifacts[i] && artifacts[i]->analysis) {
      append_analysis_csv(*artifacts[i]->analysis, config.output_dir / "analysis.csv");
    }
  }
  recompute_aggregates(outcome.personalized_report);

  write_report_json(outcome.personalized_report, config.output_dir / "eval_personalized.json");
  write_report_csv(outcome.personalized_report, config.output_dir / "eval_personalized.csv");
  return outcome;
}

namespace {

std::vector<ComparisonRow> comparison_rows(const EvalReport& base, const EvalReport& personalized) {
  std::vector<ComparisonRow> rows;
  auto add = [&](const char* name, const std::optional<double> TaskMetrics::*member) {
    if (base.aggregate.*member && personalized.aggregate.*member) {
      ComparisonRow row;
      row.metric = name;
      row.base = *(base.aggregate.*member);
      row.personalized = *(personalized.aggregate.*member);
      row.delta = row.personalized - row.base;
      rows.push_back(row);
    }
  };
  add("pr_auc", &TaskMetrics::pr_auc);
  add("ndcg", &TaskMetrics::ndcg);
  add("det_ap", &TaskMetrics::det_ap);
  add("det_f1", &TaskMetrics::det_f1);
  add("seg_ap", &TaskMetrics::seg_ap);
  add("seg_f1", &TaskMetrics::seg_f1);
  return rows;
}

}  // namespace

ReportOutcome report_runs(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  if (run_dirs.empty()) raise(ErrorCode::IncompatibleRuns, "no runs given");
  fs::create_directories(out_dir);

  ReportOutcome outcome;
  std::string digest;
  struct LoadedRun {
    fs::path dir;
    EvalReport base;
    EvalReport personalized;
    std::optional<int> n_real;
  };
  std::vector<LoadedRun> runs;
  for (const auto& dir : run_dirs) {
    LoadedRun run;
    run.dir = dir;
    run.base = read_report_json(dir / "eval_base.json");
    run.personalized = read_report_json(dir / "eval_personalized.json");
    std::ifstream mf(dir / "manifest.json");
    if (mf) {
      json manifest;
      mf >> manifest;
      if (manifest.contains("n_real") && !manifest["n_real"].is_null()) {
        run.n_real = manifest["n_real"].get<int>();
      }
    }
    if (digest.empty()) {
      digest = run.base.dataset_digest;
    } else if (digest != run.base.dataset_digest) {
      raise(ErrorCode::IncompatibleRuns, dir.string() + " evaluated a different dataset digest");
    }
    runs.push_back(std::move(run));
  }

  outcome.comparison_csv = out_dir / "comparison.csv";
  {
    std::ofstream out(outcome.comparison_csv);
    out << "run,metric,base,personalized,delta\n";
    for (const auto& run : runs) {
      auto rows = comparison_rows(run.base, run.personalized);
      for (const auto& row : rows) {
        out << run.dir.filename().string() << "," << row.metric << "," << row.base << ","
            << row.personalized << "," << row.delta << "\n";
      }
      outcome.per_run.emplace_back(run.dir.string(), rows);
    }
  }

  outcome.scatter_csv = out_dir / "diversity_fidelity.csv";
  {
    std::ofstream out(outcome.scatter_csv);
    out << "run,instance_id,pool_digest,fidelity_mean,diversity,pr_auc\n";
    for (const auto& run : runs) {
      for (const auto& [id, eval] : run.personalized.per_instance) {
        fs::path analysis_file = run.dir / "instances" / id / "analysis.json";
        if (!fs::exists(analysis_file)) continue;
        PoolAnalysis analysis = read_analysis_json(analysis_file);
        out << run.dir.filename().string() << "," << id << "," << analysis.pool_digest << ","
            << analysis.fidelity_mean << "," << analysis.diversity << ","
            << (eval.overall.pr_auc ? *eval.overall.pr_auc : 0.0) << "\n";
      }
    }
  }

  bool varies_n_real = false;
  for (const auto& run : runs) {
    if (run.n_real != runs.front().n_real) varies_n_real = true;
  }
  if (varies_n_real) {
    outcome.scaling_csv = out_dir / "real_scaling.csv";
    std::ofstream out(*outcome.scaling_csv);
    out << "run,n_real,base_pr_auc,personalized_pr_auc\n";
    for (const auto& run : runs) {
      out << run.dir.filename().string() << "," << (run.n_real ? *run.n_real : -1) << ","
          << (run.base.aggregate.pr_auc ? *run.base.aggregate.pr_auc : 0.0) << ","
          << (run.personalized.aggregate.pr_auc ? *run.personalized.aggregate.pr_auc : 0.0)
          << "\n";
    }
  }
  return outcome;
}

std::vector<fs::path> sweep_pipeline(const PipelineConfig& config) {
  if (!config.sweep || config.sweep->empty()) {
    raise(ErrorCode::ConfigError, "sweep requires nonempty grids");
  }
  const SweepGrids& grids = *config.sweep;
  auto or_default = [](auto grid, auto fallback) {
    if (grid.empty()) grid.push_back(fallback);
    return grid;
  };
  std::vector<double> cfg_grid = or_default(grids.cfg_scale, config.generator.cfg_scale);
  std::vector<bool> llm_grid = or_default(grids.use_llm_captions, config.generator.use_llm_captions);
  std::vector<LossKind> loss_grid = or_default(grids.loss_kind, config.train.loss_kind);
  std::vector<int> pos_grid = or_default(grids.n_positives, config.generator.n_positives);
  std::vector<int> pair_grid = or_default(grids.n_pairs, config.train.n_pairs);

  std::vector<fs::path> children;
  int index = 0;
  for (double cfg : cfg_grid) {
    for (bool llm : llm_grid) {
      for (LossKind loss : loss_grid) {
        for (int n_pos : pos_grid) {
          for (int n_pairs : pair_grid) {
            PipelineConfig child = config;
            child.sweep.reset();
            child.generator.cfg_scale = cfg;
            child.generator.use_llm_captions = llm;
            child.generator.n_positives = n_pos;
            child.train.loss_kind = loss;
            child.train.n_pairs = n_pairs;
            std::ostringstream name;
            name << "sweep_" << std::setw(3) << std::setfill('0') << index++;
            child.output_dir = config.output_dir / name.str();
            run_pipeline(child);
            children.push_back(child.output_dir);
          }
        }
      }
    }
  }
  json manifest;
  manifest["children"] = json::array();
  for (const auto& dir : children) manifest["children"].push_back(dir.filename().string());
  std::ofstream out(config.output_dir / "sweep_manifest.json");
  out << manifest.dump(2) << "\n";
  return children;
}

}  // namespace persrep
