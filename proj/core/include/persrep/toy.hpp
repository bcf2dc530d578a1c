#pragma once

#include <cstdint>

#include "persrep/dataset.hpp"
#include "persrep/generator.hpp"
#include "persrep/training.hpp"

namespace persrep {

// Procedural instance dataset: each instance is a textured superellipse with
// a stable style, rendered into train/test scenes that mirror the capture
// protocol (canonical train pose, then id / pose / distractors / both test
// scenes). All images carry exact masks.
struct ToyDatasetConfig {
  int n_instances = 8;
  int n_train = 3;
  int n_test = 6;
  int image_size = 64;
  uint64_t seed = 0;
  std::string category = "widget";
};

InstanceDataset make_toy_dataset(const ToyDatasetConfig& config = {});

// Desk-scale pipeline presets sized for a few-minute CPU run.
GeneratorConfig toy_generator_config(uint64_t seed = 0);
TrainConfig toy_train_config(uint64_t seed = 0);

}  // namespace persrep
