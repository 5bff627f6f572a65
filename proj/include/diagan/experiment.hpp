#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "diagan/datasets.hpp"
#include "diagan/diagnostics.hpp"
#include "diagan/drs.hpp"
#include "diagan/gan.hpp"

namespace diagan {

struct DatasetSpec {
  std::string name = "single_gaussian";  // or "twenty_five_gaussians"
  double sigma = 3.0;
  std::size_t size = 10000;
  std::uint64_t seed = 0;

  LabeledDataset generate() const;
  bool has_modes() const { return name == "twenty_five_gaussians"; }
};

struct EvalSettings {
  std::size_t samples = 10000;
  int knn_k = 3;
  bool reconstruction = true;
  int re_epochs = 200;
  long covered_threshold = 50;  // high-quality samples for a mode to count as covered
  long dropped_threshold = 10;  // fewer than this and the mode counts as dropped
};

/// Everything that determines a run. Serialized as `key = value` lines; the
/// canonical text (to_text) reloads to an identical configuration.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  long epochs = 200;
  double phase1_fraction = 0.8;
  std::size_t window = 50;
  TrainConfig train;  // schedule fields are derived from epochs/phase1_fraction/window
  ClipRule clip;
  DrsOptions drs;
  std::size_t drs_samples = 10000;
  double s0 = 1.0;
  EvalSettings eval;

  /// Presets: "single_gaussian" (batch 1024, Adam 1e-3/0.5/0.9, 200
  /// epochs) and "twenty_five_gaussians" (batch 128, Adam 2e-4/0.5/0.999, 300 epochs).
  static ExperimentConfig preset(const std::string& name);

  /// Applies `key = value` lines on top of the current values.
  void apply_text(const std::string& text);
  void set(const std::string& key, const std::string& value);

  /// Recomputes the derived training schedule and checks consistency.
  /// Throws ParameterError (including when no seed was given).
  void resolve();

  std::string to_text() const;
  std::string hash() const;

  bool seed_set = false;

 private:
  bool dataset_seed_set_ = false;  // otherwise the dataset seed follows `seed`
};

/// Parses a config file; `overrides` are "key=value" strings applied afterwards.
ExperimentConfig load_config(const std::string& text, const std::vector<std::string>& overrides = {});

std::vector<std::string> config_keys();

}  // namespace diagan
