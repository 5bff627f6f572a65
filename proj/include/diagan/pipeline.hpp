#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diagan/drs.hpp"
#include "diagan/experiment.hpp"

namespace diagan {

struct PhaseRecord {
  std::string name;
  long first_step = 0;  // training phases only; 0 otherwise
  long last_step = 0;
  double seconds = 0.0;
};

/// Index of a run directory. Entries are only ever appended.
struct RunManifest {
  std::string config_hash;
  std::map<std::string, std::string> checkpoints;  // name -> path relative to the run root
  std::vector<std::string> artifacts;              // paths relative to the run root
  std::vector<PhaseRecord> phases;

  bool has_phase(const std::string& name) const;
  /// Relative paths of listed artifacts that are missing under `root`.
  std::vector<std::string> missing_artifacts(const std::filesystem::path& root) const;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  static RunManifest load(const std::filesystem::path& root);
  void save(const std::filesystem::path& root) const;
};

/// Two-column CSV "x,y" of sample coordinates.
void write_points_csv(const Matrix& points, const std::filesystem::path& path);
Matrix read_points_csv(const std::filesystem::path& path);

/// Loads the config stored in a run directory.
ExperimentConfig load_run_config(const std::filesystem::path& root);

/// Phase 1. Creates `root` (which must not hold a run yet) with config.txt,
/// dataset.csv, phase1/{ldr_log.csv, train_curve.csv, checkpoint/} and manifest.json.
RunManifest cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& root);

/// Scores from phase1/ldr_log.csv into diagnose/{scores.csv, diagnose.json}.
/// `k` overrides the configured score coefficient.
ScoreTable cmd_diagnose(const std::filesystem::path& root, std::optional<double> k = std::nullopt);

/// Phase 2 resumed from the phase-1 checkpoint with P_s taken from `scores`
/// (default diagnose/scores.csv). Writes phase2/.
RunManifest cmd_resample_train(const std::filesystem::path& root,
                               const std::optional<std::filesystem::path>& scores = std::nullopt);

/// Phase 3: n samples through DRS with the phase-2 auxiliary discriminator
/// (the phase-1 discriminator when phase 2 has not run). Writes drs/.
DrsResult cmd_drs(const std::filesystem::path& root, std::size_t n);

/// Metrics of `samples` (default drs/samples.csv, else fresh generator
/// samples) against the training data. Writes <name>/metrics.json plus CSV
/// tables and returns the JSON text.
std::string cmd_evaluate(const std::filesystem::path& root,
                         const std::optional<std::filesystem::path>& samples = std::nullopt,
                         const std::string& name = "evaluate");

struct SweepRow {
  double k = 0.0;
  double frechet = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double acceptance_rate = 0.0;
};

/// Phase 2 + DRS + metrics for each k, all resumed from the same phase-1
/// checkpoint (cmd_train runs first when the directory has no run). Writes
/// sweep/k_<k>/ and sweep/sweep.csv. `sort_by` names a column to sort
/// ascending ("k", "frechet", "precision", "recall", "acceptance_rate").
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& root,
                                const std::vector<double>& ks, const std::string& sort_by = "k");

/// Summary JSON of everything the run directory holds.
std::string cmd_report(const std::filesystem::path& root);

}  // namespace diagan
