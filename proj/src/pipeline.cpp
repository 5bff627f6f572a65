#include "diagan/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "diagan/errors.hpp"
#include "diagan/io.hpp"
#include "diagan/metrics.hpp"

namespace diagan {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kManifestSchema = "diagan.manifest/1";
constexpr const char* kMetricsSchema = "diagan.metrics/1";

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Phase directories are write-once.
fs::path fresh_dir(const fs::path& root, const std::string& name) {
  const fs::path dir = root / name;
  if (fs::exists(dir)) throw IoError("refusing to overwrite existing " + dir.string());
  fs::create_directories(dir);
  return dir;
}

void require_file(const fs::path& p, const std::string& hint) {
  if (!fs::exists(p)) throw IoError("missing " + p.string() + " (" + hint + ")");
}

// A JSON number, or null for non-finite values.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string label_for_k(double k) { return "k_" + format_double(k); }

Matrix evaluation_samples(const MlpNetwork& generator, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, StreamId::evaluation);
  Matrix z(static_cast<Eigen::Index>(n), generator.input_dim());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
  return generator.forward(z);
}

// Latest trained model in the run: phase 2 if present, otherwise phase 1.
GanTrainer latest_trainer(const fs::path& root, const ExperimentConfig& cfg, bool* from_phase2 = nullptr) {
  const bool p2 = fs::exists(root / "phase2" / "checkpoint");
  if (from_phase2) *from_phase2 = p2;
  const fs::path ckpt = root / (p2 ? "phase2" : "phase1") / "checkpoint";
  require_file(ckpt, "run `train` first");
  return GanTrainer::load(ckpt, cfg.train);
}

json drs_block(const DrsResult& r) {
  return json::parse(drs_report_json(r));
}

}  // namespace

bool RunManifest::has_phase(const std::string& name) const {
  return std::any_of(phases.begin(), phases.end(), [&](const PhaseRecord& p) { return p.name == name; });
}

std::vector<std::string> RunManifest::missing_artifacts(const fs::path& root) const {
  std::vector<std::string> out;
  for (const auto& a : artifacts)
    if (!fs::exists(root / a)) out.push_back(a);
  for (const auto& [name, path] : checkpoints)
    if (!fs::exists(root / path)) out.push_back(path);
  return out;
}

std::string RunManifest::to_json() const {
  json j;
  j["schema"] = kManifestSchema;
  j["config_hash"] = config_hash;
  j["checkpoints"] = json::object();
  for (const auto& [k, v] : checkpoints) j["checkpoints"][k] = v;
  j["artifacts"] = artifacts;
  auto ph = json::array();
  for (const auto& p : phases) {
    ph.push_back({{"name", p.name}, {"first_step", p.first_step}, {"last_step", p.last_step}, {"seconds", p.seconds}});
  }
  j["phases"] = ph;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    if (j.at("schema") != kManifestSchema) throw IoError("unsupported manifest schema");
    m.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& [k, v] : j.at("checkpoints").items()) m.checkpoints[k] = v.get<std::string>();
    m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    for (const auto& p : j.at("phases")) {
      m.phases.push_back({p.at("name").get<std::string>(), p.at("first_step").get<long>(),
                          p.at("last_step").get<long>(), p.at("seconds").get<double>()});
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const fs::path& root) {
  const fs::path p = root / "manifest.json";
  require_file(p, "not a run directory");
  return from_json(read_text_file(p));
}

void RunManifest::save(const fs::path& root) const { write_text_file(root / "manifest.json", to_json()); }

void write_points_csv(const Matrix& points, const fs::path& path) {
  if (points.rows() > 0 && points.cols() != 2) throw ShapeError("write_points_csv: expected two columns");
  std::string out = "x,y\n";
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out += format_double(points(i, 0));
    out += ',';
    out += format_double(points(i, 1));
    out += '\n';
  }
  write_text_file(path, out);
}

Matrix read_points_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t cx = t.column("x"), cy = t.column("y");
  Matrix m(static_cast<Eigen::Index>(t.rows.size()), 2);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = parse_double(t.rows[i].at(cx));
    m(static_cast<Eigen::Index>(i), 1) = parse_double(t.rows[i].at(cy));
  }
  return m;
}

ExperimentConfig load_run_config(const fs::path& root) {
  const fs::path p = root / "config.txt";
  require_file(p, "not a run directory");
  return load_config(read_text_file(p));
}

RunManifest cmd_train(const ExperimentConfig& cfg_in, const fs::path& root) {
  ExperimentConfig cfg = cfg_in;
  cfg.resolve();
  if (fs::exists(root / "manifest.json") || fs::exists(root / "config.txt")) {
    throw IoError("refusing to overwrite existing run in " + root.string());
  }
  fs::create_directories(root);
  RunManifest manifest;
  manifest.config_hash = cfg.hash();
  write_text_file(root / "config.txt", cfg.to_text());
  manifest.artifacts.push_back("config.txt");

  const LabeledDataset data = cfg.dataset.generate();
  write_dataset_csv(data, root / "dataset.csv");
  manifest.artifacts.push_back("dataset.csv");

  const fs::path dir = fresh_dir(root, "phase1");
  Stopwatch clock;
  GanTrainer trainer(cfg.train);
  const LdrLog log = trainer.run_phase1(data);
  const double seconds = clock.seconds();

  log.write_csv(dir / "ldr_log.csv");
  trainer.write_history_csv(dir / "train_curve.csv");
  trainer.save(dir / "checkpoint");
  manifest.artifacts.push_back("phase1/ldr_log.csv");
  manifest.artifacts.push_back("phase1/train_curve.csv");
  manifest.checkpoints["phase1"] = "phase1/checkpoint";
  manifest.phases.push_back({"phase1", cfg.train.phase1_steps > 0 ? 1 : 0, cfg.train.phase1_steps, seconds});
  manifest.save(root);
  return manifest;
}

ScoreTable cmd_diagnose(const fs::path& root, std::optional<double> k) {
  const ExperimentConfig cfg = load_run_config(root);
  RunManifest manifest = RunManifest::load(root);
  require_file(root / "phase1" / "ldr_log.csv", "run `train` first");
  const fs::path dir = fresh_dir(root, "diagnose");
  Stopwatch clock;
  const LdrLog log = LdrLog::read_csv(root / "phase1" / "ldr_log.csv");
  const double coef = k.value_or(cfg.train.score_k);
  const ScoreTable table = compute_scores(log, coef, cfg.clip);
  table.write_csv(dir / "scores.csv");

  const auto [lo, hi] = std::minmax_element(table.frequency.begin(), table.frequency.end());
  json j;
  j["schema"] = "diagan.diagnose/1";
  j["k"] = coef;
  j["records"] = log.record_count();
  j["samples"] = log.sample_count();
  j["clip_floor"] = cfg.clip.floor;
  j["clip_max_ratio"] = cfg.clip.max_ratio;
  j["min_p_s"] = *lo;
  j["max_p_s"] = *hi;
  write_text_file(dir / "diagnose.json", j.dump(2) + "\n");

  manifest.artifacts.push_back("diagnose/scores.csv");
  manifest.artifacts.push_back("diagnose/diagnose.json");
  manifest.phases.push_back({"diagnose", 0, 0, clock.seconds()});
  manifest.save(root);
  return table;
}

RunManifest cmd_resample_train(const fs::path& root, const std::optional<fs::path>& scores) {
  const ExperimentConfig cfg = load_run_config(root);
  RunManifest manifest = RunManifest::load(root);
  const fs::path score_path = scores.value_or(root / "diagnose" / "scores.csv");
  require_file(score_path, "run `diagnose` first");
  const ScoreTable table = ScoreTable::read_csv(score_path, cfg.train.score_k);
  const LabeledDataset data = read_dataset_csv(root / "dataset.csv");
  if (table.size() != data.size()) throw ShapeError("score table and dataset sizes differ");

  GanTrainer trainer = GanTrainer::load(root / "phase1" / "checkpoint", cfg.train);
  const fs::path dir = fresh_dir(root, "phase2");
  Stopwatch clock;
  trainer.run_phase2(data, SamplingDistribution(table.frequency, 1e-9));
  const double seconds = clock.seconds();
  trainer.write_history_csv(dir / "train_curve.csv");
  trainer.save(dir / "checkpoint");

  manifest.artifacts.push_back("phase2/train_curve.csv");
  manifest.checkpoints["phase2"] = "phase2/checkpoint";
  manifest.checkpoints["d_aux"] = "phase2/checkpoint/D_aux.ckpt";
  manifest.phases.push_back({"phase2", cfg.train.phase1_steps + 1, cfg.train.total_steps, seconds});
  manifest.save(root);
  return manifest;
}

DrsResult cmd_drs(const fs::path& root, std::size_t n) {
  const ExperimentConfig cfg = load_run_config(root);
  RunManifest manifest = RunManifest::load(root);
  bool from_phase2 = false;
  const GanTrainer trainer = latest_trainer(root, cfg, &from_phase2);
  const MlpNetwork& critic = from_phase2 && trainer.model().aux ? *trainer.model().aux : trainer.model().discriminator;
  const fs::path dir = fresh_dir(root, "drs");
  Stopwatch clock;

  RngStream rng(cfg.seed, StreamId::drs);
  const auto source = generator_source(trainer.model().generator);
  const auto ldr_fn = discriminator_ldr_fn(critic);
  DrsResult result;
  if (n == 0) {
    result.samples = Matrix(0, 2);
  } else {
    const DrsState state = init_ldr_max(source, ldr_fn, rng, cfg.drs);
    result = sample_n(source, ldr_fn, n, state, rng, cfg.drs);
  }
  write_points_csv(result.samples, dir / "samples.csv");
  json report = n == 0 ? json{{"schema", "diagan.drs/1"}, {"requested", 0}} : drs_block(result);
  report["critic"] = from_phase2 ? "d_aux" : "phase1_discriminator";
  write_text_file(dir / "drs_report.json", report.dump(2) + "\n");

  manifest.artifacts.push_back("drs/samples.csv");
  manifest.artifacts.push_back("drs/drs_report.json");
  manifest.phases.push_back({"drs", 0, 0, clock.seconds()});
  manifest.save(root);
  return result;
}

namespace {

json evaluate_samples(const ExperimentConfig& cfg, const LabeledDataset& data, const Matrix& samples,
                      const LdrLog* log, const fs::path& dir, std::vector<std::string>* written) {
  json j;
  j["schema"] = kMetricsSchema;
  j["dataset"] = cfg.dataset.name;
  j["samples"] = samples.rows();
  j["real"] = data.size();
  const int k = cfg.eval.knn_k;
  const bool enough = samples.rows() > k && static_cast<Eigen::Index>(data.size()) > k;
  j["knn_k"] = k;
  j["precision"] = enough ? number(precision(samples, data.points, k)) : json(nullptr);
  j["recall"] = enough ? number(recall(data.points, samples, k)) : json(nullptr);
  j["frechet_distance"] = samples.rows() > 1 ? number(frechet_distance(data.points, samples).distance) : json(nullptr);

  const bool have_ldr = log && log->record_count() >= 2;
  std::vector<double> ldrm_values, ldrv_values;
  if (have_ldr) {
    ldrm_values = log->ldrm_all();
    ldrv_values = log->ldrv_all();
  }

  if (cfg.dataset.has_modes()) {
    const auto spec = GaussianMixtureSpec::twenty_five();
    ModeCoverageReport cov = high_quality_counts(samples, spec);
    const auto mode_ldrm = have_ldr ? per_mode_mean(data, ldrm_values, spec.centers.size())
                                    : std::vector<double>(spec.centers.size(), std::numeric_limits<double>::quiet_NaN());
    std::string csv = "mode_index,count,mean_ldrm\n";
    for (std::size_t m = 0; m < spec.centers.size(); ++m) {
      csv += std::to_string(m) + "," + std::to_string(cov.counts[m]) + "," + format_double(mode_ldrm[m]) + "\n";
    }
    write_text_file(dir / "mode_coverage.csv", csv);
    written->push_back("mode_coverage.csv");
    j["mode_coverage"] = {{"high_quality_total", cov.high_quality_total()},
                          {"high_quality_fraction",
                           samples.rows() ? static_cast<double>(cov.high_quality_total()) / static_cast<double>(samples.rows()) : 0.0},
                          {"modes_covered", cov.modes_covered(cfg.eval.covered_threshold)},
                          {"modes_dropped", cov.modes_dropped(cfg.eval.dropped_threshold)},
                          {"covered_threshold", cfg.eval.covered_threshold},
                          {"dropped_threshold", cfg.eval.dropped_threshold}};
  } else {
    std::string csv = "group,count,partial_recall,re_score\n";
    json groups = json::object();
    for (const Group g : {Group::major, Group::minor}) {
      const auto idx = data.indices_of(g);
      json entry;
      entry["count"] = idx.size();
      double pr = std::numeric_limits<double>::quiet_NaN();
      double re = std::numeric_limits<double>::quiet_NaN();
      if (!idx.empty() && enough) pr = partial_recall(data.rows(idx), samples, k);
      if (!idx.empty() && cfg.eval.reconstruction &&
          static_cast<std::size_t>(samples.rows()) >= AutoencoderConfig{}.min_training_samples) {
        AutoencoderConfig ae;
        ae.epochs = cfg.eval.re_epochs;
        ae.seed = cfg.seed;
        re = re_score(data.rows(idx), samples, ae);
      }
      entry["partial_recall"] = number(pr);
      entry["re_score"] = number(re);
      if (have_ldr && !idx.empty()) {
        double m = 0.0, v = 0.0;
        for (std::size_t i : idx) {
          m += ldrm_values[i];
          v += ldrv_values[i];
        }
        entry["mean_ldrm"] = m / static_cast<double>(idx.size());
        entry["mean_ldrv"] = v / static_cast<double>(idx.size());
      }
      groups[std::string(to_string(g))] = entry;
      csv += std::string(to_string(g)) + "," + std::to_string(idx.size()) + "," + format_double(pr) + "," +
             format_double(re) + "\n";
    }
    j["groups"] = groups;
    write_text_file(dir / "partial_recall.csv", csv);
    written->push_back("partial_recall.csv");
  }

  if (have_ldr) {
    std::string csv = "index,x,y,group,mode_index,ldrm,ldrv\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      csv += std::to_string(i) + "," + format_double(data.points(r, 0)) + "," + format_double(data.points(r, 1)) + "," +
             std::string(to_string(data.group[i])) + "," + std::to_string(data.mode_index[i]) + "," +
             format_double(ldrm_values[i]) + "," + format_double(ldrv_values[i]) + "\n";
    }
    write_text_file(dir / "ldr_statistics.csv", csv);
    written->push_back("ldr_statistics.csv");
  }
  return j;
}

}  // namespace

std::string cmd_evaluate(const fs::path& root, const std::optional<fs::path>& samples_path, const std::string& name) {
  const ExperimentConfig cfg = load_run_config(root);
  RunManifest manifest = RunManifest::load(root);
  const LabeledDataset data = read_dataset_csv(root / "dataset.csv");

  Matrix samples;
  std::string source;
  if (samples_path) {
    samples = read_points_csv(*samples_path);
    source = samples_path->string();
  } else if (fs::exists(root / "drs" / "samples.csv")) {
    samples = read_points_csv(root / "drs" / "samples.csv");
    source = "drs/samples.csv";
  } else {
    bool p2 = false;
    const GanTrainer trainer = latest_trainer(root, cfg, &p2);
    samples = evaluation_samples(trainer.model().generator, cfg.eval.samples, cfg.seed);
    source = p2 ? "phase2_generator" : "phase1_generator";
  }

  std::optional<LdrLog> log;
  if (fs::exists(root / "phase1" / "ldr_log.csv")) log = LdrLog::read_csv(root / "phase1" / "ldr_log.csv");

  const fs::path dir = fresh_dir(root, name);
  Stopwatch clock;
  std::vector<std::string> written;
  json j = evaluate_samples(cfg, data, samples, log ? &*log : nullptr, dir, &written);
  j["sample_source"] = source;
  const std::string text = j.dump(2) + "\n";
  write_text_file(dir / "metrics.json", text);
  written.push_back("metrics.json");

  for (const auto& w : written) manifest.artifacts.push_back(name + "/" + w);
  manifest.phases.push_back({name, 0, 0, clock.seconds()});
  manifest.save(root);
  return text;
}

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg_in, const fs::path& root, const std::vector<double>& ks,
                                const std::string& sort_by) {
  static const std::vector<std::string> columns = {"k", "frechet", "precision", "recall", "acceptance_rate"};
  if (std::find(columns.begin(), columns.end(), sort_by) == columns.end()) {
    throw ParameterError("unknown sort column '" + sort_by + "'");
  }
  if (ks.empty()) throw ParameterError("sweep needs at least one k");
  if (!fs::exists(root / "manifest.json")) cmd_train(cfg_in, root);

  const ExperimentConfig cfg = load_run_config(root);
  RunManifest manifest = RunManifest::load(root);
  const LabeledDataset data = read_dataset_csv(root / "dataset.csv");
  const LdrLog log = LdrLog::read_csv(root / "phase1" / "ldr_log.csv");
  const fs::path base = fresh_dir(root, "sweep");
  Stopwatch clock;

  std::vector<SweepRow> rows;
  for (double k : ks) {
    const std::string label = label_for_k(k);
    const fs::path dir = base / label;
    fs::create_directories(dir);
    const ScoreTable table = compute_scores(log, k, cfg.clip);
    table.write_csv(dir / "scores.csv");

    GanTrainer trainer = GanTrainer::load(root / "phase1" / "checkpoint", cfg.train);
    trainer.run_phase2(data, SamplingDistribution(table.frequency, 1e-9));
    RngStream rng(cfg.seed, StreamId::drs);
    const auto source = generator_source(trainer.model().generator);
    const auto ldr_fn = discriminator_ldr_fn(*trainer.model().aux);
    const DrsState state = init_ldr_max(source, ldr_fn, rng, cfg.drs);
    const DrsResult drs = sample_n(source, ldr_fn, cfg.eval.samples, state, rng, cfg.drs);
    write_points_csv(drs.samples, dir / "samples.csv");

    SweepRow row;
    row.k = k;
    row.frechet = frechet_distance(data.points, drs.samples).distance;
    row.precision = precision(drs.samples, data.points, cfg.eval.knn_k);
    row.recall = recall(data.points, drs.samples, cfg.eval.knn_k);
    row.acceptance_rate = drs.acceptance_rate();
    rows.push_back(row);

    json j{{"schema", "diagan.sweep_entry/1"}, {"k", k},           {"frechet_distance", row.frechet},
           {"precision", row.precision},      {"recall", row.recall}, {"drs", drs_block(drs)}};
    write_text_file(dir / "metrics.json", j.dump(2) + "\n");
    for (const char* f : {"scores.csv", "samples.csv", "metrics.json"}) {
      manifest.artifacts.push_back("sweep/" + label + "/" + f);
    }
  }

  const auto key = [&](const SweepRow& r) {
    if (sort_by == "frechet") return r.frechet;
    if (sort_by == "precision") return r.precision;
    if (sort_by == "recall") return r.recall;
    if (sort_by == "acceptance_rate") return r.acceptance_rate;
    return r.k;
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const SweepRow& a, const SweepRow& b) { return key(a) < key(b); });

  std::string csv = "k,frechet,precision,recall,acceptance_rate\n";
  for (const auto& r : rows) {
    csv += format_double(r.k) + "," + format_double(r.frechet) + "," + format_double(r.precision) + "," +
           format_double(r.recall) + "," + format_double(r.acceptance_rate) + "\n";
  }
  write_text_file(base / "sweep.csv", csv);
  manifest.artifacts.push_back("sweep/sweep.csv");
  manifest.phases.push_back({"sweep", cfg.train.phase1_steps + 1, cfg.train.total_steps, clock.seconds()});
  manifest.save(root);
  return rows;
}

std::string cmd_report(const fs::path& root) {
  const RunManifest manifest = RunManifest::load(root);
  json j;
  j["schema"] = "diagan.report/1";
  j["run"] = root.string();
  j["config_hash"] = manifest.config_hash;
  j["manifest_consistent"] = load_run_config(root).hash() == manifest.config_hash;
  j["missing_artifacts"] = manifest.missing_artifacts(root);
  auto phases = json::array();
  for (const auto& p : manifest.phases) phases.push_back({{"name", p.name}, {"seconds", p.seconds}});
  j["phases"] = phases;
  for (const auto& [key, file] : {std::pair{"diagnose", "diagnose/diagnose.json"},
                                  std::pair{"drs", "drs/drs_report.json"},
                                  std::pair{"evaluate", "evaluate/metrics.json"}}) {
    if (fs::exists(root / file)) j[key] = json::parse(read_text_file(root / file));
  }
  if (fs::exists(root / "sweep" / "sweep.csv")) j["sweep_table"] = "sweep/sweep.csv";
  return j.dump(2) + "\n";
}

}  // namespace diagan
