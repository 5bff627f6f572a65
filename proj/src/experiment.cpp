#include "diagan/experiment.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "diagan/errors.hpp"
#include "diagan/io.hpp"

namespace diagan {

LabeledDataset DatasetSpec::generate() const {
  if (name == "single_gaussian") return gen_single_gaussian(sigma, size, seed);
  if (name == "twenty_five_gaussians") return gen_25_gaussians(size, seed);
  throw ParameterError("unknown dataset '" + name + "'");
}

namespace {

std::string bool_text(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParameterError("expected a boolean, got '" + v + "'");
}

std::size_t parse_size(const std::string& v) {
  const long x = parse_long(v);
  if (x < 0) throw ParameterError("expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

std::uint64_t parse_u64(const std::string& v) {
  const std::string_view t = trim(v);
  std::uint64_t x = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
  if (r.ec != std::errc{} || r.ptr != t.data() + t.size()) throw ParameterError("expected an unsigned integer, got '" + v + "'");
  return x;
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define DIAGAN_DOUBLE(KEY, MEMBER)                                                        \
  Field {                                                                                 \
    KEY, [](const ExperimentConfig& c) { return format_double(c.MEMBER); },               \
        [](ExperimentConfig& c, const std::string& v) { c.MEMBER = parse_double(v); }      \
  }
#define DIAGAN_SIZE(KEY, MEMBER)                                                          \
  Field {                                                                                 \
    KEY, [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); },              \
        [](ExperimentConfig& c, const std::string& v) { c.MEMBER = static_cast<decltype(c.MEMBER)>(parse_size(v)); } \
  }
#define DIAGAN_BOOL(KEY, MEMBER)                                                          \
  Field {                                                                                 \
    KEY, [](const ExperimentConfig& c) { return bool_text(c.MEMBER); },                   \
        [](ExperimentConfig& c, const std::string& v) { c.MEMBER = parse_bool(v); }        \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
            [](ExperimentConfig& c, const std::string& v) {
              c.seed = parse_u64(v);
              c.seed_set = true;
            }},
      Field{"dataset", [](const ExperimentConfig& c) { return c.dataset.name; },
            [](ExperimentConfig& c, const std::string& v) {
              if (v != "single_gaussian" && v != "twenty_five_gaussians") throw ParameterError("unknown dataset '" + v + "'");
              c.dataset.name = v;
            }},
      DIAGAN_DOUBLE("dataset.sigma", dataset.sigma),
      DIAGAN_SIZE("dataset.size", dataset.size),
      Field{"dataset.seed", [](const ExperimentConfig& c) { return std::to_string(c.dataset.seed); },
            [](ExperimentConfig& c, const std::string& v) { c.dataset.seed = parse_u64(v); }},
      DIAGAN_SIZE("train.epochs", epochs),
      DIAGAN_DOUBLE("train.phase1_fraction", phase1_fraction),
      DIAGAN_SIZE("train.window", window),
      DIAGAN_SIZE("train.batch_size", train.batch_size),
      Field{"train.loss", [](const ExperimentConfig& c) { return std::string(to_string(c.train.loss)); },
            [](ExperimentConfig& c, const std::string& v) { c.train.loss = loss_kind_from_string(v); }},
      Field{"train.objective", [](const ExperimentConfig& c) { return std::string(to_string(c.train.objective)); },
            [](ExperimentConfig& c, const std::string& v) { c.train.objective = generator_objective_from_string(v); }},
      DIAGAN_DOUBLE("train.topk_fraction", train.topk_fraction),
      DIAGAN_DOUBLE("train.gold_max_ratio", train.gold_max_ratio),
      DIAGAN_DOUBLE("train.lr_d", train.lr_d),
      DIAGAN_DOUBLE("train.lr_g", train.lr_g),
      DIAGAN_DOUBLE("train.beta1", train.adam.beta1),
      DIAGAN_DOUBLE("train.beta2", train.adam.beta2),
      DIAGAN_DOUBLE("train.adam_eps", train.adam.epsilon),
      DIAGAN_BOOL("train.lr_decay", train.lr_decay),
      DIAGAN_SIZE("net.hidden_width", train.shape.hidden_width),
      DIAGAN_SIZE("net.hidden_layers", train.shape.hidden_layers),
      DIAGAN_SIZE("net.latent_dim", train.shape.latent_dim),
      DIAGAN_DOUBLE("diag.k", train.score_k),
      DIAGAN_DOUBLE("diag.min_clip", clip.floor),
      DIAGAN_DOUBLE("diag.max_ratio", clip.max_ratio),
      DIAGAN_DOUBLE("drs.percentile", drs.gamma_percentile),
      DIAGAN_DOUBLE("drs.epsilon", drs.epsilon),
      DIAGAN_SIZE("drs.init_count", drs.init_count),
      DIAGAN_SIZE("drs.samples", drs_samples),
      DIAGAN_SIZE("drs.candidate_batch", drs.candidate_batch),
      DIAGAN_DOUBLE("drs.starvation_floor", drs.starvation_floor),
      DIAGAN_SIZE("drs.starvation_window", drs.starvation_window),
      DIAGAN_DOUBLE("bayes.s0", s0),
      DIAGAN_SIZE("eval.samples", eval.samples),
      DIAGAN_SIZE("eval.knn_k", eval.knn_k),
      DIAGAN_BOOL("eval.reconstruction", eval.reconstruction),
      DIAGAN_SIZE("eval.re_epochs", eval.re_epochs),
      DIAGAN_SIZE("eval.covered_threshold", eval.covered_threshold),
      DIAGAN_SIZE("eval.dropped_threshold", eval.dropped_threshold),
  };
  return table;
}

#undef DIAGAN_DOUBLE
#undef DIAGAN_SIZE
#undef DIAGAN_BOOL

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys{"preset"};
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig c;
  c.dataset.name = name;
  c.train.shape = NetworkShape{};
  if (name == "single_gaussian") {
    c.dataset.sigma = 3.0;
    c.dataset.size = 10000;
    c.epochs = 200;
    c.train.batch_size = 1024;
    c.train.lr_d = c.train.lr_g = 1e-3;
    c.train.adam = AdamHyper{0.5, 0.9, 1e-8};
  } else if (name == "twenty_five_gaussians") {
    c.dataset.size = 10000;
    c.epochs = 300;
    c.train.batch_size = 128;
    c.train.lr_d = c.train.lr_g = 2e-4;
    c.train.adam = AdamHyper{0.5, 0.999, 1e-8};
    c.train.score_k = 7.0;  // best mode coverage over the k sweep on held-out seeds
  } else {
    throw ParameterError("unknown preset '" + name + "'");
  }
  return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "preset") {
    const bool had_seed = seed_set;
    const auto s = seed;
    *this = preset(value);
    seed = s;
    seed_set = had_seed;
    return;
  }
  for (const auto& f : fields()) {
    if (f.key == key) {
      try {
        f.set(*this, value);
      } catch (const IoError& e) {
        throw ParameterError("config key '" + key + "': " + e.what());
      }
      if (key == "dataset.seed") dataset_seed_set_ = true;
      return;
    }
  }
  throw ParameterError("unknown config key '" + key + "'");
}

void ExperimentConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    const std::string_view body = trim(std::string_view(line).substr(0, hash_pos));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ParameterError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
  }
}

void ExperimentConfig::resolve() {
  if (!seed_set) throw ParameterError("a seed is required (set 'seed = <integer>')");
  if (!dataset_seed_set_) dataset.seed = seed;
  if (epochs < 0) throw ParameterError("train.epochs must be non-negative");
  if (!(phase1_fraction >= 0.0 && phase1_fraction <= 1.0)) throw ParameterError("train.phase1_fraction must lie in [0, 1]");
  if (dataset.size == 0) throw ParameterError("dataset.size must be positive");
  if (dataset.has_modes() && dataset.size % 25 != 0) throw ParameterError("dataset.size must be a multiple of 25");
  if (window < 2) throw ParameterError("train.window must be at least 2");

  const TrainConfig schedule = TrainConfig::epochs(dataset.size, train.batch_size, epochs, phase1_fraction, window);
  train.total_steps = schedule.total_steps;
  train.phase1_steps = schedule.phase1_steps;
  train.record_interval = schedule.record_interval;
  train.record_start = schedule.record_start;
  train.seed = seed;
  train.validate();
  if (!(clip.floor > 0.0) || !(clip.max_ratio >= 1.0)) throw ParameterError("invalid clip settings");
  if (!(drs.gamma_percentile > 0.0 && drs.gamma_percentile <= 1.0)) throw ParameterError("drs.percentile must lie in (0, 1]");
  if (!(s0 > 0.0)) throw ParameterError("bayes.s0 must be positive");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(*this) << '\n';
  return out.str();
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(to_text())); }

ExperimentConfig load_config(const std::string& text, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  cfg.apply_text(text);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ParameterError("override '" + o + "' must be key=value");
    cfg.set(std::string(trim(std::string_view(o).substr(0, eq))), std::string(trim(std::string_view(o).substr(eq + 1))));
  }
  cfg.resolve();
  return cfg;
}

}  // namespace diagan
