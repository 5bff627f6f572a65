#include "diagan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "diagan/errors.hpp"
#include "diagan/io.hpp"

namespace diagan {

std::string_view to_string(LossKind k) {
  return k == LossKind::hinge ? "hinge" : "ns";
}

LossKind loss_kind_from_string(std::string_view s) {
  if (s == "ns" || s == "non_saturating") return LossKind::non_saturating;
  if (s == "hinge") return LossKind::hinge;
  throw ParameterError("unknown loss '" + std::string(s) + "'");
}

std::string_view to_string(GeneratorObjective g) {
  switch (g) {
    case GeneratorObjective::standard: return "standard";
    case GeneratorObjective::topk: return "topk";
    case GeneratorObjective::gold: return "gold";
  }
  return "?";
}

GeneratorObjective generator_objective_from_string(std::string_view s) {
  if (s == "standard") return GeneratorObjective::standard;
  if (s == "topk") return GeneratorObjective::topk;
  if (s == "gold") return GeneratorObjective::gold;
  throw ParameterError("unknown generator objective '" + std::string(s) + "'");
}

std::vector<int> NetworkShape::generator_dims() const {
  std::vector<int> dims{latent_dim};
  for (int i = 0; i < hidden_layers; ++i) dims.push_back(hidden_width);
  dims.push_back(data_dim);
  return dims;
}

std::vector<int> NetworkShape::discriminator_dims() const {
  std::vector<int> dims{data_dim};
  for (int i = 0; i < hidden_layers; ++i) dims.push_back(hidden_width);
  dims.push_back(1);
  return dims;
}

TrainConfig TrainConfig::epochs(std::size_t dataset_size, std::size_t batch_size, long total_epochs,
                                double phase1_fraction, std::size_t window) {
  TrainConfig cfg;
  cfg.batch_size = batch_size;
  const long per_epoch = cfg.steps_per_epoch(dataset_size);
  const long phase1_epochs = std::lround(phase1_fraction * static_cast<double>(total_epochs));
  cfg.total_steps = total_epochs * per_epoch;
  cfg.phase1_steps = phase1_epochs * per_epoch;
  cfg.record_interval = per_epoch;
  cfg.record_start = std::max<long>(0, cfg.phase1_steps - static_cast<long>(window) * per_epoch);
  return cfg;
}

long TrainConfig::steps_per_epoch(std::size_t dataset_size) const {
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  return static_cast<long>((dataset_size + batch_size - 1) / batch_size);
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  if (total_steps < 0 || phase1_steps < 0 || phase1_steps > total_steps) {
    throw ParameterError("phase-1 steps must lie in [0, total_steps]");
  }
  if (record_start < 0 || record_start > phase1_steps) {
    throw ParameterError("LDR record start t_s must lie in [0, t1]");
  }
  if (record_interval <= 0) throw ParameterError("record interval must be positive");
  if (!(topk_fraction > 0.0 && topk_fraction <= 1.0)) throw ParameterError("top-k fraction must lie in (0, 1]");
  if (!(gold_max_ratio >= 1.0)) throw ParameterError("GOLD max ratio must be >= 1");
  if (!(lr_d > 0.0 && lr_g > 0.0)) throw ParameterError("learning rates must be positive");
  if (shape.hidden_width <= 0 || shape.hidden_layers < 0 || shape.latent_dim <= 0 || shape.data_dim <= 0) {
    throw ParameterError("invalid network shape");
  }
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Vector column(const Matrix& m) { return m.col(0); }

void require_head(const MlpNetwork& d, Activation expected, const char* what) {
  if (d.output_dim() != 1) throw ParameterError(std::string(what) + ": discriminator must have one output");
  if (d.output_activation() != expected) {
    throw ParameterError(std::string(what) + ": discriminator output activation must be " +
                         std::string(to_string(expected)));
  }
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw ShapeError("real and fake batches have different widths");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

DiscriminatorLoss discriminator_loss(const MlpNetwork& d, const Matrix& real, const Matrix& fake, LossKind kind) {
  if (real.rows() == 0 || fake.rows() == 0) throw ParameterError("discriminator loss: empty batch");
  GradientTape tape;
  d.forward(stack(real, fake), tape);
  const Vector z = column(tape.output_preactivation());
  const Vector zr = z.head(real.rows());
  const Vector zf = z.tail(fake.rows());
  const HeadLoss head =
      kind == LossKind::non_saturating ? ns_discriminator_head(zr, zf) : hinge_discriminator_head(zr, zf);
  Gradients g = d.backward_from_preactivation(tape, head.dlogit, GradientRequest::params_only);
  return {head.value, std::move(g.params)};
}

// Weighted per-fake generator loss sum_i c_i * l_i, where l_i = -log D_i (NS)
// or -D_i (hinge); returns value and d/dlogit.
HeadLoss weighted_generator_head(const Vector& z, std::span<const double> coeff, LossKind kind) {
  HeadLoss out;
  out.dlogit = Vector::Zero(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double c = coeff[static_cast<std::size_t>(i)];
    if (c == 0.0) continue;
    if (kind == LossKind::non_saturating) {
      const double p = sigmoid(z[i]);
      out.value -= c * std::log(clamp_probability(p));
      out.dlogit[i] = -c * (1.0 - p);
    } else {
      out.value -= c * z[i];
      out.dlogit[i] = -c;
    }
  }
  return out;
}

GeneratorLoss generator_loss(const MlpNetwork& d, const Matrix& fake, std::span<const double> coeff, LossKind kind) {
  GradientTape tape;
  d.forward(fake, tape);
  const HeadLoss head = weighted_generator_head(column(tape.output_preactivation()), coeff, kind);
  Gradients g = d.backward_from_preactivation(tape, head.dlogit, GradientRequest::input_only);
  return {head.value, std::move(g.input)};
}

Activation head_for(LossKind kind) {
  return kind == LossKind::non_saturating ? Activation::sigmoid : Activation::identity;
}

}  // namespace

HeadLoss ns_discriminator_head(const Vector& zr, const Vector& zf) {
  const auto br = static_cast<double>(zr.size());
  const auto bf = static_cast<double>(zf.size());
  HeadLoss out;
  out.dlogit.resize(zr.size() + zf.size());
  double sum_real = 0.0, sum_fake = 0.0;
  for (Eigen::Index i = 0; i < zr.size(); ++i) {
    const double p = sigmoid(zr[i]);
    sum_real += std::log(clamp_probability(p));
    out.dlogit[i] = -(1.0 - p) / br;
  }
  for (Eigen::Index i = 0; i < zf.size(); ++i) {
    const double p = sigmoid(zf[i]);
    sum_fake += std::log(1.0 - clamp_probability(p));
    out.dlogit[zr.size() + i] = p / bf;
  }
  out.value = sum_real / br + sum_fake / bf;
  return out;
}

HeadLoss ns_generator_head(const Vector& zf) {
  const std::vector<double> coeff(static_cast<std::size_t>(zf.size()), 1.0 / static_cast<double>(zf.size()));
  return weighted_generator_head(zf, coeff, LossKind::non_saturating);
}

HeadLoss hinge_discriminator_head(const Vector& dr, const Vector& df) {
  const auto br = static_cast<double>(dr.size());
  const auto bf = static_cast<double>(df.size());
  HeadLoss out;
  out.dlogit = Vector::Zero(dr.size() + df.size());
  double sum_real = 0.0, sum_fake = 0.0;
  for (Eigen::Index i = 0; i < dr.size(); ++i) {
    sum_real += std::min(0.0, -1.0 + dr[i]);
    if (dr[i] < 1.0) out.dlogit[i] = -1.0 / br;
  }
  for (Eigen::Index i = 0; i < df.size(); ++i) {
    sum_fake += std::min(0.0, -1.0 - df[i]);
    if (df[i] > -1.0) out.dlogit[dr.size() + i] = 1.0 / bf;
  }
  out.value = sum_real / br + sum_fake / bf;
  return out;
}

HeadLoss hinge_generator_head(const Vector& df) {
  const std::vector<double> coeff(static_cast<std::size_t>(df.size()), 1.0 / static_cast<double>(df.size()));
  return weighted_generator_head(df, coeff, LossKind::hinge);
}

std::vector<double> gold_weights(std::span<const double> fake_ldr, double max_ratio) {
  if (fake_ldr.empty()) return {};
  // exp(l - max) keeps every weight in (0, 1]; the ratio cap and mean
  // normalization are invariant to that shift.
  const double top = *std::max_element(fake_ldr.begin(), fake_ldr.end());
  std::vector<double> w(fake_ldr.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(fake_ldr[i] - top);
  const double cap = max_ratio * *std::min_element(w.begin(), w.end());
  for (double& v : w) v = std::min(v, cap);
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  for (double& v : w) v /= mean;
  return w;
}

std::vector<std::size_t> topk_indices(const Vector& d_fake, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("top-k fraction must lie in (0, 1]");
  const auto b = static_cast<std::size_t>(d_fake.size());
  const auto k = std::min(b, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(b) - 1e-12)));
  std::vector<std::size_t> order(b);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    return d_fake[static_cast<Eigen::Index>(a)] > d_fake[static_cast<Eigen::Index>(c)];
  });
  order.resize(std::max<std::size_t>(k, 1));
  return order;
}

DiscriminatorLoss d_loss_ns(const MlpNetwork& d, const Matrix& real, const Matrix& fake) {
  require_head(d, Activation::sigmoid, "d_loss_ns");
  return discriminator_loss(d, real, fake, LossKind::non_saturating);
}

DiscriminatorLoss d_loss_hinge(const MlpNetwork& d, const Matrix& real, const Matrix& fake) {
  require_head(d, Activation::identity, "d_loss_hinge");
  return discriminator_loss(d, real, fake, LossKind::hinge);
}

GeneratorLoss g_loss_ns(const MlpNetwork& d, const Matrix& fake) {
  require_head(d, Activation::sigmoid, "g_loss_ns");
  const std::vector<double> coeff(static_cast<std::size_t>(fake.rows()), 1.0 / static_cast<double>(fake.rows()));
  return generator_loss(d, fake, coeff, LossKind::non_saturating);
}

GeneratorLoss g_loss_hinge(const MlpNetwork& d, const Matrix& fake) {
  require_head(d, Activation::identity, "g_loss_hinge");
  const std::vector<double> coeff(static_cast<std::size_t>(fake.rows()), 1.0 / static_cast<double>(fake.rows()));
  return generator_loss(d, fake, coeff, LossKind::hinge);
}

GeneratorLoss topk_g_loss(const MlpNetwork& d, const Matrix& fake, double fraction, LossKind kind) {
  require_head(d, head_for(kind), "topk_g_loss");
  const Vector out = column(d.forward(fake));
  const auto chosen = topk_indices(out, fraction);
  std::vector<double> coeff(static_cast<std::size_t>(fake.rows()), 0.0);
  for (std::size_t i : chosen) coeff[i] = 1.0 / static_cast<double>(chosen.size());
  return generator_loss(d, fake, coeff, kind);
}

GeneratorLoss gold_g_loss(const MlpNetwork& d, const Matrix& fake, double max_ratio, LossKind kind) {
  require_head(d, head_for(kind), "gold_g_loss");
  const Vector ldr_values = discriminator_ldr(d, fake);
  auto weights = gold_weights(std::span<const double>(ldr_values.data(), ldr_values.size()), max_ratio);
  for (double& w : weights) w /= static_cast<double>(weights.size());
  return generator_loss(d, fake, weights, kind);
}

Vector discriminator_ldr(const MlpNetwork& d, const Matrix& points) {
  const Vector out = column(d.forward(points));
  if (d.output_activation() != Activation::sigmoid) return out;
  Vector ldr_values(out.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) ldr_values[i] = clamped_ldr(out[i]);
  return ldr_values;
}

GanModel GanModel::create(const TrainConfig& cfg) {
  cfg.validate();
  RngStream g_rng(cfg.seed, StreamId::init_generator);
  RngStream d_rng(cfg.seed, StreamId::init_discriminator);
  GanModel m;
  m.generator = MlpNetwork::kaiming(cfg.shape.generator_dims(), Activation::relu, Activation::identity, g_rng);
  m.discriminator = MlpNetwork::kaiming(cfg.shape.discriminator_dims(), Activation::relu, head_for(cfg.loss), d_rng);
  m.opt_g = AdamState(m.generator.parameter_count(), cfg.adam);
  m.opt_d = AdamState(m.discriminator.parameter_count(), cfg.adam);
  return m;
}

Matrix GanModel::generate(std::size_t n, RngStream& rng) const {
  Matrix z(static_cast<Eigen::Index>(n), generator.input_dim());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
  }
  return generator.forward(z);
}

GanTrainer::GanTrainer(GanModel model, TrainConfig cfg)
    : model_(std::move(model)),
      cfg_(cfg),
      real_rng_(cfg.seed, StreamId::real_batches),
      latent_rng_(cfg.seed, StreamId::latents),
      aux_rng_(cfg.seed, StreamId::aux_batches) {
  cfg_.validate();
}

double GanTrainer::current_lr(double base) const {
  return cfg_.lr_decay ? linear_lr_decay(step_ - 1, cfg_.total_steps, base) : base;
}

void GanTrainer::train_step(const Matrix& data, const SamplingDistribution& dist, bool train_aux) {
  ++step_;
  const std::size_t b = cfg_.batch_size;
  const auto rows = [&](const std::vector<std::size_t>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), data.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(idx[i]));
    return out;
  };

  const Matrix real = rows(draw_batch(dist, b, real_rng_));
  Matrix z(static_cast<Eigen::Index>(b), cfg_.shape.latent_dim);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = latent_rng_.normal();
  }
  const Matrix fake = model_.generator.forward(z);

  StepRecord rec;
  rec.step = step_;
  rec.lr = current_lr(cfg_.lr_d);

  // Discriminator ascends V_D.
  const DiscriminatorLoss dl = discriminator_loss(model_.discriminator, real, fake, cfg_.loss);
  if (!std::isfinite(dl.objective)) throw TrainingDivergence("non-finite discriminator loss", step_);
  adam_step(model_.opt_d, model_.discriminator, dl.grads, rec.lr);
  rec.d_loss = -dl.objective;

  // Generator descends V_G against the updated discriminator, same latents.
  GradientTape g_tape;
  const Matrix fake_g = model_.generator.forward(z, g_tape);
  GeneratorLoss gl;
  const auto uniform_coeff = std::vector<double>(b, 1.0 / static_cast<double>(b));
  switch (cfg_.objective) {
    case GeneratorObjective::standard:
      gl = generator_loss(model_.discriminator, fake_g, uniform_coeff, cfg_.loss);
      break;
    case GeneratorObjective::topk:
      gl = topk_g_loss(model_.discriminator, fake_g, cfg_.topk_fraction, cfg_.loss);
      break;
    case GeneratorObjective::gold:
      gl = gold_g_loss(model_.discriminator, fake_g, cfg_.gold_max_ratio, cfg_.loss);
      break;
  }
  if (!std::isfinite(gl.loss)) throw TrainingDivergence("non-finite generator loss", step_);
  const Gradients gg = model_.generator.backward(g_tape, gl.fake_grad, GradientRequest::params_only);
  adam_step(model_.opt_g, model_.generator, gg.params, current_lr(cfg_.lr_g));
  rec.g_loss = gl.loss;

  if (train_aux) {
    const Matrix aux_real = rows(draw_batch(SamplingDistribution::uniform(static_cast<std::size_t>(data.rows())), b, aux_rng_));
    const DiscriminatorLoss al = discriminator_loss(*model_.aux, aux_real, fake, cfg_.loss);
    if (!std::isfinite(al.objective)) throw TrainingDivergence("non-finite auxiliary discriminator loss", step_);
    adam_step(model_.opt_aux, *model_.aux, al.grads, rec.lr);
    rec.aux_loss = -al.objective;
  }
  history_.push_back(rec);
}

LdrLog GanTrainer::run_phase1(const LabeledDataset& data) {
  if (step_ != 0) throw ContractViolation("run_phase1: trainer already advanced past step 0");
  if (data.points.cols() != cfg_.shape.data_dim) throw ShapeError("dataset dimension does not match network");
  LdrLog log(data.size());
  const auto uniform = SamplingDistribution::uniform(data.size());
  while (step_ < cfg_.phase1_steps) {
    train_step(data.points, uniform, false);
    if (step_ > cfg_.record_start && (step_ - cfg_.record_start) % cfg_.record_interval == 0) {
      log.append(step_, record_ldr(data.points));
    }
  }
  return log;
}

void GanTrainer::run_phase2(const LabeledDataset& data, const SamplingDistribution& weighted) {
  if (step_ != cfg_.phase1_steps) throw ContractViolation("run_phase2: phase 1 has not completed");
  if (weighted.size() != data.size()) throw ContractViolation("run_phase2: sampling distribution size mismatch");
  if (!model_.aux) {
    model_.aux = model_.discriminator;
    model_.opt_aux = model_.opt_d;
  }
  while (step_ < cfg_.total_steps) train_step(data.points, weighted, true);
}

void GanTrainer::run_plain_phase2(const LabeledDataset& data, const SamplingDistribution& dist) {
  if (step_ != cfg_.phase1_steps) throw ContractViolation("run_plain_phase2: phase 1 has not completed");
  if (dist.size() != data.size()) throw ContractViolation("run_plain_phase2: sampling distribution size mismatch");
  while (step_ < cfg_.total_steps) train_step(data.points, dist, false);
}

void GanTrainer::write_history_csv(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << "step,d_loss,g_loss,lr\n";
  for (const auto& r : history_) {
    out << r.step << ',' << format_double(r.d_loss) << ',' << format_double(r.g_loss) << ','
        << format_double(r.lr) << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

void write_rng(std::ostream& out, const char* name, const RngStream::State& s) {
  out << "rng " << name << ' ' << s.seed << ' ' << s.stream << ' ' << s.block << ' ' << s.lane << ' '
      << (s.has_spare_normal ? 1 : 0) << ' ' << format_double(s.spare_normal) << '\n';
}

RngStream::State read_rng(std::istream& in, const std::string& name) {
  std::string tag, got, spare;
  RngStream::State s;
  int has_spare = 0;
  if (!(in >> tag >> got >> s.seed >> s.stream >> s.block >> s.lane >> has_spare >> spare) || tag != "rng" ||
      got != name) {
    throw IoError("malformed trainer state: rng " + name);
  }
  s.has_spare_normal = has_spare != 0;
  s.spare_normal = parse_double(spare);
  return s;
}

void write_adam(std::ostream& out, const char* name, const AdamState& a) {
  out << "adam " << name << ' ' << a.step << ' ' << format_double(a.hyper.beta1) << ' '
      << format_double(a.hyper.beta2) << ' ' << format_double(a.hyper.epsilon) << ' ' << a.m.size() << '\n';
  for (Eigen::Index i = 0; i < a.m.size(); ++i) out << format_double(a.m[i]) << ' ' << format_double(a.v[i]) << '\n';
}

AdamState read_adam(std::istream& in, const std::string& name) {
  std::string tag, got, b1, b2, eps;
  AdamState a;
  Eigen::Index size = 0;
  if (!(in >> tag >> got >> a.step >> b1 >> b2 >> eps >> size) || tag != "adam" || got != name) {
    throw IoError("malformed trainer state: adam " + name);
  }
  a.hyper = {parse_double(b1), parse_double(b2), parse_double(eps)};
  a.m.resize(size);
  a.v.resize(size);
  std::string m, v;
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!(in >> m >> v)) throw IoError("malformed trainer state: truncated moments");
    a.m[i] = parse_double(m);
    a.v[i] = parse_double(v);
  }
  return a;
}

}  // namespace

void GanTrainer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  model_.generator.save(dir / "G.ckpt");
  model_.discriminator.save(dir / "D.ckpt");
  if (model_.aux) model_.aux->save(dir / "D_aux.ckpt");

  std::ostringstream out;
  out << "diagan-trainer 1\nstep " << step_ << '\n';
  write_rng(out, "real", real_rng_.state());
  write_rng(out, "latent", latent_rng_.state());
  write_rng(out, "aux", aux_rng_.state());
  write_adam(out, "g", model_.opt_g);
  write_adam(out, "d", model_.opt_d);
  if (model_.aux) write_adam(out, "aux", model_.opt_aux);
  out << "history " << history_.size() << '\n';
  for (const auto& r : history_) {
    out << r.step << ' ' << format_double(r.d_loss) << ' ' << format_double(r.g_loss) << ' '
        << format_double(r.lr) << ' ' << format_double(r.aux_loss) << '\n';
  }
  write_text_file(dir / "trainer_state.txt", out.str());
}

GanTrainer GanTrainer::load(const std::filesystem::path& dir, const TrainConfig& cfg) {
  GanModel model;
  model.generator = MlpNetwork::load(dir / "G.ckpt");
  model.discriminator = MlpNetwork::load(dir / "D.ckpt");
  const bool has_aux = std::filesystem::exists(dir / "D_aux.ckpt");
  if (has_aux) model.aux = MlpNetwork::load(dir / "D_aux.ckpt");

  std::ifstream in(dir / "trainer_state.txt");
  if (!in) throw IoError("cannot open " + (dir / "trainer_state.txt").string());
  std::string tag;
  long version = 0, step = 0;
  if (!(in >> tag >> version) || tag != "diagan-trainer" || version != 1) throw IoError("bad trainer state header");
  if (!(in >> tag >> step) || tag != "step") throw IoError("bad trainer state step");
  const auto real = read_rng(in, "real");
  const auto latent = read_rng(in, "latent");
  const auto aux = read_rng(in, "aux");
  model.opt_g = read_adam(in, "g");
  model.opt_d = read_adam(in, "d");
  if (has_aux) model.opt_aux = read_adam(in, "aux");

  GanTrainer trainer(std::move(model), cfg);
  trainer.step_ = step;
  trainer.real_rng_ = RngStream(real);
  trainer.latent_rng_ = RngStream(latent);
  trainer.aux_rng_ = RngStream(aux);
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "history") throw IoError("bad trainer state history");
  for (std::size_t i = 0; i < count; ++i) {
    StepRecord r;
    std::string d, g, lr, a;
    if (!(in >> r.step >> d >> g >> lr >> a)) throw IoError("truncated trainer history");
    r.d_loss = parse_double(d);
    r.g_loss = parse_double(g);
    r.lr = parse_double(lr);
    r.aux_loss = parse_double(a);
    trainer.history_.push_back(r);
  }
  return trainer;
}

}  // namespace diagan
