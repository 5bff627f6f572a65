#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "diagan/datasets.hpp"
#include "diagan/diagnostics.hpp"
#include "diagan/numcore.hpp"
#include "diagan/rng.hpp"

namespace diagan {

enum class LossKind { non_saturating, hinge };
enum class GeneratorObjective { standard, topk, gold };

std::string_view to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view s);
std::string_view to_string(GeneratorObjective g);
GeneratorObjective generator_objective_from_string(std::string_view s);

/// Layer layout shared by generator and discriminator: `hidden_layers` fully
/// connected ReLU layers of `hidden_width` units.
struct NetworkShape {
  int latent_dim = 2;
  int data_dim = 2;
  int hidden_width = 512;
  int hidden_layers = 3;

  std::vector<int> generator_dims() const;
  std::vector<int> discriminator_dims() const;
};

struct TrainConfig {
  std::size_t batch_size = 1024;
  long total_steps = 0;
  long phase1_steps = 0;    // t1; phase 2 runs t1+1 .. total_steps
  long record_start = 0;    // t_s; records are taken at t_s + j*interval, j >= 1, t <= t1
  long record_interval = 1;
  double score_k = 1.0;
  LossKind loss = LossKind::non_saturating;
  GeneratorObjective objective = GeneratorObjective::standard;
  double topk_fraction = 0.5;
  double gold_max_ratio = 50.0;
  AdamHyper adam{0.5, 0.999, 1e-8};
  double lr_d = 2e-4;
  double lr_g = 2e-4;
  bool lr_decay = false;
  NetworkShape shape;
  std::uint64_t seed = 0;

  /// Epoch-based schedule: one epoch = ceil(n / batch) steps, phase 1 takes
  /// `phase1_fraction` of the epochs and LDR is recorded at the end of each of
  /// the last `window` phase-1 epochs.
  static TrainConfig epochs(std::size_t dataset_size, std::size_t batch_size, long total_epochs,
                            double phase1_fraction, std::size_t window);

  long steps_per_epoch(std::size_t dataset_size) const;
  /// Throws ParameterError when the schedule is inconsistent.
  void validate() const;
};

/// Scalar objective value together with its gradient w.r.t. the output
/// pre-activation of every row (the logit for a sigmoid discriminator).
struct HeadLoss {
  double value = 0.0;
  Vector dlogit;
};

/// V_D = mean log D(x) + mean log(1 - D(G(z))) on clamped probabilities.
/// `dlogit` is the gradient of -V_D, real rows first, then fake rows.
HeadLoss ns_discriminator_head(const Vector& logit_real, const Vector& logit_fake);
/// Generator loss -mean log D(G(z)).
HeadLoss ns_generator_head(const Vector& logit_fake);
/// V_D = mean min(0, -1 + D(x)) + mean min(0, -1 - D(G(z))); gradient of -V_D.
HeadLoss hinge_discriminator_head(const Vector& d_real, const Vector& d_fake);
/// V_G = -mean D(G(z)).
HeadLoss hinge_generator_head(const Vector& d_fake);

/// Per-fake weights of the unconditional GOLD baseline: exp(LDR) capped at
/// `max_ratio` times the smallest weight, then normalized to mean 1.
std::vector<double> gold_weights(std::span<const double> fake_ldr, double max_ratio = 50.0);

/// Indices of the ceil(fraction * B) fakes with the largest discriminator output.
std::vector<std::size_t> topk_indices(const Vector& d_fake, double fraction);

struct DiscriminatorLoss {
  double objective = 0.0;  // V_D
  Vector grads;            // gradient of -V_D w.r.t. discriminator parameters
};

struct GeneratorLoss {
  double loss = 0.0;
  Matrix fake_grad;  // d loss / d fake batch
};

DiscriminatorLoss d_loss_ns(const MlpNetwork& d, const Matrix& real, const Matrix& fake);
DiscriminatorLoss d_loss_hinge(const MlpNetwork& d, const Matrix& real, const Matrix& fake);
GeneratorLoss g_loss_ns(const MlpNetwork& d, const Matrix& fake);
GeneratorLoss g_loss_hinge(const MlpNetwork& d, const Matrix& fake);
/// Generator loss over the top ceil(fraction * B) fakes only.
GeneratorLoss topk_g_loss(const MlpNetwork& d, const Matrix& fake, double fraction,
                          LossKind kind = LossKind::non_saturating);
/// GOLD-weighted generator loss.
GeneratorLoss gold_g_loss(const MlpNetwork& d, const Matrix& fake, double max_ratio = 50.0,
                          LossKind kind = LossKind::non_saturating);

/// Per-point LDR under a discriminator: logit of the clamped sigmoid output,
/// or the raw output for a hinge (identity-head) discriminator.
Vector discriminator_ldr(const MlpNetwork& d, const Matrix& points);

struct GanModel {
  MlpNetwork generator;
  MlpNetwork discriminator;
  std::optional<MlpNetwork> aux;
  AdamState opt_g;
  AdamState opt_d;
  AdamState opt_aux;

  static GanModel create(const TrainConfig& cfg);
  Matrix generate(std::size_t n, RngStream& rng) const;
};

struct StepRecord {
  long step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double lr = 0.0;
  double aux_loss = 0.0;
};

/// Alternating D/G training with one D update then one G update per step.
/// Owns the model and every random stream used during training, so a run can
/// be stopped between phases, saved, and resumed bit-exactly.
class GanTrainer {
 public:
  GanTrainer(GanModel model, TrainConfig cfg);
  explicit GanTrainer(const TrainConfig& cfg) : GanTrainer(GanModel::create(cfg), cfg) {}

  /// Steps 1..t1 with uniform batches; returns LDR records of every point.
  LdrLog run_phase1(const LabeledDataset& data);

  /// Steps t1+1..total with batches from `weighted`; D_aux (a copy of D at the
  /// start of phase 2) trains on uniform batches against the same fakes.
  void run_phase2(const LabeledDataset& data, const SamplingDistribution& weighted);

  /// Phase-2 schedule without the auxiliary discriminator: the baseline that
  /// keeps training on `dist` for the same number of steps.
  void run_plain_phase2(const LabeledDataset& data, const SamplingDistribution& dist);

  Vector record_ldr(const Matrix& points) const { return discriminator_ldr(model_.discriminator, points); }

  const GanModel& model() const noexcept { return model_; }
  GanModel& model() noexcept { return model_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  long current_step() const noexcept { return step_; }
  const std::vector<StepRecord>& history() const noexcept { return history_; }

  void write_history_csv(const std::filesystem::path& path) const;

  /// Networks, optimizer moments, random stream positions and step counter.
  void save(const std::filesystem::path& dir) const;
  static GanTrainer load(const std::filesystem::path& dir, const TrainConfig& cfg);

 private:
  void train_step(const Matrix& data, const SamplingDistribution& dist, bool train_aux);
  double current_lr(double base) const;

  GanModel model_;
  TrainConfig cfg_;
  long step_ = 0;
  RngStream real_rng_;
  RngStream latent_rng_;
  RngStream aux_rng_;
  std::vector<StepRecord> history_;
};

}  // namespace diagan
