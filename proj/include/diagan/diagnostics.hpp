#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "diagan/numcore.hpp"
#include "diagan/rng.hpp"

namespace diagan {

/// Log-density-ratio estimate log(D / (1 - D)). Throws DomainError unless 0 < d < 1.
double ldr(double d_output);

/// LDR of a discriminator output after the probability clamp.
inline double clamped_ldr(double d_output) { return ldr(clamp_probability(d_output)); }

/// Sample mean of a recorded LDR row.
double ldrm(std::span<const double> row);
/// Sample variance with the |T| - 1 denominator. Throws InsufficientWindow when |T| < 2.
double ldrv(std::span<const double> row);

/// s = LDRM + k * sqrt(LDRV).
double discrepancy_score(double ldrm_value, double ldrv_value, double k);

/// Same scoring rule applied to raw hinge-discriminator outputs.
double hinge_statistics(std::span<const double> dh_row, double k);

struct ClipRule {
  double floor = 0.01;      // min_clip epsilon
  double max_ratio = 50.0;  // max(s') / min(s')
};

/// Floors every score at rule.floor, then caps at rule.max_ratio times the
/// smallest floored score.
std::vector<double> clip_scores(std::span<const double> raw, ClipRule rule = {});

/// P_s(i) = s'(i) / sum_j s'(j).
std::vector<double> sampling_frequency(std::span<const double> clipped);

/// Per-sample LDR values recorded at a sequence of training steps.
class LdrLog {
 public:
  LdrLog() = default;
  explicit LdrLog(std::size_t sample_count) : n_(sample_count) {}

  std::size_t sample_count() const noexcept { return n_; }
  std::size_t record_count() const noexcept { return steps_.size(); }
  const std::vector<long>& steps() const noexcept { return steps_; }

  /// Appends one record (one value per sample) taken at `step`.
  void append(long step, const Vector& values);

  double value(std::size_t sample, std::size_t record) const { return columns_[record][static_cast<Eigen::Index>(sample)]; }
  const Vector& record(std::size_t k) const { return columns_[k]; }
  std::vector<double> row(std::size_t sample) const;

  /// Keeps only the last `window` records (0 keeps all).
  LdrLog last(std::size_t window) const;

  std::vector<double> ldrm_all() const;
  std::vector<double> ldrv_all() const;

  /// CSV: header "sample,<step>,<step>,...", one row per sample.
  void write_csv(const std::filesystem::path& path) const;
  static LdrLog read_csv(const std::filesystem::path& path);

  bool operator==(const LdrLog& other) const;

 private:
  std::size_t n_ = 0;
  std::vector<long> steps_;
  std::vector<Vector> columns_;
};

/// Per-sample raw, clipped score and sampling frequency.
struct ScoreTable {
  double k = 0.0;
  std::vector<double> raw;
  std::vector<double> clipped;
  std::vector<double> frequency;

  std::size_t size() const { return raw.size(); }

  /// CSV with columns index,raw,clipped,p_s.
  void write_csv(const std::filesystem::path& path) const;
  static ScoreTable read_csv(const std::filesystem::path& path, double k);
};

/// Scores every sample of the log: LDRM + k * sqrt(LDRV), then clip and normalize.
ScoreTable compute_scores(const LdrLog& log, double k, ClipRule rule = {});

/// Preset list of k values swept for the discrepancy score.
inline const std::vector<double> kScoreSweep = {0.3, 0.5, 1.0, 3.0, 5.0, 7.0};

/// Categorical distribution over dataset indices, sampled by inverse CDF.
class SamplingDistribution {
 public:
  /// Throws ContractViolation if weights are negative or do not sum to 1 within `tolerance`.
  explicit SamplingDistribution(std::span<const double> probabilities, double tolerance = 1e-9);
  static SamplingDistribution uniform(std::size_t n);

  std::size_t size() const noexcept { return cdf_.size(); }
  double probability(std::size_t i) const;

  std::size_t draw(RngStream& rng) const;

 private:
  SamplingDistribution() = default;
  std::vector<double> cdf_;
};

/// B i.i.d. draws with replacement.
std::vector<std::size_t> draw_batch(const SamplingDistribution& dist, std::size_t batch_size, RngStream& rng);

}  // namespace diagan
