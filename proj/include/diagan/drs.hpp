#pragma once

#include <filesystem>
#include <functional>
#include <span>

#include "diagan/numcore.hpp"
#include "diagan/rng.hpp"

namespace diagan {

/// Running state of discriminator rejection sampling.
struct DrsState {
  double ldr_max = 0.0;  // LDR_M = log M, only ever increases
  double gamma = 0.0;    // offset subtracted from F-hat
  double epsilon = 1e-6;
  std::size_t init_sample_count = 12800;

  /// Raise ldr_max to `ldr` if larger; returns true when it moved.
  bool observe(double ldr);
};

struct DrsOptions {
  double gamma_percentile = 0.8;
  double epsilon = 1e-6;
  std::size_t init_count = 12800;
  std::size_t candidate_batch = 256;
  double starvation_floor = 1e-4;
  std::size_t starvation_window = 200000;  // proposals per acceptance-rate check
};

/// F-hat(x) = LDR(x) - LDR_M - log(1 - exp(LDR(x) - LDR_M - eps)) - gamma.
/// Throws ContractViolation if ldr_x exceeds state.ldr_max.
double f_hat(double ldr_x, const DrsState& state);

/// Accept iff u < sigmoid(f_hat_value).
bool accept(double f_hat_value, double u);

/// Nearest-rank percentile: the ceil(q * n)-th smallest element (1-based).
double nearest_rank_percentile(std::span<const double> values, double q);

/// ldr_max = max of the pool; gamma = percentile of F-hat over the same pool
/// evaluated with gamma = 0.
DrsState init_from_ldrs(std::span<const double> pool_ldr, const DrsOptions& options = {});

/// Candidate generator: n samples, one per row.
using CandidateSource = std::function<Matrix(std::size_t n, RngStream& rng)>;
/// Discriminator LDR for each row.
using LdrFunction = std::function<Vector(const Matrix& samples)>;

DrsState init_ldr_max(const CandidateSource& source, const LdrFunction& ldr_fn, RngStream& rng,
                      const DrsOptions& options = {});

struct DrsResult {
  Matrix samples;
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
  DrsState final_state;
  double initial_ldr_max = 0.0;
};

/// Draws candidates until exactly `n` are accepted. A candidate whose LDR
/// exceeds the running maximum first raises the maximum, then is evaluated.
/// Throws StarvationError when a full window of proposals has an acceptance
/// rate below options.starvation_floor.
DrsResult sample_n(const CandidateSource& source, const LdrFunction& ldr_fn, std::size_t n, DrsState state,
                   RngStream& rng, const DrsOptions& options = {});

/// Convenience wrappers over a trained generator and auxiliary discriminator.
CandidateSource generator_source(const MlpNetwork& generator);
LdrFunction discriminator_ldr_fn(const MlpNetwork& discriminator);

/// Run report as JSON: acceptance rate, counts, initial and final ldr_max, gamma.
std::string drs_report_json(const DrsResult& result);

}  // namespace diagan
