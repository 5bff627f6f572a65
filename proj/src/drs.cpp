#include "diagan/drs.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "diagan/errors.hpp"
#include "diagan/gan.hpp"
#include "diagan/io.hpp"

namespace diagan {

bool DrsState::observe(double ldr) {
  if (ldr > ldr_max) {
    ldr_max = ldr;
    return true;
  }
  return false;
}

double f_hat(double ldr_x, const DrsState& state) {
  if (ldr_x > state.ldr_max) {
    throw ContractViolation("f_hat: LDR " + format_double(ldr_x) + " exceeds running maximum " +
                            format_double(state.ldr_max));
  }
  const double delta = ldr_x - state.ldr_max;
  return delta - std::log1p(-std::exp(delta - state.epsilon)) - state.gamma;
}

bool accept(double f_hat_value, double u) {
  return u < 1.0 / (1.0 + std::exp(-f_hat_value));
}

double nearest_rank_percentile(std::span<const double> values, double q) {
  if (values.empty()) throw ParameterError("percentile of an empty pool");
  if (!(q > 0.0 && q <= 1.0)) throw ParameterError("percentile must lie in (0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

DrsState init_from_ldrs(std::span<const double> pool_ldr, const DrsOptions& options) {
  if (pool_ldr.empty()) throw ParameterError("init_ldr_max: empty pool");
  if (!(options.epsilon > 0.0)) throw ParameterError("DRS epsilon must be positive");
  DrsState state;
  state.epsilon = options.epsilon;
  state.init_sample_count = pool_ldr.size();
  state.ldr_max = *std::max_element(pool_ldr.begin(), pool_ldr.end());
  state.gamma = 0.0;
  std::vector<double> f(pool_ldr.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = f_hat(pool_ldr[i], state);
  state.gamma = nearest_rank_percentile(f, options.gamma_percentile);
  return state;
}

DrsState init_ldr_max(const CandidateSource& source, const LdrFunction& ldr_fn, RngStream& rng,
                      const DrsOptions& options) {
  if (options.init_count == 0) throw ParameterError("init_ldr_max: count must be positive");
  const Vector ldr_values = ldr_fn(source(options.init_count, rng));
  return init_from_ldrs(std::span<const double>(ldr_values.data(), ldr_values.size()), options);
}

DrsResult sample_n(const CandidateSource& source, const LdrFunction& ldr_fn, std::size_t n, DrsState state,
                   RngStream& rng, const DrsOptions& options) {
  DrsResult result;
  result.initial_ldr_max = state.ldr_max;
  std::vector<Eigen::VectorXd> kept;
  kept.reserve(n);
  std::size_t window_proposed = 0, window_accepted = 0;
  Eigen::Index dim = 0;
  while (kept.size() < n) {
    const Matrix batch = source(options.candidate_batch, rng);
    dim = batch.cols();
    const Vector ldr_values = ldr_fn(batch);
    for (Eigen::Index i = 0; i < batch.rows() && kept.size() < n; ++i) {
      state.observe(ldr_values[i]);
      const bool ok = accept(f_hat(ldr_values[i], state), rng.uniform());
      ++result.proposed;
      ++window_proposed;
      if (ok) {
        kept.emplace_back(batch.row(i).transpose());
        ++window_accepted;
      }
    }
    if (window_proposed >= options.starvation_window) {
      const double rate = static_cast<double>(window_accepted) / static_cast<double>(window_proposed);
      if (rate < options.starvation_floor) {
        throw StarvationError("DRS acceptance rate " + format_double(rate) + " below floor " +
                              format_double(options.starvation_floor));
      }
      window_proposed = window_accepted = 0;
    }
  }
  result.accepted = kept.size();
  result.samples.resize(static_cast<Eigen::Index>(kept.size()), dim);
  for (std::size_t i = 0; i < kept.size(); ++i) result.samples.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
  result.final_state = state;
  return result;
}

CandidateSource generator_source(const MlpNetwork& generator) {
  return [&generator](std::size_t n, RngStream& rng) {
    Matrix z(static_cast<Eigen::Index>(n), generator.input_dim());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
    }
    return generator.forward(z);
  };
}

LdrFunction discriminator_ldr_fn(const MlpNetwork& discriminator) {
  return [&discriminator](const Matrix& samples) { return discriminator_ldr(discriminator, samples); };
}

std::string drs_report_json(const DrsResult& result) {
  nlohmann::ordered_json j;
  j["schema"] = "diagan.drs/1";
  j["accepted"] = result.accepted;
  j["proposed"] = result.proposed;
  j["acceptance_rate"] = result.acceptance_rate();
  j["initial_ldr_max"] = result.initial_ldr_max;
  j["final_ldr_max"] = result.final_state.ldr_max;
  j["gamma"] = result.final_state.gamma;
  j["epsilon"] = result.final_state.epsilon;
  return j.dump(2) + "\n";
}

}  // namespace diagan
