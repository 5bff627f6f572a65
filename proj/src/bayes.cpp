#include "diagan/bayes.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "diagan/errors.hpp"

namespace diagan {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_inputs(const Eigen::MatrixXd& features, std::span<const int> labels, double s0) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("logistic fit: one label per feature row required");
  }
  if (!(s0 > 0.0)) throw ParameterError("prior variance s0 must be positive");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ParameterError("labels must be 0 or 1");
  }
}

Eigen::MatrixXd precision_matrix(const Eigen::VectorXd& theta, const Eigen::MatrixXd& features, double s0) {
  const Eigen::Index d = features.cols();
  Eigen::VectorXd w(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double p = sigmoid(features.row(i).dot(theta));
    w[i] = p * (1.0 - p);
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(d, d) / s0;
  h.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose() * w.cwiseSqrt().asDiagonal());
  return h.selfadjointView<Eigen::Lower>();
}

}  // namespace

Eigen::VectorXd log_posterior_gradient(const Eigen::MatrixXd& features, std::span<const int> labels,
                                       const Eigen::VectorXd& theta, double s0) {
  Eigen::VectorXd residual(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    residual[i] = labels[static_cast<std::size_t>(i)] - sigmoid(features.row(i).dot(theta));
  }
  return features.transpose() * residual - theta / s0;
}

double log_posterior(const Eigen::MatrixXd& features, std::span<const int> labels, const Eigen::VectorXd& theta,
                     double s0) {
  double total = -theta.squaredNorm() / (2.0 * s0);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double z = features.row(i).dot(theta);
    total -= labels[static_cast<std::size_t>(i)] == 1 ? softplus(-z) : softplus(z);
  }
  return total;
}

Eigen::VectorXd fit_map(const Eigen::MatrixXd& features, std::span<const int> labels, double s0,
                        const MapOptions& options, int* iterations) {
  check_inputs(features, labels, s0);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(features.cols());
  double value = log_posterior(features, labels, theta, s0);
  for (int it = 0; it <= options.max_iterations; ++it) {
    const Eigen::VectorXd grad = log_posterior_gradient(features, labels, theta, s0);
    if (grad.norm() <= options.tolerance) {
      if (iterations) *iterations = it;
      return theta;
    }
    if (it == options.max_iterations) break;
    const Eigen::VectorXd step = precision_matrix(theta, features, s0).ldlt().solve(grad);
    const double slope = grad.dot(step);
    // Newton decrement below round-off of the objective: nothing left to gain.
    if (0.5 * slope <= 1e-15 * (1.0 + std::abs(value))) {
      if (iterations) *iterations = it;
      return theta;
    }
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Eigen::VectorXd candidate = theta + t * step;
      const double cand_value = log_posterior(features, labels, candidate, s0);
      if (cand_value >= value + 1e-4 * t * slope) {
        theta = candidate;
        value = cand_value;
        break;
      }
    }
  }
  throw OptimizationError("fit_map: gradient tolerance not reached in " + std::to_string(options.max_iterations) +
                          " Newton iterations");
}

Eigen::MatrixXd laplace_covariance(const Eigen::VectorXd& theta_map, const Eigen::MatrixXd& features, double s0) {
  if (!theta_map.allFinite()) throw ParameterError("laplace_covariance: non-finite theta");
  if (features.rows() > 0 && features.cols() != theta_map.size()) throw ShapeError("laplace_covariance: dimension mismatch");
  const Eigen::Index d = theta_map.size();
  const Eigen::MatrixXd h = precision_matrix(theta_map, features.rows() ? features : Eigen::MatrixXd(0, d), s0);
  Eigen::MatrixXd cov = h.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
  return 0.5 * (cov + cov.transpose());
}

LogisticPosterior fit_posterior(const Eigen::MatrixXd& features, std::span<const int> labels, double s0,
                                const MapOptions& options) {
  LogisticPosterior post;
  post.s0 = s0;
  post.theta_map = fit_map(features, labels, s0, options, &post.newton_iterations);
  post.gradient_norm = log_posterior_gradient(features, labels, post.theta_map, s0).norm();
  post.covariance = laplace_covariance(post.theta_map, features, s0);
  return post;
}

double ldrv_approx(const Eigen::VectorXd& phi, const LogisticPosterior& posterior) {
  if (phi.size() != posterior.covariance.rows()) throw ShapeError("ldrv_approx: feature dimension mismatch");
  return phi.dot(posterior.covariance * phi);
}

McVariance mc_ldrv_oracle(const Eigen::VectorXd& phi, const LogisticPosterior& posterior, std::size_t draws,
                          RngStream& rng) {
  if (draws < 2) throw ParameterError("mc_ldrv_oracle: need at least 2 draws");
  const Eigen::Index d = posterior.theta_map.size();
  if (phi.size() != d) throw ShapeError("mc_ldrv_oracle: feature dimension mismatch");
  const Eigen::LLT<Eigen::MatrixXd> llt(posterior.covariance);
  if (llt.info() != Eigen::Success) throw DomainError("mc_ldrv_oracle: covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::VectorXd projected = l.transpose() * phi;  // theta^T phi = theta_map^T phi + projected^T z
  const double center = posterior.theta_map.dot(phi);

  std::vector<double> samples(draws);
  Eigen::VectorXd z(d);
  for (auto& s : samples) {
    for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.normal();
    s = center + projected.dot(z);
  }
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(draws);
  double m2 = 0.0, m4 = 0.0;
  for (double s : samples) {
    const double c = (s - mean) * (s - mean);
    m2 += c;
    m4 += c * c;
  }
  const auto n = static_cast<double>(draws);
  McVariance out;
  out.variance = m2 / (n - 1.0);
  const double biased = m2 / n;
  out.standard_error = std::sqrt(std::max(m4 / n - biased * biased, 0.0) / n);
  return out;
}

double projection_energy(const Eigen::VectorXd& direction, const Eigen::MatrixXd& features,
                         const Eigen::VectorXd& theta) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double p = sigmoid(features.row(i).dot(theta));
    const double proj = features.row(i).dot(direction);
    total += p * (1.0 - p) * proj * proj;
  }
  return total;
}

namespace {

Eigen::MatrixXd with_bias_column(const Matrix& features) {
  Eigen::MatrixXd out(features.rows(), features.cols() + 1);
  out << features, Eigen::VectorXd::Ones(features.rows());
  return out;
}

// Evenly strided subset of at most `limit` indices.
std::vector<std::size_t> strided(std::size_t n, std::size_t limit) {
  std::vector<std::size_t> out;
  const std::size_t stride = std::max<std::size_t>(1, (n + limit - 1) / limit);
  for (std::size_t i = 0; i < n; i += stride) out.push_back(i);
  return out;
}

}  // namespace

MinorLdrvReport minor_ldrv_study(const LabeledDataset& data, const LdrLog& log, const MlpNetwork& discriminator,
                                 const Matrix& fakes, double s0, RngStream& rng) {
  if (log.sample_count() != data.size()) throw ShapeError("minor_ldrv_study: log and dataset sizes differ");
  const auto major_idx = data.indices_of(Group::major);
  const auto minor_idx = data.indices_of(Group::minor);
  if (major_idx.empty() || minor_idx.empty()) {
    throw ParameterError("minor_ldrv_study: dataset needs both major and minor group labels");
  }

  MinorLdrvReport report;
  report.s0 = s0;
  const auto ldrm_values = log.ldrm_all();
  const auto ldrv_values = log.ldrv_all();

  // Logistic pool: real points (label 1) and fakes (label 0) in feature space.
  constexpr std::size_t kPoolLimit = 2000;
  const auto real_pick = strided(data.size(), kPoolLimit);
  const auto fake_pick = strided(static_cast<std::size_t>(fakes.rows()), kPoolLimit);
  Matrix pool_points(static_cast<Eigen::Index>(real_pick.size() + fake_pick.size()), data.points.cols());
  std::vector<int> labels;
  Eigen::Index row = 0;
  for (std::size_t i : real_pick) {
    pool_points.row(row++) = data.points.row(static_cast<Eigen::Index>(i));
    labels.push_back(1);
  }
  for (std::size_t i : fake_pick) {
    pool_points.row(row++) = fakes.row(static_cast<Eigen::Index>(i));
    labels.push_back(0);
  }
  const Eigen::MatrixXd pool = with_bias_column(discriminator.features(pool_points));
  report.pool_size = labels.size();
  const LogisticPosterior post = fit_posterior(pool, labels, s0);

  const auto summarize = [&](const std::vector<std::size_t>& idx, GroupLdrStats& out) {
    out.count = idx.size();
    const Eigen::MatrixXd phi = with_bias_column(discriminator.features(data.rows(idx)));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const Eigen::VectorXd f = phi.row(static_cast<Eigen::Index>(j)).transpose();
      out.mean_ldrm += ldrm_values[idx[j]];
      out.mean_ldrv += ldrv_values[idx[j]];
      out.mean_ldrv_approx += ldrv_approx(f, post);
      const double norm = f.norm();
      if (norm > 0.0) out.mean_projection_energy += projection_energy(f / norm, pool, post.theta_map);
    }
    const auto n = static_cast<double>(idx.size());
    out.mean_ldrm /= n;
    out.mean_ldrv /= n;
    out.mean_ldrv_approx /= n;
    out.mean_projection_energy /= n;
  };
  summarize(major_idx, report.major);
  summarize(minor_idx, report.minor);

  for (const auto* idx : {&major_idx, &minor_idx}) {
    for (std::size_t j = 0; j < std::min<std::size_t>(3, idx->size()); ++j) {
      const Eigen::VectorXd f =
          with_bias_column(discriminator.features(data.points.row(static_cast<Eigen::Index>((*idx)[j])))).row(0).transpose();
      report.approx_vs_oracle.emplace_back(ldrv_approx(f, post), mc_ldrv_oracle(f, post, 100000, rng).variance);
    }
  }
  return report;
}

std::string MinorLdrvReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "diagan.ldrv_study/1";
  j["s0"] = s0;
  j["pool_size"] = pool_size;
  const auto group = [](const GroupLdrStats& g) {
    nlohmann::ordered_json o;
    o["count"] = g.count;
    o["mean_ldrm"] = g.mean_ldrm;
    o["mean_ldrv"] = g.mean_ldrv;
    o["mean_ldrv_laplace"] = g.mean_ldrv_approx;
    o["mean_projection_energy"] = g.mean_projection_energy;
    return o;
  };
  j["major"] = group(major);
  j["minor"] = group(minor);
  j["ldrv_ratio_minor_over_major"] = ldrv_ratio();
  auto table = nlohmann::ordered_json::array();
  for (const auto& [approx, mc] : approx_vs_oracle) table.push_back({{"laplace", approx}, {"monte_carlo", mc}});
  j["approx_vs_oracle"] = table;
  return j.dump(2) + "\n";
}

}  // namespace diagan
