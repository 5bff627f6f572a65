#pragma once

#include <span>
#include <string>
#include <vector>

#include "diagan/datasets.hpp"
#include "diagan/diagnostics.hpp"
#include "diagan/numcore.hpp"
#include "diagan/rng.hpp"

namespace diagan {

/// Gaussian (Laplace) approximation N(theta_map, S_n) to the posterior of a
/// logistic model D(x) = sigmoid(theta^T phi) under the prior N(0, s0 I).
struct LogisticPosterior {
  Eigen::VectorXd theta_map;
  Eigen::MatrixXd covariance;  // S_n
  double s0 = 1.0;
  int newton_iterations = 0;
  double gradient_norm = 0.0;
};

struct MapOptions {
  double tolerance = 1e-8;  // on the log-posterior gradient norm; also stops once the
                            // Newton decrement drops to the objective's round-off
  int max_iterations = 200;
};

/// Gradient of the log-posterior sum_i [y_i log D_i + (1-y_i) log(1-D_i)] - |theta|^2/(2 s0).
Eigen::VectorXd log_posterior_gradient(const Eigen::MatrixXd& features, std::span<const int> labels,
                                       const Eigen::VectorXd& theta, double s0);
double log_posterior(const Eigen::MatrixXd& features, std::span<const int> labels, const Eigen::VectorXd& theta,
                     double s0);

/// Newton ascent with backtracking line search. Throws OptimizationError when
/// the gradient tolerance is not reached within the iteration cap.
Eigen::VectorXd fit_map(const Eigen::MatrixXd& features, std::span<const int> labels, double s0,
                        const MapOptions& options = {}, int* iterations = nullptr);

/// S_n = (sum_i D_i (1 - D_i) phi_i phi_i^T + I / s0)^{-1}.
Eigen::MatrixXd laplace_covariance(const Eigen::VectorXd& theta_map, const Eigen::MatrixXd& features, double s0);

LogisticPosterior fit_posterior(const Eigen::MatrixXd& features, std::span<const int> labels, double s0,
                                const MapOptions& options = {});

/// Analytic LDR variance phi^T S_n phi.
double ldrv_approx(const Eigen::VectorXd& phi, const LogisticPosterior& posterior);

struct McVariance {
  double variance = 0.0;
  double standard_error = 0.0;  // sqrt((m4 - s^4) / n) from the sample itself
};

/// Sample variance of theta^T phi for theta ~ N(theta_map, S_n).
McVariance mc_ldrv_oracle(const Eigen::VectorXd& phi, const LogisticPosterior& posterior, std::size_t draws,
                          RngStream& rng);

/// sum_i D_i (1 - D_i) <y, phi_i>^2: the data part of <y, S_n^{-1} y>.
double projection_energy(const Eigen::VectorXd& direction, const Eigen::MatrixXd& features,
                         const Eigen::VectorXd& theta);

struct GroupLdrStats {
  std::size_t count = 0;
  double mean_ldrm = 0.0;
  double mean_ldrv = 0.0;
  double mean_ldrv_approx = 0.0;     // phi^T S_n phi over the group's points
  double mean_projection_energy = 0.0;  // along each point's unit feature direction
};

struct MinorLdrvReport {
  GroupLdrStats major;
  GroupLdrStats minor;
  double s0 = 1.0;
  std::size_t pool_size = 0;
  /// A few (analytic, Monte-Carlo) LDRV pairs for the fitted pool.
  std::vector<std::pair<double, double>> approx_vs_oracle;

  double ldrv_ratio() const { return minor.mean_ldrv / major.mean_ldrv; }
  std::string to_json() const;
};

/// Per-group LDRM/LDRV of a recorded log plus the Laplace view of the trained
/// discriminator: a logistic posterior is fitted on last-layer features of the
/// real points (label 1) and `fakes` (label 0).
/// Throws ParameterError when the dataset has no major or no minor points.
MinorLdrvReport minor_ldrv_study(const LabeledDataset& data, const LdrLog& log, const MlpNetwork& discriminator,
                                 const Matrix& fakes, double s0, RngStream& rng);

}  // namespace diagan
