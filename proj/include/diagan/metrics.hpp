#pragma once

#include <span>
#include <vector>

#include "diagan/datasets.hpp"
#include "diagan/numcore.hpp"

namespace diagan {

/// Distance from every element of `set` to its k-th nearest *other* element.
/// Coincident duplicates count as neighbours at distance 0.
/// Throws ParameterError when |set| <= k.
std::vector<double> knn_thresholds(const Matrix& set, int k);

/// Distance from set[index] to its k-th nearest other element of `set`.
double knn_threshold(const Matrix& set, std::size_t index, int k);

/// k-NN manifold of a feature set: the union of balls around each element with
/// radius equal to its k-th neighbour distance.
class KnnManifold {
 public:
  KnnManifold(const Matrix& set, int k);

  /// True iff some element phi' covers `point`: |point - phi'| <= NN_k(phi').
  bool contains(const Eigen::Ref<const Eigen::RowVectorXd>& point) const;

  /// Fraction of rows of `queries` inside the manifold.
  double coverage(const Matrix& queries) const;

  const std::vector<double>& radii() const noexcept { return radii_; }

 private:
  Matrix sorted_;                 // rows sorted by first coordinate
  std::vector<double> radii_;     // per sorted row
  std::vector<double> radii_sq_;
  double max_radius_ = 0.0;
};

/// Membership function f(phi, Phi) for a single query.
bool manifold_membership(const Eigen::RowVectorXd& point, const Matrix& set, int k);

double precision(const Matrix& generated, const Matrix& real, int k = 3);
double recall(const Matrix& real, const Matrix& generated, int k = 3);
/// Recall restricted to a subset of the real features. Throws on empty subset.
double partial_recall(const Matrix& subset, const Matrix& generated, int k = 3);

struct ModeCoverageReport {
  std::vector<long> counts;        // high-quality samples per mode
  std::vector<double> mean_ldrm;   // per-mode mean LDRM of training points (NaN if unknown)
  std::size_t total_samples = 0;

  long high_quality_total() const;
  /// Number of modes with at least `threshold` high-quality samples.
  int modes_covered(long threshold) const;
  /// Number of modes with fewer than `threshold` high-quality samples.
  int modes_dropped(long threshold) const;
};

ModeCoverageReport high_quality_counts(const Matrix& generated, const GaussianMixtureSpec& spec);

/// Per-mode mean of `values` over the training points of each mode.
std::vector<double> per_mode_mean(const LabeledDataset& data, std::span<const double> values, std::size_t modes);

/// Euclidean distance divided by the dimension.
double per_dimension_distance(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b);

struct AutoencoderConfig {
  int hidden_width = 32;
  int bottleneck = 2;
  int epochs = 200;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t min_training_samples = 1000;
};

/// Dense autoencoder d -> hidden -> bottleneck -> hidden -> d (tanh hidden units).
class ReconstructionModel {
 public:
  /// Trains on `generated`. Throws ParameterError for too few samples and
  /// TrainingDivergence on non-finite loss.
  ReconstructionModel(const Matrix& generated, const AutoencoderConfig& cfg);

  Matrix reconstruct(const Matrix& points) const;
  /// RE(S): mean per-dimension reconstruction distance over the rows of `subset`.
  double score(const Matrix& subset) const;
  double final_training_loss() const noexcept { return final_loss_; }

 private:
  MlpNetwork net_;
  double final_loss_ = 0.0;
};

double re_score(const Matrix& subset, const Matrix& generated, const AutoencoderConfig& cfg = {});

struct FrechetResult {
  double distance = 0.0;
  bool regularized = false;  // a covariance was singular and got 1e-9 I added
};

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}) on sample moments.
/// Two-dimensional inputs use the closed-form 2x2 trace of the square root.
FrechetResult frechet_distance(const Matrix& a, const Matrix& b);
/// Same quantity through a symmetric eigendecomposition, any dimension.
FrechetResult frechet_distance_eigen(const Matrix& a, const Matrix& b);

}  // namespace diagan
