#include "diagan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "diagan/errors.hpp"

namespace diagan {

namespace {

double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return s;
}

// Row order sorted by first coordinate (stable, so ties keep input order).
std::vector<Eigen::Index> order_by_first_coordinate(const Matrix& set) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(set.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return set(a, 0) < set(b, 0); });
  return order;
}

Matrix permute_rows(const Matrix& set, const std::vector<Eigen::Index>& order) {
  Matrix out(set.rows(), set.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = set.row(order[i]);
  return out;
}

// k-th smallest squared distance from sorted row p to the other sorted rows,
// scanning outward along the first coordinate until the gap alone exceeds it.
double kth_squared_neighbour(const Matrix& sorted, Eigen::Index p, int k) {
  std::priority_queue<double> best;  // max-heap of the k smallest so far
  const auto consider = [&](Eigen::Index q) {
    const double d2 = squared_distance(sorted, p, sorted, q);
    if (static_cast<int>(best.size()) < k) {
      best.push(d2);
    } else if (d2 < best.top()) {
      best.pop();
      best.push(d2);
    }
  };
  const auto gap_exceeds = [&](Eigen::Index q) {
    if (static_cast<int>(best.size()) < k) return false;
    const double dx = sorted(q, 0) - sorted(p, 0);
    return dx * dx > best.top();
  };
  Eigen::Index lo = p - 1, hi = p + 1;
  bool lo_open = lo >= 0, hi_open = hi < sorted.rows();
  while (lo_open || hi_open) {
    if (lo_open) {
      if (gap_exceeds(lo)) {
        lo_open = false;
      } else {
        consider(lo--);
        lo_open = lo >= 0;
      }
    }
    if (hi_open) {
      if (gap_exceeds(hi)) {
        hi_open = false;
      } else {
        consider(hi++);
        hi_open = hi < sorted.rows();
      }
    }
  }
  return best.top();
}

void require_knn(const Matrix& set, int k) {
  if (k < 1) throw ParameterError("k must be at least 1");
  if (set.rows() <= k) {
    throw ParameterError("k-NN needs more than k = " + std::to_string(k) + " points, got " + std::to_string(set.rows()));
  }
}

}  // namespace

std::vector<double> knn_thresholds(const Matrix& set, int k) {
  require_knn(set, k);
  const auto order = order_by_first_coordinate(set);
  const Matrix sorted = permute_rows(set, order);
  std::vector<double> out(static_cast<std::size_t>(set.rows()));
  for (Eigen::Index p = 0; p < sorted.rows(); ++p) {
    out[static_cast<std::size_t>(order[static_cast<std::size_t>(p)])] = std::sqrt(kth_squared_neighbour(sorted, p, k));
  }
  return out;
}

double knn_threshold(const Matrix& set, std::size_t index, int k) {
  require_knn(set, k);
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(set.rows()));
  for (Eigen::Index j = 0; j < set.rows(); ++j) {
    if (j != static_cast<Eigen::Index>(index)) d2.push_back(squared_distance(set, static_cast<Eigen::Index>(index), set, j));
  }
  std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
  return std::sqrt(d2[static_cast<std::size_t>(k - 1)]);
}

KnnManifold::KnnManifold(const Matrix& set, int k) {
  require_knn(set, k);
  const auto order = order_by_first_coordinate(set);
  sorted_ = permute_rows(set, order);
  radii_.resize(static_cast<std::size_t>(set.rows()));
  radii_sq_.resize(radii_.size());
  for (Eigen::Index p = 0; p < sorted_.rows(); ++p) {
    const double r2 = kth_squared_neighbour(sorted_, p, k);
    radii_sq_[static_cast<std::size_t>(p)] = r2;
    radii_[static_cast<std::size_t>(p)] = std::sqrt(r2);
  }
  max_radius_ = *std::max_element(radii_.begin(), radii_.end());
}

bool KnnManifold::contains(const Eigen::Ref<const Eigen::RowVectorXd>& point) const {
  if (point.size() != sorted_.cols()) throw ShapeError("query dimension does not match manifold");
  const double x = point[0];
  // First sorted row with first coordinate >= x - max_radius.
  Eigen::Index lo = 0, hi = sorted_.rows();
  while (lo < hi) {
    const Eigen::Index mid = (lo + hi) / 2;
    if (sorted_(mid, 0) < x - max_radius_) lo = mid + 1; else hi = mid;
  }
  for (Eigen::Index q = lo; q < sorted_.rows() && sorted_(q, 0) <= x + max_radius_; ++q) {
    double d2 = 0.0;
    for (Eigen::Index c = 0; c < sorted_.cols(); ++c) {
      const double d = point[c] - sorted_(q, c);
      d2 += d * d;
    }
    if (d2 <= radii_sq_[static_cast<std::size_t>(q)]) return true;
  }
  return false;
}

double KnnManifold::coverage(const Matrix& queries) const {
  if (queries.rows() == 0) throw ParameterError("coverage of an empty query set");
  long hits = 0;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) hits += contains(queries.row(i)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(queries.rows());
}

bool manifold_membership(const Eigen::RowVectorXd& point, const Matrix& set, int k) {
  return KnnManifold(set, k).contains(point);
}

double precision(const Matrix& generated, const Matrix& real, int k) {
  if (generated.rows() == 0) throw ParameterError("precision: empty generated set");
  return KnnManifold(real, k).coverage(generated);
}

double recall(const Matrix& real, const Matrix& generated, int k) {
  if (real.rows() == 0) throw ParameterError("recall: empty real set");
  return KnnManifold(generated, k).coverage(real);
}

double partial_recall(const Matrix& subset, const Matrix& generated, int k) {
  if (subset.rows() == 0) throw ParameterError("partial_recall: empty subset");
  return KnnManifold(generated, k).coverage(subset);
}

long ModeCoverageReport::high_quality_total() const {
  return std::accumulate(counts.begin(), counts.end(), 0L);
}

int ModeCoverageReport::modes_covered(long threshold) const {
  return static_cast<int>(std::count_if(counts.begin(), counts.end(), [&](long c) { return c >= threshold; }));
}

int ModeCoverageReport::modes_dropped(long threshold) const {
  return static_cast<int>(std::count_if(counts.begin(), counts.end(), [&](long c) { return c < threshold; }));
}

ModeCoverageReport high_quality_counts(const Matrix& generated, const GaussianMixtureSpec& spec) {
  if (generated.rows() == 0) throw ParameterError("high_quality_counts: no samples");
  if (generated.cols() != 2) throw ShapeError("high_quality_counts expects 2-D samples");
  ModeCoverageReport report;
  report.counts.assign(spec.centers.size(), 0);
  report.mean_ldrm.assign(spec.centers.size(), std::numeric_limits<double>::quiet_NaN());
  report.total_samples = static_cast<std::size_t>(generated.rows());
  const double radius = spec.high_quality_radius();
  for (Eigen::Index i = 0; i < generated.rows(); ++i) {
    const Eigen::Vector2d p(generated(i, 0), generated(i, 1));
    const int mode = assign_mode(p, spec);
    if ((p - spec.centers[static_cast<std::size_t>(mode)]).norm() <= radius) ++report.counts[static_cast<std::size_t>(mode)];
  }
  return report;
}

std::vector<double> per_mode_mean(const LabeledDataset& data, std::span<const double> values, std::size_t modes) {
  if (values.size() != data.size()) throw ShapeError("per_mode_mean: one value per point required");
  std::vector<double> sum(modes, 0.0);
  std::vector<long> count(modes, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int m = data.mode_index[i];
    if (m < 0 || static_cast<std::size_t>(m) >= modes) continue;
    sum[static_cast<std::size_t>(m)] += values[i];
    ++count[static_cast<std::size_t>(m)];
  }
  for (std::size_t m = 0; m < modes; ++m) {
    sum[m] = count[m] ? sum[m] / static_cast<double>(count[m]) : std::numeric_limits<double>::quiet_NaN();
  }
  return sum;
}

double per_dimension_distance(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  if (a.size() != b.size() || a.size() == 0) throw ShapeError("per_dimension_distance: size mismatch");
  return (a - b).norm() / static_cast<double>(a.size());
}

ReconstructionModel::ReconstructionModel(const Matrix& generated, const AutoencoderConfig& cfg) {
  if (static_cast<std::size_t>(generated.rows()) < cfg.min_training_samples) {
    throw ParameterError("autoencoder needs at least " + std::to_string(cfg.min_training_samples) +
                         " generated samples");
  }
  const int d = static_cast<int>(generated.cols());
  RngStream rng(cfg.seed, StreamId::autoencoder);
  net_ = MlpNetwork::kaiming({d, cfg.hidden_width, cfg.bottleneck, cfg.hidden_width, d}, Activation::tanh,
                             Activation::identity, rng);
  AdamState opt(net_.parameter_count(), AdamHyper{0.9, 0.999, 1e-8});

  const auto n = static_cast<std::size_t>(generated.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      Matrix batch(static_cast<Eigen::Index>(end - start), d);
      for (std::size_t i = start; i < end; ++i) batch.row(static_cast<Eigen::Index>(i - start)) = generated.row(static_cast<Eigen::Index>(order[i]));
      GradientTape tape;
      const Matrix out = net_.forward(batch, tape);
      const Matrix diff = out - batch;
      const double loss = diff.squaredNorm() / static_cast<double>(batch.rows());
      if (!std::isfinite(loss)) throw TrainingDivergence("autoencoder loss is not finite", epoch);
      epoch_loss += loss * static_cast<double>(batch.rows());
      const Gradients g = net_.backward(tape, 2.0 * diff / static_cast<double>(batch.rows()), GradientRequest::params_only);
      adam_step(opt, net_, g.params, cfg.lr);
    }
    final_loss_ = epoch_loss / static_cast<double>(n);
  }
}

Matrix ReconstructionModel::reconstruct(const Matrix& points) const { return net_.forward(points); }

double ReconstructionModel::score(const Matrix& subset) const {
  if (subset.rows() == 0) throw ParameterError("RE score of an empty subset");
  const Matrix rec = reconstruct(subset);
  double total = 0.0;
  for (Eigen::Index i = 0; i < subset.rows(); ++i) total += per_dimension_distance(rec.row(i), subset.row(i));
  return total / static_cast<double>(subset.rows());
}

double re_score(const Matrix& subset, const Matrix& generated, const AutoencoderConfig& cfg) {
  return ReconstructionModel(generated, cfg).score(subset);
}

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments moments(const Matrix& x) {
  if (x.rows() < x.cols() + 1) {
    throw ParameterError("Frechet distance needs at least d + 1 samples");
  }
  Moments m;
  m.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - m.mean.transpose();
  m.cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  return m;
}

bool regularize(Eigen::MatrixXd& cov) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
  if (es.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1e-300)) return false;
  cov += 1e-9 * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
  return true;
}

}  // namespace

FrechetResult frechet_distance(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("Frechet distance: feature dimensions differ");
  if (a.cols() != 2) return frechet_distance_eigen(a, b);
  Moments ma = moments(a), mb = moments(b);
  FrechetResult r;
  r.regularized = regularize(ma.cov) | regularize(mb.cov);
  const Eigen::Matrix2d product = ma.cov * mb.cov;
  const double det = std::max(ma.cov.determinant() * mb.cov.determinant(), 0.0);
  const double tr_sqrt = std::sqrt(std::max(product.trace() + 2.0 * std::sqrt(det), 0.0));
  r.distance = (ma.mean - mb.mean).squaredNorm() + ma.cov.trace() + mb.cov.trace() - 2.0 * tr_sqrt;
  return r;
}

FrechetResult frechet_distance_eigen(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("Frechet distance: feature dimensions differ");
  Moments ma = moments(a), mb = moments(b);
  FrechetResult r;
  r.regularized = regularize(ma.cov) | regularize(mb.cov);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(ma.cov);
  const Eigen::MatrixXd sqrt_a = ea.operatorSqrt();
  const Eigen::MatrixXd inner = sqrt_a * mb.cov * sqrt_a;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  r.distance = (ma.mean - mb.mean).squaredNorm() + ma.cov.trace() + mb.cov.trace() - 2.0 * tr_sqrt;
  return r;
}

}  // namespace diagan
