// Straight-line reference implementations used as test oracles. None of these
// call into the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double act(const std::string& name, double z) {
  if (name == "relu") return z > 0.0 ? z : 0.0;
  if (name == "tanh") return std::tanh(z);
  if (name == "sigmoid") return 1.0 / (1.0 + std::exp(-z));
  return z;
}

// Forward pass from the flat layout: per layer, weights row-major (out x in), then bias.
inline std::vector<double> mlp_forward(const std::vector<int>& dims, const std::vector<double>& params,
                                       const std::string& hidden, const std::string& output,
                                       std::vector<double> x) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    std::vector<double> y(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = params[off + static_cast<std::size_t>(out * in) + static_cast<std::size_t>(o)];
      for (int i = 0; i < in; ++i) s += params[off + static_cast<std::size_t>(o * in + i)] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = act(l + 2 == dims.size() ? output : hidden, s);
    }
    off += static_cast<std::size_t>(out * in + out);
    x = std::move(y);
  }
  return x;
}

// Central differences of f at x along every coordinate.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                        double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - b| / max(|a|, |b|, floor), the usual gradient-check relative error.
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double two_pass_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double two_pass_variance(const std::vector<double>& v) {
  const double m = two_pass_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// k-th nearest other point, by sorting every pairwise distance.
inline std::vector<double> knn_thresholds(const Eigen::MatrixXd& set, int k) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    std::vector<double> d;
    for (Eigen::Index j = 0; j < set.rows(); ++j)
      if (j != i) d.push_back((set.row(i) - set.row(j)).norm());
    std::sort(d.begin(), d.end());
    out.push_back(d[static_cast<std::size_t>(k - 1)]);
  }
  return out;
}

inline bool covered(const Eigen::RowVectorXd& q, const Eigen::MatrixXd& set, const std::vector<double>& radii) {
  for (Eigen::Index j = 0; j < set.rows(); ++j)
    if ((q - set.row(j)).norm() <= radii[static_cast<std::size_t>(j)]) return true;
  return false;
}

inline double coverage(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& set, int k) {
  const auto radii = knn_thresholds(set, k);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < queries.rows(); ++i) hits += covered(queries.row(i), set, radii) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(queries.rows());
}

// Principal square root of an SPD-product matrix by Denman-Beavers iteration.
inline Eigen::MatrixXd sqrtm(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd y = a, z = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int it = 0; it < 100; ++it) {
    const Eigen::MatrixXd y_next = 0.5 * (y + z.inverse());
    const Eigen::MatrixXd z_next = 0.5 * (z + y.inverse());
    y = y_next;
    z = z_next;
  }
  return y;
}

inline double frechet(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::RowVectorXd ma = a.colwise().mean(), mb = b.colwise().mean();
  const Eigen::MatrixXd ca = (a.rowwise() - ma).transpose() * (a.rowwise() - ma) / static_cast<double>(a.rows() - 1);
  const Eigen::MatrixXd cb = (b.rowwise() - mb).transpose() * (b.rowwise() - mb) / static_cast<double>(b.rows() - 1);
  return (ma - mb).squaredNorm() + (ca + cb - 2.0 * sqrtm(ca * cb)).trace();
}

}  // namespace oracle
