#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "diagan/rng.hpp"

namespace diagan {

/// Batches are stored one sample per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { identity, relu, sigmoid, tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Probability clamp applied before any logarithm of a discriminator output.
inline constexpr double kProbabilityFloor = 1e-7;

double clamp_probability(double p) noexcept;

class MlpNetwork;

/// Intermediate values of one forward pass, consumed by MlpNetwork::backward.
/// A tape is bound to the network object and parameter version that produced it.
class GradientTape {
 public:
  GradientTape() = default;

  bool empty() const noexcept { return inputs_.empty(); }
  /// Output of the last layer before its activation (the logit for sigmoid heads).
  const Matrix& output_preactivation() const { return preactivations_.back(); }
  const Matrix& output() const { return output_; }

 private:
  friend class MlpNetwork;

  const MlpNetwork* owner_ = nullptr;
  std::uint64_t version_ = 0;
  std::vector<Matrix> inputs_;          // input to each layer
  std::vector<Matrix> preactivations_;  // affine output of each layer
  Matrix output_;
};

/// Result of a backward pass. `params` uses the same flat layout as
/// MlpNetwork::parameters(); `input` is d(loss)/d(batch).
struct Gradients {
  Vector params;
  Matrix input;
};

enum class GradientRequest { params_and_input, params_only, input_only };

/// Fully-connected network. Parameters are stored in one flat buffer, layer by
/// layer: weight block (out x in, row-major) followed by the bias (out).
class MlpNetwork {
 public:
  MlpNetwork() = default;
  MlpNetwork(std::vector<int> layer_dims, Activation hidden, Activation output);

  /// Kaiming-normal weights (std = sqrt(2 / fan_in)), zero biases.
  static MlpNetwork kaiming(std::vector<int> layer_dims, Activation hidden, Activation output,
                            RngStream& rng);

  const std::vector<int>& layer_dims() const noexcept { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t layer_count() const noexcept { return dims_.size() - 1; }
  Activation hidden_activation() const noexcept { return hidden_; }
  Activation output_activation() const noexcept { return output_act_; }

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<const double> parameters() const noexcept { return params_; }
  /// Mutable access invalidates every tape recorded so far.
  std::span<double> mutable_parameters() noexcept;
  std::uint64_t version() const noexcept { return version_; }

  using WeightMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using BiasMap = Eigen::Map<const Vector>;
  WeightMap weight(std::size_t layer) const;
  BiasMap bias(std::size_t layer) const;

  Matrix forward(const Matrix& batch) const;
  Matrix forward(const Matrix& batch, GradientTape& tape) const;

  /// Activations feeding the last layer (the feature map F(x)).
  Matrix features(const Matrix& batch) const;

  /// Backpropagates d(loss)/d(output).
  Gradients backward(const GradientTape& tape, const Matrix& output_grad,
                     GradientRequest request = GradientRequest::params_and_input) const;

  /// Backpropagates d(loss)/d(pre-activation of the output layer). Used by the
  /// GAN losses, which are differentiated in logit space.
  Gradients backward_from_preactivation(const GradientTape& tape, const Matrix& preact_grad,
                                        GradientRequest request = GradientRequest::params_and_input) const;

  void save(std::ostream& out) const;
  static MlpNetwork load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static MlpNetwork load(const std::filesystem::path& path);

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(dims_[layer + 1]) * dims_[layer];
  }
  void check_tape(const GradientTape& tape) const;

  std::vector<int> dims_;
  Activation hidden_ = Activation::relu;
  Activation output_act_ = Activation::identity;
  std::vector<std::size_t> offsets_;
  // Over-aligned so vectorized reductions split identically for every instance.
  std::vector<double, Eigen::aligned_allocator<double>> params_;
  std::uint64_t version_ = 0;
};

struct AdamHyper {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators for one flat parameter vector.
struct AdamState {
  AdamHyper hyper;
  long step = 0;
  Vector m;
  Vector v;

  AdamState() = default;
  AdamState(std::size_t size, AdamHyper h) : hyper(h), m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

/// Bias-corrected Adam update of `params` in the descent direction of `grads`.
/// Throws TrainingDivergence when a gradient entry is not finite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr);

inline void adam_step(AdamState& state, MlpNetwork& net, const Vector& grads, double lr) {
  adam_step(state, net.mutable_parameters(), std::span<const double>(grads.data(), grads.size()), lr);
}

/// base_lr * (1 - step / total_steps). Throws RangeError outside [0, total_steps].
double linear_lr_decay(long step, long total_steps, double base_lr);

}  // namespace diagan
