#include "diagan/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "diagan/errors.hpp"
#include "diagan/io.hpp"

namespace diagan {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ParameterError("unknown activation '" + std::string(name) + "'");
}

double clamp_probability(double p) noexcept {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

namespace {

void apply_activation(Activation a, const Matrix& z, Matrix& out) {
  switch (a) {
    case Activation::identity: out = z; break;
    case Activation::relu: out = z.cwiseMax(0.0); break;
    case Activation::sigmoid: out = (1.0 + (-z.array()).exp()).inverse().matrix(); break;
    case Activation::tanh: out = z.array().tanh().matrix(); break;
  }
}

// grad <- grad * f'(z), using the cached activation value where cheaper.
void scale_by_derivative(Activation a, const Matrix& z, const Matrix& activated, Matrix& grad) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: grad = (z.array() > 0.0).select(grad.array(), 0.0).matrix(); break;
    case Activation::sigmoid:
      grad.array() *= activated.array() * (1.0 - activated.array());
      break;
    case Activation::tanh: grad.array() *= 1.0 - activated.array().square(); break;
  }
}

}  // namespace

MlpNetwork::MlpNetwork(std::vector<int> layer_dims, Activation hidden, Activation output)
    : dims_(std::move(layer_dims)), hidden_(hidden), output_act_(output) {
  if (dims_.size() < 2) throw ShapeError("network needs at least an input and an output dimension");
  if (hidden_ == Activation::sigmoid) throw ParameterError("sigmoid is only supported as output activation");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] <= 0 || dims_[l + 1] <= 0) throw ShapeError("layer dimensions must be positive");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(dims_[l + 1]) * dims_[l] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
}

MlpNetwork MlpNetwork::kaiming(std::vector<int> layer_dims, Activation hidden, Activation output,
                               RngStream& rng) {
  MlpNetwork net(std::move(layer_dims), hidden, output);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const double stddev = std::sqrt(2.0 / net.dims_[l]);
    const std::size_t count = static_cast<std::size_t>(net.dims_[l + 1]) * net.dims_[l];
    double* w = net.params_.data() + net.weight_offset(l);
    for (std::size_t i = 0; i < count; ++i) w[i] = stddev * rng.normal();
  }
  return net;
}

std::span<double> MlpNetwork::mutable_parameters() noexcept {
  ++version_;
  return params_;
}

MlpNetwork::WeightMap MlpNetwork::weight(std::size_t layer) const {
  return WeightMap(params_.data() + weight_offset(layer), dims_[layer + 1], dims_[layer]);
}

MlpNetwork::BiasMap MlpNetwork::bias(std::size_t layer) const {
  return BiasMap(params_.data() + bias_offset(layer), dims_[layer + 1]);
}

Matrix MlpNetwork::forward(const Matrix& batch) const {
  GradientTape tape;
  return forward(batch, tape);
}

Matrix MlpNetwork::forward(const Matrix& batch, GradientTape& tape) const {
  if (dims_.empty()) throw ShapeError("forward on an empty network");
  if (batch.cols() != dims_.front()) {
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, network expects " +
                     std::to_string(dims_.front()));
  }
  tape.owner_ = this;
  tape.version_ = version_;
  tape.inputs_.resize(layer_count());
  tape.preactivations_.resize(layer_count());

  Matrix current = batch;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Matrix z = current * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    tape.inputs_[l] = std::move(current);
    const Activation act = (l + 1 == layer_count()) ? output_act_ : hidden_;
    apply_activation(act, z, current);
    tape.preactivations_[l] = std::move(z);
  }
  tape.output_ = current;
  return current;
}

Matrix MlpNetwork::features(const Matrix& batch) const {
  GradientTape tape;
  forward(batch, tape);
  return tape.inputs_.back();
}

void MlpNetwork::check_tape(const GradientTape& tape) const {
  if (tape.owner_ != this || tape.version_ != version_ || tape.inputs_.size() != layer_count()) {
    throw ContractViolation("gradient tape does not belong to the current network parameters");
  }
}

Gradients MlpNetwork::backward(const GradientTape& tape, const Matrix& output_grad,
                               GradientRequest request) const {
  check_tape(tape);
  const Matrix& out = tape.output_;
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw ShapeError("output gradient shape does not match network output");
  }
  Matrix grad = output_grad;
  scale_by_derivative(output_act_, tape.preactivations_.back(), out, grad);
  return backward_from_preactivation(tape, grad, request);
}

Gradients MlpNetwork::backward_from_preactivation(const GradientTape& tape, const Matrix& preact_grad,
                                                  GradientRequest request) const {
  check_tape(tape);
  const Matrix& last = tape.preactivations_.back();
  if (preact_grad.rows() != last.rows() || preact_grad.cols() != last.cols()) {
    throw ShapeError("pre-activation gradient shape does not match network output");
  }
  const bool want_params = request != GradientRequest::input_only;
  const bool want_input = request != GradientRequest::params_only;

  Gradients result;
  if (want_params) result.params = Vector::Zero(static_cast<Eigen::Index>(params_.size()));

  Matrix dz = preact_grad;
  for (std::size_t l = layer_count(); l-- > 0;) {
    if (want_params) {
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dw(
          result.params.data() + weight_offset(l), dims_[l + 1], dims_[l]);
      dw.noalias() = dz.transpose() * tape.inputs_[l];
      Eigen::Map<Vector>(result.params.data() + bias_offset(l), dims_[l + 1]) = dz.colwise().sum().transpose();
    }
    if (l == 0 && !want_input) break;
    Matrix da = dz * weight(l);
    if (l == 0) {
      result.input = std::move(da);
      break;
    }
    scale_by_derivative(hidden_, tape.preactivations_[l - 1], tape.inputs_[l], da);
    dz = std::move(da);
  }
  return result;
}

void MlpNetwork::save(std::ostream& out) const {
  out << "diagan-mlp 1\n";
  out << "dims " << dims_.size();
  for (int d : dims_) out << ' ' << d;
  out << "\nhidden " << to_string(hidden_) << "\noutput " << to_string(output_act_) << '\n';
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const int rows = dims_[l + 1];
    const int cols = dims_[l];
    out << "weight " << l << ' ' << rows << ' ' << cols << '\n';
    const double* w = params_.data() + weight_offset(l);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (c) out << ' ';
        out << format_double(w[static_cast<std::size_t>(r) * cols + c]);
      }
      out << '\n';
    }
    out << "bias " << l << ' ' << rows << '\n';
    const double* b = params_.data() + bias_offset(l);
    for (int r = 0; r < rows; ++r) {
      if (r) out << ' ';
      out << format_double(b[r]);
    }
    out << '\n';
  }
}

namespace {

std::string expect_token(std::istream& in, std::string_view expected) {
  std::string tok;
  if (!(in >> tok) || (!expected.empty() && tok != expected)) {
    throw IoError("malformed checkpoint: expected '" + std::string(expected) + "', got '" + tok + "'");
  }
  return tok;
}

long read_long(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw IoError("malformed checkpoint: truncated");
  return parse_long(tok);
}

}  // namespace

MlpNetwork MlpNetwork::load(std::istream& in) {
  expect_token(in, "diagan-mlp");
  if (read_long(in) != 1) throw IoError("unsupported checkpoint version");
  expect_token(in, "dims");
  const long count = read_long(in);
  if (count < 2 || count > 1024) throw IoError("malformed checkpoint: bad layer count");
  std::vector<int> dims(static_cast<std::size_t>(count));
  for (auto& d : dims) d = static_cast<int>(read_long(in));
  expect_token(in, "hidden");
  const Activation hidden = activation_from_string(expect_token(in, ""));
  expect_token(in, "output");
  const Activation output = activation_from_string(expect_token(in, ""));

  MlpNetwork net(dims, hidden, output);
  std::string tok;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    expect_token(in, "weight");
    if (read_long(in) != static_cast<long>(l) || read_long(in) != dims[l + 1] || read_long(in) != dims[l]) {
      throw IoError("malformed checkpoint: weight block header mismatch");
    }
    double* w = net.params_.data() + net.weight_offset(l);
    const std::size_t wcount = static_cast<std::size_t>(dims[l + 1]) * dims[l];
    for (std::size_t i = 0; i < wcount; ++i) {
      if (!(in >> tok)) throw IoError("malformed checkpoint: truncated weights");
      w[i] = parse_double(tok);
    }
    expect_token(in, "bias");
    if (read_long(in) != static_cast<long>(l) || read_long(in) != dims[l + 1]) {
      throw IoError("malformed checkpoint: bias block header mismatch");
    }
    double* b = net.params_.data() + net.bias_offset(l);
    for (int i = 0; i < dims[l + 1]; ++i) {
      if (!(in >> tok)) throw IoError("malformed checkpoint: truncated biases");
      b[i] = parse_double(tok);
    }
  }
  return net;
}

void MlpNetwork::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  save(out);
  write_text_file(path, out.str());
}

MlpNetwork MlpNetwork::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return load(in);
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (grads.size() != params.size() || state.m.size() != n || state.v.size() != n) {
    throw ShapeError("adam_step: parameter, gradient and moment sizes disagree");
  }
  if (!(lr > 0.0)) throw ParameterError("adam_step: learning rate must be positive");
  Eigen::Map<Vector> p(params.data(), n);
  Eigen::Map<const Vector> g(grads.data(), n);
  if (!g.allFinite()) throw TrainingDivergence("non-finite gradient in adam_step", state.step);

  const AdamHyper& h = state.hyper;
  ++state.step;
  state.m = h.beta1 * state.m + (1.0 - h.beta1) * g;
  state.v = h.beta2 * state.v + (1.0 - h.beta2) * g.cwiseProduct(g);
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  p.array() -= lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + h.epsilon);
}

double linear_lr_decay(long step, long total_steps, double base_lr) {
  if (total_steps <= 0) throw RangeError("linear_lr_decay: total_steps must be positive");
  if (step < 0 || step > total_steps) {
    throw RangeError("linear_lr_decay: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(total_steps) + "]");
  }
  return base_lr * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

}  // namespace diagan
