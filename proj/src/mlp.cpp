#include "cbsde/mlp.hpp"

#include <cmath>

#include "cbsde/errors.hpp"
#include "cbsde/rng.hpp"

namespace cbsde {

MlpSpec MlpSpec::two_hidden(int input_dim, int output_dim, int state_dim) {
  return MlpSpec{input_dim, output_dim, {10 + state_dim, 10 + state_dim}};
}

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw Error(ErrorCode::InvalidArgument, "network input/output dims must be positive");
  }
  for (int w : hidden_widths) {
    if (w < 1) throw Error(ErrorCode::InvalidArgument, "hidden widths must be positive");
  }
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t total = 0;
  for (int l = 0; l < layer_count(); ++l) {
    total += static_cast<std::size_t>(layer_outputs(l)) * (layer_inputs(l) + 1);
  }
  return total;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0;
  for (int l = 0; l < spec_.layer_count(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(spec_.layer_outputs(l)) * (spec_.layer_inputs(l) + 1);
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

Mlp Mlp::glorot(MlpSpec spec, std::uint64_t seed) {
  Mlp net(std::move(spec));
  Rng rng(seed);
  for (int l = 0; l < net.spec_.layer_count(); ++l) {
    const int fan_in = net.spec_.layer_inputs(l);
    const int fan_out = net.spec_.layer_outputs(l);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    auto w = net.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = limit * (2.0 * rng.uniform() - 1.0);
    }
  }
  return net;
}

Mlp::ConstMatrixMap Mlp::weight(int layer) const {
  return ConstMatrixMap(params_.data() + weight_offset(layer), spec_.layer_outputs(layer),
                        spec_.layer_inputs(layer));
}

Mlp::MatrixMap Mlp::weight(int layer) {
  return MatrixMap(params_.data() + weight_offset(layer), spec_.layer_outputs(layer),
                   spec_.layer_inputs(layer));
}

Mlp::ConstVectorMap Mlp::bias(int layer) const {
  return ConstVectorMap(params_.data() + bias_offset(layer), spec_.layer_outputs(layer));
}

Mlp::VectorMap Mlp::bias(int layer) {
  return VectorMap(params_.data() + bias_offset(layer), spec_.layer_outputs(layer));
}

Eigen::VectorXd Mlp::forward(const Eigen::Ref<const Eigen::VectorXd>& input) const {
  return forward_batch(input);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& inputs) const {
  Tape tape;
  Eigen::MatrixXd out;
  forward_batch(inputs, tape, out);
  return out;
}

void Mlp::forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& inputs, Tape& tape,
                        Eigen::MatrixXd& outputs) const {
  if (inputs.rows() != spec_.input_dim) {
    throw Error(ErrorCode::ShapeMismatch, "network input has wrong dimension");
  }
  const int layers = spec_.layer_count();
  tape.activations.resize(layers);
  tape.activations[0] = inputs;
  for (int l = 0; l + 1 < layers; ++l) {
    Eigen::MatrixXd& next = tape.activations[l + 1];
    next.noalias() = weight(l) * tape.activations[l];
    next.colwise() += bias(l);
    next.array() = fast_tanh(next.array());
  }
  outputs.noalias() = weight(layers - 1) * tape.activations[layers - 1];
  outputs.colwise() += bias(layers - 1);
}

void Mlp::accumulate_gradient(const Tape& tape, const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                              Eigen::Ref<Eigen::VectorXd> gradient,
                              Eigen::MatrixXd* input_gradient) const {
  const int layers = spec_.layer_count();
  if (upstream.rows() != spec_.output_dim ||
      static_cast<int>(tape.activations.size()) != layers ||
      upstream.cols() != tape.activations[0].cols()) {
    throw Error(ErrorCode::ShapeMismatch, "upstream gradient does not match network output");
  }
  if (gradient.size() != params_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient buffer has wrong length");
  }
  Eigen::MatrixXd delta = upstream;
  Eigen::MatrixXd below;
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& input = tape.activations[l];
    MatrixMap dw(gradient.data() + weight_offset(l), spec_.layer_outputs(l),
                 spec_.layer_inputs(l));
    VectorMap db(gradient.data() + bias_offset(l), spec_.layer_outputs(l));
    dw.noalias() += delta * input.transpose();
    db.noalias() += delta.rowwise().sum();
    if (l == 0 && input_gradient == nullptr) break;
    below.noalias() = weight(l).transpose() * delta;
    if (l == 0) {
      *input_gradient = std::move(below);
      break;
    }
    // tanh' = 1 - tanh^2 on the stored activation.
    delta = below.array() * (1.0 - input.array().square());
  }
}

Eigen::VectorXd backward(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                         const Eigen::Ref<const Eigen::MatrixXd>& upstream) {
  if (inputs.cols() != upstream.cols() || inputs.cols() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "inputs and upstream gradients must pair up");
  }
  Mlp::Tape tape;
  Eigen::MatrixXd out;
  net.forward_batch(inputs, tape, out);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  net.accumulate_gradient(tape, upstream, grad);
  return grad / static_cast<double>(inputs.cols());
}

}  // namespace cbsde
