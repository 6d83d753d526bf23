#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace cbsde {

/// Fully connected network: affine -> tanh for every hidden layer, affine output.
struct MlpSpec {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden_widths;

  /// Two hidden layers of width 10 + state_dim.
  static MlpSpec two_hidden(int input_dim, int output_dim, int state_dim);

  void validate() const;
  std::size_t parameter_count() const;
  int layer_count() const { return static_cast<int>(hidden_widths.size()) + 1; }
  int layer_inputs(int layer) const { return layer == 0 ? input_dim : hidden_widths[layer - 1]; }
  int layer_outputs(int layer) const {
    return layer + 1 == layer_count() ? output_dim : hidden_widths[layer];
  }

  bool operator==(const MlpSpec&) const = default;
};

/// Numerically safe tanh that vectorizes through exp.
template <class Derived>
auto fast_tanh(const Eigen::ArrayBase<Derived>& x) {
  return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

/// Parameters live in one flat vector, layer by layer: W_l (column-major,
/// outputs x inputs) followed by b_l. The flat layout is what the optimizer
/// and the checkpoint format see.
class Mlp {
 public:
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;

  /// Intermediate activations kept for the reverse pass; activations[0] is the
  /// input, activations[l] the tanh output of hidden layer l.
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;
  };

  /// All-zero parameters.
  explicit Mlp(MlpSpec spec);

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(MlpSpec spec, std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  ConstMatrixMap weight(int layer) const;
  MatrixMap weight(int layer);
  ConstVectorMap bias(int layer) const;
  VectorMap bias(int layer);

  Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& input) const;

  /// Column-per-sample evaluation.
  Eigen::MatrixXd forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& inputs) const;
  void forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& inputs, Tape& tape,
                     Eigen::MatrixXd& outputs) const;

  /// Adds sum_b d<upstream_b, f(x_b)>/d(params) into `gradient`. When
  /// `input_gradient` is given it receives d<upstream_b, f(x_b)>/dx_b per column.
  void accumulate_gradient(const Tape& tape, const Eigen::Ref<const Eigen::MatrixXd>& upstream,
                           Eigen::Ref<Eigen::VectorXd> gradient,
                           Eigen::MatrixXd* input_gradient = nullptr) const;

 private:
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] +
           static_cast<std::size_t>(spec_.layer_inputs(layer)) * spec_.layer_outputs(layer);
  }

  MlpSpec spec_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
};

/// Mean over the batch of the parameter gradient of <upstream_b, f(x_b)>.
Eigen::VectorXd backward(const Mlp& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                         const Eigen::Ref<const Eigen::MatrixXd>& upstream);

}  // namespace cbsde
