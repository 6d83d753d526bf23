#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace cbsde {

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// lr(k) = learning_rate * decay_rate^floor(k / decay_steps); 0 disables decay.
  double decay_rate = 0.5;
  std::int64_t decay_steps = 0;
};

class AdamState {
 public:
  AdamState(std::size_t parameter_count, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::int64_t step() const { return step_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

  /// Learning rate applied by the next step.
  double learning_rate() const;

  /// Bias-corrected Adam update in place. NonFiniteGradient leaves both the
  /// parameters and the state untouched.
  void apply(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& gradient);

 private:
  AdamConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::int64_t step_ = 0;
};

inline void adam_step(Eigen::Ref<Eigen::VectorXd> params, AdamState& state,
                      const Eigen::Ref<const Eigen::VectorXd>& gradient) {
  state.apply(params, gradient);
}

}  // namespace cbsde
