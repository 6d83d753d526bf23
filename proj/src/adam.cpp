#include "cbsde/adam.hpp"

#include <cmath>

#include "cbsde/errors.hpp"

namespace cbsde {

AdamState::AdamState(std::size_t parameter_count, AdamConfig config)
    : config_(config),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count))) {
  if (!(config_.learning_rate > 0.0) || config_.decay_steps < 0 || !(config_.decay_rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid Adam configuration");
  }
}

double AdamState::learning_rate() const {
  if (config_.decay_steps == 0) return config_.learning_rate;
  const auto periods = static_cast<double>(step_ / config_.decay_steps);
  return config_.learning_rate * std::pow(config_.decay_rate, periods);
}

void AdamState::apply(Eigen::Ref<Eigen::VectorXd> params,
                      const Eigen::Ref<const Eigen::VectorXd>& gradient) {
  if (params.size() != m_.size() || gradient.size() != m_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter/gradient length differs from Adam state");
  }
  if (!gradient.allFinite()) {
    throw Error(ErrorCode::NonFiniteGradient, "gradient contains NaN or Inf");
  }
  const double lr = learning_rate();
  ++step_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * gradient;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * gradient.cwiseAbs2();
  const double k = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, k);
  const double c2 = 1.0 - std::pow(config_.beta2, k);
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
}

}  // namespace cbsde
