#include "focal/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace focal::nn {

void adam_step(std::span<ad::Parameter* const> params,
               std::span<const Eigen::MatrixXd> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    const Eigen::MatrixXd& g = grads[i];
    if (g.rows() != p.value.rows() || g.cols() != p.value.cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for " +
                                  p.name);
    }
    auto [it, inserted] = state.moments.try_emplace(p.name);
    AdamState::Moments& mom = it->second;
    if (inserted) {
      mom.m = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
      mom.v = Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
    }
    mom.m = state.beta1 * mom.m + (1.0 - state.beta1) * g;
    mom.v = state.beta2 * mom.v + (1.0 - state.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd m_hat = mom.m.array() / bc1;
    const Eigen::ArrayXXd v_hat = mom.v.array() / bc2;
    p.value.array() -=
        state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
  }
}

void adam_step(std::span<ad::Parameter* const> params, const ad::Tape& tape,
               AdamState& state) {
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(params.size());
  for (const ad::Parameter* p : params) grads.push_back(tape.grad_of(*p));
  adam_step(params, grads, state);
}

}  // namespace focal::nn
