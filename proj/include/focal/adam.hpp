#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "focal/tape.hpp"

namespace focal::nn {

// Adam with bias correction. Moments are keyed by parameter name so the state
// survives network relocation; the step counter is shared across the group.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;

  struct Moments {
    Eigen::MatrixXd m;
    Eigen::MatrixXd v;
  };
  std::unordered_map<std::string, Moments> moments;
};

// One update for a matched list of parameters and gradients. Increments the
// step counter once.
void adam_step(std::span<ad::Parameter* const> params,
               std::span<const Eigen::MatrixXd> grads, AdamState& state);

// Convenience: pull each parameter's gradient off the tape (zero when the
// parameter never reached the loss) and update.
void adam_step(std::span<ad::Parameter* const> params, const ad::Tape& tape,
               AdamState& state);

}  // namespace focal::nn
