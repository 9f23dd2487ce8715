#pragma once

#include <Eigen/Core>
#include <span>
#include <stdexcept>
#include <vector>

#include "focal/tape.hpp"

namespace focal::ad {

// Central-difference gradient estimate, (f(p+h) - f(p-h)) / (2h) per
// coordinate. f must be a deterministic function of the parameter values.
// Test oracle: independent of the tape machinery by construction.
template <typename F>
std::vector<Eigen::MatrixXd> finite_diff_grad(F&& f,
                                              std::span<Parameter* const> params,
                                              double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  std::vector<Eigen::MatrixXd> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) {
    Eigen::MatrixXd g(p->value.rows(), p->value.cols());
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        const double saved = p->value(i, j);
        p->value(i, j) = saved + h;
        const double up = f();
        p->value(i, j) = saved - h;
        const double dn = f();
        p->value(i, j) = saved;
        g(i, j) = (up - dn) / (2.0 * h);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace focal::ad
