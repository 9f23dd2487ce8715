#include "focal/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace focal::ad {

namespace {

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

void require_finite(const Eigen::MatrixXd& m, const char* op) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(op) + ": non-finite values");
  }
}

}  // namespace

int Tape::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("Tape: invalid Var handle");
  }
  return v.id;
}

Var Tape::emplace(Eigen::MatrixXd value, BackFn back) {
  nodes_.push_back(Node{std::move(value), {}, std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Eigen::MatrixXd value) {
  return emplace(std::move(value), nullptr);
}

Var Tape::param(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  Var v = emplace(p.value, nullptr);
  param_nodes_.emplace(&p, v.id);
  return v;
}

void Tape::accumulate(Var v, const Eigen::MatrixXd& g) {
  Node& n = nodes_[static_cast<std::size_t>(check(v))];
  require_same_shape(n.value, g, "accumulate");
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  Node& top = nodes_[static_cast<std::size_t>(check(loss))];
  if (top.value.rows() != 1 || top.value.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 scalar node");
  }
  accumulate(loss, Eigen::MatrixXd::Ones(1, 1));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0 || !n.back) continue;
    n.back(*this, n.grad);
  }
}

const Eigen::MatrixXd& Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(check(v))];
  if (n.grad.size() == 0) {
    auto* self = const_cast<Tape*>(this);
    self->zero_like_ = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
    return zero_like_;
  }
  return n.grad;
}

Eigen::MatrixXd Tape::grad_of(const Parameter& p) const {
  auto it = param_nodes_.find(&p);
  if (it == param_nodes_.end()) {
    return Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols());
  }
  return grad(Var{it->second});
}

// ---------------------------------------------------------------------------

Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "add");
  return t.emplace(t.value(a) + t.value(b),
                   [a, b](Tape& tt, const Eigen::MatrixXd& g) {
                     tt.accumulate(a, g);
                     tt.accumulate(b, g);
                   });
}

Var sub(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "sub");
  return t.emplace(t.value(a) - t.value(b),
                   [a, b](Tape& tt, const Eigen::MatrixXd& g) {
                     tt.accumulate(a, g);
                     tt.accumulate(b, -g);
                   });
}

Var mul(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "mul");
  return t.emplace(t.value(a).cwiseProduct(t.value(b)),
                   [a, b](Tape& tt, const Eigen::MatrixXd& g) {
                     tt.accumulate(a, g.cwiseProduct(tt.value(b)));
                     tt.accumulate(b, g.cwiseProduct(tt.value(a)));
                   });
}

Var neg(Tape& t, Var a) { return scale(t, a, -1.0); }

Var scale(Tape& t, Var a, double c) {
  return t.emplace(t.value(a) * c, [a, c](Tape& tt, const Eigen::MatrixXd& g) {
    tt.accumulate(a, g * c);
  });
}

Var add_scalar(Tape& t, Var a, double c) {
  return t.emplace(t.value(a).array() + c,
                   [a](Tape& tt, const Eigen::MatrixXd& g) {
                     tt.accumulate(a, g);
                   });
}

Var square(Tape& t, Var a) {
  return t.emplace(t.value(a).array().square(),
                   [a](Tape& tt, const Eigen::MatrixXd& g) {
                     tt.accumulate(a, 2.0 * g.cwiseProduct(tt.value(a)));
                   });
}

Var sqrt_(Tape& t, Var a) {
  Eigen::MatrixXd y = t.value(a).array().sqrt();
  return t.emplace(std::move(y), [a](Tape& tt, const Eigen::MatrixXd& g) {
    // Subgradient 0 at the kink, so exactly-coincident embeddings stay put.
    Eigen::ArrayXXd y2 = tt.value(a).array().sqrt();
    Eigen::ArrayXXd d =
        (y2 > 0.0).select(0.5 * g.array() / y2.max(1e-300), 0.0);
    tt.accumulate(a, d.matrix());
  });
}

Var recip(Tape& t, Var a) {
  return t.emplace(t.value(a).cwiseInverse(),
                   [a](Tape& tt, const Eigen::MatrixXd& g) {
                     Eigen::ArrayXXd v = tt.value(a).array();
                     tt.accumulate(a, (-g.array() / (v * v)).matrix());
                   });
}

Var exp_(Tape& t, Var a) {
  Eigen::MatrixXd y = t.value(a).array().exp();
  return t.emplace(y, [a, y](Tape& tt, const Eigen::MatrixXd& g) {
    tt.accumulate(a, g.cwiseProduct(y));
  });
}

Var log_(Tape& t, Var a) {
  return t.emplace(t.value(a).array().log(),
                   [a](Tape& tt, const Eigen::MatrixXd& g) {
                     tt.accumulate(a, g.cwiseQuotient(tt.value(a)));
                   });
}

Var relu(Tape& t, Var a) {
  return t.emplace(t.value(a).cwiseMax(0.0),
                   [a](Tape& tt, const Eigen::MatrixXd& g) {
                     Eigen::MatrixXd mask =
                         (tt.value(a).array() > 0.0).cast<double>();
                     tt.accumulate(a, g.cwiseProduct(mask));
                   });
}

Var tanh_squash(Tape& t, Var a) {
  constexpr double kBound = 1.0 - 1e-12;
  Eigen::MatrixXd y =
      t.value(a).array().tanh().cwiseMin(kBound).cwiseMax(-kBound);
  return t.emplace(y, [a, y](Tape& tt, const Eigen::MatrixXd& g) {
    tt.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var log_one_minus_tanh2(Tape& t, Var a) {
  const Eigen::ArrayXXd x = t.value(a).array();
  // softplus(-2x) = max(-2x, 0) + log1p(e^{-2|x|}), stable on both tails.
  Eigen::ArrayXXd softplus =
      (-2.0 * x.abs()).exp().log1p() + (x < 0.0).cast<double>() * (-2.0 * x);
  Eigen::MatrixXd y = (2.0 * (std::log(2.0) - x) - 2.0 * softplus).matrix();
  return t.emplace(y, [a](Tape& tt, const Eigen::MatrixXd& g) {
    Eigen::MatrixXd th = tt.value(a).array().tanh();
    tt.accumulate(a, (-2.0 * g.array() * th.array()).matrix());
  });
}

Var clamp(Tape& t, Var a, double lo, double hi) {
  return t.emplace(t.value(a).cwiseMax(lo).cwiseMin(hi),
                   [a, lo, hi](Tape& tt, const Eigen::MatrixXd& g) {
                     const Eigen::ArrayXXd v = tt.value(a).array();
                     Eigen::MatrixXd mask =
                         ((v >= lo) && (v <= hi)).cast<double>();
                     tt.accumulate(a, g.cwiseProduct(mask));
                   });
}

Var min_el(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "min_el");
  return t.emplace(t.value(a).cwiseMin(t.value(b)),
                   [a, b](Tape& tt, const Eigen::MatrixXd& g) {
                     Eigen::MatrixXd take_a =
                         (tt.value(a).array() <= tt.value(b).array())
                             .cast<double>();
                     tt.accumulate(a, g.cwiseProduct(take_a));
                     tt.accumulate(
                         b, g.cwiseProduct((1.0 - take_a.array()).matrix()));
                   });
}

Var matmul(Tape& t, Var a, Var b) {
  if (t.value(a).cols() != t.value(b).rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree");
  }
  return t.emplace(t.value(a) * t.value(b),
                   [a, b](Tape& tt, const Eigen::MatrixXd& g) {
                     tt.accumulate(a, g * tt.value(b).transpose());
                     tt.accumulate(b, tt.value(a).transpose() * g);
                   });
}

Var affine(Tape& t, Var x, Var w, Var b) {
  const Eigen::MatrixXd& xv = t.value(x);
  const Eigen::MatrixXd& wv = t.value(w);
  const Eigen::MatrixXd& bv = t.value(b);
  if (xv.cols() != wv.cols()) {
    throw std::invalid_argument("affine: input width " +
                                std::to_string(xv.cols()) +
                                " does not match weight fan-in " +
                                std::to_string(wv.cols()));
  }
  if (bv.rows() != 1 || bv.cols() != wv.rows()) {
    throw std::invalid_argument("affine: bias must be 1 x fan-out");
  }
  Eigen::MatrixXd y = xv * wv.transpose();
  y.rowwise() += bv.row(0);
  return t.emplace(std::move(y), [x, w, b](Tape& tt, const Eigen::MatrixXd& g) {
    tt.accumulate(x, g * tt.value(w));
    tt.accumulate(w, g.transpose() * tt.value(x));
    tt.accumulate(b, g.colwise().sum());
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Eigen::MatrixXd& av = t.value(a);
  const Eigen::MatrixXd& bv = t.value(b);
  if (av.rows() != bv.rows()) {
    throw std::invalid_argument("concat_cols: row counts disagree");
  }
  Eigen::MatrixXd y(av.rows(), av.cols() + bv.cols());
  y << av, bv;
  const int na = static_cast<int>(av.cols());
  const int nb = static_cast<int>(bv.cols());
  return t.emplace(std::move(y),
                   [a, b, na, nb](Tape& tt, const Eigen::MatrixXd& g) {
                     tt.accumulate(a, g.leftCols(na));
                     tt.accumulate(b, g.rightCols(nb));
                   });
}

Var slice_cols(Tape& t, Var a, int first, int count) {
  const Eigen::MatrixXd& av = t.value(a);
  if (first < 0 || count < 0 || first + count > av.cols()) {
    throw std::invalid_argument("slice_cols: range out of bounds");
  }
  return t.emplace(av.middleCols(first, count),
                   [a, first, count](Tape& tt, const Eigen::MatrixXd& g) {
                     const Eigen::MatrixXd& av2 = tt.value(a);
                     Eigen::MatrixXd full =
                         Eigen::MatrixXd::Zero(av2.rows(), av2.cols());
                     full.middleCols(first, count) = g;
                     tt.accumulate(a, full);
                   });
}

Var sum_all(Tape& t, Var a) {
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = t.value(a).sum();
  return t.emplace(std::move(y), [a](Tape& tt, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& av = tt.value(a);
    tt.accumulate(a,
                  Eigen::MatrixXd::Constant(av.rows(), av.cols(), g(0, 0)));
  });
}

Var mean_all(Tape& t, Var a) {
  const double n = static_cast<double>(t.value(a).size());
  return scale(t, sum_all(t, a), 1.0 / n);
}

Var sum_cols(Tape& t, Var a) {
  return t.emplace(t.value(a).rowwise().sum(),
                   [a](Tape& tt, const Eigen::MatrixXd& g) {
                     const Eigen::MatrixXd& av = tt.value(a);
                     tt.accumulate(a, g * Eigen::RowVectorXd::Ones(av.cols()));
                   });
}

Eigen::RowVectorXd canonical_row_mean(const Eigen::MatrixXd& rows) {
  const int n = static_cast<int>(rows.rows());
  const int m = static_cast<int>(rows.cols());
  if (n == 0) throw std::invalid_argument("canonical_row_mean: empty input");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&rows, m](int i, int j) {
    for (int c = 0; c < m; ++c) {
      if (rows(i, c) != rows(j, c)) return rows(i, c) < rows(j, c);
    }
    return false;
  });
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(m);
  for (const int i : order) sum += rows.row(i);
  return sum / static_cast<double>(n);
}

Var mean_rows_canonical(Tape& t, Var a) {
  Eigen::MatrixXd y = canonical_row_mean(t.value(a));
  return t.emplace(std::move(y), [a](Tape& tt, const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd& av = tt.value(a);
    const double inv_n = 1.0 / static_cast<double>(av.rows());
    tt.accumulate(a, Eigen::VectorXd::Ones(av.rows()) * (g.row(0) * inv_n));
  });
}

Var mmd_rbf(Tape& t, Var x, const Eigen::MatrixXd& y, double bandwidth) {
  const Eigen::MatrixXd xv = t.value(x);
  const int m = static_cast<int>(xv.rows());
  const int n = static_cast<int>(y.rows());
  if (m < 2 || n < 2) {
    throw std::invalid_argument("mmd_rbf: need at least two samples per side");
  }
  if (xv.cols() != y.cols()) {
    throw std::invalid_argument("mmd_rbf: sample dimensions disagree");
  }
  require_finite(xv, "mmd_rbf");
  const double inv_two_bw2 = 1.0 / (2.0 * bandwidth * bandwidth);

  auto kernel_matrix = [inv_two_bw2](const Eigen::MatrixXd& a,
                                     const Eigen::MatrixXd& b) {
    Eigen::MatrixXd d2 = -2.0 * (a * b.transpose());
    d2.colwise() += a.rowwise().squaredNorm();
    d2.rowwise() += b.rowwise().squaredNorm().transpose();
    return (-d2.cwiseMax(0.0) * inv_two_bw2).array().exp().matrix().eval();
  };

  const Eigen::MatrixXd kxx = kernel_matrix(xv, xv);
  const Eigen::MatrixXd kyy = kernel_matrix(y, y);
  Eigen::MatrixXd kxy = kernel_matrix(xv, y);

  const double cxx = 1.0 / (static_cast<double>(m) * (m - 1));
  const double cyy = 1.0 / (static_cast<double>(n) * (n - 1));
  // Equal sample counts: the unbiased estimator that drops same-index cross
  // terms, which vanishes identically on equal sample sets. Otherwise the
  // standard U-statistic over all cross pairs.
  const bool paired = (m == n);
  const double cxy = paired ? 2.0 * cxx : 2.0 / (static_cast<double>(m) * n);
  if (paired) kxy.diagonal().setZero();

  Eigen::MatrixXd value(1, 1);
  value(0, 0) = (kxx.sum() - kxx.trace()) * cxx +
                (kyy.sum() - kyy.trace()) * cyy - kxy.sum() * cxy;

  const double inv_bw2 = 1.0 / (bandwidth * bandwidth);
  return t.emplace(
      std::move(value),
      [x, y, kxx, kxy, cxx, cxy, inv_bw2](Tape& tt, const Eigen::MatrixXd& g) {
        const Eigen::MatrixXd& xv2 = tt.value(x);
        const int mm = static_cast<int>(xv2.rows());
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(mm, xv2.cols());
        // d/dx_p of the xx block: 2*cxx * sum_{j != p} k(x_p,x_j)(x_j - x_p)/bw^2
        Eigen::VectorXd kxx_rowsum = kxx.rowwise().sum();
        grad += 2.0 * cxx * inv_bw2 *
                (kxx * xv2 - kxx_rowsum.asDiagonal() * xv2);
        // d/dx_p of the cross block: -cxy * sum_j k(x_p,y_j)(y_j - x_p)/bw^2
        Eigen::VectorXd kxy_rowsum = kxy.rowwise().sum();
        grad += -cxy * inv_bw2 * (kxy * y - kxy_rowsum.asDiagonal() * xv2);
        tt.accumulate(x, g(0, 0) * grad);
      });
}

}  // namespace focal::ad
