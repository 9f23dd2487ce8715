#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace focal::ad {

// A named, trainable dense matrix. Parameters live in the network structs and
// outlive any tape; tapes reference them by address for one optimization step.
struct Parameter {
  Eigen::MatrixXd value;
  std::string name;
};

// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

// Reverse-mode tape over dense matrix nodes. One tape records one loss
// evaluation; it is discarded after the optimizer step.
class Tape {
 public:
  Var constant(Eigen::MatrixXd value);
  // Tracked leaf. Adding the same parameter twice returns the same node, so
  // gradients from multiple uses accumulate. The tape never mutates the
  // parameter; it snapshots the value and keys gradients by address.
  Var param(const Parameter& p);

  void backward(Var loss);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[check(v)].value; }
  // Gradient of the last backward() loss with respect to node v.
  const Eigen::MatrixXd& grad(Var v) const;
  // Gradient keyed by parameter identity; zero matrix if the parameter was
  // never recorded or is unreachable from the loss.
  Eigen::MatrixXd grad_of(const Parameter& p) const;

  int size() const { return static_cast<int>(nodes_.size()); }

  // --- internal use by the op free functions ---
  using BackFn = std::function<void(Tape&, const Eigen::MatrixXd&)>;
  Var emplace(Eigen::MatrixXd value, BackFn back);
  void accumulate(Var v, const Eigen::MatrixXd& g);

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;  // empty until touched by backward
    BackFn back;           // propagates this node's grad into its parents
  };

  int check(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  Eigen::MatrixXd zero_like_;  // scratch for grad() on untouched nodes
};

// ---- elementwise / structural ops ----
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);  // Hadamard product
Var neg(Tape& t, Var a);
Var scale(Tape& t, Var a, double c);
Var add_scalar(Tape& t, Var a, double c);
Var square(Tape& t, Var a);
Var sqrt_(Tape& t, Var a);
Var recip(Tape& t, Var a);
Var exp_(Tape& t, Var a);
Var log_(Tape& t, Var a);
Var relu(Tape& t, Var a);
// tanh squashed to stay strictly inside (-1, 1) even where std::tanh rounds
// to +/-1 (|x| >~ 19).
Var tanh_squash(Tape& t, Var a);
// log(1 - tanh(x)^2), evaluated stably as 2(log 2 - x - log(1 + e^{-2x})).
Var log_one_minus_tanh2(Tape& t, Var a);
// Pass-through inside [lo, hi], zero gradient outside.
Var clamp(Tape& t, Var a, double lo, double hi);
// Elementwise minimum; ties route the gradient to a.
Var min_el(Tape& t, Var a, Var b);

// ---- matrix ops ----
Var matmul(Tape& t, Var a, Var b);
// x: batch x in, w: out x in, b: 1 x out  ->  batch x out
Var affine(Tape& t, Var x, Var w, Var b);
Var concat_cols(Tape& t, Var a, Var b);
Var slice_cols(Tape& t, Var a, int first, int count);

// ---- reductions ----
Var sum_all(Tape& t, Var a);   // 1x1
Var mean_all(Tape& t, Var a);  // 1x1
Var sum_cols(Tape& t, Var a);  // batch x m -> batch x 1 (sum along each row)
// Column-wise mean with a canonical (value-sorted) summation order, so the
// result is bitwise independent of the row order of a.
Var mean_rows_canonical(Tape& t, Var a);  // n x m -> 1 x m

// Plain (tape-free) canonical row mean used by both the op above and
// no-gradient evaluation paths.
Eigen::RowVectorXd canonical_row_mean(const Eigen::MatrixXd& rows);

// Unbiased squared-MMD estimate with an RBF kernel of the given bandwidth.
// x is differentiated; y enters as data. Both are sample-per-row matrices.
Var mmd_rbf(Tape& t, Var x, const Eigen::MatrixXd& y, double bandwidth);

}  // namespace focal::ad
