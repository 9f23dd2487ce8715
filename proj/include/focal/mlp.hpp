#pragma once

#include <string>
#include <vector>

#include "focal/rng.hpp"
#include "focal/tape.hpp"

namespace focal::nn {

enum class Activation { relu };
enum class OutputTransform { identity, tanh };

std::string to_string(Activation a);
std::string to_string(OutputTransform t);
Activation activation_from_string(const std::string& s);
OutputTransform output_transform_from_string(const std::string& s);

struct DenseLayer {
  ad::Parameter weight;  // fan_out x fan_in
  ad::Parameter bias;    // 1 x fan_out
};

// Plain multilayer perceptron. widths = [in, h1, ..., out]; hidden layers use
// the hidden activation, the last layer applies the output transform.
struct Mlp {
  std::vector<int> widths;
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::relu;
  OutputTransform output = OutputTransform::identity;
  std::string name;

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
};

// Weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
Mlp make_mlp(std::string name, std::vector<int> widths, OutputTransform output,
             Rng& rng, Activation hidden = Activation::relu);

// Recorded forward pass. With track_params = false the weights enter the tape
// as constants: gradients still flow through the input but never reach the
// network's parameters.
ad::Var forward(const Mlp& net, ad::Tape& tape, ad::Var input,
                bool track_params = true);

// Tape-free forward pass for evaluation paths.
Eigen::MatrixXd forward_plain(const Mlp& net, const Eigen::MatrixXd& input);

bool same_architecture(const Mlp& a, const Mlp& b);

}  // namespace focal::nn
