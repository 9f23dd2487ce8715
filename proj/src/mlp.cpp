#include "focal/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace focal::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
  }
  return "relu";
}

std::string to_string(OutputTransform t) {
  return t == OutputTransform::tanh ? "tanh" : "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation: " + s);
}

OutputTransform output_transform_from_string(const std::string& s) {
  if (s == "identity") return OutputTransform::identity;
  if (s == "tanh") return OutputTransform::tanh;
  throw std::invalid_argument("unknown output transform: " + s);
}

std::vector<ad::Parameter*> Mlp::parameters() {
  std::vector<ad::Parameter*> out;
  out.reserve(layers.size() * 2);
  for (auto& layer : layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const ad::Parameter*> Mlp::parameters() const {
  std::vector<const ad::Parameter*> out;
  out.reserve(layers.size() * 2);
  for (const auto& layer : layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

Mlp make_mlp(std::string name, std::vector<int> widths, OutputTransform output,
             Rng& rng, Activation hidden) {
  if (widths.size() < 2) {
    throw std::invalid_argument("make_mlp: need at least input and output widths");
  }
  for (const int w : widths) {
    if (w <= 0) throw std::invalid_argument("make_mlp: widths must be positive");
  }
  Mlp net;
  net.name = std::move(name);
  net.widths = std::move(widths);
  net.hidden = hidden;
  net.output = output;
  net.layers.resize(net.widths.size() - 1);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const int fan_in = net.widths[l];
    const int fan_out = net.widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i) {
      for (int j = 0; j < fan_in; ++j) {
        w(i, j) = rng.uniform(-bound, bound);
      }
    }
    net.layers[l].weight =
        ad::Parameter{std::move(w), net.name + ".w" + std::to_string(l)};
    net.layers[l].bias = ad::Parameter{Eigen::MatrixXd::Zero(1, fan_out),
                                       net.name + ".b" + std::to_string(l)};
  }
  return net;
}

ad::Var forward(const Mlp& net, ad::Tape& tape, ad::Var input,
                bool track_params) {
  if (tape.value(input).cols() != net.input_dim()) {
    throw std::invalid_argument(
        "forward(" + net.name + "): input width " +
        std::to_string(tape.value(input).cols()) + " does not match layer 0 (" +
        std::to_string(net.input_dim()) + ")");
  }
  ad::Var h = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    ad::Var w = track_params ? tape.param(net.layers[l].weight)
                             : tape.constant(net.layers[l].weight.value);
    ad::Var b = track_params ? tape.param(net.layers[l].bias)
                             : tape.constant(net.layers[l].bias.value);
    h = ad::affine(tape, h, w, b);
    const bool last = (l + 1 == net.layers.size());
    if (!last) {
      h = ad::relu(tape, h);
    } else if (net.output == OutputTransform::tanh) {
      h = ad::tanh_squash(tape, h);
    }
  }
  return h;
}

Eigen::MatrixXd forward_plain(const Mlp& net, const Eigen::MatrixXd& input) {
  if (input.cols() != net.input_dim()) {
    throw std::invalid_argument(
        "forward_plain(" + net.name + "): input width " +
        std::to_string(input.cols()) + " does not match layer 0 (" +
        std::to_string(net.input_dim()) + ")");
  }
  Eigen::MatrixXd h = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Eigen::MatrixXd y = h * net.layers[l].weight.value.transpose();
    y.rowwise() += net.layers[l].bias.value.row(0);
    const bool last = (l + 1 == net.layers.size());
    if (!last) {
      h = y.cwiseMax(0.0);
    } else if (net.output == OutputTransform::tanh) {
      constexpr double kBound = 1.0 - 1e-12;
      h = y.array().tanh().cwiseMin(kBound).cwiseMax(-kBound);
    } else {
      h = std::move(y);
    }
  }
  return h;
}

bool same_architecture(const Mlp& a, const Mlp& b) {
  return a.widths == b.widths && a.hidden == b.hidden && a.output == b.output;
}

}  // namespace focal::nn
