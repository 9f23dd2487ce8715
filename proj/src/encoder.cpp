#include "focal/encoder.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "focal/serial.hpp"

namespace focal::encoder {

ContextEncoder make_context_encoder(int latent_dim, int width, int depth,
                                    Rng& rng) {
  std::vector<int> widths{kTransitionFeatureDim};
  for (int d = 0; d < depth; ++d) widths.push_back(width);
  widths.push_back(latent_dim);
  ContextEncoder enc;
  enc.net = nn::make_mlp("encoder", std::move(widths),
                         nn::OutputTransform::tanh, rng);
  enc.latent_dim = latent_dim;
  return enc;
}

Eigen::MatrixXd context_matrix(std::span<const envs::Transition> transitions) {
  if (transitions.empty()) {
    throw std::invalid_argument("context_matrix: empty transition batch");
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(transitions.size()),
                    kTransitionFeatureDim);
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const envs::Transition& tr = transitions[i];
    x.row(static_cast<Eigen::Index>(i)) << tr.state.x(), tr.state.y(),
        tr.action.x(), tr.action.y(), tr.next_state.x(), tr.next_state.y(),
        tr.reward;
  }
  return x;
}

ad::Var embed_batch(const ContextEncoder& enc, ad::Tape& tape,
                    std::span<const envs::Transition> transitions,
                    bool track_params) {
  return nn::forward(enc.net, tape, tape.constant(context_matrix(transitions)),
                     track_params);
}

namespace {

// Dense matrix products are bitwise sensitive to row position (SIMD panel
// boundaries), so exact permutation invariance requires canonicalizing the
// batch before the forward pass, not just the pooling order.
Eigen::MatrixXd sorted_context_matrix(
    std::span<const envs::Transition> context) {
  Eigen::MatrixXd x = context_matrix(context);
  std::vector<int> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&x](int i, int j) {
    for (int c = 0; c < x.cols(); ++c) {
      if (x(i, c) != x(j, c)) return x(i, c) < x(j, c);
    }
    return false;
  });
  Eigen::MatrixXd sorted(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < sorted.rows(); ++i) {
    sorted.row(i) = x.row(order[static_cast<std::size_t>(i)]);
  }
  return sorted;
}

}  // namespace

ad::Var embed_task(const ContextEncoder& enc, ad::Tape& tape,
                   std::span<const envs::Transition> context,
                   bool track_params) {
  ad::Var rows = nn::forward(
      enc.net, tape, tape.constant(sorted_context_matrix(context)),
      track_params);
  return ad::mean_rows_canonical(tape, rows);
}

Eigen::VectorXd embed_task_plain(const ContextEncoder& enc,
                                 std::span<const envs::Transition> context) {
  const Eigen::MatrixXd rows =
      nn::forward_plain(enc.net, sorted_context_matrix(context));
  return ad::canonical_row_mean(rows).transpose();
}

std::string to_string(DmlVariant v) {
  switch (v) {
    case DmlVariant::inverse_square:
      return "inverse-square";
    case DmlVariant::inverse:
      return "inverse";
    case DmlVariant::linear:
      return "linear";
    case DmlVariant::square:
      return "square";
  }
  return "inverse-square";
}

DmlVariant dml_variant_from_string(const std::string& s) {
  if (s == "inverse-square") return DmlVariant::inverse_square;
  if (s == "inverse") return DmlVariant::inverse;
  if (s == "linear") return DmlVariant::linear;
  if (s == "square") return DmlVariant::square;
  throw std::invalid_argument("unknown DML variant: " + s);
}

DmlConfig default_dml_config(DmlVariant variant, int latent_dim) {
  DmlConfig cfg;
  cfg.variant = variant;
  cfg.epsilon = 0.1;
  switch (variant) {
    case DmlVariant::inverse_square:
      cfg.beta = 1.0;
      break;
    case DmlVariant::inverse:
      cfg.beta = 2.0;
      break;
    case DmlVariant::linear:
      cfg.beta = 8.0;
      break;
    case DmlVariant::square:
      cfg.beta = 16.0;
      break;
  }
  cfg.margin = esr_threshold(latent_dim);
  return cfg;
}

ad::Var dml_pair_loss(ad::Tape& tape, ad::Var z_i, ad::Var z_j, bool same_task,
                      const DmlConfig& cfg) {
  if (tape.value(z_i).cols() != tape.value(z_j).cols() ||
      tape.value(z_i).rows() != 1 || tape.value(z_j).rows() != 1) {
    throw std::invalid_argument(
        "dml_pair_loss: embeddings must be 1 x l of equal dimension");
  }
  ad::Var sq_dist = ad::sum_all(tape, ad::square(tape, ad::sub(tape, z_i, z_j)));
  if (same_task) return sq_dist;
  if (cfg.beta <= 0.0 || cfg.epsilon <= 0.0) {
    throw std::invalid_argument("dml_pair_loss: beta and epsilon must be > 0");
  }
  switch (cfg.variant) {
    case DmlVariant::inverse_square:
      return ad::scale(tape,
                       ad::recip(tape, ad::add_scalar(tape, sq_dist, cfg.epsilon)),
                       cfg.beta);
    case DmlVariant::inverse: {
      ad::Var dist = ad::sqrt_(tape, sq_dist);
      return ad::scale(
          tape, ad::recip(tape, ad::add_scalar(tape, dist, cfg.epsilon)),
          cfg.beta);
    }
    case DmlVariant::linear: {
      ad::Var dist = ad::sqrt_(tape, sq_dist);
      ad::Var hinge =
          ad::relu(tape, ad::add_scalar(tape, ad::neg(tape, dist), cfg.margin));
      return ad::scale(tape, hinge, cfg.beta);
    }
    case DmlVariant::square: {
      ad::Var dist = ad::sqrt_(tape, sq_dist);
      ad::Var hinge =
          ad::relu(tape, ad::add_scalar(tape, ad::neg(tape, dist), cfg.margin));
      return ad::scale(tape, ad::square(tape, hinge), cfg.beta);
    }
  }
  throw std::logic_error("dml_pair_loss: unreachable");
}

ad::Var dml_meta_loss(const ContextEncoder& enc, ad::Tape& tape,
                      std::span<const TaskContext> batches,
                      const DmlConfig& cfg) {
  if (batches.size() < 2) {
    throw std::invalid_argument("dml_meta_loss: need at least 2 tasks");
  }
  std::vector<ad::Var> z_primary, z_secondary;
  z_primary.reserve(batches.size());
  z_secondary.reserve(batches.size());
  for (const TaskContext& b : batches) {
    if (b.primary.empty() || b.secondary.empty()) {
      throw std::invalid_argument("dml_meta_loss: task " +
                                  std::to_string(b.task_id) +
                                  " has an empty context batch");
    }
    z_primary.push_back(embed_task(enc, tape, b.primary));
    z_secondary.push_back(embed_task(enc, tape, b.secondary));
  }
  ad::Var total = tape.constant(Eigen::MatrixXd::Zero(1, 1));
  for (std::size_t i = 0; i < batches.size(); ++i) {
    for (std::size_t j = 0; j < batches.size(); ++j) {
      ad::Var term =
          i == j ? dml_pair_loss(tape, z_primary[i], z_secondary[i], true, cfg)
                 : dml_pair_loss(tape, z_primary[i], z_primary[j], false, cfg);
      total = ad::add(tape, total, term);
    }
  }
  return total;
}

VarianceCheck contrastive_variance_check(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) {
    throw std::invalid_argument("contrastive_variance_check: need N >= 2");
  }
  VarianceCheck out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = x[i] - x[j];
      out.lhs += d * d;
    }
  }
  double mean = 0.0;
  for (const double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);  // population variance, as in the identity
  out.rhs = 2.0 * static_cast<double>(n) * static_cast<double>(n) * var;
  return out;
}

double esr_threshold(int latent_dim) {
  return std::sqrt(2.0 * static_cast<double>(latent_dim) / 3.0);
}

namespace {

template <typename Fn>
void for_each_cross_task_pair(std::span<const LatentEmbedding> embeddings,
                              Fn&& fn) {
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      if (embeddings[i].task_id == embeddings[j].task_id) continue;
      fn(embeddings[i], embeddings[j]);
    }
  }
}

}  // namespace

double esr(std::span<const LatentEmbedding> embeddings, int latent_dim) {
  const double threshold = esr_threshold(latent_dim);
  long pairs = 0;
  long separated = 0;
  for_each_cross_task_pair(embeddings, [&](const LatentEmbedding& a,
                                           const LatentEmbedding& b) {
    ++pairs;
    if ((a.z - b.z).norm() > threshold) ++separated;
  });
  if (pairs == 0) {
    throw std::invalid_argument(
        "esr: undefined, need embeddings from at least 2 distinct tasks");
  }
  return static_cast<double>(separated) / static_cast<double>(pairs);
}

double rms_distance(std::span<const LatentEmbedding> embeddings) {
  long pairs = 0;
  double sq_sum = 0.0;
  for_each_cross_task_pair(
      embeddings, [&](const LatentEmbedding& a, const LatentEmbedding& b) {
        ++pairs;
        sq_sum += (a.z - b.z).squaredNorm();
      });
  if (pairs == 0) {
    throw std::invalid_argument(
        "rms_distance: undefined, need embeddings from at least 2 distinct tasks");
  }
  return std::sqrt(sq_sum / static_cast<double>(pairs));
}

void write_embeddings(const std::filesystem::path& path,
                      std::span<const LatentEmbedding> embeddings) {
  std::string out;
  for (const LatentEmbedding& e : embeddings) {
    out += std::to_string(e.task_id);
    for (Eigen::Index k = 0; k < e.z.size(); ++k) {
      out += " " + serial::format_double(e.z(k));
    }
    out += "\n";
  }
  serial::write_file(path, out);
}

std::vector<LatentEmbedding> read_embeddings(
    const std::filesystem::path& path) {
  std::istringstream in(serial::read_file(path));
  std::vector<LatentEmbedding> out;
  std::string line;
  Eigen::Index dim = -1;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    LatentEmbedding e;
    if (!(row >> e.task_id)) {
      throw std::runtime_error("embeddings " + path.string() + ": line " +
                               std::to_string(line_no) + ": bad task id");
    }
    std::vector<double> vals;
    double v = 0.0;
    while (row >> v) vals.push_back(v);
    if (vals.empty()) {
      throw std::runtime_error("embeddings " + path.string() + ": line " +
                               std::to_string(line_no) + ": no components");
    }
    if (dim < 0) dim = static_cast<Eigen::Index>(vals.size());
    if (static_cast<Eigen::Index>(vals.size()) != dim) {
      throw std::runtime_error("embeddings " + path.string() + ": line " +
                               std::to_string(line_no) +
                               ": inconsistent vector length");
    }
    e.z = Eigen::Map<Eigen::VectorXd>(vals.data(), dim);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace focal::encoder
