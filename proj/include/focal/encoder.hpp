#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "focal/envs.hpp"
#include "focal/mlp.hpp"
#include "focal/tape.hpp"

namespace focal::encoder {

inline constexpr int kTransitionFeatureDim = 7;  // (s, a, s', r)

// Deterministic context encoder q(z|c): an MLP over single transitions with a
// tanh output, pooled by a mean whose summation order is canonical, so the
// task embedding is exactly permutation-invariant.
struct ContextEncoder {
  nn::Mlp net;  // input 7, output latent_dim, tanh output transform
  int latent_dim = 5;
};

ContextEncoder make_context_encoder(int latent_dim, int width, int depth,
                                    Rng& rng);

struct LatentEmbedding {
  Eigen::VectorXd z;
  int task_id = 0;
};

// One feature row per transition: (s, a, s', r), reward unscaled.
Eigen::MatrixXd context_matrix(std::span<const envs::Transition> transitions);

// Row k is the encoding of transition k; every entry lies strictly in (-1,1).
ad::Var embed_batch(const ContextEncoder& enc, ad::Tape& tape,
                    std::span<const envs::Transition> transitions,
                    bool track_params = true);

// Mean-pooled task embedding, exactly invariant under context permutation.
ad::Var embed_task(const ContextEncoder& enc, ad::Tape& tape,
                   std::span<const envs::Transition> context,
                   bool track_params = true);

// Tape-free pooled embedding for evaluation paths; bitwise-identical to the
// recorded version.
Eigen::VectorXd embed_task_plain(const ContextEncoder& enc,
                                 std::span<const envs::Transition> context);

// ---- distance-metric losses ----

enum class DmlVariant { inverse_square, inverse, linear, square };

std::string to_string(DmlVariant v);
DmlVariant dml_variant_from_string(const std::string& s);

struct DmlConfig {
  DmlVariant variant = DmlVariant::inverse_square;
  double beta = 1.0;
  double epsilon = 0.1;
  double margin = 0.0;  // positive-power variants only
};

// Default weights per variant (inverse-square 1, inverse 2, linear 8,
// square 16; epsilon 0.1 throughout). The margin of the positive-power
// variants is anchored to the random-pair distance sqrt(2l/3).
DmlConfig default_dml_config(DmlVariant variant, int latent_dim);

// Pairwise term between two pooled embeddings (both 1 x l nodes):
//   same task:          ||z_i - z_j||^2
//   different, inverse: beta / (||z_i - z_j||^n + epsilon), n in {1, 2}
//   different, positive: beta * max(0, margin - ||z_i - z_j||)^p, p in {1, 2}
ad::Var dml_pair_loss(ad::Tape& tape, ad::Var z_i, ad::Var z_j, bool same_task,
                      const DmlConfig& cfg);

// Two independent context mini-batches per task; the second feeds the
// same-task pull term. The total runs over ordered task pairs.
struct TaskContext {
  std::vector<envs::Transition> primary;
  std::vector<envs::Transition> secondary;
  int task_id = 0;
};

ad::Var dml_meta_loss(const ContextEncoder& enc, ad::Tape& tape,
                      std::span<const TaskContext> batches,
                      const DmlConfig& cfg);

// ---- embedding statistics ----

// Both sides of the identity sum_{i != j} (x_i - x_j)^2 = 2 N^2 Var(X), with
// the population variance. Returned as (lhs, rhs) for equality testing.
struct VarianceCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};
VarianceCheck contrastive_variance_check(std::span<const double> x);

// Expected distance of uniformly random pairs on (-1,1)^l.
double esr_threshold(int latent_dim);

// Fraction of different-task pairs separated farther than the threshold.
double esr(std::span<const LatentEmbedding> embeddings, int latent_dim);

// Root of the mean squared pairwise distance across different-task pairs.
double rms_distance(std::span<const LatentEmbedding> embeddings);

// ---- text export consumed by the analysis module ----
// One row per context batch: task_id followed by the components of z.
void write_embeddings(const std::filesystem::path& path,
                      std::span<const LatentEmbedding> embeddings);
std::vector<LatentEmbedding> read_embeddings(const std::filesystem::path& path);

}  // namespace focal::encoder
