#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "focal/adam.hpp"
#include "focal/datagen.hpp"
#include "focal/encoder.hpp"
#include "focal/rng.hpp"

using namespace focal;
using namespace focal::encoder;

namespace {

std::vector<envs::Transition> random_context(int n, Rng& rng) {
  std::vector<envs::Transition> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    envs::Transition tr;
    tr.state = Eigen::Vector2d(rng.uniform(-1, 1), rng.uniform(-1, 1));
    tr.action = Eigen::Vector2d(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    tr.next_state = tr.state + tr.action;
    tr.reward = rng.uniform(-1, 1);
    out.push_back(tr);
  }
  return out;
}

ContextEncoder small_encoder(std::uint64_t seed, int latent_dim = 5) {
  Rng rng(seed);
  return make_context_encoder(latent_dim, 16, 2, rng);
}

}  // namespace

TEST_CASE("zero-weight encoder embeds every transition to the origin") {
  ContextEncoder enc = small_encoder(1);
  for (auto* p : enc.net.parameters()) p->value.setZero();
  Rng rng(2);
  const auto ctx = random_context(6, rng);
  ad::Tape t;
  const Eigen::MatrixXd rows = t.value(embed_batch(enc, t, ctx));
  CHECK(rows.isZero(0.0));
}

TEST_CASE("embedding rows are a pointwise map of the transitions") {
  ContextEncoder enc = small_encoder(3);
  Rng rng(4);
  auto ctx = random_context(8, rng);
  ctx[5] = ctx[2];  // duplicated transition duplicates its row
  ad::Tape t;
  const Eigen::MatrixXd rows = t.value(embed_batch(enc, t, ctx));
  CHECK(rows.row(5) == rows.row(2));

  // Per-row oracle: each row equals an independent single-transition encoding.
  for (int i = 0; i < 8; ++i) {
    ad::Tape ti;
    const Eigen::MatrixXd single = ti.value(
        embed_batch(enc, ti, std::span<const envs::Transition>(&ctx[i], 1)));
    CHECK((rows.row(i) - single.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  }

  for (int i = 0; i < rows.rows(); ++i) {
    for (int j = 0; j < rows.cols(); ++j) {
      CHECK(rows(i, j) > -1.0);
      CHECK(rows(i, j) < 1.0);
    }
  }
}

TEST_CASE("embed_task of a single transition equals its encoding") {
  ContextEncoder enc = small_encoder(5);
  Rng rng(6);
  const auto ctx = random_context(1, rng);
  ad::Tape t;
  const Eigen::MatrixXd z = t.value(embed_task(enc, t, ctx));
  const Eigen::MatrixXd row = t.value(embed_batch(enc, t, ctx));
  CHECK(z == row);
}

TEST_CASE("embed_task is bitwise invariant under any context permutation") {
  ContextEncoder enc = small_encoder(7);
  Rng rng(8);
  auto ctx = random_context(32, rng);
  const Eigen::VectorXd base = embed_task_plain(enc, ctx);

  auto reversed = ctx;
  std::reverse(reversed.begin(), reversed.end());
  const Eigen::VectorXd rev = embed_task_plain(enc, reversed);
  CHECK(rev == base);

  for (int shuffle = 0; shuffle < 10; ++shuffle) {
    rng.shuffle(ctx);
    CHECK(embed_task_plain(enc, ctx) == base);
  }

  // Tape and plain paths agree bitwise.
  ad::Tape t;
  const Eigen::MatrixXd taped = t.value(embed_task(enc, t, ctx));
  CHECK(taped.row(0).transpose() == base);
}

TEST_CASE("embed_task of a union is the size-weighted mean of the halves") {
  ContextEncoder enc = small_encoder(9);
  Rng rng(10);
  const auto a = random_context(12, rng);
  const auto b = random_context(20, rng);
  auto both = a;
  both.insert(both.end(), b.begin(), b.end());
  const Eigen::VectorXd za = embed_task_plain(enc, a);
  const Eigen::VectorXd zb = embed_task_plain(enc, b);
  const Eigen::VectorXd zu = embed_task_plain(enc, both);
  const Eigen::VectorXd want = (12.0 * za + 20.0 * zb) / 32.0;
  CHECK((zu - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pair loss: coincident same-task embeddings cost zero") {
  ad::Tape t;
  Eigen::MatrixXd z(1, 5);
  z << 0.1, -0.2, 0.3, 0.0, 0.5;
  const DmlConfig cfg = default_dml_config(DmlVariant::inverse_square, 5);
  ad::Var loss =
      dml_pair_loss(t, t.constant(z), t.constant(z), /*same_task=*/true, cfg);
  CHECK(t.value(loss)(0, 0) == 0.0);
}

TEST_CASE("pair loss matches direct substitution for the inverse variants") {
  ad::Tape t;
  Eigen::MatrixXd zi = Eigen::MatrixXd::Zero(1, 4);
  Eigen::MatrixXd zj = Eigen::MatrixXd::Zero(1, 4);
  zj(0, 0) = 1.0;  // distance 1

  DmlConfig inv_sq = default_dml_config(DmlVariant::inverse_square, 4);
  CHECK(inv_sq.beta == 1.0);
  CHECK(inv_sq.epsilon == 0.1);
  ad::Var a =
      dml_pair_loss(t, t.constant(zi), t.constant(zj), false, inv_sq);
  CHECK(t.value(a)(0, 0) == doctest::Approx(1.0 / 1.1).epsilon(1e-12));

  zj(0, 0) = 0.5;  // distance 0.5
  DmlConfig inv = default_dml_config(DmlVariant::inverse, 4);
  CHECK(inv.beta == 2.0);
  ad::Var b = dml_pair_loss(t, t.constant(zi), t.constant(zj), false, inv);
  CHECK(t.value(b)(0, 0) == doctest::Approx(2.0 / 0.6).epsilon(1e-12));
}

TEST_CASE("pair loss margin forms for the positive-power variants") {
  ad::Tape t;
  Eigen::MatrixXd zi = Eigen::MatrixXd::Zero(1, 5);
  Eigen::MatrixXd zj = Eigen::MatrixXd::Zero(1, 5);
  zj(0, 0) = 1.0;
  const double m = esr_threshold(5);

  DmlConfig lin = default_dml_config(DmlVariant::linear, 5);
  ad::Var a = dml_pair_loss(t, t.constant(zi), t.constant(zj), false, lin);
  CHECK(t.value(a)(0, 0) == doctest::Approx(8.0 * (m - 1.0)).epsilon(1e-12));

  DmlConfig sq = default_dml_config(DmlVariant::square, 5);
  ad::Var b = dml_pair_loss(t, t.constant(zi), t.constant(zj), false, sq);
  CHECK(t.value(b)(0, 0) ==
        doctest::Approx(16.0 * (m - 1.0) * (m - 1.0)).epsilon(1e-12));

  // Beyond the margin the hinge is inactive.
  zj(0, 0) = m + 0.5;
  ad::Var c = dml_pair_loss(t, t.constant(zi), t.constant(zj), false, sq);
  CHECK(t.value(c)(0, 0) == 0.0);

  CHECK_THROWS_AS(dml_pair_loss(t, t.constant(zi),
                                t.constant(Eigen::MatrixXd::Zero(1, 3)), false,
                                sq),
                  std::invalid_argument);
}

TEST_CASE("collapsed encoder: pull terms vanish, each push term is beta/epsilon") {
  ContextEncoder enc = small_encoder(11);
  for (auto* p : enc.net.parameters()) p->value.setZero();  // constant output 0
  Rng rng(12);
  std::vector<TaskContext> batches(2);
  batches[0] = {random_context(8, rng), random_context(8, rng), 0};
  batches[1] = {random_context(8, rng), random_context(8, rng), 1};
  const DmlConfig cfg = default_dml_config(DmlVariant::inverse_square, 5);
  ad::Tape t;
  ad::Var loss = dml_meta_loss(enc, t, batches, cfg);
  // Two ordered push pairs at beta/epsilon each; both pull terms are zero.
  CHECK(t.value(loss)(0, 0) ==
        doctest::Approx(2.0 * cfg.beta / cfg.epsilon).epsilon(1e-12));
}

TEST_CASE("meta loss enumerates ordered pairs plus per-task pull terms") {
  ContextEncoder enc = small_encoder(13);
  Rng rng(14);
  std::vector<TaskContext> batches(2);
  batches[0] = {random_context(6, rng), random_context(6, rng), 0};
  batches[1] = {random_context(6, rng), random_context(6, rng), 1};
  const DmlConfig cfg = default_dml_config(DmlVariant::inverse, 5);

  ad::Tape t;
  const double total = t.value(dml_meta_loss(enc, t, batches, cfg))(0, 0);

  auto pair_value = [&](std::span<const envs::Transition> ca,
                        std::span<const envs::Transition> cb, bool same) {
    ad::Tape tt;
    return tt.value(dml_pair_loss(tt, embed_task(enc, tt, ca),
                                  embed_task(enc, tt, cb), same, cfg))(0, 0);
  };
  const double want =
      pair_value(batches[0].primary, batches[0].secondary, true) +
      pair_value(batches[0].primary, batches[1].primary, false) +
      pair_value(batches[1].primary, batches[0].primary, false) +
      pair_value(batches[1].primary, batches[1].secondary, true);
  CHECK(total == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("meta loss matches an independent double-loop recomputation") {
  ContextEncoder enc = small_encoder(15);
  Rng rng(16);
  const int m_tasks = 4;
  std::vector<TaskContext> batches;
  for (int i = 0; i < m_tasks; ++i) {
    batches.push_back({random_context(5, rng), random_context(7, rng), i});
  }
  const DmlConfig cfg = default_dml_config(DmlVariant::inverse_square, 5);
  ad::Tape t;
  const double total = t.value(dml_meta_loss(enc, t, batches, cfg))(0, 0);

  // Brute force with plain arithmetic on pooled embeddings.
  std::vector<Eigen::VectorXd> zp, zs;
  for (const auto& b : batches) {
    zp.push_back(embed_task_plain(enc, b.primary));
    zs.push_back(embed_task_plain(enc, b.secondary));
  }
  double want = 0.0;
  for (int i = 0; i < m_tasks; ++i) {
    for (int j = 0; j < m_tasks; ++j) {
      if (i == j) {
        want += (zp[i] - zs[i]).squaredNorm();
      } else {
        want += cfg.beta / ((zp[i] - zp[j]).squaredNorm() + cfg.epsilon);
      }
    }
  }
  CHECK(total == doctest::Approx(want).epsilon(1e-12));

  CHECK_THROWS_AS(
      dml_meta_loss(enc, t, std::span<const TaskContext>(batches.data(), 1),
                    cfg),
      std::invalid_argument);
}

TEST_CASE("inverse-power push gradient drives embeddings apart") {
  Rng rng(17);
  for (const auto variant : {DmlVariant::inverse_square, DmlVariant::inverse}) {
    const DmlConfig cfg = default_dml_config(variant, 5);
    for (int trial = 0; trial < 20; ++trial) {
      ad::Parameter zi{Eigen::MatrixXd(1, 5), "zi"};
      Eigen::MatrixXd zj(1, 5);
      for (int k = 0; k < 5; ++k) {
        zi.value(0, k) = rng.uniform(-0.9, 0.9);
        zj(0, k) = rng.uniform(-0.9, 0.9);
      }
      ad::Tape t;
      ad::Var loss =
          dml_pair_loss(t, t.param(zi), t.constant(zj), false, cfg);
      t.backward(loss);
      const Eigen::MatrixXd g = t.grad_of(zi);
      // Descent on the push term moves z_i away from z_j.
      CHECK((g.row(0) * (zi.value.row(0) - zj.row(0)).transpose())(0, 0) < 0.0);
    }
  }
}

TEST_CASE("one small pull step strictly contracts the pair distance") {
  ContextEncoder enc = small_encoder(19);
  Rng rng(20);
  const auto ca = random_context(6, rng);
  const auto cb = random_context(6, rng);
  auto distance = [&] {
    return (embed_task_plain(enc, ca) - embed_task_plain(enc, cb)).norm();
  };
  const double before = distance();
  REQUIRE(before > 0.0);

  ad::Tape t;
  ad::Var loss = dml_pair_loss(t, embed_task(enc, t, ca),
                               embed_task(enc, t, cb), /*same_task=*/true,
                               default_dml_config(DmlVariant::inverse_square, 5));
  t.backward(loss);
  const double lr = 1e-3;
  for (auto* p : enc.net.parameters()) {
    p->value -= lr * t.grad_of(*p);
  }
  CHECK(distance() < before);
}

TEST_CASE("lemma identity: both sides agree on trivial and hand cases") {
  std::vector<double> constant(10, 3.25);
  const auto c = contrastive_variance_check(constant);
  CHECK(c.lhs == 0.0);
  CHECK(c.rhs == 0.0);

  std::vector<double> two{0.0, 1.0};
  const auto t = contrastive_variance_check(two);
  CHECK(t.lhs == doctest::Approx(2.0).epsilon(1e-15));
  // Var = 0.25, N^2 = 4: rhs = 2 * 4 * 0.25 = 2.
  CHECK(t.rhs == doctest::Approx(2.0).epsilon(1e-15));

  Rng rng(23);
  std::vector<double> x(64);
  for (auto& v : x) v = rng.uniform(-5, 5);
  const auto r = contrastive_variance_check(x);
  CHECK(std::abs(r.lhs - r.rhs) / std::max(r.lhs, 1.0) < 1e-9);

  CHECK_THROWS_AS(contrastive_variance_check(std::vector<double>{1.0}),
                  std::invalid_argument);
}

TEST_CASE("esr: threshold value, degenerate and maximal cases") {
  CHECK(esr_threshold(5) == doctest::Approx(std::sqrt(10.0 / 3.0)).epsilon(1e-15));
  CHECK(esr_threshold(5) == doctest::Approx(1.8257).epsilon(1e-4));

  std::vector<LatentEmbedding> same;
  Eigen::VectorXd z = Eigen::VectorXd::Constant(5, 0.3);
  same.push_back({z, 0});
  same.push_back({z, 1});
  same.push_back({z, 2});
  CHECK(esr(same, 5) == 0.0);

  std::vector<LatentEmbedding> corners;
  corners.push_back({Eigen::VectorXd::Constant(5, -1.0), 0});
  corners.push_back({Eigen::VectorXd::Constant(5, 1.0), 1});
  CHECK((corners[0].z - corners[1].z).norm() ==
        doctest::Approx(2.0 * std::sqrt(5.0)).epsilon(1e-12));
  CHECK(esr(corners, 5) == 1.0);

  std::vector<LatentEmbedding> single{{z, 0}, {z, 0}};
  CHECK_THROWS_AS(esr(single, 5), std::invalid_argument);
}

TEST_CASE("esr threshold matches the Monte-Carlo random-pair RMS distance") {
  Rng rng(29);
  const int n = 200000;
  double sq_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double d = rng.uniform(-1, 1) - rng.uniform(-1, 1);
      s += d * d;
    }
    sq_sum += s;
  }
  const double mc = std::sqrt(sq_sum / n);
  CHECK(std::abs(mc - esr_threshold(5)) / esr_threshold(5) < 0.02);
}

TEST_CASE("rms distance: degenerate, single-pair and brute-force cases") {
  Eigen::VectorXd z = Eigen::VectorXd::Constant(5, 0.1);
  std::vector<LatentEmbedding> same{{z, 0}, {z, 1}};
  CHECK(rms_distance(same) == 0.0);

  std::vector<LatentEmbedding> pair{{z, 0}, {z, 1}};
  pair[1].z(0) += 0.75;
  CHECK(rms_distance(pair) == doctest::Approx(0.75).epsilon(1e-12));

  Rng rng(31);
  std::vector<LatentEmbedding> cloud;
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd v(5);
    for (int k = 0; k < 5; ++k) v(k) = rng.uniform(-1, 1);
    cloud.push_back({v, i % 4});
  }
  double sq = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t j = i + 1; j < cloud.size(); ++j) {
      if (cloud[i].task_id == cloud[j].task_id) continue;
      sq += (cloud[i].z - cloud[j].z).squaredNorm();
      ++count;
    }
  }
  CHECK(rms_distance(cloud) ==
        doctest::Approx(std::sqrt(sq / count)).epsilon(1e-12));
}

TEST_CASE("square-variant training separates tasks worse than inverse-square") {
  // Mini version of the power-law ablation: identical data, seeds and
  // schedule; only the loss variant differs.
  const auto tasks = envs::sample_tasks(envs::Family::point_robot_wind, 8, 41);
  std::vector<datagen::TaskDataset> data;
  datagen::BehaviorPolicy mixed;
  mixed.quality = datagen::Quality::mixed;
  for (const auto& task : tasks) {
    data.push_back(datagen::generate_dataset(task, mixed, 30, 100 + task.task_id));
  }

  auto train_esr = [&](DmlVariant variant) {
    Rng rng(51);
    ContextEncoder enc = make_context_encoder(5, 32, 2, rng);
    const DmlConfig cfg = default_dml_config(variant, 5);
    nn::AdamState opt;
    opt.learning_rate = 1e-3;
    auto params = enc.net.parameters();
    Rng sampler(52);
    for (int step = 0; step < 300; ++step) {
      std::vector<TaskContext> batches;
      for (const auto& d : data) {
        TaskContext b;
        b.task_id = d.task.task_id;
        for (int k = 0; k < 16; ++k) {
          b.primary.push_back(
              d.transitions[sampler.uniform_int(
                  static_cast<int>(d.transitions.size()))]);
          b.secondary.push_back(
              d.transitions[sampler.uniform_int(
                  static_cast<int>(d.transitions.size()))]);
        }
        batches.push_back(std::move(b));
      }
      ad::Tape t;
      t.backward(dml_meta_loss(enc, t, batches, cfg));
      adam_step(params, t, opt);
    }
    Rng eval(53);
    std::vector<LatentEmbedding> embs;
    for (const auto& d : data) {
      for (int rep = 0; rep < 4; ++rep) {
        std::vector<envs::Transition> ctx;
        for (int k = 0; k < 16; ++k) {
          ctx.push_back(d.transitions[eval.uniform_int(
              static_cast<int>(d.transitions.size()))]);
        }
        embs.push_back({embed_task_plain(enc, ctx), d.task.task_id});
      }
    }
    return esr(embs, 5);
  };

  const double esr_inverse_square = train_esr(DmlVariant::inverse_square);
  const double esr_square = train_esr(DmlVariant::square);
  CHECK(esr_inverse_square > esr_square);
}

TEST_CASE("embedding tables round-trip through the text format") {
  Rng rng(61);
  std::vector<LatentEmbedding> embs;
  for (int i = 0; i < 9; ++i) {
    Eigen::VectorXd z(5);
    for (int k = 0; k < 5; ++k) z(k) = rng.uniform(-1, 1);
    embs.push_back({z, i / 3});
  }
  const auto path =
      std::filesystem::temp_directory_path() / "focal_encoder_embs.txt";
  write_embeddings(path, embs);
  const auto back = read_embeddings(path);
  REQUIRE(back.size() == embs.size());
  for (std::size_t i = 0; i < embs.size(); ++i) {
    CHECK(back[i].task_id == embs[i].task_id);
    CHECK(back[i].z == embs[i].z);  // format_double round-trips exactly
  }
  std::filesystem::remove(path);
}
