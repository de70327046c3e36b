#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rgi/dataset.hpp"
#include "rgi/error.hpp"
#include "rgi/model.hpp"
#include "rgi/rng.hpp"
#include "rgi/training.hpp"
#include "support/oracles.hpp"

using namespace rgi;

namespace {

WallRows random_rows(Rng& rng, int walls = 8) {
  WallRows a{};
  for (int i = 0; i < walls; ++i) {
    const double nx = rng.uniform(-1, 1), ny = rng.uniform(-1, 1), nz = rng.uniform(-1, 1);
    const double len = std::sqrt(nx * nx + ny * ny + nz * nz);
    a[static_cast<size_t>(i)] = {nx / len, ny / len, nz / len, rng.uniform(0.5, 4.0)};
  }
  return a;
}

SlotVec random_probs(Rng& rng, double lo = 0.05, double hi = 0.95) {
  SlotVec p{};
  for (double& v : p) v = rng.uniform(lo, hi);
  return p;
}

Sample synthetic_sample(uint64_t seed, int walls) {
  Rng rng(seed);
  Sample s;
  s.shape_id = 0;
  s.num_walls = static_cast<uint8_t>(walls);
  s.seed = seed;
  const WallRows rows = random_rows(rng, walls);
  for (size_t i = 0; i < 8; ++i)
    for (size_t j = 0; j < 4; ++j) s.a[i][j] = rows[i][j];
  for (size_t i = 0; i < 8; ++i) s.p[i] = i < static_cast<size_t>(walls) ? 1.0f : 0.0f;
  s.rir.resize(static_cast<size_t>(Network::kInChannels) * Network::kInTaps);
  for (float& v : s.rir) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return s;
}

// Composite loss with the ground-truth alignment held fixed.
double fixed_perm_loss(const WallRows& a_hat, const SlotVec& p_hat, const WallRows& a_gt,
                       const SlotVec& p_gt, const std::array<int, 8>& perm) {
  WallRows ga{};
  SlotVec gp{};
  for (size_t i = 0; i < 8; ++i) {
    ga[i] = a_gt[static_cast<size_t>(perm[i])];
    gp[i] = p_gt[static_cast<size_t>(perm[i])];
  }
  return angular_loss(a_hat, ga) + kBetaWeight * decision_loss(p_hat, gp);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("angular_loss: alignment, sign and scale invariance, orthogonality") {
  Rng rng(71);
  const WallRows g = random_rows(rng);

  CHECK(angular_loss(g, g) < 1e-9);

  WallRows neg = g, doubled = g;
  for (size_t i = 0; i < 8; ++i)
    for (size_t j = 0; j < 4; ++j) {
      neg[i][j] = -g[i][j];
      doubled[i][j] = 2.0 * g[i][j];
    }
  CHECK(angular_loss(neg, g) == angular_loss(g, g));
  CHECK(angular_loss(doubled, g) < 1e-9);

  WallRows ex{}, ey{};
  ex[0] = {1, 0, 0, 0};
  ey[0] = {0, 1, 0, 0};
  CHECK(angular_loss(ex, ey) == 1.0);

  const WallRows zero{};
  CHECK_THROWS_AS((void)angular_loss(zero, zero), BothZero);
  CHECK(angular_loss(zero, g) == 1.0);  // only the joint-zero case is degenerate
}

TEST_CASE("decision_loss: perfect, uninformative, and clamped predictions") {
  SlotVec gt{};
  for (size_t i = 0; i < 6; ++i) gt[i] = 1.0;

  CHECK(decision_loss(gt, gt) < 2e-7);  // clamp keeps each term near -log(1 - 1e-7)
  CHECK(decision_loss(gt, gt) > 0.0);

  SlotVec half{};
  half.fill(0.5);
  CHECK(decision_loss(half, gt) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  SlotVec wrong{};
  for (size_t i = 0; i < 8; ++i) wrong[i] = 1.0 - gt[i];
  CHECK(decision_loss(wrong, gt, 0.25) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // Clamping bounds the worst case at the default clamp.
  CHECK(decision_loss(wrong, gt) == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));
}

TEST_CASE("pit_total_loss: recovers a row shuffle exactly") {
  Rng rng(72);
  const WallRows a_gt = random_rows(rng);
  SlotVec p_gt{};
  for (size_t i = 0; i < 7; ++i) p_gt[i] = 1.0;

  WallRows a_hat{};
  SlotVec p_hat{};
  for (size_t i = 0; i < 8; ++i) {
    const size_t src = (i + 3) % 8;
    a_hat[i] = a_gt[src];
    p_hat[i] = std::min(std::max(static_cast<double>(p_gt[src]), 0.01), 0.99);
  }

  const LossBreakdown got = pit_total_loss(a_hat, p_hat, a_gt, p_gt);
  CHECK(got.gamma < 1e-9);
  CHECK(got.beta < 0.02);
  CHECK(got.total == got.gamma + kBetaWeight * got.beta);
  for (size_t i = 0; i < 8; ++i) CHECK(got.permutation[i] == static_cast<int>((i + 3) % 8));

  std::array<int, 8> identity{0, 1, 2, 3, 4, 5, 6, 7};
  CHECK(got.total <= fixed_perm_loss(a_hat, p_hat, a_gt, p_gt, identity) + 1e-15);
}

TEST_CASE("pit_total_loss: agrees with the brute-force oracle") {
  Rng rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    const WallRows a_hat = random_rows(rng);
    const WallRows a_gt = random_rows(rng);
    const SlotVec p_hat = random_probs(rng);
    SlotVec p_gt{};
    for (size_t i = 0; i < 8; ++i) p_gt[i] = rng.next_below(2) ? 1.0 : 0.0;

    const LossBreakdown fast = pit_total_loss(a_hat, p_hat, a_gt, p_gt);
    const LossBreakdown slow = oracle::naive_pit(a_hat, p_hat, a_gt, p_gt);
    CHECK(fast.total == doctest::Approx(slow.total).epsilon(1e-12));
    CHECK(fast.gamma == doctest::Approx(slow.gamma).epsilon(1e-12));
    CHECK(fast.beta == doctest::Approx(slow.beta).epsilon(1e-12));
    // The reported permutation must reproduce the reported value.
    CHECK(fixed_perm_loss(a_hat, p_hat, a_gt, p_gt, fast.permutation) ==
          doctest::Approx(fast.total).epsilon(1e-12));
  }
}

TEST_CASE("pit_total_loss: invariant under joint ground-truth reordering") {
  Rng rng(74);
  const WallRows a_hat = random_rows(rng);
  const SlotVec p_hat = random_probs(rng);
  const WallRows a_gt = random_rows(rng);
  SlotVec p_gt{};
  for (size_t i = 0; i < 6; ++i) p_gt[i] = 1.0;

  const double base = pit_total_loss(a_hat, p_hat, a_gt, p_gt).total;
  std::array<int, 8> shuffle{5, 2, 7, 0, 3, 6, 1, 4};
  WallRows a2{};
  SlotVec p2{};
  for (size_t i = 0; i < 8; ++i) {
    a2[i] = a_gt[static_cast<size_t>(shuffle[i])];
    p2[i] = p_gt[static_cast<size_t>(shuffle[i])];
  }
  CHECK(pit_total_loss(a_hat, p_hat, a2, p2).total == doctest::Approx(base).epsilon(1e-12));

  const WallRows zero{};
  SlotVec pz{};
  pz.fill(0.5);
  CHECK_THROWS_AS((void)pit_total_loss(zero, pz, zero, pz), BothZero);
}

TEST_CASE("pit_loss_gradients: finite differences over all forty inputs") {
  Rng rng(75);
  WallRows a_hat = random_rows(rng);
  SlotVec p_hat = random_probs(rng, 0.1, 0.9);
  const WallRows a_gt = random_rows(rng);
  SlotVec p_gt{};
  for (size_t i = 0; i < 7; ++i) p_gt[i] = 1.0;

  const auto perm = pit_total_loss(a_hat, p_hat, a_gt, p_gt).permutation;
  const LossGrads an = pit_loss_gradients(a_hat, p_hat, a_gt, p_gt, perm);

  const double step = 1e-6;
  auto check = [&](double fd, double g) {
    const double denom = std::max({std::abs(fd), std::abs(g), 1e-8});
    CHECK(std::abs(fd - g) / denom < 1e-5);
  };

  for (size_t i = 0; i < 8; ++i) {
    for (size_t j = 0; j < 4; ++j) {
      const double saved = a_hat[i][j];
      a_hat[i][j] = saved + step;
      const double up = fixed_perm_loss(a_hat, p_hat, a_gt, p_gt, perm);
      a_hat[i][j] = saved - step;
      const double down = fixed_perm_loss(a_hat, p_hat, a_gt, p_gt, perm);
      a_hat[i][j] = saved;
      check((up - down) / (2.0 * step), an.da_hat[i][j]);
    }
    const double saved = p_hat[i];
    p_hat[i] = saved + step;
    const double up = fixed_perm_loss(a_hat, p_hat, a_gt, p_gt, perm);
    p_hat[i] = saved - step;
    const double down = fixed_perm_loss(a_hat, p_hat, a_gt, p_gt, perm);
    p_hat[i] = saved;
    check((up - down) / (2.0 * step), an.dp_hat[i]);
  }
}

TEST_CASE("optimizer_step: sign-descent first step, zero-gradient behavior") {
  // From a fresh state, zero gradients leave both moments zero, so the update
  // is exactly zero.
  std::vector<double> params{1.0, -2.0, 3.0, 0.25};
  const std::vector<double> before = params;
  const std::vector<double> zero(4, 0.0);
  AdamState fresh;
  optimizer_step(params, zero, fresh, 0.1);
  CHECK(params == before);
  CHECK(fresh.step == 1);

  const std::vector<double> grads{0.5, -2.0, 4.0, -0.125};
  AdamState state;
  optimizer_step(params, grads, state, 0.1);
  CHECK(state.step == 1);
  // First step moves each parameter by -lr * g / (|g| + eps), i.e. lr against the sign.
  CHECK(params[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
  CHECK(params[2] == doctest::Approx(3.0 - 0.1).epsilon(1e-6));
  CHECK(params[3] == doctest::Approx(0.25 + 0.1).epsilon(1e-6));

  // Once the first moment is nonzero, momentum keeps moving parameters even
  // on a zero gradient; only the step counter is guaranteed.
  const std::vector<double> after_first = params;
  optimizer_step(params, zero, state, 0.1);
  CHECK(state.step == 2);
  CHECK(params != after_first);
}

TEST_CASE("optimizer_step: rejects non-finite gradients and shape drift") {
  std::vector<double> params{1.0, 2.0};
  AdamState state;
  optimizer_step(params, std::vector<double>{0.1, 0.2}, state, 0.01);

  CHECK_THROWS_AS(
      optimizer_step(params, std::vector<double>{0.1, std::nan("")}, state, 0.01),
      NonFiniteGradient);
  CHECK_THROWS_AS(
      optimizer_step(params, std::vector<double>{0.1, std::numeric_limits<double>::infinity()},
                     state, 0.01),
      NonFiniteGradient);
  CHECK_THROWS_AS(optimizer_step(params, std::vector<double>{0.1}, state, 0.01), ShapeMismatch);

  std::vector<double> bigger{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(optimizer_step(bigger, std::vector<double>{0.1, 0.2, 0.3}, state, 0.01),
                  ShapeMismatch);
}

TEST_CASE("sample_wall_rows and sample_slots mirror the record fields") {
  const Sample s = synthetic_sample(80, 7);
  const WallRows a = sample_wall_rows(s);
  const SlotVec p = sample_slots(s);
  for (size_t i = 0; i < 8; ++i) {
    CHECK(p[i] == static_cast<double>(s.p[i]));
    for (size_t j = 0; j < 4; ++j) CHECK(a[i][j] == static_cast<double>(s.a[i][j]));
  }
}

TEST_CASE("train: deterministic and loss-reducing on a memorizable set") {
  std::vector<Sample> train_set;
  for (uint64_t i = 0; i < 4; ++i) train_set.push_back(synthetic_sample(100 + i, 6 + i % 3));
  const std::vector<Sample> val_set = train_set;

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 12;
  cfg.patience = 12;
  cfg.learning_rate = 1e-3;
  cfg.seed = 9;

  Network n1, n2;
  n1.init(50);
  n2.init(50);
  const TrainHistory h1 = train(n1, train_set, val_set, cfg);
  const TrainHistory h2 = train(n2, train_set, val_set, cfg);

  REQUIRE(h1.train.size() == 12);
  REQUIRE(h2.train.size() == h1.train.size());
  for (size_t e = 0; e < h1.train.size(); ++e) {
    CHECK(h1.train[e].total == h2.train[e].total);
    CHECK(h1.val[e].gamma == h2.val[e].gamma);
    CHECK(h1.val[e].beta == h2.val[e].beta);
  }
  CHECK(std::equal(n1.params().begin(), n1.params().end(), n2.params().begin()));

  CHECK(h1.train.back().total < h1.train.front().total);
  // Epoch totals average per-sample totals, so the identity holds to rounding.
  for (const EpochStats& e : h1.train)
    CHECK(e.total == doctest::Approx(e.gamma + kBetaWeight * e.beta).epsilon(1e-12));

  // best_val_total is the running minimum and the restored parameters attain it.
  double min_val = std::numeric_limits<double>::infinity();
  for (const EpochStats& e : h1.val) min_val = std::min(min_val, e.total);
  CHECK(h1.best_val_total == min_val);
  CHECK(h1.val[static_cast<size_t>(h1.best_epoch)].total == h1.best_val_total);

  Workspace ws;
  double revalidated = 0.0;
  for (const Sample& s : val_set) {
    std::vector<float> rir = s.rir;
    normalize_input(rir);
    const NetOutput out = n1.forward(rir, ws);
    revalidated += pit_total_loss(out.a_hat, out.p_hat, sample_wall_rows(s), sample_slots(s)).total;
  }
  revalidated /= static_cast<double>(val_set.size());
  CHECK(revalidated == doctest::Approx(h1.best_val_total).epsilon(1e-12));
}

TEST_CASE("train: early stopping fires patience epochs after the last improvement") {
  std::vector<Sample> train_set;
  for (uint64_t i = 0; i < 2; ++i) train_set.push_back(synthetic_sample(200 + i, 6));
  // Unrelated validation samples: overfitting the two training inputs stops helping.
  std::vector<Sample> val_set;
  for (uint64_t i = 0; i < 2; ++i) val_set.push_back(synthetic_sample(300 + i, 8));

  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 40;
  cfg.patience = 3;
  cfg.learning_rate = 3e-3;
  cfg.seed = 4;

  Network net;
  net.init(51);
  const TrainHistory h = train(net, train_set, val_set, cfg);

  REQUIRE(h.train.size() < 40);  // stopped early
  CHECK(h.train.size() == static_cast<size_t>(h.best_epoch) + 1 + 3);
  for (size_t e = static_cast<size_t>(h.best_epoch) + 1; e < h.val.size(); ++e)
    CHECK(h.val[e].total >= h.best_val_total);
}

TEST_CASE("train: configuration and dataset validation") {
  std::vector<Sample> one{synthetic_sample(400, 6)};
  Network net;
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.patience = 1;

  CHECK_THROWS_AS((void)train(net, {}, one, cfg), EmptyDataset);
  CHECK_THROWS_AS((void)train(net, one, {}, cfg), EmptyDataset);

  TrainConfig bad = cfg;
  bad.max_epochs = 0;
  CHECK_THROWS_AS((void)train(net, one, one, bad), InvalidConfig);
  bad = cfg;
  bad.patience = 0;
  CHECK_THROWS_AS((void)train(net, one, one, bad), InvalidConfig);
  bad = cfg;
  bad.patience = 5;  // exceeds max_epochs
  CHECK_THROWS_AS((void)train(net, one, one, bad), InvalidConfig);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS((void)train(net, one, one, bad), InvalidConfig);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS((void)train(net, one, one, bad), InvalidConfig);
}

TEST_CASE("write_history_csv: layout") {
  TrainHistory h;
  h.train.push_back({0.5, 0.25, 0.525});
  h.train.push_back({0.4, 0.2, 0.42});
  h.val.push_back({0.6, 0.3, 0.63});
  h.val.push_back({0.55, 0.28, 0.578});

  const std::string path = temp_path("rgi_history.csv");
  write_history_csv(path, h);

  std::ifstream is(path);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "epoch,train_gamma,train_beta,train_total,val_gamma,val_beta,val_total");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 7);
    CHECK(std::stoi(cells[0]) == rows);
    CHECK(std::stod(cells[3]) == doctest::Approx(h.train[static_cast<size_t>(rows - 1)].total));
  }
  CHECK(rows == 2);
  std::remove(path.c_str());
}
