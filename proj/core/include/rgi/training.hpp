#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rgi/dataset.hpp"
#include "rgi/model.hpp"

namespace rgi {

using WallRows = std::array<std::array<double, 4>, 8>;
using SlotVec = std::array<double, 8>;

inline constexpr double kGammaEps = 1e-12;  // angular-loss denominator guard
inline constexpr double kBceClamp = 1e-7;   // probability clamp for the decision loss
inline constexpr double kBetaWeight = 0.1;  // decision-loss weight in the total

struct LossBreakdown {
  double gamma = 0.0;
  double beta = 0.0;
  double total = 0.0;                 // gamma + kBetaWeight * beta, exactly
  std::array<int, 8> permutation{};  // slot i is compared against GT row permutation[i]
};

// 1 - |b_hat . b| / (|b_hat| |b| + eps) over the flattened 8x4 matrices.
// Throws BothZero when both matrices are entirely zero.
double angular_loss(const WallRows& a_hat, const WallRows& a_gt_perm);

// Mean binary cross entropy over the 8 slots, predictions clamped away from
// {0, 1} by `clamp`.
double decision_loss(const SlotVec& p_hat, const SlotVec& p_gt_perm, double clamp = kBceClamp);

// Exact search over all 8! ground-truth row permutations for the minimum of
// angular_loss + kBetaWeight * decision_loss, using precomputed 8x8 pairwise
// dot products and per-slot cross entropies.
LossBreakdown pit_total_loss(const WallRows& a_hat, const SlotVec& p_hat, const WallRows& a_gt,
                             const SlotVec& p_gt, double clamp = kBceClamp);

struct LossGrads {
  std::array<std::array<double, 4>, 8> da_hat{};
  std::array<double, 8> dp_hat{};
};

// Gradients of the composite loss with the alignment permutation held fixed.
LossGrads pit_loss_gradients(const WallRows& a_hat, const SlotVec& p_hat, const WallRows& a_gt,
                             const SlotVec& p_gt, const std::array<int, 8>& permutation,
                             double clamp = kBceClamp);

// Adaptive moment optimizer state; buffers are sized lazily on first step.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  int64_t step = 0;
};

void optimizer_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                    double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 1e-3;
  int max_epochs = 100;
  int patience = 10;
  uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double bce_clamp = kBceClamp;
};

struct EpochStats {
  double gamma = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> train;
  std::vector<EpochStats> val;
  int best_epoch = -1;  // 0-based index into the vectors
  double best_val_total = 0.0;
};

// Mini-batch training with per-epoch reshuffling, early stopping on the
// validation total, and restoration of the best-validation parameters into
// net before returning.
TrainHistory train(Network& net, const std::vector<Sample>& train_set,
                   const std::vector<Sample>& val_set, const TrainConfig& cfg);

void write_history_csv(const std::string& path, const TrainHistory& history);

// Target-side view of a sample as the loss functions expect it.
WallRows sample_wall_rows(const Sample& s);
SlotVec sample_slots(const Sample& s);

}  // namespace rgi
