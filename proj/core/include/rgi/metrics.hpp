#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rgi/dataset.hpp"
#include "rgi/model.hpp"
#include "rgi/training.hpp"

namespace rgi {

std::array<bool, 8> binarize(const SlotVec& p_hat, double threshold = 0.5);

// Percentage of rooms whose predicted wall count equals the true count.
double acc_w(std::span<const int> predicted_counts, std::span<const int> gt_counts);

struct MatchedWall {
  std::array<double, 4> pred{};
  std::array<double, 4> gt{};
  int pred_slot = -1;
  int gt_slot = -1;
};

struct Matching {
  std::vector<MatchedWall> pairs;
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;
  double total_cost = 0.0;
};

// Minimum-cost pairing between predicted-present rows of a_hat and the first
// gt_walls rows of a_gt, cost = 1 - |dot| / (norm product + 1e-12) on the
// homogeneous 4-vectors, found by exact search. The smaller side is matched
// completely; leftovers on the other side are reported.
Matching match_walls(const WallRows& a_hat, const std::array<bool, 8>& mask, const WallRows& a_gt,
                     int gt_walls);

// Mean |d_hat - d_gt| in meters over the pairs, after canonicalizing each row
// to unit normal and nonnegative offset.
double delta_d(std::span<const MatchedWall> pairs);

// Mean acute angle in degrees between estimated and true wall normals.
double delta_theta(std::span<const MatchedWall> pairs);

struct EvalCell {
  double acc_w = 0.0;        // percent
  double delta_d = 0.0;      // meters
  double delta_theta = 0.0;  // degrees
  int rooms = 0;
  int rooms_with_pairs = 0;
};

struct EvalReport {
  EvalCell total;
  std::array<EvalCell, 4> per_family;  // indexed by ShapeFamily value
};

struct RoomDetail {
  uint64_t seed = 0;
  uint8_t family = 0;
  int gt_walls = 0;
  int pred_walls = 0;
  std::vector<std::array<double, 2>> wall_errors;  // {delta_d, delta_theta} per pair
};

using PredictFn = std::function<NetOutput(const Sample&)>;

// Shared metric pipeline: per-sample prediction, presence binarization,
// angular matching, per-room means, then per-family and total aggregation.
// Rooms with no predicted walls count toward acc_w only. The per-sample map
// may run on several threads; the reduction order is fixed by sample index.
EvalReport evaluate_with(const PredictFn& predict, const std::vector<Sample>& samples,
                         int threads = 1, std::vector<RoomDetail>* details = nullptr);

// normalize + forward, then the shared pipeline.
EvalReport evaluate(const Network& net, const std::vector<Sample>& samples, int threads = 1,
                    std::vector<RoomDetail>* details = nullptr);

// Three metric rows by five columns: Total, then one per family.
void write_report_csv(const std::string& path, const EvalReport& report);

void write_details_csv(const std::string& path, const std::vector<RoomDetail>& details);

}  // namespace rgi
