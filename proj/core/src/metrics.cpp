#include "rgi/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <thread>

#include "rgi/error.hpp"

namespace rgi {

namespace {

constexpr double kMatchEps = 1e-12;

double dot4(const std::array<double, 4>& x, const std::array<double, 4>& y) {
  return x[0] * y[0] + x[1] * y[1] + x[2] * y[2] + x[3] * y[3];
}

double norm4(const std::array<double, 4>& x) {
  return std::sqrt(dot4(x, x));
}

double norm3(const std::array<double, 4>& x) {
  return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
}

double pair_cost(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  return 1.0 - std::abs(dot4(a, b)) / (norm4(a) * norm4(b) + kMatchEps);
}

}  // namespace

std::array<bool, 8> binarize(const SlotVec& p_hat, double threshold) {
  std::array<bool, 8> mask{};
  for (size_t i = 0; i < 8; ++i) mask[i] = p_hat[i] >= threshold;
  return mask;
}

double acc_w(std::span<const int> predicted_counts, std::span<const int> gt_counts) {
  if (predicted_counts.size() != gt_counts.size()) throw ShapeMismatch("acc_w: length mismatch");
  if (predicted_counts.empty()) throw EmptyDataset("acc_w: no rooms");
  size_t hits = 0;
  for (size_t i = 0; i < predicted_counts.size(); ++i) {
    if (predicted_counts[i] == gt_counts[i]) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predicted_counts.size());
}

Matching match_walls(const WallRows& a_hat, const std::array<bool, 8>& mask, const WallRows& a_gt,
                     int gt_walls) {
  std::vector<int> pred_idx;
  for (int i = 0; i < 8; ++i) {
    if (mask[static_cast<size_t>(i)]) pred_idx.push_back(i);
  }
  if (pred_idx.empty()) throw NoPredictedWalls("match_walls: no predicted-present slots");
  if (gt_walls < 1 || gt_walls > 8) throw InvalidConfig("match_walls: gt wall count out of range");

  const size_t np = pred_idx.size();
  const size_t ng = static_cast<size_t>(gt_walls);
  const size_t k = std::min(np, ng);

  double cost[8][8];
  for (size_t i = 0; i < np; ++i)
    for (size_t j = 0; j < ng; ++j)
      cost[i][j] = pair_cost(a_hat[static_cast<size_t>(pred_idx[i])], a_gt[j]);

  // Exact assignment by depth-first search over the smaller side; at most
  // 8! leaves.
  const bool pred_smaller = np <= ng;
  const size_t rows = pred_smaller ? np : ng;
  const size_t cols = pred_smaller ? ng : np;

  std::array<int, 8> pick{}, best_pick{};
  std::array<bool, 8> used{};
  double best = std::numeric_limits<double>::infinity();
  auto dfs = [&](auto&& self, size_t row, double acc) -> void {
    if (acc >= best) return;
    if (row == rows) {
      best = acc;
      best_pick = pick;
      return;
    }
    for (size_t c = 0; c < cols; ++c) {
      if (used[c]) continue;
      used[c] = true;
      pick[row] = static_cast<int>(c);
      self(self, row + 1, acc + (pred_smaller ? cost[row][c] : cost[c][row]));
      used[c] = false;
    }
  };
  dfs(dfs, 0, 0.0);

  Matching m;
  m.total_cost = best;
  std::array<bool, 8> col_used{};
  for (size_t r = 0; r < rows; ++r) col_used[static_cast<size_t>(best_pick[r])] = true;
  for (size_t r = 0; r < k; ++r) {
    MatchedWall mw;
    const size_t pi = pred_smaller ? r : static_cast<size_t>(best_pick[r]);
    const size_t gi = pred_smaller ? static_cast<size_t>(best_pick[r]) : r;
    mw.pred_slot = pred_idx[pi];
    mw.gt_slot = static_cast<int>(gi);
    mw.pred = a_hat[static_cast<size_t>(mw.pred_slot)];
    mw.gt = a_gt[gi];
    m.pairs.push_back(mw);
  }
  if (pred_smaller) {
    for (size_t j = 0; j < ng; ++j) {
      if (!col_used[j]) m.unmatched_gt.push_back(static_cast<int>(j));
    }
  } else {
    for (size_t i = 0; i < np; ++i) {
      if (!col_used[i]) m.unmatched_pred.push_back(pred_idx[i]);
    }
  }
  return m;
}

double delta_d(std::span<const MatchedWall> pairs) {
  if (pairs.empty()) throw InvalidConfig("delta_d: empty pairing");
  double s = 0.0;
  for (const MatchedWall& p : pairs) {
    const double nh = norm3(p.pred);
    if (nh < 1e-9) throw ZeroNormalEstimate("delta_d: estimated normal is zero");
    const double ng = norm3(p.gt);
    if (ng < 1e-9) throw ZeroNormalEstimate("delta_d: ground-truth normal is zero");
    const double dh = std::abs(p.pred[3] / nh);
    const double dg = std::abs(p.gt[3] / ng);
    s += std::abs(dh - dg);
  }
  return s / static_cast<double>(pairs.size());
}

double delta_theta(std::span<const MatchedWall> pairs) {
  if (pairs.empty()) throw InvalidConfig("delta_theta: empty pairing");
  double s = 0.0;
  for (const MatchedWall& p : pairs) {
    const double nh2 = p.pred[0] * p.pred[0] + p.pred[1] * p.pred[1] + p.pred[2] * p.pred[2];
    const double ng2 = p.gt[0] * p.gt[0] + p.gt[1] * p.gt[1] + p.gt[2] * p.gt[2];
    if (nh2 < 1e-18 || ng2 < 1e-18) throw ZeroNormalEstimate("delta_theta: zero normal");
    const double d = p.pred[0] * p.gt[0] + p.pred[1] * p.gt[1] + p.pred[2] * p.gt[2];
    // cos^2 form keeps identical rows at exactly zero angle.
    const double c2 = std::min(d * d / (nh2 * ng2), 1.0);
    s += std::acos(std::sqrt(c2)) * 180.0 / std::numbers::pi;
  }
  return s / static_cast<double>(pairs.size());
}

namespace {

struct RoomEval {
  uint8_t family = 0;
  bool count_correct = false;
  bool has_pairs = false;
  double dd = 0.0;
  double dth = 0.0;
  RoomDetail detail;
};

RoomEval eval_room(const NetOutput& out, const Sample& s) {
  RoomEval r;
  r.family = s.shape_id;
  const auto mask = binarize(out.p_hat);
  int pred_count = 0;
  for (bool b : mask) pred_count += b ? 1 : 0;
  r.count_correct = pred_count == static_cast<int>(s.num_walls);

  r.detail.seed = s.seed;
  r.detail.family = s.shape_id;
  r.detail.gt_walls = s.num_walls;
  r.detail.pred_walls = pred_count;

  if (pred_count > 0) {
    const Matching m = match_walls(out.a_hat, mask, sample_wall_rows(s), s.num_walls);
    if (!m.pairs.empty()) {
      r.has_pairs = true;
      r.dd = delta_d(m.pairs);
      r.dth = delta_theta(m.pairs);
      for (const MatchedWall& p : m.pairs) {
        const std::span<const MatchedWall> one(&p, 1);
        r.detail.wall_errors.push_back({delta_d(one), delta_theta(one)});
      }
    }
  }
  return r;
}

EvalCell reduce_cell(const std::vector<const RoomEval*>& rooms) {
  EvalCell c;
  c.rooms = static_cast<int>(rooms.size());
  if (rooms.empty()) return c;
  int hits = 0;
  double dd = 0.0, dth = 0.0;
  for (const RoomEval* r : rooms) {
    hits += r->count_correct ? 1 : 0;
    if (r->has_pairs) {
      c.rooms_with_pairs += 1;
      dd += r->dd;
      dth += r->dth;
    }
  }
  c.acc_w = 100.0 * hits / static_cast<double>(c.rooms);
  if (c.rooms_with_pairs > 0) {
    c.delta_d = dd / c.rooms_with_pairs;
    c.delta_theta = dth / c.rooms_with_pairs;
  }
  return c;
}

}  // namespace

EvalReport evaluate_with(const PredictFn& predict, const std::vector<Sample>& samples, int threads,
                         std::vector<RoomDetail>* details) {
  if (samples.empty()) throw EmptyDataset("evaluate: no samples");
  std::vector<RoomEval> rooms(samples.size());

  const int nthreads = std::max(1, threads);
  if (nthreads == 1) {
    for (size_t i = 0; i < samples.size(); ++i)
      rooms[i] = eval_room(predict(samples[i]), samples[i]);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < nthreads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= samples.size()) return;
          rooms[i] = eval_room(predict(samples[i]), samples[i]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  EvalReport rep;
  std::vector<const RoomEval*> all;
  std::array<std::vector<const RoomEval*>, 4> by_family;
  for (const RoomEval& r : rooms) {
    all.push_back(&r);
    by_family[r.family % 4].push_back(&r);
  }
  rep.total = reduce_cell(all);
  for (size_t f = 0; f < 4; ++f) rep.per_family[f] = reduce_cell(by_family[f]);

  if (details) {
    details->clear();
    for (RoomEval& r : rooms) details->push_back(std::move(r.detail));
  }
  return rep;
}

EvalReport evaluate(const Network& net, const std::vector<Sample>& samples, int threads,
                    std::vector<RoomDetail>* details) {
  PredictFn fn = [&net](const Sample& s) {
    std::vector<float> rir = s.rir;
    normalize_input(rir);
    return net.forward(rir);
  };
  return evaluate_with(fn, samples, threads, details);
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream os(path);
  if (!os) throw IoFailure("cannot open " + path + " for writing");
  os << "metric,total,shoebox,pentagonal,hexagonal,l_shaped\n";
  char line[256];
  auto row = [&](const char* name, auto get) {
    std::snprintf(line, sizeof line, "%s,%.10g,%.10g,%.10g,%.10g,%.10g\n", name,
                  get(report.total), get(report.per_family[0]), get(report.per_family[1]),
                  get(report.per_family[2]), get(report.per_family[3]));
    os << line;
  };
  row("acc_w_percent", [](const EvalCell& c) { return c.acc_w; });
  row("delta_d_m", [](const EvalCell& c) { return c.delta_d; });
  row("delta_theta_deg", [](const EvalCell& c) { return c.delta_theta; });
  if (!os) throw IoFailure("write failed on " + path);
}

void write_details_csv(const std::string& path, const std::vector<RoomDetail>& details) {
  std::ofstream os(path);
  if (!os) throw IoFailure("cannot open " + path + " for writing");
  os << "seed,family,gt_walls,pred_walls,pair,delta_d_m,delta_theta_deg\n";
  char line[256];
  for (const RoomDetail& d : details) {
    if (d.wall_errors.empty()) {
      std::snprintf(line, sizeof line, "%llu,%s,%d,%d,,,\n",
                    static_cast<unsigned long long>(d.seed),
                    shape_family_name(static_cast<ShapeFamily>(d.family)), d.gt_walls,
                    d.pred_walls);
      os << line;
      continue;
    }
    for (size_t k = 0; k < d.wall_errors.size(); ++k) {
      std::snprintf(line, sizeof line, "%llu,%s,%d,%d,%zu,%.10g,%.10g\n",
                    static_cast<unsigned long long>(d.seed),
                    shape_family_name(static_cast<ShapeFamily>(d.family)), d.gt_walls,
                    d.pred_walls, k, d.wall_errors[k][0], d.wall_errors[k][1]);
      os << line;
    }
  }
  if (!os) throw IoFailure("write failed on " + path);
}

}  // namespace rgi
