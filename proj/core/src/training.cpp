#include "rgi/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "rgi/error.hpp"
#include "rgi/rng.hpp"

namespace rgi {

namespace {

double flat_dot(const WallRows& x, const WallRows& y) {
  double s = 0.0;
  for (size_t i = 0; i < 8; ++i)
    for (size_t j = 0; j < 4; ++j) s += x[i][j] * y[i][j];
  return s;
}

double flat_norm(const WallRows& x) {
  return std::sqrt(flat_dot(x, x));
}

double clamp_prob(double p, double clamp) {
  return std::min(std::max(p, clamp), 1.0 - clamp);
}

double slot_bce(double p_hat, double p_gt, double clamp) {
  const double q = clamp_prob(p_hat, clamp);
  return -(p_gt * std::log(q) + (1.0 - p_gt) * std::log(1.0 - q));
}

}  // namespace

double angular_loss(const WallRows& a_hat, const WallRows& a_gt_perm) {
  const double nh = flat_norm(a_hat);
  const double ng = flat_norm(a_gt_perm);
  if (nh == 0.0 && ng == 0.0) throw BothZero("angular_loss: both matrices are zero");
  const double s = flat_dot(a_hat, a_gt_perm);
  return 1.0 - std::abs(s) / (nh * ng + kGammaEps);
}

double decision_loss(const SlotVec& p_hat, const SlotVec& p_gt_perm, double clamp) {
  double s = 0.0;
  for (size_t i = 0; i < 8; ++i) s += slot_bce(p_hat[i], p_gt_perm[i], clamp);
  return s / 8.0;
}

LossBreakdown pit_total_loss(const WallRows& a_hat, const SlotVec& p_hat, const WallRows& a_gt,
                             const SlotVec& p_gt, double clamp) {
  const double nh = flat_norm(a_hat);
  const double ng = flat_norm(a_gt);  // row norms are permutation-invariant
  if (nh == 0.0 && ng == 0.0) throw BothZero("pit_total_loss: both matrices are zero");
  const double den = nh * ng + kGammaEps;

  double d[8][8], bce[8][8];
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k)
        s += a_hat[static_cast<size_t>(i)][static_cast<size_t>(k)] *
             a_gt[static_cast<size_t>(j)][static_cast<size_t>(k)];
      d[i][j] = s;
      bce[i][j] = slot_bce(p_hat[static_cast<size_t>(i)], p_gt[static_cast<size_t>(j)], clamp);
    }
  }

  std::array<int, 8> perm;
  std::iota(perm.begin(), perm.end(), 0);
  LossBreakdown best;
  best.total = std::numeric_limits<double>::infinity();
  do {
    double dot = 0.0, b = 0.0;
    for (int i = 0; i < 8; ++i) {
      dot += d[i][perm[static_cast<size_t>(i)]];
      b += bce[i][perm[static_cast<size_t>(i)]];
    }
    const double gamma = 1.0 - std::abs(dot) / den;
    const double beta = b / 8.0;
    const double total = gamma + kBetaWeight * beta;
    if (total < best.total) {
      best.gamma = gamma;
      best.beta = beta;
      best.total = total;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

LossGrads pit_loss_gradients(const WallRows& a_hat, const SlotVec& p_hat, const WallRows& a_gt,
                             const SlotVec& p_gt, const std::array<int, 8>& permutation,
                             double clamp) {
  WallRows g{};
  SlotVec pg{};
  for (size_t i = 0; i < 8; ++i) {
    g[i] = a_gt[static_cast<size_t>(permutation[i])];
    pg[i] = p_gt[static_cast<size_t>(permutation[i])];
  }

  const double nh = flat_norm(a_hat);
  const double ng = flat_norm(g);
  if (nh == 0.0 && ng == 0.0) throw BothZero("pit_loss_gradients: both matrices are zero");
  const double den = nh * ng + kGammaEps;
  const double s = flat_dot(a_hat, g);
  const double sgn = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);

  LossGrads out;
  // d(gamma)/d(a_hat) = -sgn(s) g / den + |s| ng a_hat / (nh den^2)
  const double c2 = nh > 0.0 ? std::abs(s) * ng / (nh * den * den) : 0.0;
  for (size_t i = 0; i < 8; ++i)
    for (size_t j = 0; j < 4; ++j)
      out.da_hat[i][j] = -sgn * g[i][j] / den + c2 * a_hat[i][j];

  for (size_t i = 0; i < 8; ++i) {
    const double q = clamp_prob(p_hat[i], clamp);
    double db = 0.0;
    if (p_hat[i] > clamp && p_hat[i] < 1.0 - clamp)
      db = (-pg[i] / q + (1.0 - pg[i]) / (1.0 - q)) / 8.0;
    out.dp_hat[i] = kBetaWeight * db;
  }
  return out;
}

void optimizer_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                    double lr, double beta1, double beta2, double eps) {
  if (params.size() != grads.size()) throw ShapeMismatch("optimizer_step: size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ShapeMismatch("optimizer_step: stale state");
  for (double gv : grads) {
    if (!std::isfinite(gv)) throw NonFiniteGradient("optimizer_step: non-finite gradient");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

WallRows sample_wall_rows(const Sample& s) {
  WallRows a{};
  for (size_t i = 0; i < 8; ++i)
    for (size_t j = 0; j < 4; ++j) a[i][j] = s.a[i][j];
  return a;
}

SlotVec sample_slots(const Sample& s) {
  SlotVec p{};
  for (size_t i = 0; i < 8; ++i) p[i] = s.p[i];
  return p;
}

namespace {

LossBreakdown eval_sample(const Network& net, const Sample& s, Workspace& ws,
                          std::vector<float>& rir_scratch, double clamp) {
  rir_scratch = s.rir;
  normalize_input(rir_scratch);
  const NetOutput out = net.forward(rir_scratch, ws);
  return pit_total_loss(out.a_hat, out.p_hat, sample_wall_rows(s), sample_slots(s), clamp);
}

}  // namespace

TrainHistory train(Network& net, const std::vector<Sample>& train_set,
                   const std::vector<Sample>& val_set, const TrainConfig& cfg) {
  if (train_set.empty() || val_set.empty()) throw EmptyDataset("train: empty dataset");
  if (cfg.batch_size <= 0 || cfg.learning_rate <= 0.0 || cfg.max_epochs <= 0 || cfg.patience <= 0)
    throw InvalidConfig("train: all configuration values must be positive");
  if (cfg.patience > cfg.max_epochs) throw InvalidConfig("train: patience exceeds max_epochs");

  Rng rng(cfg.seed);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  AdamState state;
  std::vector<double> grad(Network::kParamCount);
  Workspace ws;
  std::vector<float> rir_scratch;

  TrainHistory history;
  std::vector<double> best_params(net.params().begin(), net.params().end());
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }

    EpochStats tr;
    for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), pos + static_cast<size_t>(cfg.batch_size));
      const double inv_n = 1.0 / static_cast<double>(end - pos);
      std::fill(grad.begin(), grad.end(), 0.0);

      for (size_t b = pos; b < end; ++b) {
        const Sample& s = train_set[order[b]];
        rir_scratch = s.rir;
        normalize_input(rir_scratch);
        const NetOutput out = net.forward(rir_scratch, ws);
        const WallRows gt_a = sample_wall_rows(s);
        const SlotVec gt_p = sample_slots(s);
        const LossBreakdown loss =
            pit_total_loss(out.a_hat, out.p_hat, gt_a, gt_p, cfg.bce_clamp);
        LossGrads lg =
            pit_loss_gradients(out.a_hat, out.p_hat, gt_a, gt_p, loss.permutation, cfg.bce_clamp);
        // Batch-mean scaling applied at the seed of the backward pass.
        for (auto& row : lg.da_hat)
          for (double& v : row) v *= inv_n;
        for (double& v : lg.dp_hat) v *= inv_n;
        net.backward(ws, lg.da_hat, lg.dp_hat, grad);

        tr.gamma += loss.gamma;
        tr.beta += loss.beta;
        tr.total += loss.total;
      }
      optimizer_step(net.params(), grad, state, cfg.learning_rate, cfg.beta1, cfg.beta2);
    }
    const double n_tr = static_cast<double>(train_set.size());
    tr.gamma /= n_tr;
    tr.beta /= n_tr;
    tr.total /= n_tr;

    EpochStats va;
    for (const Sample& s : val_set) {
      const LossBreakdown loss = eval_sample(net, s, ws, rir_scratch, cfg.bce_clamp);
      va.gamma += loss.gamma;
      va.beta += loss.beta;
      va.total += loss.total;
    }
    const double n_va = static_cast<double>(val_set.size());
    va.gamma /= n_va;
    va.beta /= n_va;
    va.total /= n_va;

    history.train.push_back(tr);
    history.val.push_back(va);

    if (va.total < best_val) {
      best_val = va.total;
      history.best_epoch = epoch;
      history.best_val_total = best_val;
      std::copy(net.params().begin(), net.params().end(), best_params.begin());
      since_best = 0;
    } else {
      since_best += 1;
      if (since_best >= cfg.patience) break;
    }
  }

  std::copy(best_params.begin(), best_params.end(), net.params().begin());
  return history;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
  std::ofstream os(path);
  if (!os) throw IoFailure("cannot open " + path + " for writing");
  os << "epoch,train_gamma,train_beta,train_total,val_gamma,val_beta,val_total\n";
  char line[256];
  for (size_t e = 0; e < history.train.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e + 1,
                  history.train[e].gamma, history.train[e].beta, history.train[e].total,
                  history.val[e].gamma, history.val[e].beta, history.val[e].total);
    os << line;
  }
  if (!os) throw IoFailure("write failed on " + path);
}

}  // namespace rgi
