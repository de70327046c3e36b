#include "rgi/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "rgi/error.hpp"
#include "rgi/rng.hpp"
#include "rgi/serial.hpp"

namespace rgi {

int conv1d_out_len(int tin, int k, int stride, int pad) {
  return (tin + 2 * pad - k) / stride + 1;
}

void conv1d_forward(const double* x, int cin, int tin, const double* w, const double* b,
                    int cout, int k, int stride, int pad, double* y) {
  const int tout = conv1d_out_len(tin, k, stride, pad);
  for (int co = 0; co < cout; ++co) {
    double* yr = y + static_cast<size_t>(co) * tout;
    std::fill(yr, yr + tout, b ? b[co] : 0.0);
    const double* wco = w + static_cast<size_t>(co) * cin * k;
    for (int ci = 0; ci < cin; ++ci) {
      const double* xr = x + static_cast<size_t>(ci) * tin;
      const double* wr = wco + static_cast<size_t>(ci) * k;
      for (int j = 0; j < k; ++j) {
        const double wj = wr[j];
        const int off = j - pad;
        const int t0 = off < 0 ? (-off + stride - 1) / stride : 0;
        const int t1 = std::min(tout - 1, (tin - 1 - off) / stride);
        if (stride == 1) {
          const double* xs = xr + off;
          for (int t = t0; t <= t1; ++t) yr[t] += wj * xs[t];
        } else {
          for (int t = t0; t <= t1; ++t) yr[t] += wj * xr[stride * t + off];
        }
      }
    }
  }
}

void conv1d_backward(const double* x, int cin, int tin, const double* w, int cout, int k,
                     int stride, int pad, const double* dy, double* dx, double* dw, double* db) {
  const int tout = conv1d_out_len(tin, k, stride, pad);
  if (dx) std::fill(dx, dx + static_cast<size_t>(cin) * tin, 0.0);
  std::fill(dw, dw + static_cast<size_t>(cout) * cin * k, 0.0);
  for (int co = 0; co < cout; ++co) {
    const double* dyr = dy + static_cast<size_t>(co) * tout;
    double bsum = 0.0;
    for (int t = 0; t < tout; ++t) bsum += dyr[t];
    db[co] = bsum;
    const double* wco = w + static_cast<size_t>(co) * cin * k;
    double* dwco = dw + static_cast<size_t>(co) * cin * k;
    for (int ci = 0; ci < cin; ++ci) {
      const double* xr = x + static_cast<size_t>(ci) * tin;
      double* dxr = dx ? dx + static_cast<size_t>(ci) * tin : nullptr;
      for (int j = 0; j < k; ++j) {
        const int off = j - pad;
        const int t0 = off < 0 ? (-off + stride - 1) / stride : 0;
        const int t1 = std::min(tout - 1, (tin - 1 - off) / stride);
        double acc = 0.0;
        if (stride == 1) {
          const double* xs = xr + off;
          for (int t = t0; t <= t1; ++t) acc += dyr[t] * xs[t];
          if (dxr) {
            const double wj = wco[static_cast<size_t>(ci) * k + j];
            double* dxs = dxr + off;
            for (int t = t0; t <= t1; ++t) dxs[t] += wj * dyr[t];
          }
        } else {
          for (int t = t0; t <= t1; ++t) acc += dyr[t] * xr[stride * t + off];
          if (dxr) {
            const double wj = wco[static_cast<size_t>(ci) * k + j];
            for (int t = t0; t <= t1; ++t) dxr[stride * t + off] += wj * dyr[t];
          }
        }
        dwco[static_cast<size_t>(ci) * k + j] = acc;
      }
    }
  }
}

namespace {

constexpr int kTrunkChannels = 64;
constexpr int kStages = 4;

void relu_inplace(double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

// dx[i] = post[i] > 0 ? dy[i] : 0, usable in place (dy == dx).
void relu_mask(const double* post, double* dy, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (post[i] <= 0.0) dy[i] = 0.0;
  }
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

size_t spec_elems(const std::vector<uint32_t>& dims) {
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  return n;
}

}  // namespace

Network::Network() {
  size_t total = 0;
  auto add = [&](std::string name, std::vector<uint32_t> dims) {
    TensorSpec s;
    s.name = std::move(name);
    s.dims = std::move(dims);
    s.size = spec_elems(s.dims);
    s.offset = total;
    total += s.size;
    specs_.push_back(std::move(s));
  };
  add("stem.w", {64, 32, 7});
  add("stem.b", {64});
  for (int i = 0; i < kStages; ++i) {
    const std::string p = "stage" + std::to_string(i);
    add(p + ".conv1.w", {64, 64, 3});
    add(p + ".conv1.b", {64});
    add(p + ".conv2.w", {64, 64, 3});
    add(p + ".conv2.b", {64});
    add(p + ".down.w", {64, 64, 3});
    add(p + ".down.b", {64});
  }
  add("wpe.w", {32, 64});
  add("wpe.b", {32});
  add("eval.w", {8, 64});
  add("eval.b", {8});
  if (total != kParamCount) throw Error("parameter registry drifted from the documented count");
  params_.assign(total, 0.0);
}

void Network::init(uint64_t seed) {
  Rng rng(seed);
  for (const TensorSpec& s : specs_) {
    double* p = params_.data() + s.offset;
    if (s.name.ends_with(".b")) {
      std::fill(p, p + s.size, 0.0);
      continue;
    }
    size_t fan_in = 1;
    for (size_t i = 1; i < s.dims.size(); ++i) fan_in *= s.dims[i];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (size_t i = 0; i < s.size; ++i) p[i] = rng.uniform(-bound, bound);
  }
}

std::span<double> Network::tensor(const std::string& name) {
  for (const TensorSpec& s : specs_) {
    if (s.name == name) return {params_.data() + s.offset, s.size};
  }
  throw InvalidConfig("unknown tensor: " + name);
}

NetOutput Network::forward(std::span<const float> rir) const {
  Workspace ws;
  return forward(rir, ws);
}

NetOutput Network::forward(std::span<const float> rir, Workspace& ws) const {
  if (rir.size() != static_cast<size_t>(kInChannels) * kInTaps)
    throw ShapeMismatch("forward: input must be 32 x 1024");

  if (ws.bufs.size() != 2 + 3 * kStages) {
    ws.bufs.assign(2 + 3 * static_cast<size_t>(kStages), {});
    ws.bufs[0].resize(static_cast<size_t>(kInChannels) * kInTaps);
    ws.bufs[1].resize(static_cast<size_t>(kTrunkChannels) * 512);
    for (int i = 0; i < kStages; ++i) {
      const size_t t = static_cast<size_t>(512 >> i);
      ws.bufs[2 + 3 * static_cast<size_t>(i)].resize(kTrunkChannels * t);
      ws.bufs[3 + 3 * static_cast<size_t>(i)].resize(kTrunkChannels * t);
      ws.bufs[4 + 3 * static_cast<size_t>(i)].resize(kTrunkChannels * t / 2);
    }
  }

  double* x = ws.bufs[0].data();
  for (size_t i = 0; i < rir.size(); ++i) x[i] = rir[i];

  const double* P = params_.data();
  auto W = [&](size_t spec_idx) { return P + specs_[spec_idx].offset; };

  // spec indices: 0,1 stem; per stage i: 2+6i .. 7+6i; then wpe at 26,27 and
  // eval at 28,29.
  double* s0 = ws.bufs[1].data();
  conv1d_forward(x, kInChannels, kInTaps, W(0), W(1), kTrunkChannels, 7, 2, 3, s0);
  relu_inplace(s0, ws.bufs[1].size());

  const double* cur = s0;
  int T = 512;
  for (int i = 0; i < kStages; ++i) {
    const size_t base = 2 + 6 * static_cast<size_t>(i);
    double* a = ws.bufs[2 + 3 * static_cast<size_t>(i)].data();
    double* c = ws.bufs[3 + 3 * static_cast<size_t>(i)].data();
    double* d = ws.bufs[4 + 3 * static_cast<size_t>(i)].data();
    const size_t n = static_cast<size_t>(kTrunkChannels) * T;

    conv1d_forward(cur, kTrunkChannels, T, W(base), W(base + 1), kTrunkChannels, 3, 1, 1, a);
    relu_inplace(a, n);
    conv1d_forward(a, kTrunkChannels, T, W(base + 2), W(base + 3), kTrunkChannels, 3, 1, 1, c);
    for (size_t j = 0; j < n; ++j) c[j] += cur[j];
    relu_inplace(c, n);
    conv1d_forward(c, kTrunkChannels, T, W(base + 4), W(base + 5), kTrunkChannels, 3, 2, 1, d);
    relu_inplace(d, n / 2);
    cur = d;
    T /= 2;
  }

  for (int ch = 0; ch < kTrunkChannels; ++ch) {
    double s = 0.0;
    for (int t = 0; t < T; ++t) s += cur[static_cast<size_t>(ch) * T + t];
    ws.gap[static_cast<size_t>(ch)] = s / T;
  }

  // The 1x1-conv-then-GAP heads commute: pooling first, then the linear map.
  const double* wpe_w = W(26);
  const double* wpe_b = W(27);
  const double* eval_w = W(28);
  const double* eval_b = W(29);

  NetOutput out;
  for (int o = 0; o < 32; ++o) {
    double s = wpe_b[o];
    for (int ch = 0; ch < 64; ++ch) s += wpe_w[o * 64 + ch] * ws.gap[static_cast<size_t>(ch)];
    out.a_tilde[static_cast<size_t>(o / 4)][static_cast<size_t>(o % 4)] = s;
  }
  for (int o = 0; o < 8; ++o) {
    double s = eval_b[o];
    for (int ch = 0; ch < 64; ++ch) s += eval_w[o * 64 + ch] * ws.gap[static_cast<size_t>(ch)];
    ws.eval_pre[static_cast<size_t>(o)] = s;
    out.p_hat[static_cast<size_t>(o)] = sigmoid(s);
  }
  for (size_t i = 0; i < 8; ++i)
    for (size_t j = 0; j < 4; ++j) out.a_hat[i][j] = out.p_hat[i] * out.a_tilde[i][j];

  ws.out = out;
  ws.owner = this;
  return out;
}

void Network::backward(const Workspace& ws, const std::array<std::array<double, 4>, 8>& da_hat,
                       const std::array<double, 8>& dp_hat_direct, std::span<double> grad) const {
  if (ws.owner != this) throw CacheMismatch("backward: cache from a different network");
  if (grad.size() != kParamCount) throw ShapeMismatch("backward: gradient buffer size");

  const double* P = params_.data();
  auto W = [&](size_t spec_idx) { return P + specs_[spec_idx].offset; };
  auto G = [&](size_t spec_idx) { return grad.data() + specs_[spec_idx].offset; };

  // Head gradients. p_hat feeds the loss directly and through the gating of
  // a_tilde; a_tilde only through the gating.
  std::array<double, 8> dv{};
  std::array<double, 32> du{};
  for (size_t i = 0; i < 8; ++i) {
    double dp = dp_hat_direct[i];
    for (size_t j = 0; j < 4; ++j) {
      dp += da_hat[i][j] * ws.out.a_tilde[i][j];
      du[4 * i + j] = da_hat[i][j] * ws.out.p_hat[i];
    }
    dv[i] = dp * ws.out.p_hat[i] * (1.0 - ws.out.p_hat[i]);
  }

  std::array<double, 64> dg{};
  {
    const double* wpe_w = W(26);
    double* gw = G(26);
    double* gb = G(27);
    for (int o = 0; o < 32; ++o) {
      gb[o] += du[static_cast<size_t>(o)];
      for (int ch = 0; ch < 64; ++ch) {
        gw[o * 64 + ch] += du[static_cast<size_t>(o)] * ws.gap[static_cast<size_t>(ch)];
        dg[static_cast<size_t>(ch)] += wpe_w[o * 64 + ch] * du[static_cast<size_t>(o)];
      }
    }
    const double* eval_w = W(28);
    double* ew = G(28);
    double* eb = G(29);
    for (int o = 0; o < 8; ++o) {
      eb[o] += dv[static_cast<size_t>(o)];
      for (int ch = 0; ch < 64; ++ch) {
        ew[o * 64 + ch] += dv[static_cast<size_t>(o)] * ws.gap[static_cast<size_t>(ch)];
        dg[static_cast<size_t>(ch)] += eval_w[o * 64 + ch] * dv[static_cast<size_t>(o)];
      }
    }
  }

  const size_t maxn = static_cast<size_t>(kTrunkChannels) * 512;
  std::vector<double> dcur(maxn), dc(maxn), da(maxn), dprev(maxn);
  std::vector<double> tmp_dw(static_cast<size_t>(64) * 32 * 7), tmp_db(64);

  // GAP backward into the final stage output (64 x 32).
  {
    const int T = 32;
    for (int ch = 0; ch < kTrunkChannels; ++ch)
      for (int t = 0; t < T; ++t)
        dcur[static_cast<size_t>(ch) * T + t] = dg[static_cast<size_t>(ch)] / T;
  }

  auto accumulate = [&](double* dst, const double* src, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] += src[i];
  };

  for (int i = kStages - 1; i >= 0; --i) {
    const int T = 512 >> i;
    const size_t n = static_cast<size_t>(kTrunkChannels) * T;
    const size_t base = 2 + 6 * static_cast<size_t>(i);
    const double* a = ws.bufs[2 + 3 * static_cast<size_t>(i)].data();
    const double* c = ws.bufs[3 + 3 * static_cast<size_t>(i)].data();
    const double* d = ws.bufs[4 + 3 * static_cast<size_t>(i)].data();
    const double* stage_in = i == 0 ? ws.bufs[1].data() : ws.bufs[4 + 3 * static_cast<size_t>(i - 1)].data();

    relu_mask(d, dcur.data(), n / 2);
    conv1d_backward(c, kTrunkChannels, T, W(base + 4), kTrunkChannels, 3, 2, 1, dcur.data(),
                    dc.data(), tmp_dw.data(), tmp_db.data());
    accumulate(G(base + 4), tmp_dw.data(), specs_[base + 4].size);
    accumulate(G(base + 5), tmp_db.data(), specs_[base + 5].size);

    relu_mask(c, dc.data(), n);
    conv1d_backward(a, kTrunkChannels, T, W(base + 2), kTrunkChannels, 3, 1, 1, dc.data(),
                    da.data(), tmp_dw.data(), tmp_db.data());
    accumulate(G(base + 2), tmp_dw.data(), specs_[base + 2].size);
    accumulate(G(base + 3), tmp_db.data(), specs_[base + 3].size);

    relu_mask(a, da.data(), n);
    conv1d_backward(stage_in, kTrunkChannels, T, W(base), kTrunkChannels, 3, 1, 1, da.data(),
                    dprev.data(), tmp_dw.data(), tmp_db.data());
    accumulate(G(base), tmp_dw.data(), specs_[base].size);
    accumulate(G(base + 1), tmp_db.data(), specs_[base + 1].size);

    // Skip connection: the stage input also fed the residual add.
    accumulate(dprev.data(), dc.data(), n);
    std::swap(dcur, dprev);
  }

  relu_mask(ws.bufs[1].data(), dcur.data(), static_cast<size_t>(kTrunkChannels) * 512);
  conv1d_backward(ws.bufs[0].data(), kInChannels, kInTaps, W(0), kTrunkChannels, 7, 2, 3,
                  dcur.data(), nullptr, tmp_dw.data(), tmp_db.data());
  accumulate(G(0), tmp_dw.data(), specs_[0].size);
  accumulate(G(1), tmp_db.data(), specs_[1].size);
}

void save_checkpoint(const std::string& path, const Network& net) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot open " + path + " for writing");
  serial::write_u32(os, kCheckpointMagic);
  serial::write_u32(os, kCheckpointVersion);
  serial::write_u32(os, static_cast<uint32_t>(net.tensor_specs().size()));
  const std::span<const double> params = net.params();
  for (const TensorSpec& s : net.tensor_specs()) {
    serial::write_u16(os, static_cast<uint16_t>(s.name.size()));
    os.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    serial::write_u8(os, static_cast<uint8_t>(s.dims.size()));
    for (uint32_t d : s.dims) serial::write_u32(os, d);
    for (size_t i = 0; i < s.size; ++i)
      serial::write_f32(os, static_cast<float>(params[s.offset + i]));
  }
  os.flush();
  if (!os) throw IoFailure("write failed on " + path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoFailure("cannot open " + path);
  if (serial::read_u32(is) != kCheckpointMagic) throw BadMagic("not a checkpoint file: " + path);
  const uint32_t version = serial::read_u32(is);
  if (version != kCheckpointVersion)
    throw VersionMismatch("checkpoint version " + std::to_string(version) + " unsupported");

  Network net;
  const uint32_t count = serial::read_u32(is);
  if (count != net.tensor_specs().size())
    throw VersionMismatch("checkpoint tensor count does not match the topology");
  std::span<double> params = net.params();
  for (const TensorSpec& s : net.tensor_specs()) {
    const uint16_t name_len = serial::read_u16(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw TruncatedFile("unexpected end of file");
    if (name != s.name) throw VersionMismatch("checkpoint tensor order: " + name);
    const uint8_t rank = serial::read_u8(is);
    if (rank != s.dims.size()) throw VersionMismatch("checkpoint tensor rank: " + name);
    for (uint32_t d : s.dims) {
      if (serial::read_u32(is) != d) throw VersionMismatch("checkpoint tensor shape: " + name);
    }
    for (size_t i = 0; i < s.size; ++i) params[s.offset + i] = serial::read_f32(is);
  }
  return net;
}

}  // namespace rgi
