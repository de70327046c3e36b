#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rgi {

// Plain 1-D convolution and its gradients, channel-major layout:
// x is [cin][tin], w is [cout][cin][k], y is [cout][tout] with
// tout = (tin + 2*pad - k) / stride + 1.
int conv1d_out_len(int tin, int k, int stride, int pad);

void conv1d_forward(const double* x, int cin, int tin, const double* w, const double* b,
                    int cout, int k, int stride, int pad, double* y);

// Accumulates nothing: dx, dw, db are fully overwritten. dx may be null when
// the input gradient is not needed (first layer).
void conv1d_backward(const double* x, int cin, int tin, const double* w, int cout, int k,
                     int stride, int pad, const double* dy, double* dx, double* dw, double* db);

struct TensorSpec {
  std::string name;
  std::vector<uint32_t> dims;
  size_t offset = 0;  // into the flat parameter buffer
  size_t size = 0;
};

struct NetOutput {
  std::array<std::array<double, 4>, 8> a_tilde{};  // wall-parameter head rows
  std::array<double, 8> p_hat{};                   // slot confidences, sigmoid outputs
  std::array<std::array<double, 4>, 8> a_hat{};    // a_tilde rows scaled by p_hat
};

// Scratch activations for one forward pass, reusable across samples. Contents
// are only meaningful to Network::backward.
struct Workspace {
  std::vector<std::vector<double>> bufs;
  std::array<double, 64> gap{};
  std::array<double, 8> eval_pre{};
  NetOutput out;
  const void* owner = nullptr;  // network that produced the cached activations
};

// Fixed-topology estimator mapping a 32 x 1024 multichannel RIR to eight wall
// slots: a strided stem convolution, four residual stages that halve the time
// axis, then two global-average-pooled linear heads (wall parameters and slot
// confidence). All math is double precision and runs on the CPU.
class Network {
 public:
  static constexpr int kInChannels = 32;
  static constexpr int kInTaps = 1024;
  static constexpr size_t kParamCount = 165224;

  Network();  // all parameters zero

  // Uniform fan-in initialization, deterministic in the seed.
  void init(uint64_t seed);

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  const std::vector<TensorSpec>& tensor_specs() const { return specs_; }
  std::span<double> tensor(const std::string& name);

  NetOutput forward(std::span<const float> rir) const;
  NetOutput forward(std::span<const float> rir, Workspace& ws) const;

  // Gradient of a scalar loss given its partials with respect to a_hat and
  // the direct partial with respect to p_hat (the indirect path through
  // a_hat = diag(p_hat) a_tilde is handled internally). Accumulates into
  // grad, which must have kParamCount entries.
  void backward(const Workspace& ws, const std::array<std::array<double, 4>, 8>& da_hat,
                const std::array<double, 8>& dp_hat_direct, std::span<double> grad) const;

 private:
  std::vector<double> params_;
  std::vector<TensorSpec> specs_;
};

inline constexpr uint32_t kCheckpointMagic = 0x57494752;  // "RGIW"
inline constexpr uint32_t kCheckpointVersion = 1;

// Named-tensor checkpoint, float32 payload. Loading validates magic, version,
// and that names and shapes match this topology exactly.
void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace rgi
