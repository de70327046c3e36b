#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rgi/geometry.hpp"
#include "rgi/vec3.hpp"

namespace rgi {

struct SimConfig {
  double fs = 8000.0;        // sample rate, Hz
  int taps = 1024;           // RIR length per channel
  double c = 343.0;          // speed of sound, m/s
  int max_order = 6;         // highest reflection order
  int kernel_halfwidth = 40; // fractional-delay kernel half-width, samples
};

// A (possibly invalid) image of the source at the origin. wall_sequence lists
// the wall indices in reflection order: position is the origin mirrored over
// wall_sequence[0], then [1], and so on. gain is the product of the
// reflection coefficients along the sequence.
struct ImageSource {
  Vec3 position;
  double gain = 1.0;
  int order = 0;
  std::vector<int> wall_sequence;
};

// All candidate images up to max_order: every wall-index sequence without
// immediate repeats. No geometric pruning happens here; validity against a
// concrete receiver is decided by validate_path.
// reflection_coeffs has one entry per wall.
std::vector<ImageSource> enumerate_image_sources(const RoomModel& room, int max_order,
                                                 std::span<const double> reflection_coeffs);

enum class PathRejection { none, unfold, occlusion };

// Specular path check by backtracking from the receiver toward the image.
// At each step the segment must hit the front face of the reflecting wall
// inside its polygon, and every leg (including the final leg to the true
// source) must be free of intersections with all other walls.
// On rejection, *why (if non-null) reports which test failed first.
bool validate_path(const RoomModel& room, const ImageSource& img, const Vec3& receiver,
                   PathRejection* why = nullptr);

// Hann-windowed sinc interpolation kernel centered at a fractional delay
// (in samples). taps has 2*halfwidth+1 entries; taps[k] belongs to output
// sample first_index + k. first_index can be negative or beyond the end of
// the output buffer; callers clip.
struct DelayKernel {
  std::vector<double> taps;
  int first_index = 0;
};

DelayKernel fractional_delay_kernel(double delay, int halfwidth);

// Renders the multichannel RIR for the source at the origin: for every
// (image, mic) pair with a valid specular path, adds gain/r times the delay
// kernel at r/c seconds. Output is mic-major, mics.size() * cfg.taps floats.
std::vector<float> render_rir(const RoomModel& room, std::span<const ImageSource> images,
                              std::span<const Vec3> mics, const SimConfig& cfg);

// enumerate + render at the standard spherical array in one call.
std::vector<float> simulate_rir(const RoomModel& room, std::span<const double> reflection_coeffs,
                                const SimConfig& cfg);

}  // namespace rgi
