#include "rgi/ism.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "rgi/error.hpp"

namespace rgi {

namespace {

void fill_kernel(double delay, int halfwidth, double* taps, int& first_index) {
  const int base = static_cast<int>(std::floor(delay + 0.5));
  first_index = base - halfwidth;
  const double half_extent = halfwidth + 0.5;
  for (int k = 0; k <= 2 * halfwidth; ++k) {
    const double x = (first_index + k) - delay;
    double sinc = 1.0;
    if (x != 0.0) {
      const double px = std::numbers::pi * x;
      sinc = std::sin(px) / px;
    }
    const double w = std::cos(std::numbers::pi * x / (2.0 * half_extent));
    taps[k] = sinc * w * w;
  }
}

// True if the open segment (a, b) crosses any wall polygon. Endpoints lying
// exactly on a wall do not count: the parametric range is open.
bool segment_blocked(const RoomModel& room, const Vec3& a, const Vec3& b) {
  for (const WallPolygon& wall : room.walls) {
    if (ray_polygon_intersect(a, b, wall)) return true;
  }
  return false;
}

}  // namespace

std::vector<ImageSource> enumerate_image_sources(const RoomModel& room, int max_order,
                                                 std::span<const double> reflection_coeffs) {
  const int w = static_cast<int>(room.walls.size());
  if (reflection_coeffs.size() != room.walls.size())
    throw InvalidConfig("enumerate_image_sources: one reflection coefficient per wall required");
  if (max_order < 0) throw InvalidConfig("enumerate_image_sources: max_order must be >= 0");

  std::vector<ImageSource> out;
  size_t expected = 1;
  size_t level = 1;
  for (int k = 1; k <= max_order; ++k) {
    level *= (k == 1) ? static_cast<size_t>(w) : static_cast<size_t>(w - 1);
    expected += level;
  }
  out.reserve(expected);

  ImageSource root;
  root.position = {0.0, 0.0, 0.0};
  out.push_back(root);

  std::vector<int> seq;
  std::vector<Vec3> pos_stack{{0.0, 0.0, 0.0}};
  std::vector<double> gain_stack{1.0};

  auto dfs = [&](auto&& self) -> void {
    if (static_cast<int>(seq.size()) >= max_order) return;
    for (int wi = 0; wi < w; ++wi) {
      if (!seq.empty() && seq.back() == wi) continue;
      const WallPlane& plane = room.walls[static_cast<size_t>(wi)].plane;
      seq.push_back(wi);
      pos_stack.push_back(reflect_point(plane, pos_stack.back()));
      gain_stack.push_back(gain_stack.back() * reflection_coeffs[static_cast<size_t>(wi)]);

      ImageSource img;
      img.position = pos_stack.back();
      img.gain = gain_stack.back();
      img.order = static_cast<int>(seq.size());
      img.wall_sequence = seq;
      out.push_back(std::move(img));

      self(self);
      seq.pop_back();
      pos_stack.pop_back();
      gain_stack.pop_back();
    }
  };
  dfs(dfs);
  return out;
}

bool validate_path(const RoomModel& room, const ImageSource& img, const Vec3& receiver,
                   PathRejection* why) {
  const int k = img.order;
  if (why) *why = PathRejection::none;

  // Intermediate images: imgs[j] is the source mirrored over the first j
  // walls of the sequence. imgs[k] equals img.position.
  std::array<Vec3, 8> imgs;
  imgs[0] = {0.0, 0.0, 0.0};
  for (int j = 0; j < k; ++j) {
    const WallPlane& plane = room.walls[static_cast<size_t>(img.wall_sequence[static_cast<size_t>(j)])].plane;
    imgs[static_cast<size_t>(j + 1)] = reflect_point(plane, imgs[static_cast<size_t>(j)]);
  }

  Vec3 cur = receiver;
  for (int j = k; j >= 1; --j) {
    const int wi = img.wall_sequence[static_cast<size_t>(j - 1)];
    const WallPolygon& wall = room.walls[static_cast<size_t>(wi)];

    // The listening point must face the reflective side of the wall.
    if (signed_distance(wall.plane, cur) <= 0.0) {
      if (why) *why = PathRejection::unfold;
      return false;
    }
    const auto hit = ray_polygon_intersect(cur, imgs[static_cast<size_t>(j)], wall);
    if (!hit) {
      if (why) *why = PathRejection::unfold;
      return false;
    }
    // The leg up to the bounce point must be unobstructed. The walls at its
    // endpoints are touched at parameter 0 and 1, which the intersect test
    // excludes, so all walls can be tested uniformly.
    if (segment_blocked(room, cur, hit->point)) {
      if (why) *why = PathRejection::occlusion;
      return false;
    }
    cur = hit->point;
  }

  if (segment_blocked(room, cur, imgs[0])) {
    if (why) *why = PathRejection::occlusion;
    return false;
  }
  return true;
}

DelayKernel fractional_delay_kernel(double delay, int halfwidth) {
  if (halfwidth < 1) throw InvalidConfig("fractional_delay_kernel: halfwidth must be >= 1");
  DelayKernel k;
  k.taps.resize(static_cast<size_t>(2 * halfwidth + 1));
  fill_kernel(delay, halfwidth, k.taps.data(), k.first_index);
  return k;
}

namespace {

// Receiver-independent necessary condition for a specular path: every
// reflection in the sequence must mirror a point that lies strictly in front
// of the reflecting wall (a successful backtrack crossing implies it).
// Filtering on it changes no output, only skips hopeless images early.
bool sequence_plausible(const RoomModel& room, const ImageSource& img) {
  Vec3 p{0.0, 0.0, 0.0};
  for (int wi : img.wall_sequence) {
    const WallPlane& plane = room.walls[static_cast<size_t>(wi)].plane;
    if (signed_distance(plane, p) <= 0.0) return false;
    p = reflect_point(plane, p);
  }
  return true;
}

}  // namespace

std::vector<float> render_rir(const RoomModel& room, std::span<const ImageSource> images,
                              std::span<const Vec3> mics, const SimConfig& cfg) {
  if (cfg.taps <= 0 || cfg.fs <= 0.0 || cfg.c <= 0.0 || cfg.kernel_halfwidth < 1)
    throw InvalidConfig("render_rir: non-positive simulation parameter");
  double array_radius = 0.0;
  for (const Vec3& m : mics) {
    if (!point_inside_room(room, m)) throw MicOutsideRoom("render_rir: mic outside the room");
    array_radius = std::max(array_radius, norm(m));
  }

  const size_t taps = static_cast<size_t>(cfg.taps);
  std::vector<double> acc(mics.size() * taps, 0.0);
  std::vector<double> kernel(static_cast<size_t>(2 * cfg.kernel_halfwidth + 1));

  // Distinct wall sequences can mirror the source to the same point (shoebox
  // lattice); each such position contributes once per channel, first
  // enumerated sequence wins. Keys quantized to 1e-6 m.
  std::vector<std::set<std::array<long long, 3>>> seen(mics.size());
  const auto quantize = [](const Vec3& p) {
    return std::array<long long, 3>{std::llround(p.x * 1e6), std::llround(p.y * 1e6),
                                    std::llround(p.z * 1e6)};
  };

  // Beyond this delay no kernel tap lands inside the output buffer.
  const double cutoff = cfg.taps - 1 + cfg.kernel_halfwidth + 0.5;
  const double max_reach = cutoff * cfg.c / cfg.fs + array_radius;

  for (const ImageSource& img : images) {
    if (norm(img.position) > max_reach) continue;
    if (!sequence_plausible(room, img)) continue;
    for (size_t m = 0; m < mics.size(); ++m) {
      const double r = distance(img.position, mics[m]);
      const double delay = r / cfg.c * cfg.fs;
      if (delay > cutoff) continue;
      if (!validate_path(room, img, mics[m])) continue;
      if (!seen[m].insert(quantize(img.position)).second) continue;

      int first = 0;
      fill_kernel(delay, cfg.kernel_halfwidth, kernel.data(), first);
      const double amp = img.gain / std::max(r, 1e-9);
      const int lo = std::max(0, -first);
      const int hi = std::min(2 * cfg.kernel_halfwidth, cfg.taps - 1 - first);
      double* ch = acc.data() + m * taps;
      for (int k = lo; k <= hi; ++k) {
        ch[static_cast<size_t>(first + k)] += amp * kernel[static_cast<size_t>(k)];
      }
    }
  }

  std::vector<float> out(mics.size() * taps);
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

std::vector<float> simulate_rir(const RoomModel& room, std::span<const double> reflection_coeffs,
                                const SimConfig& cfg) {
  const auto images = enumerate_image_sources(room, cfg.max_order, reflection_coeffs);
  const auto mics = mic_positions();
  return render_rir(room, images, mics, cfg);
}

}  // namespace rgi
