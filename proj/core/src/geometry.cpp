#include "rgi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rgi/error.hpp"
#include "rgi/rng.hpp"

namespace rgi {

namespace {

constexpr double kWallClearance = 0.1;        // min origin-to-wall distance, meters
constexpr double kVisibilityClearance = 0.05; // margin for center-visibility feet, meters

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

// Axis to drop when projecting the polygon to 2D.
int dominant_axis(const Vec3& n) {
  const double ax = std::abs(n.x), ay = std::abs(n.y), az = std::abs(n.z);
  if (az >= ax && az >= ay) return 2;
  return ax >= ay ? 0 : 1;
}

void project2d(const Vec3& p, int drop, double& u, double& v) {
  switch (drop) {
    case 0: u = p.y; v = p.z; break;
    case 1: u = p.x; v = p.z; break;
    default: u = p.x; v = p.y; break;
  }
}

// Even-odd rule in the projected plane.
bool parity_inside(const WallPolygon& poly, const Vec3& p) {
  const int drop = dominant_axis(poly.plane.n);
  double pu, pv;
  project2d(p, drop, pu, pv);
  bool inside = false;
  const size_t n = poly.vertices.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    double au, av, bu, bv;
    project2d(poly.vertices[i], drop, au, av);
    project2d(poly.vertices[j], drop, bu, bv);
    if ((av > pv) != (bv > pv)) {
      const double xc = au + (pv - av) * (bu - au) / (bv - av);
      if (pu < xc) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

const char* shape_family_name(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::shoebox: return "shoebox";
    case ShapeFamily::pentagonal: return "pentagonal";
    case ShapeFamily::hexagonal: return "hexagonal";
    case ShapeFamily::l_shaped: return "l_shaped";
  }
  return "unknown";
}

WallPlane plane_from_polygon(std::span<const Vec3> vertices) {
  if (vertices.size() < 3) throw DegeneratePolygon("polygon needs at least 3 vertices");

  // Newell's method; robust against the first vertices being nearly collinear.
  Vec3 n{};
  for (size_t i = 0, j = vertices.size() - 1; i < vertices.size(); j = i++) {
    const Vec3& a = vertices[j];
    const Vec3& b = vertices[i];
    n.x += (a.y - b.y) * (a.z + b.z);
    n.y += (a.z - b.z) * (a.x + b.x);
    n.z += (a.x - b.x) * (a.y + b.y);
  }
  const double len = norm(n);
  if (len < kGeomTol) throw DegeneratePolygon("collinear or degenerate polygon vertices");
  n = {n.x / len, n.y / len, n.z / len};

  double d = 0.0;
  for (const Vec3& v : vertices) d -= dot(n, v);
  d /= static_cast<double>(vertices.size());

  if (std::abs(d) < kGeomTol) throw DegeneratePolygon("plane passes through the origin");
  if (d < 0.0) {
    n = -n;
    d = -d;
  }
  return {n, d};
}

bool point_in_polygon(const WallPolygon& poly, const Vec3& p, double tol) {
  const size_t n = poly.vertices.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    if (point_segment_distance(p, poly.vertices[j], poly.vertices[i]) <= tol) return true;
  }
  return parity_inside(poly, p);
}

std::optional<RayHit> ray_polygon_intersect(const Vec3& origin, const Vec3& target,
                                            const WallPolygon& poly) {
  const double sa = signed_distance(poly.plane, origin);
  const double sb = signed_distance(poly.plane, target);
  const double denom = sa - sb;
  if (std::abs(denom) < 1e-15) return std::nullopt;  // parallel to the plane

  const double t = sa / denom;
  constexpr double eps = kGeomTol;
  if (t <= eps || t >= 1.0 - eps) return std::nullopt;

  const Vec3 point = origin + t * (target - origin);
  if (!point_in_polygon(poly, point, kGeomTol)) return std::nullopt;
  return RayHit{point, t};
}

bool point_inside_room(const RoomModel& room, const Vec3& p) {
  const WallPolygon& floor = room.walls[0];
  const WallPolygon& ceiling = room.walls[1];
  if (signed_distance(floor.plane, p) <= 0.0) return false;
  if (signed_distance(ceiling.plane, p) <= 0.0) return false;
  return parity_inside(floor, p);  // floor normal is +z, parity drops z
}

namespace {

struct P2 {
  double x, y;
};

std::array<P2, 4> rect_corners(double lx, double ly) {
  return {{{0.0, 0.0}, {lx, 0.0}, {lx, ly}, {0.0, ly}}};
}

// Replaces corner k of the rectangle with a chord: cut points at fraction u of
// the incoming edge and v of the outgoing edge, measured from the corner.
void cut_chamfer(std::vector<P2>& cs, const std::array<P2, 4>& c, int k, double u, double v) {
  const P2 corner = c[k];
  const P2 prev = c[(k + 3) % 4];
  const P2 next = c[(k + 1) % 4];
  const P2 p1{corner.x + u * (prev.x - corner.x), corner.y + u * (prev.y - corner.y)};
  const P2 p2{corner.x + v * (next.x - corner.x), corner.y + v * (next.y - corner.y)};
  for (size_t i = 0; i < cs.size(); ++i) {
    if (cs[i].x == corner.x && cs[i].y == corner.y) {
      cs[i] = p1;
      cs.insert(cs.begin() + static_cast<long>(i) + 1, p2);
      return;
    }
  }
}

// Replaces corner k with a rectangular notch of depth u along the incoming
// edge and v along the outgoing edge.
void cut_notch(std::vector<P2>& cs, const std::array<P2, 4>& c, int k, double u, double v) {
  const P2 corner = c[k];
  const P2 prev = c[(k + 3) % 4];
  const P2 next = c[(k + 1) % 4];
  const P2 du{u * (prev.x - corner.x), u * (prev.y - corner.y)};
  const P2 dv{v * (next.x - corner.x), v * (next.y - corner.y)};
  const P2 r1{corner.x + du.x, corner.y + du.y};
  const P2 r2{corner.x + du.x + dv.x, corner.y + du.y + dv.y};
  const P2 r3{corner.x + dv.x, corner.y + dv.y};
  for (size_t i = 0; i < cs.size(); ++i) {
    if (cs[i].x == corner.x && cs[i].y == corner.y) {
      cs[i] = r1;
      cs.insert(cs.begin() + static_cast<long>(i) + 1, {r2, r3});
      return;
    }
  }
}

RoomModel build_prism(std::vector<P2> cross_section, ShapeFamily family, double lx, double ly,
                      double lz) {
  // Device-centered coordinates: bounding-box center at the origin.
  const double cx = lx / 2.0, cy = ly / 2.0, h = lz / 2.0;
  for (P2& p : cross_section) {
    p.x -= cx;
    p.y -= cy;
  }

  RoomModel room;
  room.shape_family = family;
  room.bbox = {lx, ly, lz};

  const size_t n = cross_section.size();
  WallPolygon floor, ceiling;
  for (const P2& p : cross_section) {
    floor.vertices.push_back({p.x, p.y, -h});
    ceiling.vertices.push_back({p.x, p.y, h});
  }
  floor.plane = plane_from_polygon(floor.vertices);
  ceiling.plane = plane_from_polygon(ceiling.vertices);
  room.walls.push_back(std::move(floor));
  room.walls.push_back(std::move(ceiling));

  for (size_t i = 0; i < n; ++i) {
    const P2& a = cross_section[i];
    const P2& b = cross_section[(i + 1) % n];
    WallPolygon side;
    side.vertices = {{a.x, a.y, -h}, {b.x, b.y, -h}, {b.x, b.y, h}, {a.x, a.y, h}};
    side.plane = plane_from_polygon(side.vertices);
    room.walls.push_back(std::move(side));
  }
  return room;
}

// Perpendicular foot of the origin on every wall must sit inside the wall
// polygon with some margin; in a convex room that is exactly first-order
// visibility from the device center.
bool center_sees_all_walls(const RoomModel& room) {
  for (const WallPolygon& wall : room.walls) {
    const Vec3 foot = -wall.plane.d * wall.plane.n;
    if (!parity_inside(wall, foot)) return false;
    const size_t n = wall.vertices.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
      if (point_segment_distance(foot, wall.vertices[j], wall.vertices[i]) < kVisibilityClearance)
        return false;
    }
  }
  return true;
}

bool room_is_acceptable(const RoomModel& room) {
  for (const WallPolygon& wall : room.walls) {
    if (wall.plane.d < kWallClearance) return false;
  }
  if (room.shape_family != ShapeFamily::l_shaped) return center_sees_all_walls(room);
  return true;
}

}  // namespace

RoomModel make_shoebox(double lx, double ly, double lz) {
  const auto c = rect_corners(lx, ly);
  std::vector<P2> cs(c.begin(), c.end());
  return build_prism(std::move(cs), ShapeFamily::shoebox, lx, ly, lz);
}

RoomModel make_pentagonal(double lx, double ly, double lz, int corner, double u, double v) {
  const auto c = rect_corners(lx, ly);
  std::vector<P2> cs(c.begin(), c.end());
  cut_chamfer(cs, c, corner & 3, u, v);
  return build_prism(std::move(cs), ShapeFamily::pentagonal, lx, ly, lz);
}

RoomModel make_hexagonal(double lx, double ly, double lz, int corner, double u1, double v1,
                         double u2, double v2) {
  const auto c = rect_corners(lx, ly);
  std::vector<P2> cs(c.begin(), c.end());
  cut_chamfer(cs, c, corner & 3, u1, v1);
  cut_chamfer(cs, c, (corner + 2) & 3, u2, v2);
  return build_prism(std::move(cs), ShapeFamily::hexagonal, lx, ly, lz);
}

RoomModel make_l_shaped(double lx, double ly, double lz, int corner, double u, double v) {
  const auto c = rect_corners(lx, ly);
  std::vector<P2> cs(c.begin(), c.end());
  cut_notch(cs, c, corner & 3, u, v);
  return build_prism(std::move(cs), ShapeFamily::l_shaped, lx, ly, lz);
}

RoomModel sample_room(ShapeFamily family, uint64_t rng_seed) {
  for (uint64_t attempt = 0; attempt < 10000; ++attempt) {
    Rng rng(mix_seed(rng_seed, attempt));
    const double lx = rng.uniform(4.0, 10.0);
    const double ly = rng.uniform(4.0, 10.0);
    const double lz = rng.uniform(3.0, 5.0);

    RoomModel room;
    switch (family) {
      case ShapeFamily::shoebox:
        room = make_shoebox(lx, ly, lz);
        break;
      case ShapeFamily::pentagonal: {
        const int corner = static_cast<int>(rng.next_below(4));
        const double u = rng.uniform(0.3, 0.7);
        const double v = rng.uniform(0.3, 0.7);
        room = make_pentagonal(lx, ly, lz, corner, u, v);
        break;
      }
      case ShapeFamily::hexagonal: {
        const int corner = static_cast<int>(rng.next_below(4));
        const double u1 = rng.uniform(0.3, 0.7);
        const double v1 = rng.uniform(0.3, 0.7);
        const double u2 = rng.uniform(0.3, 0.7);
        const double v2 = rng.uniform(0.3, 0.7);
        room = make_hexagonal(lx, ly, lz, corner, u1, v1, u2, v2);
        break;
      }
      case ShapeFamily::l_shaped: {
        const int corner = static_cast<int>(rng.next_below(4));
        const double u = rng.uniform(0.3, 0.5);
        const double v = rng.uniform(0.3, 0.5);
        room = make_l_shaped(lx, ly, lz, corner, u, v);
        break;
      }
    }

    if (room_is_acceptable(room)) {
      room.seed = rng_seed;
      return room;
    }
  }
  throw Error("sample_room: no acceptable room after 10000 attempts");
}

WallMatrix room_to_wall_matrix(const RoomModel& room) {
  WallMatrix m;
  m.wall_count = static_cast<int>(room.walls.size());
  for (int w = 0; w < m.wall_count; ++w) {
    m.a[static_cast<size_t>(w)] = room.walls[static_cast<size_t>(w)].plane.coeffs();
    m.p[static_cast<size_t>(w)] = 1.0;
  }
  return m;
}

std::vector<Vec3> mic_positions(int count, double radius) {
  if (count < 2) throw InvalidConfig("mic_positions: count must be >= 2");
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> pts;
  pts.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double az = 2.0 * std::numbers::pi * i * (1.0 - 1.0 / golden);
    const double r = std::sqrt(1.0 - z * z);
    pts.push_back({radius * r * std::cos(az), radius * r * std::sin(az), radius * z});
  }
  return pts;
}

}  // namespace rgi
