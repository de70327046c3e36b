#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rgi/vec3.hpp"

namespace rgi {

inline constexpr double kGeomTol = 1e-9;   // coplanarity / intersection tolerance, meters
inline constexpr int kMaxWalls = 8;        // wall-candidate slots per room
inline constexpr int kMicCount = 32;
inline constexpr double kMicRadius = 0.042;  // meters

// Plane stored as a = [n1, n2, n3, d] with ||n|| = 1, d >= 0 and n pointing
// from the wall toward the device origin (so signed_distance(origin) = d > 0).
struct WallPlane {
  Vec3 n;
  double d = 0.0;

  std::array<double, 4> coeffs() const { return {n.x, n.y, n.z, d}; }
};

// n·q + d
inline double signed_distance(const WallPlane& plane, const Vec3& q) {
  return dot(plane.n, q) + plane.d;
}

// Mirror image of s across the plane: s - 2(n·s + d)n. Involutive.
inline Vec3 reflect_point(const WallPlane& plane, const Vec3& s) {
  return s - 2.0 * signed_distance(plane, s) * plane.n;
}

// Finite wall: an ordered, coplanar, simple polygon. Floor/ceiling of L-shaped
// rooms are non-convex, so containment tests must not assume convexity.
struct WallPolygon {
  std::vector<Vec3> vertices;
  WallPlane plane;
};

enum class ShapeFamily : uint8_t {
  shoebox = 0,
  pentagonal = 1,
  hexagonal = 2,
  l_shaped = 3,
};

const char* shape_family_name(ShapeFamily family);

// Closed prism-shaped room in device-centered coordinates. Wall order is
// fixed: floor, ceiling, then side walls in cross-section order.
struct RoomModel {
  std::vector<WallPolygon> walls;
  ShapeFamily shape_family = ShapeFamily::shoebox;
  Vec3 bbox;  // edge lengths (Lx, Ly, Lz)
  uint64_t seed = 0;
};

// Ground-truth wall parameters: rows 0..W-1 hold plane coefficients, the rest
// are zero; p flags the W true walls.
struct WallMatrix {
  std::array<std::array<double, 4>, kMaxWalls> a{};
  std::array<double, kMaxWalls> p{};
  int wall_count = 0;
};

// Fits the plane through the polygon, unit normal oriented toward the origin,
// d > 0. Throws DegeneratePolygon for collinear input or a plane through the
// origin.
WallPlane plane_from_polygon(std::span<const Vec3> vertices);

struct RayHit {
  Vec3 point;
  double t = 0.0;  // segment parameter, strictly inside (0, 1)
};

// Intersection of segment origin->target with the polygon, edges inclusive
// within kGeomTol. Endpoint grazes (t outside (eps, 1-eps)) and parallel
// segments report no hit.
std::optional<RayHit> ray_polygon_intersect(const Vec3& origin, const Vec3& target,
                                            const WallPolygon& poly);

// True if p lies inside the polygon (assumed on its plane), edges inclusive
// within tol meters. Handles non-convex simple polygons.
bool point_in_polygon(const WallPolygon& poly, const Vec3& p, double tol = kGeomTol);

// True if p is strictly inside the room (prism interior test).
bool point_inside_room(const RoomModel& room, const Vec3& p);

// Deterministic room constructors. Cross-section fractions are measured from
// the cut corner along its adjacent edges; corner indexes the rectangle
// corners (0,0),(Lx,0),(Lx,Ly),(0,Ly) counterclockwise.
RoomModel make_shoebox(double lx, double ly, double lz);
RoomModel make_pentagonal(double lx, double ly, double lz, int corner, double u, double v);
RoomModel make_hexagonal(double lx, double ly, double lz, int corner, double u1, double v1,
                         double u2, double v2);
RoomModel make_l_shaped(double lx, double ly, double lz, int corner, double u, double v);

// Random room of the given family, deterministic in rng_seed. Bounding box
// Lx, Ly ~ U[4,10], Lz ~ U[3,5]; device (origin) at the bounding-box center.
// Resamples internally until the room keeps >= 0.1 m clearance to every wall
// and, for the convex families, every wall stays first-order visible from the
// device center.
RoomModel sample_room(ShapeFamily family, uint64_t rng_seed);

// Rows in wall order (floor, ceiling, sides), zero-padded to kMaxWalls.
WallMatrix room_to_wall_matrix(const RoomModel& room);

// Golden-spiral layout on a sphere of the given radius.
std::vector<Vec3> mic_positions(int count = kMicCount, double radius = kMicRadius);

}  // namespace rgi
