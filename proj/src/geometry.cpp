#include "pollisim/geometry.hpp"

#include <algorithm>

namespace pollisim {

double wrap_angle(double a) {
  // Reduce into (-pi, pi]; fmod keeps this O(1) for large inputs.
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y,
          wrap_angle(a.theta + b.theta)};
}

Pose2 inverse(const Pose2& a) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return {-(c * a.x + s * a.y), -(-s * a.x + c * a.y), wrap_angle(-a.theta)};
}

Vec2 transform_point(const Pose2& p, const Vec2& local) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  return {p.x + c * local.x - s * local.y, p.y + s * local.x + c * local.y};
}

Vec2 untransform_point(const Pose2& p, const Vec2& world) {
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  const Vec2 d{world.x - p.x, world.y - p.y};
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

double distance_to_segment(const Vec2& p, const Segment& s) {
  const Vec2 ab = s.b - s.a;
  const double len2 = ab.squared_norm();
  if (len2 == 0.0) return (p - s.a).norm();
  const double t = std::clamp((p - s.a).dot(ab) / len2, 0.0, 1.0);
  return (p - (s.a + ab * t)).norm();
}

std::optional<double> ray_segment_intersection(const Vec2& origin, const Vec2& dir,
                                               const Segment& s) {
  // Solve origin + t*dir = a + u*(b-a), t >= 0, u in [0,1].
  const Vec2 e = s.b - s.a;
  const double denom = dir.cross(e);
  if (std::abs(denom) < 1e-14) return std::nullopt;  // parallel
  const Vec2 d = s.a - origin;
  const double t = d.cross(e) / denom;
  const double u = d.cross(dir) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

std::array<Vec2, 4> OrientedRect::corners() const {
  const Vec2 ax = axis();
  const Vec2 n = ax.perp() * half_width;
  return {a + n, b + n, b - n, a - n};
}

std::array<Segment, 4> OrientedRect::edges() const {
  const auto c = corners();
  return {Segment{c[0], c[1]}, Segment{c[1], c[2]}, Segment{c[2], c[3]},
          Segment{c[3], c[0]}};
}

bool OrientedRect::contains(const Vec2& p) const {
  const Vec2 ax = axis();
  const Vec2 d = p - a;
  const double along = d.dot(ax);
  const double lateral = d.cross(ax);
  return along >= 0.0 && along <= length() && std::abs(lateral) <= half_width;
}

double OrientedRect::distance(const Vec2& p) const {
  if (contains(p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : edges()) best = std::min(best, distance_to_segment(p, e));
  return best;
}

}  // namespace pollisim
