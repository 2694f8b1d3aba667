#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace pollisim {

inline constexpr double kPi = 3.14159265358979323846;

/// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

inline double deg2rad(double d) { return d * kPi / 180.0; }

struct Vec2 {
  double x{0.0};
  double y{0.0};

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double squared_norm() const { return x * x + y * y; }
  double norm() const { return std::sqrt(squared_norm()); }
  Vec2 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
  Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  Vec2 xy() const { return {x, y}; }
};

/// Planar rigid pose; theta kept in (-pi, pi].
struct Pose2 {
  double x{0.0};
  double y{0.0};
  double theta{0.0};

  Vec2 position() const { return {x, y}; }
  Vec2 heading() const { return {std::cos(theta), std::sin(theta)}; }
};

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& a);

/// Map a point from the pose's local frame to the world frame.
Vec2 transform_point(const Pose2& p, const Vec2& local);
/// Map a world point into the pose's local frame.
Vec2 untransform_point(const Pose2& p, const Vec2& world);

struct Segment {
  Vec2 a;
  Vec2 b;
};

double distance_to_segment(const Vec2& p, const Segment& s);

/// Nearest intersection parameter t >= 0 of the ray origin + t*dir with the
/// segment, or nullopt. dir need not be unit; t is in units of |dir|.
std::optional<double> ray_segment_intersection(const Vec2& origin, const Vec2& dir,
                                               const Segment& s);

/// Rectangle around a centerline segment, half_width on each side.
struct OrientedRect {
  Vec2 a;
  Vec2 b;
  double half_width{0.0};

  double length() const { return (b - a).norm(); }
  Vec2 axis() const { return (b - a).normalized(); }
  std::array<Vec2, 4> corners() const;
  std::array<Segment, 4> edges() const;
  bool contains(const Vec2& p) const;
  /// Distance from p to the rectangle (0 inside).
  double distance(const Vec2& p) const;
};

using PointCloud2 = std::vector<Vec2>;

}  // namespace pollisim
