#include <doctest.h>

#include <cmath>

#include "pollisim/geometry.hpp"

using namespace pollisim;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(0.1) == doctest::Approx(0.1));
  CHECK(wrap_angle(2.0 * kPi + 0.1) == doctest::Approx(0.1));
  for (double a = -50.0; a < 50.0; a += 0.37) {
    const double w = wrap_angle(a);
    CHECK(w > -kPi);
    CHECK(w <= kPi + 1e-15);
    CHECK(std::abs(std::sin(w) - std::sin(a)) < 1e-9);
    CHECK(std::abs(std::cos(w) - std::cos(a)) < 1e-9);
  }
}

TEST_CASE("pose composition identity and inverse laws") {
  const Pose2 b{0.4, -1.2, 0.7};
  const Pose2 ib = compose(Pose2{}, b);
  CHECK(ib.x == doctest::Approx(b.x));
  CHECK(ib.y == doctest::Approx(b.y));
  CHECK(ib.theta == doctest::Approx(b.theta));

  const Pose2 a{1.5, 2.5, -2.1};
  const Pose2 e = compose(a, inverse(a));
  CHECK(std::abs(e.x) < 1e-12);
  CHECK(std::abs(e.y) < 1e-12);
  CHECK(std::abs(e.theta) < 1e-12);
}

TEST_CASE("pose composition with a quarter turn") {
  // compose((1,0,pi/2),(1,0,0)) = (1,1,pi/2) by rotation-matrix arithmetic
  const Pose2 c = compose({1, 0, kPi / 2}, {1, 0, 0});
  CHECK(c.x == doctest::Approx(1.0));
  CHECK(c.y == doctest::Approx(1.0));
  CHECK(c.theta == doctest::Approx(kPi / 2));
}

TEST_CASE("ray-segment intersection") {
  const Segment s{{2.0, -1.0}, {2.0, 1.0}};
  auto t = ray_segment_intersection({0, 0}, {1, 0}, s);
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(2.0));

  CHECK(!ray_segment_intersection({0, 0}, {-1, 0}, s).has_value());
  CHECK(!ray_segment_intersection({0, 5}, {1, 0}, s).has_value());
  // parallel ray
  CHECK(!ray_segment_intersection({0, 0}, {0, 1}, s).has_value());
}

TEST_CASE("oriented rectangle containment and distance") {
  const OrientedRect r{{0, 0}, {4, 0}, 0.5};
  CHECK(r.contains({2.0, 0.4}));
  CHECK(r.contains({2.0, -0.5}));
  CHECK(!r.contains({2.0, 0.6}));
  CHECK(!r.contains({-0.1, 0.0}));
  CHECK(r.distance({2.0, 1.5}) == doctest::Approx(1.0));
  CHECK(r.distance({2.0, 0.0}) == doctest::Approx(0.0));
  CHECK(r.distance({5.0, 0.0}) == doctest::Approx(1.0));
}

TEST_SUITE_END();
