#include <mfa/dyadic.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

using namespace mfa;

TEST_CASE("containing cube") {
  CHECK(containing_cube(Point({Rat(1, 2)}), 1).k == std::vector<Int>{Int(1)});
  CHECK(containing_cube(Point({Rat(1)}), 2).k == std::vector<Int>{Int(3)});
  CHECK(containing_cube(Point({Rat(0)}), 5).k == std::vector<Int>{Int(0)});
  CubeIndex c = containing_cube(Point({Rat(7, 8), Rat(1, 8)}), 2);
  CHECK(c.k == std::vector<Int>{Int(3), Int(0)});
  CHECK(c.level == 2);
}

TEST_CASE("cube geometry") {
  CubeIndex c(2, {Int(3), Int(0)});
  Point ctr = cube_center(c);
  CHECK(ctr.x[0] == Rat(7, 8));
  CHECK(ctr.x[1] == Rat(1, 8));
  CHECK(c.lo(0) == Rat(3, 4));
  CHECK(c.hi(0) == 1);
  CubeIndex p = parent_cube(c);
  CHECK(p.level == 1);
  CHECK(p.k == std::vector<Int>{Int(1), Int(0)});
  CHECK_THROWS_AS(parent_cube(CubeIndex(0, std::vector<Int>{Int(0)})), Error);
  CHECK_THROWS_AS(CubeIndex(2, std::vector<Int>{Int(4)}), Error);
  CHECK_THROWS_AS(CubeIndex(2, std::vector<Int>{Int(-1)}), Error);
}

TEST_CASE("sup metric") {
  CHECK(sup_distance(Point({Rat(0), Rat(0)}), Point({Rat(1, 2), Rat(1, 4)})) == Rat(1, 2));
  CHECK(sup_distance(Point({Rat(1, 3)}), Point({Rat(1, 3)})) == 0);
  CHECK_THROWS_AS(Point({Rat(3, 2)}), Error);
  CHECK_THROWS_AS(SupBall(Point({Rat(1, 2)}), Rat(0)), Error);
}

TEST_CASE("boxes") {
  Box b({Rat(1, 4), Rat(1, 2)}, {Rat(3, 8), Rat(1, 2)});
  CHECK(b.sup_diameter() == Rat(1, 8));
  CHECK_THROWS_AS(Box({Rat(1, 2)}, {Rat(1, 4)}), Error);
  CHECK_THROWS_AS(Box({Rat(0)}, {Rat(5, 4)}), Error);
}

TEST_CASE("axis center ranges: frozen case") {
  // parent ball [3/32, 5/32], children at level 6 with radius 2^-13:
  // centers 13/128 .. 19/128, i.e. k = 6..9
  KRange r = axis_center_range(Rat(3, 32), Rat(5, 32), 6, pow2(-13), false, false);
  CHECK(r.lo == 6);
  CHECK(r.hi == 9);
  CHECK(r.count() == 4);
}

TEST_CASE("axis center ranges: strictness and insets") {
  // bare centers in [1/4, 3/4] at level 2: centers 3/8, 5/8 (1/8 and 7/8 lie outside)
  KRange bare = axis_center_range(Rat(1, 4), Rat(3, 4), 2, Rat(0), false, false);
  CHECK(bare.lo == 1);
  CHECK(bare.hi == 2);
  // center exactly on the boundary: [3/8, 5/8] contains centers 3/8 and 5/8
  KRange edge = axis_center_range(Rat(3, 8), Rat(5, 8), 2, Rat(0), false, false);
  CHECK(edge.count() == 2);
  // strict versions drop both boundary centers
  KRange strict = axis_center_range(Rat(3, 8), Rat(5, 8), 2, Rat(0), true, true);
  CHECK(strict.count() == 0);
  // meeting (negative inset): radius-1/8 balls around centers meeting [0, 1/4]
  // at level 2: centers 1/8 and 3/8 qualify
  KRange meet = axis_center_range(Rat(0), Rat(1, 4), 2, Rat(-1, 8), false, false);
  CHECK(meet.count() == 2);
  // clamping to [0, 2^j - 1]
  KRange all = axis_center_range(Rat(0), Rat(1), 3, Rat(-1), false, false);
  CHECK(all.lo == 0);
  CHECK(all.hi == 7);
}

TEST_CASE("ball containment of cubes") {
  SupBall closed(Point({Rat(1, 2)}), Rat(1, 4), true);
  // [1/4, 1/2) inside [1/4, 3/4]
  CHECK(ball_contains_cube(closed, CubeIndex(2, {Int(1)})));
  CHECK_FALSE(ball_contains_cube(closed, CubeIndex(2, {Int(0)})));
  SupBall open(Point({Rat(1, 2)}), Rat(1, 4), false);
  // [1/4, 1/2): lower face 1/4 is attained, not inside the open ball
  CHECK_FALSE(ball_contains_cube(open, CubeIndex(2, {Int(1)})));
  // [3/8, 1/2) inside (1/4, 3/4)
  CHECK(ball_contains_cube(open, CubeIndex(3, {Int(3)})));
}

TEST_CASE("closed-form contained-cube counts match brute force") {
  std::mt19937_64 rng(20240817);
  for (int trial = 0; trial < 60; ++trial) {
    int d = 1 + static_cast<int>(rng() % 2);
    long theta_num = (rng() % 2) ? 3 : 4;  // theta = 3/2 or 2
    long Jp = 2 * (1 + static_cast<long>(rng() % 2));  // 2 or 4 (even: theta Jp integral)
    long maxJ = d == 1 ? 12 : 8;
    long J = Jp + 2 + static_cast<long>(rng() % (maxJ - Jp - 1));
    if (J % 2) ++J;  // keep theta J integral for theta = 3/2
    long tJp = theta_num * Jp / 2, tJ = theta_num * J / 2;
    std::vector<long> kp(d);
    for (int i = 0; i < d; ++i) kp[i] = static_cast<long>(rng() % (1uL << Jp));
    std::vector<Rat> center(d);
    for (int i = 0; i < d; ++i) center[i] = Rat(2 * kp[i] + 1) * pow2(-(Jp + 1));
    SupBall parent(Point(center), pow2(-tJp - 1), true);
    Int fast = cube_in_ball_count(parent, J, pow2(-tJ - 1));
    Int slow = oracles::brute_force_contained(d, Jp, kp, tJp, J, tJ);
    REQUIRE(fast == slow);
  }
}
