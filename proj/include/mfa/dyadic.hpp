#pragma once

// Dyadic geometry on [0,1]^d under the sup metric: points, half-open grid
// cubes I_{j,k} = prod [k_i 2^-j, (k_i+1) 2^-j), and sup-metric balls.
// Everything is exact; the lattice-counting routines below are the closed
// forms the rest of the library leans on.

#include <mfa/rational.hpp>

#include <utility>
#include <vector>

namespace mfa {

struct Point {
  std::vector<Rat> x;

  Point() = default;
  explicit Point(std::vector<Rat> coords) : x(std::move(coords)) {
    if (x.empty()) throw Error("point needs at least one coordinate");
    for (const Rat& c : x)
      if (c < 0 || c > 1) throw Error("point coordinate outside [0,1]");
  }
  int dim() const { return static_cast<int>(x.size()); }

  bool operator==(const Point& o) const { return x == o.x; }
};

inline int cmp_points(const Point& a, const Point& b) {
  for (int i = 0; i < a.dim() && i < b.dim(); ++i) {
    int c = cmp(a.x[i], b.x[i]);
    if (c != 0) return c;
  }
  return a.dim() - b.dim();
}

struct CubeIndex {
  long level = 0;
  std::vector<Int> k;

  CubeIndex() = default;
  CubeIndex(long j, std::vector<Int> kk) : level(j), k(std::move(kk)) {
    if (j < 0) throw Error("negative cube level");
    if (k.empty()) throw Error("cube index needs at least one coordinate");
    Int top = pow2z(static_cast<unsigned long>(j));
    for (const Int& ki : k)
      if (ki < 0 || ki >= top) throw Error("cube index out of range at level " + std::to_string(j));
  }
  int dim() const { return static_cast<int>(k.size()); }
  Rat side() const { return pow2(-level); }
  Rat lo(int i) const { return Rat(k[i]) * pow2(-level); }
  Rat hi(int i) const { return Rat(k[i] + 1) * pow2(-level); }

  bool operator==(const CubeIndex& o) const { return level == o.level && k == o.k; }
};

// The unique level-j cube containing x; the upper boundary coordinate 1 is
// assigned to the last cube so the level-j cubes partition [0,1]^d.
inline CubeIndex containing_cube(const Point& p, long j) {
  if (j < 0) throw Error("negative cube level");
  Int top = pow2z(static_cast<unsigned long>(j));
  std::vector<Int> k(p.dim());
  for (int i = 0; i < p.dim(); ++i) {
    k[i] = floor_rat(p.x[i] * Rat(top));
    if (k[i] == top) k[i] = top - 1;  // x_i == 1
  }
  return CubeIndex(j, std::move(k));
}

inline Point cube_center(const CubeIndex& c) {
  std::vector<Rat> x(c.dim());
  for (int i = 0; i < c.dim(); ++i) x[i] = Rat(2 * c.k[i] + 1) * pow2(-(c.level + 1));
  return Point(std::move(x));
}

inline CubeIndex parent_cube(const CubeIndex& c) {
  if (c.level == 0) throw Error("root cube has no parent");
  std::vector<Int> k(c.k);
  for (Int& ki : k) ki >>= 1;
  return CubeIndex(c.level - 1, std::move(k));
}

inline Rat sup_distance(const Point& a, const Point& b) {
  if (a.dim() != b.dim()) throw Error("dimension mismatch");
  Rat best = 0;
  for (int i = 0; i < a.dim(); ++i) {
    Rat d = abs(a.x[i] - b.x[i]);
    if (d > best) best = d;
  }
  return best;
}

// Sup-metric ball; center need not be a grid point. Closed by default.
struct SupBall {
  Point center;
  Rat radius;
  bool closed = true;

  SupBall(Point c, Rat r, bool is_closed = true)
      : center(std::move(c)), radius(std::move(r)), closed(is_closed) {
    if (sgn(radius) <= 0) throw Error("ball radius must be positive");
  }
  int dim() const { return center.dim(); }
  Rat lo(int i) const { return center.x[i] - radius; }
  Rat hi(int i) const { return center.x[i] + radius; }
};

// Axis-aligned closed box inside [0,1]^d (probe geometry for measure bounds).
struct Box {
  std::vector<Rat> lo, hi;

  Box(std::vector<Rat> l, std::vector<Rat> h) : lo(std::move(l)), hi(std::move(h)) {
    if (lo.empty() || lo.size() != hi.size()) throw Error("box needs matching lo/hi");
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (lo[i] > hi[i]) throw Error("box with lo > hi");
      if (lo[i] < 0 || hi[i] > 1) throw Error("box outside [0,1]^d");
    }
  }
  int dim() const { return static_cast<int>(lo.size()); }
  // sup-metric diameter of a box = its largest side
  Rat sup_diameter() const {
    Rat best = 0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
      Rat s = hi[i] - lo[i];
      if (s > best) best = s;
    }
    return best;
  }
};

// Whether the half-open cube lies inside the ball.
inline bool ball_contains_cube(const SupBall& b, const CubeIndex& c) {
  if (b.dim() != c.dim()) throw Error("dimension mismatch");
  for (int i = 0; i < c.dim(); ++i) {
    Rat clo = c.lo(i), chi = c.hi(i);
    if (b.closed) {
      if (clo < b.lo(i) || chi > b.hi(i)) return false;
    } else {
      // [clo, chi) inside the open interval: the sup chi is not attained,
      // so chi <= hi suffices, but the lower face needs strictness.
      if (clo <= b.lo(i) || chi > b.hi(i)) return false;
    }
  }
  return true;
}

struct KRange {
  Int lo, hi;  // inclusive; empty when lo > hi
  bool empty() const { return lo > hi; }
  Int count() const { return empty() ? Int(0) : Int(hi - lo + 1); }
};

// Integers k in [0, 2^j - 1] whose level-j cube center (k+1/2)2^-j satisfies
//   lo (<|<=) center - inset   and   center + inset (<|<=) hi.
// inset > 0 shrinks toward containment of a radius-inset ball, inset = 0
// counts bare centers, inset < 0 counts centers whose |inset|-ball meets
// [lo,hi]. Strict flags pick < over <=.
inline KRange axis_center_range(const Rat& lo, const Rat& hi, long j, const Rat& inset,
                                bool lo_strict, bool hi_strict) {
  if (j < 0) throw Error("negative cube level");
  Int top = pow2z(static_cast<unsigned long>(j));
  Rat half(1, 2);
  Rat tlo = (lo + inset) * Rat(top) - half;
  Rat thi = (hi - inset) * Rat(top) - half;
  Int klo = lo_strict ? Int(floor_rat(tlo) + 1) : ceil_rat(tlo);
  Int khi = hi_strict ? Int(ceil_rat(thi) - 1) : floor_rat(thi);
  if (klo < 0) klo = 0;
  if (khi > top - 1) khi = top - 1;
  return KRange{std::move(klo), std::move(khi)};
}

// Number of level-j cube centers whose closed (resp. open) child ball of the
// given radius fits inside the parent ball. child_radius = 0 counts centers
// lying in the parent. Returns 0 when nothing fits.
inline Int cube_in_ball_count(const SupBall& parent, long j, const Rat& child_radius) {
  if (sgn(child_radius) < 0) throw Error("negative child radius");
  Int total = 1;
  for (int i = 0; i < parent.dim(); ++i) {
    KRange r = axis_center_range(parent.lo(i), parent.hi(i), j, child_radius,
                                 !parent.closed, !parent.closed);
    if (r.empty()) return 0;
    total *= r.count();
  }
  return total;
}

}  // namespace mfa
