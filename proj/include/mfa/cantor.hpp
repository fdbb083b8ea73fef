#pragma once

// Nested-ball Cantor sets driven by a level schedule (theta, J_1 < ... < J_P):
// generation p consists of closed sup-balls of radius 2^{-theta J_p - 1}
// centered at grid points (k+e) 2^{-J_p}, each generation nested in the last.
// The natural premeasure gives every generation-p ball the mass
// (Delta_1 ... Delta_p)^{-1}, Delta_k the (uniform) branching count.
//
// Everything here is exact: branching counts come from the per-axis lattice
// ranges, masses stay in factored form (products of Delta), and every
// inequality involving a rational exponent is decided by raising both sides
// to the common integer power. Schedule validation reports which growth
// conditions hold and never rejects a monotone schedule; verification gates
// FAIL on facts the schedule guarantees and reports the rest as observations.

#include <mfa/constructions.hpp>
#include <mfa/dyadic.hpp>
#include <mfa/measure.hpp>
#include <mfa/report.hpp>

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mfa::cantor {

struct Schedule {
  int d;
  Rat theta;
  std::vector<long> levels;  // J_1 < J_2 < ... < J_P

  Schedule(int dim, Rat th, std::vector<long> Js)
      : d(dim), theta(std::move(th)), levels(std::move(Js)) {
    if (d < 1) throw Error("schedule dimension must be >= 1");
    if (theta <= 1) throw Error("schedule needs theta > 1");
    if (levels.empty()) throw Error("schedule needs at least one level");
    long prev = 0;
    for (long J : levels) {
      if (J < 1) throw Error("schedule levels must be positive");
      if (J <= prev) throw Error("schedule levels must increase strictly");
      if (J > (1L << 24)) throw Error("schedule level out of range");
      prev = J;
      Rat tj = theta * J;
      if (tj.get_den() != 1)
        throw Error("theta * J_p must be an integer (got " + rat_str(tj) + ")");
    }
  }

  int P() const { return static_cast<int>(levels.size()); }
  long J(int p) const {  // 1-based
    if (p < 1 || p > P()) throw Error("generation index out of range");
    return levels[p - 1];
  }
  long thetaJ(int p) const {
    Rat tj = theta * J(p);
    if (!tj.get_num().fits_slong_p()) throw Error("theta * J_p out of range");
    return tj.get_num().get_si();
  }
  Rat node_radius(int p) const { return pow2(-thetaJ(p) - 1); }
  Rat approx_radius(int p) const { return pow2(-thetaJ(p)); }

  SupBall root_ball() const {
    std::vector<Rat> c(d, Rat(1, 2));
    return SupBall(Point(std::move(c)), Rat(1, 2), true);
  }
};

// --- schedule growth conditions ----------------------------------------------

struct ScheduleChecks {
  struct Transition {        // facts about J_p -> J_{p+1}, index p-1
    bool growth_strict;      // J_{p+1} > max(100 theta J_p, p^2)
    bool growth_ratio;       // d J_{p+1} / (p+1) >= d theta J_p + 2
    bool desk_margin;        // J_{p+1} >= 4 theta J_p
    Rat strict_margin;       // J_{p+1} - max(100 theta J_p, p^2)
  };
  struct Generation {        // facts about the level prefix up to p, index p-1
    bool sum_lower;          // J_p (1 + 1/p) >= sum_{k<=p} J_k
    bool sum_upper;          // sum_{k<=p} J_k (1 - 1/k) >= J_p (1 - 2/p)
  };
  std::vector<Transition> transitions;  // size P-1
  std::vector<Generation> generations;  // size P
  bool j1_above_100 = false;

  bool delta_lower_guaranteed(int p) const {  // Delta_{p+1} >= 2^{d J_{p+1} (1 - 1/(p+1))}
    const auto& t = transitions[p - 1];
    return t.desk_margin && t.growth_ratio;
  }
  bool mass_lower_guaranteed(int p) const {  // m(I) >= 2^{-d J_p (1 + 1/p)}
    return generations[p - 1].sum_lower;
  }
  bool mass_upper_guaranteed(int p) const {  // m(I) <= 2^{-d J_p (1 - 2/p)}
    if (!generations[p - 1].sum_upper) return false;
    for (int k = 1; k < p; ++k)
      if (!delta_lower_guaranteed(k)) return false;
    return true;
  }
};

inline ScheduleChecks validate_schedule_checks(const Schedule& s) {
  ScheduleChecks c;
  c.j1_above_100 = s.J(1) > 100;
  for (int p = 1; p < s.P(); ++p) {
    ScheduleChecks::Transition t;
    Rat gate = Rat(100) * s.theta * s.J(p);
    if (gate < Rat(static_cast<long>(p) * p)) gate = Rat(static_cast<long>(p) * p);
    t.growth_strict = Rat(s.J(p + 1)) > gate;
    t.strict_margin = Rat(s.J(p + 1)) - gate;
    t.growth_ratio =
        Rat(s.d * s.J(p + 1), p + 1) >= Rat(s.d) * s.theta * s.J(p) + 2;
    t.desk_margin = Rat(s.J(p + 1)) >= 4 * s.theta * s.J(p);
    c.transitions.push_back(std::move(t));
  }
  Rat running_sum = 0, weighted_sum = 0;
  for (int p = 1; p <= s.P(); ++p) {
    running_sum += s.J(p);
    weighted_sum += Rat(s.J(p)) * Rat(p - 1, p);
    ScheduleChecks::Generation g;
    g.sum_lower = Rat(s.J(p)) * Rat(p + 1, p) >= running_sum;
    g.sum_upper = weighted_sum >= Rat(s.J(p)) * Rat(static_cast<long>(p) - 2, p);
    c.generations.push_back(g);
  }
  return c;
}

// Human-facing strictness report; informational, never a rejection.
inline Report validate_schedule(const Schedule& s) {
  ScheduleChecks c = validate_schedule_checks(s);
  Report rep;
  rep.title = "schedule strictness (theta=" + rat_str(s.theta) + ", P=" + std::to_string(s.P()) + ")";
  rep.add("first-level-above-100",
          c.j1_above_100 ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
          "J_1 = " + std::to_string(s.J(1)));
  for (int p = 1; p < s.P(); ++p) {
    const auto& t = c.transitions[p - 1];
    std::string tag = std::to_string(p) + "->" + std::to_string(p + 1);
    rep.add("growth-strict[" + tag + "]",
            t.growth_strict ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
            "J_{p+1} - max(100 theta J_p, p^2) = " + rat_str(t.strict_margin));
    rep.add("growth-ratio[" + tag + "]",
            t.growth_ratio ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
            "d J_{p+1}/(p+1) >= d theta J_p + 2");
    rep.add("desk-margin[" + tag + "]",
            t.desk_margin ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
            "J_{p+1} >= 4 theta J_p");
  }
  for (int p = 1; p <= s.P(); ++p) {
    const auto& g = c.generations[p - 1];
    rep.add("level-sum-lower[p=" + std::to_string(p) + "]",
            g.sum_lower ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
            "J_p (1 + 1/p) >= sum of levels");
    rep.add("level-sum-upper[p=" + std::to_string(p) + "]",
            g.sum_upper ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
            "weighted level sum >= J_p (1 - 2/p)");
    rep.add("mass-bounds-guaranteed[p=" + std::to_string(p) + "]",
            (c.mass_lower_guaranteed(p) && c.mass_upper_guaranteed(p))
                ? CheckStatus::Pass
                : CheckStatus::NotGuaranteed,
            "node mass bounds follow from the growth conditions above");
  }
  return rep;
}

// --- nodes and branching -----------------------------------------------------

struct Node {
  int p = 0;                            // generation; 0 is the root
  std::vector<std::vector<Int>> ks;     // ks[t]: per-axis indices of generation t+1
};

inline SupBall node_ball(const Schedule& s, const Node& nd) {
  if (nd.p == 0) return s.root_ball();
  const auto& k = nd.ks[nd.p - 1];
  std::vector<Rat> c(s.d);
  for (int i = 0; i < s.d; ++i) c[i] = Rat(2 * k[i] + 1) * pow2(-(s.J(nd.p) + 1));
  return SupBall(Point(std::move(c)), s.node_radius(nd.p), true);
}

// Per-axis index ranges of the children of `parent` (next generation).
inline std::vector<KRange> child_ranges(const Schedule& s, const Node& parent) {
  if (parent.p >= s.P()) throw Error("no generation beyond the schedule");
  SupBall ball = node_ball(s, parent);
  long Jn = s.J(parent.p + 1);
  Rat r = s.node_radius(parent.p + 1);
  std::vector<KRange> out;
  out.reserve(s.d);
  for (int i = 0; i < s.d; ++i)
    out.push_back(axis_center_range(ball.lo(i), ball.hi(i), Jn, r, false, false));
  return out;
}

// Validating constructor for a node from its per-generation indices.
inline Node make_node(const Schedule& s, std::vector<std::vector<Int>> ks) {
  Node nd;
  for (auto& k : ks) {
    if (static_cast<int>(k.size()) != s.d) throw Error("node address dimension mismatch");
    std::vector<KRange> rng = child_ranges(s, nd);
    for (int i = 0; i < s.d; ++i)
      if (k[i] < rng[i].lo || k[i] > rng[i].hi)
        throw Error("node address leaves its parent ball at generation " +
                    std::to_string(nd.p + 1));
    nd.ks.push_back(std::move(k));
    ++nd.p;
  }
  return nd;
}

// Uniform branching count of the next generation under `parent`.
// Degenerate schedules (no child fits) throw.
inline Int branching_count(const Schedule& s, const Node& parent) {
  Int total = 1;
  for (const KRange& r : child_ranges(s, parent)) {
    if (r.empty()) throw Error("degenerate schedule: a generation-" +
                               std::to_string(parent.p + 1) + " ball holds no children");
    total *= r.count();
  }
  return total;
}

// First (lexicographically smallest) chain down to generation p.
inline Node first_node(const Schedule& s, int p) {
  Node nd;
  for (int t = 1; t <= p; ++t) {
    std::vector<KRange> rng = child_ranges(s, nd);
    std::vector<Int> k(s.d);
    for (int i = 0; i < s.d; ++i) {
      if (rng[i].empty()) throw Error("degenerate schedule: empty generation");
      k[i] = rng[i].lo;
    }
    nd.ks.push_back(std::move(k));
    ++nd.p;
  }
  return nd;
}

inline Int branching_count_level(const Schedule& s, int p) {
  if (p < 1 || p > s.P()) throw Error("generation index out of range");
  return branching_count(s, first_node(s, p - 1));
}

inline Int generation_count(const Schedule& s, int p) {
  Int total = 1;
  for (int t = 1; t <= p; ++t) total *= branching_count_level(s, t);
  return total;
}

// Node mass in factored form: m = (prod deltas)^{-1}.
struct FactoredMass {
  std::vector<Int> deltas;
  Int denominator() const {
    Int prod = 1;
    for (const Int& d : deltas) prod *= d;
    return prod;
  }
  Rat value() const {
    Rat r(1, denominator());
    r.canonicalize();
    return r;
  }
  double log2() const {
    double s = 0;
    for (const Int& d : deltas) s -= log2_int(d);
    return s;
  }
};

inline FactoredMass node_mass(const Schedule& s, const Node& nd) {
  FactoredMass fm;
  Node prefix;
  for (int t = 0; t < nd.p; ++t) {
    fm.deltas.push_back(branching_count(s, prefix));
    prefix.ks.push_back(nd.ks[t]);
    ++prefix.p;
  }
  return fm;
}

// Deterministic addressing: the rank-th generation-p node in lexicographic
// chain order. rank must lie in [0, generation_count(p)).
inline Node node_by_rank(const Schedule& s, int p, Int rank) {
  if (rank < 0) throw Error("negative node rank");
  std::vector<Int> below(p + 1);  // descendants per node of generation t
  below[p] = 1;
  for (int t = p; t >= 1; --t) below[t - 1] = below[t] * branching_count_level(s, t);
  if (rank >= below[0]) throw Error("node rank beyond the generation size");
  Node nd;
  for (int t = 1; t <= p; ++t) {
    Int idx = rank / below[t];
    rank %= below[t];
    std::vector<KRange> rng = child_ranges(s, nd);
    std::vector<Int> k(s.d);
    for (int i = s.d - 1; i >= 0; --i) {
      Int c = rng[i].count();
      k[i] = rng[i].lo + idx % c;
      idx /= c;
    }
    nd.ks.push_back(std::move(k));
    ++nd.p;
  }
  return nd;
}

inline Int random_int_below(std::mt19937_64& rng, const Int& bound) {
  if (bound <= 0) throw Error("random_int_below needs a positive bound");
  std::size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  Int r = 0;
  for (std::size_t got = 0; got < bits + 64; got += 64)
    r = (r << 64) + Int(static_cast<unsigned long>(rng()));
  return r % bound;
}

// --- verification ------------------------------------------------------------

// compare n vs 2^e exactly (e any sign)
inline int cmp_int_pow2(const Int& n, long e) {
  if (e >= 0) return cmp(n, pow2z(static_cast<unsigned long>(e)));
  // n vs 2^-e: n * 2^e vs 1
  Int lhs = n;  // n >= 1 here always, so n > 2^e for e < 0 unless n == 0
  return sgn(lhs) <= 0 ? -1 : 1;
}

// prod^b vs 2^a where the exponent is the rational a/b (b > 0)
inline int cmp_prod_pow2(const Int& prod, const Rat& e) {
  Int a = e.get_num(), b = e.get_den();
  if (!b.fits_ulong_p()) throw Error("exponent denominator too large");
  Int lhs;
  mpz_pow_ui(lhs.get_mpz_t(), prod.get_mpz_t(), b.get_ui());
  if (a < 0) return sgn(lhs) > 0 ? 1 : -1;  // prod >= 1 > 2^{negative}
  if (!a.fits_ulong_p()) throw Error("exponent too large");
  return cmp(lhs, pow2z(a.get_ui()));
}

// Branching-count bounds per transition and node-mass bounds at generation p
// for the sampled nodes. "Guaranteed" facts FAIL when violated; outside the
// guaranteed regime the observation is reported instead.
inline Report verify_mass_bounds(const Schedule& s, int p, const std::vector<Node>& samples) {
  if (p < 1 || p > s.P()) throw Error("generation index out of range");
  ScheduleChecks checks = validate_schedule_checks(s);
  Report rep;
  rep.title = "branching and node-mass bounds at generation " + std::to_string(p);

  // Delta_1 covers the full grid
  Int d1 = branching_count_level(s, 1);
  bool d1ok = cmp_int_pow2(d1, static_cast<long>(s.d) * s.J(1)) == 0;
  rep.add("first-branching-full-grid", d1ok ? CheckStatus::Pass : CheckStatus::Fail,
          "Delta_1 = 2^{d J_1}");

  for (int t = 1; t < p; ++t) {
    Int delta = branching_count_level(s, t + 1);
    std::string tag = "[" + std::to_string(t) + "->" + std::to_string(t + 1) + "]";
    // window bound: (1/2) |I|^d 2^{d J_{t+1}} <= Delta <= 2 |I|^d 2^{d J_{t+1}},
    // |I| = 2^{-theta J_t} the parent diameter
    long e = static_cast<long>(s.d) * s.J(t + 1) - static_cast<long>(s.d) * s.thetaJ(t);
    bool lower = cmp_int_pow2(delta, e - 1) >= 0;
    bool upper = cmp_int_pow2(delta, e + 1) <= 0;
    bool gated = checks.transitions[t - 1].desk_margin;
    rep.add("branching-window" + tag,
            (lower && upper) ? CheckStatus::Pass
                             : (gated ? CheckStatus::Fail : CheckStatus::NotGuaranteed),
            "Delta within [2^" + std::to_string(e - 1) + ", 2^" + std::to_string(e + 1) + "]" +
                (gated ? "" : " (desk margin not met; observation only)"));
    // ratio bound: Delta^{t+1} >= 2^{d J_{t+1} t}
    bool ratio = cmp_prod_pow2(delta, Rat(static_cast<long>(s.d) * s.J(t + 1) * t, t + 1)) >= 0;
    bool rgated = checks.delta_lower_guaranteed(t);
    rep.add("branching-ratio" + tag,
            ratio ? CheckStatus::Pass : (rgated ? CheckStatus::Fail : CheckStatus::NotGuaranteed),
            "Delta >= 2^{d J (1 - 1/(p+1))}" + std::string(rgated ? "" : " (observation only)"));
    bool trivial_up = cmp_int_pow2(delta, static_cast<long>(s.d) * s.J(t + 1)) <= 0;
    rep.add("branching-grid-cap" + tag, trivial_up ? CheckStatus::Pass : CheckStatus::Fail,
            "Delta <= 2^{d J}");
  }

  bool low_g = checks.mass_lower_guaranteed(p);
  bool up_g = checks.mass_upper_guaranteed(p);
  long dJp = static_cast<long>(s.d) * s.J(p);
  std::size_t idx = 0;
  for (const Node& nd : samples) {
    if (nd.p != p) throw Error("sample node generation mismatch");
    FactoredMass fm = node_mass(s, nd);
    Int denom = fm.denominator();
    // m >= 2^{-d J_p (1+1/p)}  <=>  denom <= 2^{d J_p (p+1)/p}
    bool lower = cmp_prod_pow2(denom, Rat(dJp * (p + 1), p)) <= 0;
    // m <= 2^{-d J_p (1-2/p)}  <=>  denom >= 2^{d J_p (p-2)/p}
    bool upper = cmp_prod_pow2(denom, Rat(dJp * (static_cast<long>(p) - 2), p)) >= 0;
    double ratio = -fm.log2() / static_cast<double>(s.thetaJ(p));
    std::string tag = "[node " + std::to_string(idx++) + "]";
    rep.add("mass-lower" + tag,
            lower ? CheckStatus::Pass : (low_g ? CheckStatus::Fail : CheckStatus::NotGuaranteed),
            "log2 m / log2 |I| = " + fmt_g(ratio) + " <= d/theta (1 + 1/p)" +
                (low_g ? "" : " (observation only)"));
    rep.add("mass-upper" + tag,
            upper ? CheckStatus::Pass : (up_g ? CheckStatus::Fail : CheckStatus::NotGuaranteed),
            "log2 m / log2 |I| = " + fmt_g(ratio) + " >= d/theta (1 - 2/p)" +
                (up_g ? "" : " (observation only)"));
  }
  return rep;
}

// Total-mass identity at generation p: the node count times the factored node
// mass collapses to exactly 1.
inline Report verify_total_mass(const Schedule& s, int p) {
  Report rep;
  rep.title = "generation mass identity";
  Int count = generation_count(s, p);
  FactoredMass fm = node_mass(s, first_node(s, p));
  Rat total = Rat(count) * fm.value();
  rep.add("counting-identity", total == 1 ? CheckStatus::Pass : CheckStatus::Fail,
          "sum of generation-" + std::to_string(p) + " node masses = " + rat_str(total) +
              " (count log2 = " + fmt_g(log2_int(count)) + ")");
  return rep;
}

// --- approximation set and the blended-measure ball bound --------------------

struct ApproxSet {
  int d;
  Rat theta;
  long J;

  ApproxSet(int dim, Rat th, long level) : d(dim), theta(std::move(th)), J(level) {
    if (d < 1 || J < 1) throw Error("approx set needs d >= 1 and J >= 1");
    if (theta <= 1) throw Error("approx set needs theta > 1");
    Rat tj = theta * J;
    if (tj.get_den() != 1) throw Error("theta * J must be an integer");
  }
  long thetaJ() const {
    Rat tj = theta * J;
    return tj.get_num().get_si();
  }
  Rat radius() const { return pow2(-thetaJ()); }
};

// x lies within 2^{-theta J} of some grid center (k+e) 2^{-J}. The radius is
// at most half the center spacing, so the containing cube's center decides.
inline bool approx_member(const Point& x, const ApproxSet& a) {
  if (x.dim() != a.d) throw Error("dimension mismatch");
  CubeIndex c = containing_cube(x, a.J);
  Point center = cube_center(c);
  return sup_distance(x, center) <= a.radius();
}

// Mass of the doubled approximation ball around sampled points of the
// approximation set: mu_n(B(x, 2 * 2^{-theta J})) >= 2^{-J/n - d J}, plus the
// epsilon form mu >= 2^{-d(1+2 eps) J} (needs eps > 1/(d n)).
inline Report ball_mass_lower_bound_check(const MuN& mu, const Rat& theta, const Rat& eps,
                                          const std::vector<Point>& pts) {
  long n = mu.n();
  int d = mu.dim();
  if (eps * d * n <= 1) throw Error("epsilon must exceed 1/(d n)");
  if (mu.J() % n != 0) throw Error("level J must be a multiple of n");
  ApproxSet a(d, theta, mu.J());
  Report rep;
  rep.title = "approximation-ball mass floor (J=" + std::to_string(mu.J()) +
              ", theta=" + rat_str(theta) + ", eps=" + rat_str(eps) + ")";
  Rat rad2 = 2 * a.radius();
  long floor_e = mu.J() / n + static_cast<long>(d) * mu.J();
  Rat floor_exact = pow2(-floor_e);
  Rat eps_exp = -Rat(d) * (1 + 2 * eps) * mu.J();  // mass >= 2^{this}
  std::size_t idx = 0;
  for (const Point& x : pts) {
    std::string tag = "[x " + std::to_string(idx++) + "]";
    if (!approx_member(x, a)) {
      rep.skip("ball-floor" + tag, "point lies outside the approximation set");
      continue;
    }
    Rat mass = mu.ball_mass(SupBall(x, rad2, true));
    bool exact_ok = mass >= floor_exact;
    rep.add("ball-floor" + tag, exact_ok ? CheckStatus::Pass : CheckStatus::Fail,
            "mu(B(x, 2*2^{-theta J})) log2 = " + fmt_g(log2_rat(mass)) +
                " >= -(J/n + d J) = " + fmt_g(-static_cast<double>(floor_e)));
    bool eps_ok = cmp_rat_pow(mass, Rat(2), eps_exp) >= 0;
    rep.add("ball-floor-eps" + tag, eps_ok ? CheckStatus::Pass : CheckStatus::Fail,
            "mass >= 2^{-d (1 + 2 eps) J}");
  }
  return rep;
}

// --- measure of probe boxes and the upper regularity bound -------------------

// Count generation-`target` nodes meeting the closed box B, descending from
// `start`. Intermediate fan-out is tiny for the intended |B| ranges; a cap
// guards against misuse.
inline Int count_nodes_meeting(const Schedule& s, const Node& start, int target, const Box& B,
                               long fanout_cap = 1 << 20) {
  if (start.p == target) {
    SupBall ball = node_ball(s, start);
    for (int i = 0; i < s.d; ++i)
      if (ball.hi(i) < B.lo[i] || ball.lo(i) > B.hi[i]) return 0;
    return 1;
  }
  int next = start.p + 1;
  long Jn = s.J(next);
  Rat r = s.node_radius(next);
  std::vector<KRange> inside = child_ranges(s, start);
  std::vector<KRange> meet(s.d);
  for (int i = 0; i < s.d; ++i) {
    KRange mr = axis_center_range(B.lo[i], B.hi[i], Jn, -r, false, false);
    meet[i] = KRange{std::max(inside[i].lo, mr.lo), std::min(inside[i].hi, mr.hi)};
    if (meet[i].empty()) return 0;
  }
  if (next == target) {
    Int total = 1;
    for (int i = 0; i < s.d; ++i) total *= meet[i].count();
    return total;
  }
  Int fan = 1;
  for (int i = 0; i < s.d; ++i) fan *= meet[i].count();
  if (fan > fanout_cap)
    throw Error("probe box too large for the generation grid (fan-out " + fan.get_str() + ")");
  // enumerate the qualifying children and recurse
  Int total = 0;
  std::vector<Int> k(s.d);
  for (int i = 0; i < s.d; ++i) k[i] = meet[i].lo;
  while (true) {
    Node child = start;
    child.ks.push_back(k);
    ++child.p;
    total += count_nodes_meeting(s, child, target, B, fanout_cap);
    int axis = s.d - 1;
    while (axis >= 0) {
      if (++k[axis] <= meet[axis].hi) break;
      k[axis] = meet[axis].lo;
      --axis;
    }
    if (axis < 0) break;
  }
  return total;
}

// m_p(B): total mass of generation-p nodes meeting B.
inline Rat box_mass(const Schedule& s, int p, const Box& B) {
  Int cnt = count_nodes_meeting(s, Node{}, p, B);
  return Rat(cnt) * node_mass(s, first_node(s, p)).value();
}

// Case analysis for the premeasure of a probe box B between scales
// 2^{-J_p} <= |B| < 2^{-J_{p-1}}: counts, the per-case combinatorial bounds
// (scale-free, FAIL on violation), and the regularity bound
// m(B) <= C |B|^{(d/theta)(1 - 2/(p-1))} with its validity gates.
inline Report verify_borel_bound(const Schedule& s, int P, const std::vector<Box>& boxes) {
  if (P < 1 || P > s.P()) throw Error("generation index out of range");
  ScheduleChecks checks = validate_schedule_checks(s);
  Report rep;
  rep.title = "box-measure regularity (P=" + std::to_string(P) + ")";
  std::size_t idx = 0;
  for (const Box& B : boxes) {
    std::string tag = "[box " + std::to_string(idx++) + "]";
    if (B.dim() != s.d) throw Error("box dimension mismatch");
    Rat diam = B.sup_diameter();
    if (sgn(diam) == 0) {
      rep.skip("scale" + tag, "degenerate box (zero diameter)");
      continue;
    }
    if (diam >= pow2(-s.J(1))) {
      rep.skip("scale" + tag, "box diameter at or above 2^{-J_1}");
      continue;
    }
    int p = 0;
    for (int t = 2; t <= P; ++t)
      if (diam >= pow2(-s.J(t)) && diam < pow2(-s.J(t - 1))) {
        p = t;
        break;
      }
    if (p == 0) {
      rep.skip("scale" + tag, "box diameter below 2^{-J_P}; deeper generations not constructed");
      continue;
    }

    Rat mass_parent = node_mass(s, first_node(s, p - 1)).value();
    Rat mass_p = node_mass(s, first_node(s, p)).value();
    Int n_parent = count_nodes_meeting(s, Node{}, p - 1, B);
    Int n_p = count_nodes_meeting(s, Node{}, p, B);
    Rat m_parent = Rat(n_parent) * mass_parent;
    Rat m_p = Rat(n_p) * mass_p;
    auto log2_or_ninf = [](const Rat& v) {
      return sgn(v) == 0 ? std::string("-inf") : fmt_g(log2_rat(v));
    };
    rep.add("refinement" + tag, m_p <= m_parent ? CheckStatus::Pass : CheckStatus::Fail,
            "m_p(B) log2 = " + log2_or_ninf(m_p) +
                " <= m_{p-1}(B) log2 = " + log2_or_ninf(m_parent));

    bool caseA = diam >= pow2(-s.thetaJ(p - 1));
    Rat exponent = Rat(s.d) / s.theta * Rat(static_cast<long>(p) - 3, p - 1);
    // (d/theta)(1 - 2/(p-1)) = (d/theta)((p-3)/(p-1))
    bool upper_gate = checks.mass_upper_guaranteed(p - 1);

    if (caseA) {
      bool few = n_parent <= pow2z(static_cast<unsigned long>(s.d));
      rep.add("parent-count" + tag, few ? CheckStatus::Pass : CheckStatus::Fail,
              "box meets " + n_parent.get_str() + " generation-" + std::to_string(p - 1) +
                  " balls (<= 2^d)");
      // m(B) <= 2^d max-node-mass <= 2^d |B|^{(d/theta)(1-2/(p-1))}
      Rat constant = Rat(pow2z(static_cast<unsigned long>(s.d)));
      bool bound = sgn(m_p) == 0 || cmp_rat_pow(m_p / constant, diam, exponent) <= 0;
      rep.add("regularity" + tag,
              bound ? CheckStatus::Pass
                    : (upper_gate ? CheckStatus::Fail : CheckStatus::NotGuaranteed),
              "m(B) <= 2^d |B|^{(d/theta)(1-2/(p-1))}" +
                  std::string(upper_gate ? "" : " (mass bounds not guaranteed; observation)"));
      bool clean = sgn(m_p) == 0 || cmp_rat_pow(m_p, diam, exponent) <= 0;
      rep.add("regularity-asymptotic" + tag,
              clean ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
              "constant-free form holds for large p only");
    } else {
      bool gap_cond = 2 * pow2(-s.thetaJ(p - 1)) <= pow2(-s.J(p - 1));
      bool one_parent = n_parent <= 1;
      rep.add("parent-count" + tag,
              one_parent ? CheckStatus::Pass
                         : (gap_cond ? CheckStatus::Fail : CheckStatus::NotGuaranteed),
              "box meets " + n_parent.get_str() + " generation-" + std::to_string(p - 1) +
                  " balls (<= 1 when the gap dominates)");
      // N_p <= 4^d |B|^d 2^{d J_p}
      Rat cap = rat_pow(Rat(4) * diam * Rat(pow2z(static_cast<unsigned long>(s.J(p)))),
                        static_cast<unsigned long>(s.d));
      bool count_ok = Rat(n_p) <= cap;
      rep.add("node-count" + tag, count_ok ? CheckStatus::Pass : CheckStatus::Fail,
              "box meets " + n_p.get_str() + " generation-" + std::to_string(p) +
                  " balls <= 4^d |B|^d 2^{d J_p}");
      // chain: m(B) <= 2 4^d |B|^d 2^{d theta J_{p-1}} m(I'), gated on the
      // branching window at the p-1 transition
      bool window_gate = checks.transitions[p - 2].desk_margin;
      Rat chain = 2 * rat_pow(Rat(4) * diam, static_cast<unsigned long>(s.d)) *
                  Rat(pow2z(static_cast<unsigned long>(s.d) *
                            static_cast<unsigned long>(s.thetaJ(p - 1)))) *
                  mass_parent;
      bool chain_ok = m_p <= chain;
      rep.add("chain-bound" + tag,
              chain_ok ? CheckStatus::Pass
                       : (window_gate ? CheckStatus::Fail : CheckStatus::NotGuaranteed),
              "m(B) <= 2 * 4^d |B|^d 2^{d theta J_{p-1}} m(parent)");
      Rat constant = 2 * rat_pow(Rat(4), static_cast<unsigned long>(s.d));
      bool bound = sgn(m_p) == 0 || cmp_rat_pow(m_p / constant, diam, exponent) <= 0;
      rep.add("regularity" + tag,
              bound ? CheckStatus::Pass
                    : ((upper_gate && window_gate) ? CheckStatus::Fail
                                                   : CheckStatus::NotGuaranteed),
              "m(B) <= 2 4^d |B|^{(d/theta)(1-2/(p-1))}" +
                  std::string((upper_gate && window_gate)
                                  ? ""
                                  : " (bounds not guaranteed; observation)"));
      bool clean = sgn(m_p) == 0 || cmp_rat_pow(m_p, diam, exponent) <= 0;
      rep.add("regularity-asymptotic" + tag,
              clean ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
              "constant-free form holds for large p only");
    }
  }
  return rep;
}

// Diagnostic: log2 of the covering terms 2^{d J_p - sExp theta J_p}; the tail
// decreases exactly when sExp theta > d.
inline std::vector<double> covering_sum_terms(const Schedule& s, const Rat& sExp, int P) {
  if (P < 1 || P > s.P()) throw Error("generation index out of range");
  std::vector<double> out;
  for (int p = 1; p <= P; ++p) {
    Rat e = Rat(s.d) * s.J(p) - sExp * s.thetaJ(p);
    out.push_back(rat_to_double(e));
  }
  return out;
}

inline Report covering_sum_report(const Schedule& s, const Rat& sExp, int P) {
  Report rep;
  rep.title = "covering sum diagnostic (s=" + rat_str(sExp) + ")";
  std::vector<double> terms = covering_sum_terms(s, sExp, P);
  std::string list;
  for (double t : terms) list += (list.empty() ? "" : ", ") + fmt_g(t);
  rep.pass("terms", "log2 terms: " + list);
  bool critical = sExp * s.theta > s.d;
  bool decreasing = true;
  for (int p = 1; p < P; ++p) {
    Rat e1 = Rat(s.d) * s.J(p) - sExp * s.thetaJ(p);
    Rat e2 = Rat(s.d) * s.J(p + 1) - sExp * s.thetaJ(p + 1);
    if (e2 >= e1) decreasing = false;
  }
  rep.add("tail", decreasing ? CheckStatus::Pass : CheckStatus::NotGuaranteed,
          critical ? "terms decrease (s theta > d)" : "s theta <= d: no decay expected");
  return rep;
}

}  // namespace mfa::cantor
