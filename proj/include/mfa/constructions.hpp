#pragma once

// Reference measure families:
//  - lebesgue_tree   : uniform mass tree on [0,1]^d
//  - pi_measure      : 2^{dj} equal atoms at the level-j cube centers
//  - nu_from_grid    : atoms at the level-j grid corners k 2^{-j}
//  - MuN             : blend 2^{-J/n} pi_J + (1 - 2^{-J/n}) nu, J = 2 n j^2,
//                      kept structured so its cube/ball masses stay closed
//                      form at any size (pi_J is astronomically atomic)
//  - cascade_tree    : d=1 binary multiplicative cascade (m0, m1)
//
// The floor verification: every charged level-J cube of mu_n carries at least
// blend * 2^{-dJ} = |I|^{d+1/n}; equality exactly on the cubes that carry no
// nu atom. Checks are pure integer arithmetic (n-th powers), no rounding.

#include <mfa/measure.hpp>
#include <mfa/report.hpp>

#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mfa {

inline constexpr std::size_t kAtomCap = std::size_t(1) << 22;

inline MassTree lebesgue_tree(int d, long J, MassMode mode = MassMode::exact) {
  MassTree t(d, J, mode);
  unsigned long bits = static_cast<unsigned long>(d) * static_cast<unsigned long>(J);
  if (mode == MassMode::exact) {
    if (J > 0 && bits > 22) throw Error("lebesgue: exact mode capped at 2^22 leaf cubes");
    MassTree::Level<Rat> leaves;
    std::size_t n = std::size_t(1) << bits;
    leaves.reserve(n);
    Rat m = pow2(-static_cast<long>(bits));
    for (std::size_t key = 0; key < n; ++key)
      leaves.emplace_back(static_cast<MassTree::PackedKey>(key), m);
    t.set_leaves_exact(std::move(leaves));
  } else {
    if (J > 0 && bits > 24) throw Error("lebesgue: log2 mode capped at 2^24 leaf cubes");
    MassTree::Level<double> leaves;
    std::size_t n = std::size_t(1) << bits;
    leaves.reserve(n);
    double m = -static_cast<double>(bits);
    for (std::size_t key = 0; key < n; ++key)
      leaves.emplace_back(static_cast<MassTree::PackedKey>(key), m);
    t.set_leaves_log2(std::move(leaves));
  }
  return t;
}

// Equal atoms at every level-j cube center (k+1/2) 2^-j.
inline AtomicMeasure pi_measure(int d, long j) {
  if (d < 1 || j < 0) throw Error("pi_measure: bad parameters");
  unsigned long bits = static_cast<unsigned long>(d) * static_cast<unsigned long>(j);
  if (bits > 22) throw Error("pi_measure: 2^{dj} atoms exceed the materialization cap");
  std::size_t n = std::size_t(1) << bits;
  Rat w = pow2(-static_cast<long>(bits));
  std::vector<Atom> atoms;
  atoms.reserve(n);
  std::vector<Int> k(d, 0);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<Rat> x(d);
    for (int i = 0; i < d; ++i) x[i] = Rat(2 * k[i] + 1) * pow2(-(j + 1));
    atoms.push_back({Point(std::move(x)), w});
    for (int i = d - 1; i >= 0; --i) {  // odometer
      if (++k[i] < pow2z(static_cast<unsigned long>(j))) break;
      k[i] = 0;
    }
  }
  return AtomicMeasure(d, std::move(atoms));
}

// Strictly positive weights on the level-j corner grid, summing to 1.
// Flattened lexicographically by (k_1, ..., k_d).
struct GridWeights {
  int d;
  long j;
  std::vector<Rat> w;

  GridWeights(int dim, long level, std::vector<Rat> weights)
      : d(dim), j(level), w(std::move(weights)) {
    if (d < 1 || j < 1) throw Error("grid weights need d >= 1 and j >= 1");
    unsigned long bits = static_cast<unsigned long>(d) * static_cast<unsigned long>(j);
    if (bits > 22) throw Error("grid weights exceed the materialization cap");
    if (w.size() != (std::size_t(1) << bits)) throw Error("grid weights must cover all 2^{dj} corners");
    Rat total = 0;
    for (const Rat& r : w) {
      if (sgn(r) <= 0) throw Error("grid weights must be strictly positive");
      total += r;
    }
    if (total != 1) throw Error("grid weights sum to " + rat_str(total) + ", expected 1");
  }

  std::size_t flat_index(const std::vector<Int>& k) const {
    std::size_t idx = 0;
    for (const Int& ki : k) {
      if (ki < 0 || ki >= pow2z(static_cast<unsigned long>(j))) throw Error("grid index out of range");
      idx = (idx << j) | mpz_get_ui(ki.get_mpz_t());
    }
    return idx;
  }
  std::vector<Int> unflatten(std::size_t idx) const {
    std::vector<Int> k(d);
    std::size_t mask = (std::size_t(1) << j) - 1;
    for (int i = d - 1; i >= 0; --i) {
      k[i] = static_cast<unsigned long>(idx & mask);
      idx >>= j;
    }
    return k;
  }
  Point corner(std::size_t idx) const {
    std::vector<Int> k = unflatten(idx);
    std::vector<Rat> x(d);
    for (int i = 0; i < d; ++i) x[i] = Rat(k[i]) * pow2(-j);
    return Point(std::move(x));
  }
};

inline AtomicMeasure nu_from_grid(const GridWeights& g) {
  std::vector<Atom> atoms;
  atoms.reserve(g.w.size());
  for (std::size_t t = 0; t < g.w.size(); ++t) atoms.push_back({g.corner(t), g.w[t]});
  return AtomicMeasure(g.d, std::move(atoms));
}

inline long J_of(long n, long j_n) {
  if (n < 1 || j_n < 1) throw Error("J_of needs n >= 1 and j >= 1");
  // keep J = 2 n j^2 small enough that 2^{-J}-scale rationals stay practical
  if (j_n > 4096 || n > (1L << 22) || 2 * n * j_n * j_n > (1L << 24))
    throw Error("J_of parameters out of range");
  return 2 * n * j_n * j_n;
}

// Blended measure: blend * pi_J + (1 - blend) * nu, blend = 2^{-J/n} with
// J = 2 n j^2 (so J/n = 2 j^2 is an integer and the blend is dyadic).
// Stays symbolic: pi_J has 2^{dJ} atoms, far beyond anything materializable
// for larger parameters, but cube and ball masses reduce to lattice counts.
class MuN {
 public:
  MuN(GridWeights grid, long n)
      : grid_(std::move(grid)),
        nu_(nu_from_grid(grid_)),
        n_(n),
        J_(J_of(n, grid_.j)),
        blend_(pow2(-2 * grid_.j * grid_.j)) {
    // the floor check raises masses to the n-th power; cap the exponent size
    if (J_ * (static_cast<long>(dim()) * n_ + 1) > (1L << 26))
      throw Error("blend parameters too large for exact verification");
  }

  int dim() const { return grid_.d; }
  long n() const { return n_; }
  long J() const { return J_; }
  const Rat& blend() const { return blend_; }
  const GridWeights& grid() const { return grid_; }
  const AtomicMeasure& nu() const { return nu_; }

  // Exact mass of a level-l dyadic cube, any l <= J.
  Rat cube_mass(const CubeIndex& c) const {
    if (c.dim() != dim()) throw Error("dimension mismatch");
    if (c.level > J_) throw Error("cube below the construction level");
    // pi part: centers at level J inside the half-open cube, one per axis run
    Int centers = 1;
    for (int i = 0; i < dim(); ++i) {
      KRange r = axis_center_range(c.lo(i), c.hi(i), J_, Rat(0), false, true);
      if (r.empty()) return nu_part_cube(c) * (Rat(1) - blend_);
      centers *= r.count();
    }
    Rat pi_part = Rat(centers) * pow2(-static_cast<long>(dim()) * J_);
    return blend_ * pi_part + (Rat(1) - blend_) * nu_part_cube(c);
  }

  Rat ball_mass(const SupBall& b) const {
    if (b.dim() != dim()) throw Error("dimension mismatch");
    Int centers = 1;
    for (int i = 0; i < dim(); ++i) {
      KRange r = axis_center_range(b.lo(i), b.hi(i), J_, Rat(0), !b.closed, !b.closed);
      if (r.empty()) {
        centers = 0;
        break;
      }
      centers *= r.count();
    }
    Rat pi_part = Rat(centers) * pow2(-static_cast<long>(dim()) * J_);
    return blend_ * pi_part + (Rat(1) - blend_) * nu_.ball_mass(b);
  }

  AtomicMeasure to_atomic(std::size_t cap = kAtomCap) const {
    unsigned long bits = static_cast<unsigned long>(dim()) * static_cast<unsigned long>(J_);
    if (bits >= 63 || (std::size_t(1) << bits) > cap)
      throw Error("mu_n with 2^{dJ} = 2^" + std::to_string(bits) +
                  " pi atoms exceeds the materialization cap; use the structured queries");
    return AtomicMeasure::mix(blend_, pi_measure(dim(), J_), nu_);
  }

  // Every charged level-J cube I carries mass >= |I|^{d + 1/n}, with equality
  // exactly on the cubes free of nu atoms. Verified in integers: the floor
  // blend * 2^{-dJ} = 2^{-J/n - dJ} and |I|^{d+1/n} = 2^{-J(d + 1/n)} agree
  // after raising to the n-th power, and nu-carrying cubes add positive mass.
  Report check_floor() const {
    Report rep;
    rep.title = "floor inequality for the blended measure (d=" + std::to_string(dim()) +
                ", n=" + std::to_string(n_) + ", J=" + std::to_string(J_) + ")";
    // (blend * 2^{-dJ})^n == 2^{-J(dn+1)} as integers
    Rat floor_mass = blend_ * pow2(-static_cast<long>(dim()) * J_);
    bool eq = rat_pow(floor_mass, static_cast<unsigned long>(n_)) ==
              pow2(-J_ * (static_cast<long>(dim()) * n_ + 1));
    rep.add("uniform-floor-identity", eq ? CheckStatus::Pass : CheckStatus::Fail,
            "blend*2^{-dJ} = " + rat_str(floor_mass) + (eq ? " equals" : " differs from") +
                " |I|^{d+1/n} (n-th power comparison)");
    // each nu-carrying cube strictly exceeds the floor
    std::size_t bad = 0;
    Rat min_extra;
    bool first = true;
    for (std::size_t t = 0; t < grid_.w.size(); ++t) {
      CubeIndex c = containing_cube(grid_.corner(t), J_);
      Rat extra = (Rat(1) - blend_) * nu_part_cube(c);
      if (sgn(extra) <= 0) ++bad;
      if (first || extra < min_extra) {
        min_extra = extra;
        first = false;
      }
    }
    if (bad == 0)
      rep.pass("nu-carrying-cubes",
               std::to_string(grid_.w.size()) + " grid cubes exceed the floor; smallest excess " +
                   rat_str(min_extra));
    else
      rep.fail("nu-carrying-cubes", std::to_string(bad) + " grid cubes do not exceed the floor");
    rep.pass("coverage", "remaining level-J cubes carry exactly the uniform floor (no nu atom)");
    return rep;
  }

 private:
  Rat nu_part_cube(const CubeIndex& c) const {
    Rat total = 0;
    for (std::size_t t = 0; t < grid_.w.size(); ++t) {
      if (containing_cube(grid_.corner(t), c.level) == c) total += grid_.w[t];
    }
    return total;
  }

  GridWeights grid_;
  AtomicMeasure nu_;
  long n_;
  long J_;
  Rat blend_;
};

inline MuN mu_n(GridWeights grid, long n) { return MuN(std::move(grid), n); }

// Exact cube masses of the blended measure down to `depth` <= J without
// touching the 2^{dJ} atoms: the center lattice is uniform at coarser levels,
// so every level-depth cube holds pi mass 2^{-d depth}, and the nu atoms are
// binned in one pass.
inline MassTree mun_tree(const MuN& mu, long depth, MassMode mode = MassMode::exact) {
  int d = mu.dim();
  if (depth < 0 || depth > mu.J()) throw Error("mun_tree depth must lie in [0, J]");
  unsigned long bits = static_cast<unsigned long>(d) * static_cast<unsigned long>(depth);
  if (bits > 22) throw Error("mun_tree: 2^{d depth} cubes exceed the materialization cap");
  std::size_t n = std::size_t(1) << bits;
  std::vector<Rat> mass(n, mu.blend() * pow2(-static_cast<long>(bits)));
  const GridWeights& g = mu.grid();
  Rat nu_scale = Rat(1) - mu.blend();
  for (std::size_t t = 0; t < g.w.size(); ++t) {
    CubeIndex c = containing_cube(g.corner(t), depth);
    auto idx = static_cast<std::size_t>(detail::pack_key(c.k, depth));
    mass[idx] += nu_scale * g.w[t];
  }
  MassTree::Level<Rat> leaves;
  leaves.reserve(n);
  for (std::size_t key = 0; key < n; ++key)
    leaves.emplace_back(static_cast<MassTree::PackedKey>(key), std::move(mass[key]));
  MassTree tree(d, depth, MassMode::exact);
  tree.set_leaves_exact(std::move(leaves));
  return mode == MassMode::exact ? tree : tree.to_log2();
}

// General-path floor verification on any atomic measure claimed to be a mu_n:
// builds the level-J tree and checks mu(I)^n >= 2^{-J(dn+1)} cube by cube in
// integer arithmetic; uncharged cubes are violations.
inline Report check_floor_inequality(const AtomicMeasure& m, long n, long J) {
  if (n < 1) throw Error("check_floor_inequality needs n >= 1");
  if (J < 0) throw Error("check_floor_inequality needs J >= 0");
  Report rep;
  rep.title = "floor inequality (enumerated)";
  MassTree t = MassTree::from_atoms(m, J);
  long d = m.dim();
  Int rhs_den = pow2z(static_cast<unsigned long>(J * (d * n + 1)));
  std::size_t charged = t.level_exact(J).size();
  Int expected = pow2z(static_cast<unsigned long>(d * J));
  if (Int(static_cast<unsigned long>(charged)) != expected) {
    // find the first uncharged key
    MassTree::PackedKey want = 0;
    for (const auto& [key, mass] : t.level_exact(J)) {
      if (key != want) break;
      ++want;
    }
    std::vector<Int> k = detail::unpack_key(want, static_cast<int>(d), J);
    std::string ks;
    for (const Int& ki : k) ks += (ks.empty() ? "" : ",") + ki.get_str();
    rep.fail("charged-cover", "level-" + std::to_string(J) + " cube k=(" + ks +
                                  ") carries zero mass, below the positive floor");
    return rep;
  }
  std::size_t violations = 0;
  std::string first_bad;
  for (const auto& [key, mass] : t.level_exact(J)) {
    // mass = p/q; mass^n >= 2^{-J(dn+1)}  <=>  p^n * 2^{J(dn+1)} >= q^n
    Int pn, qn;
    mpz_pow_ui(pn.get_mpz_t(), mass.get_num_mpz_t(), static_cast<unsigned long>(n));
    mpz_pow_ui(qn.get_mpz_t(), mass.get_den_mpz_t(), static_cast<unsigned long>(n));
    if (pn * rhs_den < qn) {
      ++violations;
      if (first_bad.empty()) {
        std::vector<Int> k = detail::unpack_key(key, static_cast<int>(d), J);
        for (const Int& ki : k) first_bad += (first_bad.empty() ? "" : ",") + ki.get_str();
      }
    }
  }
  if (violations == 0)
    rep.pass("floor", "all " + std::to_string(charged) + " level-" + std::to_string(J) +
                          " cubes meet mu(I) >= |I|^{d+1/n} (exact n-th power comparison)");
  else
    rep.fail("floor", std::to_string(violations) + " cubes fall below the floor, first k=(" +
                          first_bad + ")");
  return rep;
}

struct CascadeSpec {
  Rat m0, m1;
  long J;
};

// d=1 multiplicative cascade: mass of the level-j cube with binary address b
// is prod m_{b_i}.
inline MassTree cascade_tree(const CascadeSpec& s) {
  if (sgn(s.m0) <= 0 || sgn(s.m1) <= 0 || s.m0 + s.m1 != 1)
    throw Error("cascade needs m0, m1 > 0 with m0 + m1 = 1");
  if (s.J < 0 || s.J > 22) throw Error("cascade depth capped at 22");
  std::vector<Rat> row{Rat(1)};
  for (long j = 1; j <= s.J; ++j) {
    std::vector<Rat> next(row.size() * 2);
    for (std::size_t t = 0; t < row.size(); ++t) {
      next[2 * t] = row[t] * s.m0;
      next[2 * t + 1] = row[t] * s.m1;
    }
    row = std::move(next);
  }
  MassTree::Level<Rat> leaves;
  leaves.reserve(row.size());
  for (std::size_t t = 0; t < row.size(); ++t)
    leaves.emplace_back(static_cast<MassTree::PackedKey>(t), row[t]);
  MassTree t(1, s.J, MassMode::exact);
  t.set_leaves_exact(std::move(leaves));
  return t;
}

// Closed-form scaling curve of the cascade, for oracles and cross-checks.
inline double cascade_tau(const CascadeSpec& s, double q) {
  double a = std::pow(rat_to_double(s.m0), q), b = std::pow(rat_to_double(s.m1), q);
  return -std::log2(a + b);
}

// log2 of the genericity ball radius 2^{-(d+4) J^2} around mu_n.
inline long generic_ball_radius_log2(long n, long J, int d) {
  if (n < 1 || J < 1 || d < 1) throw Error("generic_ball_radius needs positive parameters");
  (void)n;  // the radius depends on J and d only; n fixes J upstream
  if (J > 30000) throw Error("generic_ball_radius: J out of range");
  return -(static_cast<long>(d) + 4) * J * J;
}

// --- generator specs ---------------------------------------------------------
// "lebesgue d=1 J=8 [mode=log2]", "pi j=2 d=1", "grid j=1 d=1 weights=1/3,2/3",
// "mun n=1 grid=(j=1 d=1 weights=1/3,2/3)", "cascade m0=1/4 J=10"

using Generated = std::variant<AtomicMeasure, MassTree, MuN>;

namespace detail_gen {

inline std::vector<std::pair<std::string, std::string>> kv_pairs(const std::string& s) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    if (i >= s.size()) break;
    std::size_t eq = s.find('=', i);
    if (eq == std::string::npos) throw Error("generator spec: expected key=value at '" + s.substr(i) + "'");
    std::string key = s.substr(i, eq - i);
    std::size_t vstart = eq + 1, vend;
    if (vstart < s.size() && s[vstart] == '(') {
      int depth = 0;
      vend = vstart;
      do {
        if (vend >= s.size()) throw Error("generator spec: unbalanced parentheses");
        if (s[vend] == '(') ++depth;
        if (s[vend] == ')') --depth;
        ++vend;
      } while (depth > 0);
      out.emplace_back(key, s.substr(vstart + 1, vend - vstart - 2));
      i = vend;
    } else {
      vend = s.find(' ', vstart);
      if (vend == std::string::npos) vend = s.size();
      out.emplace_back(key, s.substr(vstart, vend - vstart));
      i = vend;
    }
  }
  return out;
}

inline std::string need(const std::vector<std::pair<std::string, std::string>>& kv,
                        const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  throw Error("generator spec: missing " + key + "=");
}
inline std::string get_or(const std::vector<std::pair<std::string, std::string>>& kv,
                          const std::string& key, const std::string& dflt) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  return dflt;
}

inline long to_long(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(std::string("generator spec: bad ") + what + " '" + s + "'");
  }
}

inline std::vector<Rat> rat_list(const std::string& s) {
  std::vector<Rat> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    std::size_t c = s.find(',', i);
    if (c == std::string::npos) c = s.size();
    out.push_back(parse_rat(s.substr(i, c - i)));
    i = c + 1;
    if (c == s.size()) break;
  }
  return out;
}

}  // namespace detail_gen

inline GridWeights parse_grid_spec(const std::string& spec) {
  using namespace detail_gen;
  auto kv = kv_pairs(spec);
  return GridWeights(static_cast<int>(to_long(need(kv, "d"), "dimension")),
                     to_long(need(kv, "j"), "level"), rat_list(need(kv, "weights")));
}

inline Generated parse_generator_spec(const std::string& spec) {
  using namespace detail_gen;
  std::size_t sp = spec.find(' ');
  std::string head = spec.substr(0, sp);
  std::string rest = sp == std::string::npos ? "" : spec.substr(sp + 1);
  auto kv = kv_pairs(rest);
  if (head == "lebesgue") {
    MassMode mode = get_or(kv, "mode", "exact") == "log2" ? MassMode::log2 : MassMode::exact;
    return lebesgue_tree(static_cast<int>(to_long(need(kv, "d"), "dimension")),
                         to_long(need(kv, "J"), "depth"), mode);
  }
  if (head == "pi")
    return pi_measure(static_cast<int>(to_long(need(kv, "d"), "dimension")),
                      to_long(need(kv, "j"), "level"));
  if (head == "grid") return nu_from_grid(parse_grid_spec(rest));
  if (head == "mun")
    return MuN(parse_grid_spec(need(kv, "grid")), to_long(need(kv, "n"), "n"));
  if (head == "cascade") {
    Rat m0 = parse_rat(need(kv, "m0"));
    return cascade_tree({m0, Rat(1) - m0, to_long(need(kv, "J"), "depth")});
  }
  throw Error("unknown generator '" + head + "'");
}

}  // namespace mfa
