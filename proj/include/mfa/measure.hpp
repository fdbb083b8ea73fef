#pragma once

// Probability measures on [0,1]^d in two concrete forms:
//  - AtomicMeasure: finitely many weighted atoms, exact weights, total 1.
//  - MassTree: per-level dyadic cube masses down to a fixed depth, either
//    exact rationals or float log2 values. Zero-mass cubes are never stored,
//    so "charged cube" == "stored entry".

#include <mfa/dyadic.hpp>
#include <mfa/rational.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace mfa {

struct Atom {
  Point location;
  Rat weight;
};

class AtomicMeasure {
 public:
  AtomicMeasure(int dim, std::vector<Atom> atoms) : d_(dim) {
    if (dim < 1) throw Error("measure dimension must be >= 1");
    if (atoms.empty()) throw Error("atomic measure needs at least one atom");
    for (const Atom& a : atoms) {
      if (a.location.dim() != dim) throw Error("atom dimension mismatch");
      if (sgn(a.weight) <= 0) throw Error("atom weight must be positive");
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) {
      return cmp_points(a.location, b.location) < 0;
    });
    // merge duplicate locations
    for (Atom& a : atoms) {
      if (!atoms_.empty() && cmp_points(atoms_.back().location, a.location) == 0)
        atoms_.back().weight += a.weight;
      else
        atoms_.push_back(std::move(a));
    }
    Rat total = 0;
    for (const Atom& a : atoms_) total += a.weight;
    if (total != 1) throw Error("atom weights sum to " + rat_str(total) + ", expected 1");
  }

  int dim() const { return d_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  Rat ball_mass(const SupBall& b) const {
    if (b.dim() != d_) throw Error("dimension mismatch");
    Rat total = 0;
    for (const Atom& a : atoms_) {
      bool in = true;
      for (int i = 0; i < d_ && in; ++i) {
        const Rat& c = a.location.x[i];
        if (b.closed)
          in = (c >= b.lo(i) && c <= b.hi(i));
        else
          in = (c > b.lo(i) && c < b.hi(i));
      }
      if (in) total += a.weight;
    }
    return total;
  }

  // w*a + (1-w)*b, exact; 0 < w < 1.
  static AtomicMeasure mix(const Rat& w, const AtomicMeasure& a, const AtomicMeasure& b) {
    if (sgn(w) <= 0 || w >= 1) throw Error("mix weight must lie in (0,1)");
    if (a.dim() != b.dim()) throw Error("dimension mismatch");
    std::vector<Atom> atoms;
    atoms.reserve(a.atoms_.size() + b.atoms_.size());
    for (const Atom& t : a.atoms_) atoms.push_back({t.location, w * t.weight});
    Rat wb = Rat(1) - w;
    for (const Atom& t : b.atoms_) atoms.push_back({t.location, wb * t.weight});
    return AtomicMeasure(a.dim(), std::move(atoms));
  }

 private:
  int d_;
  std::vector<Atom> atoms_;
};

enum class MassMode { exact, log2 };

namespace detail {

using PackedKey = unsigned __int128;

// Cube coordinates are packed into one 128-bit key by bit interleaving
// (Z-order): bit b of axis i lands at position b*d + (d-1-i). Passing to the
// parent cube drops the lowest bit of every axis — a plain right shift by d —
// which is monotone, so sorted child vectors aggregate into sorted parent
// vectors in one pass and children of one parent are always consecutive.
inline PackedKey pack_key(const std::vector<Int>& k, long level) {
  PackedKey key = 0;
  const int d = static_cast<int>(k.size());
  for (long b = level - 1; b >= 0; --b)
    for (int i = 0; i < d; ++i)
      key = (key << 1) |
            PackedKey(mpz_tstbit(k[i].get_mpz_t(), static_cast<mp_bitcnt_t>(b)));
  return key;
}

inline std::vector<Int> unpack_key(PackedKey key, int d, long level) {
  std::vector<Int> k(d, Int(0));
  for (long b = 0; b < level; ++b)
    for (int i = d - 1; i >= 0; --i) {
      if (key & 1) mpz_setbit(k[i].get_mpz_t(), static_cast<mp_bitcnt_t>(b));
      key >>= 1;
    }
  return k;
}

inline PackedKey parent_key(PackedKey key, int d, long level) {
  static_cast<void>(level);
  return key >> d;
}

}  // namespace detail

class MassTree {
 public:
  using PackedKey = detail::PackedKey;
  template <class V>
  using Level = std::vector<std::pair<PackedKey, V>>;

  static constexpr long kMaxDepth = 62;
  static constexpr long kMaxBits = 120;  // d * depth

  int dim() const { return d_; }
  long depth() const { return depth_; }
  MassMode mode() const { return mode_; }

  static MassTree from_atoms(const AtomicMeasure& m, long depth) {
    MassTree t(m.dim(), depth, MassMode::exact);
    Level<Rat> leaves;
    leaves.reserve(m.atoms().size());
    for (const Atom& a : m.atoms()) {
      CubeIndex c = containing_cube(a.location, depth);
      leaves.emplace_back(detail::pack_key(c.k, depth), a.weight);
    }
    t.set_leaves_exact(std::move(leaves));
    return t;
  }

  // Generic exact builder from leaf cube masses (must sum to 1).
  static MassTree from_leaf_masses(int d, long depth,
                                   std::vector<std::pair<std::vector<Int>, Rat>> leaf) {
    MassTree t(d, depth, MassMode::exact);
    Level<Rat> leaves;
    leaves.reserve(leaf.size());
    for (auto& [k, mass] : leaf) {
      if (static_cast<int>(k.size()) != d) throw Error("leaf dimension mismatch");
      CubeIndex c(depth, k);  // range-checks
      leaves.emplace_back(detail::pack_key(c.k, depth), std::move(mass));
    }
    t.set_leaves_exact(std::move(leaves));
    return t;
  }

  MassTree to_log2() const {
    if (mode_ == MassMode::log2) return *this;
    MassTree t(d_, depth_, MassMode::log2);
    t.log_.resize(exact_.size());
    for (std::size_t j = 0; j < exact_.size(); ++j) {
      t.log_[j].reserve(exact_[j].size());
      for (const auto& [key, mass] : exact_[j]) t.log_[j].emplace_back(key, log2_rat(mass));
    }
    return t;
  }

  // Same measure truncated to a shallower depth.
  MassTree aggregate_to(long new_depth) const {
    if (new_depth < 0 || new_depth > depth_) throw Error("aggregate_to: bad depth");
    MassTree t(d_, new_depth, mode_);
    if (mode_ == MassMode::exact)
      t.exact_.assign(exact_.begin(), exact_.begin() + new_depth + 1);
    else
      t.log_.assign(log_.begin(), log_.begin() + new_depth + 1);
    return t;
  }

  std::size_t charged_count(long j) const {
    check_level(j);
    return mode_ == MassMode::exact ? exact_[j].size() : log_[j].size();
  }

  const Level<Rat>& level_exact(long j) const {
    check_level(j);
    if (mode_ != MassMode::exact) throw Error("exact access on a log2-mode tree");
    return exact_[j];
  }

  const Level<double>& level_log(long j) const {
    check_level(j);
    if (mode_ != MassMode::log2) throw Error("log2 access on an exact-mode tree");
    return log_[j];
  }

  // Mass of one cube; zero when the cube is uncharged. Mode must match the
  // tree; conversions between modes are explicit (to_log2).
  Rat cube_mass(const CubeIndex& c) const {
    if (mode_ != MassMode::exact) throw Error("cube_mass on a log2-mode tree; convert explicitly");
    const auto* e = find(c);
    return e ? *static_cast<const Rat*>(e) : Rat(0);
  }

  // log2 mass; -inf when the cube is uncharged.
  double cube_log2_mass(const CubeIndex& c) const {
    if (mode_ != MassMode::log2) throw Error("cube_log2_mass on an exact-mode tree; convert explicitly");
    check_level(c.level);
    if (c.dim() != d_) throw Error("dimension mismatch");
    PackedKey key = detail::pack_key(c.k, c.level);
    const auto& lev = log_[c.level];
    auto it = std::lower_bound(lev.begin(), lev.end(), key,
                               [](const auto& p, PackedKey k) { return p.first < k; });
    if (it == lev.end() || it->first != key) return -std::numeric_limits<double>::infinity();
    return it->second;
  }

  // Structural invariants: one root cube of mass 1, every stored parent mass
  // equal to the sum of its children (exactly, or within 1e-9 relative for
  // log2 trees), all masses positive.
  void validate() const {
    if (mode_ == MassMode::exact) {
      if (exact_.empty() || exact_[0].size() != 1 || exact_[0][0].first != 0 ||
          exact_[0][0].second != 1)
        throw Error("mass tree root must carry mass 1");
      for (long j = 1; j <= depth_; ++j) {
        Level<Rat> agg = aggregate_exact(exact_[j], j);
        if (agg.size() != exact_[j - 1].size())
          throw Error("level " + std::to_string(j - 1) + " disagrees with its children");
        for (std::size_t t = 0; t < agg.size(); ++t)
          if (agg[t].first != exact_[j - 1][t].first || agg[t].second != exact_[j - 1][t].second)
            throw Error("level " + std::to_string(j - 1) + " disagrees with its children");
      }
    } else {
      if (log_.empty() || log_[0].size() != 1 || log_[0][0].first != 0 ||
          std::abs(log_[0][0].second) > 1e-12)
        throw Error("mass tree root must carry mass 1 (log2 within 1e-12)");
      for (long j = 1; j <= depth_; ++j) {
        Level<double> agg = aggregate_log(log_[j], j);
        if (agg.size() != log_[j - 1].size())
          throw Error("level " + std::to_string(j - 1) + " disagrees with its children");
        for (std::size_t t = 0; t < agg.size(); ++t) {
          if (agg[t].first != log_[j - 1][t].first)
            throw Error("level " + std::to_string(j - 1) + " disagrees with its children");
          // |2^delta - 1| <= 1e-9  <=>  |delta| <= 1e-9/ln 2 (to first order)
          if (std::abs(agg[t].second - log_[j - 1][t].second) > 1.4427e-9)
            throw Error("level " + std::to_string(j - 1) +
                        " child masses drift beyond 1e-9 relative");
        }
      }
    }
  }

  bool operator==(const MassTree& o) const {
    return d_ == o.d_ && depth_ == o.depth_ && mode_ == o.mode_ && exact_ == o.exact_ &&
           log_ == o.log_;
  }

  // --- builders used by generators and file input ---------------------------

  MassTree(int dim, long depth, MassMode mode) : d_(dim), depth_(depth), mode_(mode) {
    if (dim < 1) throw Error("measure dimension must be >= 1");
    if (depth < 0) throw Error("negative tree depth");
    if (depth > kMaxDepth || static_cast<long>(dim) * depth > kMaxBits)
      throw Error("mass tree too deep: need dim*depth <= " + std::to_string(kMaxBits));
    if (mode_ == MassMode::exact)
      exact_.assign(depth_ + 1, {});
    else
      log_.assign(depth_ + 1, {});
  }

  // Sorts, merges duplicates, drops zeros, aggregates to the root, validates
  // total mass 1.
  void set_leaves_exact(Level<Rat> leaves) {
    if (mode_ != MassMode::exact) throw Error("exact leaves on a log2-mode tree");
    sort_merge(leaves);
    exact_.assign(depth_ + 1, {});
    exact_[depth_] = std::move(leaves);
    for (long j = depth_; j >= 1; --j) exact_[j - 1] = aggregate_exact(exact_[j], j);
    if (exact_[0].size() != 1 || exact_[0][0].second != 1)
      throw Error("leaf masses must sum to 1");
  }

  // Log2 counterpart; aggregation via log-sum-exp. Root must land within
  // 1e-12 of log2(1) = 0.
  void set_leaves_log2(Level<double> leaves) {
    if (mode_ != MassMode::log2) throw Error("log2 leaves on an exact-mode tree");
    std::sort(leaves.begin(), leaves.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t t = 1; t < leaves.size(); ++t)
      if (leaves[t].first == leaves[t - 1].first) throw Error("duplicate leaf cube");
    log_.assign(depth_ + 1, {});
    log_[depth_] = std::move(leaves);
    for (long j = depth_; j >= 1; --j) log_[j - 1] = aggregate_log(log_[j], j);
    if (log_[0].size() != 1 || std::abs(log_[0][0].second) > 1e-12)
      throw Error("leaf masses must sum to 1 (log2 within 1e-12)");
  }

  // Direct per-level assignment (file input); caller provides every level.
  void set_levels_exact(std::vector<Level<Rat>> levels) {
    if (mode_ != MassMode::exact) throw Error("exact levels on a log2-mode tree");
    if (static_cast<long>(levels.size()) != depth_ + 1) throw Error("level count mismatch");
    exact_ = std::move(levels);
    validate();
  }
  void set_levels_log2(std::vector<Level<double>> levels) {
    if (mode_ != MassMode::log2) throw Error("log2 levels on an exact-mode tree");
    if (static_cast<long>(levels.size()) != depth_ + 1) throw Error("level count mismatch");
    log_ = std::move(levels);
    validate();
  }

 private:
  void check_level(long j) const {
    if (j < 0 || j > depth_)
      throw Error("level " + std::to_string(j) + " outside tree depth " + std::to_string(depth_));
  }

  const void* find(const CubeIndex& c) const {
    check_level(c.level);
    if (c.dim() != d_) throw Error("dimension mismatch");
    PackedKey key = detail::pack_key(c.k, c.level);
    const auto& lev = exact_[c.level];
    auto it = std::lower_bound(lev.begin(), lev.end(), key,
                               [](const auto& p, PackedKey k) { return p.first < k; });
    if (it == lev.end() || it->first != key) return nullptr;
    return &it->second;
  }

  static void sort_merge(Level<Rat>& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Level<Rat> out;
    out.reserve(v.size());
    for (auto& [key, mass] : v) {
      if (!out.empty() && out.back().first == key)
        out.back().second += mass;
      else
        out.emplace_back(key, std::move(mass));
    }
    std::erase_if(out, [](const auto& p) { return sgn(p.second) == 0; });
    for (const auto& [key, mass] : out)
      if (sgn(mass) < 0) throw Error("negative cube mass");
    v = std::move(out);
  }

  Level<Rat> aggregate_exact(const Level<Rat>& children, long j) const {
    Level<Rat> out;
    for (const auto& [key, mass] : children) {
      PackedKey pk = detail::parent_key(key, d_, j);
      if (!out.empty() && out.back().first == pk)
        out.back().second += mass;
      else
        out.emplace_back(pk, mass);
    }
    return out;
  }

  Level<double> aggregate_log(const Level<double>& children, long j) const {
    Level<double> out;
    std::vector<double> group;
    std::size_t t = 0;
    while (t < children.size()) {
      PackedKey pk = detail::parent_key(children[t].first, d_, j);
      group.clear();
      while (t < children.size() && detail::parent_key(children[t].first, d_, j) == pk)
        group.push_back(children[t++].second);
      // log-sum-exp in base 2, group is tiny (<= 2^d)
      double m = group[0];
      for (double g : group) m = std::max(m, g);
      double s = 0;
      for (double g : group) s += std::exp2(g - m);
      out.emplace_back(pk, m + std::log2(s));
    }
    return out;
  }

  int d_;
  long depth_;
  MassMode mode_;
  std::vector<Level<Rat>> exact_;
  std::vector<Level<double>> log_;
};

}  // namespace mfa
