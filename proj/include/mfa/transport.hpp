#pragma once

// Kantorovich transport distance between atomic measures under the sup
// metric, solved by a transportation-tableau network simplex. The solver is
// templated on the value type: exact rationals up to a configurable atom cap
// (default 256 total atoms), doubles beyond it with a duality-gap certificate
// computed from the final reduced costs.
//
// Anti-cycling: Dantzig pivoting with lexicographic tie-breaks, switching
// permanently to Bland's rule after a run of degenerate pivots. Everything is
// deterministic.

#include <mfa/constructions.hpp>
#include <mfa/measure.hpp>
#include <mfa/report.hpp>

#include <algorithm>
#include <cstddef>
#include <tuple>
#include <vector>

namespace mfa::ot {

namespace detail_ot {

template <class T>
struct Traits;

template <>
struct Traits<Rat> {
  static Rat zero() { return Rat(0); }
  static Rat pivot_threshold() { return Rat(0); }
  static bool positive(const Rat& r) { return sgn(r) > 0; }
};

template <>
struct Traits<double> {
  static double zero() { return 0.0; }
  static double pivot_threshold() { return -1e-13; }
  static bool positive(double r) { return r > 0; }
};

template <class T>
struct RawSolution {
  T objective{};
  std::vector<std::tuple<std::size_t, std::size_t, T>> moves;
  std::vector<T> u, v;
  T min_reduced{};  // over all cells, after termination (>= 0 when exact)
  long pivots = 0;
};

template <class T>
RawSolution<T> solve_transport(const std::vector<T>& a, const std::vector<T>& b,
                               const std::vector<std::vector<T>>& cost) {
  const std::size_t m = a.size(), n = b.size();
  if (m == 0 || n == 0) throw Error("transport needs nonempty marginals");

  std::vector<std::vector<T>> flow(m, std::vector<T>(n, Traits<T>::zero()));
  std::vector<std::vector<char>> basic(m, std::vector<char>(n, 0));

  // northwest-corner start: a staircase spanning tree with m+n-1 basic cells
  {
    std::vector<T> ra = a, rb = b;
    std::size_t i = 0, j = 0;
    for (std::size_t step = 0; step + 2 < m + n; ++step) {
      basic[i][j] = 1;
      if (i + 1 < m && (j + 1 == n || !(rb[j] < ra[i]))) {
        flow[i][j] = ra[i];
        rb[j] -= ra[i];
        ra[i] = Traits<T>::zero();
        ++i;
      } else {
        flow[i][j] = rb[j];
        ra[i] -= rb[j];
        rb[j] = Traits<T>::zero();
        ++j;
      }
    }
    basic[m - 1][n - 1] = 1;
    flow[m - 1][n - 1] = (rb[n - 1] < ra[m - 1]) ? rb[n - 1] : ra[m - 1];
  }

  std::vector<T> u(m, Traits<T>::zero()), v(n, Traits<T>::zero());
  std::vector<std::vector<std::size_t>> row_adj(m), col_adj(n);
  std::vector<int> prev_node(m + n);           // predecessor in the BFS tree
  std::vector<char> seen(m + n);
  std::vector<std::size_t> queue_buf(m + n);

  bool bland = false;
  long degenerate_run = 0;
  long pivots = 0;
  const long degenerate_cap = 200 + 10 * static_cast<long>(m + n);
  const long pivot_cap = 4'000'000;

  while (true) {
    // adjacency of the current basis tree
    for (auto& r : row_adj) r.clear();
    for (auto& c : col_adj) c.clear();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (basic[i][j]) {
          row_adj[i].push_back(j);
          col_adj[j].push_back(i);
        }

    // dual potentials from the tree: u[0] = 0, u_i + v_j = c_ij on the basis
    std::fill(seen.begin(), seen.end(), 0);
    std::size_t qh = 0, qt = 0;
    queue_buf[qt++] = 0;
    seen[0] = 1;
    u[0] = Traits<T>::zero();
    while (qh < qt) {
      std::size_t node = queue_buf[qh++];
      if (node < m) {
        for (std::size_t j : row_adj[node])
          if (!seen[m + j]) {
            v[j] = cost[node][j] - u[node];
            seen[m + j] = 1;
            queue_buf[qt++] = m + j;
          }
      } else {
        std::size_t j = node - m;
        for (std::size_t i : col_adj[j])
          if (!seen[i]) {
            u[i] = cost[i][j] - v[j];
            seen[i] = 1;
            queue_buf[qt++] = i;
          }
      }
    }

    // entering cell
    std::size_t bi = m, bj = n;
    T best = Traits<T>::pivot_threshold();
    bool found = false;
    for (std::size_t i = 0; i < m && !(bland && found); ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (basic[i][j]) continue;
        T red = cost[i][j] - u[i] - v[j];
        if (red < best) {
          best = red;
          bi = i;
          bj = j;
          found = true;
          if (bland) break;
        }
      }
    if (!found) break;

    if (++pivots > pivot_cap) throw Error("transport simplex exceeded the pivot cap");

    // unique tree path row bi -> col bj; cells along it alternate -,+
    std::fill(seen.begin(), seen.end(), 0);
    qh = qt = 0;
    queue_buf[qt++] = bi;
    seen[bi] = 1;
    prev_node[bi] = -1;
    while (qh < qt && !seen[m + bj]) {
      std::size_t node = queue_buf[qh++];
      if (node < m) {
        for (std::size_t j : row_adj[node])
          if (!seen[m + j]) {
            seen[m + j] = 1;
            prev_node[m + j] = static_cast<int>(node);
            queue_buf[qt++] = m + j;
          }
      } else {
        for (std::size_t i : col_adj[node - m])
          if (!seen[i]) {
            seen[i] = 1;
            prev_node[i] = static_cast<int>(node);
            queue_buf[qt++] = i;
          }
      }
    }
    if (!seen[m + bj]) throw Error("transport basis lost connectivity");

    std::vector<std::pair<std::size_t, std::size_t>> path;  // cells, row->col order
    {
      std::vector<std::size_t> nodes;
      for (int node = static_cast<int>(m + bj); node != -1; node = prev_node[node])
        nodes.push_back(static_cast<std::size_t>(node));
      std::reverse(nodes.begin(), nodes.end());  // bi ... m+bj
      for (std::size_t t = 0; t + 1 < nodes.size(); ++t) {
        std::size_t x = nodes[t], y = nodes[t + 1];
        if (x < m)
          path.emplace_back(x, y - m);
        else
          path.emplace_back(y, x - m);
      }
    }

    // theta = min flow over the decreasing cells (even path positions)
    std::size_t li = 0, lj = 0;
    bool have_theta = false;
    T theta = Traits<T>::zero();
    for (std::size_t t = 0; t < path.size(); t += 2) {
      const auto& [pi_, pj_] = path[t];
      const T& f = flow[pi_][pj_];
      bool better = !have_theta || f < theta ||
                    (!(theta < f) && (pi_ < li || (pi_ == li && pj_ < lj)));
      if (better) {
        theta = f;
        li = pi_;
        lj = pj_;
        have_theta = true;
      }
    }
    if (!have_theta) throw Error("transport pivot without a leaving cell");

    flow[bi][bj] += theta;
    for (std::size_t t = 0; t < path.size(); ++t) {
      const auto& [pi_, pj_] = path[t];
      if (t % 2 == 0)
        flow[pi_][pj_] -= theta;
      else
        flow[pi_][pj_] += theta;
    }
    flow[li][lj] = Traits<T>::zero();  // exact out, kills float residue too
    basic[bi][bj] = 1;
    basic[li][lj] = 0;

    if (Traits<T>::positive(theta))
      degenerate_run = 0;
    else if (++degenerate_run > degenerate_cap)
      bland = true;
  }

  RawSolution<T> out;
  out.pivots = pivots;
  out.objective = Traits<T>::zero();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (Traits<T>::positive(flow[i][j])) {
        out.objective += flow[i][j] * cost[i][j];
        out.moves.emplace_back(i, j, flow[i][j]);
      }
  out.u = u;
  out.v = v;
  bool first = true;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T red = cost[i][j] - u[i] - v[j];
      if (first || red < out.min_reduced) {
        out.min_reduced = red;
        first = false;
      }
    }
  return out;
}

}  // namespace detail_ot

struct Move {
  std::size_t from, to;
  Rat mass;
};

struct TransportPlan {
  bool exact = true;
  std::vector<Move> moves;
  Rat objective;
  std::vector<Rat> source_potential, target_potential;  // u_i + v_j <= c_ij, tight on support
  double objective_d = 0;
  double duality_gap = 0;  // 0 in exact mode; certificate bound otherwise
  long pivots = 0;
};

struct DistanceResult {
  Rat value;       // exact when .exact, else the dyadic image of the double
  double value_d;
  bool exact;
  TransportPlan plan;
};

inline DistanceResult distance(const AtomicMeasure& A, const AtomicMeasure& B,
                               std::size_t exact_cap = 256) {
  if (A.dim() != B.dim()) throw Error("dimension mismatch");
  const auto& xs = A.atoms();
  const auto& ys = B.atoms();
  const std::size_t m = xs.size(), n = ys.size();

  DistanceResult res;
  res.plan.pivots = 0;

  if (m + n <= exact_cap) {
    std::vector<Rat> a(m), b(n);
    for (std::size_t i = 0; i < m; ++i) a[i] = xs[i].weight;
    for (std::size_t j = 0; j < n; ++j) b[j] = ys[j].weight;
    std::vector<std::vector<Rat>> cost(m, std::vector<Rat>(n));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        cost[i][j] = sup_distance(xs[i].location, ys[j].location);
    auto raw = detail_ot::solve_transport<Rat>(a, b, cost);
    res.exact = true;
    res.value = raw.objective;
    res.value_d = rat_to_double(raw.objective);
    res.plan.exact = true;
    res.plan.objective = raw.objective;
    res.plan.objective_d = res.value_d;
    res.plan.duality_gap = 0;
    res.plan.pivots = raw.pivots;
    res.plan.source_potential = raw.u;
    res.plan.target_potential = raw.v;
    for (auto& [i, j, f] : raw.moves) res.plan.moves.push_back({i, j, f});
    return res;
  }

  std::vector<double> a(m), b(n);
  for (std::size_t i = 0; i < m; ++i) a[i] = rat_to_double(xs[i].weight);
  for (std::size_t j = 0; j < n; ++j) b[j] = rat_to_double(ys[j].weight);
  std::vector<std::vector<double>> cost(m, std::vector<double>(n));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i][j] = rat_to_double(sup_distance(xs[i].location, ys[j].location));
  auto raw = detail_ot::solve_transport<double>(a, b, cost);
  double gap = raw.min_reduced < 0 ? -raw.min_reduced : 0.0;  // total mass is 1
  if (gap > 1e-9)
    throw Error("numeric transport certificate exceeds 1e-9; raise the exact cap");
  res.exact = false;
  res.value_d = raw.objective;
  res.value = Rat(raw.objective);  // dyadic image, not an exact optimum
  res.plan.exact = false;
  res.plan.objective = res.value;
  res.plan.objective_d = raw.objective;
  res.plan.duality_gap = gap;
  res.plan.pivots = raw.pivots;
  for (auto& [i, j, f] : raw.moves) res.plan.moves.push_back({i, j, Rat(f)});
  return res;
}

// d=1 closed form: the L1 distance between the two CDFs.
inline Rat distance_1d(const AtomicMeasure& A, const AtomicMeasure& B) {
  if (A.dim() != 1 || B.dim() != 1) throw Error("distance_1d needs d=1 measures");
  struct Ev {
    Rat x, da, db;
  };
  std::vector<Ev> evs;
  for (const Atom& t : A.atoms()) evs.push_back({t.location.x[0], t.weight, Rat(0)});
  for (const Atom& t : B.atoms()) evs.push_back({t.location.x[0], Rat(0), t.weight});
  std::sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) { return a.x < b.x; });
  Rat total = 0, diff = 0;
  for (std::size_t t = 0; t < evs.size(); ++t) {
    diff += evs[t].da - evs[t].db;
    if (t + 1 < evs.size()) total += abs(diff) * (evs[t + 1].x - evs[t].x);
  }
  return total;
}

// Full optimality certificate for an exact plan: feasible marginals, feasible
// duals, and the McShane extension of the target potential is 1-Lipschitz on
// the atom set with integral gap equal to the objective. Everything exact.
inline Report check_transport_certificate(const AtomicMeasure& A, const AtomicMeasure& B,
                                          const TransportPlan& plan) {
  Report rep;
  rep.title = "transport optimality certificate";
  if (!plan.exact) {
    rep.skip("certificate", "only exact plans carry a rational certificate");
    return rep;
  }
  const auto& xs = A.atoms();
  const auto& ys = B.atoms();

  std::vector<Rat> outflow(xs.size(), Rat(0)), inflow(ys.size(), Rat(0));
  bool nonneg = true;
  for (const Move& mv : plan.moves) {
    if (sgn(mv.mass) < 0) nonneg = false;
    outflow[mv.from] += mv.mass;
    inflow[mv.to] += mv.mass;
  }
  bool marg = nonneg;
  for (std::size_t i = 0; i < xs.size() && marg; ++i) marg = (outflow[i] == xs[i].weight);
  for (std::size_t j = 0; j < ys.size() && marg; ++j) marg = (inflow[j] == ys[j].weight);
  rep.add("plan-marginals", marg ? CheckStatus::Pass : CheckStatus::Fail,
          "moves are nonnegative and route exactly the two marginals");

  bool feas = true;
  for (std::size_t i = 0; i < xs.size() && feas; ++i)
    for (std::size_t j = 0; j < ys.size() && feas; ++j)
      feas = (plan.source_potential[i] + plan.target_potential[j] <=
              sup_distance(xs[i].location, ys[j].location));
  rep.add("dual-feasible", feas ? CheckStatus::Pass : CheckStatus::Fail,
          "u_i + v_j <= cost on every cell");

  Rat dual_value = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) dual_value += xs[i].weight * plan.source_potential[i];
  for (std::size_t j = 0; j < ys.size(); ++j) dual_value += ys[j].weight * plan.target_potential[j];
  rep.add("strong-duality", dual_value == plan.objective ? CheckStatus::Pass : CheckStatus::Fail,
          "dual value " + rat_str(dual_value) + " vs objective " + rat_str(plan.objective));

  // McShane witness f(z) = min_j (dist(z, y_j) - v_j)
  std::vector<Point> zs;
  for (const Atom& t : xs) zs.push_back(t.location);
  for (const Atom& t : ys) zs.push_back(t.location);
  auto witness = [&](const Point& z) {
    Rat best;
    bool first = true;
    for (std::size_t j = 0; j < ys.size(); ++j) {
      Rat w = sup_distance(z, ys[j].location) - plan.target_potential[j];
      if (first || w < best) {
        best = w;
        first = false;
      }
    }
    return best;
  };
  std::vector<Rat> fz(zs.size());
  for (std::size_t t = 0; t < zs.size(); ++t) fz[t] = witness(zs[t]);
  bool lip = true;
  for (std::size_t s = 0; s < zs.size() && lip; ++s)
    for (std::size_t t = s + 1; t < zs.size() && lip; ++t)
      lip = (abs(fz[s] - fz[t]) <= sup_distance(zs[s], zs[t]));
  rep.add("witness-lipschitz", lip ? CheckStatus::Pass : CheckStatus::Fail,
          "McShane extension is 1-Lipschitz on the atom set");

  Rat integral = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) integral += xs[i].weight * fz[i];
  for (std::size_t j = 0; j < ys.size(); ++j) integral -= ys[j].weight * fz[xs.size() + j];
  rep.add("witness-integral", integral == plan.objective ? CheckStatus::Pass : CheckStatus::Fail,
          "int f d(mu - nu) = " + rat_str(integral) + " equals the transport cost");
  return rep;
}

// The blend identity: rho(mu_n, nu) = 2^{-J/n} rho(nu, pi_J), plus the
// resulting bound rho(mu_n, nu) <= 2 * 2^{-J/n}. Exact LP on both sides.
inline Report check_mu_nu_distance(const GridWeights& grid, long n) {
  MuN mu(grid, n);
  Report rep;
  rep.title = "blend distance identity (d=" + std::to_string(mu.dim()) +
              ", n=" + std::to_string(n) + ", J=" + std::to_string(mu.J()) + ")";
  AtomicMeasure mu_atoms = mu.to_atomic();
  AtomicMeasure pi = pi_measure(mu.dim(), mu.J());
  const AtomicMeasure& nu = mu.nu();

  std::size_t need = mu_atoms.atoms().size() + std::max(pi.atoms().size(), nu.atoms().size());
  DistanceResult d_mu_nu = distance(mu_atoms, nu, std::max<std::size_t>(need, 256));
  DistanceResult d_nu_pi = distance(nu, pi, std::max<std::size_t>(need, 256));

  Rat lhs = d_mu_nu.value;
  Rat rhs = mu.blend() * d_nu_pi.value;
  rep.add("scaling-identity", lhs == rhs ? CheckStatus::Pass : CheckStatus::Fail,
          "rho(mu_n, nu) = " + rat_str(lhs) + ", blend * rho(nu, pi_J) = " + rat_str(rhs) +
              " (blend " + rat_str(mu.blend()) + ")");
  Rat bound = 2 * mu.blend();
  rep.add("distance-bound", lhs <= bound ? CheckStatus::Pass : CheckStatus::Fail,
          "rho(mu_n, nu) = " + rat_str(lhs) + " <= 2 * blend = " + rat_str(bound));
  return rep;
}

}  // namespace mfa::ot
