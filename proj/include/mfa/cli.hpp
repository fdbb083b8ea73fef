#pragma once

// Command-line surface. Subcommands:
//   generate     write a measure file from a generator spec
//   tau          scaling-exponent curve tau(q) from a measure file
//   legendre     Legendre transform of a tau(q) CSV
//   coarse       coarse histogram spectrum at one level
//   exponent     per-level cube exponents at a point
//   distance     transport distance between two atomic measure files
//   verify-mun   floor + distance-identity checks for the blended family
//   cantor       schedule tools: validate / count / mass / verify-bounds /
//                verify-borel
//
// Exit codes: 0 success, 1 at least one FAIL check line, 2 usage or data
// errors. All numeric output flows through fmt_g, so identical invocations
// produce byte-identical output.

#include <CLI11.hpp>
#include <mfa/cantor.hpp>
#include <mfa/constructions.hpp>
#include <mfa/measure_io.hpp>
#include <mfa/spectra.hpp>
#include <mfa/transport.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace mfa::cli {

namespace detail_cli {

// "lo:hi:step" with rational endpoints; enumerated exactly, emitted as doubles.
inline std::vector<double> parse_range(const std::string& s) {
  std::size_t c1 = s.find(':');
  std::size_t c2 = c1 == std::string::npos ? std::string::npos : s.find(':', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw Error("range '" + s + "' must be lo:hi:step");
  Rat lo = parse_rat(s.substr(0, c1));
  Rat hi = parse_rat(s.substr(c1 + 1, c2 - c1 - 1));
  Rat step = parse_rat(s.substr(c2 + 1));
  if (sgn(step) <= 0) throw Error("range step must be positive");
  if (hi < lo) throw Error("range needs lo <= hi");
  if ((hi - lo) / step > 100000) throw Error("range produces too many samples");
  std::vector<double> out;
  for (Rat v = lo; v <= hi; v += step) out.push_back(rat_to_double(v));
  return out;
}

inline std::pair<long, long> parse_level_range(const std::string& s) {
  std::size_t c = s.find(':');
  auto to_long = [&](const std::string& t) {
    try {
      std::size_t pos = 0;
      long v = std::stol(t, &pos);
      if (pos != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw Error("bad level '" + t + "'");
    }
  };
  if (c == std::string::npos) {
    long j = to_long(s);
    return {j, j};
  }
  return {to_long(s.substr(0, c)), to_long(s.substr(c + 1))};
}

inline std::vector<Rat> parse_rat_list(const std::string& s) {
  std::vector<Rat> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    std::size_t c = s.find(',', i);
    if (c == std::string::npos) c = s.size();
    out.push_back(parse_rat(s.substr(i, c - i)));
    if (c == s.size()) break;
    i = c + 1;
  }
  return out;
}

inline std::vector<long> parse_long_list(const std::string& s) {
  std::vector<long> out;
  for (const Rat& r : parse_rat_list(s)) {
    if (r.get_den() != 1 || !r.get_num().fits_slong_p())
      throw Error("expected an integer list, got '" + s + "'");
    out.push_back(r.get_num().get_si());
  }
  return out;
}

// Log2-mode tree deep enough for spectra at levels up to need_depth.
inline MassTree spectra_tree(io::Measure m, long need_depth) {
  if (std::holds_alternative<AtomicMeasure>(m))
    return MassTree::from_atoms(std::get<AtomicMeasure>(m), need_depth).to_log2();
  MassTree& t = std::get<MassTree>(m);
  if (t.depth() < need_depth)
    throw Error("measure depth " + std::to_string(t.depth()) +
                " is below the requested level " + std::to_string(need_depth));
  return t.mode() == MassMode::log2 ? std::move(t) : t.to_log2();
}

// Atom view for transport: tree leaves become atoms at cube centers.
inline AtomicMeasure atoms_of(io::Measure m) {
  if (std::holds_alternative<AtomicMeasure>(m)) return std::get<AtomicMeasure>(m);
  const MassTree& t = std::get<MassTree>(m);
  if (t.mode() != MassMode::exact)
    throw Error("transport needs exact masses; this file stores log2 values");
  std::vector<Atom> atoms;
  for (const auto& [key, mass] : t.level_exact(t.depth())) {
    CubeIndex c(t.depth(), detail::unpack_key(key, t.dim(), t.depth()));
    atoms.push_back({cube_center(c), mass});
  }
  return AtomicMeasure(t.dim(), std::move(atoms));
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path + "'");
  return f;
}

inline void write_curve(const std::string& path, const SpectrumCurve& c) {
  std::ofstream f = open_out(path);
  c.write_csv(f);
  if (!f) throw Error("failed while writing '" + path + "'");
}

inline SpectrumCurve read_curve(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read '" + path + "'");
  return SpectrumCurve::read_csv(f);
}

struct Outcome {
  bool any_fail = false;
  void take(const Report& r, std::ostream& os) {
    r.print(os);
    if (r.has_fail()) any_fail = true;
  }
};

}  // namespace detail_cli

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  using namespace detail_cli;

  CLI::App app{"exact multifractal analysis of measures on [0,1]^d"};
  app.name("mfa");
  app.require_subcommand(1);
  // help answers to --help only, leaving -h/--h free for the abscissa grid
  app.set_help_flag("--help", "print this help message and exit");
  auto sub = [](CLI::App* parent, const std::string& name, const std::string& desc) {
    CLI::App* s = parent->add_subcommand(name, desc);
    s->set_help_flag("--help", "print this help message and exit");
    return s;
  };

  // generate
  auto* c_gen = sub(&app, "generate", "write a measure file from a generator spec");
  std::string gen_spec, gen_out;
  long gen_depth = -1;
  bool gen_log2 = false;
  c_gen->add_option("--spec", gen_spec,
                    "generator: lebesgue | pi | grid | mun | cascade with key=value parameters")
      ->required();
  c_gen->add_option("-o,--output", gen_out, "output measure file")->required();
  c_gen->add_option("--tree-depth", gen_depth, "materialize as a cube-mass tree of this depth");
  c_gen->add_flag("--log2", gen_log2, "store tree masses as log2 values");

  // tau
  auto* c_tau = sub(&app, "tau", "scaling-exponent curve tau(q)");
  std::string tau_in, tau_out, tau_q, tau_j, tau_method = "min", tau_per_j;
  c_tau->add_option("-i,--input", tau_in, "measure file")->required();
  c_tau->add_option("--q", tau_q, "q grid lo:hi:step (rationals)")->required();
  c_tau->add_option("--j", tau_j, "level range jmin:jmax")->required();
  c_tau->add_option("--method", tau_method, "min (default) or slope");
  c_tau->add_option("--per-j", tau_per_j, "also write per-level tau_hat rows to this file");
  c_tau->add_option("-o,--output", tau_out, "output CSV")->required();

  // legendre
  auto* c_leg = sub(&app, "legendre", "Legendre transform of a tau(q) CSV");
  std::string leg_in, leg_out, leg_h;
  c_leg->add_option("-i,--input", leg_in, "tau-of-q CSV")->required();
  c_leg->add_option("--h", leg_h, "h grid lo:hi:step (rationals)")->required();
  c_leg->add_option("-o,--output", leg_out, "output CSV")->required();

  // coarse
  auto* c_coarse = sub(&app, "coarse", "coarse histogram spectrum at one level");
  std::string coarse_in, coarse_out, coarse_eps;
  long coarse_j = 0;
  c_coarse->add_option("-i,--input", coarse_in, "measure file")->required();
  c_coarse->add_option("--j", coarse_j, "level")->required();
  c_coarse->add_option("--eps", coarse_eps, "bin width (rational)")->required();
  c_coarse->add_option("-o,--output", coarse_out, "output CSV")->required();

  // exponent
  auto* c_exp = sub(&app, "exponent", "per-level cube exponents at a point");
  std::string exp_in, exp_out, exp_x;
  long exp_j = 0;
  c_exp->add_option("-i,--input", exp_in, "measure file")->required();
  c_exp->add_option("--x", exp_x, "point coordinates, comma-separated rationals")->required();
  c_exp->add_option("--j", exp_j, "deepest level")->required();
  c_exp->add_option("-o,--output", exp_out, "output CSV")->required();

  // distance
  auto* c_dist = sub(&app, "distance", "transport distance between two measures");
  std::string dist_a, dist_b, dist_plan;
  std::size_t dist_cap = 256;
  bool dist_cert = false;
  c_dist->add_option("-a", dist_a, "first measure file")->required();
  c_dist->add_option("-b", dist_b, "second measure file")->required();
  c_dist->add_option("--plan", dist_plan, "write the optimal plan to this file");
  c_dist->add_option("--exact-cap", dist_cap, "atom-count bound for the exact path (default 256)");
  c_dist->add_flag("--certificate", dist_cert, "print the optimality certificate report");

  // verify-mun
  auto* c_mun = sub(&app, "verify-mun", "floor and distance identities of the blend");
  std::string mun_weights, mun_theta, mun_eps = "1", mun_points;
  long mun_d = 1, mun_jn = 1, mun_n = 1;
  c_mun->add_option("--d", mun_d, "dimension")->required();
  c_mun->add_option("--jn", mun_jn, "grid level j (J = 2 n j^2)")->required();
  c_mun->add_option("--n", mun_n, "blend index n")->required();
  c_mun->add_option("--weights", mun_weights, "grid weights, comma-separated rationals")
      ->required();
  c_mun->add_option("--theta", mun_theta, "also check the approximation-ball floor at this theta");
  c_mun->add_option("--eps", mun_eps, "epsilon for the ball floor (needs eps > 1/(d n))");
  c_mun->add_option("--points", mun_points, "semicolon-separated points, each comma-separated");

  // cantor
  auto* c_cantor = sub(&app, "cantor", "nested-ball Cantor schedules");
  c_cantor->require_subcommand(1);
  std::string ct_theta, ct_levels;
  long ct_d = 1;
  auto add_schedule_opts = [&](CLI::App* sub) {
    sub->add_option("--theta", ct_theta, "scale ratio theta (rational > 1)")->required();
    sub->add_option("--levels", ct_levels, "levels J_1,J_2,... (theta*J_p integral)")->required();
    sub->add_option("--d", ct_d, "dimension (default 1)");
  };
  auto* ct_validate = sub(c_cantor, "validate", "report the growth conditions");
  add_schedule_opts(ct_validate);
  auto* ct_count = sub(c_cantor, "count", "branching and generation counts");
  add_schedule_opts(ct_count);
  auto* ct_mass = sub(c_cantor, "mass", "node mass per generation");
  add_schedule_opts(ct_mass);
  auto* ct_bounds = sub(c_cantor, "verify-bounds", "branching and mass bounds");
  add_schedule_opts(ct_bounds);
  long ct_p = 0, ct_samples = 4;
  unsigned long ct_seed = 0;
  ct_bounds->add_option("--p", ct_p, "generation (default: deepest)");
  ct_bounds->add_option("--samples", ct_samples, "sampled nodes (default 4)");
  ct_bounds->add_option("--seed", ct_seed, "sampling seed (default 0)");
  auto* ct_borel = sub(c_cantor, "verify-borel", "box-measure regularity on probes");
  add_schedule_opts(ct_borel);
  std::vector<std::string> ct_boxes;
  long ct_bp = 0;
  ct_borel->add_option("--p", ct_bp, "deepest generation to use (default: schedule depth)");
  ct_borel->add_option("--box", ct_boxes, "probe box lo1,hi1[,lo2,hi2,...]; repeatable");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  Outcome outcome;
  try {
    if (*c_gen) {
      Generated g = parse_generator_spec(gen_spec);
      MassMode mode = gen_log2 ? MassMode::log2 : MassMode::exact;
      io::Measure m = std::visit(
          [&](auto&& v) -> io::Measure {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, AtomicMeasure>) {
              if (gen_depth < 0) return std::move(v);
              MassTree t = MassTree::from_atoms(v, gen_depth);
              return mode == MassMode::exact ? std::move(t) : t.to_log2();
            } else if constexpr (std::is_same_v<T, MassTree>) {
              MassTree t = gen_depth < 0 ? std::move(v) : v.aggregate_to(gen_depth);
              return mode == MassMode::log2 && t.mode() == MassMode::exact ? t.to_log2()
                                                                           : std::move(t);
            } else {
              if (gen_depth < 0) return v.to_atomic();
              return mun_tree(v, gen_depth, mode);
            }
          },
          std::move(g));
      io::write_measure_file(gen_out, m);
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, AtomicMeasure>)
              out << "wrote atomic measure: d=" << v.dim() << " atoms=" << v.atoms().size()
                  << " -> " << gen_out << "\n";
            else
              out << "wrote mass tree: d=" << v.dim() << " depth=" << v.depth()
                  << " leaves=" << v.charged_count(v.depth()) << " -> " << gen_out << "\n";
          },
          m);
    }

    if (*c_tau) {
      auto [jmin, jmax] = parse_level_range(tau_j);
      std::vector<double> qs = parse_range(tau_q);
      TauMethod method;
      if (tau_method == "min")
        method = TauMethod::Min;
      else if (tau_method == "slope")
        method = TauMethod::Slope;
      else
        throw Error("--method must be min or slope");
      MassTree t = spectra_tree(io::read_measure_file(tau_in), jmax);
      SpectrumCurve curve = tau_curve_estimate(t, qs, jmin, jmax, method);
      if (method == TauMethod::Min) curve.validate();
      write_curve(tau_out, curve);
      if (!tau_per_j.empty()) {
        std::ofstream f = open_out(tau_per_j);
        f << "# kind=tau-per-level j=" << jmin << ":" << jmax << "\n";
        f << "# columns q,j,tau_hat\n";
        for (double q : qs)
          for (long j = jmin; j <= jmax; ++j)
            f << fmt_g(q) << "," << j << "," << fmt_g(tau_hat(t, j, q)) << "\n";
      }
      out << "tau-of-q: " << curve.pts.size() << " points, j=" << jmin << ":" << jmax << " -> "
          << tau_out << "\n";
    }

    if (*c_leg) {
      SpectrumCurve tau = read_curve(leg_in);
      if (tau.kind != CurveKind::TauOfQ)
        throw Error("legendre input must be a tau-of-q curve, got " +
                    std::string(to_string(tau.kind)));
      try {
        tau.validate();
      } catch (const Error& e) {
        err << "warning: " << e.what() << "\n";
      }
      std::vector<double> hs = parse_range(leg_h);
      SpectrumCurve leg = legendre_curve(tau, hs);
      write_curve(leg_out, leg);
      std::string flagged = "0";
      for (const auto& [k, v] : leg.meta)
        if (k == "boundary_flagged") flagged = v;
      out << "legendre-of-h: " << leg.pts.size() << " points, " << flagged
          << " boundary-limited -> " << leg_out << "\n";
    }

    if (*c_coarse) {
      double eps = rat_to_double(parse_rat(coarse_eps));
      MassTree t = spectra_tree(io::read_measure_file(coarse_in), coarse_j);
      SpectrumCurve curve = coarse_spectrum(t, coarse_j, eps);
      write_curve(coarse_out, curve);
      out << "coarse-of-h: " << curve.pts.size() << " occupied bins at j=" << coarse_j << " -> "
          << coarse_out << "\n";
    }

    if (*c_exp) {
      std::vector<Rat> coords = parse_rat_list(exp_x);
      Point x(coords);
      if (exp_j < 1) throw Error("--j must be at least 1");
      MassTree t = spectra_tree(io::read_measure_file(exp_in), exp_j);
      SpectrumCurve curve;
      curve.kind = CurveKind::ExponentOfJ;
      curve.add_meta("x", exp_x);
      for (long j = 1; j <= exp_j; ++j)
        curve.pts.emplace_back(static_cast<double>(j), cube_exponent(t, x, j));
      write_curve(exp_out, curve);
      out << "exponent-of-j: level " << exp_j << " exponent = "
          << fmt_g(curve.pts.back().second) << " -> " << exp_out << "\n";
    }

    if (*c_dist) {
      AtomicMeasure A = atoms_of(io::read_measure_file(dist_a));
      AtomicMeasure B = atoms_of(io::read_measure_file(dist_b));
      ot::DistanceResult r = ot::distance(A, B, dist_cap);
      if (r.exact)
        out << "distance = " << rat_str(r.value) << " (= " << fmt_g(r.value_d) << ")\n";
      else
        out << "distance ~ " << fmt_g(r.value_d) << " (duality gap <= "
            << fmt_g(r.plan.duality_gap) << ")\n";
      out << "pivots = " << r.plan.pivots << "\n";
      if (!dist_plan.empty()) {
        std::ofstream f = open_out(dist_plan);
        f << "# transport plan: " << (r.exact ? "exact" : "numeric") << ", objective "
          << (r.exact ? rat_str(r.value) : fmt_g(r.value_d)) << "\n";
        for (const ot::Move& mv : r.plan.moves)
          f << "move " << mv.from << " " << mv.to << " " << rat_str(mv.mass) << "\n";
      }
      if (dist_cert) {
        if (!r.exact)
          throw Error("the certificate report needs the exact path; raise --exact-cap");
        outcome.take(ot::check_transport_certificate(A, B, r.plan), out);
      }
    }

    if (*c_mun) {
      GridWeights grid(static_cast<int>(mun_d), mun_jn, parse_rat_list(mun_weights));
      MuN mu(grid, mun_n);
      outcome.take(mu.check_floor(), out);
      try {
        outcome.take(ot::check_mu_nu_distance(grid, mun_n), out);
      } catch (const Error& e) {
        Report rep;
        rep.title = "distance identity";
        rep.skip("scaling-identity", e.what());
        outcome.take(rep, out);
      }
      if (!mun_theta.empty()) {
        std::vector<Point> pts;
        std::stringstream ss(mun_points);
        std::string one;
        while (std::getline(ss, one, ';'))
          if (!one.empty()) pts.push_back(Point(parse_rat_list(one)));
        outcome.take(
            cantor::ball_mass_lower_bound_check(mu, parse_rat(mun_theta), parse_rat(mun_eps), pts),
            out);
      }
    }

    if (*c_cantor) {
      cantor::Schedule s(static_cast<int>(ct_d), parse_rat(ct_theta), parse_long_list(ct_levels));
      if (*ct_validate) outcome.take(cantor::validate_schedule(s), out);
      if (*ct_count) {
        for (int p = 1; p <= s.P(); ++p) {
          Int delta = cantor::branching_count_level(s, p);
          out << "Delta_" << p << ": log2 = " << fmt_g(log2_int(delta));
          if (mpz_sizeinbase(delta.get_mpz_t(), 2) <= 20) out << " (= " << delta.get_str() << ")";
          out << "\n";
        }
        Int total = cantor::generation_count(s, s.P());
        out << "generation " << s.P() << " count: log2 = " << fmt_g(log2_int(total)) << "\n";
      }
      if (*ct_mass) {
        for (int p = 1; p <= s.P(); ++p) {
          cantor::FactoredMass fm = cantor::node_mass(s, cantor::first_node(s, p));
          double l2 = fm.log2();
          out << "generation " << p << ": node mass log2 = " << fmt_g(l2)
              << ", log2 m / log2 |I| = "
              << fmt_g(l2 / -static_cast<double>(s.thetaJ(p))) << "\n";
        }
      }
      if (*ct_bounds) {
        int p = ct_p > 0 ? static_cast<int>(ct_p) : s.P();
        if (ct_samples < 1) throw Error("--samples must be positive");
        Int total = cantor::generation_count(s, p);
        std::vector<cantor::Node> nodes;
        nodes.push_back(cantor::node_by_rank(s, p, 0));
        if (total > 1) nodes.push_back(cantor::node_by_rank(s, p, total - 1));
        std::mt19937_64 rng(ct_seed);
        for (long t = 0; t < ct_samples; ++t)
          nodes.push_back(cantor::node_by_rank(s, p, cantor::random_int_below(rng, total)));
        outcome.take(cantor::verify_total_mass(s, p), out);
        outcome.take(cantor::verify_mass_bounds(s, p, nodes), out);
      }
      if (*ct_borel) {
        int p = ct_bp > 0 ? static_cast<int>(ct_bp) : s.P();
        std::vector<Box> boxes;
        for (const std::string& bs : ct_boxes) {
          std::vector<Rat> vals = parse_rat_list(bs);
          if (vals.size() != 2 * static_cast<std::size_t>(s.d))
            throw Error("--box needs " + std::to_string(2 * s.d) + " rationals, got '" + bs + "'");
          std::vector<Rat> lo(s.d), hi(s.d);
          for (int i = 0; i < s.d; ++i) {
            lo[i] = vals[2 * i];
            hi[i] = vals[2 * i + 1];
          }
          boxes.push_back(Box(std::move(lo), std::move(hi)));
        }
        if (boxes.empty()) throw Error("verify-borel needs at least one --box");
        outcome.take(cantor::verify_borel_bound(s, p, boxes), out);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return outcome.any_fail ? 1 : 0;
}

inline int run_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args), out, err);
}

}  // namespace mfa::cli
