#pragma once

// Log-domain scaling analysis of a MassTree:
//   partition_sum_log2(t, j, q) = log2 sum_{charged I at level j} mu(I)^q
//   tau_hat(t, j, q)            = -(1/j) partition_sum_log2
//   tau_estimate                = liminf surrogate over a level range
//                                 (min over levels, or least-squares slope)
//   legendre                    = inf_q (q h - tau(q)) over a sampled curve
//   cube_exponent, coarse_spectrum: pointwise and histogram exponents.
//
// All of these take log2-mode trees; exact trees are converted explicitly by
// the caller. Sums run in a fixed (sorted-key) order with compensated
// accumulation, so results are deterministic bit-for-bit.

#include <mfa/measure.hpp>
#include <mfa/rational.hpp>

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mfa {

namespace detail_spec {

// Neumaier-compensated sum; input order is the caller's responsibility.
struct CompensatedSum {
  double s = 0, c = 0;
  void add(double v) {
    double t = s + v;
    if (std::abs(s) >= std::abs(v))
      c += (s - t) + v;
    else
      c += (v - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

}  // namespace detail_spec

inline double partition_sum_log2(const MassTree& t, long j, double q) {
  if (t.mode() != MassMode::log2)
    throw Error("partition sums need a log2-mode tree; convert explicitly");
  const auto& lev = t.level_log(j);  // throws on j outside [0, depth]
  if (lev.empty()) throw Error("no charged cube at level " + std::to_string(j));
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& [key, logm] : lev) m = std::max(m, q * logm);
  detail_spec::CompensatedSum cs;
  for (const auto& [key, logm] : lev) cs.add(std::exp2(q * logm - m));
  return m + std::log2(cs.value());
}

inline double tau_hat(const MassTree& t, long j, double q) {
  if (j < 1) throw Error("tau_hat needs level j >= 1");
  return -partition_sum_log2(t, j, q) / static_cast<double>(j);
}

enum class TauMethod { Min, Slope };

inline double tau_estimate(const MassTree& t, double q, long jmin, long jmax, TauMethod method) {
  if (jmin < 1 || jmin > jmax) throw Error("tau_estimate needs 1 <= jmin <= jmax");
  if (jmax > t.depth()) throw Error("tau_estimate range exceeds tree depth");
  if (method == TauMethod::Min) {
    double best = tau_hat(t, jmin, q);
    for (long j = jmin + 1; j <= jmax; ++j) best = std::min(best, tau_hat(t, j, q));
    return best;
  }
  if (jmin == jmax) throw Error("slope estimate needs at least two levels");
  // least squares of log2 S_j(q) against -j
  long n = jmax - jmin + 1;
  double xbar = 0, ybar = 0;
  std::vector<double> ys(n);
  for (long j = jmin; j <= jmax; ++j) {
    ys[j - jmin] = partition_sum_log2(t, j, q);
    xbar += -static_cast<double>(j);
    ybar += ys[j - jmin];
  }
  xbar /= static_cast<double>(n);
  ybar /= static_cast<double>(n);
  double num = 0, den = 0;
  for (long j = jmin; j <= jmax; ++j) {
    double dx = -static_cast<double>(j) - xbar;
    num += dx * (ys[j - jmin] - ybar);
    den += dx * dx;
  }
  return num / den;
}

enum class CurveKind { TauOfQ, LegendreOfH, CoarseOfH, ExponentOfJ };

inline const char* to_string(CurveKind k) {
  switch (k) {
    case CurveKind::TauOfQ: return "tau-of-q";
    case CurveKind::LegendreOfH: return "legendre-of-h";
    case CurveKind::CoarseOfH: return "coarse-of-h";
    case CurveKind::ExponentOfJ: return "exponent-of-j";
  }
  return "?";
}

// A sampled curve plus the configuration that produced it. CSV form:
//   # kind=<kind> <key>=<value> ...
//   <abscissa>,<value>
struct SpectrumCurve {
  CurveKind kind = CurveKind::TauOfQ;
  std::vector<std::pair<double, double>> pts;
  std::vector<std::pair<std::string, std::string>> meta;  // echoed configuration

  void add_meta(std::string k, std::string v) { meta.emplace_back(std::move(k), std::move(v)); }

  // Invariants a scaling curve must satisfy: strictly increasing abscissas;
  // for tau-of-q curves, concavity on consecutive triples (1e-9 slack) and
  // tau(1) = 0 (1e-12) whenever q = 1 is sampled.
  void validate() const {
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (!(pts[i].first > pts[i - 1].first)) throw Error("curve abscissas must increase strictly");
    if (kind == CurveKind::TauOfQ) {
      for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        const auto& [q1, v1] = pts[i - 1];
        const auto& [q2, v2] = pts[i];
        const auto& [q3, v3] = pts[i + 1];
        double chord = v1 + (v3 - v1) * (q2 - q1) / (q3 - q1);
        if (v2 < chord - 1e-9) throw Error("tau curve fails concavity at q = " + fmt_g(q2));
      }
      for (const auto& [q, v] : pts)
        if (std::abs(q - 1.0) <= 1e-12 && std::abs(v) > 1e-12)
          throw Error("tau(1) must vanish, got " + fmt_g(v));
    }
  }

  void write_csv(std::ostream& os) const {
    os << "# kind=" << to_string(kind);
    for (const auto& [k, v] : meta) os << " " << k << "=" << v;
    os << "\n";
    for (const auto& [a, b] : pts) os << fmt_g(a) << "," << fmt_g(b) << "\n";
  }

  static SpectrumCurve read_csv(std::istream& is) {
    SpectrumCurve c;
    std::string line;
    bool have_header = false;
    long ln = 0;
    while (std::getline(is, line)) {
      ++ln;
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (have_header) continue;
        have_header = true;
        std::istringstream ss(line.substr(1));
        std::string tok;
        bool kind_found = false;
        while (ss >> tok) {
          std::size_t eq = tok.find('=');
          if (eq == std::string::npos) continue;
          std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
          if (k == "kind") {
            kind_found = true;
            if (v == "tau-of-q") c.kind = CurveKind::TauOfQ;
            else if (v == "legendre-of-h") c.kind = CurveKind::LegendreOfH;
            else if (v == "coarse-of-h") c.kind = CurveKind::CoarseOfH;
            else if (v == "exponent-of-j") c.kind = CurveKind::ExponentOfJ;
            else throw Error("unknown curve kind '" + v + "'");
          } else {
            c.add_meta(k, v);
          }
        }
        if (!kind_found) throw Error("curve header lacks kind=");
        continue;
      }
      std::size_t comma = line.find(',');
      if (comma == std::string::npos)
        throw Error("line " + std::to_string(ln) + ": expected '<abscissa>,<value>'");
      try {
        std::size_t p1 = 0, p2 = 0;
        double a = std::stod(line.substr(0, comma), &p1);
        double b = std::stod(line.substr(comma + 1), &p2);
        if (p1 != comma || p2 != line.size() - comma - 1) throw std::invalid_argument(line);
        c.pts.emplace_back(a, b);
      } catch (const std::exception&) {
        throw Error("line " + std::to_string(ln) + ": bad numeric row '" + line + "'");
      }
    }
    if (!have_header) throw Error("curve file lacks the '# kind=...' header");
    return c;
  }
};

inline SpectrumCurve tau_curve_at_level(const MassTree& t, long j, const std::vector<double>& qs) {
  SpectrumCurve c;
  c.kind = CurveKind::TauOfQ;
  c.add_meta("j", std::to_string(j));
  for (double q : qs) c.pts.emplace_back(q, tau_hat(t, j, q));
  return c;
}

inline SpectrumCurve tau_curve_estimate(const MassTree& t, const std::vector<double>& qs,
                                        long jmin, long jmax, TauMethod method) {
  SpectrumCurve c;
  c.kind = CurveKind::TauOfQ;
  c.add_meta("j", std::to_string(jmin) + ":" + std::to_string(jmax));
  c.add_meta("method", method == TauMethod::Min ? "min" : "slope");
  for (double q : qs) c.pts.emplace_back(q, tau_estimate(t, q, jmin, jmax, method));
  return c;
}

struct LegendreValue {
  double value;
  double attained_q;
  bool boundary;  // attained at an end of the q grid: the true inf may lie outside
};

// inf over the sampled q of (q h - tau(q)); ties keep the smallest q.
inline LegendreValue legendre(const SpectrumCurve& tau, double h) {
  if (tau.kind != CurveKind::TauOfQ) throw Error("legendre needs a tau-of-q curve");
  if (tau.pts.empty()) throw Error("legendre on an empty curve");
  LegendreValue best{std::numeric_limits<double>::infinity(), 0, false};
  std::size_t arg = 0;
  for (std::size_t i = 0; i < tau.pts.size(); ++i) {
    double v = tau.pts[i].first * h - tau.pts[i].second;
    if (v < best.value) {
      best.value = v;
      best.attained_q = tau.pts[i].first;
      arg = i;
    }
  }
  best.boundary = (arg == 0 || arg == tau.pts.size() - 1);
  return best;
}

inline SpectrumCurve legendre_curve(const SpectrumCurve& tau, const std::vector<double>& hs) {
  SpectrumCurve c;
  c.kind = CurveKind::LegendreOfH;
  std::size_t flagged = 0;
  for (double h : hs) {
    LegendreValue lv = legendre(tau, h);
    c.pts.emplace_back(h, lv.value);
    flagged += lv.boundary;
  }
  c.add_meta("boundary_flagged", std::to_string(flagged));
  return c;
}

// Local scaling exponent log2 mu(I_j(x)) / (-j); +inf on uncharged cubes.
inline double cube_exponent(const MassTree& t, const Point& x, long j) {
  if (j < 1) throw Error("cube_exponent needs level j >= 1");
  if (t.mode() != MassMode::log2)
    throw Error("cube_exponent needs a log2-mode tree; convert explicitly");
  double logm = t.cube_log2_mass(containing_cube(x, j));
  if (std::isinf(logm)) return std::numeric_limits<double>::infinity();
  return logm / -static_cast<double>(j);
}

// Histogram of level-j exponents in bins of width eps centered at integer
// multiples of eps; value log2(count)/j. Empty bins are omitted; uncharged
// cubes (exponent +inf) never enter.
inline SpectrumCurve coarse_spectrum(const MassTree& t, long j, double eps) {
  if (j < 1) throw Error("coarse_spectrum needs level j >= 1");
  if (!(eps > 0)) throw Error("coarse_spectrum needs eps > 0");
  if (t.mode() != MassMode::log2)
    throw Error("coarse_spectrum needs a log2-mode tree; convert explicitly");
  const auto& lev = t.level_log(j);
  std::map<long long, unsigned long long> bins;
  for (const auto& [key, logm] : lev) {
    double alpha = logm / -static_cast<double>(j);
    long long bin = static_cast<long long>(std::floor(alpha / eps + 0.5));
    ++bins[bin];
  }
  SpectrumCurve c;
  c.kind = CurveKind::CoarseOfH;
  c.add_meta("j", std::to_string(j));
  c.add_meta("eps", fmt_g(eps));
  for (const auto& [bin, count] : bins)
    c.pts.emplace_back(static_cast<double>(bin) * eps,
                       std::log2(static_cast<double>(count)) / static_cast<double>(j));
  return c;
}

}  // namespace mfa
