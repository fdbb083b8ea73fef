#pragma once

// Plain-text measure files ("mfm v1"):
//
//   mfm v1
//   dim <d>
//   kind atomic
//   atom <x1> ... <xd> <weight>        # rationals as num/den or integers
//
//   mfm v1
//   dim <d>
//   kind masstree
//   depth <J>
//   cube <j> <k1> ... <kd> <mass>      # mass: rational, or log2:<float>
//
// '#' starts a comment; blank lines are ignored. Every stored cube of every
// level must be listed; readers re-validate all structural invariants and
// reject violations naming the first offending line.

#include <mfa/measure.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace mfa::io {

struct ParseError : Error {
  long line;
  ParseError(long ln, const std::string& what)
      : Error("line " + std::to_string(ln) + ": " + what), line(ln) {}
};

using Measure = std::variant<AtomicMeasure, MassTree>;

inline void write_measure(std::ostream& os, const AtomicMeasure& m) {
  os << "mfm v1\n";
  os << "dim " << m.dim() << "\n";
  os << "kind atomic\n";
  for (const Atom& a : m.atoms()) {
    os << "atom";
    for (const Rat& c : a.location.x) os << " " << rat_str(c);
    os << " " << rat_str(a.weight) << "\n";
  }
}

inline void write_measure(std::ostream& os, const MassTree& t) {
  os << "mfm v1\n";
  os << "dim " << t.dim() << "\n";
  os << "kind masstree\n";
  os << "depth " << t.depth() << "\n";
  char buf[64];
  for (long j = 0; j <= t.depth(); ++j) {
    if (t.mode() == MassMode::exact) {
      for (const auto& [key, mass] : t.level_exact(j)) {
        os << "cube " << j;
        for (const Int& k : detail::unpack_key(key, t.dim(), j)) os << " " << k.get_str();
        os << " " << rat_str(mass) << "\n";
      }
    } else {
      for (const auto& [key, logm] : t.level_log(j)) {
        os << "cube " << j;
        for (const Int& k : detail::unpack_key(key, t.dim(), j)) os << " " << k.get_str();
        std::snprintf(buf, sizeof buf, "%.17g", logm);
        os << " log2:" << buf << "\n";
      }
    }
  }
}

namespace detail_io {

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    if (tok[0] == '#') break;
    out.push_back(tok);
  }
  return out;
}

inline long parse_long(const std::string& s, long ln, const char* what) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(ln, std::string("bad ") + what + " '" + s + "'");
  }
}

}  // namespace detail_io

inline Measure read_measure(std::istream& is) {
  using detail_io::parse_long;
  using detail_io::tokenize;

  long ln = 0;
  std::string line;
  auto next_content = [&](std::vector<std::string>& toks) -> bool {
    while (std::getline(is, line)) {
      ++ln;
      toks = tokenize(line);
      if (!toks.empty()) return true;
    }
    return false;
  };

  std::vector<std::string> toks;
  if (!next_content(toks) || toks.size() != 2 || toks[0] != "mfm" || toks[1] != "v1")
    throw ParseError(ln ? ln : 1, "expected header 'mfm v1'");
  if (!next_content(toks) || toks.size() != 2 || toks[0] != "dim")
    throw ParseError(ln, "expected 'dim <d>'");
  long d = parse_long(toks[1], ln, "dimension");
  if (d < 1) throw ParseError(ln, "dimension must be >= 1");
  if (!next_content(toks) || toks.size() != 2 || toks[0] != "kind")
    throw ParseError(ln, "expected 'kind atomic|masstree'");
  std::string kind = toks[1];

  if (kind == "atomic") {
    std::vector<Atom> atoms;
    std::vector<long> atom_lines;
    while (next_content(toks)) {
      if (toks[0] != "atom") throw ParseError(ln, "expected 'atom ...'");
      if (static_cast<long>(toks.size()) != d + 2)
        throw ParseError(ln, "atom needs " + std::to_string(d) + " coordinates and a weight");
      std::vector<Rat> x(d);
      try {
        for (long i = 0; i < d; ++i) x[i] = parse_rat(toks[1 + i]);
        Rat w = parse_rat(toks[1 + d]);
        if (sgn(w) <= 0) throw Error("atom weight must be positive");
        atoms.push_back({Point(std::move(x)), std::move(w)});
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(ln, e.what());
      }
      atom_lines.push_back(ln);
    }
    if (atoms.empty()) throw ParseError(ln ? ln : 1, "atomic measure without atoms");
    try {
      return AtomicMeasure(static_cast<int>(d), std::move(atoms));
    } catch (const Error& e) {
      throw ParseError(atom_lines.back(), e.what());
    }
  }

  if (kind != "masstree") throw ParseError(ln, "unknown kind '" + kind + "'");

  if (!next_content(toks) || toks.size() != 2 || toks[0] != "depth")
    throw ParseError(ln, "expected 'depth <J>'");
  long depth = parse_long(toks[1], ln, "depth");

  MassTree exact_t(static_cast<int>(d), depth, MassMode::exact);
  MassTree log_t(static_cast<int>(d), depth, MassMode::log2);
  std::vector<MassTree::Level<Rat>> exact_levels(depth + 1);
  std::vector<MassTree::Level<double>> log_levels(depth + 1);
  std::map<std::pair<long, MassTree::PackedKey>, long> line_of;
  int mode_seen = -1;  // 0 exact, 1 log2

  while (next_content(toks)) {
    if (toks[0] != "cube") throw ParseError(ln, "expected 'cube ...'");
    if (static_cast<long>(toks.size()) != d + 3)
      throw ParseError(ln, "cube needs level, " + std::to_string(d) + " indices, and a mass");
    long j = parse_long(toks[1], ln, "cube level");
    if (j < 0 || j > depth) throw ParseError(ln, "cube level outside [0, depth]");
    std::vector<Int> k(d);
    Int top = pow2z(static_cast<unsigned long>(j));
    for (long i = 0; i < d; ++i) {
      if (mpz_set_str(k[i].get_mpz_t(), toks[2 + i].c_str(), 10) != 0)
        throw ParseError(ln, "bad cube index '" + toks[2 + i] + "'");
      if (k[i] < 0 || k[i] >= top) throw ParseError(ln, "cube index out of range");
    }
    MassTree::PackedKey key = detail::pack_key(k, j);
    auto [it, fresh] = line_of.emplace(std::make_pair(j, key), ln);
    if (!fresh) throw ParseError(ln, "duplicate cube (first at line " + std::to_string(it->second) + ")");

    const std::string& mtok = toks[2 + d];
    bool is_log = mtok.rfind("log2:", 0) == 0;
    if (mode_seen == -1)
      mode_seen = is_log ? 1 : 0;
    else if (mode_seen != (is_log ? 1 : 0))
      throw ParseError(ln, "mixing exact and log2 masses in one tree");

    if (is_log) {
      std::string num = mtok.substr(5);
      try {
        std::size_t pos = 0;
        double v = std::stod(num, &pos);
        if (pos != num.size()) throw std::invalid_argument(num);
        if (!(v <= 0) || std::isnan(v)) throw ParseError(ln, "log2 mass must be <= 0");
        log_levels[j].emplace_back(key, v);
      } catch (const ParseError&) {
        throw;
      } catch (const std::exception&) {
        throw ParseError(ln, "bad log2 mass '" + num + "'");
      }
    } else {
      Rat mass;
      try {
        mass = parse_rat(mtok);
      } catch (const Error& e) {
        throw ParseError(ln, e.what());
      }
      if (sgn(mass) < 0) throw ParseError(ln, "negative cube mass");
      if (sgn(mass) == 0) continue;  // zero-mass cubes are simply uncharged
      if (mass > 1) throw ParseError(ln, "cube mass above 1");
      exact_levels[j].emplace_back(key, std::move(mass));
    }
  }

  if (mode_seen == -1) throw ParseError(ln ? ln : 1, "mass tree without cubes");

  auto sort_level = [](auto& lev) {
    std::sort(lev.begin(), lev.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  };

  long first_cube_line = 0;
  for (const auto& [lk, lline] : line_of)
    if (first_cube_line == 0 || lline < first_cube_line) first_cube_line = lline;

  // locate the first line whose cube breaks a structural invariant
  auto blame = [&](long j, MassTree::PackedKey key) -> long {
    auto it = line_of.find({j, key});
    return it != line_of.end() ? it->second : first_cube_line;
  };
  auto locate = [&](const auto& levels, auto mass_of, auto agree) -> std::pair<long, std::string> {
    if (levels[0].empty()) return {first_cube_line, "tree is missing the root cube"};
    if (!agree(mass_of(levels[0][0].second), decltype(mass_of(levels[0][0].second))(1)))
      return {blame(0, 0), "root cube must carry mass 1"};
    for (long j = 1; j <= depth; ++j) {
      const auto& kids = levels[j];
      const auto& pars = levels[j - 1];
      std::size_t pi = 0, t = 0;
      while (t < kids.size()) {
        MassTree::PackedKey pk = detail::parent_key(kids[t].first, static_cast<int>(d), j);
        long first_child_line = blame(j, kids[t].first);
        auto sum = mass_of(kids[t].second);
        ++t;
        while (t < kids.size() &&
               detail::parent_key(kids[t].first, static_cast<int>(d), j) == pk)
          sum = sum + mass_of(kids[t++].second);
        if (pi < pars.size() && pars[pi].first < pk)
          return {blame(j - 1, pars[pi].first),
                  "cube at level " + std::to_string(j - 1) + " has no children"};
        if (pi == pars.size() || pars[pi].first != pk)
          return {first_child_line, "cube at level " + std::to_string(j) + " has no parent"};
        if (!agree(sum, mass_of(pars[pi].second)))
          return {blame(j - 1, pars[pi].first),
                  "cube mass at level " + std::to_string(j - 1) +
                      " does not match the sum of its children"};
        ++pi;
      }
      if (pi < pars.size())
        return {blame(j - 1, pars[pi].first),
                "cube at level " + std::to_string(j - 1) + " has no children"};
    }
    return {0, ""};
  };

  std::pair<long, std::string> found{0, ""};
  if (mode_seen == 0) {
    for (auto& lev : exact_levels) sort_level(lev);
    found = locate(
        exact_levels, [](const Rat& r) { return r; },
        [](const Rat& a, const Rat& b) { return a == b; });
  } else {
    for (auto& lev : log_levels) sort_level(lev);
    found = locate(
        log_levels, [](double v) { return std::exp2(v); },
        [](double a, double b) { return std::abs(a / b - 1.0) <= 1.001e-9; });
  }
  if (found.first != 0) throw ParseError(found.first, found.second);

  try {
    if (mode_seen == 0) {
      exact_t.set_levels_exact(std::move(exact_levels));
      return exact_t;
    }
    log_t.set_levels_log2(std::move(log_levels));
    return log_t;
  } catch (const Error& e) {
    throw ParseError(first_cube_line ? first_cube_line : 1, e.what());
  }
}

inline Measure read_measure_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  return read_measure(f);
}

inline void write_measure_file(const std::string& path, const Measure& m) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path + "'");
  std::visit([&](const auto& v) { write_measure(f, v); }, m);
}

}  // namespace mfa::io
