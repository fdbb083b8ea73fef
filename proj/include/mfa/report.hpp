#pragma once

// Verification reports: a list of named checks with PASS / FAIL / SKIP /
// NOT-GUARANTEED status. FAIL is reserved for facts the inputs guarantee;
// observations outside the guaranteed regime are reported, never failed.

#include <mfa/rational.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace mfa {

enum class CheckStatus { Pass, Fail, Skip, NotGuaranteed };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "PASS";
    case CheckStatus::Fail: return "FAIL";
    case CheckStatus::Skip: return "SKIP";
    case CheckStatus::NotGuaranteed: return "NOT-GUARANTEED";
  }
  return "?";
}

struct CheckLine {
  std::string name;
  CheckStatus status;
  std::string detail;
};

struct Report {
  std::string title;
  std::vector<CheckLine> lines;

  void add(std::string name, CheckStatus status, std::string detail = {}) {
    lines.push_back({std::move(name), status, std::move(detail)});
  }
  void pass(std::string name, std::string detail = {}) {
    add(std::move(name), CheckStatus::Pass, std::move(detail));
  }
  void fail(std::string name, std::string detail = {}) {
    add(std::move(name), CheckStatus::Fail, std::move(detail));
  }
  void skip(std::string name, std::string detail = {}) {
    add(std::move(name), CheckStatus::Skip, std::move(detail));
  }

  bool has_fail() const {
    for (const auto& l : lines)
      if (l.status == CheckStatus::Fail) return true;
    return false;
  }
  std::size_t count(CheckStatus s) const {
    std::size_t n = 0;
    for (const auto& l : lines) n += (l.status == s);
    return n;
  }

  void print(std::ostream& os) const {
    if (!title.empty()) os << "== " << title << "\n";
    for (const auto& l : lines) {
      os << to_string(l.status) << " " << l.name;
      if (!l.detail.empty()) os << ": " << l.detail;
      os << "\n";
    }
  }
};

}  // namespace mfa
