#include <catch2/catch_amalgamated.hpp>

#include <mfa/cli.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using namespace mfa;

namespace {

struct RunResult {
  int code;
  std::string out, err;
};

RunResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("generate writes measure files for every family") {
  RunResult r = run_cli({"generate", "--spec", "pi j=1 d=1", "-o", "cli_pi.mfm"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("wrote atomic measure: d=1 atoms=2 -> cli_pi.mfm"));
  auto m = io::read_measure_file("cli_pi.mfm");
  CHECK(std::get<AtomicMeasure>(m).atoms().size() == 2);

  r = run_cli({"generate", "--spec", "cascade m0=1/4 J=8", "-o", "cli_cascade.mfm"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("wrote mass tree: d=1 depth=8 leaves=256"));

  r = run_cli({"generate", "--spec", "mun n=1 grid=(j=1 d=1 weights=1/3,2/3)", "--tree-depth",
               "2", "-o", "cli_mun.mfm"});
  CHECK(r.code == 0);
  auto mt = io::read_measure_file("cli_mun.mfm");
  CHECK(std::get<MassTree>(mt).cube_mass(CubeIndex(2, {Int(2)})) == Rat(9, 16));

  r = run_cli({"generate", "--spec", "pi j=1 d=1", "--tree-depth", "1", "--log2", "-o",
               "cli_pi_log.mfm"});
  CHECK(r.code == 0);
  auto lt = io::read_measure_file("cli_pi_log.mfm");
  CHECK(std::get<MassTree>(lt).mode() == MassMode::log2);

  r = run_cli({"generate", "--spec", "banana x=1", "-o", "cli_nope.mfm"});
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("unknown generator"));
}

TEST_CASE("tau curves from the command line match the closed form") {
  REQUIRE(run_cli({"generate", "--spec", "cascade m0=1/4 J=8", "-o", "cli_cascade.mfm"}).code == 0);

  RunResult r = run_cli({"tau", "-i", "cli_cascade.mfm", "--q", "-2:3:1/2", "--j", "2:8",
                         "--method", "min", "--per-j", "cli_tau_perj.csv", "-o", "cli_tau.csv"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("tau-of-q: 11 points, j=2:8 -> cli_tau.csv"));

  std::ifstream f("cli_tau.csv");
  SpectrumCurve curve = SpectrumCurve::read_csv(f);
  REQUIRE(curve.pts.size() == 11);
  CascadeSpec spec{Rat(1, 4), Rat(3, 4), 8};
  for (const auto& [q, v] : curve.pts) CHECK_THAT(v, WithinAbs(cascade_tau(spec, q), 1e-9));

  std::string perj = slurp("cli_tau_perj.csv");
  CHECK_THAT(perj, ContainsSubstring("# kind=tau-per-level j=2:8"));
  CHECK_THAT(perj, ContainsSubstring("# columns q,j,tau_hat"));
  CHECK_THAT(perj, ContainsSubstring("-2,2,"));

  r = run_cli({"tau", "-i", "cli_cascade.mfm", "--q", "0:2:1", "--j", "2:8", "--method",
               "banana", "-o", "cli_tau2.csv"});
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("--method must be min or slope"));

  r = run_cli({"tau", "-i", "no_such.mfm", "--q", "0:2:1", "--j", "2:8", "-o", "cli_tau3.csv"});
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("cannot open"));
}

TEST_CASE("legendre, coarse, and exponent pipelines run end to end") {
  REQUIRE(run_cli({"generate", "--spec", "cascade m0=1/4 J=8", "-o", "cli_cascade.mfm"}).code == 0);
  REQUIRE(run_cli({"tau", "-i", "cli_cascade.mfm", "--q", "-2:4:1/4", "--j", "8", "-o",
                   "cli_tau.csv"})
              .code == 0);

  RunResult r = run_cli({"legendre", "-i", "cli_tau.csv", "--h", "1/2:1:1/4", "-o", "cli_leg.csv"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("legendre-of-h: 3 points"));
  std::ifstream lf("cli_leg.csv");
  SpectrumCurve leg = SpectrumCurve::read_csv(lf);
  CHECK(leg.kind == CurveKind::LegendreOfH);
  REQUIRE(leg.pts.size() == 3);

  // feeding a non-tau curve back into legendre is a data error
  r = run_cli({"legendre", "-i", "cli_leg.csv", "--h", "1/2:1:1/4", "-o", "cli_leg2.csv"});
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("must be a tau-of-q curve"));

  r = run_cli({"coarse", "-i", "cli_cascade.mfm", "--j", "2", "--eps", "1/4", "-o",
               "cli_coarse.csv"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("coarse-of-h: 3 occupied bins at j=2"));

  r = run_cli({"exponent", "-i", "cli_cascade.mfm", "--x", "0", "--j", "4", "-o", "cli_exp.csv"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("exponent = 2 ->"));
  std::ifstream ef("cli_exp.csv");
  SpectrumCurve exps = SpectrumCurve::read_csv(ef);
  REQUIRE(exps.pts.size() == 4);
  for (const auto& [j, a] : exps.pts) CHECK_THAT(a, WithinAbs(2.0, 1e-12));
}

TEST_CASE("distance subcommand reports exact values, plans, and certificates") {
  REQUIRE(run_cli({"generate", "--spec", "pi j=1 d=1", "-o", "cli_pi.mfm"}).code == 0);
  REQUIRE(run_cli({"generate", "--spec", "grid j=1 d=1 weights=1/2,1/2", "-o", "cli_nu.mfm"})
              .code == 0);

  RunResult r = run_cli({"distance", "-a", "cli_pi.mfm", "-b", "cli_nu.mfm", "--plan",
                         "cli_plan.txt", "--certificate"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("distance = 1/4 (= 0.25)"));
  CHECK_THAT(r.out, ContainsSubstring("pivots = "));
  CHECK_THAT(r.out, ContainsSubstring("== transport optimality certificate"));
  CHECK_THAT(r.out, ContainsSubstring("PASS witness-integral"));
  std::string plan = slurp("cli_plan.txt");
  CHECK_THAT(plan, ContainsSubstring("# transport plan: exact, objective 1/4"));
  CHECK_THAT(plan, ContainsSubstring("move "));

  // numeric path: cap below the atom count, certificate must refuse
  r = run_cli({"distance", "-a", "cli_pi.mfm", "-b", "cli_nu.mfm", "--exact-cap", "2"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("distance ~ 0.25 (duality gap <= 0)"));
  r = run_cli({"distance", "-a", "cli_pi.mfm", "-b", "cli_nu.mfm", "--exact-cap", "2",
               "--certificate"});
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("raise --exact-cap"));
}

TEST_CASE("verify-mun runs the blend checks") {
  RunResult r = run_cli({"verify-mun", "--d", "1", "--jn", "1", "--n", "1", "--weights",
                         "1/3,2/3", "--theta", "3/2", "--eps", "2", "--points", "1/8;0"});
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("== floor inequality for the blended measure"));
  CHECK_THAT(r.out, ContainsSubstring("PASS uniform-floor-identity"));
  CHECK_THAT(r.out, ContainsSubstring("== blend distance identity"));
  CHECK_THAT(r.out, ContainsSubstring("PASS scaling-identity"));
  CHECK_THAT(r.out, ContainsSubstring("== approximation-ball mass floor"));
  CHECK_THAT(r.out, ContainsSubstring("PASS ball-floor[x 0]"));
  CHECK_THAT(r.out, !ContainsSubstring("FAIL"));

  r = run_cli({"verify-mun", "--d", "1", "--jn", "1", "--n", "1", "--weights", "1/2,1/3"});
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("sum to 5/6"));
}

TEST_CASE("cantor subcommands cover the schedule toolbox") {
  std::vector<std::string> base{"--theta", "2", "--levels", "2,6", "--d", "1"};

  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), base.begin(), base.end());
    return head;
  };

  RunResult r = run_cli(with({"cantor", "validate"}));
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("== schedule strictness (theta=2, P=2)"));
  CHECK_THAT(r.out, ContainsSubstring("NOT-GUARANTEED growth-strict[1->2]"));

  r = run_cli(with({"cantor", "count"}));
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("Delta_1: log2 = 2 (= 4)"));
  CHECK_THAT(r.out, ContainsSubstring("Delta_2: log2 = 2 (= 4)"));
  CHECK_THAT(r.out, ContainsSubstring("generation 2 count: log2 = 4"));

  r = run_cli(with({"cantor", "mass"}));
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("generation 2: node mass log2 = -4"));
  CHECK_THAT(r.out, ContainsSubstring("log2 m / log2 |I| = 0.333333333333"));

  r = run_cli(with({"cantor", "verify-bounds", "--samples", "3", "--seed", "7"}));
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("PASS counting-identity"));
  CHECK_THAT(r.out, ContainsSubstring("PASS first-branching-full-grid"));
  CHECK_THAT(r.out, !ContainsSubstring("FAIL"));

  r = run_cli(with({"cantor", "verify-borel", "--box", "3/32,1/8", "--box", "21/128,23/128"}));
  CHECK(r.code == 0);
  CHECK_THAT(r.out, ContainsSubstring("== box-measure regularity (P=2)"));
  CHECK_THAT(r.out, ContainsSubstring("PASS regularity[box 0]"));
  CHECK_THAT(r.out, !ContainsSubstring("FAIL"));

  r = run_cli(with({"cantor", "verify-borel"}));
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("needs at least one --box"));

  r = run_cli({"cantor", "validate", "--theta", "3/2", "--levels", "2,3"});
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("theta * J_p must be an integer"));
}

TEST_CASE("usage errors exit with code 2") {
  RunResult r = run_cli({"frobnicate"});
  CHECK(r.code == 2);

  r = run_cli({});
  CHECK(r.code == 2);

  r = run_cli({"tau", "-i", "x.mfm"});  // missing required options
  CHECK(r.code == 2);

  r = run_cli({"--help"});
  CHECK(r.code == 0);  // help is a success exit
  CHECK_THAT(r.out, ContainsSubstring("exact multifractal analysis"));
}

TEST_CASE("a failing check line flips the exit to 1") {
  cli::detail_cli::Outcome oc;
  Report good;
  good.title = "ok";
  good.pass("fine", "nothing to see");
  std::ostringstream sink;
  oc.take(good, sink);
  CHECK_FALSE(oc.any_fail);
  Report bad;
  bad.title = "broken";
  bad.fail("broken-check", "synthetic failure");
  oc.take(bad, sink);
  CHECK(oc.any_fail);
  CHECK_THAT(sink.str(), ContainsSubstring("FAIL broken-check"));
}

TEST_CASE("identical invocations are byte-identical") {
  REQUIRE(run_cli({"generate", "--spec", "cascade m0=1/3 J=6", "-o", "cli_det1.mfm"}).code == 0);
  REQUIRE(run_cli({"generate", "--spec", "cascade m0=1/3 J=6", "-o", "cli_det2.mfm"}).code == 0);
  CHECK(slurp("cli_det1.mfm") == slurp("cli_det2.mfm"));

  std::vector<std::string> tau_args{"tau", "-i", "cli_det1.mfm", "--q", "-1:2:1/4",
                                    "--j", "2:6",         "-o",   "cli_det1.csv"};
  RunResult a = run_cli(tau_args);
  std::string first_csv = slurp("cli_det1.csv");
  RunResult b = run_cli(tau_args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(first_csv == slurp("cli_det1.csv"));

  RunResult c1 = run_cli({"cantor", "verify-bounds", "--theta", "2", "--levels", "2,6", "--seed",
                          "3"});
  RunResult c2 = run_cli({"cantor", "verify-bounds", "--theta", "2", "--levels", "2,6", "--seed",
                          "3"});
  CHECK(c1.code == c2.code);
  CHECK(c1.out == c2.out);
}
