#include <catch2/catch_amalgamated.hpp>

#include <mfa/cantor.hpp>

#include <random>

#include "oracles.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using namespace mfa;
using namespace mfa::cantor;

namespace {

const CheckLine* find_line(const Report& rep, const std::string& name) {
  for (const CheckLine& l : rep.lines)
    if (l.name == name) return &l;
  return nullptr;
}

// independent branching count: enumerate every candidate center and test
// closed-ball containment directly
Int brute_force_children(const Schedule& s, const Node& parent) {
  SupBall ball = node_ball(s, parent);
  long Jn = s.J(parent.p + 1);
  Rat r = s.node_radius(parent.p + 1);
  long side = 1L << Jn;
  Int total = 0;
  std::vector<long> k(s.d, 0);
  while (true) {
    bool in = true;
    for (int i = 0; i < s.d && in; ++i) {
      Rat c = Rat(2 * k[i] + 1) * pow2(-(Jn + 1));
      in = (c - r >= ball.lo(i)) && (c + r <= ball.hi(i));
    }
    if (in) ++total;
    int axis = s.d - 1;
    while (axis >= 0) {
      if (++k[axis] < side) break;
      k[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  return total;
}

}  // namespace

TEST_CASE("schedules validate their shape") {
  CHECK_NOTHROW(Schedule(1, Rat(2), {2, 6}));
  CHECK_NOTHROW(Schedule(2, Rat(3, 2), {2, 4}));
  CHECK_THROWS_WITH(Schedule(0, Rat(2), {2}), ContainsSubstring("dimension must be >= 1"));
  CHECK_THROWS_WITH(Schedule(1, Rat(1), {2}), ContainsSubstring("needs theta > 1"));
  CHECK_THROWS_WITH(Schedule(1, Rat(2), {}), ContainsSubstring("at least one level"));
  CHECK_THROWS_WITH(Schedule(1, Rat(2), {4, 4}), ContainsSubstring("increase strictly"));
  CHECK_THROWS_WITH(Schedule(1, Rat(2), {0, 4}), ContainsSubstring("must be positive"));
  CHECK_THROWS_WITH(Schedule(1, Rat(3, 2), {2, 3}),
                    ContainsSubstring("theta * J_p must be an integer"));

  Schedule s(1, Rat(2), {2, 6});
  CHECK(s.P() == 2);
  CHECK(s.J(1) == 2);
  CHECK(s.thetaJ(2) == 12);
  CHECK(s.node_radius(1) == Rat(1, 32));
  CHECK(s.approx_radius(1) == Rat(1, 16));
  CHECK_THROWS_WITH(s.J(3), ContainsSubstring("generation index out of range"));
}

TEST_CASE("growth conditions gate what the schedule guarantees") {
  Schedule tight(1, Rat(2), {2, 6});
  ScheduleChecks c = validate_schedule_checks(tight);
  CHECK_FALSE(c.j1_above_100);
  CHECK_FALSE(c.transitions[0].growth_strict);   // 6 < max(400, 1)
  CHECK_FALSE(c.transitions[0].desk_margin);     // 6 < 16
  CHECK_FALSE(c.transitions[0].growth_ratio);    // 6/2 = 3 < 2*2*1 + 2 = 6
  CHECK(c.generations[1].sum_lower);             // 9 >= 8
  CHECK(c.generations[1].sum_upper);             // 3 >= 0
  CHECK(c.mass_lower_guaranteed(2));
  CHECK_FALSE(c.mass_upper_guaranteed(2));       // needs delta_lower at 1

  Schedule wide(1, Rat(2), {2, 500});
  ScheduleChecks cw = validate_schedule_checks(wide);
  CHECK(cw.transitions[0].growth_strict);        // 500 > 400
  CHECK(cw.transitions[0].desk_margin);          // 500 >= 16
  CHECK(cw.transitions[0].growth_ratio);         // 250 >= 6
  CHECK(cw.delta_lower_guaranteed(1));
  CHECK(cw.mass_upper_guaranteed(2));

  Report rep = validate_schedule(tight);
  CHECK_FALSE(rep.has_fail());  // informational only
  REQUIRE(find_line(rep, "growth-strict[1->2]") != nullptr);
  CHECK(find_line(rep, "growth-strict[1->2]")->status == CheckStatus::NotGuaranteed);
  CHECK(find_line(rep, "first-level-above-100")->status == CheckStatus::NotGuaranteed);
  CHECK(find_line(rep, "level-sum-lower[p=2]")->status == CheckStatus::Pass);
  CHECK(find_line(rep, "mass-bounds-guaranteed[p=2]")->status == CheckStatus::NotGuaranteed);

  Report wrep = validate_schedule(wide);
  CHECK(find_line(wrep, "growth-strict[1->2]")->status == CheckStatus::Pass);
  CHECK(find_line(wrep, "mass-bounds-guaranteed[p=2]")->status == CheckStatus::Pass);
}

TEST_CASE("branching counts match per-axis ranges and brute force") {
  Schedule s(1, Rat(2), {2, 6});
  CHECK(branching_count_level(s, 1) == 4);  // the full level-2 grid
  CHECK(branching_count_level(s, 2) == 4);
  CHECK(generation_count(s, 2) == 16);

  // every generation-1 parent branches identically
  for (long k = 0; k < 4; ++k) {
    Node parent = make_node(s, {{Int(k)}});
    CHECK(branching_count(s, parent) == 4);
    CHECK(branching_count(s, parent) == brute_force_children(s, parent));
  }

  Schedule t(1, Rat(3, 2), {2, 4});
  CHECK(branching_count_level(t, 1) == 4);
  CHECK(branching_count_level(t, 2) == 2);
  Node p0 = first_node(t, 1);
  CHECK(branching_count(t, p0) == brute_force_children(t, p0));

  Schedule q(2, Rat(3, 2), {2, 4});
  CHECK(branching_count_level(q, 1) == 16);
  CHECK(branching_count_level(q, 2) == 4);  // 2 per axis
  CHECK(branching_count(q, first_node(q, 1)) == brute_force_children(q, first_node(q, 1)));
}

TEST_CASE("node addressing is a bijection onto the generation") {
  Schedule s(1, Rat(2), {2, 6});
  std::vector<std::vector<std::vector<Int>>> seen;
  for (long rank = 0; rank < 16; ++rank) {
    Node nd = node_by_rank(s, 2, Int(rank));
    REQUIRE(nd.p == 2);
    for (const auto& prior : seen) CHECK(prior != nd.ks);
    seen.push_back(nd.ks);
    // the validating constructor accepts exactly these addresses
    Node same = make_node(s, nd.ks);
    CHECK(same.ks == nd.ks);
  }
  CHECK_THROWS_WITH(node_by_rank(s, 2, Int(16)),
                    ContainsSubstring("rank beyond the generation size"));
  CHECK_THROWS_WITH(node_by_rank(s, 2, Int(-1)), ContainsSubstring("negative node rank"));

  CHECK_THROWS_WITH(make_node(s, {{Int(0)}, {Int(5)}}),
                    ContainsSubstring("leaves its parent ball at generation 2"));
  CHECK_THROWS_WITH(make_node(s, {{Int(0), Int(0)}}),
                    ContainsSubstring("address dimension mismatch"));

  // first_node is rank 0
  CHECK(first_node(s, 2).ks == node_by_rank(s, 2, Int(0)).ks);
}

TEST_CASE("node masses multiply the branching factors") {
  Schedule s(1, Rat(2), {2, 6});
  Node nd = node_by_rank(s, 2, Int(7));
  FactoredMass fm = node_mass(s, nd);
  REQUIRE(fm.deltas.size() == 2);
  CHECK(fm.deltas[0] == 4);
  CHECK(fm.deltas[1] == 4);
  CHECK(fm.denominator() == 16);
  CHECK(fm.value() == Rat(1, 16));
  CHECK_THAT(fm.log2(), WithinAbs(-4.0, 1e-12));

  CHECK_FALSE(verify_total_mass(s, 2).has_fail());
  CHECK_FALSE(verify_total_mass(s, 1).has_fail());
}

TEST_CASE("integer comparisons against powers of two") {
  CHECK(cmp_int_pow2(Int(8), 3) == 0);
  CHECK(cmp_int_pow2(Int(7), 3) < 0);
  CHECK(cmp_int_pow2(Int(9), 3) > 0);
  CHECK(cmp_int_pow2(Int(5), -2) > 0);

  CHECK(cmp_prod_pow2(Int(8), Rat(3)) == 0);
  CHECK(cmp_prod_pow2(Int(16), Rat(9)) < 0);
  CHECK(cmp_prod_pow2(Int(4), Rat(7, 2)) < 0);   // 16 < 128
  CHECK(cmp_prod_pow2(Int(5), Rat(7, 3)) < 0);   // 125 < 128
  CHECK(cmp_prod_pow2(Int(6), Rat(7, 3)) > 0);   // 216 > 128
  CHECK(cmp_prod_pow2(Int(8), Rat(-1, 2)) > 0);
}

TEST_CASE("branching and mass bounds verify on a tight schedule") {
  Schedule s(1, Rat(2), {2, 6});
  std::vector<Node> samples{node_by_rank(s, 2, Int(0)), node_by_rank(s, 2, Int(15))};
  Report rep = verify_mass_bounds(s, 2, samples);
  CHECK_FALSE(rep.has_fail());

  CHECK(find_line(rep, "first-branching-full-grid")->status == CheckStatus::Pass);
  // Delta_2 = 4 sits inside [2^1, 2^3]
  CHECK(find_line(rep, "branching-window[1->2]")->status == CheckStatus::Pass);
  // Delta_2^2 = 16 < 2^6: the ratio bound fails, but the desk margin is not
  // met, so it is an observation rather than a defect
  const CheckLine* ratio = find_line(rep, "branching-ratio[1->2]");
  REQUIRE(ratio != nullptr);
  CHECK(ratio->status == CheckStatus::NotGuaranteed);
  CHECK_THAT(ratio->detail, ContainsSubstring("observation only"));
  CHECK(find_line(rep, "branching-grid-cap[1->2]")->status == CheckStatus::Pass);

  const CheckLine* ml = find_line(rep, "mass-lower[node 0]");
  REQUIRE(ml != nullptr);
  CHECK(ml->status == CheckStatus::Pass);
  CHECK_THAT(ml->detail, ContainsSubstring("log2 m / log2 |I| = 0.333333333333"));
  CHECK(find_line(rep, "mass-upper[node 1]")->status == CheckStatus::Pass);
}

TEST_CASE("a wide schedule earns guaranteed bounds end to end") {
  // theta = 2, J = (4, 1602): every growth condition holds
  Schedule s(1, Rat(2), {4, 1602});
  ScheduleChecks c = validate_schedule_checks(s);
  CHECK(c.delta_lower_guaranteed(1));
  CHECK(c.mass_lower_guaranteed(2));
  CHECK(c.mass_upper_guaranteed(2));

  CHECK(branching_count_level(s, 1) == 16);
  Int d2 = branching_count_level(s, 2);
  CHECK(cmp_int_pow2(d2, 1594) == 0);  // exactly 2^{J_2 - theta J_1}

  std::vector<Node> samples{first_node(s, 2)};
  Report rep = verify_mass_bounds(s, 2, samples);
  CHECK_FALSE(rep.has_fail());
  for (const char* name : {"branching-window[1->2]", "branching-ratio[1->2]",
                           "mass-lower[node 0]", "mass-upper[node 0]"})
    CHECK(find_line(rep, name)->status == CheckStatus::Pass);
  // log2 m / log2 |I| = 1598/3204, approaching d/theta = 1/2
  CHECK_THAT(find_line(rep, "mass-lower[node 0]")->detail,
             ContainsSubstring("0.498751560549"));

  CHECK_FALSE(verify_total_mass(s, 2).has_fail());
}

TEST_CASE("approximation-set membership is decided by the containing cube") {
  ApproxSet a(1, Rat(2), 2);  // radius 1/16, centers (2k+1)/8
  CHECK(approx_member(Point({Rat(1, 8)}), a));
  CHECK(approx_member(Point({Rat(3, 16)}), a));   // exactly on the rim
  CHECK_FALSE(approx_member(Point({Rat(0)}), a));
  CHECK_FALSE(approx_member(Point({Rat(1, 5)}), a));

  ApproxSet wide(1, Rat(3, 2), 2);  // radius 1/8 = half the spacing: everything
  CHECK(approx_member(Point({Rat(0)}), wide));
  CHECK(approx_member(Point({Rat(1, 2)}), wide));

  CHECK_THROWS_WITH(ApproxSet(1, Rat(3, 2), 3), ContainsSubstring("must be an integer"));
}

TEST_CASE("blended-measure balls around approximation points clear the floor") {
  GridWeights g(1, 1, {Rat(1, 3), Rat(2, 3)});
  MuN mu = mu_n(g, 1);  // J = 2

  std::vector<Point> pts{Point({Rat(1, 8)}), Point({Rat(0)}), Point({Rat(3, 16)})};
  Report rep = ball_mass_lower_bound_check(mu, Rat(3, 2), Rat(2), pts);
  CHECK_FALSE(rep.has_fail());
  for (const CheckLine& l : rep.lines) CHECK(l.status == CheckStatus::Pass);

  // theta = 2 shrinks the set: x = 0 drops out as a skip
  Report rep2 = ball_mass_lower_bound_check(mu, Rat(2), Rat(2), pts);
  CHECK_FALSE(rep2.has_fail());
  const CheckLine* skipped = find_line(rep2, "ball-floor[x 1]");
  REQUIRE(skipped != nullptr);
  CHECK(skipped->status == CheckStatus::Skip);

  CHECK_THROWS_WITH(ball_mass_lower_bound_check(mu, Rat(2), Rat(1), pts),
                    ContainsSubstring("epsilon must exceed 1/(d n)"));
}

TEST_CASE("box counting agrees with the ball layout") {
  Schedule s(1, Rat(2), {2, 6});
  // generation-2 balls under parent k=0 sit at (2m+1)/128, m = 6..9
  Box all({Rat(0)}, {Rat(1)});
  CHECK(count_nodes_meeting(s, Node{}, 2, all) == 16);
  CHECK(box_mass(s, 2, all) == 1);

  Box one({Rat(13, 128) - pow2(-13)}, {Rat(13, 128) + pow2(-13)});
  CHECK(count_nodes_meeting(s, Node{}, 2, one) == 1);
  CHECK(box_mass(s, 2, one) == Rat(1, 16));

  Box gap({Rat(21, 128)}, {Rat(23, 128)});
  CHECK(count_nodes_meeting(s, Node{}, 2, gap) == 0);
  CHECK(box_mass(s, 2, gap) == 0);

  CHECK_THROWS_WITH(count_nodes_meeting(s, Node{}, 2, all, 2),
                    ContainsSubstring("probe box too large"));
}

TEST_CASE("box regularity analysis covers both scale cases") {
  Schedule s(1, Rat(2), {2, 6});
  std::vector<Box> boxes;
  boxes.push_back(Box({Rat(3, 32)}, {Rat(1, 8)}));     // case B: diam 1/32 < 2^{-4}
  boxes.push_back(Box({Rat(21, 128)}, {Rat(23, 128)})); // case B, empty: mass 0
  boxes.push_back(Box({Rat(3, 32)}, {Rat(5, 32)}));    // case A: diam 1/16 = 2^{-theta J_1}
  boxes.push_back(Box({Rat(0)}, {Rat(1, 2)}));         // above 2^{-J_1}: skipped
  boxes.push_back(Box({Rat(1, 4)}, {Rat(1, 4)}));      // degenerate: skipped
  boxes.push_back(Box({Rat(0)}, {Rat(1, 128)}));       // below 2^{-J_P}: skipped

  Report rep = verify_borel_bound(s, 2, boxes);
  CHECK_FALSE(rep.has_fail());

  CHECK(find_line(rep, "refinement[box 0]")->status == CheckStatus::Pass);
  CHECK(find_line(rep, "parent-count[box 0]")->status == CheckStatus::Pass);
  CHECK(find_line(rep, "node-count[box 0]")->status == CheckStatus::Pass);
  CHECK(find_line(rep, "chain-bound[box 0]")->status == CheckStatus::Pass);
  CHECK(find_line(rep, "regularity[box 0]")->status == CheckStatus::Pass);

  CHECK(find_line(rep, "refinement[box 1]")->status == CheckStatus::Pass);
  CHECK_THAT(find_line(rep, "refinement[box 1]")->detail, ContainsSubstring("-inf"));
  CHECK(find_line(rep, "regularity[box 1]")->status == CheckStatus::Pass);

  // the wider box meets one parent ball and all four of its children
  CHECK(find_line(rep, "parent-count[box 2]")->status == CheckStatus::Pass);
  CHECK_THAT(find_line(rep, "parent-count[box 2]")->detail, ContainsSubstring("meets 1"));
  CHECK(find_line(rep, "regularity[box 2]")->status == CheckStatus::Pass);
  CHECK(find_line(rep, "regularity-asymptotic[box 2]")->status == CheckStatus::Pass);

  CHECK(find_line(rep, "scale[box 3]")->status == CheckStatus::Skip);
  CHECK(find_line(rep, "scale[box 4]")->status == CheckStatus::Skip);
  CHECK(find_line(rep, "scale[box 5]")->status == CheckStatus::Skip);
  CHECK_THAT(find_line(rep, "scale[box 5]")->detail,
             ContainsSubstring("deeper generations not constructed"));
}

TEST_CASE("covering terms decay exactly when s theta exceeds d") {
  Schedule s(1, Rat(2), {2, 6});
  std::vector<double> hot = covering_sum_terms(s, Rat(1), 2);
  REQUIRE(hot.size() == 2);
  CHECK(hot[0] == -2.0);
  CHECK(hot[1] == -6.0);
  Report decay = covering_sum_report(s, Rat(1), 2);
  CHECK(find_line(decay, "tail")->status == CheckStatus::Pass);
  CHECK_THAT(find_line(decay, "tail")->detail, ContainsSubstring("terms decrease"));

  std::vector<double> cold = covering_sum_terms(s, Rat(1, 4), 2);
  CHECK(cold[0] == 1.0);
  CHECK(cold[1] == 3.0);
  Report stuck = covering_sum_report(s, Rat(1, 4), 2);
  CHECK(find_line(stuck, "tail")->status == CheckStatus::NotGuaranteed);
  CHECK_THAT(find_line(stuck, "tail")->detail, ContainsSubstring("no decay expected"));
}

TEST_CASE("bounded random integers are deterministic and in range") {
  std::mt19937_64 a(99), b(99);
  Int bound = pow2z(100) + 12345;
  Int r1 = random_int_below(a, bound);
  Int r2 = random_int_below(b, bound);
  CHECK(r1 == r2);
  CHECK(r1 >= 0);
  CHECK(r1 < bound);
  CHECK_THROWS_WITH(random_int_below(a, Int(0)), ContainsSubstring("positive bound"));
}
