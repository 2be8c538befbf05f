#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dstop/discounts.hpp"
#include "dstop/examples_catalog.hpp"

using namespace dstop;

TEST_CASE("exponential model evaluates its closed form") {
  DiscountModel m = DiscountModel::exponential(0.4);
  CHECK(m.value(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  // Frozen: exp(-0.4) to 30-digit precision.
  CHECK(m.value(1.0) == doctest::Approx(0.670320046035639301).epsilon(1e-14));
  CHECK(m.derivative(1.0) == doctest::Approx(-0.4 * 0.670320046035639301).epsilon(1e-13));
  CHECK(m.log_derivative(0.3) == doctest::Approx(-0.4).epsilon(1e-13));
  CHECK(m.limit_at_infinity() == 0.0);
  CHECK(std::isinf(m.domain_end()));

  DiscountModel flat = DiscountModel::exponential(0.0, 2.5);
  CHECK(flat.value(7.0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(flat.limit_at_infinity() == 2.5);
}

TEST_CASE("linear model evaluates its closed form") {
  DiscountModel m = DiscountModel::linear(1.0, -0.5);
  CHECK(m.value(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.value(1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.derivative(0.77) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(m.log_derivative(1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_FALSE(m.limit_at_infinity().has_value());  // heads below zero

  DiscountModel constant = DiscountModel::linear(0.8, 0.0);
  CHECK(constant.limit_at_infinity() == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("smoothed step is flat then infinitely smooth through the center") {
  const double k = 1000.0, s = 0.5;
  CHECK(smoothed_step(0.2, s, k) == 0.0);
  CHECK(smoothed_step(0.5, s, k) == 0.0);
  CHECK(smoothed_step_derivative(0.5, s, k) == 0.0);
  // Frozen: exp(-1/(1000 * 0.1)) = exp(-0.01).
  CHECK(smoothed_step(0.6, s, k) == doctest::Approx(0.990049833749168054).epsilon(1e-14));
  // d/dt exp(-1/(k(t-s))) = value / (k (t-s)^2).
  CHECK(smoothed_step_derivative(0.6, s, k) ==
        doctest::Approx(0.0990049833749168054).epsilon(1e-13));
  // The function rises toward 1.
  CHECK(smoothed_step(100.0, s, k) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(smoothed_step(0.7, s, k) > smoothed_step(0.6, s, k));
}

TEST_CASE("step-mix model combines trend and steps") {
  // 1 - 0.1 t - 0.5 * step(t; 0.5, 1000): the second survival curve of
  // the stepped catalog row.
  DiscountModel m = DiscountModel::smoothed_step_mix(
      1.0, -0.1, {{-0.5, 0.5}}, 1000.0);
  CHECK(m.value(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(m.value(0.3) == doctest::Approx(0.97).epsilon(1e-14));  // step inactive
  // Frozen: 0.94 - 0.5 * exp(-0.01).
  CHECK(m.value(0.6) == doctest::Approx(0.444975083125415973).epsilon(1e-13));
  CHECK(m.derivative(0.6) == doctest::Approx(-0.149502491687458403).epsilon(1e-12));
  CHECK_FALSE(m.limit_at_infinity().has_value());  // sloped

  DiscountModel flat_mix = DiscountModel::smoothed_step_mix(
      1.0, 0.0, {{-0.25, 0.3}, {-0.25, 0.6}}, 50.0);
  // Steps saturate at their weights: limit = 1 - 0.25 - 0.25.
  CHECK(flat_mix.limit_at_infinity() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("tabulated model interpolates its knots and guards its domain") {
  // Knots sampled from exp(-t) with true slopes.
  std::vector<double> t{0.0, 0.5, 1.0, 2.0};
  std::vector<double> c, dc;
  for (double ti : t) {
    c.push_back(std::exp(-ti));
    dc.push_back(-std::exp(-ti));
  }
  DiscountModel m = DiscountModel::tabulated(t, c, dc);
  CHECK(m.value(0.5) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  // Cubic Hermite of exp on a 0.5-wide segment: ~1e-5 accurate.
  CHECK(m.value(0.25) == doctest::Approx(std::exp(-0.25)).epsilon(1e-4));
  CHECK(m.domain_end() == 2.0);
  CHECK_THROWS_AS(m.value(2.5), std::domain_error);
  CHECK_FALSE(m.limit_at_infinity().has_value());
  m.declare_limit_at_infinity(0.0);
  CHECK(m.limit_at_infinity() == 0.0);
}

TEST_CASE("factory validation rejects malformed parameters") {
  CHECK_THROWS_AS(DiscountModel::exponential(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(DiscountModel::exponential(0.4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(DiscountModel::linear(-1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(DiscountModel::smoothed_step_mix(1.0, 0.0, {}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(DiscountModel::exponential(0.4).scaled(-2.0), std::invalid_argument);
}

TEST_CASE("negative time and vanishing value are domain errors") {
  DiscountModel m = DiscountModel::linear(1.0, -1.0);
  CHECK_THROWS_AS(m.value(-0.01), std::domain_error);
  CHECK_THROWS_AS(m.derivative(-1.0), std::domain_error);
  CHECK_THROWS_AS(m.log_derivative(1.0), std::domain_error);  // c(1) = 0
}

TEST_CASE("scaled returns the same curve times a constant") {
  DiscountModel m = DiscountModel::exponential(1.0).scaled(3.0);
  CHECK(m.value(1.0) == doctest::Approx(3.0 * std::exp(-1.0)).epsilon(1e-14));
  CHECK(m.log_derivative(1.0) == doctest::Approx(-1.0).epsilon(1e-13));  // scale cancels
  CHECK(m.limit_at_infinity() == 0.0);
}

TEST_CASE("problem contract accepts the catalog and rejects bad fields") {
  for (const ExampleRow& row : example_catalog()) CHECK_NOTHROW(check_problem(row.spec));

  ProblemSpec bad = example_catalog().front().spec;
  bad.signal_gap = 0.0;
  CHECK_THROWS_AS(check_problem(bad), std::invalid_argument);
  bad = example_catalog().front().spec;
  bad.low_drift = 0.5;  // b must be <= 0
  CHECK_THROWS_AS(check_problem(bad), std::invalid_argument);
  bad = example_catalog().front().spec;
  bad.low_drift = -3.0;  // a + b < 0
  CHECK_THROWS_AS(check_problem(bad), std::invalid_argument);
  bad = example_catalog().front().spec;
  bad.prior = 1.0;
  CHECK_THROWS_AS(check_problem(bad), std::invalid_argument);
  bad = example_catalog().front().spec;
  bad.horizon = 0.0;
  CHECK_THROWS_AS(check_problem(bad), std::invalid_argument);
}

TEST_CASE("embedding scales survival curves by the drift weights") {
  DiscountModel s0 = DiscountModel::exponential(0.4);
  DiscountModel s1 = DiscountModel::exponential(1.0);

  DiscountPair pair = embed_original(2.0, -1.0, s0, s1);
  CHECK(pair.c0.value(0.0) == doctest::Approx(1.0).epsilon(1e-15));   // -b = 1
  CHECK(pair.c1.value(0.0) == doctest::Approx(1.0).epsilon(1e-15));   // a+b = 1
  CHECK(pair.deadline_interpretable);
  REQUIRE(pair.survival0.has_value());
  CHECK(pair.survival0->value(1.0) == doctest::Approx(0.670320046035639301).epsilon(1e-14));

  DiscountPair half = embed_original(2.0, -0.5, s0, s1);
  CHECK(half.c0.value(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(half.c1.value(0.0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(half.mode == AssumptionMode::strict);

  DiscountPair relaxed = embed_original(2.0, -1.0, s0, s1, AssumptionMode::relaxed);
  CHECK(relaxed.mode == AssumptionMode::relaxed);
}

TEST_CASE("embedding rejects degenerate drift weights") {
  DiscountModel s = DiscountModel::exponential(1.0);
  CHECK_THROWS_AS(embed_original(0.0, -1.0, s, s), std::invalid_argument);
  CHECK_THROWS_AS(embed_original(2.0, 0.0, s, s), std::invalid_argument);    // b = 0
  CHECK_THROWS_AS(embed_original(2.0, -2.0, s, s), std::invalid_argument);   // a + b = 0
  CHECK_THROWS_AS(embed_original(2.0, 0.5, s, s), std::invalid_argument);    // b > 0
}

TEST_CASE("deadline interpretation needs genuine survival curves") {
  // A growing curve is not a survival function even though the embedded
  // problem is perfectly solvable.
  DiscountModel growing = DiscountModel::linear(1.0 / 3.0, 2.0 / 3.0);
  DiscountModel s1 = DiscountModel::exponential(2.0);
  DiscountPair pair = embed_original(2.0, -1.0, growing, s1);
  CHECK_FALSE(pair.deadline_interpretable);

  // Value 0.9 at t = 0 disqualifies as well.
  DiscountModel low = DiscountModel::exponential(1.0, 0.9);
  CHECK_FALSE(embed_original(2.0, -1.0, low, s1).deadline_interpretable);
}

TEST_CASE("catalog discount values at the horizon match frozen constants") {
  struct Expect {
    const char* name;
    double c0_at_1, c1_at_1;
  };
  // 30-digit reference arithmetic, truncated to double.
  const Expect table[] = {
      {"exp-base", 0.670320046035639301, 0.367879441171442322},
      {"exp-strong-signal", 0.670320046035639301, 1.839397205857211608},
      {"exp-mild-penalty", 0.335160023017819650, 0.551819161757163482},
      {"linear-growth-penalty", 0.707106781186547524, 0.287089489531232772},
      {"linear-reward", 0.612626394184416069, 1.5},
      {"stepped-decay", 0.111610486673212906, 0.668331667777222444},
  };
  for (const Expect& e : table) {
    const ExampleRow* row = find_example(e.name);
    REQUIRE(row != nullptr);
    CHECK(row->spec.discounts.c0.value(1.0) == doctest::Approx(e.c0_at_1).epsilon(1e-13));
    CHECK(row->spec.discounts.c1.value(1.0) == doctest::Approx(e.c1_at_1).epsilon(1e-13));
    // All rows weigh a full unit of claim value at t = 0.
    CHECK(row->spec.discounts.c0.value(0.0) + row->spec.discounts.c1.value(0.0) ==
          doctest::Approx(row->spec.signal_gap == 6.0 ? 6.0
                          : e.name == std::string("linear-reward") ? 4.0
                          : e.name == std::string("linear-growth-penalty")
                              ? 2.357022603955158414
                              : 2.0)
              .epsilon(1e-12));
  }
}

TEST_CASE("exponential catalog rows satisfy the full assumption set") {
  for (const char* name : {"exp-base", "exp-strong-signal", "exp-mild-penalty"}) {
    const ExampleRow* row = find_example(name);
    REQUIRE(row != nullptr);
    ValidationReport rep = validate_assumptions(row->spec.discounts, 1.0);
    CHECK(rep.strict_ok());
    CHECK(rep.relaxed_ok());
    CHECK(rep.boundary_conditions_ok());
    CHECK(rep.passes());
    CHECK(rep.grid_n == 10001);
    CHECK(rep.horizon == 1.0);
  }
}

TEST_CASE("growing-penalty row fails strict but passes its declared relaxed mode") {
  const ExampleRow* row = find_example("linear-growth-penalty");
  REQUIRE(row != nullptr);
  ValidationReport rep = validate_assumptions(row->spec.discounts, 1.0);
  CHECK_FALSE(rep.strict_ok());
  CHECK_FALSE(rep.entry("monotone_decay"));  // the penalty curve grows
  CHECK(rep.relaxed_ok());
  CHECK(rep.entry("sum_monotone"));
  CHECK(rep.entry("one_curve_monotone"));
  CHECK(rep.mode == AssumptionMode::relaxed);
  CHECK(rep.passes());
}

TEST_CASE("stepped row genuinely violates the log-derivative gap") {
  // Right after the penalty curve's first step the penalty decays much
  // faster than the reward, so the relative-decay ordering flips. This
  // is a property of the curves, not a numerical artifact; the row is
  // catalogued for boundary-shape work, and solve-time validation is
  // expected to reject it in either mode.
  const ExampleRow* row = find_example("stepped-decay");
  REQUIRE(row != nullptr);
  ValidationReport rep = validate_assumptions(row->spec.discounts, 1.0);
  CHECK_FALSE(rep.entry("log_derivative_gap"));
  CHECK_FALSE(rep.strict_ok());
  CHECK_FALSE(rep.relaxed_ok());
  CHECK_FALSE(rep.passes());

  const ValidationEntry* gap = nullptr;
  for (const auto& e : rep.entries)
    if (e.name == "log_derivative_gap") gap = &e;
  REQUIRE(gap != nullptr);
  REQUIRE(gap->witness_t.has_value());
  // The first violation sits just past the first step center at t = 1/3.
  CHECK(*gap->witness_t > 1.0 / 3.0);
  CHECK(*gap->witness_t < 1.0 / 3.0 + 0.01);

  // Everything else about the curves is fine.
  CHECK(rep.entry("positivity"));
  CHECK(rep.entry("smoothness"));
  CHECK(rep.entry("monotone_decay"));
  CHECK(rep.entry("bounded_slopes"));
}

TEST_CASE("validation rejects malformed requests") {
  const DiscountPair& pair = example_catalog().front().spec.discounts;
  CHECK_THROWS_AS(validate_assumptions(pair, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(validate_assumptions(pair, 1.0, 2), std::invalid_argument);

  std::vector<double> t{0.0, 1.0};
  DiscountPair tab;
  tab.c0 = DiscountModel::tabulated(t, {1.0, 0.5}, {-0.5, -0.5});
  tab.c1 = tab.c0;
  CHECK_THROWS_AS(validate_assumptions(tab, 2.0), std::domain_error);  // beyond knots
  CHECK_NOTHROW(validate_assumptions(tab, 1.0));
}

TEST_CASE("report entry lookup returns false for unknown names") {
  ValidationReport rep;
  CHECK_FALSE(rep.entry("no_such_check"));
}

TEST_CASE("first zero of a curve is located by bisection") {
  DiscountModel lin = DiscountModel::linear(1.0, -0.5);  // zero at t = 2
  auto z = first_nonpositive(lin, 5.0);
  REQUIRE(z.has_value());
  CHECK(*z == doctest::Approx(2.0).epsilon(1e-8));
  CHECK_FALSE(first_nonpositive(lin, 1.5).has_value());

  DiscountModel e = DiscountModel::exponential(1.0);
  CHECK_FALSE(first_nonpositive(e, 500.0).has_value());

  CHECK_THROWS_AS(first_nonpositive(lin, 0.0), std::invalid_argument);
}

TEST_CASE("clipped horizon stops at the earlier curve zero") {
  DiscountPair pair;
  pair.c0 = DiscountModel::exponential(0.4);
  pair.c1 = DiscountModel::linear(1.0, -0.5);  // zero at 2
  CHECK(clipped_horizon(pair, 5.0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(clipped_horizon(pair, 1.0) == doctest::Approx(1.0).epsilon(1e-15));

  DiscountPair exp_pair;
  exp_pair.c0 = DiscountModel::exponential(0.4);
  exp_pair.c1 = DiscountModel::exponential(1.0);
  CHECK(clipped_horizon(exp_pair, 7.0) == doctest::Approx(7.0).epsilon(1e-15));
}
