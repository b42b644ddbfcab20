#include <doctest.h>

#include <cmath>

#include "hpsmp/errors.hpp"
#include "hpsmp/rng.hpp"
#include "hpsmp/stats.hpp"

using namespace hpsmp;

TEST_CASE("t-distribution quantile reproduces the df=14 critical value") {
  // Two-sided 95% at 14 degrees of freedom.
  const double q = student_t_two_sided_quantile(0.95, 14.0);
  CHECK(std::abs(q - 2.145) < 1e-3);
}

TEST_CASE("t-distribution CDF basics") {
  CHECK(student_t_cdf(0.0, 5.0) == doctest::Approx(0.5));
  CHECK(student_t_cdf(100.0, 5.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(student_t_cdf(-100.0, 5.0) == doctest::Approx(0.0).epsilon(1e-6));
  // Symmetry of the two-sided tail.
  CHECK(student_t_two_sided_p(1.7, 9.0) ==
        doctest::Approx(student_t_two_sided_p(-1.7, 9.0)));
  // Quantile and tail probability invert each other.
  for (double df : {3.0, 14.0, 40.0}) {
    const double q = student_t_two_sided_quantile(0.9, df);
    CHECK(student_t_two_sided_p(q, df) == doctest::Approx(0.1).epsilon(1e-9));
  }
}

TEST_CASE("incomplete beta against hand-checked points") {
  // I_x(1, 1) = x.
  for (double x : {0.1, 0.5, 0.9}) CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x));
  // I_x(1, b) = 1 - (1-x)^b.
  CHECK(incomplete_beta(1.0, 3.0, 0.25) == doctest::Approx(1.0 - std::pow(0.75, 3)));
  CHECK(incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5));  // symmetric arcsine law
}

TEST_CASE("welch t-test on identical series is null") {
  std::vector<double> xs{0.1, 0.2, 0.3, 0.15, 0.22};
  TTestResult r = t_test(xs, xs);
  CHECK(r.t_value == doctest::Approx(0.0));
  CHECK_FALSE(r.reject_at_95);
}

TEST_CASE("welch t-test detects a clear mean shift") {
  std::vector<double> a{1.0, 1.1, 0.9, 1.05, 0.95, 1.02, 0.98, 1.01};
  std::vector<double> b{0.0, 0.1, -0.1, 0.05, -0.05, 0.02, -0.02, 0.01};
  TTestResult r = t_test(a, b);
  CHECK(r.t_value > 2.145);
  CHECK(r.p_value < 0.05);
  CHECK(r.reject_at_95);
}

TEST_CASE("welch t-test flags zero pooled variance") {
  std::vector<double> a{1.0, 1.0, 1.0};
  std::vector<double> b{2.0, 2.0, 2.0};
  TTestResult r = t_test(a, b);
  CHECK_FALSE(r.defined);
}

TEST_CASE("welch degrees of freedom reduce to n-1 symmetric case bounds") {
  // Equal sizes and variances: Welch df equals the pooled 2n-2.
  std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  std::vector<double> b{11.0, 12.0, 13.0, 14.0};
  TTestResult r = t_test(a, b);
  CHECK(r.df == doctest::Approx(6.0));
}

TEST_CASE("sample statistics") {
  std::vector<double> xs{0.02, 0.04, 0.00};
  CHECK(mean(xs) == doctest::Approx(0.02));
  CHECK(sample_std(xs) == doctest::Approx(0.02));
  CHECK_THROWS_AS(sample_variance(std::vector<double>{1.0}), ContractError);
}
