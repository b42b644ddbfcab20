#pragma once

#include <span>
#include <vector>

namespace hpsmp {

double mean(std::span<const double> xs);
/// Sample (n-1) standard deviation.
double sample_std(std::span<const double> xs);
double sample_variance(std::span<const double> xs);

/// Regularized incomplete beta function I_x(a, b), for x in [0, 1], a, b > 0.
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t distribution with df degrees of freedom.
double student_t_cdf(double t, double df);

/// Two-sided tail probability P(|T| >= t).
double student_t_two_sided_p(double t, double df);

/// Quantile t such that P(|T| <= t) == confidence (two-sided), e.g.
/// confidence 0.95 at df 14 gives ~2.145.
double student_t_two_sided_quantile(double confidence, double df);

struct TTestResult {
  double t_value = 0.0;
  double p_value = 1.0;  // two-sided
  double df = 0.0;       // Welch-Satterthwaite
  bool reject_at_95 = false;
  /// False when the pooled variance is zero and the statistic is undefined.
  bool defined = true;
};

/// Two-sample Welch (unequal variance) t-test, two-sided p-value.
TTestResult t_test(std::span<const double> a, std::span<const double> b);

}  // namespace hpsmp
