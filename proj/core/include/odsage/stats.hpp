#pragma once

#include <cstddef>
#include <vector>

namespace odsage {

double mean_of(const std::vector<double>& v);
double variance_of(const std::vector<double>& v);  // population variance

// Linear-interpolation quantile over the values (h = (n-1)q rank rule).
// q must lie in (0, 1]; the input need not be sorted.
double quantile_linear(std::vector<double> values, double q);

// Two-sided p-value of Student's t statistic with `df` degrees of freedom,
// computed through the regularized incomplete beta function.
double student_t_two_sided_p(double t, double df);

double incomplete_beta(double a, double b, double x);

}  // namespace odsage
