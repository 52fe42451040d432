#pragma once

#include <Eigen/Dense>

namespace wesac::detail {

double log_sum_exp(const Eigen::VectorXd& x);

Eigen::VectorXd log_softmax(const Eigen::VectorXd& x);

/**
 * Normalized row p(a) = exp((c(a) - lambda) / s(a) + k) with sum_a p(a) = 1.
 *
 * The row sum is strictly decreasing in lambda. On [max_a(c + k s),
 * max_a(c + s (k + ln n))] every exponent is <= 0, the sum is >= 1 at the left
 * end and <= 1 at the right end, so bisection never overflows. The result is
 * renormalized to absorb the final bisection residual. Requires s > 0.
 */
Eigen::VectorXd exponential_row(const Eigen::VectorXd& c, const Eigen::VectorXd& s, double k);

}  // namespace wesac::detail
