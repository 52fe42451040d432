#pragma once

#include <span>
#include <vector>

namespace wesac {

/// Absolute tolerance on the sum of a probability vector.
inline constexpr double kProbSumTolerance = 1e-12;

/// Throws std::invalid_argument unless `p` is non-empty, non-negative and
/// sums to one within kProbSumTolerance.
void check_prob_vector(std::span<const double> p);

/// Throws std::invalid_argument unless every weight is finite and >= 0.
void check_weight_vector(std::span<const double> w);

/// -sum p ln p in nats, with 0 ln 0 = 0.
double shannon_entropy(std::span<const double> p);

/// Weighted entropy -sum w_k p_k ln p_k in nats, with 0 ln 0 = 0.
double weighted_entropy(std::span<const double> w, std::span<const double> p);

/// Weighted Kullback-Leibler divergence sum w_i p_i ln(p_i / q_i).
///
/// Terms with p_i = 0 contribute nothing. Throws std::domain_error when some
/// p_i > 0 meets q_i = 0, where the divergence is undefined.
double weighted_kl(std::span<const double> w, std::span<const double> p,
                   std::span<const double> q);

struct MaxWentSolution {
    std::vector<double> p_star;
    /// Normalization multiplier solving sum_i exp(-zeta / w_i - 1) = 1.
    double zeta = 0.0;
    /// Achieved weighted entropy, zeta + sum_i w_i exp(-zeta / w_i - 1).
    double value = 0.0;
};

/**
 * Distribution of maximum weighted entropy for strictly positive weights.
 *
 * The maximizer has the closed form p_i = exp(-zeta / w_i - 1). The multiplier
 * zeta is found by bisection on the strictly decreasing function
 * f(zeta) = sum_i exp(-zeta / w_i - 1) - 1, after growing a bracket
 * geometrically from zero. Bisection runs to machine resolution; the result is
 * accepted when |f(zeta)| <= tol.
 *
 * Throws std::invalid_argument for empty input, non-positive weights or
 * tol <= 0, and std::runtime_error when no sign change can be bracketed or the
 * root cannot be resolved to `tol` (numerically degenerate weights).
 */
MaxWentSolution max_weighted_entropy(std::span<const double> w, double tol = 1e-10);

}  // namespace wesac
