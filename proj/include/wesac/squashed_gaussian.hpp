#pragma once

#include "wesac/autodiff.hpp"

namespace wesac::ad {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian over pre-squash actions u; emitted actions are bound * tanh(u).
struct SquashedGaussianHead {
    Var mean;
    /// Already clamped to [kLogStdMin, kLogStdMax].
    Var log_std;
    double bound = 1.0;
};

/// Splits a (B x 2d) policy output into mean (first d columns) and clamped
/// log-std (last d columns).
SquashedGaussianHead make_head(Var policy_output, Eigen::Index action_dim, double bound);

struct SquashedSample {
    Var action;     ///< B x d, bound * tanh(u)
    Var log_prob;   ///< B x 1
    Var pre_squash; ///< B x d, u = mean + std * noise
};

/**
 * Reparameterized sample u = mean + exp(log_std) * noise, a = bound * tanh(u),
 * with log-density
 *   sum_i [-noise_i^2 / 2 - log_std_i - ln(2 pi) / 2]
 *   - sum_i 2 (ln 2 - u_i - softplus(-2 u_i)) - d ln(bound).
 * Differentiable through mean and log_std.
 */
SquashedSample sample_squashed(const SquashedGaussianHead& head, const Matrix& noise);

/// Tape-free head values for acting and weight computation.
struct GaussianHeadValues {
    Matrix mean;
    Matrix log_std;
};

GaussianHeadValues head_values(const Matrix& policy_output, Eigen::Index action_dim);

struct SquashedSampleValues {
    Matrix action;
    Matrix log_prob;
};

SquashedSampleValues sample_squashed_values(const GaussianHeadValues& head, const Matrix& noise,
                                            double bound);

}  // namespace wesac::ad
