#include "wesac/squashed_gaussian.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wesac::ad {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kLn2 = std::numbers::ln2;

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

SquashedGaussianHead make_head(Var policy_output, Eigen::Index action_dim, double bound) {
    if (policy_output.cols() != 2 * action_dim) {
        throw std::invalid_argument("policy output must have 2 * action_dim columns");
    }
    if (!(bound > 0.0)) throw std::invalid_argument("action bound must be > 0");
    return {cols(policy_output, 0, action_dim),
            clamp(cols(policy_output, action_dim, action_dim), kLogStdMin, kLogStdMax), bound};
}

SquashedSample sample_squashed(const SquashedGaussianHead& head, const Matrix& noise) {
    if (noise.rows() != head.mean.rows() || noise.cols() != head.mean.cols()) {
        throw std::invalid_argument("noise shape differs from the policy mean");
    }
    Tape& t = *head.mean.tape;
    const Var eps = t.constant(noise);
    const Var u = head.mean + exp(head.log_std) * eps;
    const Var action = head.bound * tanh(u);

    const auto d = static_cast<double>(noise.cols());
    const Matrix gauss_const =
        (-0.5 * noise.array().square()).rowwise().sum() - d * kHalfLog2Pi - d * std::log(head.bound);
    // ln(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u))
    const Var log_det = 2.0 * ((-1.0 * u + kLn2) - softplus(-2.0 * u));
    const Var log_prob = t.constant(gauss_const) - sum_cols(head.log_std) - sum_cols(log_det);
    return {action, log_prob, u};
}

GaussianHeadValues head_values(const Matrix& policy_output, Eigen::Index action_dim) {
    if (policy_output.cols() != 2 * action_dim) {
        throw std::invalid_argument("policy output must have 2 * action_dim columns");
    }
    return {policy_output.leftCols(action_dim),
            policy_output.rightCols(action_dim).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax)};
}

SquashedSampleValues sample_squashed_values(const GaussianHeadValues& head, const Matrix& noise,
                                            double bound) {
    const Matrix u = head.mean.array() + head.log_std.array().exp() * noise.array();
    SquashedSampleValues out;
    out.action = bound * u.array().tanh();
    const auto d = static_cast<double>(noise.cols());
    const Matrix log_det =
        2.0 * (kLn2 - u.array() - (-2.0 * u).unaryExpr([](double x) { return softplus_scalar(x); }).array());
    out.log_prob = (-0.5 * noise.array().square()).rowwise().sum() - d * kHalfLog2Pi -
                   d * std::log(bound);
    out.log_prob -= head.log_std.rowwise().sum() + log_det.rowwise().sum();
    return out;
}

}  // namespace wesac::ad
