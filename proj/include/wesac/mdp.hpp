#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace wesac {

/// Lower clamp applied to entropy weights wherever an interior maximizer is required.
inline constexpr double kWeightMin = 1e-6;

/**
 * Finite discounted MDP with dense storage.
 *
 * `transition` is an (n_states * n_actions) x n_states matrix whose row
 * `s * n_actions + a` holds P(. | s, a). `reward` is n_states x n_actions.
 */
struct TabularMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    Eigen::MatrixXd transition;
    Eigen::MatrixXd reward;
    double gamma = 0.0;

    TabularMdp() = default;
    TabularMdp(std::size_t states, std::size_t actions, double discount);

    std::size_t row(std::size_t s, std::size_t a) const { return s * n_actions + a; }
    double& p(std::size_t s, std::size_t a, std::size_t next) { return transition(row(s, a), next); }
    double p(std::size_t s, std::size_t a, std::size_t next) const {
        return transition(row(s, a), next);
    }
};

/// pi(s, a); each row is a distribution over actions.
struct TabularPolicy {
    Eigen::MatrixXd pi;

    static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
    /// Deterministic policy choosing `actions[s]` in state s.
    static TabularPolicy deterministic(const std::vector<std::size_t>& actions,
                                       std::size_t n_actions);
};

/// Context-dependent entropy weights w(s, a), bounded to [0, 1].
struct WeightTable {
    Eigen::MatrixXd w;

    static WeightTable ones(std::size_t n_states, std::size_t n_actions);
    /// Copy with every entry clamped to [lo, 1].
    WeightTable clamped(double lo = kWeightMin) const;
};

struct QTable {
    Eigen::MatrixXd q;
};

struct VTable {
    Eigen::VectorXd v;
};

/// Returns human-readable descriptions of every violated invariant; empty means valid.
std::vector<std::string> validate_mdp(const TabularMdp& m);

/// Throws std::invalid_argument carrying the first violations when `m` is invalid.
void require_valid_mdp(const TabularMdp& m);

/// Greedy action per state (first maximizer on ties).
std::vector<std::size_t> greedy_actions(const Eigen::MatrixXd& table);

/// V(s) = sum_a pi(s,a) (Q(s,a) - alpha w(s,a) ln pi(s,a)), with 0 ln 0 = 0.
VTable soft_value_from_q(const TabularMdp& m, const QTable& q, const TabularPolicy& pi,
                         const WeightTable& w, double alpha);

/// Per-state weighted policy entropy h(s) = -sum_a w(s,a) pi(s,a) ln pi(s,a).
Eigen::VectorXd weighted_policy_entropy(const TabularPolicy& pi, const WeightTable& w);

/**
 * Exact weighted soft Q-function of `pi` by a dense linear solve.
 *
 * Solves (I - gamma P_pi) V = r_pi + alpha h_pi with partial-pivot LU, then
 * forms Q = R + gamma P V. Throws std::runtime_error if the residual of the
 * solve exceeds 1e-12 relative to the solution scale.
 */
QTable evaluate_policy_exact(const TabularMdp& m, const TabularPolicy& pi, const WeightTable& w,
                             double alpha);

/// Weighted objective with a uniform start-state distribution: mean_s V^pi(s).
double weighted_objective(const TabularMdp& m, const TabularPolicy& pi, const WeightTable& w,
                          double alpha);

}  // namespace wesac
