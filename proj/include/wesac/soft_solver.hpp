#pragma once

#include "wesac/mdp.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace wesac {

struct SolveReport {
    std::size_t iterations = 0;
    double final_sup_norm_delta = 0.0;
    /// Weighted objective (uniform start distribution) per iteration.
    std::vector<double> objective_trace;
    bool converged = false;
};

/// Outcome of a brute-force lemma check.
struct LemmaVerdict {
    /// Instances (lemma 2) or candidate policies (lemma 1) examined.
    std::size_t trials = 0;
    /// How many of them satisfied the lemma's premises.
    std::size_t condition_hits = 0;
    /// Premise held but Q^new >= Q^old failed by more than the slack.
    std::size_t violations = 0;
    /// Largest max_{s,a} (Q^old - Q^new) seen over premise-satisfying cases.
    double worst_violation = 0.0;
};

inline constexpr std::size_t kMaxBackupIterations = 1'000'000;

/// One application of the weighted soft Bellman operator for a fixed policy.
QTable weighted_soft_backup(const TabularMdp& m, const QTable& q, const TabularPolicy& pi,
                            const WeightTable& w, double alpha);

/// Iterates weighted_soft_backup from Q = 0 until the sup-norm step is below
/// `tol`. Throws std::runtime_error past kMaxBackupIterations.
std::pair<QTable, SolveReport> evaluate_policy_iterative(const TabularMdp& m,
                                                         const TabularPolicy& pi,
                                                         const WeightTable& w, double alpha,
                                                         double tol);

/**
 * Per-state maximizer of E_pi[Q] + alpha H^w(pi).
 *
 * Weights are clamped to [kWeightMin, 1]. The maximizer is
 * pi(a) = exp((Q(a) - lambda) / (alpha w(a)) - 1) with the multiplier lambda
 * found by bisection inside an analytic bracket. With alpha == 0 the rule is
 * greedy (first maximizer on ties).
 */
TabularPolicy improve_policy_expectation(const QTable& q, const WeightTable& w, double alpha);

struct WeightedKlStep {
    TabularPolicy policy;
    /// False when no state admitted a feasible descent step; policy == pi_old then.
    bool improved = false;
    /// States whose row was changed.
    std::size_t states_moved = 0;
};

/// Per-state target exp(Q / (alpha w)) / Z used by the weighted-KL rule.
TabularPolicy weighted_kl_target(const QTable& q, const WeightTable& w, double alpha);

/**
 * Weighted-KL improvement with the weight-mass constraint.
 *
 * For each state, moves pi_old along a direction lying in
 * {d : sum d = 0, sum w d = 0} (toward the unconstrained weighted-KL minimizer
 * when that is a descent direction, otherwise along the projected negative
 * gradient) with a backtracking line search, so the weighted KL to the target
 * strictly decreases while sum_a w pi stays fixed. States without a descent
 * step keep their old row.
 */
WeightedKlStep improve_policy_weighted_kl(const QTable& q, const WeightTable& w, double alpha,
                                          const TabularPolicy& pi_old);

struct SoftPiResult {
    TabularPolicy policy;
    QTable q;
    SolveReport report;
};

/// Weighted soft policy iteration with fixed weights: exact evaluation followed
/// by improve_policy_expectation, starting from the uniform policy, until the
/// largest policy change is below `tol`.
SoftPiResult solve_weighted_soft_pi(const TabularMdp& m, const WeightTable& w, double alpha,
                                    double tol, std::size_t max_iterations = 10'000);

struct LemmaOptions {
    /// Fixed temperature; unset draws alpha ~ U[0.1, 2] per trial.
    std::optional<double> alpha;
    /// Use w = 1 everywhere (standard soft improvement).
    bool unit_weights = false;
    /// Allowed shortfall before a trial counts as a violation.
    double slack = 1e-9;
};

/// Lemma 2 brute force: random MDPs (<= 5 states, <= 4 actions), weights and
/// interior policies; improve_policy_expectation must not decrease Q anywhere.
LemmaVerdict verify_lemma2(std::uint64_t seed, std::size_t trials, const LemmaOptions& opts = {});

/// Lemma 1 brute force: samples perturbations of pi_old on 2-state MDPs with 2-3
/// actions until `premise_hits` candidates satisfy both the weighted-KL decrease
/// and the weight-mass constraint (within 1e-8), checking Q-improvement on each.
LemmaVerdict verify_lemma1(std::uint64_t seed, std::size_t premise_hits,
                           const LemmaOptions& opts = {});

}  // namespace wesac
