#pragma once

#include "wesac/mdp.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wesac::env {

struct EnvSpec {
    std::size_t observation_dim = 1;
    /// Dimension of the continuous action the agent emits.
    std::size_t action_dim = 1;
    /// Number of discrete actions behind the continuous interface; 0 if continuous.
    std::size_t discrete_actions = 0;
    /// Actions live in [-action_bound, action_bound]^action_dim.
    double action_bound = 1.0;
    std::size_t max_episode_steps = 200;
};

struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    /// Reached an absorbing state; the value of the next state is zero.
    bool terminal = false;
    /// Hit the step limit; the next state still has a value.
    bool truncated = false;
};

/// Single-owner episodic environment with a continuous action interface.
class Environment {
public:
    virtual ~Environment() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<double> reset() = 0;
    virtual StepResult step(std::span<const double> action) = 0;
};

// ---------------------------------------------------------------------------
// Tabular models

struct GridWorld {
    TabularMdp mdp;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t start = 0;
    std::size_t goal = 0;
};

inline constexpr double kGridStepReward = -0.01;

/**
 * rows x cols grid with actions {up, right, down, left}. The intended move
 * happens with probability 1 - slip_prob, otherwise one of the two lateral
 * moves with equal probability; moves into a wall stay put. The goal in the
 * bottom-right corner is absorbing with zero reward. Entering the goal pays
 * `goal_reward`, any other transition pays kGridStepReward; R(s, a) is the
 * expectation over next states. Start is the top-left cell.
 */
GridWorld gridworld(std::size_t rows, std::size_t cols, double slip_prob, double goal_reward,
                    double gamma = 0.95);

/// Chain of n states with actions {back, forward}; "back" returns to state 0
/// paying 0.2, "forward" advances paying 0 except 1 at the last state (which
/// loops). With probability `slip` the other action is executed.
TabularMdp chain(std::size_t n, double slip = 0.2, double gamma = 0.95);

/// Each (s, a) gets `branching` distinct successors chosen uniformly with
/// Dirichlet(1) probabilities; rewards are U[0, 1]. Deterministic in `seed`.
TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t branching,
                      std::uint64_t seed, double gamma = 0.9);

/// Rows drawn from Dirichlet(1), strictly positive.
TabularPolicy random_interior_policy(std::size_t n_states, std::size_t n_actions,
                                     std::mt19937_64& rng);

/**
 * Episodic view of a tabular MDP. Observations are one-hot state encodings; a
 * continuous action a in [-1, 1] selects index floor((a + 1) / 2 * n_actions),
 * capped at n_actions - 1. Rewards are sampled per transition when
 * `transition_reward` is given, otherwise R(s, a) is paid.
 */
class TabularEnv : public Environment {
public:
    TabularEnv(TabularMdp mdp, std::size_t start, std::vector<bool> absorbing,
               std::size_t max_steps, std::uint64_t seed);

    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset() override;
    StepResult step(std::span<const double> action) override;

    std::size_t state() const { return state_; }
    std::size_t action_index(double a) const;

    /// reward(s, a, next); replaces the expected reward R(s, a).
    void set_transition_reward(std::function<double(std::size_t, std::size_t, std::size_t)> fn);

private:
    std::vector<double> observe() const;

    TabularMdp mdp_;
    std::size_t start_;
    std::vector<bool> absorbing_;
    EnvSpec spec_;
    std::mt19937_64 rng_;
    std::size_t state_ = 0;
    std::size_t steps_ = 0;
    std::function<double(std::size_t, std::size_t, std::size_t)> transition_reward_;
};

// ---------------------------------------------------------------------------
// Pendulum swing-up

struct PendulumState {
    /// Radians, wrapped to (-pi, pi]; 0 is upright.
    double theta = 0.0;
    /// rad/s, clipped to [-8, 8].
    double theta_dot = 0.0;
};

struct PendulumParams {
    double gravity = 10.0;
    double mass = 1.0;
    double length = 1.0;
    double dt = 0.05;
    double max_torque = 2.0;
    double max_speed = 8.0;
    std::size_t episode_length = 200;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

struct PendulumStep {
    PendulumState next;
    double reward = 0.0;
};

/// One semi-implicit Euler step. The reward is computed on the pre-step state.
PendulumStep pendulum_step(const PendulumState& state, double torque,
                           const PendulumParams& params = {});

/// (cos theta, sin theta, theta_dot)
std::vector<double> pendulum_observation(const PendulumState& state);

class PendulumEnv : public Environment {
public:
    explicit PendulumEnv(std::uint64_t seed, PendulumParams params = {});

    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset() override;
    StepResult step(std::span<const double> action) override;

    const PendulumState& state() const { return state_; }
    void set_state(const PendulumState& s) { state_ = s; }

private:
    PendulumParams params_;
    EnvSpec spec_;
    std::mt19937_64 rng_;
    PendulumState state_;
    std::size_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Registry

/// Names accepted by make_env.
const std::vector<std::string>& env_names();

/// Builds `gridworld-5x5`, `chain-10`, `random-mdp` or `pendulum`; throws
/// std::invalid_argument for other names.
std::unique_ptr<Environment> make_env(const std::string& name, std::uint64_t seed);

/// Tabular model behind a discrete environment name; empty for `pendulum`.
std::optional<TabularMdp> tabular_model(const std::string& name);

}  // namespace wesac::env
