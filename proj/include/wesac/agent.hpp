#pragma once

#include "wesac/envs.hpp"
#include "wesac/mlp.hpp"
#include "wesac/replay_buffer.hpp"
#include "wesac/squashed_gaussian.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace wesac {

using ad::Matrix;
using ad::MlpParams;

/// How the entropy term of both losses is weighted.
enum class WeightMode {
    /// Plain SAC: alpha * ln pi, no weight multiply at all.
    Shannon,
    /// WESAC self-balancing weight from the delayed policy.
    SelfBalancing,
    /// WESAC code path with every weight forced to 1.
    Unit,
};

std::string to_string(WeightMode m);

inline constexpr double kActionClip = 1.0 - 1e-6;

struct AgentConfig {
    std::size_t observation_dim = 3;
    std::size_t action_dim = 1;
    double action_bound = 1.0;
    std::vector<std::size_t> hidden{64, 64};

    double alpha = 0.2;
    double gamma = 0.99;
    /// Polyak coefficient of the delayed policy.
    double eta = 0.01;
    /// Polyak coefficient of the target Q-networks; 1 copies every step.
    double tau = 0.005;
    double learning_rate = 3e-4;

    std::size_t batch_size = 256;
    std::size_t warmup = 1000;
    std::size_t buffer_capacity = 1000000;
    std::size_t gradient_steps = 1;
    double reward_scale = 1.0;

    WeightMode weight_mode = WeightMode::SelfBalancing;

    /// Throws std::invalid_argument describing the first bad field.
    void validate() const;
};

struct AgentParams {
    MlpParams q1;
    MlpParams q2;
    MlpParams q1_target;
    MlpParams q2_target;
    MlpParams policy;
    /// Polyak average of `policy`; stands in for the delayed policy.
    MlpParams policy_delayed;

    static AgentParams init(const AgentConfig& cfg, std::mt19937_64& rng);
};

// ---------------------------------------------------------------------------
// Self-balancing weight

/// 1 - exp(-sum_i (u_i - mean_i)^2 / (2 exp(2 log_std_i))) on pre-squash values.
double weight_from_presquash(std::span<const double> u, std::span<const double> mean,
                             std::span<const double> log_std);

/// u = atanh(clip(a / bound, +-kActionClip)).
double presquash(double action, double bound);

/**
 * Weight of each (state, action) row under the delayed policy: one minus the
 * ratio of the pre-squash Gaussian density at atanh(a / bound) to its value at
 * the mean. Returns B x 1, every entry in [0, 1].
 */
Matrix compute_weight(const MlpParams& delayed_policy, const Matrix& states, const Matrix& actions,
                      double bound);

// ---------------------------------------------------------------------------
// Losses

struct QLossResult {
    /// mean (Q1 - target)^2 + mean (Q2 - target)^2
    double loss = 0.0;
    MlpParams grad_q1;
    MlpParams grad_q2;
    Matrix target;  ///< B x 1
};

/**
 * Critic loss on `batch`. The next action is a' = bound tanh(mu + sigma *
 * next_noise) from the current policy; the bootstrap uses the target
 * Q-networks and the weight from the delayed policy, and carries no gradient.
 * Throws ad::NonFiniteError on a non-finite value.
 */
QLossResult q_loss(const Batch& batch, const AgentParams& params, const AgentConfig& cfg,
                   const Matrix& next_noise);

struct PiLossResult {
    /// mean[alpha w ln pi - min(Q1, Q2)]
    double loss = 0.0;
    MlpParams grad_policy;
    double mean_weight = 1.0;
    /// mean[-w ln pi] over the reparameterized samples.
    double mean_entropy_estimate = 0.0;
};

PiLossResult pi_loss(const Batch& batch, const AgentParams& params, const AgentConfig& cfg,
                     const Matrix& noise);

/// Delayed policy <- eta policy + (1 - eta) delayed; targets <- tau q + (1 - tau) targets.
void update_targets(AgentParams& params, const AgentConfig& cfg);

// ---------------------------------------------------------------------------
// Agent

enum class ActMode { Stochastic, Deterministic };

struct StepMetrics {
    std::size_t env_steps = 0;
    std::size_t gradient_steps = 0;
    /// False until the buffer reaches the warmup size.
    bool updated = false;
    double q_loss = 0.0;
    double pi_loss = 0.0;
    double mean_weight = 1.0;
    double mean_entropy_estimate = 0.0;
    bool episode_end = false;
    /// Unscaled return of the episode that just ended.
    double episode_return = 0.0;
};

class Agent {
public:
    Agent(AgentConfig cfg, std::uint64_t seed);

    std::vector<double> act(std::span<const double> state, ActMode mode);

    /// One environment step, stored in the buffer, followed by
    /// cfg.gradient_steps updates once the buffer holds cfg.warmup records.
    /// During warmup actions are uniform over the bounds.
    StepMetrics train_step(env::Environment& env);

    /// One gradient step on a sampled batch: critics, policy, then the
    /// delayed policy and target networks.
    StepMetrics update();

    const AgentConfig& config() const { return cfg_; }
    const AgentParams& params() const { return params_; }
    AgentParams& mutable_params() { return params_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    std::size_t env_steps() const { return env_steps_; }
    std::size_t gradient_steps() const { return gradient_steps_; }

    /// q1, q2, q1_target, q2_target, policy, policy_delayed as JSON files.
    void save_checkpoints(const std::filesystem::path& dir) const;
    void load_checkpoints(const std::filesystem::path& dir);

private:
    Matrix normal_noise(Eigen::Index rows, Eigen::Index cols);

    AgentConfig cfg_;
    std::mt19937_64 rng_;
    AgentParams params_;
    ad::Adam opt_q1_;
    ad::Adam opt_q2_;
    ad::Adam opt_pi_;
    ReplayBuffer buffer_;
    std::vector<double> obs_;
    bool need_reset_ = true;
    double episode_return_ = 0.0;
    std::size_t env_steps_ = 0;
    std::size_t gradient_steps_ = 0;
};

}  // namespace wesac
