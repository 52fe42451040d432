#include "wesac/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wesac {

using ad::Tape;
using ad::Var;

std::string to_string(WeightMode m) {
    switch (m) {
        case WeightMode::Shannon: return "shannon";
        case WeightMode::SelfBalancing: return "self-balancing";
        case WeightMode::Unit: return "unit";
    }
    return "?";
}

void AgentConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("AgentConfig: " + what); };
    if (observation_dim == 0 || action_dim == 0) fail("dimensions must be >= 1");
    if (!(action_bound > 0.0) || !std::isfinite(action_bound)) fail("action_bound must be finite and > 0");
    for (auto h : hidden) {
        if (h == 0) fail("hidden sizes must be >= 1");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be > 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
    if (!(eta > 0.0 && eta <= 1.0)) fail("eta must lie in (0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (batch_size == 0) fail("batch_size must be >= 1");
    if (buffer_capacity == 0) fail("buffer_capacity must be >= 1");
    if (warmup == 0) fail("warmup must be >= 1");
    if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) fail("reward_scale must be > 0");
}

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden,
                                     std::size_t out) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
}

Matrix concat(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

bool weighted(const AgentConfig& cfg) { return cfg.weight_mode != WeightMode::Shannon; }

Matrix weights_for(const AgentConfig& cfg, const AgentParams& p, const Matrix& states,
                   const Matrix& actions) {
    if (cfg.weight_mode == WeightMode::Unit) return Matrix::Ones(states.rows(), 1);
    return compute_weight(p.policy_delayed, states, actions, cfg.action_bound);
}

void check_batch(const Batch& batch, const AgentConfig& cfg, const Matrix& noise) {
    if (batch.size() == 0) throw std::invalid_argument("empty batch");
    if (static_cast<std::size_t>(batch.states.cols()) != cfg.observation_dim ||
        static_cast<std::size_t>(batch.actions.cols()) != cfg.action_dim) {
        throw std::invalid_argument("batch shape differs from the agent config");
    }
    if (noise.rows() != batch.size() || static_cast<std::size_t>(noise.cols()) != cfg.action_dim) {
        throw std::invalid_argument("noise must be batch_size x action_dim");
    }
}

}  // namespace

AgentParams AgentParams::init(const AgentConfig& cfg, std::mt19937_64& rng) {
    const auto act = ad::Activation::Relu;
    const auto q_sizes = layer_sizes(cfg.observation_dim + cfg.action_dim, cfg.hidden, 1);
    AgentParams p;
    p.q1 = MlpParams::init(q_sizes, act, rng);
    p.q2 = MlpParams::init(q_sizes, act, rng);
    p.policy = MlpParams::init(layer_sizes(cfg.observation_dim, cfg.hidden, 2 * cfg.action_dim), act, rng);
    p.q1_target = p.q1;
    p.q2_target = p.q2;
    p.policy_delayed = p.policy;
    return p;
}

double presquash(double action, double bound) {
    const double x = std::clamp(action / bound, -kActionClip, kActionClip);
    return std::atanh(x);
}

double weight_from_presquash(std::span<const double> u, std::span<const double> mean,
                             std::span<const double> log_std) {
    if (u.size() != mean.size() || u.size() != log_std.size()) {
        throw std::invalid_argument("weight_from_presquash: size mismatch");
    }
    double q = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double z = (u[i] - mean[i]) / std::exp(log_std[i]);
        q += z * z;
    }
    return std::clamp(1.0 - std::exp(-0.5 * q), 0.0, 1.0);
}

Matrix compute_weight(const MlpParams& delayed_policy, const Matrix& states, const Matrix& actions,
                      double bound) {
    const Eigen::Index d = actions.cols();
    const auto head = ad::head_values(ad::evaluate(delayed_policy, states), d);
    Matrix w(states.rows(), 1);
    std::vector<double> u(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        for (Eigen::Index k = 0; k < d; ++k) u[static_cast<std::size_t>(k)] = presquash(actions(i, k), bound);
        const Eigen::VectorXd mu = head.mean.row(i).transpose();
        const Eigen::VectorXd ls = head.log_std.row(i).transpose();
        w(i, 0) = weight_from_presquash(u, {mu.data(), static_cast<std::size_t>(d)},
                                        {ls.data(), static_cast<std::size_t>(d)});
    }
    return w;
}

QLossResult q_loss(const Batch& batch, const AgentParams& params, const AgentConfig& cfg,
                   const Matrix& next_noise) {
    check_batch(batch, cfg, next_noise);
    const auto d = static_cast<Eigen::Index>(cfg.action_dim);

    const auto head = ad::head_values(ad::evaluate(params.policy, batch.next_states), d);
    const auto next = ad::sample_squashed_values(head, next_noise, cfg.action_bound);
    const Matrix sa_next = concat(batch.next_states, next.action);
    const Matrix min_q = ad::evaluate(params.q1_target, sa_next).cwiseMin(ad::evaluate(params.q2_target, sa_next));
    Matrix soft;
    if (weighted(cfg)) {
        const Matrix w = weights_for(cfg, params, batch.next_states, next.action);
        soft = min_q.array() - cfg.alpha * (w.array() * next.log_prob.array());
    } else {
        soft = min_q.array() - cfg.alpha * next.log_prob.array();
    }
    QLossResult out;
    out.target = batch.rewards.array() + cfg.gamma * (1.0 - batch.dones.array()) * soft.array();
    ad::require_finite(out.target, "critic target");

    Tape tape;
    const Var sa = tape.constant(concat(batch.states, batch.actions));
    const Var y = tape.constant(out.target);
    const auto b1 = ad::forward(params.q1, sa, tape);
    const auto b2 = ad::forward(params.q2, sa, tape);
    const Var loss = ad::mean(ad::square(b1.output - y)) + ad::mean(ad::square(b2.output - y));
    out.loss = loss.value()(0, 0);
    if (!std::isfinite(out.loss)) throw ad::NonFiniteError("non-finite critic loss");
    tape.backward(loss);
    out.grad_q1 = ad::collect_grads(tape, b1, params.q1);
    out.grad_q2 = ad::collect_grads(tape, b2, params.q2);
    return out;
}

PiLossResult pi_loss(const Batch& batch, const AgentParams& params, const AgentConfig& cfg,
                     const Matrix& noise) {
    check_batch(batch, cfg, noise);
    const auto d = static_cast<Eigen::Index>(cfg.action_dim);

    Tape tape;
    const Var s = tape.constant(batch.states);
    const auto pb = ad::forward(params.policy, s, tape);
    const auto head = ad::make_head(pb.output, d, cfg.action_bound);
    const auto sample = ad::sample_squashed(head, noise);
    const Var sa = ad::concat_cols(s, sample.action);
    const Var q1 = ad::forward(params.q1, sa, tape, false).output;
    const Var q2 = ad::forward(params.q2, sa, tape, false).output;
    const Var min_q = ad::minimum(q1, q2);

    PiLossResult out;
    Var loss;
    if (weighted(cfg)) {
        const Matrix w = weights_for(cfg, params, batch.states, sample.action.value());
        const Var wv = tape.constant(w);
        const Var wlogp = wv * sample.log_prob;
        loss = ad::mean(cfg.alpha * wlogp - min_q);
        out.mean_weight = w.mean();
        out.mean_entropy_estimate = -wlogp.value().mean();
    } else {
        loss = ad::mean(cfg.alpha * sample.log_prob - min_q);
        out.mean_weight = 1.0;
        out.mean_entropy_estimate = -sample.log_prob.value().mean();
    }
    out.loss = loss.value()(0, 0);
    if (!std::isfinite(out.loss)) throw ad::NonFiniteError("non-finite policy loss");
    tape.backward(loss);
    out.grad_policy = ad::collect_grads(tape, pb, params.policy);
    return out;
}

void update_targets(AgentParams& params, const AgentConfig& cfg) {
    ad::polyak_update(params.policy_delayed, params.policy, cfg.eta);
    ad::polyak_update(params.q1_target, params.q1, cfg.tau);
    ad::polyak_update(params.q2_target, params.q2, cfg.tau);
}

// ---------------------------------------------------------------------------

Agent::Agent(AgentConfig cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), std::move(cfg))),
      rng_(seed),
      params_(AgentParams::init(cfg_, rng_)),
      opt_q1_(cfg_.learning_rate),
      opt_q2_(cfg_.learning_rate),
      opt_pi_(cfg_.learning_rate),
      buffer_(cfg_.buffer_capacity) {}

Matrix Agent::normal_noise(Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = n(rng_);
    }
    return m;
}

std::vector<double> Agent::act(std::span<const double> state, ActMode mode) {
    if (state.size() != cfg_.observation_dim) throw std::invalid_argument("act: wrong state size");
    Matrix s(1, static_cast<Eigen::Index>(state.size()));
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (!std::isfinite(state[i])) throw std::invalid_argument("act: non-finite state");
        s(0, static_cast<Eigen::Index>(i)) = state[i];
    }
    const auto d = static_cast<Eigen::Index>(cfg_.action_dim);
    const auto head = ad::head_values(ad::evaluate(params_.policy, s), d);
    Matrix a;
    if (mode == ActMode::Deterministic) {
        a = cfg_.action_bound * head.mean.array().tanh();
    } else {
        a = ad::sample_squashed_values(head, normal_noise(1, d), cfg_.action_bound).action;
    }
    return {a.data(), a.data() + a.size()};
}

StepMetrics Agent::update() {
    const Batch batch = buffer_.sample(cfg_.batch_size, rng_);
    const auto b = batch.size();
    const auto d = static_cast<Eigen::Index>(cfg_.action_dim);

    StepMetrics m;
    const auto ql = q_loss(batch, params_, cfg_, normal_noise(b, d));
    opt_q1_.step(params_.q1, ql.grad_q1);
    opt_q2_.step(params_.q2, ql.grad_q2);

    const auto pl = pi_loss(batch, params_, cfg_, normal_noise(b, d));
    opt_pi_.step(params_.policy, pl.grad_policy);
    update_targets(params_, cfg_);
    if (!params_.policy.all_finite() || !params_.q1.all_finite() || !params_.q2.all_finite()) {
        throw ad::NonFiniteError("non-finite parameters after update");
    }

    ++gradient_steps_;
    m.updated = true;
    m.q_loss = ql.loss;
    m.pi_loss = pl.loss;
    m.mean_weight = pl.mean_weight;
    m.mean_entropy_estimate = pl.mean_entropy_estimate;
    return m;
}

StepMetrics Agent::train_step(env::Environment& env) {
    const auto& spec = env.spec();
    if (spec.observation_dim != cfg_.observation_dim || spec.action_dim != cfg_.action_dim) {
        throw std::invalid_argument("environment shape differs from the agent config");
    }
    if (need_reset_) {
        obs_ = env.reset();
        episode_return_ = 0.0;
        need_reset_ = false;
    }
    std::vector<double> action;
    if (env_steps_ < cfg_.warmup) {
        std::uniform_real_distribution<double> u(-cfg_.action_bound, cfg_.action_bound);
        for (std::size_t k = 0; k < cfg_.action_dim; ++k) action.push_back(u(rng_));
    } else {
        action = act(obs_, ActMode::Stochastic);
    }
    auto r = env.step(action);
    ++env_steps_;
    episode_return_ += r.reward;
    buffer_.add({obs_, action, cfg_.reward_scale * r.reward, r.observation, r.terminal});
    obs_ = std::move(r.observation);

    StepMetrics m;
    if (r.terminal || r.truncated) {
        m.episode_end = true;
        m.episode_return = episode_return_;
        need_reset_ = true;
    }
    if (buffer_.insertions() >= cfg_.warmup) {
        double ql = 0.0, pl = 0.0, mw = 0.0, me = 0.0;
        for (std::size_t g = 0; g < cfg_.gradient_steps; ++g) {
            const auto u = update();
            ql += u.q_loss;
            pl += u.pi_loss;
            mw += u.mean_weight;
            me += u.mean_entropy_estimate;
        }
        if (cfg_.gradient_steps > 0) {
            const auto n = static_cast<double>(cfg_.gradient_steps);
            m.updated = true;
            m.q_loss = ql / n;
            m.pi_loss = pl / n;
            m.mean_weight = mw / n;
            m.mean_entropy_estimate = me / n;
        }
    }
    m.env_steps = env_steps_;
    m.gradient_steps = gradient_steps_;
    return m;
}

void Agent::save_checkpoints(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    ad::save_checkpoint(params_.q1, dir / "q1.json");
    ad::save_checkpoint(params_.q2, dir / "q2.json");
    ad::save_checkpoint(params_.q1_target, dir / "q1_target.json");
    ad::save_checkpoint(params_.q2_target, dir / "q2_target.json");
    ad::save_checkpoint(params_.policy, dir / "policy.json");
    ad::save_checkpoint(params_.policy_delayed, dir / "policy_delayed.json");
}

void Agent::load_checkpoints(const std::filesystem::path& dir) {
    AgentParams p;
    p.q1 = ad::load_checkpoint(dir / "q1.json");
    p.q2 = ad::load_checkpoint(dir / "q2.json");
    p.q1_target = ad::load_checkpoint(dir / "q1_target.json");
    p.q2_target = ad::load_checkpoint(dir / "q2_target.json");
    p.policy = ad::load_checkpoint(dir / "policy.json");
    p.policy_delayed = ad::load_checkpoint(dir / "policy_delayed.json");
    if (!p.q1.same_shape(params_.q1) || !p.q2.same_shape(params_.q2) ||
        !p.q1_target.same_shape(params_.q1) || !p.q2_target.same_shape(params_.q2) ||
        !p.policy.same_shape(params_.policy) || !p.policy_delayed.same_shape(params_.policy)) {
        throw std::invalid_argument("checkpoint shapes differ from the agent config");
    }
    params_ = std::move(p);
}

}  // namespace wesac
