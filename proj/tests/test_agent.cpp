#include "wesac/agent.hpp"
#include "wesac/grad_check.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

using namespace wesac;
using ad::Matrix;

namespace {

AgentConfig tiny_config(WeightMode mode = WeightMode::SelfBalancing) {
    AgentConfig c;
    c.observation_dim = 2;
    c.action_dim = 1;
    c.action_bound = 2.0;
    c.hidden = {5, 4};
    c.alpha = 0.3;
    c.gamma = 0.9;
    c.weight_mode = mode;
    return c;
}

Batch random_batch(std::size_t b, const AgentConfig& c, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Batch batch;
    const auto B = static_cast<Eigen::Index>(b);
    const auto ds = static_cast<Eigen::Index>(c.observation_dim), da = static_cast<Eigen::Index>(c.action_dim);
    batch.states.resize(B, ds);
    batch.next_states.resize(B, ds);
    batch.actions.resize(B, da);
    batch.rewards.resize(B, 1);
    batch.dones.resize(B, 1);
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index k = 0; k < ds; ++k) {
            batch.states(i, k) = u(rng);
            batch.next_states(i, k) = u(rng);
        }
        for (Eigen::Index k = 0; k < da; ++k) batch.actions(i, k) = c.action_bound * u(rng);
        batch.rewards(i, 0) = u(rng);
        batch.dones(i, 0) = (i % 3 == 2) ? 1.0 : 0.0;
    }
    return batch;
}

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

/// Params whose targets and delayed policy differ from the online networks.
AgentParams perturbed_params(const AgentConfig& c, std::mt19937_64& rng) {
    AgentParams p = AgentParams::init(c, rng);
    std::mt19937_64 other(rng());
    const AgentParams q = AgentParams::init(c, other);
    p.q1_target = q.q1;
    p.q2_target = q.q2;
    p.policy_delayed = q.policy;
    return p;
}

struct Sample1d {
    double action, log_prob, u;
};

Sample1d oracle_sample(const ad::MlpParams& policy, const oracle::Vec& s, double eps, double bound) {
    const auto out = oracle::mlp(policy, s);
    const double mu = out[0];
    const double ls = std::clamp(out[1], ad::kLogStdMin, ad::kLogStdMax);
    const double u = mu + std::exp(ls) * eps;
    return {bound * std::tanh(u), oracle::squashed_log_density(mu, ls, bound, eps), u};
}

double oracle_weight(const ad::MlpParams& delayed, const oracle::Vec& s, double a, double bound) {
    const auto out = oracle::mlp(delayed, s);
    const double ls = std::clamp(out[1], ad::kLogStdMin, ad::kLogStdMax);
    const double x = std::clamp(a / bound, -(1.0 - 1e-6), 1.0 - 1e-6);
    const double z = (std::atanh(x) - out[0]) / std::exp(ls);
    return 1.0 - std::exp(-0.5 * z * z);
}

oracle::Vec row_of(const Matrix& m, Eigen::Index i) {
    oracle::Vec v;
    for (Eigen::Index k = 0; k < m.cols(); ++k) v.push_back(m(i, k));
    return v;
}

}  // namespace

TEST(Weight, ZeroAtMode) {
    const std::vector<double> mu{0.3, -1.2}, ls{-0.5, 0.7};
    EXPECT_EQ(weight_from_presquash(mu, mu, ls), 0.0);
}

TEST(Weight, HalfAtClosedFormOffset) {
    const double u = std::sqrt(2.0 * std::log(2.0));
    EXPECT_NEAR(u, 1.17741, 1e-5);
    EXPECT_NEAR(weight_from_presquash(std::vector{u}, std::vector{0.0}, std::vector{0.0}), 0.5, 1e-10);
    const double mu = 0.8, sigma = 0.4;
    EXPECT_NEAR(weight_from_presquash(std::vector{mu + sigma * u}, std::vector{mu}, std::vector{std::log(sigma)}),
                0.5, 1e-10);
}

TEST(Weight, TailApproachesOne) {
    EXPECT_NEAR(weight_from_presquash(std::vector{12.0}, std::vector{0.0}, std::vector{0.0}), 1.0, 1e-15);
}

TEST(Weight, BoundedForAnyAction) {
    std::mt19937_64 rng(1);
    const auto c = tiny_config();
    const auto p = AgentParams::init(c, rng);
    Matrix s = gaussian(400, 2, rng), a(400, 1);
    std::uniform_real_distribution<double> u(-c.action_bound, c.action_bound);
    for (Eigen::Index i = 0; i < 400; ++i) a(i, 0) = u(rng);
    a(0, 0) = c.action_bound;
    a(1, 0) = -c.action_bound;
    const Matrix w = compute_weight(p.policy_delayed, s, a, c.action_bound);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_LE(w.maxCoeff(), 1.0);
    EXPECT_TRUE(w.allFinite());
}

TEST(Weight, ComputeWeightMatchesOracle) {
    std::mt19937_64 rng(2);
    const auto c = tiny_config();
    const auto p = AgentParams::init(c, rng);
    const Matrix s = gaussian(20, 2, rng), a = 0.9 * Matrix::Random(20, 1) * c.action_bound;
    const Matrix w = compute_weight(p.policy_delayed, s, a, c.action_bound);
    for (Eigen::Index i = 0; i < 20; ++i) {
        EXPECT_NEAR(w(i, 0), oracle_weight(p.policy_delayed, row_of(s, i), a(i, 0), c.action_bound), 1e-12);
    }
}

TEST(QLoss, DirectEvaluationOracle) {
    std::mt19937_64 rng(3);
    const auto c = tiny_config();
    const auto p = perturbed_params(c, rng);
    const Batch batch = random_batch(1, c, rng);
    const Matrix noise = gaussian(1, 1, rng);

    const auto s2 = row_of(batch.next_states, 0);
    const auto smp = oracle_sample(p.policy, s2, noise(0, 0), c.action_bound);
    oracle::Vec sa2 = s2;
    sa2.push_back(smp.action);
    const double w = oracle_weight(p.policy_delayed, s2, smp.action, c.action_bound);
    const double minq = std::min(oracle::mlp(p.q1_target, sa2)[0], oracle::mlp(p.q2_target, sa2)[0]);
    const double y = batch.rewards(0, 0) + c.gamma * (1.0 - batch.dones(0, 0)) * (minq - c.alpha * w * smp.log_prob);
    oracle::Vec sa = row_of(batch.states, 0);
    sa.push_back(batch.actions(0, 0));
    const double e1 = oracle::mlp(p.q1, sa)[0] - y, e2 = oracle::mlp(p.q2, sa)[0] - y;

    const auto r = q_loss(batch, p, c, noise);
    EXPECT_NEAR(r.target(0, 0), y, 1e-12);
    EXPECT_NEAR(r.loss, e1 * e1 + e2 * e2, 1e-10);
}

TEST(QLoss, ZeroDiscountRegressesOntoRewards) {
    std::mt19937_64 rng(4);
    auto c = tiny_config();
    c.gamma = 0.0;
    const auto p = perturbed_params(c, rng);
    const Batch batch = random_batch(6, c, rng);
    const auto r = q_loss(batch, p, c, gaussian(6, 1, rng));
    EXPECT_EQ(r.target, batch.rewards);
}

TEST(QLoss, ZeroWhenCriticMatchesTarget) {
    std::mt19937_64 rng(5);
    auto c = tiny_config();
    c.gamma = 0.0;
    auto p = perturbed_params(c, rng);
    for (auto* q : {&p.q1, &p.q2}) {
        *q = q->zeros_like();
        q->biases.back()(0, 0) = 0.25;
    }
    Batch batch = random_batch(5, c, rng);
    batch.rewards.setConstant(0.25);
    const auto r = q_loss(batch, p, c, gaussian(5, 1, rng));
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(r.grad_q1.flatten().cwiseAbs().maxCoeff(), 0.0);
}

TEST(QLoss, RejectsEmptyBatchAndBadNoise) {
    std::mt19937_64 rng(6);
    const auto c = tiny_config();
    const auto p = AgentParams::init(c, rng);
    const Batch batch = random_batch(3, c, rng);
    EXPECT_THROW(q_loss(batch, p, c, gaussian(2, 1, rng)), std::invalid_argument);
    EXPECT_THROW(q_loss(random_batch(0, c, rng), p, c, Matrix(0, 1)), std::invalid_argument);
}

TEST(QLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    const auto c = tiny_config();
    for (int k = 0; k < 10; ++k) {
        const auto p = perturbed_params(c, rng);
        const Batch batch = random_batch(4, c, rng);
        const Matrix noise = gaussian(4, 1, rng);
        const auto r = q_loss(batch, p, c, noise);
        for (int which = 0; which < 2; ++which) {
            auto value = [&](const Eigen::VectorXd& x) {
                AgentParams q = p;
                (which == 0 ? q.q1 : q.q2).assign_flat(x);
                return q_loss(batch, q, c, noise).loss;
            };
            const auto& net = which == 0 ? p.q1 : p.q2;
            const auto& g = which == 0 ? r.grad_q1 : r.grad_q2;
            const auto rep = ad::grad_check_flat(value, g.flatten(), net.flatten(), 1e-4);
            EXPECT_TRUE(rep.passed) << "instance " << k << " net " << which << ": " << rep.max_relative_error;
        }
    }
}

TEST(PiLoss, DirectEvaluationOracle) {
    std::mt19937_64 rng(8);
    const auto c = tiny_config();
    const auto p = perturbed_params(c, rng);
    const Batch batch = random_batch(3, c, rng);
    const Matrix noise = gaussian(3, 1, rng);
    double loss = 0.0, wsum = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i) {
        const auto s = row_of(batch.states, i);
        const auto smp = oracle_sample(p.policy, s, noise(i, 0), c.action_bound);
        oracle::Vec sa = s;
        sa.push_back(smp.action);
        const double w = oracle_weight(p.policy_delayed, s, smp.action, c.action_bound);
        loss += c.alpha * w * smp.log_prob - std::min(oracle::mlp(p.q1, sa)[0], oracle::mlp(p.q2, sa)[0]);
        wsum += w;
    }
    const auto r = pi_loss(batch, p, c, noise);
    EXPECT_NEAR(r.loss, loss / 3.0, 1e-10);
    EXPECT_NEAR(r.mean_weight, wsum / 3.0, 1e-12);
}

TEST(PiLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    for (auto mode : {WeightMode::SelfBalancing, WeightMode::Shannon}) {
        const auto c = tiny_config(mode);
        for (int k = 0; k < 10; ++k) {
            const auto p = perturbed_params(c, rng);
            const Batch batch = random_batch(k == 0 ? 1 : 4, c, rng);
            const Matrix noise = gaussian(batch.size(), 1, rng);
            const auto r = pi_loss(batch, p, c, noise);
            // w is held at its value for the unperturbed policy.
            const Matrix w_fixed = [&] {
                const auto head = ad::head_values(ad::evaluate(p.policy, batch.states), 1);
                const auto s = ad::sample_squashed_values(head, noise, c.action_bound);
                return compute_weight(p.policy_delayed, batch.states, s.action, c.action_bound);
            }();
            auto value = [&](const Eigen::VectorXd& x) {
                ad::MlpParams pol = p.policy;
                pol.assign_flat(x);
                const auto head = ad::head_values(ad::evaluate(pol, batch.states), 1);
                const auto s = ad::sample_squashed_values(head, noise, c.action_bound);
                Matrix sa(batch.size(), 3);
                sa << batch.states, s.action;
                const Matrix q = ad::evaluate(p.q1, sa).cwiseMin(ad::evaluate(p.q2, sa));
                const Matrix w = mode == WeightMode::Shannon ? Matrix::Ones(batch.size(), 1) : w_fixed;
                return (c.alpha * w.cwiseProduct(s.log_prob) - q).mean();
            };
            EXPECT_NEAR(value(p.policy.flatten()), r.loss, 1e-12);
            const auto rep = ad::grad_check_flat(value, r.grad_policy.flatten(), p.policy.flatten(), 1e-4);
            EXPECT_TRUE(rep.passed) << "instance " << k << ": " << rep.max_relative_error;
        }
    }
}

TEST(PiLoss, UnitWeightsEqualShannonLoss) {
    std::mt19937_64 rng(10);
    for (int k = 0; k < 10; ++k) {
        auto c = tiny_config(WeightMode::Shannon);
        const auto p = perturbed_params(c, rng);
        const Batch batch = random_batch(8, c, rng);
        const Matrix noise = gaussian(8, 1, rng), next_noise = gaussian(8, 1, rng);
        const auto ps = pi_loss(batch, p, c, noise);
        const auto qs = q_loss(batch, p, c, next_noise);
        c.weight_mode = WeightMode::Unit;
        const auto pu = pi_loss(batch, p, c, noise);
        const auto qu = q_loss(batch, p, c, next_noise);
        EXPECT_EQ(ps.loss, pu.loss);
        EXPECT_EQ(ps.grad_policy.flatten(), pu.grad_policy.flatten());
        EXPECT_EQ(qs.loss, qu.loss);
        EXPECT_EQ(qs.grad_q1.flatten(), qu.grad_q1.flatten());
        EXPECT_EQ(pu.mean_weight, 1.0);
    }
}

TEST(UpdateTargets, PolyakCoefficients) {
    auto c = tiny_config();
    std::mt19937_64 rng(11);
    AgentParams p = AgentParams::init(c, rng);
    const auto ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p.policy.num_params()));
    p.policy.assign_flat(ones);
    p.policy_delayed.assign_flat(0.0 * ones);
    c.eta = 0.01;
    update_targets(p, c);
    EXPECT_LE((p.policy_delayed.flatten().array() - 0.01).abs().maxCoeff(), 1e-17);
    c.eta = 1.0;
    update_targets(p, c);
    EXPECT_EQ(p.policy_delayed.flatten(), p.policy.flatten());
}

TEST(Act, DeterministicZeroMeanGivesZero) {
    auto c = tiny_config();
    Agent agent(c, 1);
    auto& pol = agent.mutable_params().policy;
    pol = pol.zeros_like();
    EXPECT_EQ(agent.act(std::vector{0.4, -0.2}, ActMode::Deterministic)[0], 0.0);
}

TEST(Act, StochasticIsReproducibleAndBounded) {
    const auto c = tiny_config();
    Agent a(c, 42), b(c, 42);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int k = 0; k < 10000; ++k) {
        const std::vector<double> s{n(rng), n(rng)};
        const double x = a.act(s, ActMode::Stochastic)[0];
        EXPECT_EQ(x, b.act(s, ActMode::Stochastic)[0]);
        ASSERT_LE(std::abs(x), c.action_bound);
    }
}

TEST(Agent, RejectsInvalidConfig) {
    auto c = tiny_config();
    c.eta = 0.0;
    EXPECT_THROW(Agent(c, 0), std::invalid_argument);
    c = tiny_config();
    c.alpha = 0.0;
    EXPECT_THROW(Agent(c, 0), std::invalid_argument);
}

namespace {

AgentConfig pendulum_config(WeightMode mode) {
    AgentConfig c;
    c.hidden = {16, 16};
    c.batch_size = 32;
    c.warmup = 100;
    c.weight_mode = mode;
    return c;
}

}  // namespace

TEST(TrainStep, NoUpdatesBeforeWarmup) {
    Agent agent(pendulum_config(WeightMode::SelfBalancing), 3);
    env::PendulumEnv env(3);
    for (int t = 0; t < 99; ++t) {
        const auto m = agent.train_step(env);
        EXPECT_FALSE(m.updated);
    }
    EXPECT_EQ(agent.buffer().size(), 99u);
    EXPECT_EQ(agent.gradient_steps(), 0u);
    const auto m = agent.train_step(env);
    EXPECT_TRUE(m.updated);
    EXPECT_EQ(agent.gradient_steps(), 1u);
}

TEST(TrainStep, MetricsStayInRange) {
    Agent agent(pendulum_config(WeightMode::SelfBalancing), 4);
    env::PendulumEnv env(4);
    int episodes = 0;
    for (int t = 0; t < 450; ++t) {
        const auto m = agent.train_step(env);
        if (m.updated) {
            EXPECT_GE(m.mean_weight, 0.0);
            EXPECT_LE(m.mean_weight, 1.0);
            EXPECT_TRUE(std::isfinite(m.q_loss) && std::isfinite(m.pi_loss));
        }
        episodes += m.episode_end;
    }
    EXPECT_EQ(episodes, 2);
}

TEST(TrainStep, UnitWeightTrajectoryEqualsSac) {
    Agent sac(pendulum_config(WeightMode::Shannon), 5);
    Agent unit(pendulum_config(WeightMode::Unit), 5);
    env::PendulumEnv e1(5), e2(5);
    for (int t = 0; t < 300; ++t) {
        const auto a = sac.train_step(e1);
        const auto b = unit.train_step(e2);
        ASSERT_EQ(a.q_loss, b.q_loss) << t;
        ASSERT_EQ(a.pi_loss, b.pi_loss) << t;
        ASSERT_EQ(a.mean_weight, b.mean_weight) << t;
    }
    EXPECT_EQ(sac.params().policy.flatten(), unit.params().policy.flatten());
    EXPECT_EQ(sac.params().q1.flatten(), unit.params().q1.flatten());
    EXPECT_EQ(sac.params().policy_delayed.flatten(), unit.params().policy_delayed.flatten());
}

TEST(TrainStep, CheckpointRoundTrip) {
    Agent agent(pendulum_config(WeightMode::SelfBalancing), 6);
    env::PendulumEnv env(6);
    for (int t = 0; t < 120; ++t) agent.train_step(env);
    const auto dir = std::filesystem::temp_directory_path() / "wesac_agent_ckpt";
    agent.save_checkpoints(dir);
    Agent other(pendulum_config(WeightMode::SelfBalancing), 99);
    other.load_checkpoints(dir);
    EXPECT_EQ(other.params().policy.flatten(), agent.params().policy.flatten());
    EXPECT_EQ(other.params().q2_target.flatten(), agent.params().q2_target.flatten());
    std::filesystem::remove_all(dir);
}

TEST(ReplayBuffer, FifoEvictionAndCapacity) {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) buf.add({{double(i)}, {0.0}, double(i), {0.0}, false});
    EXPECT_EQ(buf.size(), 3u);
    EXPECT_EQ(buf.insertions(), 5u);
    std::vector<double> rewards;
    for (std::size_t i = 0; i < 3; ++i) rewards.push_back(buf.at(i).reward);
    std::sort(rewards.begin(), rewards.end());
    EXPECT_EQ(rewards, (std::vector<double>{2.0, 3.0, 4.0}));
}

TEST(ReplayBuffer, UniformSampling) {
    ReplayBuffer buf(4);
    for (int i = 0; i < 4; ++i) buf.add({{double(i)}, {0.0}, double(i), {0.0}, i == 3});
    std::mt19937_64 rng(1);
    std::map<int, int> counts;
    const auto b = buf.sample(40000, rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        counts[static_cast<int>(b.rewards(i, 0))]++;
        EXPECT_EQ(b.dones(i, 0), b.rewards(i, 0) == 3.0 ? 1.0 : 0.0);
    }
    for (const auto& [k, n] : counts) EXPECT_NEAR(n / 40000.0, 0.25, 0.01) << k;
}

TEST(ReplayBuffer, RejectsBadRecords) {
    ReplayBuffer buf(4);
    EXPECT_THROW(buf.add({{NAN}, {0.0}, 0.0, {0.0}, false}), std::invalid_argument);
    buf.add({{1.0}, {0.0}, 0.0, {0.0}, false});
    EXPECT_THROW(buf.add({{1.0, 2.0}, {0.0}, 0.0, {0.0, 1.0}, false}), std::invalid_argument);
    std::mt19937_64 rng(0);
    EXPECT_THROW(ReplayBuffer(2).sample(1, rng), std::logic_error);
}
