#include "wesac/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace wesac::env {

namespace {

constexpr std::uint64_t kRandomMdpModelSeed = 2024;

std::vector<double> dirichlet_ones(std::size_t n, std::mt19937_64& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> x(n);
    double sum = 0.0;
    for (auto& xi : x) {
        xi = expo(rng);
        sum += xi;
    }
    for (auto& xi : x) xi /= sum;
    return x;
}

}  // namespace

GridWorld gridworld(std::size_t rows, std::size_t cols, double slip_prob, double goal_reward,
                    double gamma) {
    if (rows < 2 || cols < 2) throw std::invalid_argument("gridworld: rows and cols must be >= 2");
    if (!(slip_prob >= 0.0 && slip_prob < 1.0)) {
        throw std::invalid_argument("gridworld: slip_prob must be in [0, 1)");
    }
    GridWorld g;
    g.rows = rows;
    g.cols = cols;
    g.start = 0;
    g.goal = rows * cols - 1;
    g.mdp = TabularMdp(rows * cols, 4, gamma);

    // up, right, down, left
    constexpr int dr[4] = {-1, 0, 1, 0};
    constexpr int dc[4] = {0, 1, 0, -1};
    auto move = [&](std::size_t s, int dir) {
        const auto r = static_cast<long>(s / cols) + dr[dir];
        const auto c = static_cast<long>(s % cols) + dc[dir];
        if (r < 0 || c < 0 || r >= static_cast<long>(rows) || c >= static_cast<long>(cols)) return s;
        return static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c);
    };

    for (std::size_t s = 0; s < rows * cols; ++s) {
        for (int a = 0; a < 4; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            if (s == g.goal) {
                g.mdp.p(s, ua, s) = 1.0;
                continue;
            }
            g.mdp.p(s, ua, move(s, a)) += 1.0 - slip_prob;
            g.mdp.p(s, ua, move(s, (a + 1) % 4)) += 0.5 * slip_prob;
            g.mdp.p(s, ua, move(s, (a + 3) % 4)) += 0.5 * slip_prob;
            const double p_goal = g.mdp.p(s, ua, g.goal);
            g.mdp.reward(static_cast<Eigen::Index>(s), a) =
                p_goal * goal_reward + (1.0 - p_goal) * kGridStepReward;
        }
    }
    return g;
}

TabularMdp chain(std::size_t n, double slip, double gamma) {
    if (n < 2) throw std::invalid_argument("chain: n must be >= 2");
    if (!(slip >= 0.0 && slip < 1.0)) throw std::invalid_argument("chain: slip must be in [0, 1)");
    TabularMdp m(n, 2, gamma);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t fwd = std::min(s + 1, n - 1);
        const double fwd_reward = (s == n - 1) ? 1.0 : 0.0;
        for (std::size_t a = 0; a < 2; ++a) {
            const double p_fwd = (a == 1) ? 1.0 - slip : slip;
            m.p(s, a, fwd) += p_fwd;
            m.p(s, a, 0) += 1.0 - p_fwd;
            m.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
                p_fwd * fwd_reward + (1.0 - p_fwd) * 0.2;
        }
    }
    return m;
}

TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::size_t branching,
                      std::uint64_t seed, double gamma) {
    if (n_states == 0 || n_actions == 0) throw std::invalid_argument("random_mdp: empty model");
    if (branching == 0 || branching > n_states) {
        throw std::invalid_argument("random_mdp: branching must be in [1, n_states]");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    TabularMdp m(n_states, n_actions, gamma);
    std::vector<std::size_t> order(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        for (std::size_t a = 0; a < n_actions; ++a) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t k = 0; k < branching; ++k) {
                std::uniform_int_distribution<std::size_t> pick(k, n_states - 1);
                std::swap(order[k], order[pick(rng)]);
            }
            const auto probs = dirichlet_ones(branching, rng);
            for (std::size_t k = 0; k < branching; ++k) m.p(s, a, order[k]) = probs[k];
            m.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = unit(rng);
        }
    }
    // Renormalize so rows sum to one to the last bit.
    for (Eigen::Index r = 0; r < m.transition.rows(); ++r) {
        m.transition.row(r) /= m.transition.row(r).sum();
    }
    return m;
}

TabularPolicy random_interior_policy(std::size_t n_states, std::size_t n_actions,
                                     std::mt19937_64& rng) {
    TabularPolicy p{Eigen::MatrixXd(static_cast<Eigen::Index>(n_states),
                                    static_cast<Eigen::Index>(n_actions))};
    for (std::size_t s = 0; s < n_states; ++s) {
        auto row = dirichlet_ones(n_actions, rng);
        for (auto& x : row) x = std::max(x, 1e-12);
        const double sum = std::accumulate(row.begin(), row.end(), 0.0);
        for (std::size_t a = 0; a < n_actions; ++a) {
            p.pi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = row[a] / sum;
        }
    }
    return p;
}

// ---------------------------------------------------------------------------

TabularEnv::TabularEnv(TabularMdp mdp, std::size_t start, std::vector<bool> absorbing,
                       std::size_t max_steps, std::uint64_t seed)
    : mdp_(std::move(mdp)), start_(start), absorbing_(std::move(absorbing)), rng_(seed) {
    require_valid_mdp(mdp_);
    if (start_ >= mdp_.n_states) throw std::invalid_argument("TabularEnv: start out of range");
    if (absorbing_.empty()) absorbing_.assign(mdp_.n_states, false);
    if (absorbing_.size() != mdp_.n_states) throw std::invalid_argument("TabularEnv: absorbing mask size");
    spec_.observation_dim = mdp_.n_states;
    spec_.action_dim = 1;
    spec_.discrete_actions = mdp_.n_actions;
    spec_.action_bound = 1.0;
    spec_.max_episode_steps = max_steps;
    state_ = start_;
}

void TabularEnv::set_transition_reward(
    std::function<double(std::size_t, std::size_t, std::size_t)> fn) {
    transition_reward_ = std::move(fn);
}

std::size_t TabularEnv::action_index(double a) const {
    const double clipped = std::clamp(a, -1.0, 1.0);
    const auto n = mdp_.n_actions;
    const auto idx = static_cast<std::size_t>(std::floor((clipped + 1.0) * 0.5 * static_cast<double>(n)));
    return std::min(idx, n - 1);
}

std::vector<double> TabularEnv::observe() const {
    std::vector<double> obs(mdp_.n_states, 0.0);
    obs[state_] = 1.0;
    return obs;
}

std::vector<double> TabularEnv::reset() {
    state_ = start_;
    steps_ = 0;
    return observe();
}

StepResult TabularEnv::step(std::span<const double> action) {
    if (action.size() != 1) throw std::invalid_argument("TabularEnv::step: expected a 1-D action");
    const std::size_t a = action_index(action[0]);
    const auto row = static_cast<Eigen::Index>(mdp_.row(state_, a));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng_);
    std::size_t next = mdp_.n_states - 1;
    double cum = 0.0;
    for (std::size_t k = 0; k < mdp_.n_states; ++k) {
        cum += mdp_.transition(row, static_cast<Eigen::Index>(k));
        if (u < cum) {
            next = k;
            break;
        }
    }
    StepResult r;
    r.reward = transition_reward_
                   ? transition_reward_(state_, a, next)
                   : mdp_.reward(static_cast<Eigen::Index>(state_), static_cast<Eigen::Index>(a));
    state_ = next;
    ++steps_;
    r.terminal = absorbing_[state_];
    r.truncated = !r.terminal && steps_ >= spec_.max_episode_steps;
    r.observation = observe();
    return r;
}

// ---------------------------------------------------------------------------

double wrap_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double t = std::fmod(theta + std::numbers::pi, two_pi);
    if (t < 0.0) t += two_pi;
    t -= std::numbers::pi;
    // fmod maps +pi to -pi; the interval is half-open on the left.
    return t == -std::numbers::pi ? std::numbers::pi : t;
}

PendulumStep pendulum_step(const PendulumState& state, double torque, const PendulumParams& p) {
    const double u = std::clamp(torque, -p.max_torque, p.max_torque);
    const double th = wrap_angle(state.theta);
    PendulumStep out;
    out.reward = -(th * th + 0.1 * state.theta_dot * state.theta_dot + 0.001 * u * u);
    const double acc = 3.0 * p.gravity / (2.0 * p.length) * std::sin(state.theta) +
                       3.0 / (p.mass * p.length * p.length) * u;
    out.next.theta_dot = std::clamp(state.theta_dot + acc * p.dt, -p.max_speed, p.max_speed);
    out.next.theta = wrap_angle(state.theta + out.next.theta_dot * p.dt);
    return out;
}

std::vector<double> pendulum_observation(const PendulumState& s) {
    return {std::cos(s.theta), std::sin(s.theta), s.theta_dot};
}

PendulumEnv::PendulumEnv(std::uint64_t seed, PendulumParams params)
    : params_(params), rng_(seed) {
    spec_.observation_dim = 3;
    spec_.action_dim = 1;
    spec_.discrete_actions = 0;
    spec_.action_bound = params_.max_torque;
    spec_.max_episode_steps = params_.episode_length;
}

std::vector<double> PendulumEnv::reset() {
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    std::uniform_real_distribution<double> speed(-1.0, 1.0);
    state_.theta = wrap_angle(angle(rng_));
    state_.theta_dot = speed(rng_);
    steps_ = 0;
    return pendulum_observation(state_);
}

StepResult PendulumEnv::step(std::span<const double> action) {
    if (action.size() != 1) throw std::invalid_argument("PendulumEnv::step: expected a 1-D action");
    const PendulumStep s = pendulum_step(state_, action[0], params_);
    state_ = s.next;
    ++steps_;
    StepResult r;
    r.reward = s.reward;
    r.terminal = false;
    r.truncated = steps_ >= params_.episode_length;
    r.observation = pendulum_observation(state_);
    return r;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& env_names() {
    static const std::vector<std::string> names = {"gridworld-5x5", "chain-10", "random-mdp",
                                                   "pendulum"};
    return names;
}

std::optional<TabularMdp> tabular_model(const std::string& name) {
    if (name == "gridworld-5x5") return gridworld(5, 5, 0.1, 1.0).mdp;
    if (name == "chain-10") return chain(10);
    if (name == "random-mdp") return random_mdp(10, 3, 3, kRandomMdpModelSeed);
    if (name == "pendulum") return std::nullopt;
    throw std::invalid_argument("unknown environment '" + name + "'");
}

std::unique_ptr<Environment> make_env(const std::string& name, std::uint64_t seed) {
    if (name == "pendulum") return std::make_unique<PendulumEnv>(seed);
    if (name == "gridworld-5x5") {
        GridWorld g = gridworld(5, 5, 0.1, 1.0);
        std::vector<bool> absorbing(g.mdp.n_states, false);
        absorbing[g.goal] = true;
        const std::size_t goal = g.goal;
        auto env = std::make_unique<TabularEnv>(std::move(g.mdp), g.start, std::move(absorbing), 100, seed);
        env->set_transition_reward([goal](std::size_t, std::size_t, std::size_t next) {
            return next == goal ? 1.0 : kGridStepReward;
        });
        return env;
    }
    if (name == "chain-10") {
        const std::size_t n = 10;
        auto env = std::make_unique<TabularEnv>(chain(n), 0, std::vector<bool>{}, 100, seed);
        env->set_transition_reward([n](std::size_t s, std::size_t, std::size_t next) {
            if (next == 0) return 0.2;
            return (s == n - 1 && next == n - 1) ? 1.0 : 0.0;
        });
        return env;
    }
    if (name == "random-mdp") {
        return std::make_unique<TabularEnv>(random_mdp(10, 3, 3, kRandomMdpModelSeed), 0,
                                            std::vector<bool>{}, 100, seed);
    }
    throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace wesac::env
