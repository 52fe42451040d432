#include "wesac/envs.hpp"
#include "wesac/mdp.hpp"
#include "wesac/mdp_io.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace wesac;

namespace {

TabularMdp two_state() {
    TabularMdp m(2, 2, 0.9);
    m.p(0, 0, 0) = 0.3;
    m.p(0, 0, 1) = 0.7;
    m.p(0, 1, 1) = 1.0;
    m.p(1, 0, 0) = 1.0;
    m.p(1, 1, 0) = 0.5;
    m.p(1, 1, 1) = 0.5;
    m.reward << 1.0, 0.0, -0.5, 2.0;
    return m;
}

TabularMdp single(double r, double gamma) {
    TabularMdp m(1, 1, gamma);
    m.p(0, 0, 0) = 1.0;
    m.reward(0, 0) = r;
    return m;
}

}  // namespace

TEST(ValidateMdp, WellFormed) { EXPECT_TRUE(validate_mdp(two_state()).empty()); }

TEST(ValidateMdp, NamesBadRow) {
    auto m = two_state();
    m.p(1, 0, 0) = 0.9;
    const auto r = validate_mdp(m);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_NE(r[0].find("s=1, a=0"), std::string::npos) << r[0];
    EXPECT_THROW(require_valid_mdp(m), std::invalid_argument);
}

TEST(ValidateMdp, NamesDiscount) {
    auto m = two_state();
    m.gamma = 1.0;
    const auto r = validate_mdp(m);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_NE(r[0].find("gamma"), std::string::npos);
}

TEST(ValidateMdp, NegativeAndNonFinite) {
    auto m = two_state();
    m.p(0, 1, 0) = -0.1;
    m.p(0, 1, 1) = 1.1;
    m.reward(1, 1) = NAN;
    EXPECT_EQ(validate_mdp(m).size(), 2u);
}

TEST(SoftValue, DeterministicPolicyReadsQ) {
    const auto m = two_state();
    QTable q{(Eigen::MatrixXd(2, 2) << 1.0, 2.0, 3.0, 4.0).finished()};
    WeightTable w{(Eigen::MatrixXd(2, 2) << 0.3, 0.9, 0.1, 0.6).finished()};
    const auto v = soft_value_from_q(m, q, TabularPolicy::deterministic({1, 0}, 2), w, 2.0);
    EXPECT_EQ(v.v(0), 2.0);
    EXPECT_EQ(v.v(1), 3.0);
}

TEST(SoftValue, AlphaZeroIsExpectation) {
    const auto m = two_state();
    QTable q{(Eigen::MatrixXd(2, 2) << 1.0, 2.0, 3.0, 4.0).finished()};
    TabularPolicy pi{(Eigen::MatrixXd(2, 2) << 0.25, 0.75, 0.5, 0.5).finished()};
    const auto v = soft_value_from_q(m, q, pi, WeightTable::ones(2, 2), 0.0);
    EXPECT_DOUBLE_EQ(v.v(0), 1.75);
    EXPECT_DOUBLE_EQ(v.v(1), 3.5);
}

TEST(SoftValue, UniformTwoActions) {
    const auto m = two_state();
    const auto v = soft_value_from_q(m, QTable{Eigen::MatrixXd::Zero(2, 2)}, TabularPolicy::uniform(2, 2),
                                     WeightTable::ones(2, 2), 1.0);
    EXPECT_NEAR(v.v(0), 0.693147180559945, 1e-14);
    EXPECT_NEAR(v.v(1), 0.693147180559945, 1e-14);
}

TEST(EvaluateExact, GeometricSeries) {
    const auto q = evaluate_policy_exact(single(1.0, 0.5), TabularPolicy::deterministic({0}, 1),
                                         WeightTable::ones(1, 1), 1.0);
    EXPECT_NEAR(q.q(0, 0), 2.0, 1e-14);
}

TEST(EvaluateExact, ZeroDiscountIsReward) {
    auto m = two_state();
    m.gamma = 0.0;
    const auto q = evaluate_policy_exact(m, TabularPolicy::uniform(2, 2), WeightTable::ones(2, 2), 0.7);
    EXPECT_EQ(q.q, m.reward);
}

TEST(EvaluateExact, MatchesTenThousandBackups) {
    std::mt19937_64 rng(99);
    const auto m = env::random_mdp(4, 3, 3, 17);
    const double alpha = 0.7;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    oracle::Mat w(4, oracle::Vec(3)), pi(4, oracle::Vec(3, 1.0 / 3.0));
    WeightTable wt{Eigen::MatrixXd(4, 3)};
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t a = 0; a < 3; ++a) wt.w(s, a) = w[s][a] = u(rng);
    }
    // Plain-loop backup operator iterated from zero.
    oracle::Mat q(4, oracle::Vec(3, 0.0));
    for (int it = 0; it < 10000; ++it) {
        oracle::Vec v(4, 0.0);
        for (std::size_t s = 0; s < 4; ++s) {
            for (std::size_t a = 0; a < 3; ++a) v[s] += pi[s][a] * (q[s][a] - alpha * w[s][a] * std::log(pi[s][a]));
        }
        for (std::size_t s = 0; s < 4; ++s) {
            for (std::size_t a = 0; a < 3; ++a) {
                double e = 0.0;
                for (std::size_t t = 0; t < 4; ++t) e += m.p(s, a, t) * v[t];
                q[s][a] = m.reward(s, a) + m.gamma * e;
            }
        }
    }
    const auto exact = evaluate_policy_exact(m, TabularPolicy::uniform(4, 3), wt, alpha);
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(exact.q(s, a), q[s][a], 1e-9);
    }
}

TEST(EvaluateExact, MatchesOracleLinearSolve) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const auto m = env::random_mdp(2 + t % 5, 2 + t % 3, 2, 100 + t);
        const auto pi = env::random_interior_policy(m.n_states, m.n_actions, rng);
        WeightTable w{Eigen::MatrixXd::Random(m.n_states, m.n_actions).cwiseAbs()};
        const auto q = evaluate_policy_exact(m, pi, w, 0.4);
        const auto ref = oracle::soft_q(m, oracle::to_mat(pi.pi), oracle::to_mat(w.w), 0.4);
        for (std::size_t s = 0; s < m.n_states; ++s) {
            for (std::size_t a = 0; a < m.n_actions; ++a) EXPECT_NEAR(q.q(s, a), ref[s][a], 1e-11);
        }
    }
}

TEST(EvaluateExact, RejectsInvalidInput) {
    auto m = two_state();
    EXPECT_THROW(evaluate_policy_exact(m, TabularPolicy::uniform(3, 2), WeightTable::ones(2, 2), 1.0),
                 std::invalid_argument);
    m.gamma = 1.0;
    EXPECT_THROW(evaluate_policy_exact(m, TabularPolicy::uniform(2, 2), WeightTable::ones(2, 2), 1.0),
                 std::invalid_argument);
}

TEST(GreedyActions, FirstMaximizerOnTies) {
    Eigen::MatrixXd t(2, 3);
    t << 1, 3, 3, 0, -1, -2;
    EXPECT_EQ(greedy_actions(t), (std::vector<std::size_t>{1, 0}));
}

TEST(WeightedObjective, IsMeanOfSoftValues) {
    const auto m = two_state();
    const auto pi = TabularPolicy::uniform(2, 2);
    const auto w = WeightTable::ones(2, 2);
    const auto q = evaluate_policy_exact(m, pi, w, 0.5);
    const auto v = soft_value_from_q(m, q, pi, w, 0.5);
    EXPECT_NEAR(weighted_objective(m, pi, w, 0.5), v.v.mean(), 1e-12);
}

TEST(MdpIo, RoundTrip) {
    const auto m = env::random_mdp(5, 3, 2, 8);
    const auto path = std::filesystem::temp_directory_path() / "wesac_mdp_roundtrip.json";
    save_mdp(m, path);
    const auto back = load_mdp(path);
    EXPECT_EQ(back.n_states, m.n_states);
    EXPECT_EQ(back.n_actions, m.n_actions);
    EXPECT_EQ(back.gamma, m.gamma);
    EXPECT_EQ(back.transition, m.transition);
    EXPECT_EQ(back.reward, m.reward);
    std::filesystem::remove(path);
}

TEST(MdpIo, ShapeErrors) {
    auto j = mdp_to_json(two_state());
    j["reward"] = nlohmann::json::array({{1.0}});
    EXPECT_THROW(mdp_from_json(j), std::invalid_argument);
}
