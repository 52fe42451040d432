#include "wesac/autodiff.hpp"
#include "wesac/grad_check.hpp"
#include "wesac/mlp.hpp"
#include "wesac/squashed_gaussian.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace wesac::ad;

TEST(Tape, SingleParameter) {
    Tape t;
    Var p = t.variable(Matrix::Constant(1, 1, 4.0));
    t.backward(p);
    EXPECT_EQ(t.grad(p)(0, 0), 1.0);
}

TEST(Tape, Square) {
    Tape t;
    Var p = t.variable(Matrix::Constant(1, 1, 3.0));
    t.backward(square(p));
    EXPECT_EQ(t.grad(p)(0, 0), 6.0);
}

TEST(Tape, ConstantsGetNoGradient) {
    Tape t;
    Var c = t.constant(Matrix::Constant(1, 1, 2.0));
    Var p = t.variable(Matrix::Constant(1, 1, 5.0));
    t.backward(c * p);
    EXPECT_EQ(t.grad(p)(0, 0), 2.0);
    EXPECT_EQ(t.grad(c)(0, 0), 0.0);
}

TEST(Tape, SharedSubexpressionAccumulates) {
    Tape t;
    Var x = t.variable(Matrix::Constant(1, 1, 1.5));
    Var y = x * x + x;
    t.backward(y);
    EXPECT_DOUBLE_EQ(t.grad(x)(0, 0), 2 * 1.5 + 1);
}

TEST(Tape, ShapeErrors) {
    Tape t;
    Var a = t.variable(Matrix::Zero(2, 3));
    Var b = t.variable(Matrix::Zero(2, 2));
    EXPECT_THROW(a + b, std::invalid_argument);
    EXPECT_THROW(matmul(a, a), std::invalid_argument);
    EXPECT_THROW(t.backward(a), std::invalid_argument);
    Tape other;
    Var c = other.variable(Matrix::Zero(2, 3));
    EXPECT_THROW(a + c, std::invalid_argument);
}

TEST(Mlp, ZeroParamsGiveZeroOutput) {
    const auto p = MlpParams::zeros({3, 4, 2}, Activation::Tanh);
    const Matrix y = evaluate(p, Matrix::Random(5, 3));
    EXPECT_EQ(y, Matrix::Zero(5, 2));
}

TEST(Mlp, IdentityLayer) {
    auto p = MlpParams::zeros({3, 3}, Activation::Relu);
    p.weights[0] = Matrix::Identity(3, 3);
    const Matrix x = Matrix::Random(4, 3);
    EXPECT_EQ(evaluate(p, x), x);
    Tape t;
    EXPECT_EQ(forward(p, t.constant(x), t).output.value(), x);
}

TEST(Mlp, MatchesLoopOracle) {
    std::mt19937_64 rng(1);
    for (auto act : {Activation::Tanh, Activation::Relu}) {
        const auto p = MlpParams::init({4, 7, 5, 3}, act, rng);
        const Matrix x = Matrix::Random(6, 4);
        const Matrix y = evaluate(p, x);
        Tape t;
        const Matrix y_tape = forward(p, t.constant(x), t).output.value();
        for (Eigen::Index i = 0; i < 6; ++i) {
            const auto ref = oracle::mlp(p, {x(i, 0), x(i, 1), x(i, 2), x(i, 3)});
            for (Eigen::Index j = 0; j < 3; ++j) {
                EXPECT_NEAR(y(i, j), ref[j], 1e-12);
                EXPECT_NEAR(y_tape(i, j), ref[j], 1e-12);
            }
        }
    }
}

TEST(Mlp, DimensionMismatchAndNonFinite) {
    std::mt19937_64 rng(2);
    auto p = MlpParams::init({2, 3, 1}, Activation::Tanh, rng);
    EXPECT_THROW(evaluate(p, Matrix::Zero(1, 3)), std::invalid_argument);
    p.biases[1](0, 0) = NAN;
    EXPECT_THROW(evaluate(p, Matrix::Zero(1, 2)), NonFiniteError);
}

TEST(Mlp, FlattenRoundTrip) {
    std::mt19937_64 rng(3);
    const auto p = MlpParams::init({3, 5, 2}, Activation::Relu, rng);
    auto q = p.zeros_like();
    q.assign_flat(p.flatten());
    EXPECT_EQ(q.flatten(), p.flatten());
    EXPECT_EQ(p.num_params(), 3u * 5 + 5 + 5 * 2 + 2);
}

TEST(Mlp, CheckpointRoundTrip) {
    std::mt19937_64 rng(4);
    const auto p = MlpParams::init({3, 8, 2}, Activation::Tanh, rng);
    const auto path = std::filesystem::temp_directory_path() / "wesac_ckpt_test.json";
    save_checkpoint(p, path);
    const auto q = load_checkpoint(path);
    EXPECT_EQ(q.sizes, p.sizes);
    EXPECT_EQ(q.activation, p.activation);
    EXPECT_EQ(q.flatten(), p.flatten());
    std::filesystem::remove(path);
}

TEST(Mlp, PolyakUpdate) {
    auto target = MlpParams::zeros({2, 2}, Activation::Relu);
    auto source = target.zeros_like();
    source.assign_flat(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(source.num_params())));
    auto t1 = target;
    polyak_update(t1, source, 0.01);
    const Eigen::VectorXd f1 = t1.flatten();
    for (Eigen::Index i = 0; i < f1.size(); ++i) EXPECT_NEAR(f1(i), 0.01, 1e-16);
    auto t2 = target;
    polyak_update(t2, source, 1.0);
    EXPECT_EQ(t2.flatten(), source.flatten());
    auto t3 = target;
    polyak_update(t3, source, 0.0);
    EXPECT_EQ(t3.flatten(), target.flatten());
}

TEST(Mlp, AdamFirstStepMovesByLearningRate) {
    auto p = MlpParams::zeros({1, 1}, Activation::Relu);
    auto g = p.zeros_like();
    g.weights[0](0, 0) = 3.0;
    g.biases[0](0, 0) = -0.5;
    Adam opt(0.1);
    opt.step(p, g);
    EXPECT_NEAR(p.weights[0](0, 0), -0.1, 1e-8);
    EXPECT_NEAR(p.biases[0](0, 0), 0.1, 1e-8);
}

TEST(GradCheck, LinearFunction) {
    const Matrix c = Matrix::Random(3, 2);
    const auto r = grad_check([&](Tape& t, std::span<const Var> p) { return sum(t.constant(c) * p[0]); },
                              {Matrix::Random(3, 2)}, 1e-8);
    EXPECT_TRUE(r.passed);
    EXPECT_LT(r.max_relative_error, 1e-9);
}

TEST(GradCheck, ComposedTanhExpLog) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        const Matrix x0 = Matrix::Random(2, 3);
        const Matrix y0 = Matrix::Random(3, 2);
        const auto r = grad_check(
            [](Tape&, std::span<const Var> p) {
                Var h = tanh(matmul(p[0], p[1]));
                Var z = log(exp(h) + 1.0) + softplus(-2.0 * h);
                return mean(square(z) - minimum(h, z) + clamp(h, -0.5, 0.5));
            },
            {x0, y0}, 1e-4);
        EXPECT_TRUE(r.passed) << r.max_relative_error << " at " << r.worst_index;
    }
}

TEST(GradCheck, MlpMeanSquareLoss) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const auto p = MlpParams::init({3, 6, 6, 2}, Activation::Tanh, rng);
        const Matrix x = Matrix::Random(5, 3), y = Matrix::Random(5, 2);
        std::vector<Matrix> leaves;
        for (std::size_t l = 0; l < p.num_layers(); ++l) {
            leaves.push_back(p.weights[l]);
            leaves.push_back(p.biases[l]);
        }
        const auto r = grad_check(
            [&](Tape& tape, std::span<const Var> v) {
                Var h = tape.constant(x);
                for (std::size_t l = 0; l < 3; ++l) {
                    h = add_row(matmul(h, v[2 * l]), v[2 * l + 1]);
                    if (l < 2) h = tanh(h);
                }
                return mean(square(h - tape.constant(y)));
            },
            leaves, 1e-4);
        EXPECT_TRUE(r.passed) << r.max_relative_error;
    }
}

TEST(GradCheck, CorruptedPartialIsReported) {
    const auto r = grad_check(
        [](Tape& t, std::span<const Var> p) {
            const Matrix v = p[0].value().array().square();
            Var sq = t.custom_unary(p[0], v, [](const Matrix& in, const Matrix& g) {
                return Matrix(3.0 * in.cwiseProduct(g));  // should be 2 x
            });
            return sum(sq);
        },
        {Matrix::Constant(2, 2, 0.7)}, 1e-4);
    EXPECT_FALSE(r.passed);
    EXPECT_NEAR(r.max_relative_error, 1.0 / 3.0, 1e-6);
}

TEST(SquashedGaussian, ZeroNoiseGivesSquashedMean) {
    Tape t;
    Matrix out(2, 2);
    out << 0.3, -1.0, -2.0, 0.5;
    const auto head = make_head(t.constant(out), 1, 2.0);
    const auto s = sample_squashed(head, Matrix::Zero(2, 1));
    EXPECT_DOUBLE_EQ(s.action.value()(0, 0), 2.0 * std::tanh(0.3));
    EXPECT_DOUBLE_EQ(s.action.value()(1, 0), 2.0 * std::tanh(-2.0));
}

TEST(SquashedGaussian, LogStdClampKeepsLogProbFinite) {
    Tape t;
    Matrix out(1, 2);
    out << 0.0, -1000.0;
    const auto head = make_head(t.constant(out), 1, 1.0);
    EXPECT_EQ(head.log_std.value()(0, 0), kLogStdMin);
    const auto s = sample_squashed(head, Matrix::Zero(1, 1));
    EXPECT_TRUE(std::isfinite(s.log_prob.value()(0, 0)));
    EXPECT_GT(s.log_prob.value()(0, 0), 15.0);
}

TEST(SquashedGaussian, DensityOracle) {
    Tape t;
    const auto head = make_head(t.constant(Matrix::Zero(1, 2)), 1, 1.0);
    const auto s = sample_squashed(head, Matrix::Constant(1, 1, 0.5));
    EXPECT_NEAR(s.log_prob.value()(0, 0), oracle::squashed_log_density(0.0, 0.0, 1.0, 0.5), 1e-10);

    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        const double mu = n(rng), ls = 0.5 * n(rng), bound = 0.5 + std::abs(n(rng)), eps = n(rng);
        Tape tk;
        const auto hk = make_head(tk.constant((Matrix(1, 2) << mu, ls).finished()), 1, bound);
        const auto sk = sample_squashed(hk, Matrix::Constant(1, 1, eps));
        EXPECT_NEAR(sk.log_prob.value()(0, 0), oracle::squashed_log_density(mu, ls, bound, eps), 1e-9);
        const auto vals = sample_squashed_values(head_values((Matrix(1, 2) << mu, ls).finished(), 1),
                                                 Matrix::Constant(1, 1, eps), bound);
        EXPECT_NEAR(vals.log_prob(0, 0), sk.log_prob.value()(0, 0), 1e-12);
        EXPECT_NEAR(vals.action(0, 0), sk.action.value()(0, 0), 1e-15);
    }
}

TEST(SquashedGaussian, DensityIntegratesToOne) {
    // Trapezoid rule over a in (-bound, bound) using the pre-squash grid.
    const double mu = 0.4, ls = -0.3, bound = 2.0;
    const int n = 2001;
    double total = 0.0, prev_a = 0.0, prev_p = 0.0;
    for (int i = 0; i < n; ++i) {
        const double eps = -8.0 + 16.0 * i / (n - 1);
        Tape t;
        const auto h = make_head(t.constant((Matrix(1, 2) << mu, ls).finished()), 1, bound);
        const auto s = sample_squashed(h, Matrix::Constant(1, 1, eps));
        const double a = s.action.value()(0, 0), p = std::exp(s.log_prob.value()(0, 0));
        if (i > 0) total += 0.5 * (p + prev_p) * (a - prev_a);
        prev_a = a;
        prev_p = p;
    }
    EXPECT_NEAR(total, 1.0, 1e-4);
}

TEST(SquashedGaussian, LogProbGradients) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 10; ++k) {
        Matrix out(3, 4), noise(3, 2);
        for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = 0.8 * n(rng);
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = n(rng);
        const auto r = grad_check(
            [&](Tape&, std::span<const Var> p) {
                const auto s = sample_squashed(make_head(p[0], 2, 1.5), noise);
                return sum(s.log_prob) + sum(s.action);
            },
            {out}, 1e-4);
        EXPECT_TRUE(r.passed) << r.max_relative_error;
    }
}
