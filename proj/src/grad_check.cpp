#include "wesac/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace wesac::ad {

namespace {

std::vector<Matrix> unflatten(const Eigen::VectorXd& flat, const std::vector<Matrix>& like) {
    std::vector<Matrix> out = like;
    Eigen::Index k = 0;
    for (auto& m : out) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = flat(k++);
    }
    return out;
}

}  // namespace

GradCheckReport grad_check_flat(const std::function<double(const Eigen::VectorXd&)>& value,
                                const Eigen::VectorXd& analytic, const Eigen::VectorXd& x0,
                                double tol, double step, double floor) {
    if (analytic.size() != x0.size()) throw std::invalid_argument("grad_check: size mismatch");
    GradCheckReport r;
    Eigen::VectorXd x = x0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x(i) = x0(i) + step;
        const double fp = value(x);
        x(i) = x0(i) - step;
        const double fm = value(x);
        x(i) = x0(i);
        const double numeric = (fp - fm) / (2.0 * step);
        const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), floor});
        const double err = std::abs(analytic(i) - numeric) / denom;
        if (!(err <= r.max_relative_error)) {
            r.max_relative_error = err;
            r.worst_index = static_cast<std::size_t>(i);
            r.analytic_at_worst = analytic(i);
            r.numeric_at_worst = numeric;
        }
    }
    r.passed = r.max_relative_error < tol;
    return r;
}

GradCheckReport grad_check(const ScalarGraphFn& fn, const std::vector<Matrix>& params, double tol,
                           double step, double floor) {
    Eigen::Index total = 0;
    for (const auto& m : params) total += m.size();
    Eigen::VectorXd x0(total);
    {
        Eigen::Index k = 0;
        for (const auto& m : params) {
            for (Eigen::Index i = 0; i < m.size(); ++i) x0(k++) = m.data()[i];
        }
    }

    auto run = [&](const std::vector<Matrix>& values, Tape& tape, std::vector<Var>& leaves) {
        leaves.clear();
        for (const auto& m : values) leaves.push_back(tape.variable(m));
        Var out = fn(tape, leaves);
        if (out.rows() != 1 || out.cols() != 1) throw std::invalid_argument("grad_check: fn is not scalar");
        return out;
    };

    Tape tape;
    std::vector<Var> leaves;
    Var out = run(params, tape, leaves);
    tape.backward(out);
    Eigen::VectorXd analytic(total);
    {
        Eigen::Index k = 0;
        for (const auto& leaf : leaves) {
            const Matrix g = tape.grad(leaf);
            for (Eigen::Index i = 0; i < g.size(); ++i) analytic(k++) = g.data()[i];
        }
    }

    auto value = [&](const Eigen::VectorXd& x) {
        Tape t;
        std::vector<Var> l;
        return run(unflatten(x, params), t, l).value()(0, 0);
    };
    return grad_check_flat(value, analytic, x0, tol, step, floor);
}

}  // namespace wesac::ad
