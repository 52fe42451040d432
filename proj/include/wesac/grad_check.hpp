#pragma once

#include "wesac/autodiff.hpp"

#include <functional>
#include <span>
#include <vector>

namespace wesac::ad {

struct GradCheckReport {
    /// max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, floor)
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    bool passed = false;
};

/// Builds a scalar (1x1) graph from parameter leaves created by grad_check.
using ScalarGraphFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Central differences with step `step` on every entry of every parameter,
/// compared against one backward pass.
GradCheckReport grad_check(const ScalarGraphFn& fn, const std::vector<Matrix>& params, double tol,
                           double step = 1e-5, double floor = 1e-6);

/// Same check for a function of a flat parameter vector whose analytic
/// gradient was obtained elsewhere.
GradCheckReport grad_check_flat(const std::function<double(const Eigen::VectorXd&)>& value,
                                const Eigen::VectorXd& analytic, const Eigen::VectorXd& x0,
                                double tol, double step = 1e-5, double floor = 1e-6);

}  // namespace wesac::ad
