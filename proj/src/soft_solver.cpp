#include "wesac/soft_solver.hpp"

#include "softmax_row.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace wesac {

QTable weighted_soft_backup(const TabularMdp& m, const QTable& q, const TabularPolicy& pi,
                            const WeightTable& w, double alpha) {
    const VTable v = soft_value_from_q(m, q, pi, w, alpha);
    const Eigen::VectorXd next = m.transition * v.v;
    QTable out{m.reward};
    const auto na = static_cast<Eigen::Index>(m.n_actions);
    for (Eigen::Index s = 0; s < out.q.rows(); ++s) {
        for (Eigen::Index a = 0; a < na; ++a) out.q(s, a) += m.gamma * next(s * na + a);
    }
    return out;
}

std::pair<QTable, SolveReport> evaluate_policy_iterative(const TabularMdp& m,
                                                         const TabularPolicy& pi,
                                                         const WeightTable& w, double alpha,
                                                         double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("evaluate_policy_iterative: tol must be > 0");
    require_valid_mdp(m);
    QTable q{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.n_states),
                                   static_cast<Eigen::Index>(m.n_actions))};
    SolveReport report;
    while (report.iterations < kMaxBackupIterations) {
        QTable next = weighted_soft_backup(m, q, pi, w, alpha);
        report.final_sup_norm_delta = (next.q - q.q).cwiseAbs().maxCoeff();
        q = std::move(next);
        ++report.iterations;
        if (report.final_sup_norm_delta < tol) {
            report.converged = true;
            return {q, report};
        }
    }
    throw std::runtime_error("evaluate_policy_iterative: iteration cap exceeded");
}

TabularPolicy improve_policy_expectation(const QTable& q, const WeightTable& w, double alpha) {
    if (q.q.rows() != w.w.rows() || q.q.cols() != w.w.cols()) {
        throw std::invalid_argument("improve_policy_expectation: Q and w shapes differ");
    }
    if (alpha < 0.0) throw std::invalid_argument("improve_policy_expectation: alpha must be >= 0");
    if (alpha == 0.0) return TabularPolicy::deterministic(greedy_actions(q.q), q.q.cols());

    const WeightTable wc = w.clamped();
    TabularPolicy out{Eigen::MatrixXd(q.q.rows(), q.q.cols())};
    for (Eigen::Index s = 0; s < q.q.rows(); ++s) {
        const Eigen::VectorXd scale = alpha * wc.w.row(s).transpose();
        out.pi.row(s) = detail::exponential_row(q.q.row(s).transpose(), scale, -1.0).transpose();
    }
    return out;
}

TabularPolicy weighted_kl_target(const QTable& q, const WeightTable& w, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("weighted_kl_target: alpha must be > 0");
    const WeightTable wc = w.clamped();
    TabularPolicy t{Eigen::MatrixXd(q.q.rows(), q.q.cols())};
    for (Eigen::Index s = 0; s < q.q.rows(); ++s) {
        const Eigen::VectorXd logits =
            q.q.row(s).transpose().cwiseQuotient(alpha * wc.w.row(s).transpose());
        t.pi.row(s) = detail::log_softmax(logits).array().exp().matrix().transpose();
    }
    return t;
}

namespace {

// sum_a w p (ln p - log_target), with 0 ln 0 = 0.
double weighted_kl_log(const Eigen::VectorXd& w, const Eigen::VectorXd& p,
                       const Eigen::VectorXd& log_target) {
    double d = 0.0;
    for (Eigen::Index a = 0; a < p.size(); ++a) {
        if (p(a) > 0.0) d += w(a) * p(a) * (std::log(p(a)) - log_target(a));
    }
    return d;
}

// Orthogonal projection onto {d : sum d = 0, sum w d = 0}.
Eigen::VectorXd project_mass_preserving(const Eigen::VectorXd& d, const Eigen::VectorXd& w) {
    const auto n = static_cast<double>(d.size());
    const Eigen::VectorXd e1 = Eigen::VectorXd::Constant(d.size(), 1.0 / std::sqrt(n));
    Eigen::VectorXd out = d - d.dot(e1) * e1;
    Eigen::VectorXd v = w - w.dot(e1) * e1;
    const double vn = v.norm();
    if (vn > 1e-12 * (1.0 + w.norm())) {
        v /= vn;
        out -= out.dot(v) * v;
    }
    return out;
}

}  // namespace

WeightedKlStep improve_policy_weighted_kl(const QTable& q, const WeightTable& w, double alpha,
                                          const TabularPolicy& pi_old) {
    if (pi_old.pi.rows() != q.q.rows() || pi_old.pi.cols() != q.q.cols() ||
        w.w.rows() != q.q.rows() || w.w.cols() != q.q.cols()) {
        throw std::invalid_argument("improve_policy_weighted_kl: shape mismatch");
    }
    if (!(alpha > 0.0)) throw std::invalid_argument("improve_policy_weighted_kl: alpha must be > 0");
    if ((pi_old.pi.array() <= 0.0).any()) {
        throw std::invalid_argument("improve_policy_weighted_kl: pi_old must be interior");
    }

    const WeightTable wc = w.clamped();
    WeightedKlStep step{pi_old, false, 0};
    for (Eigen::Index s = 0; s < q.q.rows(); ++s) {
        const Eigen::VectorXd ws = wc.w.row(s).transpose();
        const Eigen::VectorXd scale = alpha * ws;
        const Eigen::VectorXd logits = q.q.row(s).transpose().cwiseQuotient(scale);
        const double log_z = detail::log_sum_exp(logits);
        const Eigen::VectorXd log_t = logits.array() - log_z;
        const Eigen::VectorXd p0 = pi_old.pi.row(s).transpose();
        const double d0 = weighted_kl_log(ws, p0, log_t);

        const Eigen::VectorXd grad =
            ws.cwiseProduct((p0.array().log() - log_t.array() + 1.0).matrix());
        const Eigen::VectorXd pg = project_mass_preserving(-grad, ws);
        if (pg.lpNorm<Eigen::Infinity>() < 1e-10) continue;

        // Unconstrained minimizer over the simplex: ln p = log_t - 1 + mu / w.
        const Eigen::VectorXd unconstrained =
            detail::exponential_row(q.q.row(s).transpose(), scale, -1.0 - log_z);
        Eigen::VectorXd dir = project_mass_preserving(unconstrained - p0, ws);
        if (!(dir.dot(grad) < -1e-14 * dir.norm() * grad.norm())) dir = pg;

        double tau_max = 1.0;
        for (Eigen::Index a = 0; a < dir.size(); ++a) {
            if (dir(a) < 0.0) tau_max = std::min(tau_max, 0.99 * p0(a) / -dir(a));
        }
        const double slope = dir.dot(grad);
        double tau = tau_max;
        for (int k = 0; k < 80; ++k, tau *= 0.5) {
            const Eigen::VectorXd cand = p0 + tau * dir;
            if ((cand.array() <= 0.0).any()) continue;
            const double dk = weighted_kl_log(ws, cand, log_t);
            if (dk < d0 + 1e-4 * tau * slope) {
                step.policy.pi.row(s) = cand.transpose();
                step.improved = true;
                ++step.states_moved;
                break;
            }
        }
    }
    return step;
}

SoftPiResult solve_weighted_soft_pi(const TabularMdp& m, const WeightTable& w, double alpha,
                                    double tol, std::size_t max_iterations) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_weighted_soft_pi: tol must be > 0");
    require_valid_mdp(m);
    const WeightTable wc = w.clamped();
    TabularPolicy pi = TabularPolicy::uniform(m.n_states, m.n_actions);
    SolveReport report;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        QTable q = evaluate_policy_exact(m, pi, wc, alpha);
        report.objective_trace.push_back(soft_value_from_q(m, q, pi, wc, alpha).v.mean());
        TabularPolicy next = improve_policy_expectation(q, wc, alpha);
        report.final_sup_norm_delta = (next.pi - pi.pi).cwiseAbs().maxCoeff();
        report.iterations = it + 1;
        pi = std::move(next);
        if (report.final_sup_norm_delta < tol) {
            report.converged = true;
            QTable final_q = evaluate_policy_exact(m, pi, wc, alpha);
            return {std::move(pi), std::move(final_q), std::move(report)};
        }
    }
    throw std::runtime_error("solve_weighted_soft_pi: iteration cap exceeded");
}

}  // namespace wesac

namespace wesac::detail {

double log_sum_exp(const Eigen::VectorXd& x) {
    const double mx = x.maxCoeff();
    return mx + std::log((x.array() - mx).exp().sum());
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& x) { return x.array() - log_sum_exp(x); }

Eigen::VectorXd exponential_row(const Eigen::VectorXd& c, const Eigen::VectorXd& s, double k) {
    const auto n = static_cast<double>(c.size());
    const double lo0 = (c + k * s).maxCoeff();
    const double hi0 = (c + (k + std::log(n)) * s).maxCoeff();
    if (!std::isfinite(lo0) || !std::isfinite(hi0)) {
        throw std::runtime_error("exponential_row: no finite root bracket (extreme Q/alpha ratio)");
    }
    auto row = [&](double lambda) {
        return ((c.array() - lambda) / s.array() + k).exp().matrix().eval();
    };
    double lo = lo0;
    double hi = hi0;
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double sum = row(mid).sum();
        if (sum == 1.0) {
            lo = hi = mid;
            break;
        }
        (sum > 1.0 ? lo : hi) = mid;
    }
    Eigen::VectorXd p = row(lo);
    const double total = p.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw std::runtime_error("exponential_row: degenerate normalization");
    }
    return p / total;
}

}  // namespace wesac::detail
