#include "wesac/envs.hpp"
#include "wesac/soft_solver.hpp"

#include "softmax_row.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace wesac {

namespace {

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    return std::mt19937_64(seq);
}

WeightTable random_weights(std::size_t ns, std::size_t na, bool unit, std::mt19937_64& rng) {
    if (unit) return WeightTable::ones(ns, na);
    std::uniform_real_distribution<double> unit01(0.0, 1.0);
    WeightTable w{Eigen::MatrixXd(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(na))};
    for (Eigen::Index i = 0; i < w.w.size(); ++i) w.w.data()[i] = unit01(rng);
    return w.clamped();
}

double draw_alpha(const LemmaOptions& opts, std::mt19937_64& rng) {
    if (opts.alpha) return *opts.alpha;
    return std::uniform_real_distribution<double>(0.1, 2.0)(rng);
}

// E_pi[Q] + alpha H^w(pi) for one state.
double improvement_objective(const Eigen::RowVectorXd& pi, const Eigen::RowVectorXd& q,
                             const Eigen::RowVectorXd& w, double alpha) {
    double v = 0.0;
    for (Eigen::Index a = 0; a < pi.size(); ++a) {
        v += pi(a) * q(a);
        if (pi(a) > 0.0) v -= alpha * w(a) * pi(a) * std::log(pi(a));
    }
    return v;
}

void record(LemmaVerdict& v, const QTable& q_old, const QTable& q_new, double slack) {
    ++v.condition_hits;
    const double shortfall = (q_old.q - q_new.q).maxCoeff();
    v.worst_violation = std::max(v.worst_violation, shortfall);
    if (shortfall > slack) ++v.violations;
}

// sum_a w p (ln p - ln t) where t = softmax(Q / (alpha w)).
double weighted_kl_to_target(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& q,
                             const Eigen::RowVectorXd& w, double alpha) {
    const Eigen::VectorXd logits = q.transpose().cwiseQuotient(alpha * w.transpose());
    const Eigen::VectorXd log_t = detail::log_softmax(logits);
    double d = 0.0;
    for (Eigen::Index a = 0; a < p.size(); ++a) {
        if (p(a) > 0.0) d += w(a) * p(a) * (std::log(p(a)) - log_t(a));
    }
    return d;
}

}  // namespace

LemmaVerdict verify_lemma2(std::uint64_t seed, std::size_t trials, const LemmaOptions& opts) {
    LemmaVerdict verdict;
    for (std::size_t t = 0; t < trials; ++t) {
        auto rng = trial_rng(seed, t);
        const auto ns = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
        const auto na = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
        const auto branching = std::uniform_int_distribution<std::size_t>(1, ns)(rng);
        const double gamma = std::uniform_real_distribution<double>(0.5, 0.95)(rng);
        const TabularMdp m = env::random_mdp(ns, na, branching, rng(), gamma);
        const WeightTable w = random_weights(ns, na, opts.unit_weights, rng);
        const double alpha = draw_alpha(opts, rng);
        const TabularPolicy pi_old = env::random_interior_policy(ns, na, rng);

        const QTable q_old = evaluate_policy_exact(m, pi_old, w, alpha);
        const TabularPolicy pi_new = improve_policy_expectation(q_old, w, alpha);
        ++verdict.trials;

        bool premise = true;
        for (Eigen::Index s = 0; s < q_old.q.rows(); ++s) {
            const double gain = improvement_objective(pi_new.pi.row(s), q_old.q.row(s), w.w.row(s), alpha) -
                                improvement_objective(pi_old.pi.row(s), q_old.q.row(s), w.w.row(s), alpha);
            if (gain < -1e-10) premise = false;
        }
        if (!premise) continue;
        record(verdict, q_old, evaluate_policy_exact(m, pi_new, w, alpha), opts.slack);
    }
    return verdict;
}

LemmaVerdict verify_lemma1(std::uint64_t seed, std::size_t premise_hits, const LemmaOptions& opts) {
    LemmaVerdict verdict;
    const std::size_t max_candidates = 1000 * std::max<std::size_t>(premise_hits, 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit01(0.0, 1.0);

    for (std::size_t t = 0; verdict.condition_hits < premise_hits && t < max_candidates; ++t) {
        auto rng = trial_rng(seed, t);
        const std::size_t ns = 2;
        const auto na = std::uniform_int_distribution<std::size_t>(2, 3)(rng);
        const auto branching = std::uniform_int_distribution<std::size_t>(1, ns)(rng);
        const double gamma = std::uniform_real_distribution<double>(0.5, 0.95)(rng);
        const TabularMdp m = env::random_mdp(ns, na, branching, rng(), gamma);
        const WeightTable w = random_weights(ns, na, opts.unit_weights, rng);
        const double alpha = draw_alpha(opts, rng);
        if (!(alpha > 0.0)) continue;
        const TabularPolicy pi_old = env::random_interior_policy(ns, na, rng);
        const QTable q_old = evaluate_policy_exact(m, pi_old, w, alpha);

        // Perturb each row; most perturbations keep the weight mass, the rest only
        // keep the probability mass and exercise the constraint filter.
        const bool keep_weight_mass = unit01(rng) < 0.8;
        TabularPolicy candidate = pi_old;
        bool feasible = true;
        for (Eigen::Index s = 0; s < candidate.pi.rows(); ++s) {
            const Eigen::VectorXd ws = w.w.row(s).transpose();
            const Eigen::VectorXd p0 = pi_old.pi.row(s).transpose();
            Eigen::VectorXd d(p0.size());
            for (Eigen::Index a = 0; a < d.size(); ++a) d(a) = gauss(rng);
            d.array() -= d.mean();
            if (keep_weight_mass) {
                Eigen::VectorXd v = ws.array() - ws.mean();
                if (v.norm() > 1e-12) {
                    v.normalize();
                    d -= d.dot(v) * v;
                }
            }
            const Eigen::VectorXd logits = q_old.q.row(s).transpose().cwiseQuotient(alpha * ws);
            const Eigen::VectorXd grad =
                ws.cwiseProduct((p0.array().log() - detail::log_softmax(logits).array() + 1.0).matrix());
            if (d.dot(grad) > 0.0 && unit01(rng) < 0.9) d = -d;
            double tau_max = std::numeric_limits<double>::infinity();
            for (Eigen::Index a = 0; a < d.size(); ++a) {
                if (d(a) < 0.0) tau_max = std::min(tau_max, p0(a) / -d(a));
            }
            if (!std::isfinite(tau_max)) {
                feasible = false;
                break;
            }
            const double tau = unit01(rng) * 0.5 * tau_max;
            candidate.pi.row(s) = (p0 + tau * d).transpose();
            if ((candidate.pi.row(s).array() <= 0.0).any()) feasible = false;
        }
        if (!feasible) continue;
        ++verdict.trials;

        bool premise = true;
        for (Eigen::Index s = 0; s < candidate.pi.rows() && premise; ++s) {
            const double kl_new = weighted_kl_to_target(candidate.pi.row(s), q_old.q.row(s), w.w.row(s), alpha);
            const double kl_old = weighted_kl_to_target(pi_old.pi.row(s), q_old.q.row(s), w.w.row(s), alpha);
            const double mass_new = candidate.pi.row(s).dot(w.w.row(s));
            const double mass_old = pi_old.pi.row(s).dot(w.w.row(s));
            premise = kl_new <= kl_old && std::abs(mass_new - mass_old) <= 1e-8;
        }
        if (!premise) continue;
        record(verdict, q_old, evaluate_policy_exact(m, candidate, w, alpha), opts.slack);
    }
    return verdict;
}

}  // namespace wesac
