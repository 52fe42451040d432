#include "wesac/mdp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace wesac {

namespace {

void check_table(const Eigen::MatrixXd& t, const TabularMdp& m, const char* what) {
    if (static_cast<std::size_t>(t.rows()) != m.n_states ||
        static_cast<std::size_t>(t.cols()) != m.n_actions) {
        std::ostringstream os;
        os << what << " has shape " << t.rows() << "x" << t.cols() << ", expected "
           << m.n_states << "x" << m.n_actions;
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

TabularMdp::TabularMdp(std::size_t states, std::size_t actions, double discount)
    : n_states(states),
      n_actions(actions),
      transition(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states * actions),
                                       static_cast<Eigen::Index>(states))),
      reward(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states),
                                   static_cast<Eigen::Index>(actions))),
      gamma(discount) {}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
    return {Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_states),
                                      static_cast<Eigen::Index>(n_actions),
                                      1.0 / static_cast<double>(n_actions))};
}

TabularPolicy TabularPolicy::deterministic(const std::vector<std::size_t>& actions,
                                           std::size_t n_actions) {
    TabularPolicy p{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()),
                                          static_cast<Eigen::Index>(n_actions))};
    for (std::size_t s = 0; s < actions.size(); ++s) {
        p.pi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
    }
    return p;
}

WeightTable WeightTable::ones(std::size_t n_states, std::size_t n_actions) {
    return {Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n_states),
                                  static_cast<Eigen::Index>(n_actions))};
}

WeightTable WeightTable::clamped(double lo) const {
    return {w.cwiseMax(lo).cwiseMin(1.0)};
}

std::vector<std::string> validate_mdp(const TabularMdp& m) {
    std::vector<std::string> report;
    if (m.n_states == 0) report.emplace_back("n_states must be >= 1");
    if (m.n_actions == 0) report.emplace_back("n_actions must be >= 1");
    if (!(m.gamma >= 0.0 && m.gamma < 1.0)) {
        std::ostringstream os;
        os << "discount gamma=" << m.gamma << " outside [0, 1)";
        report.push_back(os.str());
    }
    const auto rows = static_cast<Eigen::Index>(m.n_states * m.n_actions);
    if (m.transition.rows() != rows || m.transition.cols() != static_cast<Eigen::Index>(m.n_states)) {
        report.emplace_back("transition tensor has wrong shape");
        return report;
    }
    if (m.reward.rows() != static_cast<Eigen::Index>(m.n_states) ||
        m.reward.cols() != static_cast<Eigen::Index>(m.n_actions)) {
        report.emplace_back("reward table has wrong shape");
        return report;
    }
    for (std::size_t s = 0; s < m.n_states; ++s) {
        for (std::size_t a = 0; a < m.n_actions; ++a) {
            const auto r = static_cast<Eigen::Index>(m.row(s, a));
            double sum = 0.0;
            bool negative = false;
            bool finite = true;
            for (Eigen::Index k = 0; k < m.transition.cols(); ++k) {
                const double pk = m.transition(r, k);
                if (!std::isfinite(pk)) finite = false;
                if (pk < 0.0) negative = true;
                sum += pk;
            }
            if (!finite || negative) {
                std::ostringstream os;
                os << "transition (s=" << s << ", a=" << a << ") has negative or non-finite entries";
                report.push_back(os.str());
            } else if (std::abs(sum - 1.0) > 1e-12) {
                std::ostringstream os;
                os.precision(17);
                os << "transition (s=" << s << ", a=" << a << ") sums to " << sum;
                report.push_back(os.str());
            }
            const double rew = m.reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
            if (!std::isfinite(rew)) {
                std::ostringstream os;
                os << "reward (s=" << s << ", a=" << a << ") is not finite";
                report.push_back(os.str());
            }
        }
    }
    return report;
}

void require_valid_mdp(const TabularMdp& m) {
    const auto report = validate_mdp(m);
    if (!report.empty()) {
        std::string msg = "invalid MDP: " + report.front();
        if (report.size() > 1) msg += " (+" + std::to_string(report.size() - 1) + " more)";
        throw std::invalid_argument(msg);
    }
}

std::vector<std::size_t> greedy_actions(const Eigen::MatrixXd& table) {
    std::vector<std::size_t> out(static_cast<std::size_t>(table.rows()));
    for (Eigen::Index s = 0; s < table.rows(); ++s) {
        Eigen::Index best = 0;
        table.row(s).maxCoeff(&best);
        out[static_cast<std::size_t>(s)] = static_cast<std::size_t>(best);
    }
    return out;
}

Eigen::VectorXd weighted_policy_entropy(const TabularPolicy& pi, const WeightTable& w) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(pi.pi.rows());
    for (Eigen::Index s = 0; s < pi.pi.rows(); ++s) {
        for (Eigen::Index a = 0; a < pi.pi.cols(); ++a) {
            const double p = pi.pi(s, a);
            if (p > 0.0) h(s) -= w.w(s, a) * p * std::log(p);
        }
    }
    return h;
}

VTable soft_value_from_q(const TabularMdp& m, const QTable& q, const TabularPolicy& pi,
                         const WeightTable& w, double alpha) {
    check_table(q.q, m, "Q-table");
    check_table(pi.pi, m, "policy");
    check_table(w.w, m, "weight table");
    if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
    VTable v{pi.pi.cwiseProduct(q.q).rowwise().sum()};
    if (alpha != 0.0) v.v += alpha * weighted_policy_entropy(pi, w);
    return v;
}

QTable evaluate_policy_exact(const TabularMdp& m, const TabularPolicy& pi, const WeightTable& w,
                             double alpha) {
    require_valid_mdp(m);
    check_table(pi.pi, m, "policy");
    check_table(w.w, m, "weight table");
    if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");

    const auto ns = static_cast<Eigen::Index>(m.n_states);
    const auto na = static_cast<Eigen::Index>(m.n_actions);
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(ns, ns);
    Eigen::VectorXd rhs = pi.pi.cwiseProduct(m.reward).rowwise().sum();
    if (alpha != 0.0) rhs += alpha * weighted_policy_entropy(pi, w);
    for (Eigen::Index s = 0; s < ns; ++s) {
        for (Eigen::Index a = 0; a < na; ++a) {
            const double pa = pi.pi(s, a);
            if (pa != 0.0) p_pi.row(s) += pa * m.transition.row(s * na + a);
        }
    }
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(ns, ns) - m.gamma * p_pi;
    const Eigen::VectorXd v = system.partialPivLu().solve(rhs);
    const double residual = (system * v - rhs).cwiseAbs().maxCoeff();
    if (!v.allFinite() || residual > 1e-12 * (1.0 + v.cwiseAbs().maxCoeff())) {
        throw std::runtime_error("evaluate_policy_exact: linear system is singular");
    }

    QTable q{m.reward};
    const Eigen::VectorXd next = m.transition * v;
    for (Eigen::Index s = 0; s < ns; ++s) {
        for (Eigen::Index a = 0; a < na; ++a) q.q(s, a) += m.gamma * next(s * na + a);
    }
    return q;
}

double weighted_objective(const TabularMdp& m, const TabularPolicy& pi, const WeightTable& w,
                          double alpha) {
    const QTable q = evaluate_policy_exact(m, pi, w, alpha);
    return soft_value_from_q(m, q, pi, w, alpha).v.mean();
}

}  // namespace wesac
