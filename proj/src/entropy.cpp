#include "wesac/entropy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace wesac {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

void check_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                    std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

void check_prob_vector(std::span<const double> p) {
    if (p.empty()) throw std::invalid_argument("probability vector is empty");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || p[i] < 0.0) {
            throw std::invalid_argument("probability entry " + std::to_string(i) +
                                        " is negative or not finite");
        }
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > kProbSumTolerance) {
        throw std::invalid_argument("probabilities sum to " + std::to_string(sum) +
                                    ", expected 1");
    }
}

void check_weight_vector(std::span<const double> w) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i]) || w[i] < 0.0) {
            throw std::invalid_argument("weight entry " + std::to_string(i) +
                                        " is negative or not finite");
        }
    }
}

double shannon_entropy(std::span<const double> p) {
    check_prob_vector(p);
    double h = 0.0;
    for (double pi : p) h -= xlogx(pi);
    return h;
}

double weighted_entropy(std::span<const double> w, std::span<const double> p) {
    check_same_length(w.size(), p.size(), "weighted_entropy");
    check_prob_vector(p);
    check_weight_vector(w);
    double h = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) h -= w[k] * xlogx(p[k]);
    return h;
}

double weighted_kl(std::span<const double> w, std::span<const double> p,
                   std::span<const double> q) {
    check_same_length(w.size(), p.size(), "weighted_kl");
    check_same_length(p.size(), q.size(), "weighted_kl");
    check_prob_vector(p);
    check_prob_vector(q);
    check_weight_vector(w);
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) {
            throw std::domain_error("weighted_kl undefined: p[" + std::to_string(i) +
                                    "] > 0 but q[" + std::to_string(i) + "] = 0");
        }
        d += w[i] * p[i] * std::log(p[i] / q[i]);
    }
    return d;
}

MaxWentSolution max_weighted_entropy(std::span<const double> w, double tol) {
    if (w.empty()) throw std::invalid_argument("max_weighted_entropy: empty weights");
    if (!(tol > 0.0)) throw std::invalid_argument("max_weighted_entropy: tol must be > 0");
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w[i]) || w[i] <= 0.0) {
            throw std::invalid_argument("max_weighted_entropy: weight " + std::to_string(i) +
                                        " must be strictly positive");
        }
    }

    auto excess = [&](double zeta) {
        double s = 0.0;
        for (double wi : w) s += std::exp(-zeta / wi - 1.0);
        return s - 1.0;
    };

    // f is strictly decreasing, so grow whichever side lacks the sign change.
    double lo = 0.0;
    double hi = 0.0;
    const double f0 = excess(0.0);
    constexpr int kMaxGrowth = 200;
    if (f0 > 0.0) {
        double step = 1.0;
        int k = 0;
        for (; k < kMaxGrowth && excess(hi) > 0.0; ++k, step *= 2.0) {
            lo = hi;
            hi = step;
        }
        if (k == kMaxGrowth) throw std::runtime_error("max_weighted_entropy: no root bracket");
    } else if (f0 < 0.0) {
        double step = 1.0;
        int k = 0;
        for (; k < kMaxGrowth && excess(lo) < 0.0; ++k, step *= 2.0) {
            hi = lo;
            lo = -step;
        }
        if (k == kMaxGrowth) throw std::runtime_error("max_weighted_entropy: no root bracket");
    }

    double zeta = lo;
    if (f0 != 0.0) {
        for (int it = 0; it < 2000; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const double f = excess(mid);
            if (f == 0.0) {
                lo = hi = mid;
                break;
            }
            (f > 0.0 ? lo : hi) = mid;
        }
        zeta = std::abs(excess(lo)) <= std::abs(excess(hi)) ? lo : hi;
    }
    if (!(std::abs(excess(zeta)) <= tol)) {
        throw std::runtime_error("max_weighted_entropy: root not resolved to tolerance");
    }

    MaxWentSolution sol;
    sol.zeta = zeta;
    sol.p_star.resize(w.size());
    sol.value = zeta;
    for (std::size_t i = 0; i < w.size(); ++i) {
        sol.p_star[i] = std::exp(-zeta / w[i] - 1.0);
        sol.value += w[i] * sol.p_star[i];
    }
    return sol;
}

}  // namespace wesac
