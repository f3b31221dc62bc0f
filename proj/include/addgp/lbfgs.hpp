#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (bracketing + zoom with
// safeguarded cubic interpolation).

#include "addgp/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace addgp {

struct FitConfig {
    int max_iterations = 500;
    int restarts = 5;
    std::uint64_t seed = 0;
    double gradient_tolerance = 1e-6;
    int memory_pairs = 10;
    /// Highest interaction order; unset means min(D, 10).
    std::optional<int> max_order;

    void validate() const {
        if (max_iterations < 0) throw std::invalid_argument("FitConfig: max_iterations must be >= 0");
        if (restarts < 0) throw std::invalid_argument("FitConfig: restarts must be >= 0");
        if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("FitConfig: gradient_tolerance must be > 0");
        if (memory_pairs < 1) throw std::invalid_argument("FitConfig: memory_pairs must be >= 1");
        if (max_order && *max_order < 1) throw std::invalid_argument("FitConfig: max_order must be >= 1");
    }
};

/// Returns f(x) and writes the gradient into `grad` (already sized like x).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool line_search_failed = false;
};

namespace detail {

inline constexpr double kWolfeSufficientDecrease = 1e-4;
inline constexpr double kWolfeCurvature = 0.9;
inline constexpr int kMaxLineSearchEvaluations = 40;

struct LinePoint {
    double step = 0.0;
    double value = 0.0;
    double slope = 0.0;
    bool finite = true;
};

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), kept at
// least 10% of the bracket away from both ends; bisection when undefined.
inline double cubic_step(const LinePoint& a, const LinePoint& b) {
    const double lo = std::min(a.step, b.step), hi = std::max(a.step, b.step);
    const double margin = 0.1 * (hi - lo);
    double t = 0.5 * (a.step + b.step);
    if (a.finite && b.finite) {
        const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.step - b.step);
        const double rad = d1 * d1 - a.slope * b.slope;
        if (rad >= 0.0) {
            const double d2 = std::copysign(std::sqrt(rad), b.step - a.step);
            const double denom = b.slope - a.slope + 2.0 * d2;
            if (denom != 0.0) {
                const double c = b.step - (b.step - a.step) * (b.slope + d2 - d1) / denom;
                if (std::isfinite(c)) t = c;
            }
        }
    }
    return std::clamp(t, lo + margin, hi - margin);
}

} // namespace detail

/// Minimizes `objective` from x0. Stops when the gradient norm reaches the
/// tolerance, after cfg.max_iterations outer iterations, or when the line
/// search cannot make progress; the last case is reported in the result.
/// Objective evaluations that throw NumericalFailure or return non-finite
/// values are treated as +infinity during the line search.
inline LbfgsResult lbfgs_minimize(const Objective& objective, const Eigen::VectorXd& x0, const FitConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = x0.size();
    LbfgsResult res;
    res.x = x0;
    res.gradient = Eigen::VectorXd::Zero(n);
    res.value = objective(res.x, res.gradient);
    res.evaluations = 1;
    if (!std::isfinite(res.value) || !res.gradient.allFinite())
        throw std::invalid_argument("lbfgs_minimize: objective is not finite at the starting point");
    if (cfg.max_iterations == 0) return res;
    if (res.gradient.norm() <= cfg.gradient_tolerance) {
        res.converged = true;
        return res;
    }

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    Eigen::VectorXd trial_x(n), trial_g(n), direction(n);

    auto evaluate = [&](double step) {
        trial_x = res.x + step * direction;
        detail::LinePoint p{step, std::numeric_limits<double>::infinity(), 0.0, false};
        ++res.evaluations;
        try {
            const double v = objective(trial_x, trial_g);
            if (std::isfinite(v) && trial_g.allFinite()) p = {step, v, trial_g.dot(direction), true};
        } catch (const NumericalFailure&) {
        }
        return p;
    };

    while (res.iterations < cfg.max_iterations) {
        // Two-loop recursion for direction = -H g.
        direction = -res.gradient;
        const std::size_t m = s_hist.size();
        std::vector<double> alpha(m);
        for (std::size_t i = m; i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(direction);
            direction -= alpha[i] * y_hist[i];
        }
        if (m > 0) direction *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(direction);
            direction += (alpha[i] - beta) * s_hist[i];
        }
        double slope0 = res.gradient.dot(direction);
        if (!(slope0 < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            direction = -res.gradient;
            slope0 = -res.gradient.squaredNorm();
        }

        const detail::LinePoint origin{0.0, res.value, slope0, true};
        const double armijo = detail::kWolfeSufficientDecrease;
        const double curvature = detail::kWolfeCurvature;
        auto sufficient = [&](const detail::LinePoint& p) {
            return p.finite && p.value <= origin.value + armijo * p.step * slope0;
        };

        std::optional<detail::LinePoint> accepted;
        Eigen::VectorXd accepted_g(n);
        int evals = 0;
        // Best point seen that satisfies sufficient decrease; used if the
        // curvature condition is never met.
        std::optional<detail::LinePoint> fallback;
        Eigen::VectorXd fallback_g(n);
        auto note = [&](const detail::LinePoint& p) {
            if (sufficient(p) && p.value < origin.value && (!fallback || p.value < fallback->value)) {
                fallback = p;
                fallback_g = trial_g;
            }
        };

        auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi) {
            while (evals < detail::kMaxLineSearchEvaluations) {
                if (std::abs(hi.step - lo.step) <= 1e-16 * std::max(1.0, std::abs(lo.step))) return;
                const auto p = evaluate(detail::cubic_step(lo, hi));
                ++evals;
                note(p);
                if (!sufficient(p) || p.value >= lo.value) {
                    hi = p;
                } else {
                    if (std::abs(p.slope) <= -curvature * slope0) {
                        accepted = p;
                        accepted_g = trial_g;
                        return;
                    }
                    if (p.slope * (hi.step - lo.step) >= 0.0) hi = lo;
                    lo = p;
                }
            }
        };

        double step = s_hist.empty() ? std::min(1.0, 1.0 / res.gradient.norm()) : 1.0;
        detail::LinePoint prev = origin;
        while (!accepted && evals < detail::kMaxLineSearchEvaluations) {
            const auto p = evaluate(step);
            ++evals;
            note(p);
            if (!sufficient(p) || (prev.step > 0.0 && p.value >= prev.value)) {
                zoom(prev, p);
                break;
            }
            if (std::abs(p.slope) <= -curvature * slope0) {
                accepted = p;
                accepted_g = trial_g;
                break;
            }
            if (p.slope >= 0.0) {
                zoom(p, prev);
                break;
            }
            prev = p;
            step *= 2.0;
        }

        if (!accepted && fallback) {
            accepted = fallback;
            accepted_g = fallback_g;
        }
        if (!accepted) {
            // Retry once along steepest descent before giving up.
            if (!s_hist.empty()) {
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            res.line_search_failed = true;
            break;
        }

        const Eigen::VectorXd s = accepted->step * direction;
        const Eigen::VectorXd y = accepted_g - res.gradient;
        res.x += s;
        res.value = accepted->value;
        res.gradient = accepted_g;
        ++res.iterations;

        // A Wolfe step guarantees s^T y > 0; the fallback step may not.
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > cfg.memory_pairs) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        if (res.gradient.norm() <= cfg.gradient_tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

} // namespace addgp
