#pragma once

#include <deque>
#include <functional>

#include "mocap/types.hpp"

namespace mocap::detail {

struct LbfgsOptions {
    int max_iterations = 100;
    double grad_tol = 1e-7;
    double step_tol = 1e-12;
    int history = 8;
    double armijo_c1 = 1e-4;
};

struct LbfgsOutcome {
    Vec x;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Limited-memory BFGS with backtracking line search and an optional
/// projection onto box constraints. Candidates are projected before
/// evaluation and accepted only on sufficient decrease, so the energy is
/// non-increasing across accepted iterations by construction.
inline LbfgsOutcome lbfgs_minimize(const std::function<double(const Vec&, Vec*)>& objective,
                                   Vec x0, const LbfgsOptions& opt,
                                   const std::function<void(Vec&)>& project = nullptr) {
    if (project) project(x0);
    Vec g(x0.size());
    double f = objective(x0, &g);

    std::deque<std::pair<Vec, Vec>> history;  // (s, y)
    LbfgsOutcome out;
    out.x = x0;
    out.f = f;

    for (int it = 0; it < opt.max_iterations; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
            out.converged = true;
            break;
        }

        // Two-loop recursion.
        Vec d = -g;
        std::vector<double> alpha_hist(history.size());
        for (int i = static_cast<int>(history.size()) - 1; i >= 0; --i) {
            const auto& [s, y] = history[i];
            const double rho = 1.0 / s.dot(y);
            alpha_hist[i] = rho * s.dot(d);
            d -= alpha_hist[i] * y;
        }
        if (!history.empty()) {
            const auto& [s, y] = history.back();
            d *= s.dot(y) / y.dot(y);
        }
        for (std::size_t i = 0; i < history.size(); ++i) {
            const auto& [s, y] = history[i];
            const double rho = 1.0 / s.dot(y);
            const double beta = rho * y.dot(d);
            d += (alpha_hist[i] - beta) * s;
        }
        if (d.dot(g) > -1e-12 * d.norm() * g.norm()) d = -g;  // safeguard descent

        double step = it == 0 ? 1.0 / std::max(1.0, g.norm()) : 1.0;
        bool accepted = false;
        Vec x_new;
        double f_new = f;
        while (step > 1e-16) {
            x_new = out.x + step * d;
            if (project) project(x_new);
            const double fc = objective(x_new, nullptr);
            const double decrease = opt.armijo_c1 * std::min(0.0, g.dot(x_new - out.x));
            if (std::isfinite(fc) && fc <= f + decrease && fc < f) {
                f_new = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // No descent step found; treat as converged to tolerance.
            out.converged = true;
            break;
        }

        Vec g_new(g.size());
        objective(x_new, &g_new);
        const Vec s = x_new - out.x;
        const Vec y = g_new - g;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            history.emplace_back(s, y);
            if (static_cast<int>(history.size()) > opt.history) history.pop_front();
        }

        out.x = x_new;
        f = f_new;
        g = g_new;
        ++out.iterations;

        if (s.lpNorm<Eigen::Infinity>() < opt.step_tol) {
            out.converged = true;
            break;
        }
    }
    out.f = f;
    return out;
}

}  // namespace mocap::detail
