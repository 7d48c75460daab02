#pragma once

#include <functional>
#include <optional>
#include <string>

#include "genodyn/core.hpp"
#include "genodyn/tableau.hpp"

namespace genodyn {

/// Autonomous ODE q' = f(q). The Jacobian evaluator is optional; leave it
/// empty when no closed form is available.
template <typename T>
struct OdeSystem {
    std::string name;
    std::size_t dim = 0;
    std::function<void(std::span<const T>, std::span<T>)> rhs;
    std::function<Mat<T>(std::span<const T>)> jac;

    bool has_jacobian() const { return static_cast<bool>(jac); }

    Vec<T> eval_rhs(std::span<const T> q) const {
        Vec<T> out(dim);
        rhs(q, out);
        return out;
    }
};

/// Integration controls. Defaults: abstol = reltol = 1e-8, t0 = 0,
/// max_steps = 1e7, blow-up threshold 1e6 in sup norm, safety 0.9 with
/// step-change clamps [0.2, 10]. min_step acts as a floor per unit time
/// magnitude: the effective smallest step at time t is min_step * max(1,|t|),
/// which with the default 16*eps reproduces 16*eps*max(|t|,1).
template <typename T>
struct SolverConfig {
    T abstol = T(1e-8);
    T reltol = T(1e-8);
    T t0 = T(0);
    T t_end = T(1);
    std::optional<T> initial_step;  // auto-selected when absent
    std::size_t max_steps = 10'000'000;
    T safety = T(0.9);
    T min_factor = T(0.2);
    T max_factor = T(10);
    T blowup_threshold = T(1e6);
    T min_step = T(16) * machine_epsilon<T>();

    void validate() const {
        if (!(abstol > T(0)) || !(reltol > T(0)))
            throw std::invalid_argument("SolverConfig: tolerances must be positive");
        if (!(t0 < t_end)) throw std::invalid_argument("SolverConfig: requires t0 < t_end");
        if (initial_step && !(*initial_step > T(0)))
            throw std::invalid_argument("SolverConfig: initial_step must be positive");
        if (max_steps == 0) throw std::invalid_argument("SolverConfig: max_steps must be positive");
        if (!(safety > T(0) && safety < T(1)))
            throw std::invalid_argument("SolverConfig: safety must lie in (0,1)");
        if (!(min_factor < T(1) && T(1) < max_factor))
            throw std::invalid_argument("SolverConfig: requires min_factor < 1 < max_factor");
        if (!(blowup_threshold > T(0)) || !(min_step > T(0)))
            throw std::invalid_argument("SolverConfig: thresholds must be positive");
    }
};

enum class Termination { reached_t_end, blow_up, step_underflow, max_steps };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::reached_t_end: return "reached_t_end";
        case Termination::blow_up: return "blow_up";
        case Termination::step_underflow: return "step_underflow";
        case Termination::max_steps: return "max_steps";
    }
    return "?";
}

/// Accepted states only; no interpolation between steps.
template <typename T>
struct Trajectory {
    Vec<T> times;
    std::vector<Vec<T>> states;
    std::size_t n_accepted = 0;
    std::size_t n_rejected = 0;
    Termination termination = Termination::reached_t_end;

    T final_time() const { return times.back(); }
    const Vec<T>& final_state() const { return states.back(); }
};

/// Mixed-tolerance weighted RMS norm:
/// sqrt( (1/n) sum_i ( err_i / (abstol + reltol * max(|y_old_i|, |y_new_i|)) )^2 ).
template <typename T>
T error_norm(std::span<const T> err, std::span<const T> y_old, std::span<const T> y_new, T abstol,
             T reltol) {
    const std::size_t n = err.size();
    if (n == 0 || y_old.size() != n || y_new.size() != n)
        throw std::invalid_argument("error_norm: vectors must share a nonzero length");
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T scale = abstol + reltol * std::max(std::abs(y_old[i]), std::abs(y_new[i]));
        const T r = err[i] / scale;
        acc += r * r;
    }
    return std::sqrt(acc / T(n));
}

namespace detail {

template <typename T>
T weighted_rms(std::span<const T> v, std::span<const T> scale) {
    T acc = T(0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const T r = v[i] / scale[i];
        acc += r * r;
    }
    return std::sqrt(acc / T(v.size()));
}

}  // namespace detail

/// Automatic starting step via the standard two-evaluation heuristic: scale
/// the norms of q0 and f(q0), probe one Euler step, and bound by the curvature
/// estimate. Falls back to the floor 1e-6 (clipped to the span) when the
/// derivative vanishes at q0. Never exceeds t_end - t0.
template <typename T>
T initial_step(const OdeSystem<T>& system, std::type_identity_t<std::span<const T>> q0, T t0,
               T t_end, T abstol, T reltol, int order) {
    if (q0.size() != system.dim)
        throw std::invalid_argument("initial_step: state length does not match system dimension");
    const std::size_t n = system.dim;
    Vec<T> f0(n);
    system.rhs(q0, f0);
    if (!all_finite<T>(f0))
        throw std::domain_error("initial_step: rhs is not finite at the initial state");

    Vec<T> scale(n);
    for (std::size_t i = 0; i < n; ++i) scale[i] = abstol + reltol * std::abs(q0[i]);
    const T d0 = detail::weighted_rms<T>(q0, scale);
    const T d1 = detail::weighted_rms<T>(f0, scale);

    T h0 = (d0 < T(1e-5) || d1 < T(1e-5)) ? T(1e-6) : T(0.01) * d0 / d1;

    Vec<T> y1(n), f1(n), df(n);
    for (std::size_t i = 0; i < n; ++i) y1[i] = q0[i] + h0 * f0[i];
    system.rhs(y1, f1);
    T h1;
    if (!all_finite<T>(f1)) {
        h1 = std::max(T(1e-6), h0 * T(1e-3));
    } else {
        for (std::size_t i = 0; i < n; ++i) df[i] = f1[i] - f0[i];
        const T d2 = detail::weighted_rms<T>(df, scale) / h0;
        if (d1 <= T(1e-15) && d2 <= T(1e-15))
            h1 = std::max(T(1e-6), h0 * T(1e-3));
        else
            h1 = std::pow(T(0.01) / std::max(d1, d2), T(1) / T(order + 1));
    }
    return std::min({T(100) * h0, h1, t_end - t0});
}

/// Adaptive embedded RK integration with PI step control.
///
/// Accept when the weighted error norm is <= 1. With k = embedded_order + 1,
/// the step factor on acceptance is safety * err^(-0.7/k) * err_prev^(0.4/k)
/// clamped to [min_factor, max_factor]; rejected steps fall back to the plain
/// safety * err^(-1/k) capped at 1. FSAL pairs reuse the last stage.
/// Non-finite stage or state values and sup norms beyond blowup_threshold
/// terminate with Termination::blow_up rather than throwing; steps below the
/// floor terminate with step_underflow. The final step is clipped so the last
/// accepted time equals t_end exactly.
template <typename T>
Trajectory<T> integrate(const OdeSystem<T>& system, const Vec<T>& q0, const ButcherTableau<T>& tbl,
                        const SolverConfig<T>& cfg) {
    cfg.validate();
    if (q0.size() != system.dim)
        throw std::invalid_argument("integrate: state length does not match system dimension");

    const std::size_t n = system.dim;
    const auto s = static_cast<std::size_t>(tbl.stages);

    Trajectory<T> traj;
    traj.times.push_back(cfg.t0);
    traj.states.push_back(q0);

    Vec<T> y = q0;
    std::vector<Vec<T>> k(s, Vec<T>(n));
    Vec<T> y_stage(n), y_new(n), err(n);

    system.rhs(y, k[0]);
    if (!all_finite<T>(k[0])) {
        traj.termination = Termination::blow_up;
        return traj;
    }
    bool first_stage_ready = true;

    T t = cfg.t0;
    T h = cfg.initial_step
              ? std::min(*cfg.initial_step, cfg.t_end - cfg.t0)
              : initial_step(system, std::span<const T>(q0), cfg.t0, cfg.t_end, cfg.abstol,
                             cfg.reltol, tbl.order);

    const T pi_k = T(tbl.embedded_order + 1);
    T err_prev = T(1e-4);
    std::size_t attempts = 0;

    while (true) {
        if (attempts >= cfg.max_steps) {
            traj.termination = Termination::max_steps;
            return traj;
        }
        ++attempts;

        const T floor = cfg.min_step * std::max(T(1), std::abs(t));
        if (h < floor) {
            traj.termination = Termination::step_underflow;
            return traj;
        }

        bool last = false;
        T h_use = h;
        if (t + h >= cfg.t_end || cfg.t_end - (t + h) < floor) {
            h_use = cfg.t_end - t;
            last = true;
        }

        if (!first_stage_ready) {
            system.rhs(y, k[0]);
            if (!all_finite<T>(k[0])) {
                traj.termination = Termination::blow_up;
                return traj;
            }
            first_stage_ready = true;
        }

        bool stage_blowup = false;
        for (std::size_t i = 1; i < s && !stage_blowup; ++i) {
            for (std::size_t m = 0; m < n; ++m) {
                T acc = T(0);
                for (std::size_t j = 0; j < i; ++j) acc += tbl.a(i, j) * k[j][m];
                y_stage[m] = y[m] + h_use * acc;
            }
            if (!all_finite<T>(y_stage) || sup_norm<T>(y_stage) > cfg.blowup_threshold) {
                stage_blowup = true;
                break;
            }
            system.rhs(y_stage, k[i]);
            if (!all_finite<T>(k[i])) stage_blowup = true;
        }
        if (stage_blowup) {
            traj.termination = Termination::blow_up;
            return traj;
        }

        for (std::size_t m = 0; m < n; ++m) {
            T acc = T(0), eacc = T(0);
            for (std::size_t i = 0; i < s; ++i) {
                acc += tbl.b[i] * k[i][m];
                eacc += (tbl.b[i] - tbl.b_hat[i]) * k[i][m];
            }
            y_new[m] = y[m] + h_use * acc;
            err[m] = h_use * eacc;
        }
        if (!all_finite<T>(y_new) || sup_norm<T>(y_new) > cfg.blowup_threshold) {
            traj.termination = Termination::blow_up;
            return traj;
        }

        const T en = error_norm<T>(err, y, y_new, cfg.abstol, cfg.reltol);
        if (en <= T(1)) {
            t = last ? cfg.t_end : t + h_use;
            y = y_new;
            traj.times.push_back(t);
            traj.states.push_back(y);
            ++traj.n_accepted;
            if (last) {
                traj.termination = Termination::reached_t_end;
                return traj;
            }
            if (tbl.fsal)
                k[0] = k[s - 1];
            else
                first_stage_ready = false;

            T factor;
            if (en == T(0)) {
                factor = cfg.max_factor;
            } else {
                factor = cfg.safety * std::pow(en, T(-0.7) / pi_k) *
                         std::pow(err_prev, T(0.4) / pi_k);
                factor = std::clamp(factor, cfg.min_factor, cfg.max_factor);
            }
            err_prev = std::max(en, T(1e-4));
            h = h_use * factor;
        } else {
            ++traj.n_rejected;
            const T factor =
                std::clamp(cfg.safety * std::pow(en, T(-1) / pi_k), cfg.min_factor, T(1));
            h = h_use * factor;
        }
    }
}

/// Fixed-step RK run (error control disabled); the last step is clipped to
/// land on t_end. Throws std::domain_error if any state goes non-finite.
template <typename T>
Vec<T> integrate_fixed(const OdeSystem<T>& system, const Vec<T>& q0, const ButcherTableau<T>& tbl,
                       T t0, T t_end, T h) {
    if (!(h > T(0)) || !(t0 < t_end)) throw std::invalid_argument("integrate_fixed: bad interval");
    const std::size_t n = system.dim;
    const auto s = static_cast<std::size_t>(tbl.stages);
    Vec<T> y = q0;
    std::vector<Vec<T>> k(s, Vec<T>(n));
    Vec<T> y_stage(n);
    T t = t0;
    while (t < t_end) {
        const T h_use = std::min(h, t_end - t);
        for (std::size_t i = 0; i < s; ++i) {
            if (i == 0) {
                system.rhs(y, k[0]);
            } else {
                for (std::size_t m = 0; m < n; ++m) {
                    T acc = T(0);
                    for (std::size_t j = 0; j < i; ++j) acc += tbl.a(i, j) * k[j][m];
                    y_stage[m] = y[m] + h_use * acc;
                }
                system.rhs(y_stage, k[i]);
            }
            if (!all_finite<T>(k[i]))
                throw std::domain_error("integrate_fixed: non-finite stage value");
        }
        for (std::size_t m = 0; m < n; ++m) {
            T acc = T(0);
            for (std::size_t i = 0; i < s; ++i) acc += tbl.b[i] * k[i][m];
            y[m] += h_use * acc;
        }
        if (!all_finite<T>(y)) throw std::domain_error("integrate_fixed: non-finite state");
        t += h_use;
        if (h_use < h / T(2)) break;  // clipped remainder step consumed the interval
    }
    return y;
}

/// Observed convergence order: least-squares slope of log(error at t_end)
/// against log(h) over fixed-step runs. Requires at least three decreasing
/// steps and a known exact final state.
template <typename T>
T estimate_convergence_order(const OdeSystem<T>& system, const Vec<T>& q0, T t0, T t_end,
                             const Vec<T>& exact_final, const ButcherTableau<T>& tbl,
                             const Vec<T>& step_set) {
    if (step_set.size() < 3)
        throw std::invalid_argument("estimate_convergence_order: need at least 3 step sizes");
    for (std::size_t i = 0; i < step_set.size(); ++i) {
        if (!(step_set[i] > T(0)) || (i > 0 && !(step_set[i] < step_set[i - 1])))
            throw std::invalid_argument(
                "estimate_convergence_order: steps must be positive and decreasing");
    }
    Vec<T> xs, ys;
    for (const T h : step_set) {
        const Vec<T> yf = integrate_fixed(system, q0, tbl, t0, t_end, h);
        Vec<T> diff(yf.size());
        for (std::size_t i = 0; i < yf.size(); ++i) diff[i] = yf[i] - exact_final[i];
        const T e = sup_norm<T>(diff);
        if (!(e > T(0)))
            throw std::domain_error("estimate_convergence_order: zero error, slope undefined");
        xs.push_back(std::log(h));
        ys.push_back(std::log(e));
    }
    const auto m = static_cast<T>(xs.size());
    T sx = T(0), sy = T(0), sxx = T(0), sxy = T(0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace genodyn
