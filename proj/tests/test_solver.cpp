#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <thread>

#include "genodyn/models.hpp"
#include "genodyn/solver.hpp"

using namespace genodyn;

namespace {

/// Test-only reference integrator: classical RK4 with a fixed step,
/// independent of the adaptive implementation under test.
template <typename Rhs>
Vec<double> rk4_reference(Rhs rhs, Vec<double> y, double t0, double t1, double h) {
    const std::size_t n = y.size();
    Vec<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    double t = t0;
    while (t < t1 - 1e-12) {
        const double hh = std::min(h, t1 - t);
        rhs(y, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * hh * k1[i];
        rhs(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * hh * k2[i];
        rhs(tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hh * k3[i];
        rhs(tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            y[i] += hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t += hh;
    }
    return y;
}

OdeSystem<double> linear_decay() {
    OdeSystem<double> s;
    s.name = "decay";
    s.dim = 1;
    s.rhs = [](std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; };
    return s;
}

template <typename T>
void check_trajectory_sanity(const Trajectory<T>& traj) {
    REQUIRE(traj.times.size() == traj.states.size());
    REQUIRE(traj.times.size() == traj.n_accepted + 1);
    for (std::size_t k = 1; k < traj.times.size(); ++k)
        REQUIRE(traj.times[k] > traj.times[k - 1]);
    for (const auto& st : traj.states) REQUIRE(all_finite<T>(st));
}

template <typename T>
T sum_of(const Vec<T>& v) {
    T s = T(0);
    for (const T& x : v) s += x;
    return s;
}

}  // namespace

TEST_CASE("error_norm matches the weighted RMS definition") {
    const Vec<double> zero{0, 0, 0}, y3{1, 2, 3};
    REQUIRE(error_norm<double>(zero, y3, y3, 1e-8, 1e-8) == 0.0);

    const Vec<double> err1{0.5}, y0{0.0};
    REQUIRE(error_norm<double>(err1, y0, y0, 0.5, 123.0) == Catch::Approx(1.0));

    const Vec<double> err2{1e-8, 1e-8}, ones{1, 1};
    REQUIRE(error_norm<double>(err2, ones, ones, 1e-8, 1e-8) == Catch::Approx(0.5).margin(1e-15));

    REQUIRE_THROWS_AS(error_norm<double>({}, {}, {}, 1e-8, 1e-8), std::invalid_argument);
}

TEST_CASE("initial_step heuristic brackets and fallbacks") {
    const auto decay = linear_decay();
    const Vec<double> one{1.0};
    const double h = initial_step<double>(decay, one, 0.0, 1.0, 1e-8, 1e-8, 5);
    REQUIRE(h > 1e-6);
    REQUIRE(h < 1e-1);

    OdeSystem<double> still;
    still.dim = 2;
    still.rhs = [](std::span<const double>, std::span<double> dy) { dy[0] = dy[1] = 0.0; };
    const Vec<double> q{0.3, 0.4};
    REQUIRE(initial_step<double>(still, q, 0.0, 10.0, 1e-8, 1e-8, 5) == Catch::Approx(1e-6));

    // steady state of the original 3-component model: the rhs vanishes there
    const auto orig3 = system3_original<double>();
    const Vec<double> family_point{0.25, 0.5, 0.25};
    REQUIRE(sup_norm<double>(orig3.eval_rhs(family_point)) == 0.0);
    const double hs = initial_step<double>(orig3, family_point, 0.0, 500.0, 1e-8, 1e-8, 5);
    REQUIRE(hs > 0.0);
    REQUIRE(std::isfinite(hs));

    OdeSystem<double> bad;
    bad.dim = 1;
    bad.rhs = [](std::span<const double>, std::span<double> dy) {
        dy[0] = std::numeric_limits<double>::quiet_NaN();
    };
    REQUIRE_THROWS_AS(initial_step<double>(bad, one, 0.0, 1.0, 1e-8, 1e-8, 5), std::domain_error);
}

TEST_CASE("linear decay is integrated to tolerance") {
    SolverConfig<double> cfg;
    cfg.t_end = 1.0;
    const auto traj = integrate(linear_decay(), {1.0}, tableau_tsit5<double>(), cfg);
    check_trajectory_sanity(traj);
    REQUIRE(traj.termination == Termination::reached_t_end);
    REQUIRE(traj.final_time() == 1.0);
    REQUIRE(traj.final_state()[0] == Catch::Approx(std::exp(-1.0)).margin(1e-7));
}

TEST_CASE("termination tags: max_steps, step_underflow, blow_up on NaN") {
    SolverConfig<double> cfg;
    cfg.t_end = 1.0;
    cfg.max_steps = 3;
    auto traj = integrate(linear_decay(), {1.0}, tableau_tsit5<double>(), cfg);
    REQUIRE(traj.termination == Termination::max_steps);

    SolverConfig<double> cfg2;
    cfg2.t_end = 1.0;
    cfg2.min_step = 10.0;  // floor above the whole interval
    traj = integrate(linear_decay(), {1.0}, tableau_tsit5<double>(), cfg2);
    REQUIRE(traj.termination == Termination::step_underflow);
    REQUIRE(traj.final_time() == traj.times.back());

    OdeSystem<double> nan_sys;
    nan_sys.dim = 1;
    nan_sys.rhs = [](std::span<const double> y, std::span<double> dy) {
        dy[0] = y[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
    };
    SolverConfig<double> cfg3;
    cfg3.t_end = 10.0;
    traj = integrate(nan_sys, {0.0}, tableau_tsit5<double>(), cfg3);
    REQUIRE(traj.termination == Termination::blow_up);
}

TEST_CASE("config validation rejects malformed settings") {
    SolverConfig<double> cfg;
    cfg.t_end = 0.0;  // t0 == t_end
    REQUIRE_THROWS_AS(integrate(linear_decay(), {1.0}, tableau_tsit5<double>(), cfg),
                      std::invalid_argument);
    SolverConfig<double> cfg2;
    cfg2.t_end = 1.0;
    cfg2.abstol = 0.0;
    REQUIRE_THROWS_AS(integrate(linear_decay(), {1.0}, tableau_tsit5<double>(), cfg2),
                      std::invalid_argument);
    SolverConfig<double> cfg3;
    cfg3.t_end = 1.0;
    REQUIRE_THROWS_AS(integrate(linear_decay(), {1.0, 2.0}, tableau_tsit5<double>(), cfg3),
                      std::invalid_argument);
}

TEST_CASE("FSAL reuse: one fresh stage evaluation is saved per step") {
    std::size_t evals = 0;
    OdeSystem<double> counted;
    counted.dim = 1;
    counted.rhs = [&evals](std::span<const double> y, std::span<double> dy) {
        ++evals;
        dy[0] = -y[0];
    };
    SolverConfig<double> cfg;
    cfg.t_end = 2.0;
    cfg.initial_step = 0.1;
    const auto traj = integrate(counted, {1.0}, tableau_tsit5<double>(), cfg);
    REQUIRE(traj.termination == Termination::reached_t_end);
    // 1 eval for the very first stage, then 6 per attempted 7-stage step
    REQUIRE(evals == 1 + 6 * (traj.n_accepted + traj.n_rejected));
}

TEST_CASE("original 3-component model: transient toward the family, then departure") {
    SolverConfig<double> cfg;
    cfg.t_end = 500.0;
    const auto traj =
        integrate(system3_original<double>(), {0.5, 0.25, 0.25}, tableau_tsit5<double>(), cfg);
    check_trajectory_sanity(traj);

    // binomial equilibrium of the initial allele proportion p = q1 + q2/2
    const Vec<double> hw{0.390625, 0.46875, 0.140625};
    double min_dist = 1e300;
    double max_abs_u = 0.0;
    for (const auto& st : traj.states) {
        double d = 0.0;
        for (std::size_t i = 0; i < 3; ++i) d = std::max(d, std::abs(st[i] - hw[i]));
        min_dist = std::min(min_dist, d);
        max_abs_u = std::max(max_abs_u, std::abs(sum_of(st) - 1.0));
    }
    REQUIRE(min_dist <= 1e-3);
    REQUIRE(max_abs_u > 0.1);  // the conservation defect eventually escapes
    const bool blew_up = traj.termination == Termination::blow_up;
    const bool went_extinct =
        traj.termination == Termination::reached_t_end && sum_of(traj.final_state()) < 0.5;
    REQUIRE((blew_up || went_extinct));
}

TEST_CASE("modified 3-component model conserves the off-manifold sum") {
    SolverConfig<double> cfg;
    cfg.t_end = 50.0;
    const Vec<double> q0{0.75, 0.25, 0.25};
    const auto traj = integrate(system3_modified<double>(), q0, tableau_tsit5<double>(), cfg);
    check_trajectory_sanity(traj);
    REQUIRE(traj.termination == Termination::reached_t_end);
    double worst = 0.0;
    for (const auto& st : traj.states) worst = std::max(worst, std::abs(sum_of(st) - 1.25));
    REQUIRE(worst <= 1e-10);

    // independent fixed-step reference
    const auto sys = system3_modified<double>();
    const auto ref = rk4_reference(
        [&sys](const Vec<double>& y, Vec<double>& dy) {
            sys.rhs(std::span<const double>(y), std::span<double>(dy));
        },
        q0, 0.0, 50.0, 1e-3);
    for (std::size_t i = 0; i < 3; ++i)
        REQUIRE(traj.final_state()[i] == Catch::Approx(ref[i]).margin(1e-6));
}

TEST_CASE("linear-invariant drift stays below 100 eps per accepted step") {
    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> dist(0.0, 1.5);
    const auto tableaus = {tableau_tsit5<double>(), tableau_dp5<double>(), tableau_vern6<double>()};
    for (const auto& tbl : tableaus) {
        for (const double tol : {1e-5, 1e-8}) {
            Vec<double> q0{dist(rng), dist(rng), dist(rng)};
            SolverConfig<double> cfg;
            cfg.abstol = cfg.reltol = tol;
            cfg.t_end = 30.0;
            const auto traj = integrate(system3_modified<double>(), q0, tbl, cfg);
            REQUIRE(traj.termination == Termination::reached_t_end);
            const double target = sum_of(q0);
            double worst = 0.0;
            for (const auto& st : traj.states) worst = std::max(worst, std::abs(sum_of(st) - target));
            REQUIRE(worst <=
                    100.0 * machine_epsilon<double>() * static_cast<double>(traj.n_accepted));

            Vec<double> p0{dist(rng), dist(rng)};
            const auto mod2 = system2_modified<double>(MutationParameter<double>(0.7));
            const auto traj2 = integrate(mod2, p0, tbl, cfg);
            REQUIRE(traj2.termination == Termination::reached_t_end);
            const double target2 = sum_of(p0);
            worst = 0.0;
            for (const auto& st : traj2.states)
                worst = std::max(worst, std::abs(sum_of(st) - target2));
            REQUIRE(worst <=
                    100.0 * machine_epsilon<double>() * static_cast<double>(traj2.n_accepted));
        }
    }
}

TEST_CASE("halving tolerances keeps the termination class on modified systems") {
    for (const double tol : {1e-8, 5e-9}) {
        SolverConfig<double> cfg;
        cfg.abstol = cfg.reltol = tol;
        cfg.t_end = 50.0;
        const auto traj =
            integrate(system3_modified<double>(), {0.75, 0.25, 0.25}, tableau_tsit5<double>(), cfg);
        REQUIRE(traj.termination == Termination::reached_t_end);
    }
}

TEST_CASE("deviation ODE tracks its closed form and blows up past t*") {
    const double t_star = deviation_blowup_time(0.1);
    REQUIRE(t_star == Catch::Approx(std::log(11.0)).margin(1e-14));

    SolverConfig<double> cfg;
    cfg.t_end = 0.9 * t_star;
    const auto traj = integrate(deviation_system<double>(), {0.1}, tableau_tsit5<double>(), cfg);
    REQUIRE(traj.termination == Termination::reached_t_end);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const double ue = deviation_analytic(0.1, traj.times[k]);
        const double bound = 10.0 * std::max(cfg.abstol, cfg.reltol * std::abs(ue));
        REQUIRE(std::abs(traj.states[k][0] - ue) <= bound);
    }

    SolverConfig<double> cfg2;
    cfg2.t_end = 1.2 * t_star;
    const auto past = integrate(deviation_system<double>(), {0.1}, tableau_tsit5<double>(), cfg2);
    REQUIRE(past.termination == Termination::blow_up);
    REQUIRE(past.final_time() > 0.9 * t_star);
    REQUIRE(past.final_time() < t_star);
}

TEST_CASE("observed convergence orders match the design orders") {
    const auto decay = linear_decay();
    const Vec<double> q0{1.0};
    const Vec<double> exact{std::exp(-1.0)};

    const Vec<double> grid5{0.1, 0.05, 0.025, 0.0125};
    const double s_tsit5 =
        estimate_convergence_order(decay, q0, 0.0, 1.0, exact, tableau_tsit5<double>(), grid5);
    REQUIRE(s_tsit5 > 4.7);
    REQUIRE(s_tsit5 < 5.3);

    const double s_dp5 =
        estimate_convergence_order(decay, q0, 0.0, 1.0, exact, tableau_dp5<double>(), grid5);
    REQUIRE(s_dp5 > 4.7);
    REQUIRE(s_dp5 < 5.3);

    // one octave coarser: at h <= 0.0125 the vern6 error reaches the binary64
    // roundoff floor and the measured slope degrades
    const Vec<double> grid6{0.2, 0.1, 0.05, 0.025};
    const double s_vern6 =
        estimate_convergence_order(decay, q0, 0.0, 1.0, exact, tableau_vern6<double>(), grid6);
    REQUIRE(s_vern6 > 5.6);
    REQUIRE(s_vern6 < 6.4);
}

TEST_CASE("convergence estimator rejects malformed input") {
    const auto decay = linear_decay();
    const Vec<double> q0{1.0}, exact{std::exp(-1.0)};
    REQUIRE_THROWS_AS(
        estimate_convergence_order(decay, q0, 0.0, 1.0, exact, tableau_tsit5<double>(), {0.1, 0.05}),
        std::invalid_argument);
    REQUIRE_THROWS_AS(estimate_convergence_order(decay, q0, 0.0, 1.0, exact,
                                                 tableau_tsit5<double>(), {0.1, 0.2, 0.05}),
                      std::invalid_argument);

    OdeSystem<double> nan_sys;
    nan_sys.dim = 1;
    nan_sys.rhs = [](std::span<const double>, std::span<double> dy) {
        dy[0] = std::numeric_limits<double>::quiet_NaN();
    };
    REQUIRE_THROWS_AS(estimate_convergence_order(nan_sys, q0, 0.0, 1.0, exact,
                                                 tableau_tsit5<double>(), {0.1, 0.05, 0.025}),
                      std::domain_error);
}

TEST_CASE("concurrent integrations reproduce the serial result") {
    const auto sys = system3_modified<double>();
    const auto tbl = tableau_tsit5<double>();
    SolverConfig<double> cfg;
    cfg.t_end = 20.0;
    const Vec<double> q0{0.75, 0.25, 0.25};
    const auto serial = integrate(sys, q0, tbl, cfg);

    std::vector<Trajectory<double>> results(4);
    {
        std::vector<std::thread> workers;
        for (auto& slot : results)
            workers.emplace_back([&, out = &slot] { *out = integrate(sys, q0, tbl, cfg); });
        for (auto& w : workers) w.join();
    }
    for (const auto& traj : results) {
        REQUIRE(traj.times == serial.times);
        REQUIRE(traj.states == serial.states);
    }
}

TEST_CASE("solver is generic over the scalar: float32 smoke run") {
    OdeSystem<float> decay;
    decay.dim = 1;
    decay.rhs = [](std::span<const float> y, std::span<float> dy) { dy[0] = -y[0]; };
    SolverConfig<float> cfg;
    cfg.abstol = cfg.reltol = 1e-5f;
    cfg.t_end = 1.0f;
    const auto traj = integrate(decay, {1.0f}, tableau_tsit5<float>(), cfg);
    REQUIRE(traj.termination == Termination::reached_t_end);
    REQUIRE(traj.final_state()[0] == Catch::Approx(std::exp(-1.0)).margin(1e-4));
}
