#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "genodyn/analysis.hpp"
#include "genodyn/models.hpp"

namespace genodyn {

enum class Precision { f32, f64, big };

inline const char* to_string(Precision p) {
    switch (p) {
        case Precision::f32: return "f32";
        case Precision::f64: return "f64";
        case Precision::big: return "big";
    }
    return "?";
}

inline Precision precision_by_name(const std::string& name) {
    if (name == "f32") return Precision::f32;
    if (name == "f64") return Precision::f64;
    if (name == "big") return Precision::big;
    throw std::invalid_argument("unknown precision: " + name + " (expected f32, f64 or big)");
}

/// Tolerance paired with each floating-point format in the precision study:
/// 1e-7 at binary32, 1e-8 at binary64, 1e-14 at extended precision.
inline double default_tolerance(Precision p) {
    switch (p) {
        case Precision::f32: return 1e-7;
        case Precision::f64: return 1e-8;
        case Precision::big: return 1e-14;
    }
    return 1e-8;
}

/// Requested precision is not compiled into this build.
class FeatureMissingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Round-trip scalar formatting (deterministic, locale independent).
// ---------------------------------------------------------------------------

inline std::string format_scalar(float v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}
inline std::string format_scalar(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
inline std::string format_scalar(long double v) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.21Lg", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Deviation events.
// ---------------------------------------------------------------------------

enum class DeviationKind { none, extinction_onset, blowup_onset };

inline const char* to_string(DeviationKind k) {
    switch (k) {
        case DeviationKind::none: return "none";
        case DeviationKind::extinction_onset: return "extinction_onset";
        case DeviationKind::blowup_onset: return "blowup_onset";
    }
    return "?";
}

/// First crossing of |sum(q) - 1| over the monitor threshold. The sign of u
/// at the crossing separates the decay-to-zero branch from the blow-up
/// branch.
struct DeviationEvent {
    DeviationKind kind = DeviationKind::none;
    std::optional<long double> time;
    std::string trigger;
};

template <typename T>
DeviationEvent detect_deviation_event(const Trajectory<T>& traj, T threshold) {
    DeviationEvent ev;
    if (traj.states.empty()) return ev;
    auto u_at = [&](std::size_t k) {
        T s = T(0);
        for (const T& x : traj.states[k]) s += x;
        return s - T(1);
    };
    T prev = u_at(0);
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
        const T cur = u_at(k);
        if (std::abs(prev) < threshold && std::abs(cur) >= threshold) {
            ev.kind = cur > T(0) ? DeviationKind::blowup_onset : DeviationKind::extinction_onset;
            ev.time = static_cast<long double>(traj.times[k]);
            char buf[96];
            std::snprintf(buf, sizeof buf, "|sum(q)-1| crossed %.3g with u = %.6g",
                          static_cast<double>(threshold), static_cast<double>(cur));
            ev.trigger = buf;
            return ev;
        }
        prev = cur;
    }
    return ev;
}

// ---------------------------------------------------------------------------
// File exports.
// ---------------------------------------------------------------------------

namespace detail {

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

}  // namespace detail

/// CSV schema: t,q1,...,qn,sum,u with one row per accepted step, including the
/// initial state. An empty trajectory produces a header-only file. The header
/// column count follows `dim` (needed for the degenerate empty case).
template <typename T>
void export_trajectory(const Trajectory<T>& traj, std::size_t dim, const std::string& path) {
    auto out = detail::open_output(path);
    out << "t";
    for (std::size_t i = 1; i <= dim; ++i) out << ",q" << i;
    out << ",sum,u\n";
    for (std::size_t k = 0; k < traj.times.size() && k < traj.states.size(); ++k) {
        out << format_scalar(traj.times[k]);
        T sum = T(0);
        for (const T& x : traj.states[k]) {
            out << ',' << format_scalar(x);
            sum += x;
        }
        out << ',' << format_scalar(sum) << ',' << format_scalar(sum - T(1)) << '\n';
    }
    if (!out) throw std::runtime_error("failed while writing: " + path);
}

/// CSV schema: x,y,dx,dy,len with (dx,dy) the unit direction and
/// len = sqrt(|f|).
template <typename T>
std::size_t export_vector_field(const OdeSystem<T>& system, const GridSpec<T>& grid,
                                const std::string& path) {
    const auto samples = sample_vector_field(system, grid);
    auto out = detail::open_output(path);
    out << "x,y,dx,dy,len\n";
    for (const auto& s : samples)
        out << format_scalar(s.x) << ',' << format_scalar(s.y) << ',' << format_scalar(s.dx) << ','
            << format_scalar(s.dy) << ',' << format_scalar(s.len) << '\n';
    if (!out) throw std::runtime_error("failed while writing: " + path);
    return samples.size();
}

// ---------------------------------------------------------------------------
// Simulation requests, presets and the runner.
// ---------------------------------------------------------------------------

struct SimulationRequest {
    std::string label = "simulate";
    std::string system;
    std::string method = "tsit5";
    double a = 0.7;  // mutation parameter, used by the 2-component systems
    std::vector<double> q0;
    double abstol = 1e-8;
    double reltol = 1e-8;
    Precision precision = Precision::f64;
    double t0 = 0.0;
    double t_end = 50.0;
    double threshold = 0.1;
    std::optional<std::string> out_csv;  // JSON summary lands next to it
};

struct RunSummary {
    std::string label;
    std::string system;
    std::string method;
    Precision precision = Precision::f64;
    std::string termination;
    DeviationEvent event;
    std::size_t n_accepted = 0;
    std::size_t n_rejected = 0;
    double wall_time = 0.0;
    long double final_time = 0.0L;
    std::vector<long double> final_state;
    std::string csv_path;
    std::string json_path;
};

inline std::string json_sibling_path(const std::string& csv_path) {
    const auto dot = csv_path.find_last_of('.');
    const auto slash = csv_path.find_last_of("/\\");
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
        return csv_path.substr(0, dot) + ".json";
    return csv_path + ".json";
}

/// Summary schema: {preset, termination, event, n_accepted, n_rejected,
/// wall_time}. Event times are emitted as decimal strings for the extended
/// scalar so no digits are lost in the JSON number round trip.
inline void write_summary_json(const RunSummary& s, const std::string& path) {
    nlohmann::json j;
    j["preset"] = s.label;
    j["termination"] = s.termination;
    nlohmann::json ev;
    ev["kind"] = to_string(s.event.kind);
    if (s.event.time) {
        if (s.precision == Precision::big)
            ev["time"] = format_scalar(*s.event.time);
        else
            ev["time"] = static_cast<double>(*s.event.time);
    } else {
        ev["time"] = nullptr;
    }
    ev["trigger"] = s.event.trigger;
    j["event"] = ev;
    j["n_accepted"] = s.n_accepted;
    j["n_rejected"] = s.n_rejected;
    j["wall_time"] = s.wall_time;
    auto out = detail::open_output(path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed while writing: " + path);
}

namespace detail {

template <typename T>
RunSummary run_simulation_impl(const SimulationRequest& req) {
    OdeSystem<T> system = system_by_name<T>(req.system, static_cast<T>(req.a));
    if (req.q0.size() != system.dim)
        throw std::invalid_argument("initial state has length " + std::to_string(req.q0.size()) +
                                    " but system " + req.system + " has dimension " +
                                    std::to_string(system.dim));
    const ButcherTableau<T> tbl = tableau_by_name<T>(req.method);
    SolverConfig<T> cfg;
    cfg.abstol = static_cast<T>(req.abstol);
    cfg.reltol = static_cast<T>(req.reltol);
    cfg.t0 = static_cast<T>(req.t0);
    cfg.t_end = static_cast<T>(req.t_end);
    Vec<T> q0(req.q0.size());
    for (std::size_t i = 0; i < q0.size(); ++i) q0[i] = static_cast<T>(req.q0[i]);

    const auto tic = std::chrono::steady_clock::now();
    const Trajectory<T> traj = integrate(system, q0, tbl, cfg);
    const auto toc = std::chrono::steady_clock::now();

    RunSummary s;
    s.label = req.label;
    s.system = req.system;
    s.method = req.method;
    s.precision = req.precision;
    s.termination = to_string(traj.termination);
    s.event = detect_deviation_event(traj, static_cast<T>(req.threshold));
    s.n_accepted = traj.n_accepted;
    s.n_rejected = traj.n_rejected;
    s.wall_time = std::chrono::duration<double>(toc - tic).count();
    s.final_time = static_cast<long double>(traj.final_time());
    for (const T& x : traj.final_state()) s.final_state.push_back(static_cast<long double>(x));
    if (req.out_csv) {
        s.csv_path = *req.out_csv;
        s.json_path = json_sibling_path(s.csv_path);
        export_trajectory(traj, system.dim, s.csv_path);
        write_summary_json(s, s.json_path);
    }
    return s;
}

}  // namespace detail

inline RunSummary run_simulation(const SimulationRequest& req) {
    switch (req.precision) {
        case Precision::f32: return detail::run_simulation_impl<float>(req);
        case Precision::f64: return detail::run_simulation_impl<double>(req);
        case Precision::big:
#if GENODYN_ENABLE_EXTENDED
            return detail::run_simulation_impl<long double>(req);
#else
            throw FeatureMissingError(
                "extended precision is not available in this build "
                "(GENODYN_ENABLE_EXTENDED is off)");
#endif
    }
    throw std::invalid_argument("unknown precision");
}

// ---------------------------------------------------------------------------
// Presets: one entry per reproduced figure.
// ---------------------------------------------------------------------------

struct ExperimentPreset {
    std::string id;
    bool field = false;  // vector-field export instead of a time integration
    std::string system;
    std::string method = "tsit5";
    double a = 0.7;
    std::vector<double> q0;
    double abstol = 1e-8;
    double reltol = 1e-8;
    Precision precision = Precision::f64;
    double t_end = 500.0;
    double threshold = 0.1;
    GridSpec<double> grid{0.0, 1.5, 0.0, 1.5, 0.1};
};

inline const std::vector<ExperimentPreset>& experiment_presets() {
    static const std::vector<ExperimentPreset> table = [] {
        std::vector<ExperimentPreset> t;
        ExperimentPreset p;

        p = {};  // unstable 3-component run, Tsitouras pair
        p.id = "fig1";
        p.system = "orig3";
        p.method = "tsit5";
        p.q0 = {0.5, 0.25, 0.25};
        t.push_back(p);

        p.id = "fig2";  // same run, Dormand-Prince pair
        p.method = "dp5";
        t.push_back(p);

        p = {};  // phase portrait of the original 2-component field
        p.id = "fig3-field";
        p.field = true;
        p.system = "orig2";
        t.push_back(p);

        p = {};  // unstable 2-component run (vern6 variant via method override)
        p.id = "fig4";
        p.system = "orig2";
        p.q0 = {0.25, 0.75};
        t.push_back(p);

        p = {};  // precision study base run: binary32 with tolerance 1e-7
        p.id = "fig5";
        p.system = "orig3";
        p.q0 = {0.5, 0.25, 0.25};
        p.precision = Precision::f32;
        p.abstol = p.reltol = 1e-7;
        t.push_back(p);

        p = {};  // phase portrait of the modified 2-component field
        p.id = "fig6-field";
        p.field = true;
        p.system = "mod2";
        t.push_back(p);

        p = {};  // stable modified runs
        p.id = "fig8-2c";
        p.system = "mod2";
        p.q0 = {0.25, 0.75};
        p.t_end = 50.0;
        t.push_back(p);

        p.id = "fig8-3c";
        p.system = "mod3";
        p.q0 = {0.75, 0.25, 0.25};
        t.push_back(p);
        return t;
    }();
    return table;
}

inline const ExperimentPreset& preset_by_id(const std::string& id) {
    for (const auto& p : experiment_presets())
        if (p.id == id) return p;
    std::string known;
    for (const auto& p : experiment_presets()) known += (known.empty() ? "" : ", ") + p.id;
    throw std::invalid_argument("unknown preset: " + id + " (known presets: " + known + ")");
}

struct PresetOptions {
    std::optional<std::string> method;
    std::optional<Precision> precision;  // re-derives tolerances unless given
    std::optional<double> abstol;
    std::optional<double> reltol;
    std::optional<std::string> out_csv;  // default: <id>.csv
    bool write_files = true;
};

/// Runs one preset. Trajectory presets integrate, detect the deviation event
/// and write CSV + JSON; field presets write the field CSV. Overriding the
/// precision re-derives the tolerances from the per-precision defaults unless
/// explicit tolerances are supplied.
inline RunSummary run_preset(const std::string& id, const PresetOptions& opt = {}) {
    const ExperimentPreset& p = preset_by_id(id);
    const std::string out = opt.out_csv.value_or(p.id + ".csv");

    if (p.field) {
        RunSummary s;
        s.label = p.id;
        s.system = p.system;
        s.method = "n/a";
        s.precision = Precision::f64;
        s.termination = "field_export";
        const auto tic = std::chrono::steady_clock::now();
        if (opt.write_files) {
            const auto system = system_by_name<double>(p.system, p.a);
            export_vector_field(system, p.grid, out);
            s.csv_path = out;
        }
        s.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
        if (opt.write_files) {
            s.json_path = json_sibling_path(out);
            write_summary_json(s, s.json_path);
        }
        return s;
    }

    SimulationRequest req;
    req.label = p.id;
    req.system = p.system;
    req.method = opt.method.value_or(p.method);
    req.a = p.a;
    req.q0 = p.q0;
    req.precision = opt.precision.value_or(p.precision);
    const double tol_default =
        opt.precision ? default_tolerance(*opt.precision) : p.abstol;
    req.abstol = opt.abstol.value_or(tol_default);
    req.reltol = opt.reltol.value_or(opt.precision ? default_tolerance(*opt.precision) : p.reltol);
    req.t_end = p.t_end;
    req.threshold = p.threshold;
    if (opt.write_files) req.out_csv = out;
    return run_simulation(req);
}

}  // namespace genodyn
