// Command-line runner for the gene-inheritance ODE models: simulation,
// figure-preset reproduction, steady-state/eigen reports, vector-field export
// and the invariant-reformulation check.

#include <complex>
#include <cstdio>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "genodyn/genodyn.hpp"

namespace {

using namespace genodyn;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::vector<double> parse_state(const std::string& csv) {
    std::vector<double> out;
    std::string cur;
    for (char ch : csv) {
        if (ch == ',') {
            out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(std::stod(cur));
    if (out.empty()) throw std::invalid_argument("empty state vector");
    return out;
}

void print_summary(const RunSummary& s) {
    std::printf("run %s: system=%s method=%s precision=%s\n", s.label.c_str(), s.system.c_str(),
                s.method.c_str(), to_string(s.precision));
    std::printf("  termination=%s  accepted=%zu rejected=%zu  wall=%.3fs\n", s.termination.c_str(),
                s.n_accepted, s.n_rejected, s.wall_time);
    if (s.event.kind != DeviationKind::none)
        std::printf("  event: %s at t=%.9Lg (%s)\n", to_string(s.event.kind), *s.event.time,
                    s.event.trigger.c_str());
    else
        std::printf("  event: none\n");
    if (!s.final_state.empty()) {
        std::printf("  final state at t=%.9Lg: (", s.final_time);
        for (std::size_t i = 0; i < s.final_state.size(); ++i)
            std::printf("%.9Lg%s", s.final_state[i],
                        i + 1 < s.final_state.size() ? ", " : ")\n");
    }
    if (!s.csv_path.empty())
        std::printf("  wrote %s and %s\n", s.csv_path.c_str(), s.json_path.c_str());
}

void print_record(const SteadyStateRecord<double>& rec, bool json_format, bool first) {
    if (json_format) {
        nlohmann::json j;
        j["point"] = rec.point;
        auto& evs = j["eigenvalues"] = nlohmann::json::array();
        for (const auto& ev : rec.eigen.values)
            evs.push_back({{"re", ev.real()}, {"im", ev.imag()}});
        j["classification"] = to_string(rec.classification);
        std::printf("%s%s", first ? "" : ",\n", j.dump().c_str());
        return;
    }
    for (std::size_t i = 0; i < rec.point.size(); ++i)
        std::printf("%s%.17g", i ? "," : "", rec.point[i]);
    for (const auto& ev : rec.eigen.values) std::printf(",%.12g%+.12gi", ev.real(), ev.imag());
    std::printf(",%s\n", to_string(rec.classification));
}

std::vector<SteadyStateRecord<double>> enumerate_steady_states(const std::string& system_id,
                                                               double a) {
    std::vector<SteadyStateRecord<double>> recs;
    const auto add = [&](const OdeSystem<double>& sys, const Vec<double>& q) {
        recs.push_back(analyze_steady_state(sys, q));
    };
    if (system_id == "orig2") {
        const auto sys = system_by_name<double>("orig2", a);
        add(sys, {0.0, 0.0});
        add(sys, {0.5, 0.5});
    } else if (system_id == "mod2") {
        const auto sys = system_by_name<double>("mod2", a);
        for (int i = 0; i <= 10; ++i) add(sys, {0.1 * i, 0.1 * i});
    } else if (system_id == "orig3") {
        const auto sys = system_by_name<double>("orig3");
        add(sys, {0.0, 0.0, 0.0});
        for (int i = 0; i <= 20; ++i) {
            const auto q = steady_state_family3<double>(0.05 * i);
            add(sys, {q[0], q[1], q[2]});
        }
    } else if (system_id == "mod3") {
        const auto sys = system_by_name<double>("mod3");
        add(sys, {0.0, 0.0, 0.0});
        add(sys, {0.0, 0.0, 0.5});
        for (double q1 : {0.25, 0.5, 0.75, 1.0})
            for (double q2 : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const auto q = steady_state_modified3<double>(q1, q2);
                add(sys, {q[0], q[1], q[2]});
            }
    } else if (system_id == "deviation") {
        const auto sys = system_by_name<double>("deviation");
        add(sys, {0.0});
        add(sys, {-1.0});
    } else {
        throw std::invalid_argument("steady-states: no enumeration for system " + system_id);
    }
    return recs;
}

int run_reformulate_check(const std::string& system_id, double a) {
    const auto sys = system_by_name<double>(system_id, a);
    if (system_id != "orig2" && system_id != "orig3")
        throw std::invalid_argument("reformulate-check expects orig2 or orig3");
    const auto J = AffineFunctional<double>::sum_minus_one(sys.dim);
    const auto alpha = sum_field<double>();
    const auto projected = reformulate_projection(sys, J, alpha);
    const auto state_scaled = reformulate_state_scaled(sys, J, alpha);

    std::mt19937_64 rng(20230815);
    std::uniform_real_distribution<double> dist(-0.5, 2.0);
    Vec<double> q(sys.dim);
    double worst_proj = 0.0, worst_scaled = 0.0, worst_second = 0.0;
    for (int i = 0; i < 10000; ++i) {
        for (auto& x : q) x = dist(rng);
        worst_proj = std::max(worst_proj, std::abs(first_integral_residual(projected, J, q)));
        worst_scaled = std::max(worst_scaled, std::abs(first_integral_residual(state_scaled, J, q)));
        worst_second = std::max(worst_second, std::abs(second_integral_residual(sys, J, alpha, q)));
    }
    std::printf("reformulate-check %s over 10000 random states in [-0.5,2]^%zu\n",
                system_id.c_str(), sys.dim);
    std::printf("  second-integral residual of the original system: %.3e\n", worst_second);
    std::printf("  first-integral residual, projection variant:     %.3e\n", worst_proj);
    std::printf("  first-integral residual, state-scaled variant:   %.3e\n", worst_scaled);
    const bool pass = worst_proj <= 1e-12 && worst_scaled <= 1e-12;
    std::printf("  %s (threshold 1e-12 on both reformulations)\n", pass ? "PASS" : "FAIL");
    return pass ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gene-inheritance ODE models: adaptive RK integration and invariant analysis"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "integrate a system with explicit settings");
    std::string sim_system, sim_method = "tsit5", sim_q0, sim_precision = "f64", sim_out;
    double sim_a = 0.7, sim_abstol = -1, sim_reltol = -1, sim_tend = 50.0;
    sim->add_option("--system", sim_system, "orig2|mod2|orig3|mod3|compartments|deviation")
        ->required();
    sim->add_option("--method", sim_method, "tsit5|dp5|vern6");
    sim->add_option("--q0", sim_q0, "initial state, comma separated")->required();
    sim->add_option("--a", sim_a, "mutation parameter of the 2-component models");
    sim->add_option("--abstol", sim_abstol, "absolute tolerance");
    sim->add_option("--reltol", sim_reltol, "relative tolerance");
    sim->add_option("--t-end", sim_tend, "end of the integration interval");
    sim->add_option("--precision", sim_precision, "f32|f64|big");
    sim->add_option("--out", sim_out, "CSV output path (JSON summary written alongside)");

    // reproduce
    auto* rep = app.add_subcommand("reproduce", "run a figure preset");
    std::string rep_preset, rep_method, rep_precision, rep_out;
    rep->add_option("preset", rep_preset, "fig1|fig2|fig3-field|fig4|fig5|fig6-field|fig8-2c|fig8-3c")
        ->required();
    rep->add_option("--method", rep_method, "override the preset method");
    rep->add_option("--precision", rep_precision,
                    "override the preset precision (re-derives tolerances)");
    rep->add_option("--out", rep_out, "CSV output path (default <preset>.csv)");

    // steady-states
    auto* ss = app.add_subcommand("steady-states", "enumerate steady states with eigenanalysis");
    std::string ss_system, ss_format = "csv";
    double ss_a = 0.7;
    ss->add_option("system", ss_system, "orig2|mod2|orig3|mod3|deviation")->required();
    ss->add_option("--a", ss_a, "mutation parameter");
    ss->add_option("--format", ss_format, "csv|json");

    // eigen
    auto* eig = app.add_subcommand("eigen", "eigenvalues of the Jacobian at a state");
    std::string eig_system, eig_at, eig_format = "csv";
    double eig_a = 0.7;
    eig->add_option("system", eig_system, "orig2|mod2|orig3|mod3|compartments|deviation")
        ->required();
    eig->add_option("--at", eig_at, "state, comma separated")->required();
    eig->add_option("--a", eig_a, "mutation parameter");
    eig->add_option("--format", eig_format, "csv|json");

    // field
    auto* fld = app.add_subcommand("field", "sample a 2-component vector field to CSV");
    std::string fld_system, fld_out = "field.csv";
    double fld_a = 0.7, fld_min = 0.0, fld_max = 1.5, fld_step = 0.1;
    fld->add_option("system", fld_system, "orig2|mod2")->required();
    fld->add_option("--a", fld_a, "mutation parameter");
    fld->add_option("--min", fld_min, "lower bound of both axes");
    fld->add_option("--max", fld_max, "upper bound of both axes");
    fld->add_option("--step", fld_step, "grid spacing");
    fld->add_option("--out", fld_out, "CSV output path");

    // reformulate-check
    auto* ref = app.add_subcommand("reformulate-check",
                                   "verify both invariant reformulations on random states");
    std::string ref_system;
    double ref_a = 0.7;
    ref->add_option("system", ref_system, "orig2|orig3")->required();
    ref->add_option("--a", ref_a, "mutation parameter");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*sim) {
            SimulationRequest req;
            req.system = sim_system;
            req.method = sim_method;
            req.a = sim_a;
            req.q0 = parse_state(sim_q0);
            req.precision = precision_by_name(sim_precision);
            req.abstol = sim_abstol > 0 ? sim_abstol : default_tolerance(req.precision);
            req.reltol = sim_reltol > 0 ? sim_reltol : default_tolerance(req.precision);
            req.t_end = sim_tend;
            if (!sim_out.empty()) req.out_csv = sim_out;
            print_summary(run_simulation(req));
            return kExitOk;
        }
        if (*rep) {
            PresetOptions opt;
            if (!rep_method.empty()) opt.method = rep_method;
            if (!rep_precision.empty()) opt.precision = precision_by_name(rep_precision);
            if (!rep_out.empty()) opt.out_csv = rep_out;
            print_summary(run_preset(rep_preset, opt));
            return kExitOk;
        }
        if (*ss) {
            if (ss_format != "csv" && ss_format != "json")
                throw std::invalid_argument("--format must be csv or json");
            const auto recs = enumerate_steady_states(ss_system, ss_a);
            const bool json_format = ss_format == "json";
            if (json_format) std::printf("[");
            if (!json_format) {
                std::printf("# point,eigenvalues,classification for system %s\n",
                            ss_system.c_str());
            }
            bool first = true;
            for (const auto& rec : recs) {
                print_record(rec, json_format, first);
                first = false;
            }
            if (json_format) std::printf("]\n");
            return kExitOk;
        }
        if (*eig) {
            const auto at = parse_state(eig_at);
            const auto sys = system_by_name<double>(eig_system, eig_a);
            if (at.size() != sys.dim)
                throw std::invalid_argument("--at has length " + std::to_string(at.size()) +
                                            " but system has dimension " +
                                            std::to_string(sys.dim));
            const Mat<double> jac =
                sys.has_jacobian() ? sys.jac(at) : finite_difference_jacobian<double>(sys, at);
            const auto dec = eigen_small(jac);
            if (eig_format == "json") {
                nlohmann::json j = nlohmann::json::array();
                for (const auto& ev : dec.values)
                    j.push_back({{"re", ev.real()}, {"im", ev.imag()}});
                std::printf("%s\n", j.dump().c_str());
            } else {
                std::printf("eigenvalues of %s at %s:\n", eig_system.c_str(), eig_at.c_str());
                for (const auto& ev : dec.values) {
                    if (ev.imag() == 0.0)
                        std::printf("  %.12g\n", ev.real());
                    else
                        std::printf("  %.12g%+.12gi\n", ev.real(), ev.imag());
                }
                std::printf("classification: %s\n",
                            to_string(classify_stability(dec.values)));
                if (dec.defective) std::printf("note: defective eigenvalue cluster\n");
            }
            return kExitOk;
        }
        if (*fld) {
            const auto sys = system_by_name<double>(fld_system, fld_a);
            const GridSpec<double> grid{fld_min, fld_max, fld_min, fld_max, fld_step};
            const auto n = export_vector_field(sys, grid, fld_out);
            std::printf("wrote %zu field samples to %s\n", n, fld_out.c_str());
            return kExitOk;
        }
        if (*ref) return run_reformulate_check(ref_system, ref_a);
    } catch (const std::logic_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
