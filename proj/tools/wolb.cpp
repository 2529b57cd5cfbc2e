// wolb: command-line driver for equilibria, simulation, optimal control,
// impulsive schedules, the genetic algorithm and phase-plane exports.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reference.hpp"
#include "wolb/equilibria.hpp"
#include "wolb/errors.hpp"
#include "wolb/ga.hpp"
#include "wolb/impulsive.hpp"
#include "wolb/io.hpp"
#include "wolb/ocp.hpp"
#include "wolb/scenario.hpp"
#include "wolb/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wolb;

namespace {

enum Exit { ok = 0, failed = 1, usage = 2 };

struct CommonFlags {
    std::string config;
    std::optional<std::string> strain;
    std::vector<std::string> params;
    std::optional<double> initial_wild;
    std::optional<double> cap_l;
    std::optional<int> frequency;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "INI scenario file")->check(CLI::ExistingFile);
    cmd->add_option("--strain", f.strain, "preset: wmel | wmelpop");
    cmd->add_option("--param", f.params, "override a parameter, key=value (repeatable)");
    cmd->add_option("--initial-wild", f.initial_wild, "initial wild population (default ln(Qx)/sigma)");
    cmd->add_option("--cap", f.cap_l, "daily release capacity L");
    cmd->add_option("--frequency", f.frequency, "release period in days")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--output-dir", f.output_dir, "output directory (default $WOLB_OUTPUT_DIR or ./out)");
}

Scenario build_scenario(const CommonFlags& f) {
    Scenario s;
    if (!f.config.empty()) apply_ini_file(s, f.config);
    if (f.strain) s.strain = *f.strain;
    for (const auto& kv : f.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("--param expects key=value, got '" + kv + "'");
        s.param_overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (f.initial_wild) s.initial_wild = f.initial_wild;
    if (f.cap_l) s.cap_l = f.cap_l;
    if (f.frequency) s.frequency_p = *f.frequency;
    if (f.seed) s.seed = *f.seed;
    if (f.output_dir) s.output_dir = *f.output_dir;
    s.params();  // validates strain name and overrides
    return s;
}

std::string out_path(const Scenario& s, const std::string& name) {
    const fs::path dir = s.resolved_output_dir();
    fs::create_directories(dir);
    return (dir / name).string();
}

json header(const Scenario& s, const std::string& command) {
    return {{"command", command}, {"strain", s.strain}, {"seed", s.seed},
            {"config_hash", s.config_hash()}, {"config", s.to_json()}};
}

void write_json(const Scenario& s, const std::string& name, const json& j) {
    io::write_file(out_path(s, name), [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

json state_json(const State& st) { return {{"x", st.x}, {"y", st.y}}; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

double deviation_pct(double value, double ref) { return 100.0 * (value - ref) / ref; }

// ---------------------------------------------------------------------------

int cmd_equilibria(const Scenario& s) {
    const auto p = s.params();
    const auto eq = equilibria(p);
    json j = header(s, "equilibria");
    const auto& q = eq.offspring;
    j["offspring"] = {{"q_x", q.q_x}, {"q_y", q.q_y}, {"q_yx", q.q_yx}, {"q_c", q.q_c}, {"viable", q.viable}};
    j["collision"] = eq.collision;

    std::cout << "strain " << p.name << "  Qx=" << q.q_x << " Qy=" << q.q_y << " Qyx=" << q.q_yx
              << " Qc=" << q.q_c << "\n";
    std::cout << std::left << std::setw(4) << "" << std::right << std::setw(12) << "x" << std::setw(12)
              << "y"
              << "  stability\n";
    auto row = [&](const char* name, const std::optional<Equilibrium>& e) {
        if (!e) {
            j["equilibria"][name] = nullptr;
            return;
        }
        j["equilibria"][name] = {{"x", e->point.x}, {"y", e->point.y}, {"stability", to_string(e->stability)}};
        std::cout << std::left << std::setw(4) << name << std::right << std::fixed << std::setprecision(2)
                  << std::setw(12) << e->point.x << std::setw(12) << e->point.y << "  "
                  << to_string(e->stability) << "\n";
    };
    row("E0", eq.e0);
    row("Ex", eq.ex);
    row("Eu", eq.eu);
    row("Es", eq.es);
    row("Ey", eq.ey);
    write_json(s, "equilibria.json", j);
    return ok;
}

int cmd_simulate(const Scenario& s, const std::string& schedule_file, const std::string& control_file) {
    const auto p = s.params();
    const auto eq = equilibria(p);
    const State s0{s.x0(), 0.0};
    Trajectory tr;
    json j = header(s, "simulate");
    if (!control_file.empty()) {
        const auto c = io::read_control_file(control_file);
        tr = integrate(p, s0, c.as_control(), 0.0, std::max(s.sim.t_end, c.t_star), s.sim);
        j["input"] = {{"control", control_file}};
    } else {
        const auto sched = io::read_schedule_file(schedule_file, s.frequency_p);
        SimOptions so = s.sim;
        if (!sched.entries.empty()) so.t_end = std::max(so.t_end, sched.entries.back().time);
        tr = simulate_impulsive(p, s0, sched, so);
        j["input"] = {{"schedule", schedule_file}};
        j["releases"] = sched.nonzero_count();
        j["total_released"] = sched.total();
    }
    const auto entry = eq.eu ? first_basin_entry(tr, secure_region(eq)) : std::nullopt;
    j["basin_entry_time"] = optional_json(entry);
    j["feasible"] = entry.has_value();
    j["final_state"] = state_json(tr.final_state());
    io::write_file(out_path(s, "trajectory.csv"), [&](std::ostream& os) { io::write_trajectory(os, tr); });
    write_json(s, "simulate.json", j);
    std::cout << "basin entry: " << (entry ? std::to_string(*entry) : std::string("none")) << "\n";
    return ok;
}

json ocp_json(const ocp::OCPSolution& sol) {
    return {{"t_star", sol.control.t_star},
            {"total_released", sol.total_released},
            {"objective", sol.objective_j},
            {"lambda1_0", sol.lambda1_0},
            {"terminal_x", sol.terminal_x},
            {"iterations", sol.iterations},
            {"converged", sol.converged},
            {"residuals",
             {{"terminal_x", sol.residuals.terminal_x},
              {"hamiltonian", sol.residuals.hamiltonian},
              {"terminal_costate", sol.residuals.terminal_costate},
              {"clamp", sol.residuals.clamp},
              {"bracket", sol.residuals.bracket}}}};
}

int cmd_ocp(const Scenario& s) {
    const auto p = s.params();
    const auto sol = ocp::solve(p, s.ocp_config());
    json j = header(s, "ocp");
    j.update(ocp_json(sol));
    io::write_file(out_path(s, "control.csv"), [&](std::ostream& os) { io::write_control(os, sol); });
    io::write_file(out_path(s, "ocp_trajectory.csv"),
                   [&](std::ostream& os) { io::write_trajectory(os, sol.state_traj); });
    write_json(s, "ocp.json", j);
    std::cout << std::fixed << std::setprecision(4) << "T* = " << sol.control.t_star
              << " days, released = " << std::setprecision(1) << sol.total_released
              << ", converged = " << (sol.converged ? "yes" : "no") << "\n";
    return sol.converged ? ok : failed;
}

json report_json(const impulsive::IndicatorReport& r) {
    return {{"num_releases", r.num_releases},
            {"overall_size", r.overall_size},
            {"basin_entry_time", optional_json(r.basin_entry_time)},
            {"deadline", r.deadline},
            {"feasible", r.feasible}};
}

int cmd_impulsive(const Scenario& s, const std::string& control_file) {
    const auto p = s.params();
    const auto region = secure_region(equilibria(p));
    const auto ctrl = io::read_control_file(control_file);
    impulsive::EvaluateOptions eo{s.initial_wild, s.sim};
    const auto daily = impulsive::daily_impulses(ctrl);
    const auto dsched = impulsive::to_schedule(daily);
    const auto drep = impulsive::evaluate_schedule(p, dsched, region, eo);
    json j = header(s, "impulsive");
    j["daily"] = report_json(drep);
    io::write_file(out_path(s, "schedule_daily.csv"), [&](std::ostream& os) { io::write_schedule(os, dsched); });
    std::cout << "daily: " << drep.num_releases << " releases, " << drep.overall_size << " total, "
              << (drep.feasible ? "feasible" : "infeasible") << "\n";
    const int m = s.frequency_p;
    if (m > 1) {
        const auto choice = impulsive::select_rule(p, ctrl, m, region, eo);
        const auto sched = impulsive::to_schedule(choice.sequence);
        j["periodic"] = report_json(choice.report);
        j["periodic"]["period_m"] = m;
        j["periodic"]["rule"] = to_string(choice.sequence.rule);
        io::write_file(out_path(s, "schedule_m" + std::to_string(m) + ".csv"),
                       [&](std::ostream& os) { io::write_schedule(os, sched); });
        std::cout << "every " << m << " days (" << to_string(choice.sequence.rule)
                  << " rule): " << choice.report.num_releases << " releases, "
                  << choice.report.overall_size << " total\n";
    }
    write_json(s, "impulsive.json", j);
    return drep.feasible ? ok : failed;
}

int daily_count(const StrainParams& p, const Scenario& s) {
    return impulsive::daily_impulses(ocp::solve(p, s.ocp_config()).control).t_hat;
}

ga::EpsilonResult run_epsilon(const Scenario& s, const StrainParams& p) {
    auto ctx = ga::make_context(p, s.capacity(), s.initial_wild);
    ctx.sim = s.sim;
    const auto cfg = s.ga_config();
    ga::EpsilonLoopConfig ec;
    ec.step = cfg.block_p;
    ec.restarts_per_epsilon = s.restarts_per_epsilon;
    ec.epsilon_0 = s.epsilon_0 ? *s.epsilon_0 : ga::default_epsilon(daily_count(p, s), cfg.block_p);
    return ga::epsilon_loop(ec, cfg, ctx);
}

int cmd_ga(const Scenario& s) {
    const auto p = s.params();
    const auto res = run_epsilon(s, p);
    json j = header(s, "ga");
    json rounds = json::array();
    for (const auto& r : res.rounds)
        rounds.push_back({{"horizon", r.horizon}, {"feasible", r.feasible}, {"best_J", r.best_j},
                          {"releases", r.releases}});
    j["rounds"] = rounds;
    j["feasible"] = res.feasible;
    if (!res.feasible) {
        write_json(s, "ga.json", j);
        std::cout << "no feasible plan at the initial horizon\n";
        return failed;
    }
    const auto& best = res.best;
    j["horizon"] = res.horizon;
    j["J"] = best.report.j_value;
    j["releases"] = best.plan.release_count();
    j["fitness"] = best.report.fitness_f;
    j["entry_time"] = optional_json(best.report.entry_time);
    j["final_state"] = state_json(best.report.final_state);
    j["genes"] = best.plan.genes;
    io::write_file(out_path(s, "ga_history.csv"), [&](std::ostream& os) { io::write_history(os, res.history); });
    io::write_file(out_path(s, "ga_plan.csv"),
                   [&](std::ostream& os) { io::write_schedule(os, best.plan.to_schedule()); });
    write_json(s, "ga.json", j);
    std::cout << "horizon " << res.horizon << " days, " << best.plan.release_count() << " releases, J = "
              << std::fixed << std::setprecision(0) << best.report.j_value << "\n";
    return ok;
}

int cmd_phase(const Scenario& s, std::size_t nx, std::size_t ny, std::optional<double> x_max,
              std::optional<double> y_max) {
    const auto p = s.params();
    const double xs = wild_carrying_level(p);
    GridSpec g{0.0, x_max.value_or(1.2 * xs), nx, 0.0, y_max.value_or(1.2 * xs), ny};
    const auto field = phase_field(p, g);
    const auto sep = separatrix(p);
    io::write_file(out_path(s, "phase.csv"), [&](std::ostream& os) { io::write_phase(os, field); });
    io::write_file(out_path(s, "separatrix.csv"), [&](std::ostream& os) { io::write_curve(os, sep); });
    json j = header(s, "phase");
    j["grid"] = {{"nx", nx}, {"ny", ny}, {"x_max", g.x_max}, {"y_max", g.y_max}};
    j["phase_rows"] = field.size();
    j["separatrix_points"] = sep.size();
    write_json(s, "phase.json", j);
    std::cout << field.size() << " field samples, " << sep.size() << " separatrix points\n";
    return ok;
}

// ---------------------------------------------------------------------------

void print_cell(const std::string& label, double value, double ref) {
    std::cout << "  " << std::left << std::setw(28) << label << std::right << std::fixed
              << std::setprecision(2) << std::setw(12) << value << std::setw(12) << ref << std::setw(9)
              << std::showpos << deviation_pct(value, ref) << "%" << std::noshowpos << "\n";
}

int reproduce_table2(Scenario s) {
    json j = header(s, "reproduce table2");
    json cells = json::array();
    std::cout << "  " << std::left << std::setw(28) << "indicator" << std::right << std::setw(12) << "value"
              << std::setw(12) << "reference" << std::setw(10) << "dev\n";
    bool all_feasible = true;
    for (const char* strain : {"wmel", "wmelpop"}) {
        s.strain = strain;
        s.cap_l.reset();
        const auto p = s.params();
        const auto region = secure_region(equilibria(p));
        const auto sol = ocp::solve(p, s.ocp_config());
        for (const auto& r : reference::ocp)
            if (r.strain == strain) {
                print_cell(std::string(strain) + " T*", sol.control.t_star, r.t_star);
                print_cell(std::string(strain) + " integral u*", sol.total_released, r.total);
                cells.push_back({{"strain", strain}, {"indicator", "ocp"}, {"t_star", sol.control.t_star},
                                 {"total", sol.total_released}, {"reference_t_star", r.t_star},
                                 {"reference_total", r.total}});
            }
        impulsive::EvaluateOptions eo{s.initial_wild, s.sim};
        const auto daily = impulsive::daily_impulses(sol.control);
        for (const auto& ref : reference::table2) {
            if (ref.strain != strain) continue;
            impulsive::IndicatorReport rep;
            std::string rule = "daily";
            if (ref.frequency == 1) {
                rep = impulsive::evaluate_schedule(p, impulsive::to_schedule(daily), region, eo);
            } else {
                const auto choice = impulsive::select_rule(p, sol.control, ref.frequency, region, eo);
                rep = choice.report;
                rule = to_string(choice.sequence.rule);
            }
            all_feasible = all_feasible && rep.feasible;
            const std::string tag = std::string(strain) + " m=" + std::to_string(ref.frequency);
            print_cell(tag + " releases", static_cast<double>(rep.num_releases), ref.releases);
            print_cell(tag + " total (" + rule + ")", static_cast<double>(rep.overall_size), ref.total);
            cells.push_back({{"strain", strain}, {"frequency", ref.frequency}, {"rule", rule},
                             {"releases", rep.num_releases}, {"total", rep.overall_size},
                             {"feasible", rep.feasible}, {"reference_releases", ref.releases},
                             {"reference_total", ref.total}});
        }
    }
    j["cells"] = cells;
    write_json(s, "reproduce_table2.json", j);
    return all_feasible ? ok : failed;
}

int reproduce_table4(Scenario s) {
    json j = header(s, "reproduce table4");
    json cells = json::array();
    bool all_feasible = true;
    for (const auto& ref : reference::table4) {
        s.strain = std::string(ref.strain);
        s.cap_l.reset();
        s.frequency_p = ref.frequency;
        const auto p = s.params();
        const auto res = run_epsilon(s, p);
        all_feasible = all_feasible && res.feasible;
        const std::string tag = std::string(ref.strain) + " p=" + std::to_string(ref.frequency);
        if (!res.feasible) {
            std::cout << "  " << tag << ": infeasible\n";
            cells.push_back({{"strain", ref.strain}, {"frequency", ref.frequency}, {"feasible", false}});
            continue;
        }
        print_cell(tag + " releases", static_cast<double>(res.best.plan.release_count()), ref.releases);
        print_cell(tag + " J", res.best.report.j_value, ref.total);
        cells.push_back({{"strain", ref.strain}, {"frequency", ref.frequency}, {"feasible", true},
                         {"horizon", res.horizon}, {"releases", res.best.plan.release_count()},
                         {"J", res.best.report.j_value}, {"reference_releases", ref.releases},
                         {"reference_J", ref.total}});
    }
    j["cells"] = cells;
    write_json(s, "reproduce_table4.json", j);
    return all_feasible ? ok : failed;
}

int reproduce(const Scenario& s, const std::string& which) {
    if (which == "table2") return reproduce_table2(s);
    return reproduce_table4(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wolbachia release planning on a bistable two-population model"};
    app.require_subcommand(1);

    CommonFlags f;
    std::string schedule_file, control_file, reproduce_which;
    std::size_t nx = 50, ny = 50;
    std::optional<double> x_max, y_max, t_end;
    std::optional<int> generations, pop_n, epsilon_0, restarts;
    std::optional<unsigned> threads;
    bool relocate = false;

    auto* eq = app.add_subcommand("equilibria", "equilibria, stability and offspring numbers");
    add_common(eq, f);

    auto* sim = app.add_subcommand("simulate", "simulate a release schedule or control file");
    add_common(sim, f);
    auto* sched_opt = sim->add_option("--schedule", schedule_file, "CSV day,size[,rule]");
    auto* ctrl_opt = sim->add_option("--control", control_file, "CSV t,u_star[,...]");
    sched_opt->excludes(ctrl_opt);
    sim->add_option("--t-end", t_end, "simulation horizon (days)");

    auto* oc = app.add_subcommand("ocp", "continuous optimal release");
    add_common(oc, f);
    auto* imp = app.add_subcommand("impulsive", "impulsive schedules from a control file");
    add_common(imp, f);
    imp->add_option("--control", control_file, "control CSV written by `ocp`");
    auto* gac = app.add_subcommand("ga", "genetic algorithm with the epsilon-constraint loop");
    add_common(gac, f);
    gac->add_option("--generations", generations, "generations G");
    gac->add_option("--population", pop_n, "population size N");
    gac->add_option("--epsilon-0", epsilon_0, "initial horizon (multiple of the frequency)");
    gac->add_option("--restarts", restarts, "GA runs per horizon");
    gac->add_option("--threads", threads, "fitness evaluation threads");
    gac->add_flag("--relocate", relocate, "mutation may move the release day within its block");
    for (auto* c : {oc, imp, gac})
        c->add_option("--reproduce", reproduce_which, "run the reference matrix: table2 | table4")
            ->check(CLI::IsMember({"table2", "table4"}));

    auto* ph = app.add_subcommand("phase", "vector field and separatrix");
    add_common(ph, f);
    ph->add_option("--nx", nx, "grid columns")->check(CLI::PositiveNumber);
    ph->add_option("--ny", ny, "grid rows")->check(CLI::PositiveNumber);
    ph->add_option("--x-max", x_max, "grid extent in x");
    ph->add_option("--y-max", y_max, "grid extent in y");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        Scenario s = build_scenario(f);
        if (t_end) s.sim.t_end = *t_end;
        if (generations) s.ga.generations_g = *generations;
        if (pop_n) s.ga.pop_n = *pop_n;
        if (epsilon_0) s.epsilon_0 = *epsilon_0;
        if (restarts) s.restarts_per_epsilon = *restarts;
        if (threads) s.ga.threads = *threads;
        if (relocate) s.ga.relocation_mutation = true;

        if (!reproduce_which.empty()) return reproduce(s, reproduce_which);
        if (*eq) return cmd_equilibria(s);
        if (*sim) {
            if (schedule_file.empty() && control_file.empty())
                throw ParseError("simulate needs --schedule or --control");
            return cmd_simulate(s, schedule_file, control_file);
        }
        if (*oc) return cmd_ocp(s);
        if (*imp) {
            if (control_file.empty()) throw ParseError("impulsive needs --control (write one with `ocp`)");
            return cmd_impulsive(s, control_file);
        }
        if (*gac) return cmd_ga(s);
        if (*ph) return cmd_phase(s, nx, ny, x_max, y_max);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const ConvergenceError& e) {
        std::cerr << "not converged: " << e.what() << "\n";
        return failed;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return failed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return failed;
    }
    return usage;
}
