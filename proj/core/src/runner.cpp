#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "obk/config.hpp"
#include "obk/montecarlo.hpp"
#include "obk/obstacle.hpp"

namespace obk {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open output " + path);
    out << text;
}

void write_field_csv(const std::string& path, const SpaceTimeField& u, const Grid& grid) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ValidationError("cannot open output " + path);
    std::fputs("t,x,u\n", f);
    for (int k = 0; k <= grid.n_t; ++k)
        for (int i = 0; i < grid.n_nodes(); ++i)
            std::fprintf(f, "%.17g,%.17g,%.17g\n", grid.time(k), grid.node(i), u.at(k, i));
    std::fclose(f);
}

void write_nu_csv(const std::string& path, const ReactionMeasure& nu, const Grid& grid) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ValidationError("cannot open output " + path);
    std::fputs("kind,k,i,value\n", f);
    for (int k = 0; k < grid.n_t; ++k)
        for (int i = 0; i < grid.n_nodes(); ++i) {
            const double v = nu.cont_plus[static_cast<size_t>(k)][static_cast<size_t>(i)] -
                             nu.cont_minus[static_cast<size_t>(k)][static_cast<size_t>(i)];
            if (v != 0.0) std::fprintf(f, "cont,%d,%d,%.17g\n", k, i, v);
        }
    auto dump_atoms = [&](const std::map<int, Slice>& atoms, double sign) {
        for (const auto& [k, sl] : atoms)
            for (int i = 0; i < grid.n_nodes(); ++i)
                if (sl[static_cast<size_t>(i)] != 0.0)
                    std::fprintf(f, "atom,%d,%d,%.17g\n", k, i, sign * sl[static_cast<size_t>(i)]);
    };
    dump_atoms(nu.atom_plus, 1.0);
    dump_atoms(nu.atom_minus, -1.0);
    std::fclose(f);
}

// The manifest pins everything needed to reproduce the artifacts; the worker
// count is deliberately absent (outputs are schedule-independent).
json manifest_json(const ExperimentConfig& cfg) {
    json m;
    m["config_hash"] = cfg.hash;
    m["version"] = kVersion;
    m["seed"] = cfg.mc.seed;
    m["name"] = cfg.name;
    return m;
}

json diagnostics_json(const std::vector<StepDiagnostics>& diag) {
    json arr = json::array();
    for (const auto& d : diag) {
        json e;
        e["newton_iters"] = d.newton_iters;
        e["active_set_switches"] = d.active_set_switches;
        e["psor_fallback"] = d.psor_fallback;
        e["residual"] = d.residual;
        arr.push_back(e);
    }
    return arr;
}

double read_field_value(const std::string& csv_path, double t, double x) {
    std::ifstream in(csv_path);
    if (!in) throw ValidationError("certify: cannot open --against file " + csv_path);
    std::string line;
    std::getline(in, line);
    double best = 0.0, best_d = std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        const double tt = std::stod(cell);
        std::getline(ls, cell, ',');
        const double xx = std::stod(cell);
        std::getline(ls, cell, ',');
        const double uu = std::stod(cell);
        const double d = std::abs(tt - t) * 1e3 + std::abs(xx - x);
        if (d < best_d) {
            best_d = d;
            best = uu;
        }
    }
    return best;
}

struct PenaltyLadderReport {
    std::vector<double> levels, gaps;
    double worst_monotonicity = 0.0;   // max decrease between consecutive levels
};

json ladder_json(const PenaltyLadderReport& rep) {
    json j;
    j["levels"] = rep.levels;
    j["sup_gap_to_lcp"] = rep.gaps;
    j["worst_monotonicity_violation"] = rep.worst_monotonicity;
    return j;
}

} // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int threads,
                         const std::string& against_csv) {
    RunResult rr;
    fs::create_directories(out_dir);
    auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    std::string saved_threads;
    bool had_env = false;
    if (threads > 0) {
        if (const char* e = std::getenv("OBSTACLE_KIT_THREADS")) {
            saved_threads = e;
            had_env = true;
        }
        setenv("OBSTACLE_KIT_THREADS", std::to_string(threads).c_str(), 1);
    }
    auto restore = [&]() {
        if (threads > 0) {
            if (had_env)
                setenv("OBSTACLE_KIT_THREADS", saved_threads.c_str(), 1);
            else
                unsetenv("OBSTACLE_KIT_THREADS");
        }
    };

    try {
        const DiscreteForm form = assemble(cfg.coefficients, cfg.grid);
        json report;
        report["name"] = cfg.name;
        report["upwinded"] = form.upwinded;

        switch (cfg.kind) {
            case ExperimentKind::pde: {
                PdeSolution sol = solve_pde(cfg.terminal, cfg.reaction, cfg.measure, form, cfg.solver);
                write_field_csv(path("u.csv"), sol.u, cfg.grid);
                rr.outputs.push_back(path("u.csv"));
                report["diagnostics"] = diagnostics_json(sol.diagnostics);
                write_load_csv(discretize(cfg.measure, cfg.grid), cfg.grid, path("load.csv"));
                rr.outputs.push_back(path("load.csv"));
                break;
            }
            case ExperimentKind::obstacle1:
            case ExperimentKind::obstacle2: {
                if (!cfg.barrier_lower)
                    throw ValidationError("obstacle run: barrier not configured");
                ObstacleSolution sol;
                if (cfg.kind == ExperimentKind::obstacle1) {
                    sol = solve_one_barrier(cfg.terminal, cfg.reaction, cfg.measure,
                                            *cfg.barrier_lower, form, cfg.solver);
                } else {
                    if (!cfg.barrier_upper)
                        throw ValidationError("obstacle2 run: upper barrier not configured");
                    sol = solve_two_barrier(cfg.terminal, cfg.reaction, cfg.measure,
                                            *cfg.barrier_lower, *cfg.barrier_upper, form,
                                            cfg.solver);
                }
                write_field_csv(path("u.csv"), sol.u, cfg.grid);
                write_nu_csv(path("nu.csv"), sol.nu, cfg.grid);
                rr.outputs.push_back(path("u.csv"));
                rr.outputs.push_back(path("nu.csv"));
                report["residuals"] = {
                    {"complementarity", sol.residuals.complementarity},
                    {"feasibility", sol.residuals.feasibility},
                    {"minimality_precise", sol.residuals.minimality_precise},
                    {"minimality_naive", sol.residuals.minimality_naive},
                };
                report["nu_total_variation"] = sol.nu.total_variation();
                report["terminal_compatible"] = sol.terminal_compatible;

                if (!cfg.penalty_ladder.empty()) {
                    PenaltyLadderReport lad;
                    SpaceTimeField prev;
                    bool have_prev = false;
                    for (double n : cfg.penalty_ladder) {
                        SpaceTimeField un;
                        if (cfg.kind == ExperimentKind::obstacle1) {
                            un = solve_penalized(cfg.terminal, cfg.reaction, cfg.measure,
                                                 *cfg.barrier_lower, n, form, cfg.solver).u;
                        } else {
                            un = solve_two_barrier_penalized(cfg.terminal, cfg.reaction, cfg.measure,
                                                             *cfg.barrier_lower, *cfg.barrier_upper,
                                                             n, form, cfg.solver).u;
                        }
                        lad.levels.push_back(n);
                        lad.gaps.push_back(sup_abs_diff(un, sol.u));
                        if (have_prev) {
                            double worst = 0.0;
                            for (size_t k = 0; k < un.slices.size(); ++k)
                                for (size_t i = 0; i < un.slices[k].size(); ++i)
                                    worst = std::max(worst, prev.slices[k][i] - un.slices[k][i]);
                            lad.worst_monotonicity = std::max(lad.worst_monotonicity, worst);
                        }
                        prev = std::move(un);
                        have_prev = true;
                    }
                    report["penalty_ladder"] = ladder_json(lad);
                }
                break;
            }
            case ExperimentKind::switching: {
                if (!cfg.switching) throw ValidationError("switching run: no switching block");
                SwitchingSolution sol =
                    solve_switching_picard(*cfg.switching, form, cfg.picard_tol, 200, cfg.solver);
                for (int j = 0; j < cfg.switching->n_modes(); ++j) {
                    const std::string uj = "u_mode" + std::to_string(j) + ".csv";
                    const std::string nj = "nu_mode" + std::to_string(j) + ".csv";
                    write_field_csv(path(uj), sol.u[static_cast<size_t>(j)], cfg.grid);
                    write_nu_csv(path(nj), sol.nu[static_cast<size_t>(j)], cfg.grid);
                    rr.outputs.push_back(path(uj));
                    rr.outputs.push_back(path(nj));
                }
                auto regions = stopping_regions(sol, *cfg.switching, cfg.grid, cfg.eps_switch);
                for (int j = 0; j < cfg.switching->n_modes(); ++j) {
                    const std::string rj = "region_mode" + std::to_string(j) + ".csv";
                    std::FILE* f = std::fopen(path(rj).c_str(), "wb");
                    if (!f) throw ValidationError("cannot open output " + path(rj));
                    std::fputs("k,i,stop\n", f);
                    for (int k = 0; k <= cfg.grid.n_t; ++k)
                        for (int i = 0; i < cfg.grid.n_nodes(); ++i)
                            if (regions[static_cast<size_t>(j)][static_cast<size_t>(k * cfg.grid.n_nodes() + i)])
                                std::fprintf(f, "%d,%d,1\n", k, i);
                    std::fclose(f);
                    rr.outputs.push_back(path(rj));
                }
                json log;
                log["sweeps"] = sol.log.sweeps;
                log["sup_change"] = sol.log.sup_change;
                report["iterations"] = log;
                break;
            }
            case ExperimentKind::certify: {
                json cert = json::array();
                const double x0 = 0.5 * (cfg.grid.x_min + cfg.grid.x_max);
                if (cfg.certify_target == ExperimentKind::obstacle1 ||
                    cfg.certify_target == ExperimentKind::pde) {
                    const bool with_barrier =
                        cfg.certify_target == ExperimentKind::obstacle1 && cfg.barrier_lower;
                    double grid_value;
                    if (!against_csv.empty()) {
                        grid_value = read_field_value(against_csv, 0.0, x0);
                    } else {
                        if (with_barrier) {
                            grid_value = solve_one_barrier(cfg.terminal, cfg.reaction, cfg.measure,
                                                           *cfg.barrier_lower, form, cfg.solver)
                                             .u.at(0, cfg.grid.nearest_node(x0));
                        } else {
                            grid_value = solve_pde(cfg.terminal, cfg.reaction, cfg.measure, form,
                                                   cfg.solver)
                                             .u.at(0, cfg.grid.nearest_node(x0));
                        }
                    }
                    report["grid_value"] = grid_value;
                    if (cfg.mc.tree_depth > 0) {
                        TreeProblem tp;
                        tp.a = cfg.coefficients.a(0.0, x0);
                        tp.b = cfg.coefficients.b(0.0, x0);
                        tp.grid = cfg.grid;
                        Slice phi = cfg.terminal;
                        const Grid g = cfg.grid;
                        tp.phi = [phi, g](double x) {
                            const double s = (x - g.x_min) / g.dx();
                            int i = static_cast<int>(std::floor(s));
                            i = std::max(0, std::min(g.n_nodes() - 2, i));
                            const double w = s - i;
                            return (1.0 - w) * phi[static_cast<size_t>(i)] + w * phi[static_cast<size_t>(i + 1)];
                        };
                        if (!cfg.reaction.zero()) {
                            auto f = cfg.reaction.f;
                            tp.f = [f](double t, double x) { return f(t, x, 0.0); };
                        }
                        tp.mu = cfg.measure;
                        tp.lower = with_barrier ? cfg.barrier_lower.get() : nullptr;
                        tp.x0 = x0;
                        OracleEstimate tree = snell_oracle(tp, cfg.mc.tree_depth);
                        const double band = 5e-3;
                        cert.push_back({{"method", "tree"},
                                        {"value", tree.value},
                                        {"stderr", 0.0},
                                        {"band", band},
                                        {"pass", std::abs(tree.value - grid_value) <= band}});
                    }
                    {
                        PathBundle paths = simulate_paths(cfg.coefficients, cfg.grid, x0,
                                                          cfg.mc.n_paths, cfg.mc.seed,
                                                          cfg.mc.substeps);
                        Barrier none_lo = Barrier::none(-std::numeric_limits<double>::infinity());
                        Barrier none_hi = Barrier::none(std::numeric_limits<double>::infinity());
                        RbsdeResult rb = rbsde_backward(
                            paths, cfg.terminal, cfg.reaction, cfg.measure,
                            with_barrier ? *cfg.barrier_lower : none_lo,
                            cfg.barrier_upper ? *cfg.barrier_upper : none_hi, form);
                        const double band = 3.0 * rb.y0.stderr_ + 1e-2;
                        cert.push_back({{"method", "rbsde"},
                                        {"value", rb.y0.value},
                                        {"stderr", rb.y0.stderr_},
                                        {"skorokhod_left", rb.skorokhod_left},
                                        {"skorokhod_right", rb.skorokhod_right},
                                        {"band", band},
                                        {"pass", std::abs(rb.y0.value - grid_value) <= band}});
                    }
                } else {
                    if (!cfg.switching) throw ValidationError("certify switching: no switching block");
                    SwitchingSolution sol = solve_switching_picard(*cfg.switching, form,
                                                                   cfg.picard_tol, 200, cfg.solver);
                    const int j0 = cfg.start_mode;
                    double grid_value;
                    if (!against_csv.empty())
                        grid_value = read_field_value(against_csv, 0.0, x0);
                    else
                        grid_value = sol.u[static_cast<size_t>(j0)].at(0, cfg.grid.nearest_node(x0));
                    report["grid_value"] = grid_value;
                    PathBundle paths = simulate_paths(cfg.coefficients, cfg.grid, x0, cfg.mc.n_paths,
                                                      cfg.mc.seed, cfg.mc.substeps);
                    const SwitchingProblem& prob = *cfg.switching;
                    const Grid grid = cfg.grid;
                    const double eps = cfg.eps_switch;
                    StrategyRule star = [&sol, &prob, grid, eps](std::span<const double> xs,
                                                                 int alive, int j) {
                        return extract_strategy(sol, prob, grid, j, xs, alive, eps);
                    };
                    OracleEstimate J = evaluate_strategy(paths, prob, star, j0);
                    const double band = 3.0 * J.stderr_ + 1e-2;
                    cert.push_back({{"method", "strategy-MC"},
                                    {"value", J.value},
                                    {"stderr", J.stderr_},
                                    {"band", band},
                                    {"pass", std::abs(J.value - grid_value) <= band}});
                    std::mt19937_64 rng(cfg.mc.seed ^ 0xC0FFEEULL);
                    for (int pert = 0; pert < cfg.mc.perturbations; ++pert) {
                        const int delay = 1 + static_cast<int>(rng() % 7);
                        const double skip = 0.15 * static_cast<double>(rng() % 5);
                        StrategyRule rule = [&sol, &prob, grid, eps, delay, skip](
                                                std::span<const double> xs, int alive, int j) {
                            Strategy st = extract_strategy(sol, prob, grid, j, xs, alive, eps);
                            Strategy out;
                            out.start_mode = st.start_mode;
                            int last_k = -1;
                            std::mt19937_64 prng(static_cast<std::uint64_t>(st.switches.size()) * 977 + delay);
                            for (auto sw : st.switches) {
                                if (skip > 0 && (prng() % 100) < skip * 100) continue;
                                sw.k += delay;
                                if (sw.k >= alive || sw.k >= grid.n_t) break;
                                if (sw.k <= last_k) sw.k = last_k + 1;
                                if (sw.k >= grid.n_t) break;
                                out.switches.push_back(sw);
                                last_k = sw.k;
                            }
                            // repair mode chain after skips
                            int mode = out.start_mode;
                            for (auto& sw : out.switches) {
                                sw.from = mode;
                                mode = sw.to;
                            }
                            return out;
                        };
                        OracleEstimate diff =
                            evaluate_strategy_difference(paths, prob, rule, star, j0);
                        cert.push_back({{"method", "perturbation-" + std::to_string(pert)},
                                        {"value", diff.value},
                                        {"stderr", diff.stderr_},
                                        {"band", 3.0 * diff.stderr_},
                                        {"pass", diff.value <= 3.0 * diff.stderr_}});
                    }
                }
                report["certificates"] = cert;
                bool all = true;
                for (const auto& c : cert) all = all && c.at("pass").get<bool>();
                report["pass"] = all;
                break;
            }
        }

        write_text(path("report.json"), report.dump(2) + "\n");
        rr.outputs.push_back(path("report.json"));
        write_text(path("manifest.json"), manifest_json(cfg).dump(2) + "\n");
        rr.outputs.push_back(path("manifest.json"));
        rr.exit_code = 0;
    } catch (const ValidationError& e) {
        rr.exit_code = 3;
        rr.error = e.what();
        json err{{"error", "validation"}, {"message", rr.error}};
        write_text(path("error.json"), err.dump(2) + "\n");
    } catch (const std::exception& e) {
        rr.exit_code = 2;
        rr.error = e.what();
        json err{{"error", "solver"}, {"message", rr.error}};
        write_text(path("error.json"), err.dump(2) + "\n");
    }
    restore();
    return rr;
}

int print_report(const std::string& report_path) {
    std::ifstream in(report_path);
    if (!in) {
        std::fprintf(stderr, "report: cannot open %s\n", report_path.c_str());
        return 3;
    }
    json rep;
    try {
        in >> rep;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "report: invalid JSON: %s\n", e.what());
        return 3;
    }
    std::printf("report: %s\n", rep.value("name", std::string("?")).c_str());
    if (rep.count("residuals")) {
        for (auto it = rep["residuals"].begin(); it != rep["residuals"].end(); ++it)
            std::printf("  %-22s %.3e\n", it.key().c_str(), it.value().get<double>());
    }
    if (rep.count("nu_total_variation"))
        std::printf("  %-22s %.6g\n", "nu_total_variation", rep["nu_total_variation"].get<double>());
    if (rep.count("iterations"))
        std::printf("  picard sweeps: %d\n", rep["iterations"]["sweeps"].get<int>());
    if (rep.count("penalty_ladder")) {
        const auto& lad = rep["penalty_ladder"];
        std::printf("  penalty ladder:\n");
        for (size_t i = 0; i < lad["levels"].size(); ++i)
            std::printf("    n=%-8g gap=%.3e\n", lad["levels"][i].get<double>(),
                        lad["sup_gap_to_lcp"][i].get<double>());
    }
    if (rep.count("certificates")) {
        for (const auto& c : rep["certificates"])
            std::printf("  %-18s value=%.6g stderr=%.2e band=%.2e %s\n",
                        c["method"].get<std::string>().c_str(), c["value"].get<double>(),
                        c["stderr"].get<double>(), c["band"].get<double>(),
                        c["pass"].get<bool>() ? "PASS" : "FAIL");
    }
    if (rep.count("pass"))
        std::printf("overall: %s\n", rep["pass"].get<bool>() ? "PASS" : "FAIL");
    return 0;
}

} // namespace obk
