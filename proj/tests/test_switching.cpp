#include <doctest.h>

#include <cmath>

#include "golden.hpp"
#include "obk/montecarlo.hpp"
#include "obk/switching.hpp"
#include "oracles.hpp"

using namespace obk;
using namespace obktest;

namespace {

/// Golden 2-mode instance: f1 = 1, f2 = -1, phi = 0, constant cost 0.1.
SwitchingProblem two_mode(const Grid& g, double cost = 0.1) {
    SwitchingProblem p;
    SwitchingProblem::Mode m1, m2;
    m1.phi.assign(static_cast<size_t>(g.n_nodes()), 0.0);
    m2.phi.assign(static_cast<size_t>(g.n_nodes()), 0.0);
    m1.f = [](double, double, std::span<const double>) { return 1.0; };
    m2.f = [](double, double, std::span<const double>) { return -1.0; };
    p.modes = {m1, m2};
    p.adjacency = {{1}, {0}};
    p.cost = [cost](int, int, double, double) { return cost; };
    p.cost_floor = cost;
    return p;
}

} // namespace

TEST_CASE("single decoupled mode: bounds coincide and Picard returns the PDE solve") {
    Grid g = unit_grid(21, 20, 0.5);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingProblem p;
    SwitchingProblem::Mode m;
    m.phi = sample_sin_pi(g, 0.5);
    m.f = [](double, double, std::span<const double>) { return 0.3; };
    p.modes = {m};
    p.adjacency = {{}};
    p.cost_floor = 1.0;

    SwitchingBounds b = build_bounds(p, form);
    CHECK(sup_abs_diff(b.under[0], b.over) < 1e-12);

    SwitchingSolution sol = solve_switching_picard(p, form);
    Reaction f;
    f.f = [](double, double, double) { return 0.3; };
    PdeSolution pde = solve_pde(m.phi, f, MeasureData{}, form);
    CHECK(sup_abs_diff(sol.u[0], pde.u) < 1e-10);
    CHECK(sol.nu[0].total_variation() == 0.0);
    CHECK(sol.log.sweeps <= 2);
}

TEST_CASE("symmetric two-mode data gives identical value fields") {
    Grid g = unit_grid(21, 20, 0.5);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingProblem p = two_mode(g);
    p.modes[1].f = p.modes[0].f;   // make the modes identical
    SwitchingSolution sol = solve_switching_picard(p, form);
    CHECK(sup_abs_diff(sol.u[0], sol.u[1]) < 1e-12);
    SwitchingBounds b = build_bounds(p, form);
    CHECK(sup_abs_diff(b.under[0], b.under[1]) < 1e-12);
}

TEST_CASE("bounds contract: H(., over) stays below the supersolution") {
    Grid g = unit_grid(21, 20, 1.0);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingProblem p = two_mode(g);
    SwitchingBounds b = build_bounds(p, form);
    for (int k = 0; k <= g.n_t; ++k)
        for (int i = 1; i <= g.n_x; ++i) {
            CHECK(b.under[0].at(k, i) <= b.over.at(k, i) + 1e-9);
            CHECK(b.under[1].at(k, i) <= b.over.at(k, i) + 1e-9);
        }
    // the supersolution solves f == max_j f_j == 1
    Reaction fmax;
    fmax.f = [](double, double, double) { return 1.0; };
    PdeSolution over = solve_pde(Slice(static_cast<size_t>(g.n_nodes()), 0.0), fmax, MeasureData{}, form);
    CHECK(sup_abs_diff(b.over, over.u) < 1e-12);
}

TEST_CASE("Picard iterates are nondecreasing and settle on the fixed point") {
    Grid g = unit_grid(41, 50, 1.0);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingProblem p = two_mode(g);
    SwitchingSolution sol = solve_switching_picard(p, form, 1e-11);
    // per-mode fixed-point residual: re-solving one mode against the final
    // barrier changes nothing
    std::vector<const SpaceTimeField*> uf;
    for (const auto& f : sol.u) uf.push_back(&f);
    for (int j = 0; j < 2; ++j) {
        Reaction fj;
        const double val = j == 0 ? 1.0 : -1.0;
        fj.f = [val](double, double, double) { return val; };
        // rebuild barrier H^j(., u) by hand
        std::vector<Slice> vals(static_cast<size_t>(g.n_t + 1), Slice(static_cast<size_t>(g.n_nodes()), 0.0));
        for (int k = 0; k <= g.n_t; ++k)
            for (int i = 0; i < g.n_nodes(); ++i)
                vals[static_cast<size_t>(k)][static_cast<size_t>(i)] =
                    -0.1 + sol.u[static_cast<size_t>(1 - j)].at(k, i);
        Barrier Hj = Barrier::from_table(vals, {}, {}, g);
        ObstacleSolution re = solve_one_barrier(p.modes[static_cast<size_t>(j)].phi, fj,
                                                MeasureData{}, Hj, form);
        CHECK(sup_abs_diff(re.u, sol.u[static_cast<size_t>(j)]) < 1e-9);
        // per-mode minimality against the mode's own coupling barrier
        MinimalityReport mr = minimality_residual(re, Hj);
        CHECK(mr.precise_lower <= 1e-8 * std::max(mr.nu_l1, 1e-30));
        // feasibility u^j >= H^j(., u)
        for (int k = 0; k <= g.n_t; ++k)
            for (int i = 1; i <= g.n_x; ++i)
                CHECK(sol.u[static_cast<size_t>(j)].at(k, i) >=
                      -0.1 + sol.u[static_cast<size_t>(1 - j)].at(k, i) - 1e-9);
    }
    // iterates nondecreasing: recorded sup changes are one-sided by construction;
    // verify against the bounds
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k <= g.n_t; ++k)
            for (int i = 1; i <= g.n_x; ++i) {
                CHECK(sol.u[static_cast<size_t>(j)].at(k, i) >=
                      sol.bounds_under[static_cast<size_t>(j)].at(k, i) - 1e-10);
                CHECK(sol.u[static_cast<size_t>(j)].at(k, i) <=
                      sol.bounds_over[static_cast<size_t>(j)].at(k, i) + 1e-10);
            }
}

TEST_CASE("two-mode value matches the exhaustive per-step DP oracle") {
    Grid g = unit_grid(41, 50, 1.0);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingProblem p = two_mode(g);
    SwitchingSolution sol = solve_switching_picard(p, form, 1e-11);
    auto dp = dp_switching_oracle(p, form, 1e-12);
    double worst = 0.0;
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k <= g.n_t; ++k)
            for (int i = 0; i < g.n_nodes(); ++i)
                worst = std::max(worst, std::abs(sol.u[static_cast<size_t>(j)].at(k, i) -
                                                 dp[static_cast<size_t>(j)][static_cast<size_t>(k)][static_cast<size_t>(i)]));
    CHECK(worst < 1e-6);
}

TEST_CASE("penalized system increases in n toward the Picard solution") {
    Grid g = unit_grid(31, 40, 1.0);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingProblem p = two_mode(g);
    SwitchingSolution picard = solve_switching_picard(p, form, 1e-11);
    std::vector<SpaceTimeField> prev;
    double gap = 1e300;
    for (double n : {1.0, 4.0, 16.0, 64.0}) {
        auto un = solve_switching_penalized(p, form, n);
        if (!prev.empty())
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k <= g.n_t; ++k)
                    for (int i = 0; i < g.n_nodes(); ++i)
                        CHECK(un[static_cast<size_t>(j)].at(k, i) >=
                              prev[static_cast<size_t>(j)].at(k, i) - 1e-10);
        gap = 0.0;
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k <= g.n_t; ++k)
                for (int i = 0; i < g.n_nodes(); ++i) {
                    CHECK(un[static_cast<size_t>(j)].at(k, i) <=
                          picard.u[static_cast<size_t>(j)].at(k, i) + 1e-9);
                    gap = std::max(gap, picard.u[static_cast<size_t>(j)].at(k, i) -
                                            un[static_cast<size_t>(j)].at(k, i));
                }
        prev = std::move(un);
    }
    CHECK(gap < 0.05);   // O(1/n) envelope at n = 64
}

TEST_CASE("raising a switching cost never raises any value") {
    Grid g = unit_grid(21, 20, 1.0);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingSolution cheap = solve_switching_picard(two_mode(g, 0.1), form);
    SwitchingSolution dear = solve_switching_picard(two_mode(g, 0.2), form);
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k <= g.n_t; ++k)
            for (int i = 0; i < g.n_nodes(); ++i)
                CHECK(dear.u[static_cast<size_t>(j)].at(k, i) <=
                      cheap.u[static_cast<size_t>(j)].at(k, i) + 1e-9);
}

TEST_CASE("no-loop verification") {
    Grid g = unit_grid(9, 6, 1.0);
    SwitchingProblem p = two_mode(g);
    NoLoopReport rep = check_no_loop(p, g);
    CHECK(rep.ok);
    CHECK(rep.certificate == "cost floor");

    // zero-cost 2-cycle at one node
    p.cost = [&g](int, int, double t, double x) {
        return (t == 0.0 && std::abs(x - g.node(3)) < 1e-12) ? 0.0 : 0.1;
    };
    NoLoopReport bad = check_no_loop(p, g);
    CHECK_FALSE(bad.ok);
    CHECK(bad.certificate.find("cycle") != std::string::npos);

    // empty adjacency is vacuously loop-free
    SwitchingProblem lone;
    SwitchingProblem::Mode m;
    m.phi.assign(static_cast<size_t>(g.n_nodes()), 0.0);
    lone.modes = {m};
    lone.adjacency = {{}};
    lone.cost_floor = 1.0;
    CHECK(check_no_loop(lone, g).ok);
}

TEST_CASE("stopping regions and strategy extraction") {
    Grid g = unit_grid(41, 50, 1.0);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingProblem p = two_mode(g);
    SwitchingSolution sol = solve_switching_picard(p, form, 1e-11);
    auto regions = stopping_regions(sol, p, g, 1e-6);

    // mode 2 (f = -1) is dominated: its stopping region covers the early times
    CHECK(regions[1][static_cast<size_t>(0 * g.n_nodes() + g.nearest_node(0.5))] == 1);
    // mode 1 never switches into the dominated mode
    CHECK(regions[0][static_cast<size_t>(0 * g.n_nodes() + g.nearest_node(0.5))] == 0);

    // a path that starts deep inside mode 2's stopping region switches at k=0
    std::vector<double> path(static_cast<size_t>(g.n_t + 1), 0.5);
    Strategy st = extract_strategy(sol, p, g, 1, path, g.n_t + 1, 1e-6);
    REQUIRE(st.switches.size() == 1);
    CHECK(st.switches[0].k == 0);
    CHECK(st.switches[0].from == 1);
    CHECK(st.switches[0].to == 0);

    // started in mode 1 the same path never switches
    Strategy st1 = extract_strategy(sol, p, g, 0, path, g.n_t + 1, 1e-6);
    CHECK(st1.switches.empty());
}

TEST_CASE("ties in the achieving set pick the maximal index") {
    Grid g = unit_grid(21, 20, 1.0);
    DiscreteForm form = assemble(heat_coeffs(), g);
    // three modes: 0 dominated, 1 and 2 identical and attractive
    SwitchingProblem p;
    SwitchingProblem::Mode lo, hi;
    lo.phi.assign(static_cast<size_t>(g.n_nodes()), 0.0);
    hi.phi.assign(static_cast<size_t>(g.n_nodes()), 0.0);
    lo.f = [](double, double, std::span<const double>) { return -1.0; };
    hi.f = [](double, double, std::span<const double>) { return 1.0; };
    p.modes = {lo, hi, hi};
    p.adjacency = {{1, 2}, {0}, {0}};
    p.cost = [](int, int, double, double) { return 0.1; };
    p.cost_floor = 0.1;
    SwitchingSolution sol = solve_switching_picard(p, form, 1e-11);
    CHECK(sup_abs_diff(sol.u[1], sol.u[2]) == 0.0);   // bit-identical by determinism

    std::vector<double> path(static_cast<size_t>(g.n_t + 1), 0.5);
    Strategy st = extract_strategy(sol, p, g, 0, path, g.n_t + 1, 1e-6);
    REQUIRE(!st.switches.empty());
    CHECK(st.switches[0].to == 2);   // maximal achieving index
}

TEST_CASE("strategy payoff certificate on the golden two-mode instance") {
    Grid g = unit_grid(49, 100, 1.0);
    DiscreteForm form = assemble(heat_coeffs(), g);
    SwitchingProblem p = two_mode(g);
    SwitchingSolution sol = solve_switching_picard(p, form, 1e-11);
    PathBundle paths = simulate_paths(heat_coeffs(), g, 0.5, 50000, 404, 4);

    const double eps = 1e-6;
    StrategyRule star = [&](std::span<const double> xs, int alive, int j) {
        return extract_strategy(sol, p, g, j, xs, alive, eps);
    };
    for (int j0 : {0, 1}) {
        OracleEstimate J = evaluate_strategy(paths, p, star, j0);
        const double grid_value = sol.u[static_cast<size_t>(j0)].at(0, g.nearest_node(0.5));
        CHECK(std::abs(J.value - grid_value) <= 3.0 * J.stderr_ + 1e-2);
    }

    // never-switch from mode 0 reduces to the single-mode functional
    StrategyRule never = [](std::span<const double>, int, int j) {
        Strategy st;
        st.start_mode = j;
        return st;
    };
    OracleEstimate J0 = evaluate_strategy(paths, p, never, 0);
    Reaction f1;
    f1.f = [](double, double, double) { return 1.0; };
    PdeSolution single = solve_pde(Slice(static_cast<size_t>(g.n_nodes()), 0.0), f1, MeasureData{}, form);
    CHECK(std::abs(J0.value - single.u.at(0, g.nearest_node(0.5))) <= 3.0 * J0.stderr_ + 1e-2);

    // the optimal rule beats the never-switch rule from the dominated mode
    OracleEstimate diff = evaluate_strategy_difference(paths, p, star, never, 1);
    CHECK(diff.value > 0.0);
}

TEST_CASE("general coupled reactions require user bounds") {
    Grid g = unit_grid(9, 6, 0.5);
    SwitchingProblem p = two_mode(g);
    p.f_depends_on_y = true;
    DiscreteForm form = assemble(heat_coeffs(), g);
    CHECK_THROWS_AS(build_bounds(p, form), ValidationError);
}
