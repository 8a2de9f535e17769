#include <benchmark/benchmark.h>

#include <cmath>

#include "obk/forms.hpp"
#include "obk/montecarlo.hpp"
#include "obk/obstacle.hpp"
#include "obk/pde.hpp"

using namespace obk;

namespace {

Grid make_grid(int n_x, int n_t, double T = 0.1) {
    Grid g;
    g.x_min = 0.0;
    g.x_max = 1.0;
    g.n_x = n_x;
    g.horizon = T;
    g.n_t = n_t;
    return g;
}

FormCoefficients heat() {
    FormCoefficients c;
    c.a = [](double, double) { return 1.0; };
    c.b = [](double, double) { return 0.3; };
    c.a_floor = 0.5;
    return c;
}

Slice sin_pi(const Grid& g) {
    Slice phi(static_cast<size_t>(g.n_nodes()));
    for (int i = 0; i < g.n_nodes(); ++i)
        phi[static_cast<size_t>(i)] = std::sin(M_PI * g.node(i));
    return phi;
}

void BM_Assemble(benchmark::State& state) {
    Grid g = make_grid(static_cast<int>(state.range(0)), 200);
    FormCoefficients c = heat();
    for (auto _ : state) {
        DiscreteForm form = assemble(c, g);
        benchmark::DoNotOptimize(form.stiffness.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Assemble)->RangeMultiplier(2)->Range(64, 1024)->Complexity();

void BM_PdeSolve(benchmark::State& state) {
    Grid g = make_grid(static_cast<int>(state.range(0)), 200);
    DiscreteForm form = assemble(heat(), g);
    Slice phi = sin_pi(g);
    for (auto _ : state) {
        PdeSolution sol = solve_pde(phi, Reaction{}, MeasureData{}, form);
        benchmark::DoNotOptimize(sol.u.slices.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PdeSolve)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_OneBarrierLcp(benchmark::State& state) {
    Grid g = make_grid(static_cast<int>(state.range(0)), 200);
    DiscreteForm form = assemble(heat(), g);
    Slice phi = sin_pi(g);
    Barrier h = Barrier::constant(0.25, g);
    for (auto _ : state) {
        ObstacleSolution sol = solve_one_barrier(phi, Reaction{}, MeasureData{}, h, form);
        benchmark::DoNotOptimize(sol.u.slices.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_OneBarrierLcp)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_SimulatePaths(benchmark::State& state) {
    Grid g = make_grid(101, 100);
    FormCoefficients c = heat();
    for (auto _ : state) {
        PathBundle b = simulate_paths(c, g, 0.5, static_cast<int>(state.range(0)), 42, 4);
        benchmark::DoNotOptimize(b.pos.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulatePaths)->RangeMultiplier(4)->Range(1024, 65536);

} // namespace

BENCHMARK_MAIN();
