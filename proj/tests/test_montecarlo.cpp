#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "golden.hpp"
#include "obk/montecarlo.hpp"
#include "obk/obstacle.hpp"

using namespace obk;
using namespace obktest;

namespace {

struct EnvGuard {
    std::string saved;
    bool had = false;
    explicit EnvGuard(const char* value) {
        if (const char* e = std::getenv("OBSTACLE_KIT_THREADS")) {
            saved = e;
            had = true;
        }
        setenv("OBSTACLE_KIT_THREADS", value, 1);
    }
    ~EnvGuard() {
        if (had)
            setenv("OBSTACLE_KIT_THREADS", saved.c_str(), 1);
        else
            unsetenv("OBSTACLE_KIT_THREADS");
    }
};

} // namespace

TEST_CASE("pairwise_sum matches plain summation") {
    std::vector<double> v;
    for (int i = 0; i < 1000; ++i) v.push_back(std::sin(0.1 * i));
    double plain = 0.0;
    for (double x : v) plain += x;
    CHECK(pairwise_sum(v) == doctest::Approx(plain).epsilon(1e-13));
}

TEST_CASE("Brownian increments: a = 1/2 gives unit-variance steps") {
    Grid g;
    g.x_min = -20.0;
    g.x_max = 20.0;
    g.n_x = 9;
    g.horizon = 0.1;
    g.n_t = 10;
    FormCoefficients c = heat_coeffs(0.5);
    const int n = 100000;
    PathBundle paths = simulate_paths(c, g, 0.0, n, 7);
    double mean = 0.0, var = 0.0;
    for (int p = 0; p < n; ++p) mean += paths.x(p, 1) - paths.x(p, 0);
    mean /= n;
    for (int p = 0; p < n; ++p) {
        const double d = paths.x(p, 1) - paths.x(p, 0) - mean;
        var += d * d;
    }
    var /= (n - 1);
    const double dt = g.dt();
    const double se_var = var * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(var - dt) <= 3.0 * se_var);
    CHECK(std::abs(mean) <= 3.0 * std::sqrt(dt / n));
}

TEST_CASE("drift sign matches the assembled form: b = -1 moves paths right") {
    Grid g;
    g.x_min = -50.0;
    g.x_max = 50.0;
    g.n_x = 9;
    g.horizon = 1.0;
    g.n_t = 20;
    FormCoefficients c;
    c.a = [](double, double) { return 1e-4; };
    c.b = [](double, double) { return -1.0; };
    c.a_floor = 1e-5;
    const int n = 20000;
    PathBundle paths = simulate_paths(c, g, 0.0, n, 11);
    double mean = 0.0;
    for (int p = 0; p < n; ++p) mean += paths.x(p, g.n_t);
    mean /= n;
    CHECK(mean == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("paths are bit-identical for any worker count") {
    Grid g = unit_grid(9, 20, 0.5);
    FormCoefficients c = heat_coeffs();
    PathBundle a, b;
    {
        EnvGuard env("1");
        a = simulate_paths(c, g, 0.5, 5000, 99, 2);
    }
    {
        EnvGuard env("8");
        b = simulate_paths(c, g, 0.5, 5000, 99, 2);
    }
    REQUIRE(a.pos.size() == b.pos.size());
    CHECK(std::memcmp(a.pos.data(), b.pos.data(), a.pos.size() * sizeof(float)) == 0);
    CHECK(a.exit_fine == b.exit_fine);
}

TEST_CASE("forward MC agrees with the grid solve, including nonzero drift") {
    // the generator of the simulated paths must match the assembled bilinear
    // form; a drift-sign mismatch shows up immediately here
    Grid g = unit_grid(41, 50, 0.1);
    FormCoefficients c = heat_coeffs(1.0, 1.5);
    DiscreteForm form = assemble(c, g);
    Slice phi = sample_sin_pi(g);
    PdeSolution pde = solve_pde(phi, Reaction{}, MeasureData{}, form);
    const double grid_value = pde.u.at(0, g.nearest_node(0.5));

    PathBundle paths = simulate_paths(c, g, 0.5, 60000, 2024, 4);
    double sum = 0.0, sq = 0.0;
    for (int p = 0; p < paths.n_paths; ++p) {
        double v = 0.0;
        if (paths.alive(p, g.n_t)) {
            const double x = paths.x(p, g.n_t);
            v = std::sin(M_PI * x);
        }
        sum += v;
        sq += v * v;
    }
    const double mean = sum / paths.n_paths;
    const double sd = std::sqrt((sq / paths.n_paths - mean * mean) / paths.n_paths);
    CHECK(std::abs(mean - grid_value) <= 3.0 * sd + 8e-3);
}

TEST_CASE("alive probability agrees with the tree occupation reference") {
    Grid g = unit_grid(21, 40, 0.1);
    FormCoefficients c = heat_coeffs(0.5);
    PathBundle paths = simulate_paths(c, g, 0.5, 60000, 5, 4);
    double alive = 0.0;
    for (int p = 0; p < paths.n_paths; ++p) alive += paths.alive(p, g.n_t) ? 1.0 : 0.0;
    alive /= paths.n_paths;

    TreeProblem tp;
    tp.a = 0.5;
    tp.b = 0.0;
    tp.grid = g;
    tp.phi = [](double) { return 1.0; };
    tp.x0 = 0.5;
    OracleEstimate tree = snell_oracle(tp, 4000);
    const double se = std::sqrt(alive * (1 - alive) / paths.n_paths);
    CHECK(std::abs(alive - tree.value) <= 3.0 * se + 5e-3);
}

TEST_CASE("tree without stopping reproduces the heat value") {
    Grid g = unit_grid(21, 40, 0.1);
    TreeProblem tp;
    tp.a = 1.0;
    tp.b = 0.0;
    tp.grid = g;
    tp.phi = [](double x) { return std::sin(M_PI * x); };
    tp.x0 = 0.5;
    OracleEstimate v = snell_oracle(tp, 4000);
    CHECK(v.value == doctest::Approx(std::exp(-0.1 * M_PI * M_PI)).epsilon(2e-3));
    CHECK(v.method == "tree");
    CHECK(v.stderr_ == 0.0);
}

TEST_CASE("tree with constant barrier equal to the terminal value stops immediately") {
    Grid g = unit_grid(21, 40, 0.1);
    Barrier h = Barrier::constant(0.37, g);
    TreeProblem tp;
    tp.a = 1.0;
    tp.b = 0.0;
    tp.grid = g;
    tp.phi = [](double) { return 0.37; };
    tp.lower = &h;
    tp.x0 = 0.5;
    OracleEstimate v = snell_oracle(tp, 2000);
    CHECK(v.value == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("tree refinement is Cauchy on P1") {
    P1 p1(101, 200);
    TreeProblem tp;
    tp.a = 1.0;
    tp.b = 0.0;
    tp.grid = p1.grid;
    tp.phi = [](double x) { return std::sin(M_PI * x); };
    tp.lower = &p1.barrier;
    tp.x0 = 0.5;
    const double v1 = snell_oracle(tp, 400).value;
    const double v2 = snell_oracle(tp, 800).value;
    const double v3 = snell_oracle(tp, 1600).value;
    CHECK(std::abs(v3 - v2) <= std::abs(v2 - v1) + 1e-12);
}

TEST_CASE("tree regime violations are rejected") {
    Grid g = unit_grid(9, 10, 0.1);
    TreeProblem tp;
    tp.a = 1.0;
    tp.grid = g;
    tp.phi = [](double) { return 0.0; };
    tp.x0 = 0.5;
    tp.mu.space_atoms.push_back({0.5, [](double) { return 1.0; }});
    CHECK_THROWS_AS(snell_oracle(tp, 1000), RegimeViolation);
    tp.mu.space_atoms.clear();
    CHECK_THROWS_AS(snell_oracle(tp, 1003), RegimeViolation);   // not a multiple of n_t
}

TEST_CASE("rbsde without barriers recovers the tower property") {
    Grid g = unit_grid(21, 25, 0.1);
    FormCoefficients c = heat_coeffs();
    DiscreteForm form = assemble(c, g);
    Slice phi = sample_sin_pi(g);
    PathBundle paths = simulate_paths(c, g, 0.5, 40000, 31, 4);
    Barrier lo = Barrier::none(-std::numeric_limits<double>::infinity());
    Barrier hi = Barrier::none(std::numeric_limits<double>::infinity());
    RbsdeResult rb = rbsde_backward(paths, phi, Reaction{}, MeasureData{}, lo, hi, form);

    double sum = 0.0;
    for (int p = 0; p < paths.n_paths; ++p)
        if (paths.alive(p, g.n_t)) sum += std::sin(M_PI * paths.x(p, g.n_t));
    const double forward = sum / paths.n_paths;
    CHECK(std::abs(rb.y0.value - forward) <= 3.0 * rb.y0.stderr_ + 5e-3);
    CHECK(rb.skorokhod_left == 0.0);
}

TEST_CASE("rbsde on P1 matches the grid one-barrier value") {
    // carried-cashflow induction with stopping decisions at substep resolution
    P1 p1(101, 200);
    PathBundle paths = simulate_paths(heat_coeffs(), p1.grid, 0.5, 20000, 321, 8);
    Barrier hi = Barrier::none(std::numeric_limits<double>::infinity());
    RbsdeResult rb = rbsde_backward(paths, p1.phi, Reaction{}, MeasureData{}, p1.barrier, hi, p1.form);
    ObstacleSolution sol =
        solve_one_barrier(p1.phi, Reaction{}, MeasureData{}, p1.barrier, p1.form);
    const double grid_value = sol.u.at(0, p1.grid.nearest_node(0.5));
    CHECK(std::abs(rb.y0.value - grid_value) <= 3.0 * rb.y0.stderr_ + 1e-2);
}

TEST_CASE("rbsde Skorokhod residual: zero with left values, positive with right values") {
    JumpBarrier jb(51, 50);
    PathBundle paths = simulate_paths(heat_coeffs(), jb.grid, 0.5, 30000, 17, 2);
    Barrier hi = Barrier::none(std::numeric_limits<double>::infinity());
    RbsdeResult rb = rbsde_backward(paths, jb.phi, Reaction{}, MeasureData{}, jb.barrier, hi, jb.form);
    CHECK(std::abs(rb.skorokhod_left) <= 3.0 * rb.skorokhod_stderr + 1e-12);
    CHECK(rb.skorokhod_right > 1e-3);
}

TEST_CASE("rbsde rejects a rank-deficient basis") {
    Grid g = unit_grid(5, 3, 0.3);
    DiscreteForm form = assemble(heat_coeffs(), g);
    PathBundle paths;
    paths.grid = g;
    paths.x0 = 0.37;
    paths.n_paths = 2;
    paths.substeps = 1;
    paths.pos.assign(static_cast<size_t>(2 * (g.n_t + 1)), 0.37f);   // both paths frozen (substeps = 1)
    paths.exit_fine.assign(2, g.n_t + 1);
    Slice phi(static_cast<size_t>(g.n_nodes()), 1.0);
    Barrier lo = Barrier::none(-std::numeric_limits<double>::infinity());
    Barrier hi = Barrier::none(std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(rbsde_backward(paths, phi, Reaction{}, MeasureData{}, lo, hi, form),
                    RegressionSingular);
}

TEST_CASE("roughness gate rejects wild diffusion coefficients") {
    Grid g = unit_grid(21, 10, 0.1);
    FormCoefficients c;
    c.a = [](double, double x) { return 1.0 + 0.999 * std::sin(500.0 * x); };
    c.b = [](double, double) { return 0.0; };
    c.a_floor = 1e-4;
    CHECK_THROWS_AS(simulate_paths(c, g, 0.5, 10, 1, 1, 5.0), CoefficientRoughness);
}

TEST_CASE("penalized rbsde is pathwise nondecreasing in n toward the reflected value") {
    P1 p1(41, 50);
    PathBundle paths = simulate_paths(heat_coeffs(), p1.grid, 0.5, 10000, 55, 2);
    Barrier hi = Barrier::none(std::numeric_limits<double>::infinity());
    RbsdeResult clamped =
        rbsde_backward(paths, p1.phi, Reaction{}, MeasureData{}, p1.barrier, hi, p1.form);
    std::vector<double> prev;
    double prev_y0 = -1e300;
    for (double n : {4.0, 16.0, 64.0, 256.0}) {
        std::vector<double> ys;
        RbsdeResult pen =
            rbsde_penalized(paths, p1.phi, Reaction{}, MeasureData{}, p1.barrier, n, p1.form, &ys);
        if (!prev.empty())
            for (size_t p = 0; p < ys.size(); ++p) CHECK(ys[p] >= prev[p] - 1e-8);
        CHECK(pen.y0.value >= prev_y0 - 1e-10);
        prev_y0 = pen.y0.value;
        prev = std::move(ys);
    }
    // the ladder approaches the reflected estimate from below
    CHECK(prev_y0 <= clamped.y0.value + 3.0 * clamped.y0.stderr_ + 5e-3);
    CHECK(clamped.y0.value - prev_y0 < 0.1);
}
