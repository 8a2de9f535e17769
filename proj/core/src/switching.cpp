#include "obk/switching.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "obk/tridiag.hpp"

namespace obk {

void SwitchingProblem::validate(const Grid& grid) const {
    const int N = n_modes();
    if (N < 1) throw ValidationError("switching: no modes");
    if (static_cast<int>(adjacency.size()) != N)
        throw ValidationError("switching: adjacency size mismatch");
    for (int j = 0; j < N; ++j) {
        if (static_cast<int>(modes[static_cast<size_t>(j)].phi.size()) != grid.n_nodes())
            throw ValidationError("switching: terminal slice size mismatch");
        for (int i : adjacency[static_cast<size_t>(j)])
            if (i < 0 || i >= N || i == j)
                throw ValidationError("switching: invalid adjacency entry");
    }
    bool any_edge = false;
    for (const auto& a : adjacency) any_edge = any_edge || !a.empty();
    if (any_edge && !cost) throw ValidationError("switching: cost function not set");
    if (any_edge && !(cost_floor > 0.0))
        throw ValidationError("switching: cost_floor must be > 0");
}

namespace {

double coupling_value(const SwitchingProblem& p, int j, const Grid& grid, int k, int i,
                      const std::vector<const SpaceTimeField*>& u, bool left) {
    double best = -std::numeric_limits<double>::infinity();
    const double t = grid.time(k);
    const double x = grid.node(i);
    for (int m : p.adjacency[static_cast<size_t>(j)]) {
        const double ui = left ? u[static_cast<size_t>(m)]->left_at(k)[static_cast<size_t>(i)]
                               : u[static_cast<size_t>(m)]->at(k, i);
        best = std::max(best, -p.cost(j, m, t, x) + ui);
    }
    return best;
}

/// Tabulated barrier H^j(., u_prev); the jump set is the union of the
/// component fields' recorded left slices.
Barrier coupling_barrier(const SwitchingProblem& p, int j, const Grid& grid,
                         const std::vector<const SpaceTimeField*>& u) {
    if (p.adjacency[static_cast<size_t>(j)].empty())
        return Barrier::none(-std::numeric_limits<double>::infinity());
    std::set<int> jump_set;
    for (int m : p.adjacency[static_cast<size_t>(j)])
        for (const auto& [k, sl] : u[static_cast<size_t>(m)]->left) jump_set.insert(k);

    std::vector<Slice> vals(static_cast<size_t>(grid.n_t + 1),
                            Slice(static_cast<size_t>(grid.n_nodes()), 0.0));
    for (int k = 0; k <= grid.n_t; ++k)
        for (int i = 0; i < grid.n_nodes(); ++i)
            vals[static_cast<size_t>(k)][static_cast<size_t>(i)] =
                coupling_value(p, j, grid, k, i, u, false);
    std::vector<int> jumps;
    std::map<int, Slice> left;
    for (int k : jump_set) {
        Slice sl(static_cast<size_t>(grid.n_nodes()), 0.0);
        for (int i = 0; i < grid.n_nodes(); ++i)
            sl[static_cast<size_t>(i)] = coupling_value(p, j, grid, k, i, u, true);
        jumps.push_back(k);
        left[k] = std::move(sl);
    }
    return Barrier::from_table(std::move(vals), std::move(jumps), std::move(left), grid);
}

Reaction frozen_reaction(const SwitchingProblem& p, int j, const Grid& grid,
                         std::vector<SpaceTimeField> u_prev_copy) {
    const auto& mode = p.modes[static_cast<size_t>(j)];
    if (!mode.f) return Reaction{};
    Reaction r;
    r.lambda = mode.f_lambda;
    if (!p.f_depends_on_y) {
        auto f = mode.f;
        r.f = [f](double t, double x, double) {
            return f(t, x, std::span<const double>{});
        };
        return r;
    }
    auto f = mode.f;
    const int N = p.n_modes();
    r.f = [f, j, N, grid, u = std::move(u_prev_copy)](double t, double x, double y) {
        const int k = grid.nearest_time(t);
        const int i = grid.nearest_node(x);
        std::vector<double> vec(static_cast<size_t>(N));
        for (int m = 0; m < N; ++m) vec[static_cast<size_t>(m)] = u[static_cast<size_t>(m)].at(k, i);
        vec[static_cast<size_t>(j)] = y;
        return f(t, x, vec);
    };
    return r;
}

MeasureData positive_part(const MeasureData& mu) {
    MeasureData out;
    if (mu.ac) {
        auto d = mu.ac;
        out.ac = [d](double t, double x) { return std::max(d(t, x), 0.0); };
    }
    for (const auto& ta : mu.time_atoms) {
        auto g = ta.g;
        out.time_atoms.push_back({ta.t0, [g](double x) { return std::max(g(x), 0.0); }});
    }
    for (const auto& sa : mu.space_atoms) {
        auto q = sa.q;
        out.space_atoms.push_back({sa.x0, [q](double t) { return std::max(q(t), 0.0); }});
    }
    for (const auto& pa : mu.point_atoms)
        if (pa.mass > 0.0) out.point_atoms.push_back(pa);
    return out;
}

} // namespace

SwitchingBounds build_bounds(const SwitchingProblem& problem, const DiscreteForm& form,
                             const SolverOptions& opt) {
    const Grid& grid = form.grid;
    problem.validate(grid);
    if (problem.f_depends_on_y)
        throw ValidationError("build_bounds: y-coupled reactions need user-supplied bounds");

    const int N = problem.n_modes();
    SwitchingBounds b;
    for (int j = 0; j < N; ++j) {
        Reaction r = frozen_reaction(problem, j, grid, {});
        b.under.push_back(
            solve_pde(problem.modes[static_cast<size_t>(j)].phi, r, problem.modes[static_cast<size_t>(j)].mu,
                      form, opt).u);
    }

    Slice phi_max = problem.modes[0].phi;
    for (int j = 1; j < N; ++j)
        for (size_t i = 0; i < phi_max.size(); ++i)
            phi_max[i] = std::max(phi_max[i], problem.modes[static_cast<size_t>(j)].phi[i]);
    Reaction f_max;
    {
        std::vector<std::function<double(double, double, std::span<const double>)>> fs;
        for (const auto& m : problem.modes) fs.push_back(m.f);
        f_max.f = [fs](double t, double x, double) {
            double v = 0.0;
            bool first = true;
            for (const auto& g : fs) {
                const double w = g ? g(t, x, std::span<const double>{}) : 0.0;
                v = first ? w : std::max(v, w);
                first = false;
            }
            return v;
        };
    }
    MeasureData mu_sum;
    {
        std::vector<MeasureData> parts;
        for (const auto& m : problem.modes) parts.push_back(positive_part(m.mu));
        std::vector<std::function<double(double, double)>> acs;
        for (auto& pp : parts) {
            if (pp.ac) acs.push_back(pp.ac);
            for (auto& a : pp.time_atoms) mu_sum.time_atoms.push_back(a);
            for (auto& a : pp.space_atoms) mu_sum.space_atoms.push_back(a);
            for (auto& a : pp.point_atoms) mu_sum.point_atoms.push_back(a);
        }
        if (!acs.empty())
            mu_sum.ac = [acs](double t, double x) {
                double s = 0.0;
                for (const auto& a : acs) s += a(t, x);
                return s;
            };
    }
    b.over = solve_pde(phi_max, f_max, mu_sum, form, opt).u;

    // Contract: under <= over and H(., over) <= over.
    std::vector<const SpaceTimeField*> over_vec(static_cast<size_t>(N), &b.over);
    for (int j = 0; j < N; ++j)
        for (int k = 0; k <= grid.n_t; ++k)
            for (int i = 1; i <= grid.n_x; ++i) {
                if (b.under[static_cast<size_t>(j)].at(k, i) > b.over.at(k, i) + 1e-9)
                    throw BoundsInverted("build_bounds: subsolution exceeds supersolution");
                if (!problem.adjacency[static_cast<size_t>(j)].empty() &&
                    coupling_value(problem, j, grid, k, i, over_vec, false) > b.over.at(k, i) + 1e-9)
                    throw BoundsInverted("build_bounds: H(., over) exceeds the supersolution");
            }
    return b;
}

SwitchingSolution solve_switching_picard(const SwitchingProblem& problem,
                                         const DiscreteForm& form, double tol, int max_iters,
                                         const SolverOptions& opt,
                                         const SwitchingBounds* user_bounds) {
    const Grid& grid = form.grid;
    problem.validate(grid);
    const int N = problem.n_modes();

    SwitchingBounds bounds = user_bounds ? *user_bounds : build_bounds(problem, form, opt);
    if (user_bounds) {
        std::vector<const SpaceTimeField*> over_vec(static_cast<size_t>(N), &bounds.over);
        for (int j = 0; j < N; ++j)
            if (!problem.adjacency[static_cast<size_t>(j)].empty())
                for (int k = 0; k <= grid.n_t; ++k)
                    for (int i = 1; i <= grid.n_x; ++i)
                        if (coupling_value(problem, j, grid, k, i, over_vec, false) >
                            bounds.over.at(k, i) + 1e-9)
                            throw BoundsInverted("user bounds: H(., over) exceeds over");
    }

    SwitchingSolution sol;
    sol.u = bounds.under;
    sol.bounds_under = bounds.under;
    sol.bounds_over.assign(static_cast<size_t>(N), bounds.over);
    sol.nu.assign(static_cast<size_t>(N), ReactionMeasure{});

    for (int sweep = 1; sweep <= max_iters; ++sweep) {
        std::vector<const SpaceTimeField*> u_prev;
        for (const auto& f : sol.u) u_prev.push_back(&f);

        std::vector<SpaceTimeField> u_new(static_cast<size_t>(N));
        std::vector<ReactionMeasure> nu_new(static_cast<size_t>(N));
        for (int j = 0; j < N; ++j) {
            Barrier Hj = coupling_barrier(problem, j, grid, u_prev);
            Reaction rj = frozen_reaction(problem, j, grid, sol.u);
            ObstacleSolution oj = solve_one_barrier(problem.modes[static_cast<size_t>(j)].phi, rj,
                                                    problem.modes[static_cast<size_t>(j)].mu, Hj,
                                                    form, opt);
            u_new[static_cast<size_t>(j)] = std::move(oj.u);
            nu_new[static_cast<size_t>(j)] = std::move(oj.nu);
        }
        double change = 0.0;
        for (int j = 0; j < N; ++j)
            change = std::max(change, sup_abs_diff(u_new[static_cast<size_t>(j)], sol.u[static_cast<size_t>(j)]));
        sol.u = std::move(u_new);
        sol.nu = std::move(nu_new);
        sol.log.sweeps = sweep;
        sol.log.sup_change.push_back(change);
        if (change <= tol) return sol;
    }
    throw NoConvergence("solve_switching_picard: no fixed point within max_iters");
}

namespace {

/// One implicit semilinear step (M + dt A_k) u = rhs + dt M g(., u) solved by
/// damped Newton; g supplies value and derivative per interior node.
void solve_semilinear_step(const DiscreteForm& form, int k, const std::vector<double>& rhs,
                           const std::function<double(int, double)>& g,
                           const std::function<double(int, double)>& gprime,
                           std::vector<double>& u, double tol) {
    const Tridiag& A = form.at(k);
    const int n = A.size();
    const double dt = form.grid.dt();
    auto mass = [&](int r) { return form.mass[static_cast<size_t>(r + 1)]; };

    auto residual = [&](const std::vector<double>& w, int r) {
        double v = (mass(r) + dt * A.diag[r]) * w[static_cast<size_t>(r)];
        if (r > 0) v += dt * A.lower[r] * w[static_cast<size_t>(r - 1)];
        if (r < n - 1) v += dt * A.upper[r] * w[static_cast<size_t>(r + 1)];
        return v - rhs[static_cast<size_t>(r)] - dt * mass(r) * g(r, w[static_cast<size_t>(r)]);
    };
    auto norm = [&](const std::vector<double>& w) {
        double m = 0.0;
        for (int r = 0; r < n; ++r) m = std::max(m, std::abs(residual(w, r)));
        return m;
    };

    double nrm = norm(u);
    std::vector<double> d(static_cast<size_t>(n));
    for (int it = 0; it < 80 && nrm > tol; ++it) {
        Tridiag J(n);
        for (int r = 0; r < n; ++r) {
            J.diag[r] = mass(r) + dt * A.diag[r] - dt * mass(r) * gprime(r, u[static_cast<size_t>(r)]);
            if (r > 0) J.lower[r] = dt * A.lower[r];
            if (r < n - 1) J.upper[r] = dt * A.upper[r];
            d[static_cast<size_t>(r)] = -residual(u, r);
        }
        solve_tridiag(J, d);
        bool ok = false;
        std::vector<double> trial(static_cast<size_t>(n));
        for (double alpha = 1.0; alpha >= 1.0 / 64.0 - 1e-12; alpha *= 0.5) {
            for (int r = 0; r < n; ++r)
                trial[static_cast<size_t>(r)] = u[static_cast<size_t>(r)] + alpha * d[static_cast<size_t>(r)];
            const double tn = norm(trial);
            if (tn < nrm) {
                u = trial;
                nrm = tn;
                ok = true;
                break;
            }
        }
        if (!ok) throw NewtonDivergence("switching penalized step: damping exhausted");
    }
    if (nrm > tol) throw NewtonDivergence("switching penalized step: no convergence");
}

} // namespace

std::vector<SpaceTimeField> solve_switching_penalized(const SwitchingProblem& problem,
                                                      const DiscreteForm& form, double n,
                                                      const SolverOptions& opt,
                                                      const SwitchingBounds* user_bounds) {
    const Grid& grid = form.grid;
    problem.validate(grid);
    const int N = problem.n_modes();
    const int nx = grid.n_x;
    const int nn = grid.n_nodes();
    (void)user_bounds;

    std::vector<DiscreteLoad> loads;
    for (const auto& m : problem.modes) loads.push_back(discretize(m.mu, grid));

    std::vector<SpaceTimeField> u(static_cast<size_t>(N));
    for (int j = 0; j < N; ++j) {
        u[static_cast<size_t>(j)].slices.assign(static_cast<size_t>(grid.n_t + 1),
                                                Slice(static_cast<size_t>(nn), 0.0));
        u[static_cast<size_t>(j)].slices.back() = problem.modes[static_cast<size_t>(j)].phi;
    }

    // Current step values per mode (interior), coupled through the penalty.
    std::vector<std::vector<double>> cur(static_cast<size_t>(N), std::vector<double>(static_cast<size_t>(nx)));

    for (int k = grid.n_t - 1; k >= 0; --k) {
        const double t = grid.time(k);
        std::vector<std::vector<double>> rhs(static_cast<size_t>(N), std::vector<double>(static_cast<size_t>(nx)));
        for (int j = 0; j < N; ++j) {
            Slice next = u[static_cast<size_t>(j)].slices[static_cast<size_t>(k + 1)];
            auto it = loads[static_cast<size_t>(j)].atoms.find(k + 1);
            if (it != loads[static_cast<size_t>(j)].atoms.end()) {
                for (int i = 0; i < nn; ++i)
                    next[static_cast<size_t>(i)] += it->second[static_cast<size_t>(i)] / form.mass[static_cast<size_t>(i)];
                u[static_cast<size_t>(j)].left[k + 1] = next;
            }
            for (int i = 1; i <= nx; ++i)
                rhs[static_cast<size_t>(j)][static_cast<size_t>(i - 1)] =
                    form.mass[static_cast<size_t>(i)] * next[static_cast<size_t>(i)] +
                    loads[static_cast<size_t>(j)].step[static_cast<size_t>(k)][static_cast<size_t>(i)];
            for (int i = 1; i <= nx; ++i)
                cur[static_cast<size_t>(j)][static_cast<size_t>(i - 1)] = next[static_cast<size_t>(i)];
        }

        // Gauss-Seidel over modes within the implicit step.
        for (int gs = 0;; ++gs) {
            double change = 0.0;
            for (int j = 0; j < N; ++j) {
                std::vector<double> Hj(static_cast<size_t>(nx), -std::numeric_limits<double>::infinity());
                if (!problem.adjacency[static_cast<size_t>(j)].empty())
                    for (int i = 0; i < nx; ++i) {
                        double best = -std::numeric_limits<double>::infinity();
                        for (int m : problem.adjacency[static_cast<size_t>(j)])
                            best = std::max(best, -problem.cost(j, m, t, grid.node(i + 1)) +
                                                      cur[static_cast<size_t>(m)][static_cast<size_t>(i)]);
                        Hj[static_cast<size_t>(i)] = best;
                    }
                const auto& mode = problem.modes[static_cast<size_t>(j)];
                auto g = [&](int r, double y) {
                    double v = 0.0;
                    if (mode.f) {
                        if (problem.f_depends_on_y) {
                            std::vector<double> vec(static_cast<size_t>(N));
                            for (int m = 0; m < N; ++m) vec[static_cast<size_t>(m)] = cur[static_cast<size_t>(m)][static_cast<size_t>(r)];
                            vec[static_cast<size_t>(j)] = y;
                            v = mode.f(t, grid.node(r + 1), vec);
                        } else {
                            v = mode.f(t, grid.node(r + 1), std::span<const double>{});
                        }
                    }
                    const double hb = Hj[static_cast<size_t>(r)];
                    if (std::isfinite(hb)) v += n * std::max(hb - y, 0.0);
                    return v;
                };
                auto gp = [&](int r, double y) {
                    double d = 0.0;
                    if (mode.f && problem.f_depends_on_y) {
                        const double h = 1e-7 * (1.0 + std::abs(y));
                        d = (g(r, y + h) - n * std::max(Hj[static_cast<size_t>(r)] - (y + h), 0.0) -
                             (g(r, y - h) - n * std::max(Hj[static_cast<size_t>(r)] - (y - h), 0.0))) /
                            (2.0 * h);
                    }
                    const double hb = Hj[static_cast<size_t>(r)];
                    if (std::isfinite(hb) && y < hb) d -= n;
                    return d;
                };
                std::vector<double> w = cur[static_cast<size_t>(j)];
                solve_semilinear_step(form, k, rhs[static_cast<size_t>(j)], g, gp, w, opt.step_tol);
                for (int r = 0; r < nx; ++r)
                    change = std::max(change, std::abs(w[static_cast<size_t>(r)] - cur[static_cast<size_t>(j)][static_cast<size_t>(r)]));
                cur[static_cast<size_t>(j)] = std::move(w);
            }
            if (change <= opt.step_tol) break;
            if (gs > 500)
                throw NoConvergence("solve_switching_penalized: mode Gauss-Seidel stalled");
        }
        for (int j = 0; j < N; ++j) {
            Slice& sl = u[static_cast<size_t>(j)].slices[static_cast<size_t>(k)];
            for (int i = 1; i <= nx; ++i) sl[static_cast<size_t>(i)] = cur[static_cast<size_t>(j)][static_cast<size_t>(i - 1)];
        }
    }
    return u;
}

std::vector<std::vector<uint8_t>> stopping_regions(const SwitchingSolution& sol,
                                                   const SwitchingProblem& problem,
                                                   const Grid& grid, double eps_switch) {
    const int N = problem.n_modes();
    std::vector<const SpaceTimeField*> u;
    for (const auto& f : sol.u) u.push_back(&f);
    std::vector<std::vector<uint8_t>> region(static_cast<size_t>(N));
    for (int j = 0; j < N; ++j) {
        auto& mask = region[static_cast<size_t>(j)];
        mask.assign(static_cast<size_t>((grid.n_t + 1) * grid.n_nodes()), 0);
        if (problem.adjacency[static_cast<size_t>(j)].empty()) continue;
        for (int k = 0; k <= grid.n_t; ++k)
            for (int i = 1; i <= grid.n_x; ++i) {
                const double H = coupling_value(problem, j, grid, k, i, u, false);
                if (sol.u[static_cast<size_t>(j)].at(k, i) <= H + eps_switch)
                    mask[static_cast<size_t>(k * grid.n_nodes() + i)] = 1;
            }
    }
    return region;
}

namespace {

double interp_field(const SpaceTimeField& f, const Grid& grid, int k, double x) {
    const double s = (x - grid.x_min) / grid.dx();
    int i = static_cast<int>(std::floor(s));
    i = std::max(0, std::min(grid.n_nodes() - 2, i));
    const double w = s - i;
    return (1.0 - w) * f.at(k, i) + w * f.at(k, i + 1);
}

} // namespace

Strategy extract_strategy(const SwitchingSolution& sol, const SwitchingProblem& problem,
                          const Grid& grid, int start_mode, std::span<const double> path,
                          int alive_steps, double eps_switch) {
    Strategy st;
    st.start_mode = start_mode;
    int mode = start_mode;
    const int n_k = std::min(static_cast<int>(path.size()) - 1, alive_steps);
    for (int k = 0; k < n_k && k < grid.n_t; ++k) {
        if (problem.adjacency[static_cast<size_t>(mode)].empty()) continue;
        const double x = path[static_cast<size_t>(k)];
        const double t = grid.time(k);
        double H = -std::numeric_limits<double>::infinity();
        for (int m : problem.adjacency[static_cast<size_t>(mode)])
            H = std::max(H, -problem.cost(mode, m, t, x) +
                                interp_field(sol.u[static_cast<size_t>(m)], grid, k, x));
        const double uj = interp_field(sol.u[static_cast<size_t>(mode)], grid, k, x);
        if (uj <= H + eps_switch) {
            // maximal achieving index: ascending scan with >= keeps the last
            int next = -1;
            double best = -std::numeric_limits<double>::infinity();
            for (int m : problem.adjacency[static_cast<size_t>(mode)]) {
                const double v = -problem.cost(mode, m, t, x) +
                                 interp_field(sol.u[static_cast<size_t>(m)], grid, k, x);
                if (v >= best) {
                    best = v;
                    next = m;
                }
            }
            st.switches.push_back({k, mode, next});
            mode = next;
        }
    }
    return st;
}

NoLoopReport check_no_loop(const SwitchingProblem& problem, const Grid& grid) {
    NoLoopReport rep;
    const int N = problem.n_modes();
    double min_c = std::numeric_limits<double>::infinity();
    int bad_k = -1, bad_i = -1;
    for (int j = 0; j < N; ++j)
        for (int m : problem.adjacency[static_cast<size_t>(j)])
            for (int k = 0; k <= grid.n_t; ++k)
                for (int i = 1; i <= grid.n_x; ++i) {
                    const double c = problem.cost(j, m, grid.time(k), grid.node(i));
                    if (c < min_c) {
                        min_c = c;
                        bad_k = k;
                        bad_i = i;
                    }
                }
    if (!std::isfinite(min_c)) {   // no edges at all
        rep.ok = true;
        rep.certificate = "no cycles (empty adjacency)";
        return rep;
    }
    if (min_c > 0.0) {
        rep.ok = true;
        rep.certificate = "cost floor";
        return rep;
    }
    // Zero-cost edges exist at (bad_k, bad_i); a cycle among them breaks (A9).
    const double t = grid.time(bad_k), x = grid.node(bad_i);
    std::vector<std::vector<int>> zero_adj(static_cast<size_t>(N));
    for (int j = 0; j < N; ++j)
        for (int m : problem.adjacency[static_cast<size_t>(j)])
            if (problem.cost(j, m, t, x) <= 0.0) zero_adj[static_cast<size_t>(j)].push_back(m);
    std::vector<int> color(static_cast<size_t>(N), 0);
    std::vector<int> stack, cycle;
    std::function<bool(int)> dfs = [&](int v) {
        color[static_cast<size_t>(v)] = 1;
        stack.push_back(v);
        for (int w : zero_adj[static_cast<size_t>(v)]) {
            if (color[static_cast<size_t>(w)] == 1) {
                auto it = std::find(stack.begin(), stack.end(), w);
                cycle.assign(it, stack.end());
                return true;
            }
            if (color[static_cast<size_t>(w)] == 0 && dfs(w)) return true;
        }
        stack.pop_back();
        color[static_cast<size_t>(v)] = 2;
        return false;
    };
    for (int j = 0; j < N; ++j)
        if (color[static_cast<size_t>(j)] == 0 && dfs(j)) {
            std::ostringstream os;
            os << "zero-cost cycle at (k=" << bad_k << ", i=" << bad_i << "):";
            for (int v : cycle) os << " " << v;
            rep.ok = false;
            rep.certificate = os.str();
            return rep;
        }
    rep.ok = true;
    rep.certificate = "no zero-cost cycle at sampled points";
    return rep;
}

} // namespace obk
