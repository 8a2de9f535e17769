#include "obk/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

namespace obk {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void parallel_for(int n, const std::function<void(int, int)>& body) {
    const int workers = std::min(worker_count(), std::max(1, n));
    if (workers == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(body, lo, hi);
    }
    for (auto& t : pool) t.join();
}

} // namespace

int worker_count() {
    if (const char* env = std::getenv("OBSTACLE_KIT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

double pairwise_sum(std::span<const double> values) {
    const size_t n = values.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

PathBundle simulate_paths(const FormCoefficients& coeffs, const Grid& grid, double x0,
                          int n_paths, std::uint64_t seed, int substeps,
                          double roughness_bound) {
    grid.validate();
    if (!(x0 > grid.x_min) || !(x0 < grid.x_max))
        throw ValidationError("simulate_paths: start point outside the open interval");
    if (n_paths < 1) throw ValidationError("simulate_paths: n_paths < 1");
    if (substeps < 1) substeps = 1;

    const double dxs = grid.dx();
    auto aprime = [&](double t, double x) {
        return (coeffs.a(t, x + dxs) - coeffs.a(t, x - dxs)) / (2.0 * dxs);
    };
    // roughness gate on the centered-difference derivative
    double max_ap = 0.0;
    for (int k = 0; k <= grid.n_t; ++k)
        for (int i = 1; i <= grid.n_x; ++i)
            max_ap = std::max(max_ap, std::abs(aprime(grid.time(k), grid.node(i))));
    if (max_ap > roughness_bound) {
        std::ostringstream os;
        os << "simulate_paths: |a'| estimate " << max_ap << " exceeds bound " << roughness_bound;
        throw CoefficientRoughness(os.str());
    }

    PathBundle b;
    b.grid = grid;
    b.x0 = x0;
    b.n_paths = n_paths;
    b.seed = seed;
    b.substeps = substeps;
    const int nf = b.n_fine();
    b.pos.assign(static_cast<size_t>(n_paths) * (nf + 1), 0.0f);
    b.exit_fine.assign(static_cast<size_t>(n_paths), nf + 1);

    const double h = grid.dt() / substeps;
    const double sqrt_h = std::sqrt(h);

    parallel_for(n_paths, [&](int lo, int hi) {
        for (int p = lo; p < hi; ++p) {
            std::mt19937_64 rng(splitmix64(seed ^ (0xA7C15ULL + static_cast<std::uint64_t>(p) * 0x9E3779B97F4A7C15ULL)));
            std::normal_distribution<double> normal(0.0, 1.0);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            double x = x0;
            bool alive = true;
            b.pos[static_cast<size_t>(p) * (nf + 1)] = static_cast<float>(x0);
            for (int q = 0; q < nf; ++q) {
                if (alive) {
                    const double t = q * h;
                    const double a = coeffs.a(t, x);
                    const double sig2 = 2.0 * a;
                    // drift of the process generated by the assembled form
                    const double drift = aprime(t, x) - coeffs.b(t, x);
                    const double xn = x + drift * h + std::sqrt(sig2) * sqrt_h * normal(rng);
                    const double u = unif(rng);
                    if (xn <= grid.x_min || xn >= grid.x_max) {
                        alive = false;
                        x = std::min(std::max(xn, grid.x_min), grid.x_max);
                    } else {
                        // Brownian-bridge crossing probability between samples
                        const double pu = std::exp(-2.0 * (grid.x_max - x) * (grid.x_max - xn) / (sig2 * h));
                        const double pl = std::exp(-2.0 * (x - grid.x_min) * (xn - grid.x_min) / (sig2 * h));
                        if (u < pu + pl)
                            alive = false;
                        x = xn;
                    }
                    if (!alive) b.exit_fine[static_cast<size_t>(p)] = q + 1;
                }
                b.pos[static_cast<size_t>(p) * (nf + 1) + q + 1] = static_cast<float>(x);
            }
        }
    });
    return b;
}

namespace {

double barrier_interp(const Barrier& h, const Grid& grid, int k, double x, bool left) {
    if (h.is_sentinel()) return h.sentinel();
    const double s = (x - grid.x_min) / grid.dx();
    int i = static_cast<int>(std::floor(s));
    i = std::max(0, std::min(grid.n_nodes() - 2, i));
    const double w = s - i;
    const double a = left ? h.left_value(k, i) : h.value(k, i);
    const double b = left ? h.left_value(k, i + 1) : h.value(k, i + 1);
    return (1.0 - w) * a + w * b;
}

} // namespace

OracleEstimate snell_oracle(const TreeProblem& problem, int depth) {
    const Grid& grid = problem.grid;
    grid.validate();
    if (!problem.mu.space_atoms.empty() || !problem.mu.point_atoms.empty())
        throw RegimeViolation("snell_oracle: only ac + time-atom measures in the oracle regime");
    if (depth < grid.n_t) throw RegimeViolation("snell_oracle: depth below the grid step count");
    if (depth % grid.n_t != 0)
        throw RegimeViolation("snell_oracle: depth must be a multiple of n_t so grid times align");
    if (!(problem.a > 0.0)) throw RegimeViolation("snell_oracle: need a > 0");

    const double L = grid.x_max - grid.x_min;
    const double T = grid.horizon;
    const double delta = T / depth;
    const double sig2 = 2.0 * problem.a;
    const double drift = -problem.b;   // constant a has a' == 0

    // Spatial spacing: land on both boundaries and on x0.
    const double h_target = std::sqrt(1.5 * sig2 * delta);
    const int m0 = std::max(2, static_cast<int>(std::lround(L / h_target)));
    int m = -1;
    for (int d = 0; d <= m0 + 8; ++d) {
        for (int cand : {m0 - d, m0 + d}) {
            if (cand < 2) continue;
            const double hs = L / cand;
            const double idx = (problem.x0 - grid.x_min) / hs;
            if (std::abs(idx - std::lround(idx)) < 1e-9) {
                m = cand;
                break;
            }
        }
        if (m > 0) break;
    }
    if (m < 0) throw RegimeViolation("snell_oracle: start point not representable on the lattice");
    const double hs = L / m;
    const double lam = sig2 * delta / (hs * hs);
    const double pu = 0.5 * lam + drift * delta / (2.0 * hs);
    const double pd = 0.5 * lam - drift * delta / (2.0 * hs);
    const double ps = 1.0 - pu - pd;
    if (pu < 0.0 || pd < 0.0 || ps < 0.0)
        throw RegimeViolation("snell_oracle: invalid branch probabilities (drift too strong)");

    auto xat = [&](int j) { return grid.x_min + j * hs; };
    const int j0 = static_cast<int>(std::lround((problem.x0 - grid.x_min) / hs));

    // Time atoms must sit on tree times.
    std::map<int, const MeasureData::TimeAtom*> atoms;   // tree index q -> atom
    for (const auto& ta : problem.mu.time_atoms) {
        const double q = ta.t0 / delta;
        if (std::abs(q - std::lround(q)) > 1e-9)
            throw RegimeViolation("snell_oracle: time atom not aligned with the tree");
        atoms[static_cast<int>(std::lround(q))] = &ta;
    }

    const bool barrier = problem.lower && !problem.lower->is_sentinel();
    const int per = depth / grid.n_t;   // tree steps per grid step

    std::vector<double> V(static_cast<size_t>(m + 1), 0.0);
    for (int j = 1; j < m; ++j) V[static_cast<size_t>(j)] = problem.phi(xat(j));

    for (int q = depth; q >= 1; --q) {
        // resolve atoms / barrier clamp at tree time q*delta
        const bool grid_time = (q % per) == 0;
        const int gk = q / per;
        auto ait = atoms.find(q);
        if (ait != atoms.end())
            for (int j = 1; j < m; ++j) V[static_cast<size_t>(j)] += ait->second->g(xat(j));
        if (barrier && grid_time && (gk == grid.n_t || problem.lower->is_jump_time(gk) || ait != atoms.end()))
            for (int j = 1; j < m; ++j)
                V[static_cast<size_t>(j)] =
                    std::max(V[static_cast<size_t>(j)], barrier_interp(*problem.lower, grid, gk, xat(j), true));

        // step to tree time (q-1)*delta
        const double t = (q - 1) * delta;
        const int k_floor = std::min(static_cast<int>(std::floor(t / grid.dt() + 1e-12)), grid.n_t - 1);
        std::vector<double> W(static_cast<size_t>(m + 1), 0.0);
        for (int j = 1; j < m; ++j) {
            double cont = pu * V[static_cast<size_t>(j + 1)] + ps * V[static_cast<size_t>(j)] +
                          pd * V[static_cast<size_t>(j - 1)];
            if (problem.f) cont += delta * problem.f(t, xat(j));
            if (problem.mu.ac) cont += delta * problem.mu.ac(t + 0.5 * delta, xat(j));
            if (barrier)
                cont = std::max(cont, barrier_interp(*problem.lower, grid, k_floor, xat(j), false));
            W[static_cast<size_t>(j)] = cont;
        }
        V = std::move(W);
    }

    OracleEstimate est;
    est.value = V[static_cast<size_t>(j0)];
    est.stderr_ = 0.0;
    est.n_paths = 0;
    est.method = "tree";
    return est;
}

namespace {

/// Least-squares fit on the nodal hat basis over alive paths; returns nodal
/// coefficients with constant extension into thinly covered cells.
std::vector<double> hat_fit(const PathBundle& paths, int q, const std::vector<double>& targets,
                            const Grid& grid) {
    const int nn = grid.n_nodes();
    const int np = paths.n_paths;
    std::vector<double> diag(static_cast<size_t>(nn), 0.0), off(static_cast<size_t>(nn), 0.0),
        rhsv(static_cast<size_t>(nn), 0.0);
    std::vector<int> coverage(static_cast<size_t>(nn), 0);
    for (int p = 0; p < np; ++p) {
        if (!paths.alive_fine(p, q)) continue;
        const double x = paths.xf(p, q);
        const double s = (x - grid.x_min) / grid.dx();
        int i = static_cast<int>(std::floor(s));
        i = std::max(0, std::min(nn - 2, i));
        const double w = s - i;
        const double b0 = 1.0 - w, b1 = w;
        diag[static_cast<size_t>(i)] += b0 * b0;
        diag[static_cast<size_t>(i + 1)] += b1 * b1;
        off[static_cast<size_t>(i)] += b0 * b1;
        rhsv[static_cast<size_t>(i)] += b0 * targets[static_cast<size_t>(p)];
        rhsv[static_cast<size_t>(i + 1)] += b1 * targets[static_cast<size_t>(p)];
        ++coverage[static_cast<size_t>(i)];
        ++coverage[static_cast<size_t>(i + 1)];
    }
    double scale = 0.0;
    for (int i = 0; i < nn; ++i) scale = std::max(scale, diag[static_cast<size_t>(i)]);
    if (scale == 0.0) throw RegressionSingular("rbsde_backward: no alive paths");
    // thinly covered basis functions are dropped: a handful of paths in a
    // cell make the local normal-equation block arbitrarily ill posed
    Tridiag G(nn);
    auto active = [&](int i) {
        return coverage[static_cast<size_t>(i)] >= 8 && diag[static_cast<size_t>(i)] > 0.0;
    };
    bool any_active = false;
    for (int i = 0; i < nn; ++i) any_active = any_active || active(i);
    if (!any_active) throw RegressionSingular("rbsde_backward: rank-deficient basis");
    for (int i = 0; i < nn; ++i) {
        if (!active(i)) {
            G.diag[i] = 1.0;
            rhsv[static_cast<size_t>(i)] = 0.0;
        } else {
            G.diag[i] = diag[static_cast<size_t>(i)];
            if (i > 0 && active(i - 1)) G.lower[i] = off[static_cast<size_t>(i - 1)];
            if (i < nn - 1 && active(i + 1)) G.upper[i] = off[static_cast<size_t>(i)];
        }
    }
    std::vector<double> coef = rhsv;
    {
        // pivot check through the Thomas recursion, relative per column
        double piv = G.diag[0];
        std::vector<double> cband(static_cast<size_t>(nn), 0.0);
        for (int i = 0;; ++i) {
            if (piv <= 1e-10 * G.diag[i])
                throw RegressionSingular("rbsde_backward: rank-deficient basis");
            if (i == nn - 1) break;
            cband[static_cast<size_t>(i)] = G.upper[i] / piv;
            piv = G.diag[i + 1] - G.lower[i + 1] * cband[static_cast<size_t>(i)];
        }
    }
    solve_tridiag(G, coef);
    // the fit of bounded targets stays inside their range
    double t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo;
    for (int p = 0; p < np; ++p) {
        if (!paths.alive_fine(p, q)) continue;
        t_lo = std::min(t_lo, targets[static_cast<size_t>(p)]);
        t_hi = std::max(t_hi, targets[static_cast<size_t>(p)]);
    }
    for (int i = 0; i < nn; ++i)
        if (active(i))
            coef[static_cast<size_t>(i)] = std::min(std::max(coef[static_cast<size_t>(i)], t_lo), t_hi);
    // constant extension into thin cells
    int last = -1;
    for (int i = 0; i < nn; ++i) {
        if (active(i)) {
            if (last >= 0 && last < i - 1)
                for (int j = last + 1; j < i; ++j)
                    coef[static_cast<size_t>(j)] =
                        (j - last <= i - j) ? coef[static_cast<size_t>(last)] : coef[static_cast<size_t>(i)];
            else if (last < 0)
                for (int j = 0; j < i; ++j) coef[static_cast<size_t>(j)] = coef[static_cast<size_t>(i)];
            last = i;
        }
    }
    for (int j = last + 1; j < nn; ++j) coef[static_cast<size_t>(j)] = coef[static_cast<size_t>(last)];
    return coef;
}

double hat_eval(const std::vector<double>& coef, const Grid& grid, double x) {
    const double s = (x - grid.x_min) / grid.dx();
    int i = static_cast<int>(std::floor(s));
    i = std::max(0, std::min(grid.n_nodes() - 2, i));
    const double w = s - i;
    return (1.0 - w) * coef[static_cast<size_t>(i)] + w * coef[static_cast<size_t>(i + 1)];
}

RbsdeResult rbsde_lower_ls(const PathBundle& paths, const Slice& phi, const Reaction& f,
                           const MeasureData& mu, const Barrier& lower, const Grid& grid) {
    const int nt = grid.n_t;
    const int nn = grid.n_nodes();
    const int np = paths.n_paths;
    const int sub = paths.substeps;
    const int nf = paths.n_fine();
    const double dtf = grid.dt() / sub;

    std::map<int, const MeasureData::TimeAtom*> atoms;
    for (const auto& ta : mu.time_atoms) atoms[std::max(1, grid.nearest_time(ta.t0))] = &ta;

    auto phi_at = [&](double x) {
        const double s = (x - grid.x_min) / grid.dx();
        int i = static_cast<int>(std::floor(s));
        i = std::max(0, std::min(nn - 2, i));
        const double w = s - i;
        return (1.0 - w) * phi[static_cast<size_t>(i)] + w * phi[static_cast<size_t>(i + 1)];
    };

    // V carries each path's realized value from the current time onward under
    // the stopping rule decided so far
    std::vector<double> V(static_cast<size_t>(np), 0.0);
    for (int p = 0; p < np; ++p)
        if (paths.alive_fine(p, nf)) V[static_cast<size_t>(p)] = phi_at(paths.xf(p, nf));

    double sk_right = 0.0;
    std::vector<double> sk_path(static_cast<size_t>(np), 0.0);
    std::vector<double> targets(static_cast<size_t>(np));

    for (int q = nf; q >= 1; --q) {
        // pathwise lift at grid times: atoms of the measure, barrier jumps,
        // and the terminal clamp, all against the left-limit barrier values
        if (q % sub == 0) {
            const int kg = q / sub;
            auto ait = atoms.find(kg);
            const bool clamp_here = lower.is_jump_time(kg) || kg == nt || ait != atoms.end();
            if (clamp_here) {
                for (int p = 0; p < np; ++p) {
                    if (!paths.alive_fine(p, q)) continue;
                    const double x = paths.xf(p, q);
                    if (ait != atoms.end()) V[static_cast<size_t>(p)] += ait->second->g(x);
                    const double lo = barrier_interp(lower, grid, kg, x, true);
                    if (V[static_cast<size_t>(p)] < lo) {
                        const double dK = lo - V[static_cast<size_t>(p)];
                        V[static_cast<size_t>(p)] = lo;
                        sk_right += (lo - barrier_interp(lower, grid, kg, x, false)) * dK;
                    }
                }
            }
        }
        // stopping decision at the interior fine time: the fitted continuation
        // only steers the rule, the carried value stays pathwise
        if (q < nf) {
            const int k_floor = q / sub;
            const int k_right = (q % sub == 0) ? q / sub : q / sub;   // right-continuous value
            (void)k_right;
            for (int p = 0; p < np; ++p)
                targets[static_cast<size_t>(p)] =
                    paths.alive_fine(p, q) ? V[static_cast<size_t>(p)] : 0.0;
            std::vector<double> coef = hat_fit(paths, q, targets, grid);
            for (int p = 0; p < np; ++p) {
                if (!paths.alive_fine(p, q)) continue;
                const double x = paths.xf(p, q);
                const double stop_value = barrier_interp(lower, grid, k_floor, x, false);
                if (stop_value >= hat_eval(coef, grid, x)) V[static_cast<size_t>(p)] = stop_value;
            }
        }
        // accumulate the running payoff across (t_{q-1}, t_q]
        const double t = (q - 1) * dtf;
        for (int p = 0; p < np; ++p) {
            if (!paths.alive_fine(p, q - 1)) continue;
            const double x = paths.xf(p, q - 1);
            const double dt_eff = paths.alive_fine(p, q) ? dtf : 0.5 * dtf;
            if (!paths.alive_fine(p, q)) V[static_cast<size_t>(p)] = 0.0;
            double add = dt_eff * f(t, x, V[static_cast<size_t>(p)]);
            if (mu.ac) add += dt_eff * mu.ac(t + 0.5 * dtf, x);
            V[static_cast<size_t>(p)] += add;
        }
    }

    const double mean_raw = pairwise_sum(V) / np;
    double ss = 0.0;
    for (double v : V) ss += (v - mean_raw) * (v - mean_raw);
    RbsdeResult out;
    out.y0.value = std::max(mean_raw, barrier_interp(lower, grid, 0, paths.x0, false));
    out.y0.stderr_ = std::sqrt(ss / std::max(1, np - 1)) / std::sqrt(static_cast<double>(np));
    out.y0.n_paths = np;
    out.y0.method = "regression";
    out.skorokhod_left = 0.0;
    out.skorokhod_stderr = 0.0;
    out.skorokhod_right = sk_right / np;
    return out;
}

} // namespace

RbsdeResult rbsde_backward(const PathBundle& paths, const Slice& phi, const Reaction& f,
                           const MeasureData& mu, const Barrier& lower, const Barrier& upper,
                           const DiscreteForm& form) {
    const Grid& grid = paths.grid;
    const int nt = grid.n_t;
    const int nn = grid.n_nodes();
    const int np = paths.n_paths;
    const int sub = paths.substeps;
    const int nf = paths.n_fine();
    const double dtf = grid.dt() / sub;   // induction runs at the path resolution
    if (!mu.space_atoms.empty() || !mu.point_atoms.empty())
        throw RegimeViolation("rbsde_backward: only ac + time-atom measures along paths");
    (void)form;

    // One reflecting barrier: carried-cashflow induction. The fit only decides
    // where to stop, so per-step regression noise enters the estimate at
    // second order; the clamped-regression recursion below (used for two-sided
    // data) would accumulate it linearly in the fit count.
    if (!lower.is_sentinel() && upper.is_sentinel())
        return rbsde_lower_ls(paths, phi, f, mu, lower, grid);

    // grid-time atoms (jump of the backward value)
    std::map<int, const MeasureData::TimeAtom*> atoms;
    for (const auto& ta : mu.time_atoms) {
        const int k = grid.nearest_time(ta.t0);
        atoms[std::max(1, k)] = &ta;
    }

    auto phi_at = [&](double x) {
        const double s = (x - grid.x_min) / grid.dx();
        int i = static_cast<int>(std::floor(s));
        i = std::max(0, std::min(nn - 2, i));
        const double w = s - i;
        return (1.0 - w) * phi[static_cast<size_t>(i)] + w * phi[static_cast<size_t>(i + 1)];
    };

    std::vector<double> Y(static_cast<size_t>(np), 0.0);
    for (int p = 0; p < np; ++p)
        if (paths.alive_fine(p, nf)) Y[static_cast<size_t>(p)] = phi_at(paths.xf(p, nf));

    double sk_left = 0.0, sk_right = 0.0;
    std::vector<double> sk_path(static_cast<size_t>(np), 0.0);   // left-value residual per path

    const bool lo_act = !lower.is_sentinel();
    const bool up_act = !upper.is_sentinel();

    std::vector<double> coef(static_cast<size_t>(nn));
    std::vector<double> targets(static_cast<size_t>(np));

    double y0_mean = 0.0, y0_sd = 0.0;

    for (int q = nf - 1; q >= 0; --q) {
        // --- resolve atoms and barrier jumps at grid times on path values ---
        const int qp = q + 1;
        if (qp % sub == 0) {
            const int kp = qp / sub;
            auto ait = atoms.find(kp);
            const bool clamp_here =
                (lo_act && (lower.is_jump_time(kp) || kp == nt || ait != atoms.end())) ||
                (up_act && (upper.is_jump_time(kp) || kp == nt || ait != atoms.end()));
            if (ait != atoms.end() || clamp_here) {
                for (int p = 0; p < np; ++p) {
                    if (!paths.alive_fine(p, qp)) continue;
                    const double x = paths.xf(p, qp);
                    if (ait != atoms.end()) Y[static_cast<size_t>(p)] += ait->second->g(x);
                    if (clamp_here) {
                        const double lo = lo_act ? barrier_interp(lower, grid, kp, x, true)
                                                 : -std::numeric_limits<double>::infinity();
                        const double hi = up_act ? barrier_interp(upper, grid, kp, x, true)
                                                 : std::numeric_limits<double>::infinity();
                        const double y = Y[static_cast<size_t>(p)];
                        if (y < lo) {
                            const double dK = lo - y;
                            Y[static_cast<size_t>(p)] = lo;
                            // left pairing is exactly zero by construction; the
                            // right pairing uses the right-continuous value
                            sk_path[static_cast<size_t>(p)] += 0.0 * dK;
                            sk_left += 0.0;
                            sk_right += (lo - barrier_interp(lower, grid, kp, x, false)) * dK;
                        } else if (y > hi) {
                            Y[static_cast<size_t>(p)] = hi;
                        }
                    }
                }
            }
        }

        // --- regression step over paths alive at fine time q ---
        const int k_floor = q / sub;   // barrier valid on (t_k, t_{k+1}]
        const double t = q * dtf;
        for (int p = 0; p < np; ++p) {
            if (!paths.alive_fine(p, q)) {
                targets[static_cast<size_t>(p)] = 0.0;
                continue;
            }
            const double x = paths.xf(p, q);
            const double dt_eff = paths.alive_fine(p, q + 1) ? dtf : 0.5 * dtf;
            double target = paths.alive_fine(p, q + 1) ? Y[static_cast<size_t>(p)] : 0.0;
            target += dt_eff * f(t, x, target);
            if (mu.ac) target += dt_eff * mu.ac(t + 0.5 * dtf, x);
            targets[static_cast<size_t>(p)] = target;
        }

        if (q == 0) {
            // all paths share the start point; the regression is the mean
            std::vector<double> tv;
            tv.reserve(static_cast<size_t>(np));
            for (int p = 0; p < np; ++p) tv.push_back(targets[static_cast<size_t>(p)]);
            const double mean = pairwise_sum(tv) / np;
            double ss = 0.0;
            for (double v : tv) ss += (v - mean) * (v - mean);
            y0_mean = mean;
            y0_sd = std::sqrt(ss / std::max(1, np - 1)) / std::sqrt(static_cast<double>(np));
            const double lo = lo_act ? barrier_interp(lower, grid, 0, paths.x0, false)
                                     : -std::numeric_limits<double>::infinity();
            const double hi = up_act ? barrier_interp(upper, grid, 0, paths.x0, false)
                                     : std::numeric_limits<double>::infinity();
            y0_mean = std::min(std::max(y0_mean, lo), hi);
            break;
        }

        coef = hat_fit(paths, q, targets, grid);

        for (int p = 0; p < np; ++p) {
            if (!paths.alive_fine(p, q)) {
                Y[static_cast<size_t>(p)] = 0.0;
                continue;
            }
            const double x = paths.xf(p, q);
            double y = hat_eval(coef, grid, x);
            const double lo = lo_act ? barrier_interp(lower, grid, k_floor, x, false)
                                     : -std::numeric_limits<double>::infinity();
            const double hi = up_act ? barrier_interp(upper, grid, k_floor, x, false)
                                     : std::numeric_limits<double>::infinity();
            y = std::min(std::max(y, lo), hi);
            Y[static_cast<size_t>(p)] = y;
        }
    }

    RbsdeResult out;
    out.y0.value = y0_mean;
    out.y0.stderr_ = y0_sd;
    out.y0.n_paths = np;
    out.y0.method = "regression";
    out.skorokhod_left = sk_left / np;
    out.skorokhod_right = sk_right / np;
    double ss = 0.0;
    const double mean_sk = out.skorokhod_left;
    for (double v : sk_path) ss += (v - mean_sk) * (v - mean_sk);
    out.skorokhod_stderr = std::sqrt(ss / std::max(1, np - 1)) / std::sqrt(static_cast<double>(np));
    return out;
}

RbsdeResult rbsde_penalized(const PathBundle& paths, const Slice& phi, const Reaction& f,
                            const MeasureData& mu, const Barrier& lower, double n,
                            const DiscreteForm& form, std::vector<double>* y_start) {
    const Grid& grid = paths.grid;
    const int nn = grid.n_nodes();
    const int np = paths.n_paths;
    const int sub = paths.substeps;
    const int nf = paths.n_fine();
    const double dtf = grid.dt() / sub;
    if (!mu.space_atoms.empty() || !mu.point_atoms.empty())
        throw RegimeViolation("rbsde_penalized: only ac + time-atom measures along paths");
    (void)form;

    std::map<int, const MeasureData::TimeAtom*> atoms;
    for (const auto& ta : mu.time_atoms) atoms[std::max(1, grid.nearest_time(ta.t0))] = &ta;

    auto phi_at = [&](double x) {
        const double s = (x - grid.x_min) / grid.dx();
        int i = static_cast<int>(std::floor(s));
        i = std::max(0, std::min(nn - 2, i));
        const double w = s - i;
        return (1.0 - w) * phi[static_cast<size_t>(i)] + w * phi[static_cast<size_t>(i + 1)];
    };

    std::vector<double> Y(static_cast<size_t>(np), 0.0), targets(static_cast<size_t>(np));
    for (int p = 0; p < np; ++p)
        if (paths.alive_fine(p, nf)) Y[static_cast<size_t>(p)] = phi_at(paths.xf(p, nf));

    for (int q = nf - 1; q >= 0; --q) {
        if ((q + 1) % sub == 0) {
            auto ait = atoms.find((q + 1) / sub);
            if (ait != atoms.end())
                for (int p = 0; p < np; ++p)
                    if (paths.alive_fine(p, q + 1))
                        Y[static_cast<size_t>(p)] += ait->second->g(paths.xf(p, q + 1));
        }
        const int k_floor = q / sub;
        const double t = q * dtf;
        for (int p = 0; p < np; ++p) {
            if (!paths.alive_fine(p, q)) {
                targets[static_cast<size_t>(p)] = 0.0;
                continue;
            }
            const double x = paths.xf(p, q);
            const double dt_eff = paths.alive_fine(p, q + 1) ? dtf : 0.5 * dtf;
            double target = paths.alive_fine(p, q + 1) ? Y[static_cast<size_t>(p)] : 0.0;
            target += dt_eff * f(t, x, target);
            if (mu.ac) target += dt_eff * mu.ac(t + 0.5 * dtf, x);
            targets[static_cast<size_t>(p)] = target;
        }
        if (q == 0) {
            const double mean = pairwise_sum(targets) / np;
            double ss = 0.0;
            for (double v : targets) ss += (v - mean) * (v - mean);
            RbsdeResult out;
            const double hb = barrier_interp(lower, grid, 0, paths.x0, false);
            out.y0.value = mean + dtf * n * std::max(hb - mean, 0.0);
            out.y0.stderr_ = std::sqrt(ss / std::max(1, np - 1)) / std::sqrt(static_cast<double>(np));
            out.y0.n_paths = np;
            out.y0.method = "regression-penalized";
            if (y_start) *y_start = targets;
            return out;
        }
        std::vector<double> coef = hat_fit(paths, q, targets, grid);
        for (int p = 0; p < np; ++p) {
            if (!paths.alive_fine(p, q)) {
                Y[static_cast<size_t>(p)] = 0.0;
                continue;
            }
            const double x = paths.xf(p, q);
            double y = hat_eval(coef, grid, x);
            const double hb = barrier_interp(lower, grid, k_floor, x, false);
            y += dtf * n * std::max(hb - y, 0.0);
            Y[static_cast<size_t>(p)] = y;
        }
    }
    throw SolverError("rbsde_penalized: unreachable");
}

namespace {

struct PathAccumulator {
    double pay = 0.0;
};

double run_strategy_on_path(const PathBundle& paths, const SwitchingProblem& prob,
                            const Strategy& st, int p) {
    const Grid& grid = paths.grid;
    const double dt = grid.dt();
    double pay = 0.0;
    int mode = st.start_mode;
    size_t next_switch = 0;

    // measure atoms per mode, indexed by grid time
    // (computed lazily per call; modes are few and atoms sparse)
    for (int k = 0; k <= grid.n_t; ++k) {
        if (!paths.alive(p, k)) break;
        // switches decided at t_k, strictly before horizon/exit
        while (next_switch < st.switches.size() && st.switches[next_switch].k == k && k < grid.n_t) {
            const auto& sw = st.switches[next_switch];
            pay -= prob.cost(sw.from, sw.to, grid.time(k), paths.x(p, k));
            mode = sw.to;
            ++next_switch;
        }
        const auto& m = prob.modes[static_cast<size_t>(mode)];
        if (k > 0) {
            for (const auto& ta : m.mu.time_atoms)
                if (grid.nearest_time(ta.t0) == k) pay += ta.g(paths.x(p, k));
        }
        if (k == grid.n_t) {
            pay += [&] {
                const double x = paths.x(p, k);
                const double s = (x - grid.x_min) / grid.dx();
                int i = static_cast<int>(std::floor(s));
                i = std::max(0, std::min(grid.n_nodes() - 2, i));
                const double w = s - i;
                return (1.0 - w) * m.phi[static_cast<size_t>(i)] + w * m.phi[static_cast<size_t>(i + 1)];
            }();
            break;
        }
        const double x = paths.x(p, k);
        const double t = grid.time(k);
        const double dt_eff = paths.alive(p, k + 1) ? dt : 0.5 * dt;
        if (m.f) pay += dt_eff * m.f(t, x, std::span<const double>{});
        if (m.mu.ac) pay += dt_eff * m.mu.ac(t + 0.5 * dt, x);
    }
    return pay;
}

std::vector<double> payoff_per_path(const PathBundle& paths, const SwitchingProblem& prob,
                                    const StrategyRule& rule, int start_mode) {
    const Grid& grid = paths.grid;
    std::vector<double> pays(static_cast<size_t>(paths.n_paths), 0.0);
    parallel_for(paths.n_paths, [&](int lo, int hi) {
        std::vector<double> xs(static_cast<size_t>(grid.n_t + 1));
        for (int p = lo; p < hi; ++p) {
            for (int k = 0; k <= grid.n_t; ++k) xs[static_cast<size_t>(k)] = paths.x(p, k);
            const int alive_steps = std::min<int>((paths.exit_fine[static_cast<size_t>(p)] + paths.substeps - 1) / paths.substeps, grid.n_t + 1);
            Strategy st = rule(xs, alive_steps, start_mode);
            pays[static_cast<size_t>(p)] = run_strategy_on_path(paths, prob, st, p);
        }
    });
    return pays;
}

OracleEstimate summarize(const std::vector<double>& pays) {
    OracleEstimate est;
    est.n_paths = static_cast<long>(pays.size());
    est.method = "forward-MC";
    est.value = pairwise_sum(pays) / static_cast<double>(pays.size());
    double ss = 0.0;
    for (double v : pays) ss += (v - est.value) * (v - est.value);
    est.stderr_ = std::sqrt(ss / std::max<size_t>(1, pays.size() - 1)) /
                  std::sqrt(static_cast<double>(pays.size()));
    return est;
}

} // namespace

OracleEstimate evaluate_strategy(const PathBundle& paths, const SwitchingProblem& problem,
                                 const StrategyRule& rule, int start_mode) {
    if (!problem.modes.empty())
        for (const auto& m : problem.modes)
            if (!m.mu.space_atoms.empty() || !m.mu.point_atoms.empty())
                throw RegimeViolation("evaluate_strategy: only ac + time-atom measures along paths");
    return summarize(payoff_per_path(paths, problem, rule, start_mode));
}

OracleEstimate evaluate_strategy_difference(const PathBundle& paths,
                                            const SwitchingProblem& problem,
                                            const StrategyRule& rule_a,
                                            const StrategyRule& rule_b, int start_mode) {
    auto a = payoff_per_path(paths, problem, rule_a, start_mode);
    auto b = payoff_per_path(paths, problem, rule_b, start_mode);
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    OracleEstimate est = summarize(d);
    est.method = "forward-MC-paired";
    return est;
}

} // namespace obk
