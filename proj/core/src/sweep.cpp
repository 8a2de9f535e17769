#include "sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace obk::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StepContext {
    const DiscreteForm* form;
    const Reaction* reaction;
    const std::vector<PenaltyTerm>* penalties;
    int k;                      // time index of the step (left endpoint)
    double t, dt;
    std::vector<double> rhs;    // interior: M_i u_next + load
    std::vector<double> lo, hi; // interior constraint bounds (+-inf when absent)

    double x(int r) const { return form->grid.node(r + 1); }
    double m(int r) const { return form->mass[static_cast<size_t>(r + 1)]; }

    double f_total(int r, double y) const {
        double v = reaction ? (*reaction)(t, x(r), y) : 0.0;
        for (const auto& p : *penalties) {
            if (p.h->is_sentinel()) continue;
            const double hb = p.h->value(k, r + 1);
            if (p.lower)
                v += p.strength * std::max(hb - y, 0.0);
            else
                v -= p.strength * std::max(y - hb, 0.0);
        }
        return v;
    }

    double f_total_prime(int r, double y) const {
        double d = 0.0;
        if (reaction && !reaction->zero()) {
            const double h = 1e-7 * (1.0 + std::abs(y));
            d = ((*reaction)(t, x(r), y + h) - (*reaction)(t, x(r), y - h)) / (2.0 * h);
        }
        for (const auto& p : *penalties) {
            if (p.h->is_sentinel()) continue;
            const double hb = p.h->value(k, r + 1);
            if (p.lower) {
                if (y < hb) d -= p.strength;
            } else {
                if (y > hb) d -= p.strength;
            }
        }
        return d;
    }

    /// F_r(u) without multiplier terms.
    double residual_row(const std::vector<double>& u, int r) const {
        const Tridiag& A = form->at(k);
        const int n = A.size();
        double v = (m(r) + dt * A.diag[r]) * u[static_cast<size_t>(r)];
        if (r > 0) v += dt * A.lower[r] * u[static_cast<size_t>(r - 1)];
        if (r < n - 1) v += dt * A.upper[r] * u[static_cast<size_t>(r + 1)];
        return v - rhs[static_cast<size_t>(r)] -
               dt * m(r) * f_total(r, u[static_cast<size_t>(r)]);
    }
};

/// Solve F_r(y) = 0 in the single unknown y with neighbors frozen; F is
/// strictly increasing in y under the step-size gate. Newton with a bisection
/// safeguard.
double solve_scalar(const StepContext& ctx, std::vector<double>& u, int r) {
    auto eval = [&](double y) {
        const double saved = u[static_cast<size_t>(r)];
        u[static_cast<size_t>(r)] = y;
        const double v = ctx.residual_row(u, r);
        u[static_cast<size_t>(r)] = saved;
        return v;
    };
    double y = u[static_cast<size_t>(r)];
    double fy = eval(y);
    // bracket
    double step = std::max(1.0, std::abs(y));
    double a = y, b = y, fa = fy, fb = fy;
    for (int it = 0; it < 200 && fa * fb > 0.0; ++it) {
        if (fy > 0.0) {
            a -= step; fa = eval(a);
        } else {
            b += step; fb = eval(b);
        }
        step *= 2.0;
    }
    if (fa * fb > 0.0) throw NewtonDivergence("scalar step solve: no bracket");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        // Newton candidate from the midpoint, kept inside the bracket.
        const double d = ctx.m(r) / ctx.dt; // scale only; bisection carries convergence
        (void)d;
        const double fm = eval(mid);
        if (std::abs(fm) < 1e-15 * (1.0 + std::abs(ctx.rhs[static_cast<size_t>(r)]))) return mid;
        if (fa * fm <= 0.0) {
            b = mid; fb = fm;
        } else {
            a = mid; fa = fm;
        }
        if (b - a < 1e-16 * (1.0 + std::abs(a))) break;
    }
    return 0.5 * (a + b);
}

/// Damped Newton for the reduced system with active rows pinned to their
/// bounds. Returns the infinity-norm residual over inactive rows.
double newton_reduced(const StepContext& ctx, std::vector<double>& u,
                      const std::vector<int8_t>& state, const SolverOptions& opt,
                      StepDiagnostics& diag) {
    const Tridiag& A = ctx.form->at(ctx.k);
    const int n = A.size();
    std::vector<double> F(static_cast<size_t>(n), 0.0);
    std::vector<double> rhs(static_cast<size_t>(n), 0.0);

    for (int i = 0; i < n; ++i)
        if (state[static_cast<size_t>(i)] == 1) u[static_cast<size_t>(i)] = ctx.lo[static_cast<size_t>(i)];
        else if (state[static_cast<size_t>(i)] == 2) u[static_cast<size_t>(i)] = ctx.hi[static_cast<size_t>(i)];

    auto residual_norm = [&]() {
        double nrm = 0.0;
        for (int i = 0; i < n; ++i) {
            if (state[static_cast<size_t>(i)] != 0) { F[static_cast<size_t>(i)] = 0.0; continue; }
            F[static_cast<size_t>(i)] = ctx.residual_row(u, i);
            nrm = std::max(nrm, std::abs(F[static_cast<size_t>(i)]));
        }
        return nrm;
    };

    double nrm = residual_norm();
    for (int it = 0; it < opt.max_newton && nrm > opt.step_tol; ++it) {
        ++diag.newton_iters;
        Tridiag J(n);
        for (int i = 0; i < n; ++i) {
            if (state[static_cast<size_t>(i)] != 0) {
                J.diag[i] = 1.0;
                rhs[static_cast<size_t>(i)] = 0.0;
                continue;
            }
            J.diag[i] = ctx.m(i) + ctx.dt * A.diag[i] -
                        ctx.dt * ctx.m(i) * ctx.f_total_prime(i, u[static_cast<size_t>(i)]);
            if (i > 0 && state[static_cast<size_t>(i - 1)] == 0) J.lower[i] = ctx.dt * A.lower[i];
            if (i < n - 1 && state[static_cast<size_t>(i + 1)] == 0) J.upper[i] = ctx.dt * A.upper[i];
            rhs[static_cast<size_t>(i)] = -F[static_cast<size_t>(i)];
        }
        solve_tridiag(J, rhs);

        // Damping ladder 1, 1/2, ..., 1/64, then per-node bisection sweeps.
        bool accepted = false;
        std::vector<double> trial = u;
        for (double alpha = 1.0; alpha >= 1.0 / 64.0 - 1e-12; alpha *= 0.5) {
            for (int i = 0; i < n; ++i)
                trial[static_cast<size_t>(i)] = u[static_cast<size_t>(i)] + alpha * rhs[static_cast<size_t>(i)];
            double trial_nrm = 0.0;
            for (int i = 0; i < n; ++i) {
                if (state[static_cast<size_t>(i)] != 0) continue;
                trial_nrm = std::max(trial_nrm, std::abs(ctx.residual_row(trial, i)));
            }
            if (trial_nrm < nrm) {
                u = trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // bisection-relaxed fixed point: Gauss-Seidel with scalar solves
            for (int sweep = 0; sweep < 10000; ++sweep) {
                for (int i = 0; i < n; ++i)
                    if (state[static_cast<size_t>(i)] == 0)
                        u[static_cast<size_t>(i)] = solve_scalar(ctx, u, i);
                nrm = residual_norm();
                if (nrm <= opt.step_tol) return nrm;
            }
            throw NewtonDivergence("implicit step: damping ladder and bisection sweeps exhausted");
        }
        nrm = residual_norm();
    }
    if (nrm > opt.step_tol)
        throw NewtonDivergence("implicit step: Newton did not reach step_tol");
    return nrm;
}

/// Projected nonlinear Gauss-Seidel fallback for a stalled active set.
void psor_step(const StepContext& ctx, std::vector<double>& u, std::vector<int8_t>& state,
               const SolverOptions& opt, StepDiagnostics& diag) {
    const int n = ctx.form->at(ctx.k).size();
    diag.psor_fallback = true;
    for (int sweep = 0; sweep < opt.max_psor_sweeps; ++sweep) {
        for (int i = 0; i < n; ++i) {
            double y = solve_scalar(ctx, u, i);
            y = std::min(std::max(y, ctx.lo[static_cast<size_t>(i)]), ctx.hi[static_cast<size_t>(i)]);
            u[static_cast<size_t>(i)] = y;
        }
        double viol = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = ctx.residual_row(u, i);
            const double yi = u[static_cast<size_t>(i)];
            if (yi <= ctx.lo[static_cast<size_t>(i)])
                viol = std::max(viol, std::max(-r, 0.0));
            else if (yi >= ctx.hi[static_cast<size_t>(i)])
                viol = std::max(viol, std::max(r, 0.0));
            else
                viol = std::max(viol, std::abs(r));
        }
        if (viol <= opt.step_tol) {
            for (int i = 0; i < n; ++i) {
                const double r = ctx.residual_row(u, i);
                const double yi = u[static_cast<size_t>(i)];
                if (yi == ctx.lo[static_cast<size_t>(i)] && r > 0.0)
                    state[static_cast<size_t>(i)] = 1;
                else if (yi == ctx.hi[static_cast<size_t>(i)] && r < 0.0)
                    state[static_cast<size_t>(i)] = 2;
                else
                    state[static_cast<size_t>(i)] = 0;
            }
            return;
        }
    }
    throw LcpStall("projected Gauss-Seidel fallback did not converge");
}

} // namespace

SweepResult backward_sweep(const SweepInput& in) {
    const DiscreteForm& form = *in.form;
    const Grid& grid = form.grid;
    const int nn = grid.n_nodes();
    const int nx = grid.n_x;
    const int nt = grid.n_t;
    const double dt = grid.dt();

    const Reaction* reaction = in.reaction;
    if (reaction && reaction->zero() && reaction->lambda == 0.0) reaction = nullptr;
    if (reaction && dt * reaction->lambda >= 1.0) {
        std::ostringstream os;
        os << "dt * lambda_f = " << dt * reaction->lambda
           << " >= 1: monotone-implicit solvability gate violated";
        throw StepSizeViolation(os.str());
    }
    for (const auto& p : in.penalties)
        if (p.strength < 0.0) throw ValidationError("penalty strength must be >= 0");

    const bool lower_active = in.lower && !in.lower->is_sentinel();
    const bool upper_active = in.upper && !in.upper->is_sentinel();

    // Times where a left slice must be resolved: measure atoms, barrier jumps,
    // and the terminal time when a hard barrier may clamp phi.
    std::set<int> resolve;
    if (in.load)
        for (const auto& [k, sl] : in.load->atoms) resolve.insert(k);
    if (lower_active)
        for (int k : in.lower->jump_times()) resolve.insert(k);
    if (upper_active)
        for (int k : in.upper->jump_times()) resolve.insert(k);
    if (lower_active || upper_active) resolve.insert(nt);

    SweepResult res;
    res.u.slices.assign(static_cast<size_t>(nt + 1), Slice(static_cast<size_t>(nn), 0.0));
    res.u.slices[static_cast<size_t>(nt)] = in.phi;
    res.nu_plus.assign(static_cast<size_t>(nt), Slice(static_cast<size_t>(nn), 0.0));
    res.nu_minus.assign(static_cast<size_t>(nt), Slice(static_cast<size_t>(nn), 0.0));
    res.diagnostics.assign(static_cast<size_t>(nt), StepDiagnostics{});

    std::vector<int8_t> state(static_cast<size_t>(nx), 0);
    if (in.opt.init_active_set == SolverOptions::InitActiveSet::all_active)
        std::fill(state.begin(), state.end(), static_cast<int8_t>(lower_active ? 1 : (upper_active ? 2 : 0)));

    StepContext ctx;
    ctx.form = &form;
    ctx.reaction = reaction;
    ctx.penalties = &in.penalties;
    ctx.dt = dt;
    ctx.rhs.assign(static_cast<size_t>(nx), 0.0);
    ctx.lo.assign(static_cast<size_t>(nx), -kInf);
    ctx.hi.assign(static_cast<size_t>(nx), kInf);

    for (int k = nt - 1; k >= 0; --k) {
        // ---- resolve atoms / barrier jumps at t_{k+1} ----
        Slice u_next = res.u.slices[static_cast<size_t>(k + 1)];
        if (resolve.count(k + 1)) {
            const Slice* atom = nullptr;
            if (in.load) {
                auto it = in.load->atoms.find(k + 1);
                if (it != in.load->atoms.end()) atom = &it->second;
            }
            Slice v = u_next;
            if (atom)
                for (int i = 0; i < nn; ++i)
                    v[static_cast<size_t>(i)] += (*atom)[static_cast<size_t>(i)] / form.mass[static_cast<size_t>(i)];
            Slice ap, am;
            for (int i = 1; i <= nx; ++i) {
                const double lo = lower_active ? in.lower->left_value(k + 1, i) : -kInf;
                const double hi = upper_active ? in.upper->left_value(k + 1, i) : kInf;
                const double raw = v[static_cast<size_t>(i)];
                if (raw < lo) {
                    if (ap.empty()) ap.assign(static_cast<size_t>(nn), 0.0);
                    ap[static_cast<size_t>(i)] = lo - raw;
                    v[static_cast<size_t>(i)] = lo;
                } else if (raw > hi) {
                    if (am.empty()) am.assign(static_cast<size_t>(nn), 0.0);
                    am[static_cast<size_t>(i)] = raw - hi;
                    v[static_cast<size_t>(i)] = hi;
                }
            }
            if (!ap.empty()) res.atom_plus[k + 1] = std::move(ap);
            if (!am.empty()) res.atom_minus[k + 1] = std::move(am);
            res.u.left[k + 1] = v;
            u_next = std::move(v);
        }

        // ---- continuous step ----
        ctx.k = k;
        ctx.t = grid.time(k);
        for (int i = 1; i <= nx; ++i) {
            double r = form.mass[static_cast<size_t>(i)] * u_next[static_cast<size_t>(i)];
            if (in.load) r += in.load->step[static_cast<size_t>(k)][static_cast<size_t>(i)];
            ctx.rhs[static_cast<size_t>(i - 1)] = r;
            ctx.lo[static_cast<size_t>(i - 1)] = lower_active ? in.lower->value(k, i) : -kInf;
            ctx.hi[static_cast<size_t>(i - 1)] = upper_active ? in.upper->value(k, i) : kInf;
        }

        StepDiagnostics& diag = res.diagnostics[static_cast<size_t>(k)];
        std::vector<double> u(static_cast<size_t>(nx));
        for (int i = 1; i <= nx; ++i)
            u[static_cast<size_t>(i - 1)] =
                std::min(std::max(u_next[static_cast<size_t>(i)], ctx.lo[static_cast<size_t>(i - 1)]),
                         ctx.hi[static_cast<size_t>(i - 1)]);
        if (in.opt.init_active_set != SolverOptions::InitActiveSet::warm)
            for (int i = 0; i < nx; ++i)
                state[static_cast<size_t>(i)] =
                    in.opt.init_active_set == SolverOptions::InitActiveSet::all_active
                        ? static_cast<int8_t>(lower_active ? 1 : (upper_active ? 2 : 0))
                        : 0;
        if (!lower_active && !upper_active) std::fill(state.begin(), state.end(), 0);

        bool done = false;
        int switches = 0;
        while (!done) {
            diag.residual = newton_reduced(ctx, u, state, in.opt, diag);
            done = true;
            for (int i = 0; i < nx; ++i) {
                const double r = ctx.residual_row(u, i);
                const double yi = u[static_cast<size_t>(i)];
                const double lo = ctx.lo[static_cast<size_t>(i)];
                const double hi = ctx.hi[static_cast<size_t>(i)];
                const double nu_p = state[static_cast<size_t>(i)] == 1 ? r / ctx.m(i) : 0.0;
                const double nu_m = state[static_cast<size_t>(i)] == 2 ? -r / ctx.m(i) : 0.0;
                int8_t next = 0;
                if (lower_active && nu_p - (yi - lo) > 0.0)
                    next = 1;
                else if (upper_active && nu_m - (hi - yi) > 0.0)
                    next = 2;
                if (next != state[static_cast<size_t>(i)]) {
                    state[static_cast<size_t>(i)] = next;
                    done = false;
                    ++switches;
                }
            }
            diag.active_set_switches = switches;
            if (!done && switches > in.opt.max_active_set_switches) {
                psor_step(ctx, u, state, in.opt, diag);
                diag.residual = 0.0;
                done = true;
            }
        }

        Slice& uk = res.u.slices[static_cast<size_t>(k)];
        Slice& np = res.nu_plus[static_cast<size_t>(k)];
        Slice& nm = res.nu_minus[static_cast<size_t>(k)];
        for (int i = 1; i <= nx; ++i) {
            uk[static_cast<size_t>(i)] = u[static_cast<size_t>(i - 1)];
            const double r = ctx.residual_row(u, i - 1);
            if (state[static_cast<size_t>(i - 1)] == 1)
                np[static_cast<size_t>(i)] = std::max(r / ctx.m(i - 1), 0.0);
            else if (state[static_cast<size_t>(i - 1)] == 2)
                nm[static_cast<size_t>(i)] = std::max(-r / ctx.m(i - 1), 0.0);
        }
    }
    return res;
}

} // namespace obk::detail
