#ifndef OBK_PDE_HPP
#define OBK_PDE_HPP

#include <functional>
#include <string>
#include <vector>

#include "obk/forms.hpp"
#include "obk/grid.hpp"
#include "obk/measures.hpp"

namespace obk {

/// Semilinear reaction f(t,x,y) with its one-sided monotonicity constant:
/// (f(t,x,y) - f(t,x,y'))(y - y') <= lambda |y - y'|^2.
struct Reaction {
    std::function<double(double, double, double)> f;   // empty => f == 0
    double lambda = 0.0;
    std::optional<double> lipschitz_hint;

    double operator()(double t, double x, double y) const { return f ? f(t, x, y) : 0.0; }
    bool zero() const { return !f; }
};

struct SolverOptions {
    double step_tol = 1e-10;        // infinity-norm residual per implicit step
    int max_newton = 60;
    int max_active_set_switches = 100;
    int max_psor_sweeps = 200000;
    /// Initial active-set guess for the complementarity steps; "warm" carries
    /// the previous step's sets forward.
    enum class InitActiveSet { warm, all_inactive, all_active } init_active_set =
        InitActiveSet::warm;
};

struct StepDiagnostics {
    int newton_iters = 0;
    int active_set_switches = 0;
    bool psor_fallback = false;
    double residual = 0.0;
};

/// Backward solution with right-continuous slices and recorded left limits at
/// atom times. The terminal slice equals phi exactly.
struct PdeSolution {
    SpaceTimeField u;
    std::vector<StepDiagnostics> diagnostics;   // one per step, index k
    bool upwinded = false;
};

/// Backward Euler solve of -du/dt - L_t u = f(.,u) + mu, u(T,.) = phi, with
/// homogeneous Dirichlet boundary. The monotone-implicit gate requires
/// dt * lambda_f < 1.
PdeSolution solve_pde(const Slice& phi, const Reaction& f, const MeasureData& mu,
                      const DiscreteForm& form, const SolverOptions& opt = {});
PdeSolution solve_pde(const Slice& phi, const Reaction& f, const DiscreteLoad& load,
                      const DiscreteForm& form, const SolverOptions& opt = {});

/// Left-limit slice across a time atom: u(t_k-) = u(t_k) + atom.
Slice resolve_time_atoms(const Slice& u_next, const Slice& atom_jump);

struct ComparisonReport {
    double worst_violation = 0.0;     // max over nodes of u1 - u2
    int k = -1, i = -1;
    bool ordered(double tol) const { return worst_violation <= tol; }
};

/// Assert u1 <= u2 nodewise for data known to be ordered; report-valued.
ComparisonReport comparison_check(const PdeSolution& sol1, const PdeSolution& sol2);

} // namespace obk

#endif
