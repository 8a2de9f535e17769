#include "obk/pde.hpp"

#include <cmath>

#include "sweep.hpp"

namespace obk {

PdeSolution solve_pde(const Slice& phi, const Reaction& f, const DiscreteLoad& load,
                      const DiscreteForm& form, const SolverOptions& opt) {
    if (static_cast<int>(phi.size()) != form.grid.n_nodes())
        throw ValidationError("solve_pde: terminal slice size mismatch");
    for (double v : phi)
        if (!std::isfinite(v)) throw NonFinite("solve_pde: non-finite terminal data");

    detail::SweepInput in;
    in.form = &form;
    in.phi = phi;
    in.reaction = &f;
    in.load = &load;
    in.opt = opt;
    detail::SweepResult r = detail::backward_sweep(in);

    PdeSolution sol;
    sol.u = std::move(r.u);
    sol.diagnostics = std::move(r.diagnostics);
    sol.upwinded = form.upwinded;
    return sol;
}

PdeSolution solve_pde(const Slice& phi, const Reaction& f, const MeasureData& mu,
                      const DiscreteForm& form, const SolverOptions& opt) {
    return solve_pde(phi, f, discretize(mu, form.grid), form, opt);
}

Slice resolve_time_atoms(const Slice& u_next, const Slice& atom_jump) {
    Slice out = u_next;
    for (size_t i = 0; i < out.size() && i < atom_jump.size(); ++i) out[i] += atom_jump[i];
    return out;
}

ComparisonReport comparison_check(const PdeSolution& sol1, const PdeSolution& sol2) {
    ComparisonReport rep;
    for (size_t k = 0; k < sol1.u.slices.size(); ++k) {
        const Slice& a = sol1.u.slices[k];
        const Slice& b = sol2.u.slices[k];
        for (size_t i = 0; i < a.size(); ++i) {
            const double v = a[i] - b[i];
            if (v > rep.worst_violation) {
                rep.worst_violation = v;
                rep.k = static_cast<int>(k);
                rep.i = static_cast<int>(i);
            }
        }
    }
    return rep;
}

} // namespace obk
