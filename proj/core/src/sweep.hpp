#ifndef OBK_SWEEP_HPP
#define OBK_SWEEP_HPP

#include <map>
#include <vector>

#include "obk/barriers.hpp"
#include "obk/forms.hpp"
#include "obk/grid.hpp"
#include "obk/measures.hpp"
#include "obk/pde.hpp"

namespace obk::detail {

/// Penalty reaction n(y - h)^- (lower) or -n(y - h)^+ (upper) added to f.
struct PenaltyTerm {
    double strength = 0.0;
    const Barrier* h = nullptr;
    bool lower = true;
};

struct SweepInput {
    const DiscreteForm* form = nullptr;
    Slice phi;
    const Reaction* reaction = nullptr;     // null => f == 0
    const DiscreteLoad* load = nullptr;     // null => mu == 0
    const Barrier* lower = nullptr;         // null or sentinel => unconstrained below
    const Barrier* upper = nullptr;
    std::vector<PenaltyTerm> penalties;
    SolverOptions opt;
};

/// Backward sweep k = n_t-1..0. At measure-atom and barrier-jump times the
/// left slice is u(t_k-) = clamp(u(t_k) + atom, h1hat(t_k), h2hat(t_k)) and
/// the clamp amounts are the reaction-measure atoms; the continuous step is a
/// bounded LCP solved by primal-dual active set with a projected nonlinear
/// Gauss-Seidel fallback.
struct SweepResult {
    SpaceTimeField u;
    std::vector<Slice> nu_plus, nu_minus;      // n_t x n_nodes, u-jump units
    std::map<int, Slice> atom_plus, atom_minus;
    std::vector<StepDiagnostics> diagnostics;  // per step
};

SweepResult backward_sweep(const SweepInput& in);

} // namespace obk::detail

#endif
