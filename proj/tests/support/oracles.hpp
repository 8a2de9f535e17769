#ifndef OBK_TEST_ORACLES_HPP
#define OBK_TEST_ORACLES_HPP

// Independent reference implementations used only by the test suites. They
// share no solver code with the library: steps are solved by projected
// Gauss-Seidel (PSOR) instead of the primal-dual active set method.

#include <functional>
#include <map>
#include <vector>

#include "obk/barriers.hpp"
#include "obk/forms.hpp"
#include "obk/grid.hpp"
#include "obk/measures.hpp"
#include "obk/switching.hpp"

namespace obktest {

struct PsorSolution {
    std::vector<obk::Slice> slices;          // n_t+1
    std::map<int, obk::Slice> left;
};

/// Backward obstacle solve with rate f(t,x) (no y-dependence), measure load
/// and optional barriers, every step solved by projected SOR to `tol`.
PsorSolution psor_reference_solve(const obk::DiscreteForm& form, const obk::Slice& phi,
                                  const std::function<double(double, double)>& f_tx,
                                  const obk::DiscreteLoad& load, const obk::Barrier* lower,
                                  const obk::Barrier* upper, double tol = 1e-12);

/// Exhaustive grid dynamic programming for the cost-form switching system
/// with y-independent rates: per time step the mode coupling is iterated to a
/// fixed point, each mode step solved by projected SOR against the barrier
/// max_i(-c_{j,i} + V^i) built from the current iterate.
std::vector<std::vector<obk::Slice>> dp_switching_oracle(const obk::SwitchingProblem& problem,
                                                         const obk::DiscreteForm& form,
                                                         double tol = 1e-12);

} // namespace obktest

#endif
