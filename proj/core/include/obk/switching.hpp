#ifndef OBK_SWITCHING_HPP
#define OBK_SWITCHING_HPP

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "obk/grid.hpp"
#include "obk/measures.hpp"
#include "obk/obstacle.hpp"
#include "obk/pde.hpp"

namespace obk {

/// N-mode quasi-variational system data. Mode j carries terminal data phi_j,
/// payoff rate f_j (a function of the full value vector y for coupled
/// systems), measure mu_j, the admissible switch set A_j and switching costs
/// c_{j,i}(t,x) >= cost_floor > 0.
struct SwitchingProblem {
    struct Mode {
        Slice phi;
        std::function<double(double, double, std::span<const double>)> f;  // (t,x,y)
        double f_lambda = 0.0;     // one-sided monotonicity in the own component
        MeasureData mu;
    };
    std::vector<Mode> modes;
    std::vector<std::vector<int>> adjacency;            // A_j, zero-based mode ids
    std::function<double(int, int, double, double)> cost;  // c_{j,i}(t,x)
    double cost_floor = 0.0;
    bool f_depends_on_y = false;   // the general coupled regime

    int n_modes() const { return static_cast<int>(modes.size()); }
    void validate(const Grid& grid) const;
};

struct SwitchingSolution {
    std::vector<SpaceTimeField> u;          // one field per mode
    std::vector<ReactionMeasure> nu;
    std::vector<SpaceTimeField> bounds_under, bounds_over;  // per mode (over shared)
    struct IterationLog { int sweeps = 0; std::vector<double> sup_change; };
    IterationLog log;
};

/// Sub/supersolution bounds for the cost-form regime with y-independent f:
/// under = per-mode unconstrained solves, over = common solve of the pointwise
/// maxima. Checks H(., over) <= over and under <= over.
struct SwitchingBounds {
    std::vector<SpaceTimeField> under;
    SpaceTimeField over;
};
SwitchingBounds build_bounds(const SwitchingProblem& problem, const DiscreteForm& form,
                             const SolverOptions& opt = {});

/// Picard iteration over one-barrier solves: u_0 = under, then per sweep each
/// mode solves its obstacle problem with barrier H^j(., u_prev) and reaction
/// frozen off-diagonal at u_prev. Iterates are nodewise nondecreasing.
SwitchingSolution solve_switching_picard(const SwitchingProblem& problem,
                                         const DiscreteForm& form, double tol = 1e-10,
                                         int max_iters = 200, const SolverOptions& opt = {},
                                         const SwitchingBounds* user_bounds = nullptr);

/// Penalized system: coupled semilinear steps with the term
/// n(u^j - H^j(., u))^-, Gauss-Seidel over modes within each implicit step.
std::vector<SpaceTimeField> solve_switching_penalized(const SwitchingProblem& problem,
                                                      const DiscreteForm& form, double n,
                                                      const SolverOptions& opt = {},
                                                      const SwitchingBounds* user_bounds = nullptr);

/// Realized switching policy along one path, plus optional per-mode stopping
/// region masks on the grid.
struct Strategy {
    struct Switch { int k; int from; int to; };
    int start_mode = 0;
    std::vector<Switch> switches;                 // strictly increasing k
    std::vector<std::vector<uint8_t>> region;     // [mode][k*n_nodes+i], optional
};

/// Mode masks {(k,i): u^j <= H^j(.,u) + eps_switch}.
std::vector<std::vector<uint8_t>> stopping_regions(const SwitchingSolution& sol,
                                                   const SwitchingProblem& problem,
                                                   const Grid& grid, double eps_switch);

/// Walk one spatial trajectory sampled at grid times: switch at the first
/// time the current mode's value touches its coupling barrier; the next mode
/// is the maximal index achieving the max.
Strategy extract_strategy(const SwitchingSolution& sol, const SwitchingProblem& problem,
                          const Grid& grid, int start_mode, std::span<const double> path,
                          int alive_steps, double eps_switch = 1e-6);

struct NoLoopReport {
    bool ok = false;
    std::string certificate;   // "cost floor" or the violating cycle
};

/// (A9) for the cost form: every directed cycle has strictly positive total
/// cost. With c >= cost_floor > 0 this is structural.
NoLoopReport check_no_loop(const SwitchingProblem& problem, const Grid& grid);

} // namespace obk

#endif
