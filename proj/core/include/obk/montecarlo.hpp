#ifndef OBK_MONTECARLO_HPP
#define OBK_MONTECARLO_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "obk/barriers.hpp"
#include "obk/forms.hpp"
#include "obk/grid.hpp"
#include "obk/measures.hpp"
#include "obk/switching.hpp"

namespace obk {

/// Killed-diffusion paths sampled at substep resolution (substeps samples per
/// grid step). Positions are stored in single precision; exit is absorbing and
/// decided with a Brownian-bridge boundary-crossing correction between
/// samples. Generation is deterministic given (seed, n_paths) and independent
/// of the worker count: every path has its own counter-seeded substream.
struct PathBundle {
    Grid grid;
    double x0 = 0.0;
    int n_paths = 0;
    std::uint64_t seed = 0;
    int substeps = 1;
    std::vector<float> pos;               // n_paths x (n_fine+1), row-major
    std::vector<std::int32_t> exit_fine;  // first fine index dead; n_fine+1 if alive throughout

    int n_fine() const { return grid.n_t * substeps; }
    /// fine-resolution accessors (q in 0..n_fine)
    bool alive_fine(int p, int q) const { return exit_fine[static_cast<size_t>(p)] > q; }
    double xf(int p, int q) const {
        return pos[static_cast<size_t>(p) * (n_fine() + 1) + static_cast<size_t>(q)];
    }
    /// grid-time accessors (k in 0..n_t)
    bool alive(int p, int k) const { return alive_fine(p, k * substeps); }
    double x(int p, int k) const { return xf(p, k * substeps); }
};

PathBundle simulate_paths(const FormCoefficients& coeffs, const Grid& grid, double x0,
                          int n_paths, std::uint64_t seed, int substeps = 1,
                          double roughness_bound = 1e6);

struct OracleEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    long n_paths = 0;
    std::string method;
};

/// Constant-coefficient one-barrier problem in the oracle regime.
struct TreeProblem {
    double a = 1.0, b = 0.0;          // space-time constant coefficients
    Grid grid;                        // supplies the domain and horizon
    std::function<double(double)> phi;
    std::function<double(double, double)> f;   // f(t,x), independent of y; may be empty
    MeasureData mu;                   // ac + time atoms only
    const Barrier* lower = nullptr;   // nullptr => unconstrained
    double x0 = 0.0;
};

/// Trinomial-tree backward induction V = max(h, continuation + dt f + atoms)
/// with Dirichlet killing; the independent brute-force reference for
/// one-barrier values.
OracleEstimate snell_oracle(const TreeProblem& problem, int depth);

struct RbsdeOptions {
    double skorokhod_jump_size_floor = 0.0;  // unused knob kept for config parity
};

struct RbsdeResult {
    OracleEstimate y0;
    double skorokhod_left = 0.0;     // empirical residual paired with left barrier values
    double skorokhod_right = 0.0;    // same masses paired with right-continuous values
    double skorokhod_stderr = 0.0;
};

/// Least-squares backward induction on the nodal hat-function basis with
/// clamping at the barriers; K increments are the clamp amounts. With one
/// reflecting barrier the induction carries pathwise values and uses the fit
/// only for the stopping decision, which keeps per-step regression noise out
/// of the estimate.
RbsdeResult rbsde_backward(const PathBundle& paths, const Slice& phi, const Reaction& f,
                           const MeasureData& mu, const Barrier& lower, const Barrier& upper,
                           const DiscreteForm& form);

/// Penalized variant: the clamp is replaced by the reaction n(Y - h)^- inside
/// the same regression recursion. Pathwise values are nondecreasing in n from
/// below. `y_start` receives the per-path values at t = 0 when non-null.
RbsdeResult rbsde_penalized(const PathBundle& paths, const Slice& phi, const Reaction& f,
                            const MeasureData& mu, const Barrier& lower, double n,
                            const DiscreteForm& form, std::vector<double>* y_start = nullptr);

/// Per-path realized strategy: returns the mode trajectory decisions for one
/// spatial path (used by evaluate_strategy; the default rule is
/// extract_strategy on a solved system).
using StrategyRule = std::function<Strategy(std::span<const double> path, int alive_steps,
                                            int start_mode)>;

/// Forward payoff estimate J(z, S, j): rate integrals by the rectangle rule
/// (half credit on the exit step), measure functionals restricted to
/// ac + time atoms, switching costs charged strictly before horizon/exit,
/// terminal reward only when alive at the horizon.
OracleEstimate evaluate_strategy(const PathBundle& paths, const SwitchingProblem& problem,
                                 const StrategyRule& rule, int start_mode);

/// Paired difference estimate J(rule_a) - J(rule_b) on common paths.
OracleEstimate evaluate_strategy_difference(const PathBundle& paths,
                                            const SwitchingProblem& problem,
                                            const StrategyRule& rule_a,
                                            const StrategyRule& rule_b, int start_mode);

/// Deterministic pairwise sum (schedule-independent reductions).
double pairwise_sum(std::span<const double> values);

/// Worker cap honoring OBSTACLE_KIT_THREADS; at least 1.
int worker_count();

} // namespace obk

#endif
