#ifndef OBK_FORMS_HPP
#define OBK_FORMS_HPP

#include <functional>
#include <vector>

#include "obk/grid.hpp"
#include "obk/tridiag.hpp"

namespace obk {

/// Time-dependent operator data: diffusion a(t,x) and drift b(t,x) of the
/// bilinear form B(u,v) = int a u'v' + int b u'v on the interval, with a
/// declared lower bound a_floor > 0 for the diffusion.
struct FormCoefficients {
    std::function<double(double, double)> a;
    std::function<double(double, double)> b;
    double a_floor = 1e-12;
};

/// Estimated structure constants of the family {B^(t_k)}: alpha0 is the
/// smallest shift making the symmetric parts PSD, K the sector constant,
/// lambda the time-equivalence constant. Diagnostics, not gates.
struct SectorReport {
    double alpha0 = 0.0;
    double K = 1.0;
    double lambda = 1.0;
};

/// Lumped-mass P1 discretization: diagonal mass over all nodes (dx interior,
/// dx/2 at the Dirichlet boundary) and one interior tridiagonal stiffness
/// matrix per time step, Dirichlet rows eliminated.
struct DiscreteForm {
    Grid grid;
    std::vector<double> mass;           // n_nodes entries
    std::vector<Tridiag> stiffness;     // n_t entries, A_k sampled at t_k
    bool upwinded = false;              // drift upwinding applied (mesh-Peclet gate)

    const Tridiag& at(int k) const { return stiffness[static_cast<size_t>(k)]; }
};

/// Assemble the lumped-mass P1 form. Coefficients are sampled at element
/// midpoints in space and the step's left endpoint t_k in time. Falls back
/// to first-order upwinding of the drift when dx*max|b| > 2*min a, so the
/// step matrices stay M-matrices.
DiscreteForm assemble(const FormCoefficients& coeffs, const Grid& grid);

/// B(u,v) = v^T A_k u over interior vectors.
double form_value(const DiscreteForm& form, int k,
                  const std::vector<double>& u, const std::vector<double>& v);

/// Probe-based estimates of (alpha0, K, lambda): eigenvalue scan for alpha0,
/// 256 randomized probes (plus the full discrete eigenbasis when n_x <= 64)
/// for the sector ratio and the time-equivalence ratio.
SectorReport sector_report(const FormCoefficients& coeffs, const Grid& grid);

} // namespace obk

#endif
