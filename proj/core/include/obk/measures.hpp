#ifndef OBK_MEASURES_HPP
#define OBK_MEASURES_HPP

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "obk/forms.hpp"
#include "obk/grid.hpp"

namespace obk {

/// Signed measure mu on (0,T] x E as a sum of an absolutely continuous
/// density, time atoms (t0, spatial density g), space atoms (x0, time rate q)
/// and point atoms.
struct MeasureData {
    std::function<double(double, double)> ac;     // d(t,x), may be empty
    struct TimeAtom { double t0; std::function<double(double)> g; };
    struct SpaceAtom { double x0; std::function<double(double)> q; };
    struct PointAtom { double t0, x0, mass; };
    std::vector<TimeAtom> time_atoms;
    std::vector<SpaceAtom> space_atoms;
    std::vector<PointAtom> point_atoms;

    bool empty() const {
        return !ac && time_atoms.empty() && space_atoms.empty() && point_atoms.empty();
    }
};

/// Off-grid atom locations are snapped; each snap is reported, not an error.
struct SnapReport {
    std::string what;
    double requested = 0.0;
    double used = 0.0;
    double distance = 0.0;
};

/// Mass-integrated nodal loads: step[k][i] is the mass assigned to node i over
/// ((t_k, t_{k+1}]), atoms[k][i] the mass concentrated exactly at t_k. The
/// nodal jump of a backward solution across an atom is atoms[k][i] / mass_i.
struct DiscreteLoad {
    std::vector<Slice> step;            // n_t entries
    std::map<int, Slice> atoms;         // time index k in 1..n_t
    std::vector<SnapReport> snaps;

    double total_mass() const;
    bool empty() const;

    DiscreteLoad& operator+=(const DiscreteLoad& other);
};

/// Discretize mu: ac by the midpoint rule per space-time cell, space atoms
/// split onto the two neighboring nodes by linear interpolation, time atoms
/// snapped to the nearest grid time. Mass is conserved.
DiscreteLoad discretize(const MeasureData& mu, const Grid& grid);

/// ||mu||_rho = int rho d|mu| over the discretized components; rho == 1 gives
/// the total variation.
double weighted_norm(const MeasureData& mu, const std::function<double(double, double)>& rho,
                     const Grid& grid);

/// Discrete potential R^{0,T}mu: the backward solve of -du/dt - L_t u = mu
/// with zero reaction; atoms of mu at t = T act as terminal data.
SpaceTimeField potential(const MeasureData& mu, const DiscreteForm& form);
SpaceTimeField potential(const DiscreteLoad& load, const DiscreteForm& form);

/// CSV dump (columns: k, i, continuous, atom) for inspection.
void write_load_csv(const DiscreteLoad& load, const Grid& grid, const std::string& path);

} // namespace obk

#endif
