#ifndef OBK_GRID_HPP
#define OBK_GRID_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "obk/errors.hpp"

namespace obk {

/// Nodal values on one time slice. Index 0 and n_x+1 are the Dirichlet
/// boundary nodes; 1..n_x are interior.
using Slice = std::vector<double>;

/// Uniform space-time grid on [x_min, x_max] x [0, T].
///
/// Nodes are x_i = x_min + i*dx for i = 0..n_x+1, times t_k = k*dt for
/// k = 0..n_t, with t_{n_t} == T exactly.
struct Grid {
    double x_min = 0.0;
    double x_max = 1.0;
    int n_x = 3;        // interior node count
    double horizon = 1.0;
    int n_t = 2;

    double dx() const { return (x_max - x_min) / (n_x + 1); }
    double dt() const { return horizon / n_t; }
    int n_nodes() const { return n_x + 2; }
    double node(int i) const { return x_min + i * dx(); }
    double time(int k) const { return k == n_t ? horizon : k * dt(); }

    bool interior(int i) const { return i >= 1 && i <= n_x; }

    /// Nearest grid time index for t in [0, T]; clamped to [0, n_t].
    int nearest_time(double t) const {
        int k = static_cast<int>(std::lround(t / dt()));
        return k < 0 ? 0 : (k > n_t ? n_t : k);
    }
    /// Nearest node index, clamped to the node range.
    int nearest_node(double x) const {
        int i = static_cast<int>(std::lround((x - x_min) / dx()));
        return i < 0 ? 0 : (i > n_x + 1 ? n_x + 1 : i);
    }

    void validate() const {
        if (!(n_x >= 3)) throw ValidationError("Grid: n_x must be >= 3");
        if (!(n_t >= 2)) throw ValidationError("Grid: n_t must be >= 2");
        if (!(x_min < x_max)) throw ValidationError("Grid: x_min must be < x_max");
        if (!(horizon > 0)) throw ValidationError("Grid: T must be > 0");
        if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(horizon))
            throw ValidationError("Grid: non-finite extent");
    }
};

/// A field over {t_k} x nodes with optional left-limit slices recorded at
/// times where the field jumps (measure atoms, barrier jumps, terminal clamp).
struct SpaceTimeField {
    std::vector<Slice> slices;      // n_t+1 entries, right-continuous values
    std::map<int, Slice> left;      // t_k- values where they differ

    const Slice& at(int k) const { return slices[static_cast<size_t>(k)]; }
    double at(int k, int i) const { return slices[static_cast<size_t>(k)][static_cast<size_t>(i)]; }
    /// Left-limit slice at t_k (falls back to the right value when no jump).
    const Slice& left_at(int k) const {
        auto it = left.find(k);
        return it != left.end() ? it->second : slices[static_cast<size_t>(k)];
    }
};

inline double sup_abs_diff(const Slice& a, const Slice& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double sup_abs_diff(const SpaceTimeField& a, const SpaceTimeField& b) {
    double m = 0.0;
    for (size_t k = 0; k < a.slices.size(); ++k)
        m = std::max(m, sup_abs_diff(a.slices[k], b.slices[k]));
    return m;
}

} // namespace obk

#endif
