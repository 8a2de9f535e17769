#ifndef OBK_TRIDIAG_HPP
#define OBK_TRIDIAG_HPP

#include <cmath>
#include <vector>

#include "obk/errors.hpp"

namespace obk {

/// Tridiagonal matrix over the interior nodes (size n). lower[0] and
/// upper[n-1] are unused.
struct Tridiag {
    std::vector<double> lower, diag, upper;

    explicit Tridiag(int n = 0)
        : lower(static_cast<size_t>(n), 0.0),
          diag(static_cast<size_t>(n), 0.0),
          upper(static_cast<size_t>(n), 0.0) {}

    int size() const { return static_cast<int>(diag.size()); }

    /// y = A*x (x, y over interior nodes).
    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        const int n = size();
        for (int i = 0; i < n; ++i) {
            double v = diag[i] * x[i];
            if (i > 0) v += lower[i] * x[i - 1];
            if (i < n - 1) v += upper[i] * x[i + 1];
            y[i] = v;
        }
    }
};

/// Thomas algorithm; overwrites rhs with the solution. Throws on a zero pivot.
inline void solve_tridiag(const Tridiag& a, std::vector<double>& rhs) {
    const int n = a.size();
    static thread_local std::vector<double> c, d;
    c.assign(static_cast<size_t>(n), 0.0);
    d.assign(static_cast<size_t>(n), 0.0);
    double piv = a.diag[0];
    if (piv == 0.0 || !std::isfinite(piv)) throw SolverError("tridiag: zero pivot");
    c[0] = a.upper[0] / piv;
    d[0] = rhs[0] / piv;
    for (int i = 1; i < n; ++i) {
        piv = a.diag[i] - a.lower[i] * c[i - 1];
        if (piv == 0.0 || !std::isfinite(piv)) throw SolverError("tridiag: zero pivot");
        c[i] = (i < n - 1) ? a.upper[i] / piv : 0.0;
        d[i] = (rhs[i] - a.lower[i] * d[i - 1]) / piv;
    }
    rhs[n - 1] = d[n - 1];
    for (int i = n - 2; i >= 0; --i) rhs[i] = d[i] - c[i] * rhs[i + 1];
}

} // namespace obk

#endif
