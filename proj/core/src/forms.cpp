#include "obk/forms.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace obk {

namespace {

double sample(const std::function<double(double, double)>& f, double t, double x,
              const char* what) {
    const double v = f(t, x);
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite coefficient " << what << " at (t=" << t << ", x=" << x << ")";
        throw NonFinite(os.str());
    }
    return v;
}

} // namespace

DiscreteForm assemble(const FormCoefficients& coeffs, const Grid& grid) {
    grid.validate();
    if (!coeffs.a || !coeffs.b) throw ValidationError("assemble: coefficients not set");
    if (!(coeffs.a_floor > 0.0)) throw ValidationError("assemble: a_floor must be > 0");

    const int nx = grid.n_x;
    const int nt = grid.n_t;
    const double dx = grid.dx();

    DiscreteForm form;
    form.grid = grid;
    form.mass.assign(static_cast<size_t>(grid.n_nodes()), dx);
    form.mass.front() = 0.5 * dx;
    form.mass.back() = 0.5 * dx;

    // Mesh-Peclet gate on the midpoint samples: dx*max|b| <= 2*min a keeps the
    // centered P1 drift an M-matrix; otherwise switch to nodal upwinding.
    double max_abs_b = 0.0, min_a = std::numeric_limits<double>::infinity();
    for (int k = 0; k < nt; ++k) {
        const double t = grid.time(k);
        for (int e = 0; e <= nx; ++e) {
            const double xm = grid.node(e) + 0.5 * dx;
            const double a = sample(coeffs.a, t, xm, "a");
            const double b = sample(coeffs.b, t, xm, "b");
            if (a < coeffs.a_floor) {
                std::ostringstream os;
                os << "a(t=" << t << ", x=" << xm << ") = " << a
                   << " below declared floor " << coeffs.a_floor;
                throw CoefficientViolation(os.str());
            }
            max_abs_b = std::max(max_abs_b, std::abs(b));
            min_a = std::min(min_a, a);
        }
    }
    form.upwinded = dx * max_abs_b > 2.0 * min_a;

    form.stiffness.reserve(static_cast<size_t>(nt));
    for (int k = 0; k < nt; ++k) {
        const double t = grid.time(k);
        Tridiag A(nx);
        // Element loop; element e spans [node(e), node(e+1)], interior node i
        // has matrix row index i-1.
        for (int e = 0; e <= nx; ++e) {
            const double xm = grid.node(e) + 0.5 * dx;
            const double a = coeffs.a(t, xm);
            const double b = form.upwinded ? 0.0 : coeffs.b(t, xm);
            const double w = a / dx;
            const int il = e - 1;     // left node's row, -1 when boundary
            const int ir = e;         // right node's row, nx when boundary
            if (il >= 0) {
                A.diag[il] += w - 0.5 * b;
                if (ir < nx) A.upper[il] += -w + 0.5 * b;
            }
            if (ir < nx) {
                A.diag[ir] += w + 0.5 * b;
                if (il >= 0) A.lower[ir] += -w - 0.5 * b;
            }
        }
        if (form.upwinded) {
            // First-order upwind realization of int b u'v with nodal samples.
            for (int i = 1; i <= nx; ++i) {
                const double b = sample(coeffs.b, t, grid.node(i), "b");
                const int r = i - 1;
                if (b >= 0.0) {
                    A.diag[r] += b;
                    if (r > 0) A.lower[r] -= b;
                } else {
                    A.diag[r] -= b;
                    if (r < nx - 1) A.upper[r] += b;
                }
            }
        }
        form.stiffness.push_back(std::move(A));
    }
    return form;
}

double form_value(const DiscreteForm& form, int k,
                  const std::vector<double>& u, const std::vector<double>& v) {
    const Tridiag& A = form.at(k);
    const int n = A.size();
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = A.diag[i] * u[i];
        if (i > 0) row += A.lower[i] * u[i - 1];
        if (i < n - 1) row += A.upper[i] * u[i + 1];
        s += v[i] * row;
    }
    return s;
}

namespace {

Eigen::MatrixXd dense_symmetric_part(const Tridiag& A) {
    const int n = A.size();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        S(i, i) = A.diag[i];
        if (i > 0) S(i, i - 1) = A.lower[i];
        if (i < n - 1) S(i, i + 1) = A.upper[i];
    }
    return 0.5 * (S + S.transpose());
}

} // namespace

SectorReport sector_report(const FormCoefficients& coeffs, const Grid& grid) {
    const DiscreteForm form = assemble(coeffs, grid);
    const int nx = grid.n_x;
    const int nt = grid.n_t;

    Eigen::VectorXd m(nx);
    for (int i = 0; i < nx; ++i) m(i) = form.mass[static_cast<size_t>(i + 1)];
    const Eigen::MatrixXd M = m.asDiagonal();

    SectorReport rep;

    // alpha0: smallest shift with S_k + alpha0*M PSD for every k.
    double min_eig = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> sym(static_cast<size_t>(nt));
    for (int k = 0; k < nt; ++k) {
        sym[static_cast<size_t>(k)] = dense_symmetric_part(form.at(k));
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
            sym[static_cast<size_t>(k)], M, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    rep.alpha0 = std::max(0.0, -min_eig);

    // Probe set: 256 fixed-seed Gaussian probes, plus the exhaustive dense
    // route when the grid is small enough for it to be
    // exact.
    std::mt19937_64 rng(0x0b57ac1eULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> probes;
    for (int p = 0; p < 256; ++p) {
        std::vector<double> v(static_cast<size_t>(nx));
        for (auto& e : v) e = gauss(rng);
        probes.push_back(std::move(v));
    }

    auto quad = [&](const Eigen::MatrixXd& S, const std::vector<double>& u) {
        double s = 0.0;
        for (int i = 0; i < nx; ++i) {
            double row = 0.0;
            for (int j = std::max(0, i - 1); j <= std::min(nx - 1, i + 1); ++j)
                row += S(i, j) * u[static_cast<size_t>(j)];
            s += u[static_cast<size_t>(i)] * row;
        }
        return s;
    };
    auto mass_quad = [&](const std::vector<double>& u) {
        double s = 0.0;
        for (int i = 0; i < nx; ++i) s += m(i) * u[static_cast<size_t>(i)] * u[static_cast<size_t>(i)];
        return s;
    };
    double K = 1.0;
    double lambda = 1.0;
    const Eigen::MatrixXd& S0 = sym[0];

    for (int k = 0; k < nt; ++k) {
        const Eigen::MatrixXd& Sk = sym[static_cast<size_t>(k)];
        const Tridiag& A = form.at(k);

        // shifted symmetric part S~ = S_k + alpha0 M as a tridiagonal
        Tridiag St(nx);
        for (int i = 0; i < nx; ++i) {
            St.diag[i] = Sk(i, i) + rep.alpha0 * m(i) + 1e-14;
            if (i > 0) St.lower[i] = Sk(i, i - 1);
            if (i < nx - 1) St.upper[i] = Sk(i, i + 1);
        }

        // For each probe u the optimal test function is v = S~^{-1} A u, so the
        // ratio sqrt(u^T A^T S~^{-1} A u / u^T S~ u) needs only a tridiagonal
        // solve; its sup over u is the sector constant itself.
        std::vector<double> Au(static_cast<size_t>(nx));
        for (const auto& u : probes) {
            for (int i = 0; i < nx; ++i) {
                double row = A.diag[i] * u[static_cast<size_t>(i)];
                if (i > 0) row += A.lower[i] * u[static_cast<size_t>(i - 1)];
                if (i < nx - 1) row += A.upper[i] * u[static_cast<size_t>(i + 1)];
                Au[static_cast<size_t>(i)] = row;
            }
            std::vector<double> w = Au;
            solve_tridiag(St, w);
            double num = 0.0;
            for (int i = 0; i < nx; ++i) num += Au[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
            const double den = quad(Sk, u) + rep.alpha0 * mass_quad(u);
            if (den > 0.0 && num > 0.0) K = std::max(K, std::sqrt(num / den));
        }

        if (nx <= 64) {
            // exhaustive at small sizes: K_k = sigma_max(S~^{-1/2} A S~^{-1/2})
            Eigen::MatrixXd Std = Eigen::MatrixXd::Zero(nx, nx);
            Eigen::MatrixXd Ad = Eigen::MatrixXd::Zero(nx, nx);
            for (int i = 0; i < nx; ++i) {
                Std(i, i) = St.diag[i];
                if (i > 0) Std(i, i - 1) = St.lower[i];
                if (i < nx - 1) Std(i, i + 1) = St.upper[i];
                Ad(i, i) = A.diag[i];
                if (i > 0) Ad(i, i - 1) = A.lower[i];
                if (i < nx - 1) Ad(i, i + 1) = A.upper[i];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Std);
            Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
            Eigen::MatrixXd half =
                es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
            Eigen::MatrixXd Bhat = half * Ad * half;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sv(Bhat.transpose() * Bhat);
            K = std::max(K, std::sqrt(std::max(0.0, sv.eigenvalues().maxCoeff())));
        }

        for (const auto& u : probes) {
            const double e0 = quad(S0, u);
            const double ek = quad(Sk, u);
            if (e0 == 0.0) throw DegenerateForm("sector_report: B^(t_0)(u,u) = 0 for a nonzero probe");
            if (e0 > 0.0 && ek > 0.0) {
                const double r = ek / e0;
                lambda = std::max(lambda, std::max(r, 1.0 / r));
            }
        }
    }
    rep.K = K;
    rep.lambda = lambda;
    return rep;
}

} // namespace obk
