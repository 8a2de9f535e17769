#include "obk/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "obk/pde.hpp"

namespace obk {

double DiscreteLoad::total_mass() const {
    double s = 0.0;
    for (const auto& sl : step)
        for (double v : sl) s += v;
    for (const auto& [k, sl] : atoms)
        for (double v : sl) s += v;
    return s;
}

bool DiscreteLoad::empty() const {
    for (const auto& sl : step)
        for (double v : sl)
            if (v != 0.0) return false;
    for (const auto& [k, sl] : atoms)
        for (double v : sl)
            if (v != 0.0) return false;
    return true;
}

DiscreteLoad& DiscreteLoad::operator+=(const DiscreteLoad& other) {
    for (size_t k = 0; k < step.size(); ++k)
        for (size_t i = 0; i < step[k].size(); ++i) step[k][i] += other.step[k][i];
    for (const auto& [k, sl] : other.atoms) {
        auto& dst = atoms[k];
        if (dst.empty()) dst.assign(sl.size(), 0.0);
        for (size_t i = 0; i < sl.size(); ++i) dst[i] += sl[i];
    }
    snaps.insert(snaps.end(), other.snaps.begin(), other.snaps.end());
    return *this;
}

namespace {

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NonFinite(std::string("measure sample not finite: ") + what);
}

// Split a point mass at x0 onto the two neighboring nodes.
void deposit_space(Slice& sl, const Grid& grid, double x0, double mass) {
    const double dx = grid.dx();
    const double s = (x0 - grid.x_min) / dx;
    int j = static_cast<int>(std::floor(s));
    j = std::max(0, std::min(grid.n_nodes() - 2, j));
    const double w = s - j;
    sl[static_cast<size_t>(j)] += mass * (1.0 - w);
    sl[static_cast<size_t>(j + 1)] += mass * w;
}

int snap_time(const Grid& grid, double t0, const char* what, std::vector<SnapReport>* snaps) {
    if (!(t0 > 0.0) || t0 > grid.horizon + 1e-12 * grid.horizon) {
        std::ostringstream os;
        os << what << ": t0 = " << t0 << " outside (0, T]";
        throw AtomOutOfDomain(os.str());
    }
    int k = grid.nearest_time(t0);
    if (k == 0) k = 1;
    const double used = grid.time(k);
    if (snaps && std::abs(used - t0) > 1e-14 * std::max(1.0, grid.horizon))
        snaps->push_back({what, t0, used, std::abs(used - t0)});
    return k;
}

void check_space_domain(const Grid& grid, double x0, const char* what) {
    if (!(x0 > grid.x_min) || !(x0 < grid.x_max)) {
        std::ostringstream os;
        os << what << ": x0 = " << x0 << " outside (" << grid.x_min << ", " << grid.x_max << ")";
        throw AtomOutOfDomain(os.str());
    }
}

} // namespace

DiscreteLoad discretize(const MeasureData& mu, const Grid& grid) {
    grid.validate();
    const int nn = grid.n_nodes();
    const double dx = grid.dx();
    const double dt = grid.dt();

    DiscreteLoad load;
    load.step.assign(static_cast<size_t>(grid.n_t), Slice(static_cast<size_t>(nn), 0.0));

    if (mu.ac) {
        for (int k = 0; k < grid.n_t; ++k) {
            const double tm = grid.time(k) + 0.5 * dt;
            for (int i = 0; i < nn; ++i) {
                const double d = mu.ac(tm, grid.node(i));
                check_finite(d, "ac density");
                const double cell = (i == 0 || i == nn - 1) ? 0.5 * dx : dx;
                load.step[static_cast<size_t>(k)][static_cast<size_t>(i)] += d * cell * dt;
            }
        }
    }
    for (const auto& sa : mu.space_atoms) {
        check_space_domain(grid, sa.x0, "space atom");
        for (int k = 0; k < grid.n_t; ++k) {
            const double q = sa.q(grid.time(k) + 0.5 * dt);
            check_finite(q, "space atom rate");
            deposit_space(load.step[static_cast<size_t>(k)], grid, sa.x0, q * dt);
        }
    }
    for (const auto& ta : mu.time_atoms) {
        const int k = snap_time(grid, ta.t0, "time atom", &load.snaps);
        auto& dst = load.atoms[k];
        if (dst.empty()) dst.assign(static_cast<size_t>(nn), 0.0);
        for (int i = 0; i < nn; ++i) {
            const double g = ta.g(grid.node(i));
            check_finite(g, "time atom density");
            const double cell = (i == 0 || i == nn - 1) ? 0.5 * dx : dx;
            dst[static_cast<size_t>(i)] += g * cell;
        }
    }
    for (const auto& pa : mu.point_atoms) {
        check_space_domain(grid, pa.x0, "point atom");
        check_finite(pa.mass, "point atom mass");
        const int k = snap_time(grid, pa.t0, "point atom", &load.snaps);
        auto& dst = load.atoms[k];
        if (dst.empty()) dst.assign(static_cast<size_t>(nn), 0.0);
        deposit_space(dst, grid, pa.x0, pa.mass);
    }
    return load;
}

double weighted_norm(const MeasureData& mu, const std::function<double(double, double)>& rho,
                     const Grid& grid) {
    const int nn = grid.n_nodes();
    const double dx = grid.dx();
    const double dt = grid.dt();
    double s = 0.0;

    auto w = [&](double t, double x) {
        const double r = rho(t, x);
        check_finite(r, "weight rho");
        return r;
    };

    if (mu.ac) {
        for (int k = 0; k < grid.n_t; ++k) {
            const double tm = grid.time(k) + 0.5 * dt;
            for (int i = 0; i < nn; ++i) {
                const double cell = (i == 0 || i == nn - 1) ? 0.5 * dx : dx;
                s += w(tm, grid.node(i)) * std::abs(mu.ac(tm, grid.node(i))) * cell * dt;
            }
        }
    }
    for (const auto& sa : mu.space_atoms)
        for (int k = 0; k < grid.n_t; ++k) {
            const double tm = grid.time(k) + 0.5 * dt;
            s += w(tm, sa.x0) * std::abs(sa.q(tm)) * dt;
        }
    for (const auto& ta : mu.time_atoms)
        for (int i = 0; i < nn; ++i) {
            const double cell = (i == 0 || i == nn - 1) ? 0.5 * dx : dx;
            s += w(ta.t0, grid.node(i)) * std::abs(ta.g(grid.node(i))) * cell;
        }
    for (const auto& pa : mu.point_atoms) s += w(pa.t0, pa.x0) * std::abs(pa.mass);
    return s;
}

SpaceTimeField potential(const DiscreteLoad& load, const DiscreteForm& form) {
    const Grid& grid = form.grid;
    Slice phi(static_cast<size_t>(grid.n_nodes()), 0.0);
    DiscreteLoad shifted = load;
    // Atoms at t = T act as terminal data.
    auto it = shifted.atoms.find(grid.n_t);
    if (it != shifted.atoms.end()) {
        for (int i = 0; i < grid.n_nodes(); ++i)
            phi[static_cast<size_t>(i)] = it->second[static_cast<size_t>(i)] / form.mass[static_cast<size_t>(i)];
        shifted.atoms.erase(it);
    }
    PdeSolution sol = solve_pde(phi, Reaction{}, shifted, form);
    return std::move(sol.u);
}

SpaceTimeField potential(const MeasureData& mu, const DiscreteForm& form) {
    return potential(discretize(mu, form.grid), form);
}

void write_load_csv(const DiscreteLoad& load, const Grid& grid, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ValidationError("write_load_csv: cannot open " + path);
    std::fputs("k,i,continuous,atom\n", f);
    for (int k = 0; k <= grid.n_t; ++k) {
        const Slice* atom = nullptr;
        auto it = load.atoms.find(k);
        if (it != load.atoms.end()) atom = &it->second;
        for (int i = 0; i < grid.n_nodes(); ++i) {
            const double cont = k < grid.n_t ? load.step[static_cast<size_t>(k)][static_cast<size_t>(i)] : 0.0;
            const double at = atom ? (*atom)[static_cast<size_t>(i)] : 0.0;
            if (cont == 0.0 && at == 0.0) continue;
            std::fprintf(f, "%d,%d,%.17g,%.17g\n", k, i, cont, at);
        }
    }
    std::fclose(f);
}

} // namespace obk
