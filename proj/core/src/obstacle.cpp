#include "obk/obstacle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sweep.hpp"

namespace obk {

double ReactionMeasure::total_variation() const {
    double s = 0.0;
    auto add = [&](const Slice& sl) {
        for (size_t i = 0; i < sl.size(); ++i) s += mass[i] * std::abs(sl[i]);
    };
    for (const auto& sl : cont_plus) add(sl);
    for (const auto& sl : cont_minus) add(sl);
    for (const auto& [k, sl] : atom_plus) add(sl);
    for (const auto& [k, sl] : atom_minus) add(sl);
    return s;
}

double ReactionMeasure::total_mass_signed() const {
    double s = 0.0;
    for (size_t k = 0; k < cont_plus.size(); ++k)
        for (size_t i = 0; i < cont_plus[k].size(); ++i)
            s += mass[i] * (cont_plus[k][i] - cont_minus[k][i]);
    for (const auto& [k, sl] : atom_plus)
        for (size_t i = 0; i < sl.size(); ++i) s += mass[i] * sl[i];
    for (const auto& [k, sl] : atom_minus)
        for (size_t i = 0; i < sl.size(); ++i) s -= mass[i] * sl[i];
    return s;
}

DiscreteLoad ReactionMeasure::to_load() const {
    DiscreteLoad load;
    load.step.assign(cont_plus.size(), Slice(mass.size(), 0.0));
    for (size_t k = 0; k < cont_plus.size(); ++k)
        for (size_t i = 0; i < mass.size(); ++i)
            load.step[k][i] = mass[i] * (cont_plus[k][i] - cont_minus[k][i]);
    auto add_atoms = [&](const std::map<int, Slice>& atoms, double sign) {
        for (const auto& [k, sl] : atoms) {
            auto& dst = load.atoms[k];
            if (dst.empty()) dst.assign(mass.size(), 0.0);
            for (size_t i = 0; i < sl.size(); ++i) dst[i] += sign * mass[i] * sl[i];
        }
    };
    add_atoms(atom_plus, 1.0);
    add_atoms(atom_minus, -1.0);
    return load;
}

double ReactionMeasure::jordan_overlap() const {
    double worst = 0.0;
    for (size_t k = 0; k < cont_plus.size(); ++k)
        for (size_t i = 0; i < cont_plus[k].size(); ++i)
            worst = std::max(worst, std::min(cont_plus[k][i], cont_minus[k][i]));
    for (const auto& [k, ap] : atom_plus) {
        auto it = atom_minus.find(k);
        if (it == atom_minus.end()) continue;
        for (size_t i = 0; i < ap.size(); ++i)
            worst = std::max(worst, std::min(ap[i], it->second[i]));
    }
    return worst;
}

namespace {

ReactionMeasure extract_measure(detail::SweepResult& r, const DiscreteForm& form) {
    ReactionMeasure nu;
    nu.cont_plus = std::move(r.nu_plus);
    nu.cont_minus = std::move(r.nu_minus);
    nu.atom_plus = std::move(r.atom_plus);
    nu.atom_minus = std::move(r.atom_minus);
    nu.mass = form.mass;
    return nu;
}

void fill_residuals(ObstacleSolution& sol, const Barrier* h1, const Barrier* h2,
                    const Grid& grid) {
    double comp = 0.0, feas = 0.0;
    const int nt = grid.n_t;
    const int nx = grid.n_x;
    for (int k = 0; k < nt; ++k)
        for (int i = 1; i <= nx; ++i) {
            const double u = sol.u.at(k, i);
            if (h1 && !h1->is_sentinel()) {
                const double gap = u - h1->value(k, i);
                feas = std::max(feas, -gap);
                comp = std::max(comp, std::min(sol.nu.cont_plus[static_cast<size_t>(k)][static_cast<size_t>(i)],
                                               gap));
            }
            if (h2 && !h2->is_sentinel()) {
                const double gap = h2->value(k, i) - u;
                feas = std::max(feas, -gap);
                comp = std::max(comp, std::min(sol.nu.cont_minus[static_cast<size_t>(k)][static_cast<size_t>(i)],
                                               gap));
            }
        }
    sol.residuals.complementarity = comp;
    sol.residuals.feasibility = feas;
}

} // namespace

PdeSolution solve_penalized(const Slice& phi, const Reaction& f, const MeasureData& mu,
                            const Barrier& h, double n, const DiscreteForm& form,
                            const SolverOptions& opt) {
    const DiscreteLoad load = discretize(mu, form.grid);
    detail::SweepInput in;
    in.form = &form;
    in.phi = phi;
    in.reaction = &f;
    in.load = &load;
    in.penalties.push_back({n, &h, true});
    in.opt = opt;
    detail::SweepResult r = detail::backward_sweep(in);
    PdeSolution sol;
    sol.u = std::move(r.u);
    sol.diagnostics = std::move(r.diagnostics);
    sol.upwinded = form.upwinded;
    return sol;
}

ObstacleSolution solve_one_barrier(const Slice& phi, const Reaction& f, const MeasureData& mu,
                                   const Barrier& h, const DiscreteForm& form,
                                   const SolverOptions& opt) {
    const DiscreteLoad load = discretize(mu, form.grid);
    detail::SweepInput in;
    in.form = &form;
    in.phi = phi;
    in.reaction = &f;
    in.load = &load;
    in.lower = &h;
    in.opt = opt;
    detail::SweepResult r = detail::backward_sweep(in);

    ObstacleSolution sol;
    sol.terminal_compatible = terminal_compatibility(h, phi, BarrierSide::lower);
    sol.u = std::move(r.u);
    sol.diagnostics = std::move(r.diagnostics);
    sol.nu = extract_measure(r, form);
    fill_residuals(sol, &h, nullptr, form.grid);
    MinimalityReport mr = minimality_residual(sol, h);
    sol.residuals.minimality_precise = mr.precise_lower;
    sol.residuals.minimality_naive = mr.naive_lower;
    return sol;
}

ObstacleSolution solve_two_barrier(const Slice& phi, const Reaction& f, const MeasureData& mu,
                                   const Barrier& h1, const Barrier& h2,
                                   const DiscreteForm& form, const SolverOptions& opt) {
    if (!h1.is_sentinel() || !h2.is_sentinel()) {
        SeparationCertificate cert = check_separation(h1, h2, form);
        if (cert.kind == SeparationCertificate::Kind::Fail)
            throw SeparationFail("solve_two_barrier: barriers not separated (no strict gap "
                                 "and no sandwiched potential)");
    }
    const DiscreteLoad load = discretize(mu, form.grid);
    detail::SweepInput in;
    in.form = &form;
    in.phi = phi;
    in.reaction = &f;
    in.load = &load;
    in.lower = &h1;
    in.upper = &h2;
    in.opt = opt;
    detail::SweepResult r = detail::backward_sweep(in);

    ObstacleSolution sol;
    sol.terminal_compatible = terminal_compatibility(h1, phi, BarrierSide::lower) &&
                              terminal_compatibility(h2, phi, BarrierSide::upper);
    sol.u = std::move(r.u);
    sol.diagnostics = std::move(r.diagnostics);
    sol.nu = extract_measure(r, form);
    fill_residuals(sol, &h1, &h2, form.grid);
    MinimalityReport mr = minimality_residual(sol, h1, &h2);
    sol.residuals.minimality_precise = std::max(mr.precise_lower, mr.precise_upper);
    sol.residuals.minimality_naive = std::max(mr.naive_lower, mr.naive_upper);
    return sol;
}

TwoBarrierPenalized solve_two_barrier_penalized(const Slice& phi, const Reaction& f,
                                                const MeasureData& mu, const Barrier& h1,
                                                const Barrier& h2, double n,
                                                const DiscreteForm& form,
                                                const SolverOptions& opt) {
    const DiscreteLoad load = discretize(mu, form.grid);
    detail::SweepInput in;
    in.form = &form;
    in.phi = phi;
    in.reaction = &f;
    in.load = &load;
    in.upper = &h2;
    if (n > 0.0) in.penalties.push_back({n, &h1, true});
    in.opt = opt;
    detail::SweepResult r = detail::backward_sweep(in);

    TwoBarrierPenalized out;
    out.u = std::move(r.u);
    out.lambda = extract_measure(r, form);
    return out;
}

MinimalityReport minimality_residual(const ObstacleSolution& sol, const Barrier& h1,
                                     const Barrier* h2) {
    MinimalityReport rep;
    rep.nu_l1 = sol.nu.total_variation();
    const auto& nu = sol.nu;
    const int nt = static_cast<int>(nu.cont_plus.size());
    const int nn = static_cast<int>(nu.mass.size());

    for (int k = 0; k < nt; ++k)
        for (int i = 1; i < nn - 1; ++i) {
            const double u = sol.u.at(k, i);
            const double np = nu.cont_plus[static_cast<size_t>(k)][static_cast<size_t>(i)];
            if (np != 0.0 && !h1.is_sentinel()) {
                const double term = (u - h1.value(k, i)) * np * nu.mass[static_cast<size_t>(i)];
                rep.precise_lower += term;
                rep.naive_lower += term;
            }
            const double nm = nu.cont_minus[static_cast<size_t>(k)][static_cast<size_t>(i)];
            if (nm != 0.0 && h2 && !h2->is_sentinel()) {
                const double term = (h2->value(k, i) - u) * nm * nu.mass[static_cast<size_t>(i)];
                rep.precise_upper += term;
                rep.naive_upper += term;
            }
        }

    // Atoms pair with the left-limit slice u(t_k-) and the precise barrier;
    // the naive variant pairs the same masses with right-continuous values.
    for (const auto& [k, sl] : nu.atom_plus) {
        const Slice& ul = sol.u.left_at(k);
        for (int i = 1; i < nn - 1; ++i) {
            const double a = sl[static_cast<size_t>(i)];
            if (a == 0.0 || h1.is_sentinel()) continue;
            rep.precise_lower += (ul[static_cast<size_t>(i)] - h1.left_value(k, i)) * a *
                                 nu.mass[static_cast<size_t>(i)];
            rep.naive_lower += (sol.u.at(k, i) - h1.value(k, i)) * a * nu.mass[static_cast<size_t>(i)];
        }
    }
    for (const auto& [k, sl] : nu.atom_minus) {
        const Slice& ul = sol.u.left_at(k);
        for (int i = 1; i < nn - 1; ++i) {
            const double a = sl[static_cast<size_t>(i)];
            if (a == 0.0 || !h2 || h2->is_sentinel()) continue;
            rep.precise_upper += (h2->left_value(k, i) - ul[static_cast<size_t>(i)]) * a *
                                 nu.mass[static_cast<size_t>(i)];
            rep.naive_upper += (h2->value(k, i) - sol.u.at(k, i)) * a * nu.mass[static_cast<size_t>(i)];
        }
    }
    return rep;
}

ObstacleComparisonReport comparison_obstacle(const ObstacleSolution& sol1,
                                             const ObstacleSolution& sol2,
                                             bool equal_barriers) {
    ObstacleComparisonReport rep;
    for (size_t k = 0; k < sol1.u.slices.size(); ++k)
        for (size_t i = 0; i < sol1.u.slices[k].size(); ++i) {
            const double v = sol1.u.slices[k][i] - sol2.u.slices[k][i];
            if (v > rep.worst_u_violation) {
                rep.worst_u_violation = v;
                rep.k = static_cast<int>(k);
                rep.i = static_cast<int>(i);
            }
        }
    if (equal_barriers) {
        const auto& n1 = sol1.nu;
        const auto& n2 = sol2.nu;
        for (size_t k = 0; k < n1.cont_plus.size(); ++k)
            for (size_t i = 0; i < n1.cont_plus[k].size(); ++i) {
                const double d1 = n1.cont_plus[k][i] - n1.cont_minus[k][i];
                const double d2 = n2.cont_plus[k][i] - n2.cont_minus[k][i];
                rep.worst_nu_violation = std::max(rep.worst_nu_violation, d2 - d1);
            }
        auto atom_value = [](const ReactionMeasure& nu, int k, size_t i) {
            double v = 0.0;
            auto it = nu.atom_plus.find(k);
            if (it != nu.atom_plus.end()) v += it->second[i];
            auto im = nu.atom_minus.find(k);
            if (im != nu.atom_minus.end()) v -= im->second[i];
            return v;
        };
        std::set<int> keys;
        for (const auto& [k, sl] : n1.atom_plus) keys.insert(k);
        for (const auto& [k, sl] : n1.atom_minus) keys.insert(k);
        for (const auto& [k, sl] : n2.atom_plus) keys.insert(k);
        for (const auto& [k, sl] : n2.atom_minus) keys.insert(k);
        for (int k : keys)
            for (size_t i = 0; i < n1.mass.size(); ++i)
                rep.worst_nu_violation =
                    std::max(rep.worst_nu_violation, atom_value(n2, k, i) - atom_value(n1, k, i));
    }
    return rep;
}

} // namespace obk
