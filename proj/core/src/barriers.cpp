#include "obk/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "obk/obstacle.hpp"
#include "obk/pde.hpp"
#include "sweep.hpp"

namespace obk {

Barrier Barrier::none(double sentinel) {
    Barrier b;
    b.sentinel_ = sentinel;
    return b;
}

Barrier Barrier::constant(double value, const Grid& grid) {
    return from_segments({{0.0, [value](double, double) { return value; }}}, grid);
}

Barrier Barrier::from_segments(std::vector<Segment> segments, const Grid& grid,
                               std::vector<SnapReport>* snaps) {
    grid.validate();
    if (segments.empty()) throw ValidationError("Barrier: no segments");
    for (const auto& s : segments)
        if (!s.profile) throw ValidationError("Barrier: segment without profile");

    // Snap segment starts to grid times; the first segment must start at 0.
    std::vector<int> starts;
    for (size_t s = 0; s < segments.size(); ++s) {
        int k = grid.nearest_time(segments[s].t_start);
        if (s == 0 && k != 0) throw ValidationError("Barrier: first segment must start at t = 0");
        const double used = grid.time(k);
        if (snaps && std::abs(used - segments[s].t_start) > 1e-14 * std::max(1.0, grid.horizon))
            snaps->push_back({"barrier segment start", segments[s].t_start, used,
                              std::abs(used - segments[s].t_start)});
        if (!starts.empty() && k <= starts.back())
            throw ValidationError("Barrier: segment starts must be strictly increasing");
        if (k >= grid.n_t && s > 0)
            throw ValidationError("Barrier: segment start at or beyond T");
        starts.push_back(k);
    }

    Barrier b;
    b.grid_ = grid;
    const int nn = grid.n_nodes();
    b.values_.assign(static_cast<size_t>(grid.n_t + 1), Slice(static_cast<size_t>(nn), 0.0));

    auto segment_of = [&](int k) {
        size_t s = 0;
        while (s + 1 < starts.size() && starts[s + 1] <= k) ++s;
        return s;
    };
    for (int k = 0; k <= grid.n_t; ++k) {
        const size_t s = segment_of(k);
        const double t = grid.time(k);
        for (int i = 0; i < nn; ++i) {
            const double v = segments[s].profile(t, grid.node(i));
            if (!std::isfinite(v)) throw NonFinite("Barrier: non-finite profile sample");
            b.values_[static_cast<size_t>(k)][static_cast<size_t>(i)] = v;
        }
    }
    // Left limits at interior segment boundaries come from the preceding
    // segment evaluated at the jump time itself.
    for (size_t s = 1; s < starts.size(); ++s) {
        const int k = starts[s];
        const double t = grid.time(k);
        Slice left(static_cast<size_t>(nn), 0.0);
        bool differs = false;
        for (int i = 0; i < nn; ++i) {
            left[static_cast<size_t>(i)] = segments[s - 1].profile(t, grid.node(i));
            if (left[static_cast<size_t>(i)] != b.values_[static_cast<size_t>(k)][static_cast<size_t>(i)])
                differs = true;
        }
        if (differs) {
            b.jump_times_.push_back(k);
            b.left_[k] = std::move(left);
        }
    }
    return b;
}

Barrier Barrier::from_table(std::vector<Slice> values, std::vector<int> jump_times,
                            std::map<int, Slice> left_values, const Grid& grid) {
    if (static_cast<int>(values.size()) != grid.n_t + 1)
        throw ValidationError("Barrier::from_table: wrong slice count");
    Barrier b;
    b.grid_ = grid;
    b.values_ = std::move(values);
    std::sort(jump_times.begin(), jump_times.end());
    for (int k : jump_times) {
        if (k <= 0 || k > grid.n_t)
            throw ValidationError("Barrier::from_table: jump time outside (0, T]");
        if (!left_values.count(k))
            throw ValidationError("Barrier::from_table: jump time without left values");
    }
    b.jump_times_ = std::move(jump_times);
    b.left_ = std::move(left_values);
    return b;
}

double Barrier::value(int k, int i) const {
    if (sentinel_) return *sentinel_;
    return values_[static_cast<size_t>(k)][static_cast<size_t>(i)];
}

double Barrier::left_value(int k, int i) const {
    if (sentinel_) return *sentinel_;
    auto it = left_.find(k);
    if (it != left_.end()) return it->second[static_cast<size_t>(i)];
    return values_[static_cast<size_t>(k)][static_cast<size_t>(i)];
}

bool Barrier::is_jump_time(int k) const {
    return std::binary_search(jump_times_.begin(), jump_times_.end(), k);
}

PreciseBarrier precise_version(const Barrier& h) { return PreciseBarrier{&h}; }

bool terminal_compatibility(const Barrier& h, const Slice& phi, BarrierSide side) {
    if (h.is_sentinel()) return true;
    const Grid& g = h.grid();
    for (int i = 1; i <= g.n_x; ++i) {
        const double hv = h.left_value(g.n_t, i);
        const double pv = phi[static_cast<size_t>(i)];
        if (side == BarrierSide::lower ? hv > pv : hv < pv) return false;
    }
    return true;
}

SeparationCertificate check_separation(const Barrier& h1, const Barrier& h2,
                                       const DiscreteForm& form) {
    const Grid& grid = form.grid;
    SeparationCertificate cert;

    // Strict gap: h1 < h2 and h1hat < h2hat at every interior point.
    if (h1.is_sentinel() || h2.is_sentinel()) {
        cert.kind = SeparationCertificate::Kind::Strict;
        return cert;
    }
    bool strict = true;
    for (int k = 0; k <= grid.n_t && strict; ++k)
        for (int i = 1; i <= grid.n_x; ++i) {
            if (!(h1.value(k, i) < h2.value(k, i)) ||
                !(h1.left_value(k, i) < h2.left_value(k, i))) {
                strict = false;
                break;
            }
        }
    if (strict) {
        cert.kind = SeparationCertificate::Kind::Strict;
        return cert;
    }

    // Mokobodzki-type search: the minimal potential above h1 (one-barrier
    // solve of the lower problem with zero data) tested against h2, including
    // the left-limit slices at jump times. Minimality of the one-barrier
    // solution makes a violation a genuine failure of this potential family.
    Slice phi0(static_cast<size_t>(grid.n_nodes()), 0.0);
    for (int i = 0; i < grid.n_nodes(); ++i)
        phi0[static_cast<size_t>(i)] = std::max(h1.left_value(grid.n_t, i), 0.0);
    ObstacleSolution low = solve_one_barrier(phi0, Reaction{}, MeasureData{}, h1, form);

    double worst = 0.0;
    for (int k = 0; k <= grid.n_t; ++k)
        for (int i = 1; i <= grid.n_x; ++i) {
            const double v = low.u.at(k, i);
            double gap = v - h2.value(k, i);
            if (gap > worst) {
                worst = gap;
                cert.witness = {k, i, false};
            }
            const double vl = low.u.left_at(k)[static_cast<size_t>(i)];
            gap = vl - h2.left_value(k, i);
            if (gap > worst) {
                worst = gap;
                cert.witness = {k, i, true};
            }
            gap = h1.value(k, i) - v;
            if (gap > worst) {
                worst = gap;
                cert.witness = {k, i, false};
            }
        }
    if (worst <= 1e-12) {
        cert.kind = SeparationCertificate::Kind::Mokobodzki;
        cert.sandwich = std::move(low.u);
        return cert;
    }
    cert.kind = SeparationCertificate::Kind::Fail;
    return cert;
}

MeasurableReduction reduce_measurable(const std::vector<Slice>& h1_raw,
                                      const std::vector<Slice>& h2_raw,
                                      const Slice& phi, const Reaction& f,
                                      const MeasureData& mu, const DiscreteForm& form) {
    const Grid& grid = form.grid;
    if (static_cast<int>(h1_raw.size()) != grid.n_t + 1 ||
        static_cast<int>(h2_raw.size()) != grid.n_t + 1)
        throw ValidationError("reduce_measurable: raw fields need n_t+1 slices");

    const bool has_lower = std::isfinite(h1_raw[0][0]);
    const bool has_upper = std::isfinite(h2_raw[0][0]);

    // Sandwiched potential v between the raw fields (nodewise, the m1-a.e.
    // reading). Without a lower field the zero potential works whenever
    // h2 >= 0; otherwise take the minimal potential above h1.
    Barrier b1 = has_lower
                     ? Barrier::from_table(h1_raw, {}, {}, grid)
                     : Barrier::none(-std::numeric_limits<double>::infinity());
    SpaceTimeField v;
    if (has_lower) {
        Slice phi0(static_cast<size_t>(grid.n_nodes()), 0.0);
        for (int i = 0; i < grid.n_nodes(); ++i)
            phi0[static_cast<size_t>(i)] = std::max(h1_raw[static_cast<size_t>(grid.n_t)][static_cast<size_t>(i)], 0.0);
        v = solve_one_barrier(phi0, Reaction{}, MeasureData{}, b1, form).u;
    } else {
        v.slices.assign(static_cast<size_t>(grid.n_t + 1), Slice(static_cast<size_t>(grid.n_nodes()), 0.0));
    }
    if (has_upper) {
        for (int k = 0; k <= grid.n_t; ++k)
            for (int i = 1; i <= grid.n_x; ++i)
                if (v.at(k, i) > h2_raw[static_cast<size_t>(k)][static_cast<size_t>(i)] + 1e-12) {
                    std::ostringstream os;
                    os << "reduce_measurable: no sandwiched potential (violation at k=" << k
                       << ", i=" << i << ")";
                    throw NoSandwich(os.str());
                }
    }

    // w = limit of two-sided penalized solves, penalty level doubling until
    // the sup-change stalls (capped: beyond ~1e6 the step residual scale
    // exhausts double precision).
    Barrier b2 = has_upper ? Barrier::from_table(h2_raw, {}, {}, grid)
                           : Barrier::none(std::numeric_limits<double>::infinity());
    const DiscreteLoad load = discretize(mu, grid);
    SpaceTimeField w;
    double n = 1.0;
    int steps = 0;
    SpaceTimeField prev;
    for (; steps < 21; ++steps) {
        detail::SweepInput in;
        in.form = &form;
        in.phi = phi;
        in.reaction = &f;
        in.load = &load;
        if (has_lower) in.penalties.push_back({n, &b1, true});
        if (has_upper) in.penalties.push_back({n, &b2, false});
        in.opt.step_tol = 1e-10 * (1.0 + n * grid.dt());
        detail::SweepResult r = detail::backward_sweep(in);
        w = std::move(r.u);
        if (steps > 0 && sup_abs_diff(w, prev) < 1e-8) break;
        prev = w;
        n *= 2.0;
    }

    MeasurableReduction red;
    red.ladder_steps = steps + 1;
    red.v = v;
    red.w = w;

    std::vector<Slice> e1(w.slices.size()), e2(w.slices.size());
    for (size_t k = 0; k < w.slices.size(); ++k) {
        e1[k].resize(w.slices[k].size());
        e2[k].resize(w.slices[k].size());
        for (size_t i = 0; i < w.slices[k].size(); ++i) {
            e1[k][i] = std::min(w.slices[k][i], v.slices[k][i]);
            e2[k][i] = std::max(w.slices[k][i], v.slices[k][i]);
        }
    }
    // Left limits where the inputs carry atoms: inherit from w and v.
    std::vector<int> jumps;
    std::map<int, Slice> l1, l2;
    for (const auto& [k, sl] : w.left) {
        Slice a(sl.size()), bsl(sl.size());
        const Slice& vl = v.left_at(k);
        for (size_t i = 0; i < sl.size(); ++i) {
            a[i] = std::min(sl[i], vl[i]);
            bsl[i] = std::max(sl[i], vl[i]);
        }
        jumps.push_back(k);
        l1[k] = std::move(a);
        l2[k] = std::move(bsl);
    }
    red.eta1 = Barrier::from_table(std::move(e1), jumps, std::move(l1), grid);
    red.eta2 = Barrier::from_table(std::move(e2), jumps, std::move(l2), grid);
    return red;
}

} // namespace obk
