#ifndef OBK_BARRIERS_HPP
#define OBK_BARRIERS_HPP

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "obk/forms.hpp"
#include "obk/grid.hpp"
#include "obk/measures.hpp"

namespace obk {

/// Quasi-cadlag obstacle bound to a grid: right-continuous values at every
/// grid time plus explicit left limits at the declared jump times. Built from
/// time segments whose boundaries are snapped to grid times, or directly from
/// tables. A sentinel barrier (+-infinity) encodes "no barrier", so
/// unconstrained and one-barrier problems are degenerate two-barrier problems.
class Barrier {
public:
    struct Segment {
        double t_start;                                  // inclusive
        std::function<double(double, double)> profile;   // h(t,x), continuous on the segment
    };

    /// Segments must be ordered, the first starting at t = 0; each covers
    /// [t_start, next t_start). Off-grid starts are snapped with a report.
    static Barrier from_segments(std::vector<Segment> segments, const Grid& grid,
                                 std::vector<SnapReport>* snaps = nullptr);
    static Barrier constant(double value, const Grid& grid);
    static Barrier from_table(std::vector<Slice> values, std::vector<int> jump_times,
                              std::map<int, Slice> left_values, const Grid& grid);
    /// No barrier: -infinity (lower side) or +infinity (upper side).
    static Barrier none(double sentinel);

    bool is_sentinel() const { return sentinel_.has_value(); }
    double sentinel() const { return *sentinel_; }

    /// Right-continuous value at (t_k, x_i).
    double value(int k, int i) const;
    /// Left limit at (t_k, x_i): the preceding segment's limit at jump times.
    double left_value(int k, int i) const;
    bool is_jump_time(int k) const;
    const std::vector<int>& jump_times() const { return jump_times_; }
    const Grid& grid() const { return grid_; }

private:
    Grid grid_;
    std::optional<double> sentinel_;
    std::vector<Slice> values_;        // n_t+1
    std::vector<int> jump_times_;      // interior grid indices, sorted
    std::map<int, Slice> left_;        // left limits at jump times
};

/// Left-limit regularization of a Barrier: identical except at jump times,
/// where the value is the preceding segment's limit.
struct PreciseBarrier {
    const Barrier* source = nullptr;
    double value(int k, int i) const { return source->left_value(k, i); }
    bool is_sentinel() const { return source->is_sentinel(); }
};

PreciseBarrier precise_version(const Barrier& h);

enum class BarrierSide { lower, upper };

/// Precise-version terminal check: hhat(T,.) <= phi (lower) or >= phi (upper)
/// over interior nodes. Sentinels pass trivially.
bool terminal_compatibility(const Barrier& h, const Slice& phi,
                            BarrierSide side = BarrierSide::lower);

struct SeparationCertificate {
    enum class Kind { Strict, Mokobodzki, Fail } kind = Kind::Fail;
    SpaceTimeField sandwich;               // the certified potential (Mokobodzki)
    struct Witness { int k = -1, i = -1; bool at_left_limit = false; };
    Witness witness;                       // violating point (Fail)
};

/// Check the two-barrier separation hypotheses: Strict when h1 < h2 and
/// h1hat < h2hat at every interior point; otherwise search for a potential
/// sandwiched between the barriers (Mokobodzki-type condition). Fail is a
/// value, not an error, and carries a violating point.
SeparationCertificate check_separation(const Barrier& h1, const Barrier& h2,
                                       const DiscreteForm& form);

/// Reduce merely measurable barriers (raw grid fields) to quasi-cadlag ones:
/// w is the limit of two-sided penalized solves, v a sandwiched potential, and
/// the returned pair is (w ^ v, w v max). Throws NoSandwich when no potential
/// fits between the raw fields.
struct MeasurableReduction {
    Barrier eta1, eta2;
    SpaceTimeField w, v;
    int ladder_steps = 0;
};
MeasurableReduction reduce_measurable(const std::vector<Slice>& h1_raw,
                                      const std::vector<Slice>& h2_raw,
                                      const Slice& phi,
                                      const struct Reaction& f,
                                      const MeasureData& mu,
                                      const DiscreteForm& form);

} // namespace obk

#endif
