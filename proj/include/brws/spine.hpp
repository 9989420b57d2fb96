#ifndef BRWS_SPINE_HPP
#define BRWS_SPINE_HPP

#include <functional>
#include <utility>
#include <vector>

#include "brws/laws.hpp"
#include "brws/profile.hpp"
#include "brws/walks.hpp"

namespace brws {

/// xi(u) = log(1 + sum_{v in Omega(u)} e^{V(v)-V(u)}) over the siblings'
/// displacements relative to u; log-sum-exp safe.
double xi_of(const std::vector<double>& sibling_rel_displacements);

struct SpineRealization {
    std::vector<double> displacements;
    std::size_t spine_index;  // which child carries the spine
};

/// Size-biased reproduction with a distinguished child: realizations from
/// dL^/dL = sum e^l, spine child chosen with probability proportional to e^l.
/// Requires a boundary-normalized base law that is either enumerable or a
/// Gaussian product law.
class SpineLaw {
  public:
    explicit SpineLaw(ReproductionLaw base);

    const ReproductionLaw& base() const { return base_; }
    SpineRealization draw(RngStream& rng) const;

    /// Law of one spine displacement V(w_1): exact atoms for enumerable bases,
    /// exponentially tilted Gaussian otherwise. This is the centred walk of
    /// the many-to-one identity. with_marks attaches xi(w_1) jointly.
    StepLaw spine_step_law(bool with_marks = false) const;

    /// (value, weight) atoms of the spine step, enumerable bases only.
    std::vector<std::pair<double, double>> step_atoms() const;

  private:
    ReproductionLaw base_;
    // enumerable tier
    std::vector<double> hat_cum_;                 // biased atom cumulative probs
    std::vector<std::vector<double>> child_cum_;  // per-atom child cumulative weights
    // gaussian product tier
    bool gaussian_ = false;
    std::vector<double> count_cum_;  // size-biased count law, index -> count (offset by 1)
    double g_mean_ = 0, g_sd_ = 0;
};

struct SpinePath {
    std::vector<double> positions;  // S_0..S_n
    std::vector<double> xi;         // xi(w_1)..xi(w_n)
};

SpinePath sample_spine_path(const SpineLaw& sl, std::size_t n, RngStream& rng,
                            double start = 0.0);

/// Functional of the spine positions (S_1..S_n); S_0 is the start argument.
using PathFunctional = std::function<double(const std::vector<double>&)>;

struct ManyToOneExact {
    double tree_side;   // E[sum_{|u|=n} g(V(u_1)..V(u_n))], full branching recursion
    double spine_side;  // E[e^{a-S_n} g(S_1..S_n)], weighted walk enumeration
    double difference;
};

/// Both sides of the many-to-one identity, each by exhaustive enumeration
/// along its own route. Requires a normalized enumerable law; throws
/// EnumerationTooLarge past the budget (branching^n terms).
ManyToOneExact many_to_one_exact(const ReproductionLaw& law, std::size_t n,
                                 const PathFunctional& g, double start = 0.0,
                                 std::size_t budget = 20000000);

/// MC estimate of the spine side E[e^{a-S_n} g(S_1..S_n)].
Estimate many_to_one_mc(const SpineLaw& sl, std::size_t n, const PathFunctional& g,
                        std::size_t reps, RngStream& rng, double start = 0.0);

/// E[Y^(n)_{f,g}]: expected number of corridor-following particles whose
/// first crossing of the upper curve happens by generation n, estimated via
/// the weighted spine walk sum_k e^{-S_k} 1{S_k >= g_{k/n} n^{1/3}}
/// 1{S_j in I_j, j < k}.
Estimate estimate_EY(const SpineLaw& sl, const BarrierProfile& profile, std::size_t n,
                     std::size_t reps, RngStream& rng);

/// E[Z^(n)_{f,g}(x,y)]: particles ending in [x n^{1/3}, y n^{1/3}] that stayed
/// in the corridor; weighted spine walk e^{-S_n} 1{S_n in ..} 1{S_j in I_j}.
/// y < x is rejected; y == x returns 0 (empty target interval).
Estimate estimate_EZ(const SpineLaw& sl, const BarrierProfile& profile, double x, double y,
                     std::size_t n, std::size_t reps, RngStream& rng);

/// Exhaustive-enumeration versions (small n), both routes.
ManyToOneExact exact_EY(const ReproductionLaw& law, const BarrierProfile& profile, std::size_t n,
                        std::size_t budget = 20000000);
ManyToOneExact exact_EZ(const ReproductionLaw& law, const BarrierProfile& profile, double x,
                        double y, std::size_t n, std::size_t budget = 20000000);

}  // namespace brws

#endif
