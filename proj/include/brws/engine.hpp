#ifndef BRWS_ENGINE_HPP
#define BRWS_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "brws/laws.hpp"
#include "brws/profile.hpp"
#include "brws/stats.hpp"

namespace brws {

constexpr std::size_t kDefaultCapacity = 50000000;

/// Particle positions of one generation. Stored descending after every
/// selection step; step() itself emits children unsorted and apply_regime
/// restores the order (top-k selection never needs a full sort of the
/// offspring).
struct Population {
    std::vector<double> positions;
    std::size_t generation = 0;
    std::optional<std::size_t> capacity_cap;

    std::size_t size() const { return positions.size(); }
    void sort_descending();
};

/// Kill below n^{1/3} f(k/n) at generation k.
struct KillingBoundary {
    Profile f;
    std::size_t horizon;
};

/// Keep the phi(k) rightmost children at generation k.
struct TopCount {
    std::function<std::size_t(std::size_t)> phi;
    static TopCount fixed(std::size_t cap);
    static TopCount exp_cbrt(double a);  // floor(exp(a k^{1/3}))
};

/// Keep the floor(exp(n^{1/3} h(k/n))) rightmost at generation k; the run
/// starts from floor(exp(h(0) n^{1/3})) founders at 0.
struct SelectionProfile {
    Profile h;
    std::size_t horizon;
};

/// Kill below -eps * k at generation k.
struct SlopedLine {
    double eps;
};

using SurvivalRegime = std::variant<KillingBoundary, TopCount, SelectionProfile, SlopedLine>;

struct GenRecord {
    std::size_t k;
    std::size_t count;
    double min_pos, max_pos;  // 0 when count == 0
};

struct RunStats {
    std::vector<GenRecord> per_generation;
    bool survived_to_horizon = false;
    std::uint64_t rng_seed_token = 0;
};

/// Uniform-tie-break top-k: indices of the k rightmost values; ties at the
/// boundary value are resolved uniformly at random.
std::vector<std::size_t> select_top_indices(const std::vector<double>& values, std::size_t k,
                                            RngStream& rng);

/// Every parent dies and is replaced by its children (parent position plus
/// displacements). Output is unsorted; deterministic given (order, stream).
Population step(const Population& pop, const ReproductionLaw& law, RngStream& rng);

Population apply_regime(Population pop, const SurvivalRegime& regime, std::size_t k,
                        RngStream& rng);

std::size_t regime_founder_count(const SurvivalRegime& regime);

RunStats run(const SurvivalRegime& regime, const ReproductionLaw& law, std::size_t horizon,
             RngStream& rng, std::uint64_t seed_token = 0,
             std::optional<std::size_t> capacity_cap = {});

/// a <= b in the rightmost-count partial order: for every threshold, b has at
/// least as many particles above it.
bool dominates(const Population& a, const Population& b);

struct CoupledRun {
    RunStats a, b;
    std::vector<bool> order_held;  // per generation 0..horizon
    bool all_held = true;
};

/// Rank-coupled pair of branching-selection processes sharing displacement
/// blocks by rank. Requires cap_A(k) <= cap_B(k) (count regimes) or
/// threshold_A(k) >= threshold_B(k) (killing regimes) for all k <= horizon.
CoupledRun coupled_run(const SurvivalRegime& regime_a, const SurvivalRegime& regime_b,
                       const ReproductionLaw& law, std::size_t horizon, std::uint64_t seed,
                       std::optional<std::size_t> capacity_cap = {});

struct PruneOptions {
    double slack = 0.0;        // 0 -> 1.25 sigma^{2/3} n^{1/3} + 2
    std::size_t cap = 200000;  // keep at most this many lineages (by running min)
};

struct ConsistentDisplacement {
    double value;                         // max over |u|=n of min_{k<=n} V(u_k)
    std::vector<double> best_min_by_gen;  // the same statistic at every horizon <= n
    bool pruned = false;
};

/// Consistent maximal displacement via (position, running-min) particles with
/// barrier pruning; pruning only ever lowers the reported value.
ConsistentDisplacement consistent_min_displacement(const ReproductionLaw& law, std::size_t n,
                                                   RngStream& rng, PruneOptions opts = {});

struct SurvivalCell {
    double eps;
    std::size_t n;
    std::size_t reps = 0, hits = 0;
    double rho_hat = 0.0;
    Interval ci;
    double n13_log = 0.0;      // n^{-1/3} log rho_hat
    double sqrt_eps_log = 0.0; // eps^{1/2} log rho_hat
    bool zero_hits = false;
};

/// Survival frequency of the walk killed below -eps j, per (eps, n) cell.
/// Replica streams derive from (seed, cell index, replica).
std::vector<SurvivalCell> survival_scaling_experiment(
    const ReproductionLaw& law, const std::vector<std::pair<double, std::size_t>>& cells,
    std::size_t reps, std::uint64_t seed, std::size_t pop_cap = 500000);

/// One killed-BRW replica: did anything stay above n^{1/3} f(k/n) for all
/// k <= n? The population is capped at pop_cap rightmost particles, which can
/// only turn survival into extinction, so frequencies built from this are
/// lower bounds (the bias is astronomically small at these caps).
bool killed_survival_replica(const ReproductionLaw& law, const Profile& f, std::size_t n,
                             RngStream& rng, std::size_t pop_cap = 500000);

/// One corridor-counting replica: particles killed outside
/// [f_{k/n}, g_{k/n}] n^{1/3}; returns the count ending in [x,y] n^{1/3}.
/// Direct-simulation cross-check for the spine EZ estimator.
std::uint64_t corridor_count_replica(const ReproductionLaw& law, const BarrierProfile& profile,
                                     double x, double y, std::size_t n, RngStream& rng,
                                     std::size_t capacity = kDefaultCapacity);

}  // namespace brws

#endif
