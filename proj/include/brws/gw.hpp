#ifndef BRWS_GW_HPP
#define BRWS_GW_HPP

#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include "brws/laws.hpp"
#include "brws/rng.hpp"
#include "brws/stats.hpp"

namespace brws {

/// Offspring law of a Galton-Watson process with derived quantities:
/// m (mean), b (minimum support), q (extinction probability, smallest root
/// of f(q) = q), alpha = -log f'(q) / log m.
class OffspringLaw {
  public:
    static OffspringLaw from_pmf(const std::map<unsigned, double>& pmf);

    const std::vector<std::pair<unsigned, double>>& atoms() const { return atoms_; }
    double mean() const { return m_; }
    unsigned min_support() const { return b_; }
    unsigned max_support() const { return atoms_.back().first; }
    double extinction_prob() const { return q_; }
    double alpha() const;  // requires m > 1
    bool degenerate() const { return atoms_.size() == 1; }

    double pgf(double s) const;
    double pgf_derivative(double s) const;
    std::complex<double> pgf(std::complex<double> s) const;

  private:
    OffspringLaw() = default;
    std::vector<std::pair<unsigned, double>> atoms_;
    double m_ = 0, q_ = 1;
    unsigned b_ = 0;
};

/// k-fold iterate of the generating function; E[s^{Z_k}].
double iterate_f(const OffspringLaw& law, double s, std::size_t k);

/// One trajectory endpoint Z_n. Exact in distribution (per-atom binomial
/// splits of the current population, no normal approximation). Throws on
/// 64-bit overflow.
std::uint64_t simulate_Z(const OffspringLaw& law, std::size_t n, RngStream& rng);

enum class TailCase { b0, b1, b2plus };

struct TailBound {
    double value;
    TailCase tag;
};

/// The left-tail upper bound with a caller-supplied constant C:
///   b=0:  q + C z^{alpha/(alpha+1)}
///   b=1:  C z^alpha
///   b>=2: exp(-C z^{-log b/(log m - log b)})
/// Requires a supercritical non-degenerate law.
TailBound left_tail_bound(const OffspringLaw& law, double z, double C = 1.0);

struct TailEmpirical {
    double freq;
    Interval ci;
    std::size_t hits, reps;
    std::uint64_t threshold;  // floor(z m^n)
};

TailEmpirical left_tail_empirical(const OffspringLaw& law, double z, std::size_t n,
                                  std::size_t reps, RngStream& rng);

/// log P(Z_n <= floor(z m^n)), exact via saddle-point numerical coefficient
/// extraction of the iterated generating function. Handles probabilities far
/// below Monte Carlo reach. Returns -inf when the threshold is below the
/// deterministic minimum b^n.
double left_tail_exact_log(const OffspringLaw& law, double z, std::size_t n);

/// P(Z_n <= K) by truncated pmf composition (exact, b >= 1 only); throws
/// EnumerationTooLarge past the operation budget.
double left_tail_exact_dp(const OffspringLaw& law, std::uint64_t K, std::size_t n,
                          std::size_t op_budget = 4000000000ULL);

struct GrowthFloorResult {
    double truncated_mean;             // E[sum_l 1{l >= -a}]
    std::vector<std::uint64_t> counts; // survivors at generation n, per replica
    double reported_rho;               // largest grid rho with freq(count >= rho^n) >= threshold
    double freq_at_reported;
};

/// Frequency that the number of particles staying above -j a at every
/// generation j <= n is at least rho^n. Counts are capped (rightmost kept),
/// which can only lower them, so frequencies are lower bounds.
GrowthFloorResult growth_floor_experiment(const ReproductionLaw& law, double a, std::size_t n,
                                          std::size_t reps, RngStream& rng,
                                          double freq_threshold = 0.95,
                                          std::size_t pop_cap = 2000000);

/// Empirical frequency of {count >= rho^n} from a counts vector.
double growth_floor_frequency(const std::vector<std::uint64_t>& counts, double rho,
                              std::size_t n);

}  // namespace brws

#endif
