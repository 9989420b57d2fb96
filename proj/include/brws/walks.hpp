#ifndef BRWS_WALKS_HPP
#define BRWS_WALKS_HPP

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brws/profile.hpp"
#include "brws/rng.hpp"
#include "brws/stats.hpp"

namespace brws {

struct StepSample {
    double x;
    double mark;  // xi >= 0; 0 when the law carries no marks
};

/// One step of a centred random walk, optionally on a lattice (enabling the
/// exact DP oracle) and optionally enriched with a nonnegative mark.
class StepLaw {
  public:
    static StepLaw rademacher();  // +-1 with prob 1/2, spacing 1
    static StepLaw lattice(std::vector<int> offsets, std::vector<double> probs,
                           double spacing = 1.0);
    static StepLaw gaussian(double sd);
    static StepLaw finite(std::vector<double> values, std::vector<double> probs);
    static StepLaw from_sampler(std::function<double(RngStream&)> fn, double sigma2);

    double draw_step(RngStream& rng) const { return sampler_(rng).x; }
    StepSample draw(RngStream& rng) const { return sampler_(rng); }

    /// Replace the sampler by a joint (step, mark) sampler. sigma2 unchanged.
    void set_joint_sampler(std::function<StepSample(RngStream&)> fn) {
        sampler_ = std::move(fn);
        has_marks_ = true;
    }
    bool has_marks() const { return has_marks_; }

    double sigma2() const { return sigma2_; }

    struct Lattice {
        double spacing;
        std::vector<int> offsets;
        std::vector<double> probs;
    };
    const std::optional<Lattice>& lattice_info() const { return lattice_; }

  private:
    StepLaw() = default;
    std::function<StepSample(RngStream&)> sampler_;
    std::optional<Lattice> lattice_;
    double sigma2_ = 0.0;
    bool has_marks_ = false;
};

struct RateInfo {
    double value;
    bool singular_at_start = false;  // width -> 0 at s = 0, integrable
    bool singular_at_end = false;    // width -> 0 at s = t, integrable
};

/// H_t(f,g) = (pi^2 sigma^2 / 2) * int_0^t ds / (g_s - f_s)^2.
/// Piecewise-linear tables integrate segment-exactly; closed forms use
/// adaptive quadrature (relative error <= 1e-8) with dyadic refinement into
/// integrable endpoint singularities. Width vanishing away from an endpoint
/// throws NumericsError.
RateInfo mogulskii_rate_info(const BarrierProfile& profile, double t, double sigma2);
double mogulskii_rate(const BarrierProfile& profile, double t, double sigma2);

struct ConfinementEstimate {
    double p = 0.0;
    Interval ci;  // Wilson
    std::size_t hits = 0, reps = 0;
    bool zero_hits = false;
};

/// P_{z a_n}[ S_n/a_n in [x,y]; S_j/a_n in [f_{j/n}, g_{j/n}] for j <= n; (marks <= n) ]
ConfinementEstimate mc_confinement_prob(const StepLaw& step, const BarrierProfile& profile,
                                        std::size_t n, double a_n, double start_z,
                                        std::optional<std::pair<double, double>> target,
                                        bool with_marks, std::size_t reps, RngStream& rng);

/// Exact corridor probability for a finitely supported lattice walk by
/// forward DP; barriers are closed integer bounds per generation
/// (lower/upper of size n+1). A start outside the corridor returns 0.
double exact_confinement_dp(const StepLaw& step, const std::vector<long long>& lower,
                            const std::vector<long long>& upper,
                            std::optional<std::pair<long long, long long>> target = {},
                            long long start = 0, std::size_t width_budget = 20000000);

/// Integer corridor from a profile pair: bounds scaled by a_n/spacing and
/// rounded outward by a few ulps so exact lattice boundaries stay closed.
void make_integer_corridor(const BarrierProfile& profile, std::size_t n, double a_n,
                           double spacing, std::vector<long long>& lower,
                           std::vector<long long>& upper);

struct RateRow {
    std::size_t n;
    double a_n;
    double estimate;
    double stderror;  // 0 for DP-exact rows
    bool exact;
    double scaled_log;  // (a_n^2/n) log P
    double target;      // -H_1(f,g)
};

struct RateReport {
    std::vector<RateRow> rows;
    double target_constant;
    std::string to_csv() const;
};

/// Scaled log-probability trend table against the small-deviation limit.
/// a_rule defaults to n^{1/3} when empty. mc_reps == 0 demands a lattice law
/// (DP-exact rows); otherwise MC rows are produced where DP is unavailable.
RateReport rate_convergence_report(const StepLaw& step, const BarrierProfile& profile,
                                   const std::vector<std::size_t>& n_list, double sigma2,
                                   std::function<double(std::size_t)> a_rule = {},
                                   std::size_t mc_reps = 0, RngStream* rng = nullptr,
                                   std::optional<std::pair<double, double>> target = {},
                                   double start_z = 0.0);

}  // namespace brws

#endif
