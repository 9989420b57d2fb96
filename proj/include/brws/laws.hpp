#ifndef BRWS_LAWS_HPP
#define BRWS_LAWS_HPP

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "brws/rng.hpp"

namespace brws {

/// One outcome of a finite-support point process: the multiset of child
/// displacements and its probability.
struct LawAtom {
    double prob;
    std::vector<double> displacements;
};

struct BoundaryForm {
    double theta_star;   // tilt
    double kappa_star;   // kappa(theta*)
    double sigma2;       // E[sum l^2 e^l] of the normalized law
};

/// Reproduction point-process law. Immutable after construction and safe to
/// share across threads; sampling takes an explicit stream.
///
/// Three capability tiers, checked by the operations below:
///   - enumerable: full (realization, probability) atom list;
///   - exact moments: closed-form E[sum l^k e^{theta l}] (all enumerable laws,
///     plus poisson_gaussian);
///   - sampler only: Monte Carlo with reported standard errors.
class ReproductionLaw {
  public:
    /// Two independent children, each displaced +1 w.p. p_up and -1 otherwise.
    /// p_up must be in (0, 1/2) for a boundary normalization to exist; the
    /// symmetric p_up = 1/2 law is constructible but not normalizable.
    static ReproductionLaw binary_pm1(double p_up = 0.25);

    /// Finite-support law from explicit atoms (config kind "table").
    static ReproductionLaw from_atoms(std::string name, std::vector<LawAtom> atoms);

    /// 1 + Poisson(rate) children, iid Normal(mean, sd^2) displacements.
    /// Sampler-only for enumeration, but carries exact exponential moments.
    static ReproductionLaw poisson_gaussian(double mean, double sd, double rate = 1.0);

    /// Pure sampler tier: kappa, normalization, and residuals all go through
    /// Monte Carlo with reported standard errors.
    static ReproductionLaw from_sampler(std::string name,
                                        std::function<std::vector<double>(RngStream&)> fn);

    const std::string& name() const { return name_; }
    const nlohmann::json& params() const { return params_; }

    bool enumerable() const { return !atoms_.empty(); }
    const std::vector<LawAtom>& atoms() const { return atoms_; }

    std::vector<double> sample(RngStream& rng) const { return sampler_(rng); }

    bool has_exact_moments() const { return static_cast<bool>(exact_moments_); }
    /// (E[sum e^{tl}], E[sum l e^{tl}], E[sum l^2 e^{tl}]); throws without the
    /// exact tier.
    std::array<double, 3> exp_moments(double theta) const;
    /// MC estimate of the same triple; per-component standard errors in *se.
    std::array<double, 3> exp_moments_mc(double theta, std::size_t reps, RngStream& rng,
                                         std::array<double, 3>* se = nullptr) const;

    double mean_offspring() const;  // E[#L]; exact tier required

    /// Apply l -> theta* l - kappa* per child. Stays within the family.
    ReproductionLaw normalized(const BoundaryForm& bf) const;

    bool is_boundary_normalized(double tol = 1e-9) const;

    /// Product structure (child count independent of iid displacements with a
    /// Gaussian mark), used by the spine sampler for non-enumerable laws.
    struct GaussianProduct {
        double rate;  // count = 1 + Poisson(rate)
        double mean, sd;
    };
    const std::optional<GaussianProduct>& gaussian_product() const { return gauss_; }

  private:
    ReproductionLaw() = default;
    std::string name_;
    nlohmann::json params_;
    std::vector<LawAtom> atoms_;
    std::function<std::vector<double>(RngStream&)> sampler_;
    std::function<std::array<double, 3>(double)> exact_moments_;
    std::optional<GaussianProduct> gauss_;
    // cumulative atom probabilities for sampling enumerable laws
    std::vector<double> cum_;
};

struct KappaResult {
    double value;
    double stderror;  // 0 when exact
    bool exact;
};

/// kappa(theta) = log E[sum_{l in L} e^{theta l}]. Exact when the law has
/// exact moments, otherwise MC with mc_budget samples.
KappaResult kappa(const ReproductionLaw& law, double theta, std::size_t mc_budget = 0,
                  RngStream* rng = nullptr);

struct NormalizeOptions {
    double theta_lo = 1e-3;
    double theta_hi = 50.0;
    std::size_t scan_points = 200;      // log grid
    double residual_tol = 1e-10;        // on theta kappa'(theta) - kappa(theta)
    std::size_t mc_budget = 200000;     // per moment evaluation, sampler-only laws
};

/// Find theta* solving theta kappa'(theta) = kappa(theta) by a bracketing
/// scan over a log grid and bisection; also returns kappa(theta*) and the
/// sigma^2 of the normalized law. Throws NoBoundaryNormalization when the
/// residual never changes sign on the scan.
BoundaryForm normalize_to_boundary(const ReproductionLaw& law, const NormalizeOptions& opts = {},
                                   RngStream* rng = nullptr);

struct ResidualTriple {
    double r1, r2, sigma2;          // E[sum e^l]-1, E[sum l e^l], E[sum l^2 e^l]
    double se1 = 0, se2 = 0, se3 = 0;
    bool exact = true;
};

/// Residuals of the boundary-case conditions for the law as given.
ResidualTriple boundary_residuals(const ReproductionLaw& law, std::size_t mc_budget = 0,
                                  RngStream* rng = nullptr);

}  // namespace brws

#endif
