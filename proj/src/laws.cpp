#include "brws/laws.hpp"

#include <algorithm>
#include <cmath>

#include "brws/errors.hpp"
#include "brws/stats.hpp"

namespace brws {

namespace {

void validate_atoms(const std::vector<LawAtom>& atoms) {
    if (atoms.empty()) throw ConfigError("law: empty atom list");
    double total = 0.0;
    double sq_mass = 0.0;  // E[sum l^2 e^l]
    for (const auto& a : atoms) {
        if (a.prob < 0) throw ConfigError("law: negative atom probability");
        if (a.displacements.empty())
            throw ConfigError("law: an atom with no children violates P(#L=0)=0");
        total += a.prob;
        for (double l : a.displacements) sq_mass += a.prob * l * l * std::exp(l);
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("law: atom probabilities sum to " + std::to_string(total) + ", not 1");
    if (sq_mass == 0.0)
        throw ConfigError("law: degenerate (all displacement mass at 0, sigma^2 = 0)");
}

std::array<double, 3> atom_moments(const std::vector<LawAtom>& atoms, double theta) {
    double m0 = 0, m1 = 0, m2 = 0;
    for (const auto& a : atoms) {
        for (double l : a.displacements) {
            double w = a.prob * std::exp(theta * l);
            m0 += w;
            m1 += w * l;
            m2 += w * l * l;
        }
    }
    if (!std::isfinite(m0) || !std::isfinite(m1) || !std::isfinite(m2))
        throw MomentDiverges("exp_moments: non-finite moment at theta=" + std::to_string(theta));
    return {m0, m1, m2};
}

}  // namespace

ReproductionLaw ReproductionLaw::binary_pm1(double p_up) {
    if (!(p_up > 0.0 && p_up < 1.0)) throw ConfigError("binary_pm1: p_up must be in (0,1)");
    double q = 1.0 - p_up;
    std::vector<LawAtom> atoms = {
        {p_up * p_up, {1.0, 1.0}},
        {p_up * q, {1.0, -1.0}},
        {q * p_up, {-1.0, 1.0}},
        {q * q, {-1.0, -1.0}},
    };
    ReproductionLaw law = from_atoms("binary_pm1", std::move(atoms));
    law.params_ = {{"p_up", p_up}};
    return law;
}

ReproductionLaw ReproductionLaw::from_atoms(std::string name, std::vector<LawAtom> atoms) {
    validate_atoms(atoms);
    ReproductionLaw law;
    law.name_ = std::move(name);
    law.atoms_ = std::move(atoms);
    law.cum_.reserve(law.atoms_.size());
    double c = 0.0;
    for (const auto& a : law.atoms_) {
        c += a.prob;
        law.cum_.push_back(c);
    }
    law.cum_.back() = 1.0;
    // capture by value so the closure survives copies/moves of the law
    std::vector<LawAtom> atoms_copy = law.atoms_;
    std::vector<double> cum_copy = law.cum_;
    law.sampler_ = [atoms_copy, cum_copy](RngStream& rng) {
        double u = rng.u01();
        auto it = std::lower_bound(cum_copy.begin(), cum_copy.end(), u);
        std::size_t i = static_cast<std::size_t>(it - cum_copy.begin());
        return atoms_copy[i].displacements;
    };
    std::vector<LawAtom> atoms_for_moments = law.atoms_;
    law.exact_moments_ = [atoms_for_moments](double theta) {
        return atom_moments(atoms_for_moments, theta);
    };
    return law;
}

ReproductionLaw ReproductionLaw::poisson_gaussian(double mean, double sd, double rate) {
    if (!(sd > 0)) throw ConfigError("poisson_gaussian: sd must be positive");
    if (rate < 0 || rate > 64) throw ConfigError("poisson_gaussian: rate must be in [0,64]");
    ReproductionLaw law;
    law.name_ = "poisson_gaussian";
    law.params_ = {{"mean", mean}, {"sd", sd}, {"rate", rate}};
    law.gauss_ = GaussianProduct{rate, mean, sd};
    law.sampler_ = [mean, sd, rate](RngStream& rng) {
        std::uint64_t n = 1 + rng.poisson(rate);
        std::vector<double> out(n);
        for (auto& x : out) x = rng.normal(mean, sd);
        return out;
    };
    double m = 1.0 + rate;  // E[#L]
    law.exact_moments_ = [mean, sd, m](double theta) -> std::array<double, 3> {
        double mg = std::exp(theta * mean + 0.5 * theta * theta * sd * sd);
        if (!std::isfinite(mg)) throw MomentDiverges("poisson_gaussian: mgf overflow");
        double mu1 = mean + theta * sd * sd;
        return {m * mg, m * mu1 * mg, m * (mu1 * mu1 + sd * sd) * mg};
    };
    return law;
}

ReproductionLaw ReproductionLaw::from_sampler(std::string name,
                                              std::function<std::vector<double>(RngStream&)> fn) {
    ReproductionLaw law;
    law.name_ = std::move(name);
    law.sampler_ = std::move(fn);
    return law;
}

std::array<double, 3> ReproductionLaw::exp_moments(double theta) const {
    if (!exact_moments_) throw NumericsError("law '" + name_ + "' has no exact moments");
    return exact_moments_(theta);
}

std::array<double, 3> ReproductionLaw::exp_moments_mc(double theta, std::size_t reps,
                                                      RngStream& rng,
                                                      std::array<double, 3>* se) const {
    MeanVar a0, a1, a2;
    for (std::size_t r = 0; r < reps; ++r) {
        auto ls = sample(rng);
        double s0 = 0, s1 = 0, s2 = 0;
        for (double l : ls) {
            double w = std::exp(theta * l);
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        if (!std::isfinite(s0) || !std::isfinite(s2))
            throw MomentDiverges("exp_moments_mc: non-finite sample at theta=" +
                                 std::to_string(theta));
        a0.add(s0);
        a1.add(s1);
        a2.add(s2);
    }
    if (se) *se = {a0.stderror(), a1.stderror(), a2.stderror()};
    return {a0.mean(), a1.mean(), a2.mean()};
}

double ReproductionLaw::mean_offspring() const {
    if (enumerable()) {
        double m = 0;
        for (const auto& a : atoms_) m += a.prob * static_cast<double>(a.displacements.size());
        return m;
    }
    if (gauss_) return 1.0 + gauss_->rate;
    throw NumericsError("mean_offspring: unavailable for sampler-only law");
}

ReproductionLaw ReproductionLaw::normalized(const BoundaryForm& bf) const {
    const double th = bf.theta_star, ks = bf.kappa_star;
    if (enumerable()) {
        std::vector<LawAtom> atoms = atoms_;
        for (auto& a : atoms)
            for (auto& l : a.displacements) l = th * l - ks;
        ReproductionLaw law = from_atoms(name_ + "_normalized", std::move(atoms));
        law.params_ = params_;
        law.params_["normalized_theta_star"] = th;
        return law;
    }
    if (gauss_) {
        ReproductionLaw law =
            poisson_gaussian(th * gauss_->mean - ks, th * gauss_->sd, gauss_->rate);
        law.name_ = name_ + "_normalized";
        law.params_["normalized_theta_star"] = th;
        return law;
    }
    throw NumericsError("normalized: sampler-only law cannot be transformed exactly");
}

bool ReproductionLaw::is_boundary_normalized(double tol) const {
    if (!has_exact_moments()) return false;
    auto m = exp_moments(1.0);
    return std::abs(m[0] - 1.0) <= tol && std::abs(m[1]) <= tol;
}

KappaResult kappa(const ReproductionLaw& law, double theta, std::size_t mc_budget,
                  RngStream* rng) {
    if (law.has_exact_moments()) {
        auto m = law.exp_moments(theta);
        if (!(m[0] > 0) || !std::isfinite(m[0]))
            throw MomentDiverges("kappa: E[sum e^{theta l}] not finite/positive");
        return {std::log(m[0]), 0.0, true};
    }
    if (mc_budget == 0 || rng == nullptr)
        throw ConfigError("kappa: sampler-only law needs a Monte Carlo budget and stream");
    std::array<double, 3> se;
    auto m = law.exp_moments_mc(theta, mc_budget, *rng, &se);
    if (!(m[0] > 0)) throw MomentDiverges("kappa: empirical moment not positive");
    // delta method for log
    return {std::log(m[0]), se[0] / m[0], false};
}

namespace {

// residual r(theta) = theta kappa'(theta) - kappa(theta), with kappa' = m1/m0
double boundary_residual(const ReproductionLaw& law, double theta, std::size_t mc_budget,
                         RngStream* rng) {
    std::array<double, 3> m;
    if (law.has_exact_moments()) {
        m = law.exp_moments(theta);
    } else {
        if (rng == nullptr)
            throw ConfigError("normalize_to_boundary: sampler-only law needs an RNG stream");
        m = law.exp_moments_mc(theta, mc_budget, *rng);
    }
    if (!(m[0] > 0) || !std::isfinite(m[0]))
        throw MomentDiverges("normalize_to_boundary: moment diverges at theta=" +
                             std::to_string(theta));
    return theta * m[1] / m[0] - std::log(m[0]);
}

}  // namespace

BoundaryForm normalize_to_boundary(const ReproductionLaw& law, const NormalizeOptions& opts,
                                   RngStream* rng) {
    const double lo = std::log(opts.theta_lo), hi = std::log(opts.theta_hi);
    double prev_theta = opts.theta_lo;
    double prev_r = boundary_residual(law, prev_theta, opts.mc_budget, rng);
    double bl = 0, bh = 0;
    bool bracketed = false;
    for (std::size_t i = 1; i < opts.scan_points; ++i) {
        double th = std::exp(lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(opts.scan_points - 1));
        double r = boundary_residual(law, th, opts.mc_budget, rng);
        // require a genuine crossing: strictly negative then strictly positive.
        // At large theta the residual can underflow to ~0 by cancellation
        // without ever being a root (supercritical laws with a critical
        // rightmost-particle count); that must not be mistaken for one.
        if (prev_r < -opts.residual_tol && r > opts.residual_tol) {
            bl = prev_theta;
            bh = th;
            bracketed = true;
            break;
        }
        prev_theta = th;
        prev_r = r;
    }
    if (!bracketed)
        throw NoBoundaryNormalization(
            "no boundary normalization found: theta*kappa'(theta)-kappa(theta) has no sign "
            "change on [" +
            std::to_string(opts.theta_lo) + ", " + std::to_string(opts.theta_hi) + "]");

    double rl = boundary_residual(law, bl, opts.mc_budget, rng);
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (bl + bh);
        double rm = boundary_residual(law, mid, opts.mc_budget, rng);
        if ((rl < 0) == (rm < 0)) {
            bl = mid;
            rl = rm;
        } else {
            bh = mid;
        }
        if (std::abs(rm) < opts.residual_tol && (bh - bl) < 1e-12 * std::max(1.0, bh)) break;
    }
    double theta_star = 0.5 * (bl + bh);
    if (std::abs(boundary_residual(law, theta_star, opts.mc_budget, rng)) > opts.residual_tol &&
        law.has_exact_moments())
        throw NumericsError("normalize_to_boundary: bisection failed to meet residual tolerance");

    std::array<double, 3> m;
    if (law.has_exact_moments()) {
        m = law.exp_moments(theta_star);
    } else {
        m = law.exp_moments_mc(theta_star, opts.mc_budget, *rng);
    }
    double kappa_star = std::log(m[0]);
    double kp = m[1] / m[0];
    double kpp = m[2] / m[0] - kp * kp;  // kappa''(theta*)
    double sigma2 = theta_star * theta_star * kpp;
    if (!(sigma2 > 1e-12))
        throw NumericsError("normalize_to_boundary: degenerate normalization (sigma^2 ~ 0)");
    return {theta_star, kappa_star, sigma2};
}

ResidualTriple boundary_residuals(const ReproductionLaw& law, std::size_t mc_budget,
                                  RngStream* rng) {
    if (law.has_exact_moments()) {
        auto m = law.exp_moments(1.0);
        return {m[0] - 1.0, m[1], m[2], 0, 0, 0, true};
    }
    if (mc_budget == 0 || rng == nullptr)
        throw ConfigError("boundary_residuals: sampler-only law needs a Monte Carlo budget");
    std::array<double, 3> se;
    auto m = law.exp_moments_mc(1.0, mc_budget, *rng, &se);
    return {m[0] - 1.0, m[1], m[2], se[0], se[1], se[2], false};
}

}  // namespace brws
