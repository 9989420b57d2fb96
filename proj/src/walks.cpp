#include "brws/walks.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "brws/errors.hpp"
#include "brws/quadrature.hpp"

namespace brws {

namespace {

void validate_probs(const std::vector<double>& probs) {
    double s = 0;
    for (double p : probs) {
        if (p < 0) throw ConfigError("step law: negative probability");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ConfigError("step law: probabilities must sum to 1");
}

std::function<StepSample(RngStream&)> categorical_sampler(std::vector<double> values,
                                                          std::vector<double> probs) {
    std::vector<double> cum(probs.size());
    double c = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        c += probs[i];
        cum[i] = c;
    }
    cum.back() = 1.0;
    return [values = std::move(values), cum = std::move(cum)](RngStream& rng) -> StepSample {
        double u = rng.u01();
        auto it = std::lower_bound(cum.begin(), cum.end(), u);
        return {values[static_cast<std::size_t>(it - cum.begin())], 0.0};
    };
}

}  // namespace

StepLaw StepLaw::rademacher() { return lattice({-1, 1}, {0.5, 0.5}, 1.0); }

StepLaw StepLaw::lattice(std::vector<int> offsets, std::vector<double> probs, double spacing) {
    if (offsets.size() != probs.size() || offsets.empty())
        throw ConfigError("step law: offsets/probs size mismatch");
    validate_probs(probs);
    double mean = 0, m2 = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        double v = offsets[i] * spacing;
        mean += probs[i] * v;
        m2 += probs[i] * v * v;
    }
    if (std::abs(mean) > 1e-9) throw ConfigError("step law: E[X] must be 0");
    StepLaw law;
    std::vector<double> values(offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) values[i] = offsets[i] * spacing;
    law.sampler_ = categorical_sampler(values, probs);
    law.lattice_ = Lattice{spacing, std::move(offsets), std::move(probs)};
    law.sigma2_ = m2 - mean * mean;
    return law;
}

StepLaw StepLaw::gaussian(double sd) {
    if (!(sd > 0)) throw ConfigError("step law: sd must be positive");
    StepLaw law;
    law.sampler_ = [sd](RngStream& rng) -> StepSample { return {rng.normal(0.0, sd), 0.0}; };
    law.sigma2_ = sd * sd;
    return law;
}

StepLaw StepLaw::finite(std::vector<double> values, std::vector<double> probs) {
    if (values.size() != probs.size() || values.empty())
        throw ConfigError("step law: values/probs size mismatch");
    validate_probs(probs);
    double mean = 0, m2 = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        mean += probs[i] * values[i];
        m2 += probs[i] * values[i] * values[i];
    }
    if (std::abs(mean) > 1e-9) throw ConfigError("step law: E[X] must be 0");
    StepLaw law;
    law.sampler_ = categorical_sampler(values, probs);
    law.sigma2_ = m2 - mean * mean;
    return law;
}

StepLaw StepLaw::from_sampler(std::function<double(RngStream&)> fn, double sigma2) {
    StepLaw law;
    law.sampler_ = [fn = std::move(fn)](RngStream& rng) -> StepSample { return {fn(rng), 0.0}; };
    law.sigma2_ = sigma2;
    return law;
}

namespace {

// exact integral of 1/width^2 over one linear segment; width linear from w0
// to w1 over length h. Valid identity for both slanted and flat widths:
// int_0^h ds / (w0 + (w1-w0) s/h)^2 = h / (w0 w1).
double segment_inv_sq(double h, double w0, double w1) { return h / (w0 * w1); }

// dyadic refinement into an endpoint where the width vanishes integrably.
// Integrates phi over (a, a+len] going towards a (or mirrored), excluding the
// endpoint itself. Throws if contributions do not decay geometrically.
double dyadic_tail(const std::function<double(double)>& phi, double endpoint, double len,
                   bool endpoint_is_left, double rel_tol) {
    double total = 0.0;
    double prev = INFINITY;
    double h = len;
    for (int k = 0; k < 4000; ++k) {
        double far = endpoint_is_left ? endpoint + h : endpoint - h;
        double near = endpoint_is_left ? endpoint + 0.5 * h : endpoint - 0.5 * h;
        double c = endpoint_is_left ? gauss_legendre(phi, near, far, 2)
                                    : gauss_legendre(phi, far, near, 2);
        total += c;
        if (k > 8 && c >= prev * 0.9995)
            throw NumericsError("mogulskii_rate: non-integrable width vanishing at endpoint");
        if (c < rel_tol * std::max(total, 1e-300) || h < 1e-300) break;
        prev = c;
        h *= 0.5;
    }
    return total;
}

}  // namespace

RateInfo mogulskii_rate_info(const BarrierProfile& profile, double t, double sigma2) {
    if (t < 0 || t > 1) throw ConfigError("mogulskii_rate: t must lie in [0,1]");
    RateInfo info{0.0, false, false};
    if (t == 0) return info;
    const double coeff = 0.5 * M_PI * M_PI * sigma2;

    if (profile.lower.is_table() && profile.upper.is_table()) {
        // union of knot sets within [0,t]; exact per-segment formula
        std::set<double> ks{0.0, t};
        for (double x : profile.lower.knots_t())
            if (x > 0 && x < t) ks.insert(x);
        for (double x : profile.upper.knots_t())
            if (x > 0 && x < t) ks.insert(x);
        std::vector<double> grid(ks.begin(), ks.end());
        double sum = 0;
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            double w0 = profile.width(grid[i]);
            double w1 = profile.width(grid[i + 1]);
            if (!(w0 > 0.0) || !(w1 > 0.0))
                throw NumericsError(
                    "mogulskii_rate: width vanishes on a table segment (linear touch is "
                    "non-integrable)");
            sum += segment_inv_sq(grid[i + 1] - grid[i], w0, w1);
        }
        info.value = coeff * sum;
        return info;
    }

    auto phi = [&profile](double s) {
        double w = profile.width(s);
        return 1.0 / (w * w);
    };
    // interior positivity check
    const std::size_t grid_n = 512;
    for (std::size_t i = 1; i < grid_n; ++i) {
        double s = t * static_cast<double>(i) / static_cast<double>(grid_n);
        if (!(profile.width(s) > 0.0))
            throw NumericsError("mogulskii_rate: width vanishes in the interior");
    }
    double w_start = profile.width(0.0), w_end = profile.width(t);
    if (w_start < 0 || w_end < 0) throw NumericsError("mogulskii_rate: negative width");
    info.singular_at_start = (w_start == 0.0);
    info.singular_at_end = (w_end == 0.0);

    double a = 0.0, b = t;
    double sum = 0.0;
    const double cut = 0.03125 * t;
    if (info.singular_at_start) {
        sum += dyadic_tail(phi, 0.0, cut, true, 1e-13);
        a = cut;
    }
    if (info.singular_at_end) {
        sum += dyadic_tail(phi, t, cut, false, 1e-13);
        b = t - cut;
    }
    if (b > a) sum += adaptive_simpson(phi, a, b, 1e-9);
    info.value = coeff * sum;
    return info;
}

double mogulskii_rate(const BarrierProfile& profile, double t, double sigma2) {
    return mogulskii_rate_info(profile, t, sigma2).value;
}

ConfinementEstimate mc_confinement_prob(const StepLaw& step, const BarrierProfile& profile,
                                        std::size_t n, double a_n, double start_z,
                                        std::optional<std::pair<double, double>> target,
                                        bool with_marks, std::size_t reps, RngStream& rng) {
    if (n == 0) throw ConfigError("mc_confinement_prob: n must be >= 1");
    std::vector<double> lo(n + 1), hi(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        double s = static_cast<double>(j) / static_cast<double>(n);
        lo[j] = profile.lower(s) * a_n;
        hi[j] = profile.upper(s) * a_n;
    }
    double s0 = start_z * a_n;
    if (s0 < lo[0] || s0 > hi[0])
        throw ConfigError("mc_confinement_prob: start lies outside the corridor at time 0");
    double tlo = 0, thi = 0;
    if (target) {
        tlo = target->first * a_n;
        thi = target->second * a_n;
    }
    const double mark_cap = static_cast<double>(n);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        double s = s0;
        bool ok = true;
        for (std::size_t j = 1; j <= n; ++j) {
            StepSample smp = step.draw(rng);
            if (with_marks && smp.mark > mark_cap) {
                ok = false;
                break;
            }
            s += smp.x;
            if (s < lo[j] || s > hi[j]) {
                ok = false;
                break;
            }
        }
        if (ok && target && (s < tlo || s > thi)) ok = false;
        if (ok) ++hits;
    }
    ConfinementEstimate out;
    out.hits = hits;
    out.reps = reps;
    out.p = reps ? static_cast<double>(hits) / static_cast<double>(reps) : 0.0;
    out.ci = wilson_ci(hits, reps);
    out.zero_hits = (hits == 0);
    return out;
}

double exact_confinement_dp(const StepLaw& step, const std::vector<long long>& lower,
                            const std::vector<long long>& upper,
                            std::optional<std::pair<long long, long long>> target,
                            long long start, std::size_t width_budget) {
    if (!step.lattice_info()) throw ConfigError("exact_confinement_dp: lattice step law required");
    if (lower.size() != upper.size() || lower.empty())
        throw ConfigError("exact_confinement_dp: barrier sequences must match and be non-empty");
    const auto& lat = *step.lattice_info();
    const std::size_t n = lower.size() - 1;
    if (start < lower[0] || start > upper[0]) return 0.0;

    long long lo = lower[0], hi = upper[0];
    if (hi < lo) return 0.0;
    std::vector<double> cur(static_cast<std::size_t>(hi - lo + 1), 0.0);
    cur[static_cast<std::size_t>(start - lo)] = 1.0;

    for (std::size_t j = 1; j <= n; ++j) {
        long long nlo = lower[j], nhi = upper[j];
        if (nhi < nlo) return 0.0;
        std::size_t width = static_cast<std::size_t>(nhi - nlo + 1);
        if (width > width_budget)
            throw EnumerationTooLarge("exact_confinement_dp: corridor width exceeds budget");
        std::vector<double> nxt(width, 0.0);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            double p = cur[i];
            if (p == 0.0) continue;
            long long pos = lo + static_cast<long long>(i);
            for (std::size_t o = 0; o < lat.offsets.size(); ++o) {
                long long np = pos + lat.offsets[o];
                if (np < nlo || np > nhi) continue;
                nxt[static_cast<std::size_t>(np - nlo)] += p * lat.probs[o];
            }
        }
        cur.swap(nxt);
        lo = nlo;
        hi = nhi;
    }

    double total = 0.0;
    if (target) {
        for (long long s = std::max(lo, target->first); s <= std::min(hi, target->second); ++s)
            total += cur[static_cast<std::size_t>(s - lo)];
    } else {
        for (double p : cur) total += p;
    }
    return total;
}

void make_integer_corridor(const BarrierProfile& profile, std::size_t n, double a_n,
                           double spacing, std::vector<long long>& lower,
                           std::vector<long long>& upper) {
    lower.resize(n + 1);
    upper.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        double s = static_cast<double>(j) / static_cast<double>(n);
        double lv = profile.lower(s) * a_n / spacing;
        double uv = profile.upper(s) * a_n / spacing;
        double nl = 1e-9 + 1e-12 * std::abs(lv);
        double nu = 1e-9 + 1e-12 * std::abs(uv);
        lower[j] = static_cast<long long>(std::ceil(lv - nl));
        upper[j] = static_cast<long long>(std::floor(uv + nu));
    }
}

std::string RateReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "n,a_n,estimate,stderr,scaled_log,target_constant\n";
    for (const auto& r : rows) {
        os << r.n << ',' << r.a_n << ',' << r.estimate << ',' << r.stderror << ','
           << r.scaled_log << ',' << r.target << '\n';
    }
    return os.str();
}

RateReport rate_convergence_report(const StepLaw& step, const BarrierProfile& profile,
                                   const std::vector<std::size_t>& n_list, double sigma2,
                                   std::function<double(std::size_t)> a_rule, std::size_t mc_reps,
                                   RngStream* rng, std::optional<std::pair<double, double>> target,
                                   double start_z) {
    if (!a_rule) a_rule = [](std::size_t n) { return std::cbrt(static_cast<double>(n)); };
    RateReport rep;
    rep.target_constant = -mogulskii_rate(profile, 1.0, sigma2);
    for (std::size_t n : n_list) {
        double a_n = a_rule(n);
        RateRow row{};
        row.n = n;
        row.a_n = a_n;
        row.target = rep.target_constant;
        if (step.lattice_info() && mc_reps == 0) {
            std::vector<long long> lo, hi;
            make_integer_corridor(profile, n, a_n, step.lattice_info()->spacing, lo, hi);
            std::optional<std::pair<long long, long long>> itarget;
            if (target) {
                double sp = step.lattice_info()->spacing;
                itarget = {static_cast<long long>(std::ceil(target->first * a_n / sp - 1e-9)),
                           static_cast<long long>(std::floor(target->second * a_n / sp + 1e-9))};
            }
            long long istart = static_cast<long long>(
                std::llround(start_z * a_n / step.lattice_info()->spacing));
            row.estimate = exact_confinement_dp(step, lo, hi, itarget, istart);
            row.stderror = 0.0;
            row.exact = true;
        } else {
            if (!rng) throw ConfigError("rate_convergence_report: MC mode needs an RNG stream");
            auto est = mc_confinement_prob(step, profile, n, a_n, start_z, target, false, mc_reps,
                                           *rng);
            row.estimate = est.p;
            row.stderror =
                std::sqrt(est.p * (1.0 - est.p) / std::max<std::size_t>(1, est.reps));
            row.exact = false;
        }
        row.scaled_log = (row.estimate > 0.0)
                             ? a_n * a_n / static_cast<double>(n) * std::log(row.estimate)
                             : -INFINITY;
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace brws
