#include "brws/spine.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "brws/errors.hpp"

namespace brws {

double xi_of(const std::vector<double>& rel) {
    if (rel.empty()) return 0.0;
    double m = 0.0;  // the implicit "1" term corresponds to exponent 0
    for (double d : rel) m = std::max(m, d);
    double s = std::exp(-m);
    for (double d : rel) s += std::exp(d - m);
    return m + std::log(s);
}

SpineLaw::SpineLaw(ReproductionLaw base) : base_(std::move(base)) {
    if (!base_.is_boundary_normalized(1e-8))
        throw ConfigError("SpineLaw: base law must be boundary-normalized");
    if (base_.enumerable()) {
        double total = 0.0;
        for (const auto& a : base_.atoms()) {
            double w = 0.0;
            std::vector<double> cc;
            cc.reserve(a.displacements.size());
            for (double l : a.displacements) {
                w += std::exp(l);
                cc.push_back(w);
            }
            for (auto& c : cc) c /= w;
            cc.back() = 1.0;
            child_cum_.push_back(std::move(cc));
            total += a.prob * w;
            hat_cum_.push_back(total);
        }
        // E[sum e^l] = 1 for a normalized law; tolerate rounding
        if (std::abs(total - 1.0) > 1e-8)
            throw NumericsError("SpineLaw: biased atom mass != 1 (law not normalized?)");
        for (auto& c : hat_cum_) c /= total;
        hat_cum_.back() = 1.0;
        return;
    }
    if (base_.gaussian_product()) {
        gaussian_ = true;
        const auto& gp = *base_.gaussian_product();
        g_mean_ = gp.mean;
        g_sd_ = gp.sd;
        // size-biased count pmf: p^(k) ~ k * P(1 + Poisson(rate) = k)
        double lr = gp.rate;
        std::vector<double> w;
        double pk = std::exp(-lr);  // P(Poisson = 0)
        double total = 0.0;
        for (std::size_t j = 0;; ++j) {
            double count = static_cast<double>(j + 1);
            double mass = count * pk;
            total += mass;
            w.push_back(total);
            pk *= lr / static_cast<double>(j + 1);
            if (j > 10 && mass < 1e-18 * total) break;
            if (j > 4096) break;
        }
        for (auto& c : w) c /= total;
        w.back() = 1.0;
        count_cum_ = std::move(w);
        return;
    }
    throw ConfigError("SpineLaw: base law is neither enumerable nor a Gaussian product law");
}

SpineRealization SpineLaw::draw(RngStream& rng) const {
    if (!gaussian_) {
        double u = rng.u01();
        auto it = std::lower_bound(hat_cum_.begin(), hat_cum_.end(), u);
        std::size_t ai = static_cast<std::size_t>(it - hat_cum_.begin());
        const auto& cc = child_cum_[ai];
        double v = rng.u01();
        auto jt = std::lower_bound(cc.begin(), cc.end(), v);
        std::size_t ci = static_cast<std::size_t>(jt - cc.begin());
        return {base_.atoms()[ai].displacements, ci};
    }
    double u = rng.u01();
    auto it = std::lower_bound(count_cum_.begin(), count_cum_.end(), u);
    std::size_t count = static_cast<std::size_t>(it - count_cum_.begin()) + 1;
    std::size_t spine = static_cast<std::size_t>(rng.below(count));
    std::vector<double> disp(count);
    for (std::size_t i = 0; i < count; ++i)
        disp[i] = (i == spine) ? rng.normal(g_mean_ + g_sd_ * g_sd_, g_sd_)  // tilted by e^x
                               : rng.normal(g_mean_, g_sd_);
    return {std::move(disp), spine};
}

std::vector<std::pair<double, double>> SpineLaw::step_atoms() const {
    if (gaussian_) throw ConfigError("step_atoms: enumerable base required");
    std::map<double, double> grouped;
    for (const auto& a : base_.atoms())
        for (double l : a.displacements) grouped[l] += a.prob * std::exp(l);
    std::vector<std::pair<double, double>> out(grouped.begin(), grouped.end());
    return out;
}

StepLaw SpineLaw::spine_step_law(bool with_marks) const {
    StepLaw law = [&]() -> StepLaw {
        if (gaussian_) {
            // spine step of a normalized gaussian product law: tilted displacement
            double mu = g_mean_ + g_sd_ * g_sd_, sd = g_sd_;
            return StepLaw::from_sampler(
                [mu, sd](RngStream& rng) { return rng.normal(mu, sd); }, sd * sd);
        }
        auto atoms = step_atoms();
        std::vector<double> values, probs;
        for (auto& [v, w] : atoms) {
            values.push_back(v);
            probs.push_back(w);
        }
        return StepLaw::finite(std::move(values), std::move(probs));
    }();
    if (with_marks) {
        const SpineLaw self = *this;
        law.set_joint_sampler([self](RngStream& rng) -> StepSample {
            SpineRealization r = self.draw(rng);
            double step = r.displacements[r.spine_index];
            std::vector<double> rel;
            rel.reserve(r.displacements.size() - 1);
            for (std::size_t i = 0; i < r.displacements.size(); ++i)
                if (i != r.spine_index) rel.push_back(r.displacements[i] - step);
            return {step, xi_of(rel)};
        });
    }
    return law;
}

SpinePath sample_spine_path(const SpineLaw& sl, std::size_t n, RngStream& rng, double start) {
    SpinePath path;
    path.positions.reserve(n + 1);
    path.positions.push_back(start);
    path.xi.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        SpineRealization r = sl.draw(rng);
        double step = r.displacements[r.spine_index];
        std::vector<double> rel;
        rel.reserve(r.displacements.size() - 1);
        for (std::size_t i = 0; i < r.displacements.size(); ++i)
            if (i != r.spine_index) rel.push_back(r.displacements[i] - step);
        path.positions.push_back(path.positions.back() + step);
        path.xi.push_back(xi_of(rel));
    }
    return path;
}

namespace {

struct BranchOption {
    double prob;  // probability of the atom this child belongs to
    double disp;
};

std::vector<BranchOption> branch_options(const ReproductionLaw& law) {
    std::vector<BranchOption> opts;
    for (const auto& a : law.atoms())
        for (double l : a.displacements) opts.push_back({a.prob, l});
    return opts;
}

void check_budget(std::size_t branching, std::size_t n, std::size_t budget, const char* what) {
    double work = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        work *= static_cast<double>(branching);
        if (work > static_cast<double>(budget))
            throw EnumerationTooLarge(std::string(what) + ": enumeration too large (" +
                                      std::to_string(branching) + "^" + std::to_string(n) + ")");
    }
}

// spine side: E[e^{a - S_n} g(S_1..S_n)] over the exact spine-step atoms
void spine_rec(const std::vector<std::pair<double, double>>& steps, std::size_t depth,
               std::size_t n, double weight, std::vector<double>& path, double start,
               const PathFunctional& g, long double& acc) {
    if (depth == n) {
        double sn = path.empty() ? start : path.back();
        acc += static_cast<long double>(weight) * std::exp(start - sn) * g(path);
        return;
    }
    double base = path.empty() ? start : path.back();
    for (const auto& [v, w] : steps) {
        path.push_back(base + v);
        spine_rec(steps, depth + 1, n, weight * w, path, start, g, acc);
        path.pop_back();
    }
}

}  // namespace

ManyToOneExact many_to_one_exact(const ReproductionLaw& law, std::size_t n,
                                 const PathFunctional& g, double start, std::size_t budget) {
    if (!law.enumerable()) throw ConfigError("many_to_one_exact: enumerable law required");
    if (!law.is_boundary_normalized(1e-8))
        throw ConfigError("many_to_one_exact: law must be boundary-normalized");
    auto opts = branch_options(law);
    check_budget(opts.size(), n, budget, "many_to_one_exact");

    // tree route
    long double tree = 0.0;
    std::vector<double> path;
    path.reserve(n);
    if (n == 0) {
        tree = g(path);
    } else {
        // recursion with explicit start offset
        std::function<void(std::size_t, double, double)> rec = [&](std::size_t depth, double pos,
                                                                   double prob) {
            if (depth == n) {
                tree += static_cast<long double>(prob) * g(path);
                return;
            }
            for (const auto& o : opts) {
                path.push_back(pos + o.disp);
                rec(depth + 1, pos + o.disp, prob * o.prob);
                path.pop_back();
            }
        };
        rec(0, start, 1.0);
    }

    // spine route
    SpineLaw sl(law);
    auto steps = sl.step_atoms();
    check_budget(steps.size(), n, budget, "many_to_one_exact");
    long double spine = 0.0;
    std::vector<double> spath;
    spath.reserve(n);
    spine_rec(steps, 0, n, 1.0, spath, start, g, spine);

    return {static_cast<double>(tree), static_cast<double>(spine),
            static_cast<double>(tree - spine)};
}

Estimate many_to_one_mc(const SpineLaw& sl, std::size_t n, const PathFunctional& g,
                        std::size_t reps, RngStream& rng, double start) {
    MeanVar acc;
    bool any = false;
    StepLaw step = sl.spine_step_law();
    std::vector<double> path(n);
    for (std::size_t r = 0; r < reps; ++r) {
        double s = start;
        for (std::size_t k = 0; k < n; ++k) {
            s += step.draw_step(rng);
            path[k] = s;
        }
        double v = std::exp(start - s) * g(path);
        if (v != 0.0) any = true;
        acc.add(v);
    }
    return {acc.mean(), acc.stderror(), reps, !any};
}

Estimate estimate_EY(const SpineLaw& sl, const BarrierProfile& profile, std::size_t n,
                     std::size_t reps, RngStream& rng) {
    const double a13 = std::cbrt(static_cast<double>(n));
    std::vector<double> lo(n + 1), hi(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        double t = static_cast<double>(j) / static_cast<double>(n);
        lo[j] = profile.lower(t) * a13;
        hi[j] = profile.upper(t) * a13;
    }
    StepLaw step = sl.spine_step_law();
    MeanVar acc;
    bool any = false;
    for (std::size_t r = 0; r < reps; ++r) {
        double s = 0.0;
        double contrib = 0.0;
        bool inside = true;  // S_j in I_j for all j < current k
        for (std::size_t k = 1; k <= n && inside; ++k) {
            s += step.draw_step(rng);
            if (s >= hi[k]) contrib += std::exp(-s);
            inside = (s >= lo[k] && s <= hi[k]);
        }
        if (contrib != 0.0) any = true;
        acc.add(contrib);
    }
    return {acc.mean(), acc.stderror(), reps, !any};
}

Estimate estimate_EZ(const SpineLaw& sl, const BarrierProfile& profile, double x, double y,
                     std::size_t n, std::size_t reps, RngStream& rng) {
    if (y < x) throw ConfigError("estimate_EZ: invalid interval (x > y)");
    if (y == x) return {0.0, 0.0, reps, true};
    const double a13 = std::cbrt(static_cast<double>(n));
    std::vector<double> lo(n + 1), hi(n + 1);
    for (std::size_t j = 0; j <= n; ++j) {
        double t = static_cast<double>(j) / static_cast<double>(n);
        lo[j] = profile.lower(t) * a13;
        hi[j] = profile.upper(t) * a13;
    }
    StepLaw step = sl.spine_step_law();
    MeanVar acc;
    bool any = false;
    for (std::size_t r = 0; r < reps; ++r) {
        double s = 0.0;
        bool ok = true;
        for (std::size_t k = 1; k <= n; ++k) {
            s += step.draw_step(rng);
            if (s < lo[k] || s > hi[k]) {
                ok = false;
                break;
            }
        }
        double v = 0.0;
        if (ok && s >= x * a13 && s <= y * a13) v = std::exp(-s);
        if (v != 0.0) any = true;
        acc.add(v);
    }
    return {acc.mean(), acc.stderror(), reps, !any};
}

namespace {

ManyToOneExact sum_exact(std::vector<ManyToOneExact> parts) {
    long double t = 0, s = 0;
    for (const auto& p : parts) {
        t += p.tree_side;
        s += p.spine_side;
    }
    return {static_cast<double>(t), static_cast<double>(s), static_cast<double>(t - s)};
}

}  // namespace

ManyToOneExact exact_EY(const ReproductionLaw& law, const BarrierProfile& profile, std::size_t n,
                        std::size_t budget) {
    const double a13 = std::cbrt(static_cast<double>(n));
    std::vector<ManyToOneExact> parts;
    for (std::size_t k = 1; k <= n; ++k) {
        PathFunctional g = [&profile, a13, n, k](const std::vector<double>& path) -> double {
            if (path[k - 1] < profile.upper(static_cast<double>(k) / static_cast<double>(n)) * a13)
                return 0.0;
            for (std::size_t j = 1; j < k; ++j) {
                double t = static_cast<double>(j) / static_cast<double>(n);
                if (path[j - 1] < profile.lower(t) * a13 || path[j - 1] > profile.upper(t) * a13)
                    return 0.0;
            }
            return 1.0;
        };
        parts.push_back(many_to_one_exact(law, k, g, 0.0, budget));
    }
    return sum_exact(std::move(parts));
}

ManyToOneExact exact_EZ(const ReproductionLaw& law, const BarrierProfile& profile, double x,
                        double y, std::size_t n, std::size_t budget) {
    if (y < x) throw ConfigError("exact_EZ: invalid interval (x > y)");
    const double a13 = std::cbrt(static_cast<double>(n));
    PathFunctional g = [&profile, a13, n, x, y](const std::vector<double>& path) -> double {
        double sn = path[n - 1];
        if (sn < x * a13 || sn > y * a13) return 0.0;
        for (std::size_t j = 1; j <= n; ++j) {
            double t = static_cast<double>(j) / static_cast<double>(n);
            if (path[j - 1] < profile.lower(t) * a13 || path[j - 1] > profile.upper(t) * a13)
                return 0.0;
        }
        return 1.0;
    };
    return many_to_one_exact(law, n, g, 0.0, budget);
}

}  // namespace brws
