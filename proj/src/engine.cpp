#include "brws/engine.hpp"

#include <algorithm>
#include <cmath>

#include "brws/errors.hpp"

namespace brws {

void Population::sort_descending() {
    std::sort(positions.begin(), positions.end(), std::greater<double>());
}

TopCount TopCount::fixed(std::size_t cap) {
    return TopCount{[cap](std::size_t) { return cap; }};
}

TopCount TopCount::exp_cbrt(double a) {
    return TopCount{[a](std::size_t k) -> std::size_t {
        double v = std::exp(a * std::cbrt(static_cast<double>(k)));
        if (v >= 9.0e18) throw CapacityExceeded("TopCount::exp_cbrt: cap overflows 64-bit");
        return static_cast<std::size_t>(v);
    }};
}

std::vector<std::size_t> select_top_indices(const std::vector<double>& values, std::size_t k,
                                            RngStream& rng) {
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (k >= values.size()) return idx;
    if (k == 0) return {};
    // boundary value = k-th largest
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    double v_star = values[idx[k - 1]];
    std::vector<std::size_t> above, eq;
    for (std::size_t i : idx) {
        if (values[i] > v_star)
            above.push_back(i);
        else if (values[i] == v_star)
            eq.push_back(i);
    }
    std::size_t need = k - above.size();
    // uniform subset of the tied group (partial Fisher-Yates)
    std::sort(eq.begin(), eq.end());  // deterministic base order
    for (std::size_t i = 0; i < need; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.below(eq.size() - i));
        std::swap(eq[i], eq[j]);
    }
    above.insert(above.end(), eq.begin(), eq.begin() + static_cast<std::ptrdiff_t>(need));
    return above;
}

Population step(const Population& pop, const ReproductionLaw& law, RngStream& rng) {
    if (pop.positions.empty()) throw ConfigError("step: population is empty");
    Population out;
    out.generation = pop.generation + 1;
    out.capacity_cap = pop.capacity_cap;
    const std::size_t cap = pop.capacity_cap.value_or(kDefaultCapacity);
    out.positions.reserve(std::min<std::size_t>(2 * pop.positions.size() + 8, cap));
    for (double parent : pop.positions) {
        std::vector<double> children = law.sample(rng);
        if (out.positions.size() + children.size() > cap)
            throw CapacityExceeded("step: capacity cap exceeded at generation " +
                                   std::to_string(out.generation));
        for (double l : children) out.positions.push_back(parent + l);
    }
    return out;
}

namespace {

double killing_threshold(const SurvivalRegime& regime, std::size_t k) {
    if (const auto* kb = std::get_if<KillingBoundary>(&regime)) {
        double n13 = std::cbrt(static_cast<double>(kb->horizon));
        return n13 * kb->f(static_cast<double>(k) / static_cast<double>(kb->horizon));
    }
    const auto& sl = std::get<SlopedLine>(regime);
    return -sl.eps * static_cast<double>(k);
}

std::size_t count_cap(const SurvivalRegime& regime, std::size_t k) {
    if (const auto* tc = std::get_if<TopCount>(&regime)) return tc->phi(k);
    const auto& sp = std::get<SelectionProfile>(regime);
    double n13 = std::cbrt(static_cast<double>(sp.horizon));
    double v = std::exp(n13 * sp.h(static_cast<double>(k) / static_cast<double>(sp.horizon)));
    if (v >= 9.0e18) return static_cast<std::size_t>(9.0e18);
    return static_cast<std::size_t>(v);
}

bool is_count_regime(const SurvivalRegime& r) {
    return std::holds_alternative<TopCount>(r) || std::holds_alternative<SelectionProfile>(r);
}

}  // namespace

Population apply_regime(Population pop, const SurvivalRegime& regime, std::size_t k,
                        RngStream& rng) {
    if (is_count_regime(regime)) {
        std::size_t cap = count_cap(regime, k);
        if (pop.positions.size() > cap) {
            auto keep = select_top_indices(pop.positions, cap, rng);
            std::vector<double> survivors;
            survivors.reserve(keep.size());
            for (std::size_t i : keep) survivors.push_back(pop.positions[i]);
            pop.positions = std::move(survivors);
        }
        pop.sort_descending();
        return pop;
    }
    double thr = killing_threshold(regime, k);
    std::vector<double> survivors;
    survivors.reserve(pop.positions.size());
    for (double v : pop.positions)
        if (v >= thr) survivors.push_back(v);  // closed inequality
    pop.positions = std::move(survivors);
    pop.sort_descending();
    return pop;
}

std::size_t regime_founder_count(const SurvivalRegime& regime) {
    if (std::holds_alternative<TopCount>(regime))
        return std::max<std::size_t>(1, std::get<TopCount>(regime).phi(0));
    if (std::holds_alternative<SelectionProfile>(regime))
        return std::max<std::size_t>(1, count_cap(regime, 0));
    return 1;
}

namespace {

GenRecord make_record(std::size_t k, const Population& pop) {
    GenRecord rec{k, pop.positions.size(), 0.0, 0.0};
    if (!pop.positions.empty()) {
        rec.max_pos = pop.positions.front();
        rec.min_pos = pop.positions.back();
    }
    return rec;
}

}  // namespace

RunStats run(const SurvivalRegime& regime, const ReproductionLaw& law, std::size_t horizon,
             RngStream& rng, std::uint64_t seed_token, std::optional<std::size_t> capacity_cap) {
    RunStats stats;
    stats.rng_seed_token = seed_token;
    Population pop;
    pop.capacity_cap = capacity_cap;
    pop.positions.assign(regime_founder_count(regime), 0.0);
    pop = apply_regime(std::move(pop), regime, 0, rng);
    stats.per_generation.push_back(make_record(0, pop));
    for (std::size_t k = 1; k <= horizon && !pop.positions.empty(); ++k) {
        pop = step(pop, law, rng);
        pop = apply_regime(std::move(pop), regime, k, rng);
        stats.per_generation.push_back(make_record(k, pop));
    }
    stats.survived_to_horizon =
        stats.per_generation.size() == horizon + 1 && stats.per_generation.back().count > 0;
    return stats;
}

bool dominates(const Population& a, const Population& b) {
    if (a.positions.size() > b.positions.size()) return false;
    std::vector<double> av = a.positions, bv = b.positions;
    std::sort(av.begin(), av.end(), std::greater<double>());
    std::sort(bv.begin(), bv.end(), std::greater<double>());
    for (std::size_t i = 0; i < av.size(); ++i)
        if (av[i] > bv[i]) return false;
    return true;
}

CoupledRun coupled_run(const SurvivalRegime& regime_a, const SurvivalRegime& regime_b,
                       const ReproductionLaw& law, std::size_t horizon, std::uint64_t seed,
                       std::optional<std::size_t> capacity_cap) {
    const bool count_a = is_count_regime(regime_a), count_b = is_count_regime(regime_b);
    if (count_a != count_b)
        throw IncompatibleRegimes("coupled_run: cannot couple a count regime with a killing one");
    for (std::size_t k = 0; k <= horizon; ++k) {
        if (count_a) {
            if (count_cap(regime_a, k) > count_cap(regime_b, k))
                throw IncompatibleRegimes("coupled_run: cap_A(k) > cap_B(k) at k=" +
                                          std::to_string(k));
        } else {
            if (killing_threshold(regime_a, k) < killing_threshold(regime_b, k))
                throw IncompatibleRegimes("coupled_run: A must kill at least as hard as B (k=" +
                                          std::to_string(k) + ")");
        }
    }

    RngStream blocks(seed, 0xb10c5, 0);
    RngStream tie_a(seed, 0x71e, 1);
    RngStream tie_b(seed, 0x71e, 2);

    CoupledRun out;
    out.a.rng_seed_token = seed;
    out.b.rng_seed_token = seed;
    const std::size_t cap = capacity_cap.value_or(kDefaultCapacity);

    Population pa, pb;
    pa.capacity_cap = cap;
    pb.capacity_cap = cap;
    pa.positions.assign(regime_founder_count(regime_a), 0.0);
    pb.positions.assign(regime_founder_count(regime_b), 0.0);
    pa = apply_regime(std::move(pa), regime_a, 0, tie_a);
    pb = apply_regime(std::move(pb), regime_b, 0, tie_b);
    out.a.per_generation.push_back(make_record(0, pa));
    out.b.per_generation.push_back(make_record(0, pb));
    bool held = dominates(pa, pb);
    out.order_held.push_back(held);
    out.all_held = held;

    for (std::size_t k = 1; k <= horizon; ++k) {
        // shared displacement blocks indexed by rank (populations are sorted)
        std::size_t m = std::max(pa.positions.size(), pb.positions.size());
        std::vector<std::vector<double>> z(m);
        for (std::size_t j = 0; j < m; ++j) z[j] = law.sample(blocks);

        auto reproduce = [&](const Population& p, std::size_t gen) {
            Population child;
            child.generation = gen;
            child.capacity_cap = cap;
            for (std::size_t j = 0; j < p.positions.size(); ++j) {
                if (child.positions.size() + z[j].size() > cap)
                    throw CapacityExceeded("coupled_run: capacity cap exceeded at generation " +
                                           std::to_string(gen));
                for (double l : z[j]) child.positions.push_back(p.positions[j] + l);
            }
            return child;
        };
        if (!pa.positions.empty()) pa = apply_regime(reproduce(pa, k), regime_a, k, tie_a);
        if (!pb.positions.empty()) pb = apply_regime(reproduce(pb, k), regime_b, k, tie_b);
        out.a.per_generation.push_back(make_record(k, pa));
        out.b.per_generation.push_back(make_record(k, pb));
        held = dominates(pa, pb);
        out.order_held.push_back(held);
        out.all_held = out.all_held && held;
    }
    out.a.survived_to_horizon = out.a.per_generation.back().count > 0;
    out.b.survived_to_horizon = out.b.per_generation.back().count > 0;
    return out;
}

ConsistentDisplacement consistent_min_displacement(const ReproductionLaw& law, std::size_t n,
                                                   RngStream& rng, PruneOptions opts) {
    double slack = opts.slack;
    if (slack <= 0.0) {
        double sigma2 = 1.0;
        if (law.has_exact_moments()) sigma2 = law.exp_moments(1.0)[2];
        slack = 1.25 * std::pow(sigma2, 1.0 / 3.0) * std::cbrt(static_cast<double>(n)) + 2.0;
    }
    ConsistentDisplacement out;
    out.best_min_by_gen.assign(n + 1, 0.0);
    std::vector<double> pos{0.0}, rmin{0.0};
    for (std::size_t k = 1; k <= n; ++k) {
        std::vector<double> npos, nrmin;
        npos.reserve(2 * pos.size());
        nrmin.reserve(2 * pos.size());
        double best = -INFINITY;
        for (std::size_t i = 0; i < pos.size(); ++i) {
            std::vector<double> children = law.sample(rng);
            for (double l : children) {
                double p = pos[i] + l;
                double m = std::min(rmin[i], p);
                npos.push_back(p);
                nrmin.push_back(m);
                best = std::max(best, m);
            }
        }
        // prune lineages that can no longer matter
        std::vector<double> fpos, frmin;
        fpos.reserve(npos.size());
        frmin.reserve(npos.size());
        for (std::size_t i = 0; i < npos.size(); ++i) {
            if (nrmin[i] >= best - slack) {
                fpos.push_back(npos[i]);
                frmin.push_back(nrmin[i]);
            } else {
                out.pruned = true;
            }
        }
        if (fpos.size() > opts.cap) {
            out.pruned = true;
            std::vector<std::size_t> idx(fpos.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(opts.cap),
                             idx.end(),
                             [&](std::size_t a, std::size_t b) { return frmin[a] > frmin[b]; });
            idx.resize(opts.cap);
            std::vector<double> cpos, crmin;
            cpos.reserve(opts.cap);
            crmin.reserve(opts.cap);
            for (std::size_t i : idx) {
                cpos.push_back(fpos[i]);
                crmin.push_back(frmin[i]);
            }
            fpos = std::move(cpos);
            frmin = std::move(crmin);
        }
        pos = std::move(fpos);
        rmin = std::move(frmin);
        out.best_min_by_gen[k] = best;
    }
    out.value = out.best_min_by_gen[n];
    return out;
}

std::vector<SurvivalCell> survival_scaling_experiment(
    const ReproductionLaw& law, const std::vector<std::pair<double, std::size_t>>& cells,
    std::size_t reps, std::uint64_t seed, std::size_t pop_cap) {
    std::vector<SurvivalCell> out;
    out.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto [eps, n] = cells[c];
        SurvivalCell cell;
        cell.eps = eps;
        cell.n = n;
        cell.reps = reps;
        for (std::size_t r = 0; r < reps; ++r) {
            RngStream rng(seed, c, r);
            std::vector<double> pop{0.0};
            bool alive = true;
            for (std::size_t k = 1; k <= n && alive; ++k) {
                double thr = -eps * static_cast<double>(k);
                std::vector<double> nxt;
                nxt.reserve(2 * pop.size());
                for (double parent : pop) {
                    for (double l : law.sample(rng)) {
                        double p = parent + l;
                        if (p >= thr) nxt.push_back(p);
                    }
                }
                if (nxt.size() > pop_cap) {
                    // keep the rightmost; dropping particles can only turn
                    // survival into extinction, so rho_hat is a lower bound
                    std::nth_element(nxt.begin(),
                                     nxt.begin() + static_cast<std::ptrdiff_t>(pop_cap),
                                     nxt.end(), std::greater<double>());
                    nxt.resize(pop_cap);
                }
                pop = std::move(nxt);
                alive = !pop.empty();
            }
            if (alive) ++cell.hits;
        }
        cell.rho_hat = reps ? static_cast<double>(cell.hits) / static_cast<double>(reps) : 0.0;
        cell.ci = wilson_ci(cell.hits, reps);
        cell.zero_hits = (cell.hits == 0);
        double lg = cell.rho_hat > 0 ? std::log(cell.rho_hat) : -INFINITY;
        cell.n13_log = lg / std::cbrt(static_cast<double>(n));
        cell.sqrt_eps_log = std::sqrt(eps) * lg;
        out.push_back(cell);
    }
    return out;
}

bool killed_survival_replica(const ReproductionLaw& law, const Profile& f, std::size_t n,
                             RngStream& rng, std::size_t pop_cap) {
    const double n13 = std::cbrt(static_cast<double>(n));
    std::vector<double> pop{0.0};
    if (0.0 < n13 * f(0.0)) return false;
    for (std::size_t k = 1; k <= n; ++k) {
        double thr = n13 * f(static_cast<double>(k) / static_cast<double>(n));
        std::vector<double> nxt;
        nxt.reserve(2 * pop.size());
        for (double parent : pop)
            for (double l : law.sample(rng)) {
                double p = parent + l;
                if (p >= thr) nxt.push_back(p);
            }
        if (nxt.size() > pop_cap) {
            std::nth_element(nxt.begin(), nxt.begin() + static_cast<std::ptrdiff_t>(pop_cap),
                             nxt.end(), std::greater<double>());
            nxt.resize(pop_cap);
        }
        pop = std::move(nxt);
        if (pop.empty()) return false;
    }
    return true;
}

std::uint64_t corridor_count_replica(const ReproductionLaw& law, const BarrierProfile& profile,
                                     double x, double y, std::size_t n, RngStream& rng,
                                     std::size_t capacity) {
    const double a13 = std::cbrt(static_cast<double>(n));
    std::vector<double> pop{0.0};
    for (std::size_t k = 1; k <= n && !pop.empty(); ++k) {
        double t = static_cast<double>(k) / static_cast<double>(n);
        double lo = profile.lower(t) * a13, hi = profile.upper(t) * a13;
        std::vector<double> nxt;
        nxt.reserve(2 * pop.size());
        for (double parent : pop) {
            for (double l : law.sample(rng)) {
                double p = parent + l;
                if (p >= lo && p <= hi) {
                    if (nxt.size() >= capacity)
                        throw CapacityExceeded("corridor_count_replica: capacity exceeded");
                    nxt.push_back(p);
                }
            }
        }
        pop = std::move(nxt);
    }
    const double a13n = std::cbrt(static_cast<double>(n));
    std::uint64_t count = 0;
    for (double p : pop)
        if (p >= x * a13n && p <= y * a13n) ++count;
    return count;
}

}  // namespace brws
