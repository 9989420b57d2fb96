#include "brws/gw.hpp"

#include <algorithm>
#include <cmath>

#include "brws/errors.hpp"

namespace brws {

OffspringLaw OffspringLaw::from_pmf(const std::map<unsigned, double>& pmf) {
    OffspringLaw law;
    double total = 0;
    for (auto [k, p] : pmf) {
        if (p < 0) throw ConfigError("offspring law: negative probability");
        if (p == 0) continue;
        law.atoms_.push_back({k, p});
        total += p;
        law.m_ += p * k;
    }
    if (law.atoms_.empty()) throw ConfigError("offspring law: empty pmf");
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("offspring law: pmf sums to " + std::to_string(total) + ", not 1");
    law.b_ = law.atoms_.front().first;

    // extinction probability: monotone iteration f^k(0) increasing to q,
    // Newton-polished to 1e-12
    if (law.m_ <= 1.0) {
        law.q_ = 1.0;
    } else {
        double s = 0.0;
        for (int i = 0; i < 100000; ++i) {
            double ns = law.pgf(s);
            if (std::abs(ns - s) < 1e-14) {
                s = ns;
                break;
            }
            s = ns;
        }
        for (int i = 0; i < 100; ++i) {
            double fs = law.pgf(s) - s;
            double dfs = law.pgf_derivative(s) - 1.0;
            if (std::abs(dfs) < 1e-300) break;
            double step = fs / dfs;
            s -= step;
            if (std::abs(step) < 1e-15) break;
        }
        law.q_ = std::clamp(s, 0.0, 1.0);
        if (law.b_ >= 1) law.q_ = 0.0;  // no extinction when every atom has a child
    }
    return law;
}

double OffspringLaw::alpha() const {
    if (m_ <= 1.0) throw ConfigError("alpha: supercritical law required (m > 1)");
    double fq = pgf_derivative(q_);
    if (fq <= 0.0) return INFINITY;  // b >= 2
    return -std::log(fq) / std::log(m_);
}

double OffspringLaw::pgf(double s) const {
    double acc = 0;
    for (auto [k, p] : atoms_) acc += p * std::pow(s, static_cast<double>(k));
    return acc;
}

double OffspringLaw::pgf_derivative(double s) const {
    double acc = 0;
    for (auto [k, p] : atoms_)
        if (k >= 1) acc += p * k * std::pow(s, static_cast<double>(k - 1));
    return acc;
}

std::complex<double> OffspringLaw::pgf(std::complex<double> s) const {
    std::complex<double> acc = 0;
    for (auto [k, p] : atoms_) acc += p * std::pow(s, static_cast<double>(k));
    return acc;
}

double iterate_f(const OffspringLaw& law, double s, std::size_t k) {
    if (s < 0.0 || s > 1.0) throw ConfigError("iterate_f: s must lie in [0,1]");
    for (std::size_t i = 0; i < k; ++i) s = law.pgf(s);
    return s;
}

std::uint64_t simulate_Z(const OffspringLaw& law, std::size_t n, RngStream& rng) {
    const std::uint64_t max_k = law.max_support();
    const std::uint64_t guard = max_k ? (1ULL << 62) / max_k : (1ULL << 62);
    std::uint64_t z = 1;
    for (std::size_t gen = 0; gen < n && z > 0; ++gen) {
        if (z > guard) throw NumericsError("simulate_Z: population exceeds the 64-bit budget");
        // multinomial split of z individuals over the atoms, via sequential
        // exact binomials; sum of k * N_k is the next generation
        std::uint64_t remaining = z;
        double mass_left = 1.0;
        std::uint64_t next = 0;
        for (std::size_t i = 0; i + 1 < law.atoms().size() && remaining > 0; ++i) {
            auto [k, p] = law.atoms()[i];
            double cond = std::clamp(p / mass_left, 0.0, 1.0);
            std::uint64_t nk = rng.binomial(remaining, cond);
            next += nk * k;
            remaining -= nk;
            mass_left -= p;
        }
        next += remaining * law.atoms().back().first;
        z = next;
    }
    return z;
}

namespace {

void require_tail_applicable(const OffspringLaw& law) {
    if (law.degenerate())
        throw ConfigError("left tail: degenerate single-atom law rejected");
    if (law.mean() <= 1.0)
        throw ConfigError("left tail: supercritical law required (m > 1)");
    if (static_cast<double>(law.min_support()) >= law.mean())
        throw ConfigError("left tail: b >= m cannot occur for a non-degenerate law");
}

}  // namespace

TailBound left_tail_bound(const OffspringLaw& law, double z, double C) {
    require_tail_applicable(law);
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("left_tail_bound: z must lie in (0,1)");
    const unsigned b = law.min_support();
    if (b == 0) {
        double a = law.alpha();
        return {law.extinction_prob() + C * std::pow(z, a / (a + 1.0)), TailCase::b0};
    }
    if (b == 1) {
        return {C * std::pow(z, law.alpha()), TailCase::b1};
    }
    double expo = std::log(static_cast<double>(b)) /
                  (std::log(law.mean()) - std::log(static_cast<double>(b)));
    return {std::exp(-C * std::pow(z, -expo)), TailCase::b2plus};
}

namespace {

std::uint64_t tail_threshold(const OffspringLaw& law, double z, std::size_t n) {
    long double mn = std::pow(static_cast<long double>(law.mean()), static_cast<long double>(n));
    long double t = z * mn;
    if (t >= 9.2e18L) throw NumericsError("left tail: z m^n exceeds the 64-bit range");
    return static_cast<std::uint64_t>(std::floor(t + 1e-9L));
}

}  // namespace

TailEmpirical left_tail_empirical(const OffspringLaw& law, double z, std::size_t n,
                                  std::size_t reps, RngStream& rng) {
    require_tail_applicable(law);
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("left_tail_empirical: z must lie in (0,1)");
    std::uint64_t K = tail_threshold(law, z, n);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r)
        if (simulate_Z(law, n, rng) <= K) ++hits;
    TailEmpirical out;
    out.hits = hits;
    out.reps = reps;
    out.freq = reps ? static_cast<double>(hits) / static_cast<double>(reps) : 0.0;
    out.ci = wilson_ci(hits, reps);
    out.threshold = K;
    return out;
}

namespace {

// log F_n(s) for complex s inside the unit disk. Once |s| underflows the
// direct iteration, f(s) = mu(b) s^b (1 + O(s)) continues it in log space
// with relative error below double precision.
std::complex<double> log_iterated_pgf(const OffspringLaw& law, std::complex<double> s,
                                      std::size_t n) {
    const unsigned b = law.min_support();
    const double log_mu_b = std::log(law.atoms().front().second);
    std::complex<double> v = s;
    bool in_log = false;
    std::complex<double> lv;
    for (std::size_t j = 0; j < n; ++j) {
        // b >= 1 iterates can underflow towards 0; b = 0 iterates tend to q > 0
        if (!in_log && b >= 1 && std::abs(v) < 1e-30) {
            in_log = true;
            lv = std::log(v);
        }
        if (in_log)
            lv = log_mu_b + static_cast<double>(b) * lv;
        else
            v = law.pgf(v);
    }
    return in_log ? lv : std::log(v);
}

double log_iterated_pgf_real(const OffspringLaw& law, double r, std::size_t n) {
    return log_iterated_pgf(law, std::complex<double>(r, 0.0), n).real();
}

}  // namespace

double left_tail_exact_log(const OffspringLaw& law, double z, std::size_t n) {
    require_tail_applicable(law);
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("left_tail_exact_log: z must lie in (0,1)");
    std::uint64_t K = tail_threshold(law, z, n);
    const unsigned b = law.min_support();
    if (b >= 1) {
        long double bn = std::pow(static_cast<long double>(b), static_cast<long double>(n));
        if (b >= 2 && static_cast<long double>(K) < bn) return -INFINITY;
        if (b >= 1 && K < 1) return -INFINITY;
    }
    const double Kd = static_cast<double>(K);

    // G(r) = log F_n(r) - log(1-r) - K log r; minimize over log r
    auto G = [&](double u) {
        double r = std::exp(u);
        return log_iterated_pgf_real(law, r, n) - std::log1p(-r) - Kd * u;
    };
    double lo = std::log(1e-9), hi = std::log(1.0 - 1e-9);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a1 = hi - gr * (hi - lo), a2 = lo + gr * (hi - lo);
    double f1 = G(a1), f2 = G(a2);
    for (int i = 0; i < 300 && hi - lo > 1e-12; ++i) {
        if (f1 < f2) {
            hi = a2;
            a2 = a1;
            f2 = f1;
            a1 = hi - gr * (hi - lo);
            f1 = G(a1);
        } else {
            lo = a1;
            a1 = a2;
            f1 = f2;
            a2 = lo + gr * (hi - lo);
            f2 = G(a2);
        }
    }
    const double u_hat = 0.5 * (lo + hi);
    const double r_hat = std::exp(u_hat);
    const double g_hat = G(u_hat);

    // trapezoid on the circle of radius r_hat, relative to the saddle value
    auto integrate = [&](std::size_t M) {
        double sum = 0.0;
        for (std::size_t j = 0; j <= M; ++j) {
            double theta = M_PI * static_cast<double>(j) / static_cast<double>(M);
            std::complex<double> s = std::polar(r_hat, theta);
            std::complex<double> lg = log_iterated_pgf(law, s, n) - std::log(1.0 - s) -
                                      Kd * std::complex<double>(u_hat, theta);
            std::complex<double> val = std::exp(lg - g_hat);
            double w = (j == 0 || j == M) ? 0.5 : 1.0;
            sum += w * val.real();
        }
        return sum / static_cast<double>(M);  // (1/pi) * pi/M * sum
    };
    std::size_t M = 4096;
    double prev = integrate(M);
    for (int i = 0; i < 8; ++i) {
        M *= 2;
        double cur = integrate(M);
        if (std::abs(cur - prev) <= 1e-9 * std::abs(cur)) {
            prev = cur;
            break;
        }
        prev = cur;
    }
    if (!(prev > 0.0))
        throw NumericsError("left_tail_exact_log: contour sum failed to converge positively");
    return g_hat + std::log(prev);
}

double left_tail_exact_dp(const OffspringLaw& law, std::uint64_t K, std::size_t n,
                          std::size_t op_budget) {
    require_tail_applicable(law);
    const unsigned b = law.min_support();
    if (b < 1) throw ConfigError("left_tail_exact_dp: b >= 1 required for truncation");

    // T_j = K / b^{n-j}: populations above it cannot come back below K by n
    std::vector<std::uint64_t> T(n + 1);
    T[n] = K;
    for (std::size_t j = n; j-- > 0;) T[j] = (b >= 2) ? T[j + 1] / b : T[j + 1];
    double ops = 0;
    for (std::size_t j = 0; j < n; ++j)
        ops += static_cast<double>(T[j] + 1) * static_cast<double>(T[j + 1] + 1) *
               static_cast<double>(law.atoms().size());
    if (ops > static_cast<double>(op_budget))
        throw EnumerationTooLarge("left_tail_exact_dp: operation budget exceeded");

    std::vector<double> d{0.0, 1.0};  // Z_0 = 1
    if (T[0] < 1) return 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t cap = static_cast<std::size_t>(T[j + 1]);
        // Horner composition: res = sum_z d[z] g(s)^z truncated at degree cap
        std::vector<double> res(1, 0.0);
        for (std::size_t z = d.size(); z-- > 0;) {
            // res = res * g + d[z]
            std::vector<double> nxt(std::min(res.size() - 1 + law.max_support(), cap) + 1, 0.0);
            for (std::size_t i = 0; i < res.size(); ++i) {
                if (res[i] == 0.0) continue;
                for (auto [k, p] : law.atoms()) {
                    std::size_t deg = i + k;
                    if (deg < nxt.size()) nxt[deg] += res[i] * p;
                }
            }
            nxt[0] += d[z];
            res = std::move(nxt);
        }
        d = std::move(res);
    }
    double total = 0;
    for (std::size_t i = 0; i < d.size() && i <= K; ++i) total += d[i];
    return total;
}

GrowthFloorResult growth_floor_experiment(const ReproductionLaw& law, double a, std::size_t n,
                                          std::size_t reps, RngStream& rng,
                                          double freq_threshold, std::size_t pop_cap) {
    GrowthFloorResult out;
    if (law.enumerable()) {
        double tm = 0;
        for (const auto& atom : law.atoms())
            for (double l : atom.displacements)
                if (l >= -a) tm += atom.prob;
        out.truncated_mean = tm;
    } else {
        MeanVar acc;
        for (std::size_t r = 0; r < 20000; ++r) {
            auto ls = law.sample(rng);
            double c = 0;
            for (double l : ls)
                if (l >= -a) c += 1;
            acc.add(c);
        }
        out.truncated_mean = acc.mean();
    }
    if (out.truncated_mean <= 1.0)
        throw ConfigError("growth_floor_experiment: a too small (truncated mean " +
                          std::to_string(out.truncated_mean) + " <= 1)");

    out.counts.reserve(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        std::vector<double> pop{0.0};
        for (std::size_t k = 1; k <= n && !pop.empty(); ++k) {
            double thr = -a * static_cast<double>(k);
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
        }
        out.counts.push_back(pop.size());
    }

    out.reported_rho = 0.0;
    out.freq_at_reported = 0.0;
    for (double rho = 1.01; rho <= out.truncated_mean + 1e-9; rho += 0.01) {
        double freq = growth_floor_frequency(out.counts, rho, n);
        if (freq >= freq_threshold) {
            out.reported_rho = rho;
            out.freq_at_reported = freq;
        }
    }
    return out;
}

double growth_floor_frequency(const std::vector<std::uint64_t>& counts, double rho,
                              std::size_t n) {
    if (counts.empty()) return 0.0;
    long double target = std::pow(static_cast<long double>(rho), static_cast<long double>(n));
    std::size_t hits = 0;
    for (auto c : counts)
        if (static_cast<long double>(c) >= target) ++hits;
    return static_cast<double>(hits) / static_cast<double>(counts.size());
}

}  // namespace brws
