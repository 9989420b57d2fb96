#include <doctest.h>

#include <cmath>

#include "brws/errors.hpp"
#include "brws/gw.hpp"
#include "brws/stats.hpp"

using namespace brws;

namespace {

// b = 2 fixture: mu(2) = mu(4) = 1/2, m = 3
OffspringLaw b2_fixture() { return OffspringLaw::from_pmf({{2, 0.5}, {4, 0.5}}); }
// b = 1 fixture: mu(1) = mu(3) = 1/2, m = 2, q = 0, alpha = 1
OffspringLaw b1_fixture() { return OffspringLaw::from_pmf({{1, 0.5}, {3, 0.5}}); }
// b = 0 fixture: mu(0) = 1/4, mu(2) = 3/4, m = 3/2, q = 1/3 exactly
OffspringLaw b0_fixture() { return OffspringLaw::from_pmf({{0, 0.25}, {2, 0.75}}); }

}  // namespace

TEST_CASE("offspring law invariants") {
    auto law = b0_fixture();
    CHECK(law.mean() == doctest::Approx(1.5));
    CHECK(law.min_support() == 0);
    CHECK(law.extinction_prob() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    // f'(q) = (3/2) q = 1/2, alpha = log 2 / log(3/2)
    CHECK(law.alpha() == doctest::Approx(std::log(2.0) / std::log(1.5)).epsilon(1e-12));

    CHECK(b1_fixture().extinction_prob() == 0.0);
    CHECK(b1_fixture().alpha() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b2_fixture().alpha() == INFINITY);

    CHECK_THROWS_AS(OffspringLaw::from_pmf({{1, 0.5}, {3, 0.4}}), ConfigError);
}

TEST_CASE("iterate_f basics") {
    auto law = b1_fixture();
    CHECK(iterate_f(law, 0.37, 0) == 0.37);
    for (std::size_t k : {1, 5, 20}) CHECK(iterate_f(law, 1.0, k) == doctest::Approx(1.0));

    // critical law mu(0)=mu(2)=1/2: fixed-point iteration climbs towards q=1
    auto crit = OffspringLaw::from_pmf({{0, 0.5}, {2, 0.5}});
    double prev = 0.0;
    for (std::size_t k : {10, 40, 100}) {
        double v = iterate_f(crit, 0.0, k);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(prev > 0.96);  // f^k(0) ~ 1 - 2/k for the critical quadratic
    CHECK(prev < 0.99);
}

TEST_CASE("simulate_Z basics") {
    auto law = b1_fixture();
    RngStream rng(1, 0, 0);
    CHECK(simulate_Z(law, 0, rng) == 1);

    auto det = OffspringLaw::from_pmf({{2, 1.0}});
    for (std::size_t n : {1, 5, 10}) CHECK(simulate_Z(det, n, rng) == (1ULL << n));

    auto det3 = OffspringLaw::from_pmf({{3, 1.0}});
    CHECK_THROWS_AS(simulate_Z(det3, 45, rng), NumericsError);
}

TEST_CASE("simulate_Z martingale mean") {
    auto law = b1_fixture();
    RngStream rng(2, 0, 0);
    MeanVar acc;
    for (std::size_t r = 0; r < 100000; ++r)
        acc.add(static_cast<double>(simulate_Z(law, 10, rng)));
    CHECK(std::abs(acc.mean() - 1024.0) < 4.0 * acc.stderror());
}

TEST_CASE("extinction frequency matches q") {
    auto law = b0_fixture();
    RngStream rng(3, 0, 0);
    std::size_t reps = 100000, extinct = 0;
    for (std::size_t r = 0; r < reps; ++r)
        if (simulate_Z(law, 60, rng) == 0) ++extinct;
    auto ci = wilson_ci(extinct, reps);
    CHECK(ci.lo <= 1.0 / 3.0);
    CHECK(ci.hi >= 1.0 / 3.0);
}

TEST_CASE("left_tail_bound case dispatch") {
    CHECK(left_tail_bound(b0_fixture(), 0.1).tag == TailCase::b0);
    CHECK(left_tail_bound(b1_fixture(), 0.1).tag == TailCase::b1);
    CHECK(left_tail_bound(b2_fixture(), 0.1).tag == TailCase::b2plus);

    // b = 1 bound shape C z^alpha with alpha = 1
    CHECK(left_tail_bound(b1_fixture(), 0.1, 2.0).value == doctest::Approx(0.2));
    // b = 2 exponent log 2 / (log 3 - log 2)
    double expo = std::log(2.0) / (std::log(3.0) - std::log(2.0));
    CHECK(left_tail_bound(b2_fixture(), 0.1, 1.0).value ==
          doctest::Approx(std::exp(-std::pow(0.1, -expo))));

    CHECK_THROWS_AS(left_tail_bound(OffspringLaw::from_pmf({{2, 1.0}}), 0.1), ConfigError);
    CHECK_THROWS_AS(left_tail_bound(OffspringLaw::from_pmf({{0, 0.5}, {2, 0.5}}), 0.1),
                    ConfigError);  // critical
    CHECK_THROWS_AS(left_tail_bound(b1_fixture(), 0.0), ConfigError);
    CHECK_THROWS_AS(left_tail_bound(b1_fixture(), 1.0), ConfigError);
}

TEST_CASE("tiny z reduces the event to extinction") {
    // z < m^{-n}: {Z_n <= z m^n} = {Z_n = 0}
    auto law = b0_fixture();
    std::size_t n = 12;
    double z = 0.5 * std::pow(1.5, -static_cast<double>(n));
    RngStream rng1(4, 0, 0), rng2(4, 0, 0);
    auto tail = left_tail_empirical(law, z, n, 20000, rng1);
    std::size_t extinct = 0;
    for (std::size_t r = 0; r < 20000; ++r)
        if (simulate_Z(law, n, rng2) == 0) ++extinct;
    CHECK(tail.hits == extinct);

    // and for b >= 1 laws the event is impossible
    RngStream rng3(5, 0, 0);
    auto none = left_tail_empirical(b1_fixture(), 1e-9, 20, 5000, rng3);
    CHECK(none.hits == 0);
}

TEST_CASE("exact dp left tail agrees with brute-force enumeration") {
    // small case where the full pmf is computable by hand-rolled convolution
    auto law = b1_fixture();
    std::size_t n = 4;
    // brute force: pmf of Z_4 via repeated exact convolution of the full law
    std::vector<double> pmf{0.0, 1.0};  // Z_0 = 1
    for (std::size_t g = 0; g < n; ++g) {
        std::vector<double> nxt(pmf.size() * 3 + 1, 0.0);
        // distribution of sum over z individuals: iterate one individual at a time
        for (std::size_t z = 0; z < pmf.size(); ++z) {
            if (pmf[z] == 0.0) continue;
            std::vector<double> conv{1.0};
            for (std::size_t i = 0; i < z; ++i) {
                std::vector<double> c2(conv.size() + 3, 0.0);
                for (std::size_t j = 0; j < conv.size(); ++j) {
                    c2[j + 1] += conv[j] * 0.5;
                    c2[j + 3] += conv[j] * 0.5;
                }
                conv = std::move(c2);
            }
            for (std::size_t j = 0; j < conv.size(); ++j) nxt[j] += pmf[z] * conv[j];
        }
        pmf = std::move(nxt);
    }
    for (std::uint64_t K : {3ULL, 8ULL, 16ULL}) {
        double brute = 0;
        for (std::size_t j = 0; j <= K && j < pmf.size(); ++j) brute += pmf[j];
        double dp = left_tail_exact_dp(law, K, n);
        CHECK(dp == doctest::Approx(brute).epsilon(1e-12));
    }
}

TEST_CASE("saddle-point left tail agrees with the dp oracle") {
    auto b1 = b1_fixture();
    for (auto [z, n] : std::vector<std::pair<double, std::size_t>>{
             {0.2, 8}, {0.1, 10}, {0.35, 12}}) {
        std::uint64_t K = static_cast<std::uint64_t>(z * std::pow(2.0, double(n)));
        double dp = left_tail_exact_dp(b1, K, n);
        double sp = std::exp(left_tail_exact_log(b1, z, n));
        CHECK(sp == doctest::Approx(dp).epsilon(1e-7));
    }
    auto b2 = b2_fixture();
    for (auto [z, n] : std::vector<std::pair<double, std::size_t>>{{0.3, 8}, {0.15, 8}}) {
        std::uint64_t K = static_cast<std::uint64_t>(z * std::pow(3.0, double(n)));
        double dp = left_tail_exact_dp(b2, K, n);
        double sp = std::exp(left_tail_exact_log(b2, z, n));
        CHECK(sp == doctest::Approx(dp).epsilon(1e-7));
    }
}

TEST_CASE("saddle-point left tail agrees with Monte Carlo where measurable") {
    auto law = b2_fixture();
    RngStream rng(6, 0, 0);
    double z = 0.45;
    std::size_t n = 10;
    auto emp = left_tail_empirical(law, z, n, 200000, rng);
    double exact = std::exp(left_tail_exact_log(law, z, n));
    CHECK(exact >= emp.ci.lo * 0.9);
    CHECK(exact <= emp.ci.hi * 1.1);
}

TEST_CASE("b=2 tail: log(-log) slope matches the lemma exponent") {
    // slope of log(-log P(Z_n <= z m^n)) in -log z; the lemma's exponent is
    // log b / (log m - log b) = log 2/(log 3 - log 2)
    auto law = b2_fixture();
    double expo = std::log(2.0) / (std::log(3.0) - std::log(2.0));
    for (std::size_t n : {12, 16}) {
        std::vector<double> xs, ys;
        for (double z : {0.3, 0.1, 0.03}) {
            double lp = left_tail_exact_log(law, z, n);
            REQUIRE(lp < 0.0);
            xs.push_back(-std::log(z));
            ys.push_back(std::log(-lp));
        }
        double slope = ols_slope(xs, ys);
        CHECK(std::abs(slope - expo) / expo < 0.15);
    }
}

TEST_CASE("b=1 tail: bound shape C z with stable constant") {
    auto law = b1_fixture();
    double z = 0.1;
    std::vector<double> cs;
    for (std::size_t n : {8, 12, 16}) {
        std::uint64_t K = static_cast<std::uint64_t>(z * std::pow(2.0, double(n)));
        cs.push_back(left_tail_exact_dp(law, K, n) / z);
    }
    double cmin = *std::min_element(cs.begin(), cs.end());
    double cmax = *std::max_element(cs.begin(), cs.end());
    CHECK(cmax / cmin < 1.3);
    // the empirical estimate sits on the exact value
    RngStream rng(7, 0, 0);
    auto emp = left_tail_empirical(law, z, 12, 100000, rng);
    std::uint64_t K12 = static_cast<std::uint64_t>(z * 4096.0);
    double exact = left_tail_exact_dp(law, K12, 12);
    CHECK(emp.ci.lo <= exact);
    CHECK(emp.ci.hi >= exact);
}

TEST_CASE("growth floor: slack barrier recovers the full tree") {
    auto base = ReproductionLaw::binary_pm1(0.25);
    auto law = base.normalized(normalize_to_boundary(base));
    RngStream rng(8, 0, 0);
    // a beyond the largest down-step: barrier never binds, count = 2^n
    auto res = growth_floor_experiment(law, 5.0, 16, 50, rng, 0.95, 1 << 20);
    CHECK(res.truncated_mean == doctest::Approx(2.0));
    for (auto c : res.counts) CHECK(c == (1ULL << 16));
    CHECK(res.reported_rho > 1.9);
}

TEST_CASE("growth floor: subcritical truncation is rejected") {
    auto base = ReproductionLaw::binary_pm1(0.25);
    auto law = base.normalized(normalize_to_boundary(base));
    RngStream rng(9, 0, 0);
    // keeping only the up-atom gives truncated mean 2 * 0.25 = 0.5
    CHECK_THROWS_AS(growth_floor_experiment(law, 1.0, 16, 10, rng), ConfigError);
}

TEST_CASE("growth floor: frequency rises towards one along n") {
    // enumerable law with an intermediate atom so the truncated mean can sit
    // near 1.5: children at {0.8, -0.4, -1.6} after normalization-by-hand
    auto base = ReproductionLaw::from_atoms(
        "three", {{0.5, {0.6, -0.5}}, {0.5, {0.2, -1.4}}});
    auto law = base.normalized(normalize_to_boundary(base));
    // a just below the deepest displacement keeps three of the four child
    // slots: truncated mean = 0.5 * 3 = 1.5 exactly
    std::vector<double> disp;
    for (const auto& atom : law.atoms())
        for (double l : atom.displacements) disp.push_back(l);
    std::sort(disp.begin(), disp.end(), std::greater<double>());
    double a = -0.5 * (disp[2] + disp[3]);
    {
        double tm = 0;
        for (const auto& atom : law.atoms())
            for (double l : atom.displacements)
                if (l >= -a) tm += atom.prob;
        REQUIRE(tm == doctest::Approx(1.5));
    }
    RngStream rng(10, 0, 0);
    std::vector<double> freqs;
    for (std::size_t n : {16, 32, 64}) {
        auto res = growth_floor_experiment(law, a, n, 300, rng, 0.5, 1 << 21);
        freqs.push_back(growth_floor_frequency(res.counts, 1.2, n));
    }
    CHECK(freqs[2] > 0.8);
    CHECK(freqs[2] >= freqs[0] - 0.1);
}

TEST_CASE("growth floor frequency CI scales like sqrt(reps)") {
    auto ci_width = [](std::size_t hits, std::size_t reps) {
        auto ci = wilson_ci(hits, reps);
        return ci.hi - ci.lo;
    };
    // same empirical rate, four times the replicas: half the CI width
    double w1 = ci_width(300, 1000), w2 = ci_width(1200, 4000);
    CHECK(w2 / w1 == doctest::Approx(0.5).epsilon(0.05));
}
