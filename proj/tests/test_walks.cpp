#include <doctest.h>

#include <cmath>

#include "brws/errors.hpp"
#include "brws/walks.hpp"

using namespace brws;

TEST_CASE("mogulskii_rate closed forms") {
    BarrierProfile unit{Profile::constant(-1.0), Profile::constant(1.0)};
    CHECK(mogulskii_rate(unit, 0.0, 1.0) == 0.0);
    CHECK(mogulskii_rate(unit, 1.0, 1.0) ==
          doctest::Approx(M_PI * M_PI / 8.0).epsilon(1e-10));
    CHECK(mogulskii_rate(unit, 0.5, 2.0) ==
          doctest::Approx(M_PI * M_PI / 8.0).epsilon(1e-10));

    // width (s + 0.1)^{1/3}: closed form (pi^2/2) * 3 ((1.1)^{1/3} - (0.1)^{1/3})
    BarrierProfile cube{Profile::constant(0.0), Profile::power(1.0, 0.1, 1.0 / 3.0)};
    double expect = 0.5 * M_PI * M_PI * 3.0 * (std::cbrt(1.1) - std::cbrt(0.1));
    CHECK(mogulskii_rate(cube, 1.0, 1.0) == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("mogulskii_rate integrable endpoint singularity") {
    // width s^{1/3} vanishes at s = 0; the integral is still finite:
    // int_0^t s^{-2/3} ds = 3 t^{1/3}
    BarrierProfile cusp{Profile::constant(0.0), Profile::power(1.0, 0.0, 1.0 / 3.0)};
    auto info = mogulskii_rate_info(cusp, 1.0, 1.0);
    CHECK(info.singular_at_start);
    CHECK(info.value == doctest::Approx(0.5 * M_PI * M_PI * 3.0).epsilon(1e-7));
}

TEST_CASE("mogulskii_rate rejects non-integrable widths") {
    // linear touch at the endpoint is non-integrable
    BarrierProfile lin{Profile::constant(0.0), Profile::linear(1.0, 0.0)};
    CHECK_THROWS_AS(mogulskii_rate(lin, 1.0, 1.0), NumericsError);
    // interior vanishing width
    BarrierProfile cross{Profile::constant(0.0),
                         Profile::closed_form("vee", [](double t) { return std::abs(t - 0.5); })};
    CHECK_THROWS_AS(mogulskii_rate(cross, 1.0, 1.0), NumericsError);
}

TEST_CASE("table profiles integrate segment-exactly") {
    // piecewise-linear width 2 -> 1 over [0,1]: int ds/w^2 = 1/(2*1) = 0.5
    auto f = Profile::table({0.0, 1.0}, {0.0, 0.0});
    auto g = Profile::table({0.0, 1.0}, {2.0, 1.0});
    BarrierProfile prof{f, g};
    CHECK(mogulskii_rate(prof, 1.0, 1.0) ==
          doctest::Approx(0.5 * M_PI * M_PI * 0.5).epsilon(1e-14));
    // agrees with the adaptive route on the same (closed-form) width
    BarrierProfile closed{Profile::constant(0.0), Profile::linear(2.0, 1.0)};
    CHECK(mogulskii_rate(prof, 1.0, 1.0) ==
          doctest::Approx(mogulskii_rate(closed, 1.0, 1.0)).epsilon(1e-9));
    // table touch is linear, hence non-integrable
    auto g0 = Profile::table({0.0, 1.0}, {1.0, 0.0});
    CHECK_THROWS_AS(mogulskii_rate({f, g0}, 1.0, 1.0), NumericsError);
}

TEST_CASE("step law validation") {
    CHECK_THROWS_AS(StepLaw::lattice({1, 2}, {0.5, 0.5}), ConfigError);   // mean != 0
    CHECK_THROWS_AS(StepLaw::lattice({-1, 1}, {0.7, 0.2}), ConfigError);  // mass != 1
    auto r = StepLaw::rademacher();
    CHECK(r.sigma2() == doctest::Approx(1.0));
    REQUIRE(r.lattice_info().has_value());
}

TEST_CASE("exact_confinement_dp basics") {
    auto step = StepLaw::rademacher();
    SUBCASE("n = 0 inside") { CHECK(exact_confinement_dp(step, {0}, {0}, {}, 0) == 1.0); }
    SUBCASE("start excluded") {
        std::vector<long long> lo{1, -1}, hi{2, 1};
        CHECK(exact_confinement_dp(step, lo, hi, {}, 0) == 0.0);
    }
    SUBCASE("one step, symmetric corridor") {
        std::vector<long long> lo{-1, -1}, hi{1, 1};
        CHECK(exact_confinement_dp(step, lo, hi, {}, 0) == 1.0);
        CHECK(exact_confinement_dp(step, lo, hi, {{1, 1}}, 0) == 0.5);
    }
}

TEST_CASE("transfer-matrix decay on the 3-site corridor") {
    // +-1 walk on {-1,0,1}: top eigenvalue cos(pi/4); over two steps 1/2
    auto step = StepLaw::rademacher();
    auto corridor = [&](std::size_t n) {
        std::vector<long long> lo(n + 1, -1), hi(n + 1, 1);
        return exact_confinement_dp(step, lo, hi, {}, 0);
    };
    double p200 = corridor(200), p202 = corridor(202);
    CHECK(p202 / p200 == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("dp probability additivity over target states") {
    auto step = StepLaw::lattice({-2, -1, 0, 1, 2}, {0.15, 0.2, 0.3, 0.2, 0.15});
    std::size_t n = 24;
    std::vector<long long> lo(n + 1, -5), hi(n + 1, 6);
    double total = exact_confinement_dp(step, lo, hi, {}, 0);
    double sum = 0;
    for (long long s = -5; s <= 6; ++s)
        sum += exact_confinement_dp(step, lo, hi, {{s, s}}, 0);
    CHECK(std::abs(total - sum) < 1e-14);
}

TEST_CASE("dp monotone in corridor enlargement") {
    auto step = StepLaw::rademacher();
    RngStream gen(404, 0, 0);
    std::size_t n = 30;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<long long> lo1(n + 1), hi1(n + 1), lo2(n + 1), hi2(n + 1);
        for (std::size_t j = 0; j <= n; ++j) {
            lo1[j] = -1 - static_cast<long long>(gen.below(3));
            hi1[j] = 1 + static_cast<long long>(gen.below(3));
            lo2[j] = lo1[j] - static_cast<long long>(gen.below(2));
            hi2[j] = hi1[j] + static_cast<long long>(gen.below(2));
        }
        double p1 = exact_confinement_dp(step, lo1, hi1, {}, 0);
        double p2 = exact_confinement_dp(step, lo2, hi2, {}, 0);
        CHECK(p2 >= p1 - 1e-15);
    }
}

TEST_CASE("mc agrees with dp on the unit corridor") {
    auto step = StepLaw::rademacher();
    BarrierProfile prof{Profile::constant(-1.0), Profile::constant(1.0)};
    RngStream rng(17, 0, 0);
    for (std::size_t n : {64, 216}) {
        double a_n = std::cbrt(static_cast<double>(n));
        std::vector<long long> lo, hi;
        make_integer_corridor(prof, n, a_n, 1.0, lo, hi);
        double dp = exact_confinement_dp(step, lo, hi, {}, 0);
        auto mc = mc_confinement_prob(step, prof, n, a_n, 0.0, {}, false, 200000, rng);
        double se = std::sqrt(dp * (1 - dp) / static_cast<double>(mc.reps));
        CHECK(std::abs(mc.p - dp) < 4.0 * se);
        CHECK(!mc.zero_hits);
    }
}

TEST_CASE("mc: corridor too wide to exit gives probability one") {
    auto step = StepLaw::rademacher();
    BarrierProfile prof{Profile::constant(-100.0), Profile::constant(100.0)};
    RngStream rng(18, 0, 0);
    auto mc = mc_confinement_prob(step, prof, 16, std::cbrt(16.0), 0.0, {}, false, 5000, rng);
    CHECK(mc.p == 1.0);
    CHECK(mc.hits == mc.reps);
}

TEST_CASE("mc start outside the corridor is rejected") {
    auto step = StepLaw::rademacher();
    BarrierProfile prof{Profile::constant(-1.0), Profile::constant(1.0)};
    RngStream rng(19, 0, 0);
    CHECK_THROWS_AS(mc_confinement_prob(step, prof, 8, 2.0, 5.0, {}, false, 10, rng),
                    ConfigError);
}

TEST_CASE("marks: an always-zero mark changes nothing under the same seed") {
    auto step = StepLaw::rademacher();  // draw() already returns mark = 0
    BarrierProfile prof{Profile::constant(-1.0), Profile::constant(1.0)};
    RngStream rng1(20, 0, 0), rng2(20, 0, 0);
    auto without = mc_confinement_prob(step, prof, 64, 4.0, 0.0, {}, false, 20000, rng1);
    auto with = mc_confinement_prob(step, prof, 64, 4.0, 0.0, {}, true, 20000, rng2);
    CHECK(without.hits == with.hits);
}

TEST_CASE("marks: independent marks factor the confinement probability") {
    // mark uniform on {0, 2n}: P(xi <= n) = 1/2 per step, independent of X
    const std::size_t n = 12;
    auto step = StepLaw::rademacher();
    auto marked = StepLaw::rademacher();
    marked.set_joint_sampler([n](RngStream& rng) -> StepSample {
        double x = rng.u01() < 0.5 ? -1.0 : 1.0;
        double mark = rng.u01() < 0.5 ? 0.0 : static_cast<double>(2 * n);
        return {x, mark};
    });
    BarrierProfile prof{Profile::constant(-1.0), Profile::constant(1.0)};
    double a_n = std::cbrt(static_cast<double>(n));
    std::vector<long long> lo, hi;
    make_integer_corridor(prof, n, a_n, 1.0, lo, hi);
    double dp = exact_confinement_dp(step, lo, hi, {}, 0);
    double expect = dp * std::pow(0.5, static_cast<double>(n));
    RngStream rng(21, 0, 0);
    auto mc = mc_confinement_prob(marked, prof, n, a_n, 0.0, {}, true, 2000000, rng);
    double se = std::sqrt(expect * (1 - expect) / static_cast<double>(mc.reps));
    CHECK(std::abs(mc.p - expect) < 4.0 * std::max(se, 1e-7));
}

TEST_CASE("rate report: single-n call produces one row") {
    auto step = StepLaw::rademacher();
    BarrierProfile prof{Profile::constant(-1.0), Profile::constant(1.0)};
    auto rep = rate_convergence_report(step, prof, {64}, 1.0);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].exact);
    CHECK(rep.rows[0].a_n == doctest::Approx(4.0));
    CHECK(rep.target_constant == doctest::Approx(-M_PI * M_PI / 8.0).epsilon(1e-9));
    CHECK(rep.to_csv().find("scaled_log") != std::string::npos);
}

TEST_CASE("rate report: dp sequence is monotone towards the limit") {
    auto step = StepLaw::rademacher();
    BarrierProfile prof{Profile::constant(-1.0), Profile::constant(1.0)};
    auto rep = rate_convergence_report(step, prof, {64, 216, 512, 1000}, 1.0);
    REQUIRE(rep.rows.size() == 4);
    for (std::size_t i = 1; i < 4; ++i)
        CHECK(rep.rows[i].scaled_log < rep.rows[i - 1].scaled_log);
    double target = -M_PI * M_PI / 8.0;
    CHECK(std::abs(rep.rows[3].scaled_log - target) < 0.25 * std::abs(target));
}

TEST_CASE("uniform-start variant: the best start matters by o(1) only") {
    // DP from 5 equispaced starts in the corridor at n = 512; the spread of
    // the scaled logs stays well below the gap to the limit
    auto step = StepLaw::rademacher();
    BarrierProfile prof{Profile::constant(-1.0), Profile::constant(1.0)};
    std::size_t n = 512;
    double a_n = std::cbrt(static_cast<double>(n));
    std::vector<long long> lo, hi;
    make_integer_corridor(prof, n, a_n, 1.0, lo, hi);
    double best = -INFINITY, worst = INFINITY;
    for (long long s : {-6, -3, 0, 3, 6}) {
        double p = exact_confinement_dp(step, lo, hi, {}, s);
        double scaled = a_n * a_n / static_cast<double>(n) * std::log(p);
        best = std::max(best, scaled);
        worst = std::min(worst, scaled);
    }
    CHECK(best - worst < 0.15);
    // and the supremum over starts is attained at the centre
    double centre = exact_confinement_dp(step, lo, hi, {}, 0);
    for (long long s : {-6, -3, 3, 6})
        CHECK(exact_confinement_dp(step, lo, hi, {}, s) <= centre);
}

TEST_CASE("corridor narrowing decreases the scaled log") {
    auto step = StepLaw::rademacher();
    BarrierProfile wide{Profile::constant(-1.5), Profile::constant(1.5)};
    BarrierProfile narrow{Profile::constant(-1.0), Profile::constant(1.0)};
    auto rw = rate_convergence_report(step, wide, {216}, 1.0);
    auto rn = rate_convergence_report(step, narrow, {216}, 1.0);
    CHECK(rn.rows[0].scaled_log <= rw.rows[0].scaled_log);
}
