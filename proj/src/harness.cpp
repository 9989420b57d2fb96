#include "brws/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "brws/curves.hpp"
#include "brws/engine.hpp"
#include "brws/errors.hpp"
#include "brws/gw.hpp"
#include "brws/spine.hpp"
#include "brws/stats.hpp"
#include "brws/walks.hpp"

namespace brws {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- validation

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(ctx + ": unknown key '" + it.key() + "'");
}

void require(const json& obj, const std::string& key, const std::string& ctx) {
    if (!obj.contains(key)) throw ConfigError(ctx + ": missing required key '" + key + "'");
}

std::vector<std::size_t> size_list(const json& arr, const std::string& ctx) {
    if (!arr.is_array() || arr.empty())
        throw ConfigError(ctx + ": must be a non-empty array");
    std::vector<std::size_t> out;
    for (const auto& v : arr) out.push_back(v.get<std::size_t>());
    return out;
}

// --------------------------------------------------------------- constructors

ReproductionLaw law_from_config_impl(const json& spec) {
    require(spec, "kind", "law");
    std::string kind = spec.at("kind").get<std::string>();
    if (kind == "binary_pm1") {
        check_keys(spec, {"kind", "p_up", "normalize"}, "law(binary_pm1)");
        return ReproductionLaw::binary_pm1(spec.value("p_up", 0.25));
    }
    if (kind == "table") {
        check_keys(spec, {"kind", "atoms", "normalize"}, "law(table)");
        require(spec, "atoms", "law(table)");
        std::vector<LawAtom> atoms;
        for (const auto& a : spec.at("atoms")) {
            check_keys(a, {"prob", "children"}, "law(table) atom");
            require(a, "prob", "law atom");
            require(a, "children", "law atom");
            atoms.push_back({a.at("prob").get<double>(),
                             a.at("children").get<std::vector<double>>()});
        }
        return ReproductionLaw::from_atoms("table", std::move(atoms));
    }
    if (kind == "poisson_gaussian") {
        check_keys(spec, {"kind", "mean", "sd", "rate", "normalize"}, "law(poisson_gaussian)");
        require(spec, "mean", "law(poisson_gaussian)");
        require(spec, "sd", "law(poisson_gaussian)");
        return ReproductionLaw::poisson_gaussian(spec.at("mean").get<double>(),
                                                 spec.at("sd").get<double>(),
                                                 spec.value("rate", 1.0));
    }
    throw ConfigError("law: unknown kind '" + kind + "'");
}

struct PreparedLaw {
    ReproductionLaw law;
    BoundaryForm form{1.0, 0.0, 0.0};
    bool was_normalized = false;
};

PreparedLaw prepared_law(const json& spec) {
    ReproductionLaw base = law_from_config_impl(spec);
    PreparedLaw out{base};
    if (spec.value("normalize", true)) {
        out.form = normalize_to_boundary(base);
        out.law = base.normalized(out.form);
        out.was_normalized = true;
    } else if (base.has_exact_moments()) {
        auto m = base.exp_moments(1.0);
        out.form = {1.0, 0.0, m[2]};
    }
    return out;
}

Profile profile_from_config_impl(const json& spec) {
    require(spec, "kind", "profile");
    std::string kind = spec.at("kind").get<std::string>();
    if (kind == "constant") {
        check_keys(spec, {"kind", "c"}, "profile(constant)");
        require(spec, "c", "profile(constant)");
        return Profile::constant(spec.at("c").get<double>());
    }
    if (kind == "linear") {
        check_keys(spec, {"kind", "v0", "v1"}, "profile(linear)");
        require(spec, "v0", "profile(linear)");
        require(spec, "v1", "profile(linear)");
        return Profile::linear(spec.at("v0").get<double>(), spec.at("v1").get<double>());
    }
    if (kind == "slope") {
        check_keys(spec, {"kind", "theta"}, "profile(slope)");
        require(spec, "theta", "profile(slope)");
        return Profile::slope(spec.at("theta").get<double>());
    }
    if (kind == "power") {
        check_keys(spec, {"kind", "a", "eps", "p"}, "profile(power)");
        require(spec, "a", "profile(power)");
        require(spec, "eps", "profile(power)");
        require(spec, "p", "profile(power)");
        return Profile::power(spec.at("a").get<double>(), spec.at("eps").get<double>(),
                              spec.at("p").get<double>());
    }
    if (kind == "table") {
        check_keys(spec, {"kind", "t", "v"}, "profile(table)");
        require(spec, "t", "profile(table)");
        require(spec, "v", "profile(table)");
        return Profile::table(spec.at("t").get<std::vector<double>>(),
                              spec.at("v").get<std::vector<double>>());
    }
    throw ConfigError("profile: unknown kind '" + kind + "'");
}

StepLaw step_from_config(const json& spec) {
    require(spec, "kind", "step");
    std::string kind = spec.at("kind").get<std::string>();
    if (kind == "rademacher") {
        check_keys(spec, {"kind"}, "step(rademacher)");
        return StepLaw::rademacher();
    }
    if (kind == "lattice") {
        check_keys(spec, {"kind", "offsets", "probs", "spacing"}, "step(lattice)");
        require(spec, "offsets", "step(lattice)");
        require(spec, "probs", "step(lattice)");
        return StepLaw::lattice(spec.at("offsets").get<std::vector<int>>(),
                                spec.at("probs").get<std::vector<double>>(),
                                spec.value("spacing", 1.0));
    }
    if (kind == "gaussian") {
        check_keys(spec, {"kind", "sd"}, "step(gaussian)");
        require(spec, "sd", "step(gaussian)");
        return StepLaw::gaussian(spec.at("sd").get<double>());
    }
    throw ConfigError("step: unknown kind '" + kind + "'");
}

// kind-specific key tables -----------------------------------------------

const std::set<std::string> kCommonKeys = {"schema_version", "kind", "seeds", "out_dir",
                                           "workers"};

std::set<std::string> with_common(std::set<std::string> extra) {
    extra.insert(kCommonKeys.begin(), kCommonKeys.end());
    return extra;
}

void validate_kind(const json& doc, const std::string& kind) {
    if (kind == "boundary_check") {
        check_keys(doc, with_common({"law", "mc_budget"}), "config");
        require(doc, "law", "config");
    } else if (kind == "many_to_one") {
        check_keys(doc, with_common({"law", "n_list", "mc_reps"}), "config");
        require(doc, "law", "config");
        require(doc, "n_list", "config");
    } else if (kind == "mogulskii_rate") {
        check_keys(doc,
                   with_common({"step", "profile_f", "profile_g", "n_list", "a_power", "mode",
                                "mc_reps", "target", "start_z", "sigma2"}),
                   "config");
        require(doc, "step", "config");
        require(doc, "profile_f", "config");
        require(doc, "profile_g", "config");
        require(doc, "n_list", "config");
    } else if (kind == "curve_solve") {
        check_keys(doc, with_common({"profile_f", "sigma2", "x", "grid"}), "config");
        require(doc, "profile_f", "config");
        require(doc, "sigma2", "config");
        require(doc, "x", "config");
    } else if (kind == "lambda") {
        check_keys(doc, with_common({"profile_f", "sigma2"}), "config");
        require(doc, "profile_f", "config");
        require(doc, "sigma2", "config");
    } else if (kind == "killed_brw") {
        check_keys(doc, with_common({"law", "profile_f", "n_list", "reps", "population_cap"}),
                   "config");
        require(doc, "law", "config");
        require(doc, "profile_f", "config");
        require(doc, "n_list", "config");
        require(doc, "reps", "config");
    } else if (kind == "selection_fixed") {
        check_keys(doc, with_common({"law", "a", "n_list", "reps", "population_cap"}), "config");
        require(doc, "law", "config");
        require(doc, "a", "config");
        require(doc, "n_list", "config");
        require(doc, "reps", "config");
    } else if (kind == "selection_profile") {
        check_keys(doc, with_common({"law", "profile_h", "n_list", "reps", "population_cap"}),
                   "config");
        require(doc, "law", "config");
        require(doc, "profile_h", "config");
        require(doc, "n_list", "config");
        require(doc, "reps", "config");
    } else if (kind == "consistent_displacement") {
        check_keys(doc, with_common({"law", "n_list", "reps", "slack", "lineage_cap"}), "config");
        require(doc, "law", "config");
        require(doc, "n_list", "config");
        require(doc, "reps", "config");
    } else if (kind == "survival_scaling") {
        check_keys(doc, with_common({"law", "theta", "n_list", "cells", "reps", "population_cap"}),
                   "config");
        require(doc, "law", "config");
        require(doc, "reps", "config");
        if (!doc.contains("cells")) {
            require(doc, "theta", "config(survival_scaling needs theta+n_list or cells)");
            require(doc, "n_list", "config(survival_scaling needs theta+n_list or cells)");
        }
    } else if (kind == "gw_tail") {
        check_keys(doc, with_common({"offspring_pmf", "z_list", "n_list", "reps", "exact"}),
                   "config");
        require(doc, "offspring_pmf", "config");
        require(doc, "z_list", "config");
        require(doc, "n_list", "config");
        require(doc, "reps", "config");
    } else if (kind == "coupling_property") {
        check_keys(doc, with_common({"instances", "horizon", "cap_base_max", "cap_extra_max"}),
                   "config");
    } else {
        throw ConfigError("config: unknown experiment kind '" + kind + "'");
    }
}

// -------------------------------------------------------------------- output

std::string fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

class RecordWriter {
  public:
    RecordWriter(const ExperimentConfig& cfg, RunOutputs& out) : cfg_(cfg), out_(out) {
        std::filesystem::create_directories(cfg.out_dir);
        out_.records_path = std::filesystem::path(cfg.out_dir) / "records.jsonl";
        out_.summary_path = std::filesystem::path(cfg.out_dir) / "summary.csv";
        records_.open(out_.records_path);
        if (!records_) throw ConfigError("cannot open " + out_.records_path.string());
        hash_ = cfg.config_hash();
        t0_ = std::chrono::steady_clock::now();
    }

    void record(std::uint64_t seed, json payload) {
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        json rec = {{"config_hash", hash_},
                    {"kind", cfg_.kind},
                    {"seed", seed},
                    {"payload", std::move(payload)},
                    {"meta", {{"wall_time_s", wall}, {"version", kVersion}}}};
        records_ << rec.dump() << '\n';
    }

    void summary_csv(const std::string& csv) {
        std::ofstream f(out_.summary_path);
        f << csv;
    }

    void note(const std::string& line) {
        std::cout << line << '\n';
        out_.summary_lines.push_back(line);
    }

  private:
    const ExperimentConfig& cfg_;
    RunOutputs& out_;
    std::ofstream records_;
    std::string hash_;
    std::chrono::steady_clock::time_point t0_;
};

// deterministic replica-level parallelism: results land in slot r no matter
// which worker computed them
template <typename Fn>
void parallel_replicas(std::size_t reps, std::size_t workers, Fn&& fn) {
    if (workers <= 1 || reps <= 1) {
        for (std::size_t r = 0; r < reps; ++r) fn(r);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t r = w; r < reps; r += workers) fn(r);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

std::uint64_t kind_salt(const std::string& kind) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : kind) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// ------------------------------------------------------------------- runners

void run_boundary_check(const ExperimentConfig& cfg, RecordWriter& w) {
    ReproductionLaw law = law_from_config_impl(cfg.resolved.at("law"));
    std::size_t budget = cfg.resolved.value("mc_budget", 200000);
    std::ostringstream csv;
    csv << "seed,normalizable,theta_star,kappa_star,sigma2,r1,r2,sigma2_enum\n";
    for (auto seed : cfg.seeds) {
        RngStream rng(seed, kind_salt(cfg.kind), 0);
        json payload;
        try {
            NormalizeOptions opts;
            opts.mc_budget = budget;
            BoundaryForm bf = normalize_to_boundary(law, opts, &rng);
            ReproductionLaw norm = law.normalized(bf);
            ResidualTriple res = boundary_residuals(norm, budget, &rng);
            payload = {{"normalizable", true},
                       {"theta_star", bf.theta_star},
                       {"kappa_star", bf.kappa_star},
                       {"sigma2", bf.sigma2},
                       {"residual_r1", res.r1},
                       {"residual_r2", res.r2},
                       {"sigma2_enumerated", res.sigma2},
                       {"exact", res.exact}};
            w.note("boundary_check: theta*=" + fmt(bf.theta_star) + " kappa*=" +
                   fmt(bf.kappa_star) + " sigma2=" + fmt(bf.sigma2) + " |r1|=" +
                   fmt(std::abs(res.r1)) + " |r2|=" + fmt(std::abs(res.r2)));
            csv << seed << ",1," << fmt(bf.theta_star) << ',' << fmt(bf.kappa_star) << ','
                << fmt(bf.sigma2) << ',' << fmt(res.r1) << ',' << fmt(res.r2) << ','
                << fmt(res.sigma2) << '\n';
        } catch (const NoBoundaryNormalization& e) {
            payload = {{"normalizable", false}, {"reason", e.what()}};
            w.note(std::string("boundary_check: ") + e.what());
            csv << seed << ",0,,,,,,\n";
        }
        w.record(seed, payload);
    }
    w.summary_csv(csv.str());
}

const std::vector<std::pair<std::string, PathFunctional>>& functional_battery() {
    static const std::vector<std::pair<std::string, PathFunctional>> battery = [] {
        std::vector<std::pair<std::string, PathFunctional>> b;
        b.push_back({"zero", [](const std::vector<double>&) { return 0.0; }});
        b.push_back({"one", [](const std::vector<double>&) { return 1.0; }});
        b.push_back({"end", [](const std::vector<double>& p) { return p.empty() ? 0.0 : p.back(); }});
        b.push_back({"end_sq", [](const std::vector<double>& p) {
                         return p.empty() ? 0.0 : p.back() * p.back();
                     }});
        b.push_back({"sum", [](const std::vector<double>& p) {
                         double s = 0;
                         for (double x : p) s += x;
                         return s;
                     }});
        b.push_back({"exp_neg_end", [](const std::vector<double>& p) {
                         return std::exp(-(p.empty() ? 0.0 : p.back()));
                     }});
        b.push_back({"min_ge_-1", [](const std::vector<double>& p) {
                         for (double x : p)
                             if (x < -1.0) return 0.0;
                         return 1.0;
                     }});
        b.push_back({"corridor_2", [](const std::vector<double>& p) {
                         for (double x : p)
                             if (x < -2.0 || x > 2.0) return 0.0;
                         return 1.0;
                     }});
        b.push_back({"max", [](const std::vector<double>& p) {
                         double m = -1e300;
                         for (double x : p) m = std::max(m, x);
                         return p.empty() ? 0.0 : m;
                     }});
        b.push_back({"abs_end", [](const std::vector<double>& p) {
                         return std::abs(p.empty() ? 0.0 : p.back());
                     }});
        b.push_back({"prod_pos", [](const std::vector<double>& p) {
                         double v = 1;
                         for (double x : p) v *= (x > 0 ? 1.0 : 0.5);
                         return v;
                     }});
        b.push_back({"end_cube", [](const std::vector<double>& p) {
                         double e = p.empty() ? 0.0 : p.back();
                         return e * e * e;
                     }});
        return b;
    }();
    return battery;
}

void run_many_to_one(const ExperimentConfig& cfg, RecordWriter& w) {
    PreparedLaw pl = prepared_law(cfg.resolved.at("law"));
    auto ns = size_list(cfg.resolved.at("n_list"), "n_list");
    std::size_t mc_reps = cfg.resolved.value("mc_reps", std::size_t{0});
    std::ostringstream csv;
    csv << "seed,n,functional,tree_side,spine_side,difference,mc_estimate,mc_stderr\n";
    for (auto seed : cfg.seeds) {
        for (auto n : ns) {
            json rows = json::array();
            double worst = 0;
            for (const auto& [name, g] : functional_battery()) {
                ManyToOneExact ex = many_to_one_exact(pl.law, n, g);
                json row = {{"functional", name},
                            {"tree_side", ex.tree_side},
                            {"spine_side", ex.spine_side},
                            {"difference", ex.difference}};
                worst = std::max(worst, std::abs(ex.difference));
                double mc = 0, mcse = 0;
                if (mc_reps > 0) {
                    RngStream rng(seed, kind_salt(cfg.kind) ^ n, 0);
                    SpineLaw sl(pl.law);
                    Estimate e = many_to_one_mc(sl, n, g, mc_reps, rng);
                    mc = e.value;
                    mcse = e.stderror;
                    row["mc_estimate"] = mc;
                    row["mc_stderr"] = mcse;
                }
                csv << seed << ',' << n << ',' << name << ',' << fmt(ex.tree_side) << ','
                    << fmt(ex.spine_side) << ',' << fmt(ex.difference) << ',' << fmt(mc) << ','
                    << fmt(mcse) << '\n';
                rows.push_back(row);
            }
            w.note("many_to_one: n=" + std::to_string(n) +
                   " worst |tree-spine| = " + fmt(worst));
            w.record(seed, json{{"n", n}, {"rows", rows}, {"worst_difference", worst}});
        }
    }
    w.summary_csv(csv.str());
}

void run_mogulskii_rate(const ExperimentConfig& cfg, RecordWriter& w) {
    StepLaw step = step_from_config(cfg.resolved.at("step"));
    BarrierProfile prof{profile_from_config_impl(cfg.resolved.at("profile_f")),
                        profile_from_config_impl(cfg.resolved.at("profile_g"))};
    auto ns = size_list(cfg.resolved.at("n_list"), "n_list");
    double sigma2 = cfg.resolved.value("sigma2", step.sigma2());
    double a_power = cfg.resolved.value("a_power", 1.0 / 3.0);
    std::string mode = cfg.resolved.value("mode", std::string("dp"));
    std::size_t mc_reps = cfg.resolved.value("mc_reps", std::size_t{200000});
    double start_z = cfg.resolved.value("start_z", 0.0);
    std::optional<std::pair<double, double>> target;
    if (cfg.resolved.contains("target")) {
        auto t = cfg.resolved.at("target").get<std::vector<double>>();
        if (t.size() != 2) throw ConfigError("target: expected [x, y]");
        target = {t[0], t[1]};
    }
    auto a_rule = [a_power](std::size_t n) { return std::pow(static_cast<double>(n), a_power); };

    std::ostringstream csv;
    csv << "seed,mode,n,a_n,estimate,stderr,scaled_log,target_constant\n";
    for (auto seed : cfg.seeds) {
        RngStream rng(seed, kind_salt(cfg.kind), 0);
        std::vector<RateReport> reports;
        if (mode == "dp" || mode == "both")
            reports.push_back(
                rate_convergence_report(step, prof, ns, sigma2, a_rule, 0, nullptr, target, start_z));
        if (mode == "mc" || mode == "both")
            reports.push_back(rate_convergence_report(step, prof, ns, sigma2, a_rule, mc_reps,
                                                      &rng, target, start_z));
        json jrows = json::array();
        for (const auto& rep : reports) {
            for (const auto& r : rep.rows) {
                csv << seed << ',' << (r.exact ? "dp" : "mc") << ',' << r.n << ',' << fmt(r.a_n)
                    << ',' << fmt(r.estimate) << ',' << fmt(r.stderror) << ','
                    << fmt(r.scaled_log) << ',' << fmt(r.target) << '\n';
                jrows.push_back({{"mode", r.exact ? "dp" : "mc"},
                                 {"n", r.n},
                                 {"a_n", r.a_n},
                                 {"estimate", r.estimate},
                                 {"stderr", r.stderror},
                                 {"scaled_log", std::isfinite(r.scaled_log) ? r.scaled_log : -1e308},
                                 {"target_constant", r.target}});
            }
            w.note("mogulskii_rate: target constant -H_1 = " + fmt(rep.target_constant));
        }
        w.record(seed, json{{"rows", jrows},
                            {"target_constant", reports.front().target_constant},
                            {"sigma2", sigma2}});
    }
    w.summary_csv(csv.str());
}

void run_curve_solve(const ExperimentConfig& cfg, RecordWriter& w) {
    Profile f = profile_from_config_impl(cfg.resolved.at("profile_f"));
    double sigma2 = cfg.resolved.at("sigma2").get<double>();
    double x = cfg.resolved.at("x").get<double>();
    std::size_t grid = cfg.resolved.value("grid", std::size_t{512});
    CriticalCurve c = solve_g(x, f, sigma2);
    double resid = curve_residual_max(c, f, sigma2);
    std::ostringstream csv;
    csv << "t,f_t,g_t\n";
    csv.precision(17);
    for (std::size_t i = 0; i < grid; ++i) {
        double t = c.t_max * static_cast<double>(i) / static_cast<double>(grid - 1);
        csv << t << ',' << f(t) << ',' << c.eval(t) << '\n';
    }
    w.note("curve_solve: t_max=" + fmt(c.t_max) + (c.touched ? " (touched)" : " (spans [0,1])") +
           " residual_max=" + fmt(resid));
    w.record(cfg.seeds.front(), json{{"x", x},
                                     {"t_max", c.t_max},
                                     {"touched", c.touched},
                                     {"residual_max", resid},
                                     {"g_end", c.eval(c.t_max)}});
    w.summary_csv(csv.str());
}

void run_lambda(const ExperimentConfig& cfg, RecordWriter& w) {
    Profile f = profile_from_config_impl(cfg.resolved.at("profile_f"));
    double sigma2 = cfg.resolved.at("sigma2").get<double>();
    LambdaResult lr = compute_lambda(f, sigma2);
    std::ostringstream csv;
    csv << "t,f_t,g_t\n";
    csv.precision(17);
    for (std::size_t i = 0; i < 512; ++i) {
        double t = static_cast<double>(i) / 511.0;
        csv << t << ',' << f(t) << ',' << lr.curve.eval(t) << '\n';
    }
    double closed = f(0.0) + std::cbrt(1.5 * M_PI * M_PI * sigma2);
    w.note("lambda: " + fmt(lr.lambda) +
           " (constant-f closed form would give " + fmt(closed) + ")");
    w.record(cfg.seeds.front(),
             json{{"lambda", lr.lambda}, {"iterations", lr.iterations}, {"sigma2", sigma2}});
    w.summary_csv(csv.str());
}

void run_killed_brw(const ExperimentConfig& cfg, RecordWriter& w) {
    PreparedLaw pl = prepared_law(cfg.resolved.at("law"));
    Profile f = profile_from_config_impl(cfg.resolved.at("profile_f"));
    auto ns = size_list(cfg.resolved.at("n_list"), "n_list");
    std::size_t reps = cfg.resolved.at("reps").get<std::size_t>();
    std::size_t cap = cfg.resolved.value("population_cap", std::size_t{500000});

    double lambda = NAN;
    try {
        lambda = compute_lambda(f, pl.form.sigma2).lambda;
        w.note("killed_brw: lambda(f) = " + fmt(lambda) +
               (lambda < 0 ? " < 0: survival has positive limiting probability"
                           : " >= 0: survival probability decays like exp(-lambda n^{1/3})"));
    } catch (const Error& e) {
        w.note(std::string("killed_brw: lambda unavailable (") + e.what() + ")");
    }

    std::ostringstream csv;
    csv << "seed,n,reps,hits,survival,ci_lo,ci_hi\n";
    for (auto seed : cfg.seeds) {
        for (std::size_t ni = 0; ni < ns.size(); ++ni) {
            std::size_t n = ns[ni];
            std::vector<char> survived(reps, 0);
            parallel_replicas(reps, cfg.workers, [&](std::size_t r) {
                RngStream rng(seed, kind_salt(cfg.kind) ^ ni, r);
                survived[r] = killed_survival_replica(pl.law, f, n, rng, cap) ? 1 : 0;
            });
            std::size_t hits = 0;
            for (char c : survived) hits += c;
            double p = static_cast<double>(hits) / static_cast<double>(reps);
            Interval ci = wilson_ci(hits, reps);
            csv << seed << ',' << n << ',' << reps << ',' << hits << ',' << fmt(p) << ','
                << fmt(ci.lo) << ',' << fmt(ci.hi) << '\n';
            w.note("killed_brw: n=" + std::to_string(n) + " survival=" + fmt(p) + " [" +
                   fmt(ci.lo) + ", " + fmt(ci.hi) + "]");
            w.record(seed, json{{"n", n},
                                {"reps", reps},
                                {"hits", hits},
                                {"survival", p},
                                {"ci_lo", ci.lo},
                                {"ci_hi", ci.hi},
                                {"lambda", std::isnan(lambda) ? json() : json(lambda)},
                                {"sigma2", pl.form.sigma2}});
        }
    }
    w.summary_csv(csv.str());
}

void run_selection(const ExperimentConfig& cfg, RecordWriter& w, bool fixed) {
    PreparedLaw pl = prepared_law(cfg.resolved.at("law"));
    auto ns = size_list(cfg.resolved.at("n_list"), "n_list");
    std::size_t reps = cfg.resolved.at("reps").get<std::size_t>();
    std::size_t cap = cfg.resolved.value("population_cap", std::size_t{2000000});
    const double s2 = pl.form.sigma2;

    double target_M = 0, target_m = 0;
    Profile h;
    double a = 0;
    if (fixed) {
        a = cfg.resolved.at("a").get<double>();
        target_M = -1.5 * M_PI * M_PI * s2 / (a * a);
        target_m = -(a + 1.5 * M_PI * M_PI * s2 / (a * a));
        w.note("selection_fixed: targets M_n/n^{1/3} -> " + fmt(target_M) +
               ", m_n/n^{1/3} -> " + fmt(target_m) + " (proof-derived constant)");
    } else {
        h = profile_from_config_impl(cfg.resolved.at("profile_h"));
        SelectionCurvePair sc = selection_curves(h, s2);
        target_M = sc.g(1.0);
        target_m = sc.f(1.0);
        w.note("selection_profile: targets M_n/n^{1/3} -> " + fmt(target_M) +
               ", m_n/n^{1/3} -> " + fmt(target_m));
    }

    std::ostringstream csv;
    csv << "seed,n,reps,mean_M_scaled,se_M,mean_m_scaled,se_m,target_M,target_m\n";
    for (auto seed : cfg.seeds) {
        for (std::size_t ni = 0; ni < ns.size(); ++ni) {
            std::size_t n = ns[ni];
            std::vector<double> Ms(reps), ms(reps);
            parallel_replicas(reps, cfg.workers, [&](std::size_t r) {
                RngStream rng(seed, kind_salt(cfg.kind) ^ ni, r);
                SurvivalRegime regime =
                    fixed ? SurvivalRegime(TopCount::exp_cbrt(a))
                          : SurvivalRegime(SelectionProfile{h, n});
                RunStats st = run(regime, pl.law, n, rng, seed, cap);
                const auto& rec = st.per_generation.back();
                double n13 = std::cbrt(static_cast<double>(n));
                Ms[r] = rec.max_pos / n13;
                ms[r] = rec.min_pos / n13;
            });
            MeanVar accM, accm;
            for (std::size_t r = 0; r < reps; ++r) {
                accM.add(Ms[r]);
                accm.add(ms[r]);
            }
            csv << seed << ',' << n << ',' << reps << ',' << fmt(accM.mean()) << ','
                << fmt(accM.stderror()) << ',' << fmt(accm.mean()) << ',' << fmt(accm.stderror())
                << ',' << fmt(target_M) << ',' << fmt(target_m) << '\n';
            w.note((fixed ? "selection_fixed" : "selection_profile") + std::string(": n=") +
                   std::to_string(n) + " M/n^{1/3}=" + fmt(accM.mean()) + "±" +
                   fmt(accM.stderror()) + " m/n^{1/3}=" + fmt(accm.mean()) + "±" +
                   fmt(accm.stderror()));
            w.record(seed, json{{"n", n},
                                {"mean_M_scaled", accM.mean()},
                                {"se_M", accM.stderror()},
                                {"mean_m_scaled", accm.mean()},
                                {"se_m", accm.stderror()},
                                {"target_M", target_M},
                                {"target_m", target_m},
                                {"sigma2", s2}});
        }
    }
    w.summary_csv(csv.str());
}

void run_consistent_displacement(const ExperimentConfig& cfg, RecordWriter& w) {
    PreparedLaw pl = prepared_law(cfg.resolved.at("law"));
    auto ns = size_list(cfg.resolved.at("n_list"), "n_list");
    std::size_t reps = cfg.resolved.at("reps").get<std::size_t>();
    PruneOptions popts;
    popts.slack = cfg.resolved.value("slack", 0.0);
    popts.cap = cfg.resolved.value("lineage_cap", std::size_t{200000});
    const double target = -std::cbrt(1.5 * M_PI * M_PI * pl.form.sigma2);
    w.note("consistent_displacement: limit constant -(3 pi^2 sigma^2/2)^{1/3} = " + fmt(target));

    std::ostringstream csv;
    csv << "seed,n,reps,median_scaled,q25,q75,mean,se,target\n";
    for (auto seed : cfg.seeds) {
        for (std::size_t ni = 0; ni < ns.size(); ++ni) {
            std::size_t n = ns[ni];
            std::vector<double> vals(reps);
            parallel_replicas(reps, cfg.workers, [&](std::size_t r) {
                RngStream rng(seed, kind_salt(cfg.kind) ^ ni, r);
                auto cd = consistent_min_displacement(pl.law, n, rng, popts);
                vals[r] = cd.value / std::cbrt(static_cast<double>(n));
            });
            std::vector<double> sorted = vals;
            std::sort(sorted.begin(), sorted.end());
            double med = median_of(vals);
            double q25 = sorted[sorted.size() / 4];
            double q75 = sorted[(3 * sorted.size()) / 4];
            MeanVar acc;
            for (double v : vals) acc.add(v);
            csv << seed << ',' << n << ',' << reps << ',' << fmt(med) << ',' << fmt(q25) << ','
                << fmt(q75) << ',' << fmt(acc.mean()) << ',' << fmt(acc.stderror()) << ','
                << fmt(target) << '\n';
            w.note("consistent_displacement: n=" + std::to_string(n) + " median/n^{1/3}=" +
                   fmt(med) + " [q25 " + fmt(q25) + ", q75 " + fmt(q75) + "] target " +
                   fmt(target));
            w.record(seed, json{{"n", n},
                                {"median_scaled", med},
                                {"q25", q25},
                                {"q75", q75},
                                {"mean", acc.mean()},
                                {"se", acc.stderror()},
                                {"target", target},
                                {"sigma2", pl.form.sigma2}});
        }
    }
    w.summary_csv(csv.str());
}

void run_survival_scaling(const ExperimentConfig& cfg, RecordWriter& w) {
    PreparedLaw pl = prepared_law(cfg.resolved.at("law"));
    std::size_t reps = cfg.resolved.at("reps").get<std::size_t>();
    std::size_t cap = cfg.resolved.value("population_cap", std::size_t{500000});
    const double s2 = pl.form.sigma2;
    const double sigma = std::sqrt(s2);

    std::vector<std::pair<double, std::size_t>> cells;
    double theta = cfg.resolved.value("theta", 0.0);
    if (cfg.resolved.contains("cells")) {
        for (const auto& c : cfg.resolved.at("cells"))
            cells.push_back({c.at(0).get<double>(), c.at(1).get<std::size_t>()});
    } else {
        for (auto n : size_list(cfg.resolved.at("n_list"), "n_list"))
            cells.push_back({theta * std::pow(static_cast<double>(n), -2.0 / 3.0), n});
    }

    std::ostringstream csv;
    csv << "seed,eps,n,theta,reps,hits,rho_hat,ci_lo,ci_hi,n13_log,sqrt_eps_log,bracket_lo,"
           "bracket_hi\n";
    for (auto seed : cfg.seeds) {
        auto res = survival_scaling_experiment(pl.law, cells, reps, seed ^ kind_salt(cfg.kind),
                                               cap);
        for (const auto& cell : res) {
            double th = cell.eps * std::pow(static_cast<double>(cell.n), 2.0 / 3.0);
            double blo = -M_PI * sigma / std::sqrt(2.0 * th);
            double bhi = -phi_inverse(th, s2);
            csv << seed << ',' << fmt(cell.eps) << ',' << cell.n << ',' << fmt(th) << ','
                << cell.reps << ',' << cell.hits << ',' << fmt(cell.rho_hat) << ','
                << fmt(cell.ci.lo) << ',' << fmt(cell.ci.hi) << ',' << fmt(cell.n13_log) << ','
                << fmt(cell.sqrt_eps_log) << ',' << fmt(blo) << ',' << fmt(bhi) << '\n';
            w.note("survival_scaling: n=" + std::to_string(cell.n) + " eps=" + fmt(cell.eps) +
                   " rho_hat=" + fmt(cell.rho_hat) + (cell.zero_hits ? " (zero hits)" : "") +
                   " n13_log=" + fmt(cell.n13_log) + " bracket=[" + fmt(blo) + ", " + fmt(bhi) +
                   "]  reference -pi*sigma/sqrt(2) = " + fmt(-M_PI * sigma / std::sqrt(2.0)));
            w.record(seed, json{{"eps", cell.eps},
                                {"n", cell.n},
                                {"theta", th},
                                {"reps", cell.reps},
                                {"hits", cell.hits},
                                {"rho_hat", cell.rho_hat},
                                {"ci_lo", cell.ci.lo},
                                {"ci_hi", cell.ci.hi},
                                {"zero_hits", cell.zero_hits},
                                {"bracket_lo", blo},
                                {"bracket_hi", bhi},
                                {"sigma2", s2}});
        }
    }
    w.summary_csv(csv.str());
}

void run_gw_tail(const ExperimentConfig& cfg, RecordWriter& w) {
    std::map<unsigned, double> pmf;
    for (auto it = cfg.resolved.at("offspring_pmf").begin();
         it != cfg.resolved.at("offspring_pmf").end(); ++it)
        pmf[static_cast<unsigned>(std::stoul(it.key()))] = it.value().get<double>();
    OffspringLaw law = OffspringLaw::from_pmf(pmf);
    auto zs = cfg.resolved.at("z_list").get<std::vector<double>>();
    auto ns = size_list(cfg.resolved.at("n_list"), "n_list");
    std::size_t reps = cfg.resolved.at("reps").get<std::size_t>();
    bool exact = cfg.resolved.value("exact", true);

    const unsigned b = law.min_support();
    std::string case_tag = b == 0 ? "b0" : (b == 1 ? "b1" : "b2plus");
    w.note("gw_tail: m=" + fmt(law.mean()) + " b=" + std::to_string(b) + " q=" +
           fmt(law.extinction_prob()) + " case=" + case_tag);
    if (b >= 2) {
        double expo = std::log(static_cast<double>(b)) /
                      (std::log(law.mean()) - std::log(static_cast<double>(b)));
        w.note("gw_tail: tail exponent log b/(log m - log b) = " + fmt(expo));
    } else {
        w.note("gw_tail: alpha = " + fmt(law.alpha()));
    }

    std::ostringstream csv;
    csv << "seed,z,n,empirical,ci_lo,ci_hi,exact_log,bound,case_tag\n";
    for (auto seed : cfg.seeds) {
        for (auto n : ns) {
            for (auto z : zs) {
                RngStream rng(seed, kind_salt(cfg.kind) ^ n, static_cast<std::uint64_t>(z * 1e9));
                TailEmpirical emp = left_tail_empirical(law, z, n, reps, rng);
                double exlog = NAN;
                if (exact) exlog = left_tail_exact_log(law, z, n);
                TailBound bound = left_tail_bound(law, z, 1.0);
                csv << seed << ',' << fmt(z) << ',' << n << ',' << fmt(emp.freq) << ','
                    << fmt(emp.ci.lo) << ',' << fmt(emp.ci.hi) << ','
                    << (std::isnan(exlog) ? "" : fmt(exlog)) << ',' << fmt(bound.value) << ','
                    << case_tag << '\n';
                w.record(seed, json{{"z", z},
                                    {"n", n},
                                    {"empirical", emp.freq},
                                    {"ci_lo", emp.ci.lo},
                                    {"ci_hi", emp.ci.hi},
                                    {"hits", emp.hits},
                                    {"reps", emp.reps},
                                    {"exact_log", std::isnan(exlog) ? json() : json(exlog)},
                                    {"bound", bound.value},
                                    {"case_tag", case_tag}});
            }
        }
    }
    w.summary_csv(csv.str());
}

void run_coupling_property(const ExperimentConfig& cfg, RecordWriter& w) {
    std::size_t instances = cfg.resolved.value("instances", std::size_t{200});
    std::size_t horizon = cfg.resolved.value("horizon", std::size_t{50});
    std::size_t cap_base_max = cfg.resolved.value("cap_base_max", std::size_t{30});
    std::size_t cap_extra_max = cfg.resolved.value("cap_extra_max", std::size_t{50});

    std::ostringstream csv;
    csv << "seed,instance,p_up,cap_a,cap_b,order_held\n";
    std::size_t violations = 0, total = 0;
    for (auto seed : cfg.seeds) {
        for (std::size_t i = 0; i < instances; ++i) {
            RngStream gen(seed, kind_salt(cfg.kind), i);
            double p_up = 0.1 + 0.35 * gen.u01();
            ReproductionLaw base = ReproductionLaw::binary_pm1(p_up);
            ReproductionLaw law = base.normalized(normalize_to_boundary(base));
            std::size_t cap_a = 1 + gen.below(cap_base_max);
            std::size_t cap_b = cap_a + gen.below(cap_extra_max + 1);
            CoupledRun cr = coupled_run(TopCount::fixed(cap_a), TopCount::fixed(cap_b), law,
                                        horizon, gen.next_u64());
            ++total;
            if (!cr.all_held) ++violations;
            csv << seed << ',' << i << ',' << fmt(p_up) << ',' << cap_a << ',' << cap_b << ','
                << (cr.all_held ? 1 : 0) << '\n';
            w.record(seed, json{{"instance", i},
                                {"p_up", p_up},
                                {"cap_a", cap_a},
                                {"cap_b", cap_b},
                                {"order_held", cr.all_held}});
        }
    }
    w.note("coupling_property: " + std::to_string(violations) + " violations in " +
           std::to_string(total) + " instances");
    w.summary_csv(csv.str());
}

}  // namespace

// ------------------------------------------------------------------ public

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds = {
        "boundary_check", "many_to_one",     "mogulskii_rate",          "curve_solve",
        "lambda",         "killed_brw",      "selection_fixed",         "selection_profile",
        "consistent_displacement",           "survival_scaling",        "gw_tail",
        "coupling_property"};
    return kinds;
}

ReproductionLaw law_from_config(const json& spec) { return law_from_config_impl(spec); }
Profile profile_from_config(const json& spec) { return profile_from_config_impl(spec); }

ExperimentConfig ExperimentConfig::parse(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
    require(doc, "schema_version", "config");
    if (doc.at("schema_version").get<int>() != kSchemaVersion)
        throw ConfigError("config: unsupported schema_version");
    require(doc, "kind", "config");
    ExperimentConfig cfg;
    cfg.kind = doc.at("kind").get<std::string>();
    validate_kind(doc, cfg.kind);

    cfg.resolved = doc;
    if (!cfg.resolved.contains("seeds")) cfg.resolved["seeds"] = json::array({1});
    cfg.seeds = cfg.resolved.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
    if (!cfg.resolved.contains("out_dir")) cfg.resolved["out_dir"] = "out/" + cfg.kind;
    if (const char* env = std::getenv("BRWS_OUT")) cfg.resolved["out_dir"] = std::string(env);
    cfg.out_dir = cfg.resolved.at("out_dir").get<std::string>();
    cfg.workers = cfg.resolved.value("workers", std::size_t{1});
    if (cfg.workers == 0) throw ConfigError("config: workers must be >= 1");

    // early structural validation of nested blocks
    if (cfg.resolved.contains("law")) law_from_config_impl(cfg.resolved.at("law"));
    for (const char* key : {"profile_f", "profile_g", "profile_h"})
        if (cfg.resolved.contains(key)) profile_from_config_impl(cfg.resolved.at(key));
    if (cfg.resolved.contains("step")) step_from_config(cfg.resolved.at("step"));
    for (const char* key : {"n_list", "z_list"})
        if (cfg.resolved.contains(key) &&
            (!cfg.resolved.at(key).is_array() || cfg.resolved.at(key).empty()))
            throw ConfigError(std::string("config: ") + key + " must be a non-empty array");
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        f >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse(doc);
}

std::string ExperimentConfig::config_hash() const {
    // out_dir and workers do not affect results; hash the rest canonically
    json j = resolved;
    j.erase("out_dir");
    j.erase("workers");
    return fnv1a(j.dump());
}

RunOutputs run_experiment(const ExperimentConfig& cfg) {
    RunOutputs out;
    RecordWriter writer(cfg, out);
    if (cfg.kind == "boundary_check")
        run_boundary_check(cfg, writer);
    else if (cfg.kind == "many_to_one")
        run_many_to_one(cfg, writer);
    else if (cfg.kind == "mogulskii_rate")
        run_mogulskii_rate(cfg, writer);
    else if (cfg.kind == "curve_solve")
        run_curve_solve(cfg, writer);
    else if (cfg.kind == "lambda")
        run_lambda(cfg, writer);
    else if (cfg.kind == "killed_brw")
        run_killed_brw(cfg, writer);
    else if (cfg.kind == "selection_fixed")
        run_selection(cfg, writer, true);
    else if (cfg.kind == "selection_profile")
        run_selection(cfg, writer, false);
    else if (cfg.kind == "consistent_displacement")
        run_consistent_displacement(cfg, writer);
    else if (cfg.kind == "survival_scaling")
        run_survival_scaling(cfg, writer);
    else if (cfg.kind == "gw_tail")
        run_gw_tail(cfg, writer);
    else if (cfg.kind == "coupling_property")
        run_coupling_property(cfg, writer);
    else
        throw ConfigError("run_experiment: unknown kind " + cfg.kind);
    return out;
}

std::string emit_plot_data(const std::string& records_path) {
    std::ifstream f(records_path);
    if (!f) throw ConfigError("cannot open records file: " + records_path);
    std::ostringstream csv;
    csv.precision(17);
    csv << "x,y,series,ci_lo,ci_hi\n";
    std::string line;
    std::size_t lineno = 0;
    std::string hash;
    std::string kind;
    std::vector<json> payloads;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError("records line " + std::to_string(lineno) +
                              ": malformed JSON record (" + e.what() + ")");
        }
        if (!rec.contains("config_hash") || !rec.contains("payload") || !rec.contains("kind"))
            throw ConfigError("records line " + std::to_string(lineno) + ": not a result record");
        std::string h = rec.at("config_hash").get<std::string>();
        if (hash.empty()) {
            hash = h;
            kind = rec.at("kind").get<std::string>();
        } else if (h != hash) {
            throw ConfigError("records line " + std::to_string(lineno) +
                              ": mixed-config inputs rejected (hash " + h + " != " + hash + ")");
        }
        payloads.push_back(rec.at("payload"));
    }
    if (payloads.empty()) throw ConfigError("records file has no records");

    auto num = [](const json& j, const char* k) { return j.at(k).get<double>(); };
    if (kind == "survival_scaling") {
        double sigma = std::sqrt(payloads.front().value("sigma2", 1.0));
        for (const auto& p : payloads) {
            double rho = num(p, "rho_hat");
            double eps = num(p, "eps");
            double y = rho > 0 ? std::sqrt(eps) * std::log(rho) : -1e308;
            double lo = num(p, "ci_lo") > 0 ? std::sqrt(eps) * std::log(num(p, "ci_lo")) : -1e308;
            double hi = num(p, "ci_hi") > 0 ? std::sqrt(eps) * std::log(num(p, "ci_hi")) : -1e308;
            csv << eps << ',' << y << ",measurement," << lo << ',' << hi << '\n';
            csv << eps << ',' << -M_PI * sigma / std::sqrt(2.0) << ",reference,,\n";
        }
    } else if (kind == "mogulskii_rate") {
        for (const auto& p : payloads)
            for (const auto& r : p.at("rows")) {
                csv << num(r, "n") << ',' << num(r, "scaled_log") << ",scaled_log_"
                    << r.at("mode").get<std::string>() << ",,\n";
                csv << num(r, "n") << ',' << num(r, "target_constant") << ",reference,,\n";
            }
    } else if (kind == "killed_brw") {
        for (const auto& p : payloads)
            csv << num(p, "n") << ',' << num(p, "survival") << ",survival," << num(p, "ci_lo")
                << ',' << num(p, "ci_hi") << '\n';
    } else if (kind == "gw_tail") {
        for (const auto& p : payloads) {
            csv << num(p, "z") << ',' << num(p, "empirical") << ",empirical_n"
                << p.at("n").get<std::size_t>() << ',' << num(p, "ci_lo") << ','
                << num(p, "ci_hi") << '\n';
            csv << num(p, "z") << ',' << num(p, "bound") << ",bound_n"
                << p.at("n").get<std::size_t>() << ",,\n";
        }
    } else if (kind == "selection_fixed" || kind == "selection_profile") {
        for (const auto& p : payloads) {
            csv << num(p, "n") << ',' << num(p, "mean_M_scaled") << ",M_scaled,,\n";
            csv << num(p, "n") << ',' << num(p, "mean_m_scaled") << ",m_scaled,,\n";
            csv << num(p, "n") << ',' << num(p, "target_M") << ",reference_M,,\n";
            csv << num(p, "n") << ',' << num(p, "target_m") << ",reference_m,,\n";
        }
    } else if (kind == "consistent_displacement") {
        for (const auto& p : payloads) {
            csv << num(p, "n") << ',' << num(p, "median_scaled") << ",median," << num(p, "q25")
                << ',' << num(p, "q75") << '\n';
            csv << num(p, "n") << ',' << num(p, "target") << ",reference,,\n";
        }
    } else {
        throw ConfigError("emit_plot_data: no plot mapping for kind '" + kind + "'");
    }
    return csv.str();
}

}  // namespace brws
