#include "brws/curves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brws/errors.hpp"
#include "brws/quadrature.hpp"
#include "brws/walks.hpp"

namespace brws {

namespace {

double hermite(double t0, double t1, double y0, double y1, double d0, double d1, double t) {
    double h = t1 - t0;
    double s = (t - t0) / h;
    double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * y1 +
           (s3 - s2) * h * d1;
}

double hermite_deriv(double t0, double t1, double y0, double y1, double d0, double d1, double t) {
    double h = t1 - t0;
    double s = (t - t0) / h;
    double s2 = s * s;
    return ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * d0 + (-6 * s2 + 6 * s) * y1 +
            (3 * s2 - 2 * s) * h * d1) /
           h;
}

std::size_t locate(const std::vector<double>& ts, double t) {
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    std::size_t i = static_cast<std::size_t>(it - ts.begin());
    if (i == 0) return 0;
    if (i >= ts.size()) return ts.size() - 2;
    return i - 1;
}

}  // namespace

double CriticalCurve::eval(double time) const {
    if (time <= t.front()) return g.front();
    if (time >= t.back()) return g.back();
    std::size_t i = locate(t, time);
    return hermite(t[i], t[i + 1], g[i], g[i + 1], dg[i], dg[i + 1], time);
}

double CriticalCurve::deriv(double time) const {
    if (time <= t.front()) return dg.front();
    if (time >= t.back()) return dg.back();
    std::size_t i = locate(t, time);
    return hermite_deriv(t[i], t[i + 1], g[i], g[i + 1], dg[i], dg[i + 1], time);
}

Profile CriticalCurve::as_profile(std::size_t knots) const {
    std::vector<double> ts(knots), vs(knots);
    for (std::size_t i = 0; i < knots; ++i) {
        double x = static_cast<double>(i) / static_cast<double>(knots - 1);
        ts[i] = x;
        vs[i] = eval(std::min(x, t_max));
    }
    return Profile::table(std::move(ts), std::move(vs));
}

CriticalCurve solve_g(double x, const Profile& f, double sigma2, SolveOptions opts) {
    if (!(x > f(0.0))) throw ConfigError("solve_g: start must satisfy x > f(0)");
    const double C = 0.5 * M_PI * M_PI * sigma2;
    const double w_init = x - f(0.0);
    const double w_switch = std::max(opts.cubic_switch_frac * w_init, 4.0 * opts.touch_tol);

    auto rhs = [&](double t, double gv) {
        double w = gv - f(t);
        return -C / (w * w);
    };

    CriticalCurve curve;
    curve.start = x;
    curve.t.push_back(0.0);
    curve.g.push_back(x);
    curve.dg.push_back(rhs(0.0, x));

    // Cash-Karp 4(5) embedded pair
    static const double a2 = 0.2, a3 = 0.3, a4 = 0.6, a5 = 1.0, a6 = 0.875;
    static const double b21 = 0.2;
    static const double b31 = 3.0 / 40, b32 = 9.0 / 40;
    static const double b41 = 0.3, b42 = -0.9, b43 = 1.2;
    static const double b51 = -11.0 / 54, b52 = 2.5, b53 = -70.0 / 27, b54 = 35.0 / 27;
    static const double b61 = 1631.0 / 55296, b62 = 175.0 / 512, b63 = 575.0 / 13824,
                        b64 = 44275.0 / 110592, b65 = 253.0 / 4096;
    static const double c1 = 37.0 / 378, c3 = 250.0 / 621, c4 = 125.0 / 594, c6 = 512.0 / 1771;
    static const double d1 = c1 - 2825.0 / 27648, d3 = c3 - 18575.0 / 48384,
                        d4 = c4 - 13525.0 / 55296, d5 = -277.0 / 14336, d6 = c6 - 0.25;

    double t = 0.0, g = x;
    double h = std::min(opts.max_step, 1e-3);
    bool in_cubic = false;

    while (t < 1.0) {
        double w = g - f(t);
        if (w <= opts.touch_tol) {
            curve.touched = true;
            break;
        }
        if (w < w_switch) {
            in_cubic = true;
            break;
        }
        if (t + h > 1.0) h = 1.0 - t;
        // keep steps small relative to the distance to the touch region
        double h_guard = 0.2 * w * w * w / (3.0 * C);
        if (h > h_guard) h = h_guard;
        // knot density for cubic-Hermite evaluation: |g''''| ~ 80 C^4 / w^11,
        // interpolation error h^4 |g''''| / 384 kept near 1e-12 per knot
        double h_dense = std::pow(4.8e-12 * std::pow(w, 11.0) / (C * C * C * C), 0.25);
        if (h > h_dense) h = h_dense;
        if (t + h == t) {  // touch unresolvable at double time resolution
            curve.touched = true;
            break;
        }

        double k1 = rhs(t, g);
        double k2 = rhs(t + a2 * h, g + h * b21 * k1);
        double k3 = rhs(t + a3 * h, g + h * (b31 * k1 + b32 * k2));
        double k4 = rhs(t + a4 * h, g + h * (b41 * k1 + b42 * k2 + b43 * k3));
        double k5 = rhs(t + a5 * h, g + h * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4));
        double k6 =
            rhs(t + a6 * h, g + h * (b61 * k1 + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5));
        double g5 = g + h * (c1 * k1 + c3 * k3 + c4 * k4 + c6 * k6);
        double err = std::abs(h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6));
        double scale = opts.rel_tol * std::max(std::abs(g), w_init);
        double h_floor = 16.0 * std::numeric_limits<double>::epsilon() * std::max(t, 1e-30);
        if (err > scale && h > h_floor) {
            h *= std::max(0.2, 0.9 * std::pow(scale / err, 0.25));
            continue;
        }
        if (g5 - f(t + h) <= 0.0) {  // overshot the touch; retry shorter
            h *= 0.5;
            if (h <= h_floor || t + h == t) {
                curve.touched = true;
                break;
            }
            continue;
        }
        t += h;
        g = g5;
        curve.t.push_back(t);
        curve.g.push_back(g);
        curve.dg.push_back(rhs(t, g));
        if (err > 0.0) h = std::min({opts.max_step, h * std::min(5.0, 0.9 * std::pow(scale / err, 0.2)), 1.0});
        else h = std::min(opts.max_step, h * 5.0);
    }

    if (in_cubic) {
        // (g - f)^3 is locally linear with slope -3C (f variation enters at
        // O(w^2) and the remaining interval has length O(w^3)). Knots follow
        // geometric width levels so Hermite evaluation stays accurate across
        // the cube-root profile.
        double w_cur = g - f(t);
        double t_cur = t;
        bool reached_one = false;
        while (w_cur > opts.touch_tol) {
            double shrink = std::pow(1e-12 / (2.6e-3 * w_cur), 0.25);  // 1 - rho^3
            shrink = std::clamp(shrink, 1e-3, 0.5);
            double w3_next = w_cur * w_cur * w_cur * (1.0 - shrink);
            double t_next = t_cur + (w_cur * w_cur * w_cur - w3_next) / (3.0 * C);
            if (t_next >= 1.0) {
                double w1 =
                    std::cbrt(w_cur * w_cur * w_cur - 3.0 * C * (1.0 - t_cur));
                curve.t.push_back(1.0);
                curve.g.push_back(f(1.0) + w1);
                curve.dg.push_back(-C / (w1 * w1));
                reached_one = true;
                break;
            }
            double w_next = std::cbrt(w3_next);
            curve.t.push_back(t_next);
            curve.g.push_back(f(t_next) + w_next);
            curve.dg.push_back(-C / (w_next * w_next));
            t_cur = t_next;
            w_cur = w_next;
        }
        if (reached_one) {
            curve.t_max = 1.0;
            curve.touched = false;
        } else {
            curve.t_max = t_cur + w_cur * w_cur * w_cur / (3.0 * C);
            curve.touched = true;
            if (curve.t.back() < curve.t_max) {
                double w_end = opts.touch_tol;
                curve.t.push_back(curve.t_max);
                curve.g.push_back(f(curve.t_max) + w_end);
                curve.dg.push_back(-C / (w_end * w_end));
            }
        }
    } else if (curve.touched) {
        curve.t_max = t;
    } else {
        curve.t_max = 1.0;
    }
    return curve;
}

double curve_residual_max(const CriticalCurve& curve, const Profile& f, double sigma2) {
    const double C = 0.5 * M_PI * M_PI * sigma2;
    auto phi_s = [&](double s) {
        double w = curve.eval(s) - f(s);
        return 1.0 / (w * w);
    };
    double worst = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < curve.t.size(); ++i) {
        acc += gauss_legendre(phi_s, curve.t[i], curve.t[i + 1], 2);
        double resid = std::abs(curve.g[i + 1] - curve.start + C * acc);
        // skip the touch neighbourhood: below ~1e-3 of the initial width the
        // identity is cancellation-limited in double (delta(w^3) ~ eps w0^3
        // amplified by 1/(3w^2)) and the stored tail is model-based anyway
        double w = curve.g[i + 1] - f(curve.t[i + 1]);
        if (w > 1e-3 * (curve.start - f(0.0))) worst = std::max(worst, resid);
    }
    return worst;
}

LambdaResult compute_lambda(const Profile& f, double sigma2, LambdaOptions opts) {
    const double c0 = std::cbrt(1.5 * M_PI * M_PI * sigma2);
    double f0 = f(0.0);
    double x_lo = f0 + 1e-7 * std::max(1.0, std::abs(f0));
    double x_hi = opts.x_max_override ? *opts.x_max_override : f.max_on_grid() + 10.0 * c0;

    auto spans = [&](double x) {
        if (!(x > f0)) return false;
        CriticalCurve c = solve_g(x, f, sigma2, opts.solve);
        return !c.touched && c.t_max >= 1.0;
    };

    std::vector<std::pair<double, bool>> scan;
    bool lo_ok = spans(x_lo);
    scan.push_back({x_lo, lo_ok});
    if (lo_ok)
        throw BracketFailure("compute_lambda: predicate already true at the lower scan end x=" +
                             std::to_string(x_lo));
    bool hi_ok = spans(x_hi);
    scan.push_back({x_hi, hi_ok});
    if (!hi_ok)
        throw BracketFailure("compute_lambda: predicate false at X_max=" + std::to_string(x_hi) +
                             " (scan: lo=" + std::to_string(x_lo) + " false, hi false)");

    std::size_t it = 0;
    while (x_hi - x_lo > opts.tol) {
        double mid = 0.5 * (x_lo + x_hi);
        if (spans(mid))
            x_hi = mid;
        else
            x_lo = mid;
        if (++it > 200) break;
    }
    double lambda = 0.5 * (x_lo + x_hi);
    return {lambda, solve_g(x_hi, f, sigma2, opts.solve), it};
}

SelectionCurvePair selection_curves(const Profile& h, double sigma2, std::size_t grid) {
    if (grid < 2) throw ConfigError("selection_curves: grid too small");
    // positivity
    for (std::size_t i = 0; i <= 256; ++i)
        if (!(h(static_cast<double>(i) / 256.0) > 0.0))
            throw ConfigError("selection_curves: h must be strictly positive");
    const double C = 0.5 * M_PI * M_PI * sigma2;
    const double h0 = h(0.0);
    auto inv_h2 = [&h](double s) {
        double v = h(s);
        return 1.0 / (v * v);
    };
    std::vector<double> ts(grid), gs(grid), fs(grid);
    double acc = 0.0;
    ts[0] = 0.0;
    gs[0] = h0;
    fs[0] = h0 - h(0.0);
    for (std::size_t i = 1; i < grid; ++i) {
        double t0 = static_cast<double>(i - 1) / static_cast<double>(grid - 1);
        double t1 = static_cast<double>(i) / static_cast<double>(grid - 1);
        acc += gauss_legendre(inv_h2, t0, t1, 1);
        ts[i] = t1;
        gs[i] = h0 - C * acc;
        fs[i] = gs[i] - h(t1);
    }
    ts.back() = 1.0;
    SelectionCurvePair out;
    out.g = Profile::table(ts, gs);
    out.f = Profile::table(std::move(ts), std::move(fs));
    return out;
}

double phi(double lambda, double sigma2) {
    if (!(lambda > 0)) throw ConfigError("phi: lambda must be positive");
    return 0.5 * M_PI * M_PI * sigma2 / (lambda * lambda) - lambda / 3.0;
}

double phi_inverse(double theta, double sigma2) {
    if (!(theta > 0))
        throw ConfigError("phi_inverse: theta must lie in the positive branch of Phi");
    // Phi is strictly decreasing; Phi > 0 on (0, (3 pi^2 sigma^2/2)^{1/3})
    double hi = std::cbrt(1.5 * M_PI * M_PI * sigma2);
    double lo = std::min(1e-12, hi * 1e-9);
    for (int i = 0; i < 400; ++i) {
        double mid = 0.5 * (lo + hi);
        if (phi(mid, sigma2) > theta)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-16 * std::max(1.0, hi)) break;
    }
    double lambda = 0.5 * (lo + hi);
    if (std::abs(phi(lambda, sigma2) - theta) > 1e-9 * std::max(1.0, theta))
        throw NumericsError("phi_inverse: bisection failed to meet residual tolerance");
    return lambda;
}

}  // namespace brws
