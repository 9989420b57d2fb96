#ifndef BRWS_CURVES_HPP
#define BRWS_CURVES_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "brws/profile.hpp"

namespace brws {

/// Solution of g' = -pi^2 sigma^2 / (2 (g - f)^2), g(0) = x, on its maximal
/// interval [0, t_max]: either t_max = 1 or the curve touches f at t_max.
/// Stored as (t, g, g') knots; evaluation is cubic Hermite.
struct CriticalCurve {
    double start = 0.0;
    std::vector<double> t, g, dg;
    double t_max = 0.0;
    bool touched = false;

    double eval(double time) const;
    double deriv(double time) const;
    /// Dense table profile of the curve on [0,1]; beyond t_max the last value
    /// is held (callers only evaluate t <= t_max).
    Profile as_profile(std::size_t knots = 1024) const;
};

struct SolveOptions {
    double rel_tol = 1e-13;
    double touch_tol = 1e-8;          // width at which the curve counts as touching
    double cubic_switch_frac = 1e-3;  // switch to the local cubic-root model below
                                      // this fraction of the initial width
    // knot spacing also bounds the cubic-Hermite evaluation error (~ h^4 g'''')
    double max_step = 1.0 / 512.0;
};

CriticalCurve solve_g(double x, const Profile& f_lower, double sigma2, SolveOptions opts = {});

/// max_t |g_t - g_0 + H_t(f,g)| over the curve's knots, re-quadratured with
/// an independent fixed-order integrator.
double curve_residual_max(const CriticalCurve& curve, const Profile& f_lower, double sigma2);

struct LambdaResult {
    double lambda;
    CriticalCurve curve;  // g^lambda (solved at the bisection midpoint)
    std::size_t iterations;
};

struct LambdaOptions {
    double tol = 1e-6;
    // default bracket top: max f + 10 (3 pi^2 sigma^2/2)^{1/3}
    std::optional<double> x_max_override;
    SolveOptions solve;
};

/// Survival threshold: the smallest start x for which g^x spans [0,1] without
/// touching f, found by bisection on the monotone predicate t_x = 1.
LambdaResult compute_lambda(const Profile& f_lower, double sigma2, LambdaOptions opts = {});

struct SelectionCurvePair {
    Profile f, g;  // g - f = h by construction
};

/// The killing/ceiling pair matched to a selection profile h > 0:
///   g_t = h_0 - (pi^2 sigma^2/2) int_0^t ds/h_s^2,   f_t = g_t - h_t.
SelectionCurvePair selection_curves(const Profile& h, double sigma2, std::size_t grid = 1024);

/// Phi(lambda) = pi^2 sigma^2 / (2 lambda^2) - lambda / 3, and its inverse on
/// the decreasing branch (theta > 0 required).
double phi(double lambda, double sigma2);
double phi_inverse(double theta, double sigma2);

}  // namespace brws

#endif
