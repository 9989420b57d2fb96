#ifndef BRWS_QUADRATURE_HPP
#define BRWS_QUADRATURE_HPP

#include <functional>

namespace brws {

/// Adaptive Simpson with Richardson error control. Throws NumericsError if
/// the recursion exhausts its depth without meeting the tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-10, double abs_floor = 1e-300, int max_depth = 52);

/// Composite 16-point Gauss-Legendre; the independent re-quadrature route.
double gauss_legendre(const std::function<double(double)>& f, double a, double b,
                      std::size_t panels = 8);

}  // namespace brws

#endif
