#include "brws/quadrature.hpp"

#include <array>
#include <cmath>

#include "brws/errors.hpp"

namespace brws {

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, double abs_floor, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double err = left + right - whole;
    if (std::abs(err) <= 15.0 * tol || std::abs(left + right) < abs_floor)
        return left + right + err / 15.0;
    if (depth <= 0) throw NumericsError("adaptive_simpson: max depth exceeded (non-integrable?)");
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, abs_floor, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, abs_floor, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, double abs_floor, int max_depth) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    double tol = rel_tol * std::max(std::abs(whole), 1e-30);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, abs_floor, max_depth);
}

double gauss_legendre(const std::function<double(double)>& f, double a, double b,
                      std::size_t panels) {
    // 16-point nodes/weights on [-1,1]
    static const std::array<double, 8> x = {
        0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
        0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
    static const std::array<double, 8> w = {
        0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
        0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};
    if (panels == 0) panels = 1;
    double h = (b - a) / static_cast<double>(panels);
    double total = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        double lo = a + h * static_cast<double>(p);
        double c = lo + 0.5 * h, r = 0.5 * h;
        double s = 0.0;
        for (int i = 0; i < 8; ++i) s += w[i] * (f(c - r * x[i]) + f(c + r * x[i]));
        total += s * r;
    }
    return total;
}

}  // namespace brws
