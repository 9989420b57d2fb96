#include "brws/profile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "brws/errors.hpp"

namespace brws {

Profile Profile::constant(double c) {
    Profile p;
    p.name_ = "constant(" + std::to_string(c) + ")";
    p.fn_ = [c](double) { return c; };
    p.knots_t_.clear();
    p.knots_v_.clear();
    return p;
}

Profile Profile::linear(double v0, double v1) {
    Profile p;
    p.name_ = "linear";
    p.fn_ = [v0, v1](double t) { return v0 + (v1 - v0) * t; };
    return p;
}

Profile Profile::slope(double theta) {
    Profile p;
    p.name_ = "slope(" + std::to_string(theta) + ")";
    p.fn_ = [theta](double t) { return -theta * t; };
    return p;
}

Profile Profile::power(double a, double eps, double pw) {
    Profile p;
    p.name_ = "power";
    p.fn_ = [a, eps, pw](double t) { return a * std::pow(t + eps, pw); };
    return p;
}

Profile Profile::closed_form(std::string name, std::function<double(double)> fn) {
    Profile p;
    p.name_ = std::move(name);
    p.fn_ = std::move(fn);
    return p;
}

Profile Profile::table(std::vector<double> t, std::vector<double> v) {
    if (t.size() != v.size() || t.size() < 2)
        throw ConfigError("profile table: need matching t/v with >= 2 knots");
    if (t.front() != 0.0 || t.back() != 1.0)
        throw ConfigError("profile table: knots must span [0,1]");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw ConfigError("profile table: knots must be strictly increasing");
    Profile p;
    p.name_ = "table";
    p.knots_t_ = std::move(t);
    p.knots_v_ = std::move(v);
    return p;
}

Profile Profile::sampled(const Profile& src, std::size_t n_knots) {
    if (n_knots < 2) throw ConfigError("profile sample: need >= 2 knots");
    std::vector<double> t(n_knots), v(n_knots);
    for (std::size_t i = 0; i < n_knots; ++i) {
        t[i] = static_cast<double>(i) / static_cast<double>(n_knots - 1);
        v[i] = src(t[i]);
    }
    t.front() = 0.0;
    t.back() = 1.0;
    return table(std::move(t), std::move(v));
}

double Profile::operator()(double t) const {
    if (!is_table()) return fn_(t);
    const auto& ts = knots_t_;
    const auto& vs = knots_v_;
    if (t <= ts.front()) return vs.front();
    if (t >= ts.back()) return vs.back();
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    std::size_t i = static_cast<std::size_t>(it - ts.begin());
    double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    return vs[i - 1] + w * (vs[i] - vs[i - 1]);
}

Profile Profile::shifted(double dy) const {
    if (is_table()) {
        std::vector<double> v = knots_v_;
        for (auto& x : v) x += dy;
        return table(knots_t_, std::move(v));
    }
    auto base = fn_;
    Profile p;
    p.name_ = name_ + "+shift";
    p.fn_ = [base, dy](double t) { return base(t) + dy; };
    return p;
}

double Profile::min_on_grid(std::size_t n) const {
    double m = (*this)(0.0);
    for (std::size_t i = 1; i <= n; ++i) m = std::min(m, (*this)(static_cast<double>(i) / static_cast<double>(n)));
    if (is_table())
        for (double v : knots_v_) m = std::min(m, v);
    return m;
}

double Profile::max_on_grid(std::size_t n) const {
    double m = (*this)(0.0);
    for (std::size_t i = 1; i <= n; ++i) m = std::max(m, (*this)(static_cast<double>(i) / static_cast<double>(n)));
    if (is_table())
        for (double v : knots_v_) m = std::max(m, v);
    return m;
}

}  // namespace brws
