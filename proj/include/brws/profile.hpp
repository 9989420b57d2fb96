#ifndef BRWS_PROFILE_HPP
#define BRWS_PROFILE_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace brws {

/// A continuous scalar function on [0,1], either a closed form or a
/// piecewise-linear table. Tables keep their knots so quadrature can
/// integrate segments exactly; closed forms are evaluated directly.
class Profile {
  public:
    Profile() : name_("constant(0)"), fn_([](double) { return 0.0; }) {}

    static Profile constant(double c);
    static Profile linear(double v0, double v1);       // v0 + (v1 - v0) t
    static Profile slope(double theta);                // t -> -theta * t
    static Profile power(double a, double eps, double p);  // t -> a (t+eps)^p
    static Profile closed_form(std::string name, std::function<double(double)> fn);
    static Profile table(std::vector<double> t, std::vector<double> v);
    /// Sample a closed form onto an n-knot table (n >= 2).
    static Profile sampled(const Profile& src, std::size_t n_knots);

    double operator()(double t) const;
    bool is_table() const { return !knots_t_.empty(); }
    const std::vector<double>& knots_t() const { return knots_t_; }
    const std::vector<double>& knots_v() const { return knots_v_; }
    const std::string& name() const { return name_; }

    Profile shifted(double dy) const;  // pointwise + dy

    double min_on_grid(std::size_t n = 512) const;
    double max_on_grid(std::size_t n = 512) const;

  private:
    std::string name_;
    std::function<double(double)> fn_;
    std::vector<double> knots_t_, knots_v_;
};

/// Corridor pair (lower f, upper g); validity (f < g where required) is
/// checked by the operations that consume it.
struct BarrierProfile {
    Profile lower, upper;
    double width(double t) const { return upper(t) - lower(t); }
};

}  // namespace brws

#endif
