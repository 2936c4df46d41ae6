#include "borrowsim/numerics.hpp"

#include "borrowsim/posterior.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace borrowsim::num {

double std_normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double student_t_quantile(double p, double df) {
    if (std::isinf(df)) return std_normal_quantile(p);
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

double student_t_sf(double t, double df) {
    if (std::isinf(df)) return std_normal_cdf(-t);
    return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), t));
}

UnitIntervalRule tanh_sinh_unit_rule(double step, double t_max) {
    if (!(step > 0.0) || !(t_max > 0.0)) throw std::invalid_argument("tanh_sinh_unit_rule: bad step");
    const auto half = static_cast<long>(std::ceil(t_max / step));
    UnitIntervalRule rule;
    const auto n = static_cast<std::size_t>(2 * half + 1);
    rule.x.reserve(n);
    rule.log_x.reserve(n);
    rule.log_1mx.reserve(n);
    rule.log_weight.reserve(n);
    for (long k = -half; k <= half; ++k) {
        const double t = step * static_cast<double>(k);
        const double u = std::numbers::pi / 2.0 * std::sinh(t);
        // x = 1 / (1 + exp(-2u)), 1 - x = 1 / (1 + exp(2u))
        const double log_x = u >= 0.0 ? -std::log1p(std::exp(-2.0 * u)) : 2.0 * u - std::log1p(std::exp(2.0 * u));
        const double log_1mx = u <= 0.0 ? -std::log1p(std::exp(2.0 * u)) : -2.0 * u - std::log1p(std::exp(-2.0 * u));
        rule.x.push_back(std::exp(log_x));
        rule.log_x.push_back(log_x);
        rule.log_1mx.push_back(log_1mx);
        rule.log_weight.push_back(std::log(step * std::numbers::pi * std::cosh(t)) + log_x + log_1mx);
    }
    return rule;
}

namespace {

struct Moments {
    double mean;
    double sd;
};

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> x(n);
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) x[i] = lo + h * static_cast<double>(i);
    x.back() = hi;
    return x;
}

std::vector<double> exp_shifted(const std::vector<double>& logd) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logd)
        if (v > mx) mx = v;
    if (!std::isfinite(mx)) throw std::domain_error("tabulate_density: density vanishes on the whole grid");
    std::vector<double> d(logd.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::exp(logd[i] - mx);
    return d;
}

Moments trapezoid_moments(const std::vector<double>& x, const std::vector<double>& d) {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = (i == 0 || i + 1 == x.size()) ? 0.5 : 1.0;
        m0 += w * d[i];
        m1 += w * d[i] * x[i];
        m2 += w * d[i] * x[i] * x[i];
    }
    const double mean = m1 / m0;
    const double var = std::max(m2 / m0 - mean * mean, 0.0);
    return {mean, std::sqrt(var)};
}

}  // namespace

GridDensity tabulate_density(const BatchLogDensity& log_density, double pilot_lo, double pilot_hi,
                             const GridOptions& opts) {
    if (!(pilot_hi > pilot_lo)) throw std::invalid_argument("tabulate_density: empty pilot range");
    if (opts.points < 3) throw std::invalid_argument("tabulate_density: need at least 3 points");
    constexpr std::size_t kPilotPoints = 401;
    double lo = std::max(pilot_lo, opts.clip_lo);
    double hi = std::min(pilot_hi, opts.clip_hi);
    std::vector<double> logd;
    Moments mom{};
    for (int pass = 0; pass < 4; ++pass) {
        const auto x = linspace(lo, hi, kPilotPoints);
        log_density(x, logd);
        mom = trapezoid_moments(x, exp_shifted(logd));
        const double h = (hi - lo) / static_cast<double>(kPilotPoints - 1);
        // Resolved once the bulk spans a good number of pilot cells.
        if (mom.sd > 10.0 * h) break;
        const double half = 12.0 * std::max(mom.sd, h);
        lo = std::max(mom.mean - half, opts.clip_lo);
        hi = std::min(mom.mean + half, opts.clip_hi);
    }
    const double sd = mom.sd > 0.0 ? mom.sd : (hi - lo) / static_cast<double>(kPilotPoints);
    const double final_lo = std::max(mom.mean - opts.width_sds * sd, opts.clip_lo);
    const double final_hi = std::min(mom.mean + opts.width_sds * sd, opts.clip_hi);
    const auto x = linspace(final_lo, final_hi, opts.points);
    log_density(x, logd);
    return GridDensity(final_lo, final_hi, exp_shifted(logd));
}

}  // namespace borrowsim::num
