#include "borrowsim/posterior.hpp"

#include "borrowsim/numerics.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace borrowsim {

namespace {

void check_sd(double sd, const char* what) {
    if (!(sd > 0.0) || !std::isfinite(sd)) throw std::invalid_argument(std::string(what) + ": sd must be positive");
}

// Bracketed root of a monotone cdf, to 1e-12 on the theta axis.
double invert_cdf(const std::function<double(double)>& cdf, double q, double center, double scale) {
    double lo = center - scale;
    double hi = center + scale;
    for (int i = 0; i < 200 && cdf(lo) > q; ++i) lo -= (center - lo);
    for (int i = 0; i < 200 && cdf(hi) < q; ++i) hi += (hi - center);
    auto f = [&](double x) { return cdf(x) - q; };
    std::uintmax_t max_iter = 400;
    const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12 * std::max(1.0, std::abs(a)); };
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, max_iter);
    return 0.5 * (a + b);
}

}  // namespace

NormalMixture::NormalMixture(std::vector<MixtureComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("NormalMixture: no components");
    double total = 0.0;
    for (const auto& c : components_) {
        check_sd(c.sd, "NormalMixture");
        if (!(c.weight >= 0.0)) throw std::invalid_argument("NormalMixture: negative weight");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("NormalMixture: weights do not sum to 1");
    for (auto& c : components_) c.weight /= total;
}

double NormalMixture::mean() const {
    double m = 0.0;
    for (const auto& c : components_) m += c.weight * c.mean;
    return m;
}

double NormalMixture::variance() const {
    const double m = mean();
    double v = 0.0;
    for (const auto& c : components_) v += c.weight * (c.sd * c.sd + (c.mean - m) * (c.mean - m));
    return v;
}

double NormalMixture::pdf(double x) const {
    double d = 0.0;
    for (const auto& c : components_) d += c.weight * num::normal_pdf(x, c.mean, c.sd);
    return d;
}

double NormalMixture::cdf(double x) const {
    double p = 0.0;
    for (const auto& c : components_) p += c.weight * num::normal_cdf(x, c.mean, c.sd);
    return p;
}

double NormalMixture::sf(double x) const {
    double p = 0.0;
    for (const auto& c : components_) p += c.weight * num::normal_sf(x, c.mean, c.sd);
    return p;
}

GridDensity::GridDensity(double lo, double hi, std::vector<double> density)
    : lo_(lo), hi_(hi), density_(std::move(density)) {
    if (density_.size() < 2) throw std::invalid_argument("GridDensity: need at least two nodes");
    if (!(hi > lo)) throw std::invalid_argument("GridDensity: empty support");
    step_ = (hi_ - lo_) / static_cast<double>(density_.size() - 1);
    for (double d : density_)
        if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("GridDensity: invalid density value");

    cumulative_.assign(density_.size(), 0.0);
    for (std::size_t i = 1; i < density_.size(); ++i)
        cumulative_[i] = cumulative_[i - 1] + 0.5 * step_ * (density_[i - 1] + density_[i]);
    const double total = cumulative_.back();
    if (!(total > 0.0)) throw std::invalid_argument("GridDensity: zero total mass");
    for (auto& d : density_) d /= total;
    for (auto& c : cumulative_) c /= total;
    cumulative_.back() = 1.0;

    // Moments of the piecewise-linear interpolant, integrated exactly per cell.
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i + 1 < density_.size(); ++i) {
        const double a = node(i), fa = density_[i], fb = density_[i + 1];
        const double h = step_;
        // f(a + t) = fa + (fb - fa) t / h on [0, h]
        const double s0 = h * (fa + fb) / 2.0;
        const double s1 = h * h * (fa + 2.0 * fb) / 6.0;       // int t f
        const double s2 = h * h * h * (fa + 3.0 * fb) / 12.0;  // int t^2 f
        m1 += a * s0 + s1;
        m2 += a * a * s0 + 2.0 * a * s1 + s2;
    }
    mean_ = m1;
    variance_ = std::max(m2 - m1 * m1, 0.0);
}

double GridDensity::pdf(double x) const {
    if (x < lo_ || x > hi_) return 0.0;
    const double u = (x - lo_) / step_;
    const auto i = std::min(static_cast<std::size_t>(u), density_.size() - 2);
    const double t = u - static_cast<double>(i);
    return density_[i] + t * (density_[i + 1] - density_[i]);
}

double GridDensity::cdf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const double u = (x - lo_) / step_;
    const auto i = std::min(static_cast<std::size_t>(u), density_.size() - 2);
    const double dx = x - node(i);
    const double fa = density_[i], fb = density_[i + 1];
    return std::min(1.0, cumulative_[i] + dx * fa + dx * dx * (fb - fa) / (2.0 * step_));
}

double GridDensity::quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw std::domain_error("quantile: q must lie in (0, 1)");
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), q);
    std::size_t i = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    i = std::min(i, density_.size() - 2);
    const double fa = density_[i], fb = density_[i + 1];
    const double r = q - cumulative_[i];
    // Solve fa*dx + (fb - fa)/(2h) dx^2 = r on [0, h].
    const double a = (fb - fa) / (2.0 * step_);
    double dx;
    if (std::abs(a) * step_ < 1e-14 * std::max(fa, 1e-300)) {
        dx = fa > 0.0 ? r / fa : 0.0;
    } else {
        const double disc = std::max(fa * fa + 4.0 * a * r, 0.0);
        dx = 2.0 * r / (fa + std::sqrt(disc));  // stable root of a dx^2 + fa dx - r
    }
    return node(i) + std::clamp(dx, 0.0, step_);
}

Posterior::Posterior(NormalDist d) : repr_(d) { check_sd(d.sd, "NormalDist"); }

double Posterior::mean() const {
    return std::visit(
        [](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, NormalDist>) return r.mean;
            else return r.mean();
        },
        repr_);
}

double Posterior::variance() const {
    return std::visit(
        [](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, NormalDist>) return r.sd * r.sd;
            else return r.variance();
        },
        repr_);
}

double Posterior::pdf(double x) const {
    return std::visit(
        [x](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, NormalDist>) return num::normal_pdf(x, r.mean, r.sd);
            else return r.pdf(x);
        },
        repr_);
}

double Posterior::cdf(double x) const {
    return std::visit(
        [x](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, NormalDist>) return num::normal_cdf(x, r.mean, r.sd);
            else return r.cdf(x);
        },
        repr_);
}

double Posterior::sf(double x) const {
    return std::visit(
        [x](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, NormalDist>) return num::normal_sf(x, r.mean, r.sd);
            else if constexpr (std::is_same_v<T, NormalMixture>) return r.sf(x);
            else return 1.0 - r.cdf(x);
        },
        repr_);
}

double Posterior::quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw std::domain_error("quantile: q must lie in (0, 1)");
    return std::visit(
        [q](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, NormalDist>) {
                return r.mean + r.sd * num::std_normal_quantile(q);
            } else if constexpr (std::is_same_v<T, NormalMixture>) {
                if (r.components().size() == 1) {
                    const auto& c = r.components().front();
                    return c.mean + c.sd * num::std_normal_quantile(q);
                }
                return invert_cdf([&r](double x) { return r.cdf(x); }, q, r.mean(), std::sqrt(r.variance()));
            } else {
                return r.quantile(q);
            }
        },
        repr_);
}

double posterior_mean(const Posterior& p) { return p.mean(); }

double posterior_quantile(const Posterior& p, double q) { return p.quantile(q); }

CredibleInterval equal_tail_interval(const Posterior& p, double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("equal_tail_interval: level must lie in (0, 1)");
    const double tail = 0.5 * (1.0 - level);
    return {p.quantile(tail), p.quantile(1.0 - tail)};
}

double prob_effective(const Posterior& p, const DecisionRule& rule) {
    return rule.direction == Direction::GreaterIsEffective ? p.sf(rule.theta0) : p.cdf(rule.theta0);
}

bool decide_success(double prob_effective_value, const DecisionRule& rule) {
    return prob_effective_value > rule.rho;
}

bool decide_success(const Posterior& p, const DecisionRule& rule) {
    return decide_success(prob_effective(p, rule), rule);
}

}  // namespace borrowsim
