#pragma once

#include "borrowsim/types.hpp"

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace borrowsim {

struct NormalDist {
    double mean = 0.0;
    double sd = 1.0;
};

struct MixtureComponent {
    double weight = 1.0;
    double mean = 0.0;
    double sd = 1.0;
};

/// Finite mixture of normals. Weights are renormalized on construction and
/// must already sum to one within 1e-12 of each other's rounding.
class NormalMixture {
public:
    explicit NormalMixture(std::vector<MixtureComponent> components);

    std::span<const MixtureComponent> components() const { return components_; }
    double mean() const;
    double variance() const;
    double pdf(double x) const;
    double cdf(double x) const;
    double sf(double x) const;

private:
    std::vector<MixtureComponent> components_;
};

/// Density tabulated on a uniform grid, linearly interpolated between nodes
/// and zero outside [lo, hi]. The stored density integrates to one under the
/// trapezoid rule.
class GridDensity {
public:
    GridDensity(double lo, double hi, std::vector<double> density);

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double step() const { return step_; }
    std::size_t size() const { return density_.size(); }
    double node(std::size_t i) const { return lo_ + step_ * static_cast<double>(i); }
    std::span<const double> density() const { return density_; }
    /// Cumulative trapezoid mass at each node.
    std::span<const double> cumulative() const { return cumulative_; }

    double pdf(double x) const;
    double cdf(double x) const;
    double quantile(double q) const;
    double mean() const { return mean_; }
    double variance() const { return variance_; }

private:
    double lo_;
    double hi_;
    double step_;
    std::vector<double> density_;
    std::vector<double> cumulative_;
    double mean_ = 0.0;
    double variance_ = 0.0;
};

/// Posterior over the target treatment effect.
class Posterior {
public:
    using Repr = std::variant<NormalDist, NormalMixture, GridDensity>;

    Posterior(NormalDist d);
    Posterior(NormalMixture m) : repr_(std::move(m)) {}
    Posterior(GridDensity g) : repr_(std::move(g)) {}

    const Repr& repr() const { return repr_; }
    bool is_normal() const { return std::holds_alternative<NormalDist>(repr_); }
    const NormalDist& as_normal() const { return std::get<NormalDist>(repr_); }

    double mean() const;
    double variance() const;
    double sd() const { return std::sqrt(variance()); }
    double pdf(double x) const;
    double cdf(double x) const;
    /// 1 - cdf(x), computed without cancellation where the representation allows.
    double sf(double x) const;
    double quantile(double q) const;

private:
    Repr repr_;
};

struct CredibleInterval {
    double lo = 0.0;
    double hi = 0.0;
    double half_width() const { return 0.5 * (hi - lo); }
    bool contains(double x) const { return lo <= x && x <= hi; }
};

double posterior_mean(const Posterior& p);

/// Throws std::domain_error unless 0 < q < 1.
double posterior_quantile(const Posterior& p, double q);

/// Equal-tail interval with the given coverage.
CredibleInterval equal_tail_interval(const Posterior& p, double level = 0.95);

/// Pr(theta outside the null region | data).
double prob_effective(const Posterior& p, const DecisionRule& rule);

/// Strict comparison: a probability exactly equal to rho is not a success.
bool decide_success(double prob_effective_value, const DecisionRule& rule);
bool decide_success(const Posterior& p, const DecisionRule& rule);

}  // namespace borrowsim
