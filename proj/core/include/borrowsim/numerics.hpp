#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace borrowsim {

class GridDensity;

namespace num {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

inline double normal_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return kInvSqrt2Pi / sd * std::exp(-0.5 * z * z);
}

inline double normal_logpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

/// Standard normal cdf via erfc, accurate in both tails.
inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_cdf(double x, double mean, double sd) { return std_normal_cdf((x - mean) / sd); }
inline double normal_sf(double x, double mean, double sd) { return std_normal_cdf((mean - x) / sd); }

/// Standard normal inverse cdf.
double std_normal_quantile(double p);

/// Upper quantile of Student's t with the given degrees of freedom; falls back
/// to the normal when df is infinite.
double student_t_quantile(double p, double df);
double student_t_sf(double t, double df);

/// Node/weight pairs for the double-exponential (tanh-sinh) rule on (0, 1).
/// `log_x` and `log_1mx` hold log(x) and log(1 - x) evaluated without
/// cancellation near the endpoints, so integrands with algebraic endpoint
/// singularities can fold them into the weights.
struct UnitIntervalRule {
    std::vector<double> x;
    std::vector<double> log_x;
    std::vector<double> log_1mx;
    std::vector<double> log_weight;  // log of step times Jacobian
};

/// `step` is the spacing in the transformed variable, `t_max` its half-range.
UnitIntervalRule tanh_sinh_unit_rule(double step, double t_max = 6.0);

/// Evaluates an unnormalized log density at every node of `x` into `out`.
using BatchLogDensity = std::function<void(const std::vector<double>& x, std::vector<double>& out)>;

struct GridOptions {
    std::size_t points = 4001;
    double width_sds = 8.0;
    double clip_lo = -INFINITY;
    double clip_hi = INFINITY;
};

/// Tabulates exp(log_density) on a uniform grid. A coarse pilot pass over
/// [pilot_lo, pilot_hi] locates the bulk of the mass; the final grid spans
/// mean +/- `width_sds` pilot sds, clipped to [clip_lo, clip_hi].
GridDensity tabulate_density(const BatchLogDensity& log_density, double pilot_lo, double pilot_hi,
                             const GridOptions& opts = {});

}  // namespace num
}  // namespace borrowsim
