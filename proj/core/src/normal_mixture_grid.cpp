#include "borrowsim/normal_mixture_grid.hpp"

#include "borrowsim/numerics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace borrowsim {

std::vector<WeightedNormal> normalize_log_weights(const std::vector<WeightedNormal>& comps) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& c : comps) mx = std::max(mx, c.log_weight);
    if (!std::isfinite(mx)) throw std::domain_error("normalize_log_weights: all weights vanish");
    constexpr double kDrop = -39.0;  // ~1e-17
    std::vector<WeightedNormal> out;
    out.reserve(comps.size());
    double total = 0.0;
    for (const auto& c : comps) {
        const double rel = c.log_weight - mx;
        if (rel < kDrop) continue;
        WeightedNormal k = c;
        k.weight = std::exp(rel);
        total += k.weight;
        out.push_back(k);
    }
    for (auto& c : out) c.weight /= total;
    return out;
}

namespace {

// Adds w * N(x_i; m, s) to every node, stepping the Gaussian by recurrence
// outward from the node nearest the mean. Two multiplies per node, no exp.
void accumulate_gaussian(std::vector<double>& acc, double lo, double h, double w, double m, double s) {
    const auto n = static_cast<long>(acc.size());
    const long i0 = std::clamp(static_cast<long>(std::lround((m - lo) / h)), 0L, n - 1);
    const double x0 = lo + h * static_cast<double>(i0) - m;
    const double inv2v = 0.5 / (s * s);
    const double scale = w * num::kInvSqrt2Pi / s;
    const double g0 = std::exp(-x0 * x0 * inv2v);
    acc[i0] += scale * g0;
    constexpr double kStop = 1e-22;
    const double c = std::exp(-2.0 * h * h * inv2v);
    {
        double g = g0;
        double r = std::exp(-(2.0 * x0 * h + h * h) * inv2v);
        for (long i = i0 + 1; i < n; ++i) {
            g *= r;
            r *= c;
            if (g < kStop) break;
            acc[i] += scale * g;
        }
    }
    {
        double g = g0;
        double r = std::exp(-(-2.0 * x0 * h + h * h) * inv2v);
        for (long i = i0 - 1; i >= 0; --i) {
            g *= r;
            r *= c;
            if (g < kStop) break;
            acc[i] += scale * g;
        }
    }
}

}  // namespace

GridDensity tabulate_mixture(const std::vector<WeightedNormal>& comps, std::size_t points, double width_sds) {
    if (comps.empty()) throw std::invalid_argument("tabulate_mixture: no components");
    if (points < 3) throw std::invalid_argument("tabulate_mixture: need at least 3 points");
    double mean = 0.0;
    for (const auto& c : comps) mean += c.weight * c.mean;
    double var = 0.0;
    for (const auto& c : comps) var += c.weight * (c.sd * c.sd + (c.mean - mean) * (c.mean - mean));
    const double sd = std::sqrt(var);
    const double lo = mean - width_sds * sd;
    const double hi = mean + width_sds * sd;
    const double h = (hi - lo) / static_cast<double>(points - 1);
    std::vector<double> acc(points, 0.0);
    for (const auto& c : comps) accumulate_gaussian(acc, lo, h, c.weight, c.mean, c.sd);
    return GridDensity(lo, hi, std::move(acc));
}

}  // namespace borrowsim
