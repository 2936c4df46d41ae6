#include "borrowsim/ess.hpp"

#include "borrowsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace borrowsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_ref(double reference_sd) {
    if (!(reference_sd > 0.0) || !std::isfinite(reference_sd)) throw std::invalid_argument("ESS: reference_sd must be positive");
}

// Mean and variance on the Beta scale y = (theta + 1) / 2.
std::pair<double, double> beta_scale_moments(const Posterior& p) { return {(p.mean() + 1.0) / 2.0, p.variance() / 4.0}; }

// log density of the posterior; grid densities interpolate linearly.
double log_pdf(const Posterior& p, double x) {
    const double d = p.pdf(x);
    return d > 0.0 ? std::log(d) : -kInf;
}

// -d^2/dx^2 log f(x) by 5-point central differences.
template <class F>
double neg_second_derivative(const F& logf, double x, double h) {
    const double f2 = logf(x + 2 * h), f1 = logf(x + h), f0 = logf(x), fm1 = logf(x - h), fm2 = logf(x - 2 * h);
    return -(-f2 + 16.0 * f1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
}

// Curvature of the posterior log density at its mean; grid posteriors use
// the node spacing so the stencil sees real data points.
double curvature_at_mean(const Posterior& p) {
    const double m = p.mean();
    if (p.is_normal()) return 1.0 / p.variance();
    if (const auto* g = std::get_if<GridDensity>(&p.repr())) {
        return neg_second_derivative([&](double x) { return log_pdf(p, x); }, m, g->step());
    }
    if (const auto* mix = std::get_if<NormalMixture>(&p.repr())) {
        if (mix->components().size() == 1) return 1.0 / p.variance();
    }
    return neg_second_derivative([&](double x) { return log_pdf(p, x); }, m, 1e-4 * p.sd());
}

}  // namespace

BetaParams beta_moment_match(double mean, double variance) {
    if (!(mean > 0.0 && mean < 1.0)) throw std::domain_error("beta_moment_match: mean outside (0, 1)");
    if (!(variance > 0.0)) return {kInf, kInf};
    const double s = mean * (1.0 - mean) / variance - 1.0;
    if (!(s > 0.0)) throw std::domain_error("beta_moment_match: variance too large for a Beta");
    return {mean * s, (1.0 - mean) * s};
}

double ess_moment(const Posterior& dist, double reference_sd, EssScale scale) {
    if (scale == EssScale::BetaTransformed) {
        const auto [m, v] = beta_scale_moments(dist);
        if (!(v > 0.0)) return kInf;
        const auto ab = beta_moment_match(m, v);
        return ab.a + ab.b;
    }
    check_ref(reference_sd);
    const double v = dist.variance();
    return v > 0.0 ? reference_sd * reference_sd / v : kInf;
}

double ess_precision(const Posterior& dist, double reference_sd, EssScale scale) {
    if (scale == EssScale::Normal) return ess_moment(dist, reference_sd, scale);
    const double m = (dist.mean() + 1.0) / 2.0;
    if (!(m > 0.0 && m < 1.0)) throw std::domain_error("ess_precision: mean outside the Beta support");
    // d theta / d y = 2, so curvature on y is four times the curvature on theta.
    const double precision_y = 4.0 * curvature_at_mean(dist);
    if (!std::isfinite(precision_y)) return kInf;
    // Beta(s m, s (1 - m)) has curvature s / (m (1 - m)) - 1/m^2 - 1/(1 - m)^2 at y = m.
    return (precision_y + 1.0 / (m * m) + 1.0 / ((1.0 - m) * (1.0 - m))) * m * (1.0 - m);
}

UnitInformation normal_unit(double reference_sd) {
    check_ref(reference_sd);
    const double info = 1.0 / (reference_sd * reference_sd);
    return [info](double) { return info; };
}

UnitInformation bernoulli_unit() {
    return [](double y) { return 1.0 / (y * (1.0 - y)); };
}

double ess_elir(const std::function<double(double)>& log_density, double lo, double hi, const UnitInformation& unit,
                double fd_step, std::size_t points) {
    if (!(hi > lo) || points < 3) throw std::invalid_argument("ess_elir: bad integration range");
    if (!(fd_step > 0.0)) throw std::invalid_argument("ess_elir: fd_step must be positive");
    const double h = (hi - lo) / static_cast<double>(points - 1);
    std::vector<double> x(points), lf(points);
    double mx = -kInf;
    for (std::size_t i = 0; i < points; ++i) {
        x[i] = lo + h * static_cast<double>(i);
        lf[i] = log_density(x[i]);
        mx = std::max(mx, lf[i]);
    }
    if (!std::isfinite(mx)) throw std::domain_error("ess_elir: density vanishes on the range");
    double mass = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double w = ((i == 0 || i + 1 == points) ? 0.5 : 1.0) * std::exp(lf[i] - mx);
        if (w == 0.0) continue;
        mass += w;
        const double info = neg_second_derivative(log_density, x[i], fd_step);
        if (std::isfinite(info)) acc += w * info / unit(x[i]);
    }
    if (!std::isfinite(acc)) throw std::domain_error("ess_elir: non-integrable information");
    return acc / mass;
}

double ess_elir(const Posterior& dist, double reference_sd, EssScale scale, const ElirOptions& opts) {
    const double m = dist.mean();
    const double sd = dist.sd();
    if (!(sd > 0.0)) return kInf;
    if (dist.is_normal() && scale == EssScale::Normal) {
        check_ref(reference_sd);
        return reference_sd * reference_sd / dist.variance();
    }
    double lo = m - opts.width_sds * sd, hi = m + opts.width_sds * sd;
    double step = opts.fd_step_sds * sd;
    std::size_t points = opts.points;
    if (const auto* g = std::get_if<GridDensity>(&dist.repr())) {
        // Stay on the nodes: the interpolant is piecewise linear, so the
        // stencil must span nodes to see the curvature.
        lo = std::max(lo, g->lo() + 2.0 * g->step());
        hi = std::min(hi, g->hi() - 2.0 * g->step());
        step = g->step();
        points = static_cast<std::size_t>(std::llround((hi - lo) / g->step())) + 1;
        lo = g->node(static_cast<std::size_t>(std::ceil((lo - g->lo()) / g->step() - 1e-9)));
        hi = lo + g->step() * static_cast<double>(points - 1);
        hi = std::min(hi, g->hi() - 2.0 * g->step());
        points = static_cast<std::size_t>(std::llround((hi - lo) / g->step())) + 1;
    }
    if (scale == EssScale::Normal) {
        return ess_elir([&](double x) { return log_pdf(dist, x); }, lo, hi, normal_unit(reference_sd), step, points);
    }
    // On y = (theta + 1) / 2 the density picks up a constant Jacobian.
    lo = std::max(lo, -1.0 + 2.0 * step);
    hi = std::min(hi, 1.0 - 2.0 * step);
    auto logf_y = [&](double y) { return log_pdf(dist, 2.0 * y - 1.0); };
    return ess_elir(logf_y, (lo + 1.0) / 2.0, (hi + 1.0) / 2.0, bernoulli_unit(), step / 2.0, points);
}

double prior_ess_from_posterior(double posterior_ess, int n_target_per_arm) { return posterior_ess - n_target_per_arm; }

// ---------------------------------------------------------------------------
// EM mixture fitting on weighted points

namespace {

struct Fit {
    std::vector<MixtureComponent> comps;
    double loglik;
};

Fit em_fit(std::span<const double> x, std::span<const double> w, int k, double sd_floor, const MixtureFitOptions& opts) {
    const std::size_t n = x.size();
    // Quantile-spaced initial means from the weighted empirical cdf.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    double total_w = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total_w += w[i];
        m1 += w[i] * x[i];
    }
    const double mean = m1 / total_w;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += w[i] * (x[i] - mean) * (x[i] - mean);
    var /= total_w;
    std::vector<MixtureComponent> c(static_cast<std::size_t>(k));
    {
        double cum = 0.0;
        std::size_t j = 0;
        for (std::size_t idx : order) {
            cum += w[idx] / total_w;
            while (j < c.size() && cum >= (static_cast<double>(j) + 0.5) / k) {
                c[j].mean = x[idx];
                ++j;
            }
        }
        for (; j < c.size(); ++j) c[j].mean = x[order.back()];
        for (auto& comp : c) {
            comp.weight = 1.0 / k;
            comp.sd = std::max(std::sqrt(var) / k, sd_floor);
        }
    }
    std::vector<double> resp(n * c.size());
    double prev = -kInf, ll = -kInf;
    for (int it = 0; it < opts.max_iterations; ++it) {
        // E step in log space.
        ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -kInf;
            for (std::size_t j = 0; j < c.size(); ++j) {
                const double v = std::log(c[j].weight) + num::normal_logpdf(x[i], c[j].mean, c[j].sd);
                resp[i * c.size() + j] = v;
                mx = std::max(mx, v);
            }
            double s = 0.0;
            for (std::size_t j = 0; j < c.size(); ++j) s += std::exp(resp[i * c.size() + j] - mx);
            const double lse = mx + std::log(s);
            for (std::size_t j = 0; j < c.size(); ++j) resp[i * c.size() + j] = std::exp(resp[i * c.size() + j] - lse);
            ll += w[i] * lse;
        }
        // M step.
        for (std::size_t j = 0; j < c.size(); ++j) {
            double rw = 0.0, rx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = w[i] * resp[i * c.size() + j];
                rw += r;
                rx += r * x[i];
            }
            if (!(rw > 0.0)) {
                c[j].weight = 1e-300;
                continue;
            }
            const double mu = rx / rw;
            double rv = 0.0;
            for (std::size_t i = 0; i < n; ++i) rv += w[i] * resp[i * c.size() + j] * (x[i] - mu) * (x[i] - mu);
            c[j] = {rw / total_w, mu, std::max(std::sqrt(rv / rw), sd_floor)};
        }
        if (std::abs(ll - prev) <= opts.tolerance * std::max(1.0, std::abs(ll))) break;
        prev = ll;
    }
    // Drop emptied components and renormalize.
    std::vector<MixtureComponent> kept;
    double ws = 0.0;
    for (const auto& comp : c)
        if (comp.weight > 1e-12) {
            kept.push_back(comp);
            ws += comp.weight;
        }
    for (auto& comp : kept) comp.weight /= ws;
    return {kept, ll};
}

NormalMixture fit_weighted(std::span<const double> x, std::span<const double> w, double n_eff, const MixtureFitOptions& opts) {
    if (x.empty()) throw std::invalid_argument("fit_mixture: no data");
    if (opts.max_components < 1) throw std::invalid_argument("fit_mixture: max_components must be >= 1");
    double total_w = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        total_w += w[i];
        m1 += w[i] * x[i];
    }
    const double mean = m1 / total_w;
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) var += w[i] * (x[i] - mean) * (x[i] - mean);
    var /= total_w;
    const double sd_floor = 1e-9 * std::max(1.0, std::abs(mean));
    if (!(std::sqrt(var) > sd_floor)) return NormalMixture({{1.0, mean, sd_floor}});

    // Work with weights summing to the effective sample count so BIC is on the right scale.
    std::vector<double> wn(w.begin(), w.end());
    for (auto& v : wn) v *= n_eff / total_w;
    std::optional<Fit> best;
    double best_bic = kInf;
    for (int k = 1; k <= opts.max_components; ++k) {
        auto f = em_fit(x, wn, k, sd_floor, opts);
        const double params = 3.0 * static_cast<double>(f.comps.size()) - 1.0;
        const double bic = -2.0 * f.loglik + params * std::log(n_eff);
        if (bic < best_bic) {
            best_bic = bic;
            best = std::move(f);
        }
    }
    return NormalMixture(best->comps);
}

}  // namespace

NormalMixture fit_mixture(std::span<const double> samples, const MixtureFitOptions& opts) {
    std::vector<double> w(samples.size(), 1.0);
    return fit_weighted(samples, w, static_cast<double>(samples.size()), opts);
}

NormalMixture fit_mixture(const GridDensity& grid, const MixtureFitOptions& opts) {
    std::vector<double> x, w;
    x.reserve(grid.size());
    w.reserve(grid.size());
    const auto d = grid.density();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (d[i] <= 0.0) continue;
        x.push_back(grid.node(i));
        w.push_back(((i == 0 || i + 1 == grid.size()) ? 0.5 : 1.0) * d[i]);
    }
    return fit_weighted(x, w, opts.pseudo_samples, opts);
}

EssReport ess_report(const Posterior& dist, double reference_sd, EssScale scale, bool fit) {
    EssReport r{ess_moment(dist, reference_sd, scale), ess_precision(dist, reference_sd, scale),
                ess_elir(dist, reference_sd, scale), reference_sd, std::nullopt, std::nullopt};
    if (fit) {
        if (scale == EssScale::BetaTransformed) {
            const auto [m, v] = beta_scale_moments(dist);
            r.beta_fit = beta_moment_match(m, v);
        } else if (const auto* g = std::get_if<GridDensity>(&dist.repr())) {
            r.mixture_fit = fit_mixture(*g);
        } else if (const auto* mix = std::get_if<NormalMixture>(&dist.repr())) {
            r.mixture_fit = *mix;
        } else {
            const auto& n = dist.as_normal();
            r.mixture_fit = NormalMixture({{1.0, n.mean, n.sd}});
        }
    }
    return r;
}

}  // namespace borrowsim
