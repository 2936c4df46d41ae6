#include "borrowsim/binomial_model.hpp"

#include "borrowsim/numerics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace borrowsim {

void BinomialArmData::validate() const {
    if (n_control < 1 || n_treatment < 1) throw std::domain_error("BinomialArmData: arm sizes must be >= 1");
    if (y_control < 0 || y_control > n_control || y_treatment < 0 || y_treatment > n_treatment)
        throw std::domain_error("BinomialArmData: responders outside [0, n]");
}

double BinomialArmData::rate_difference() const {
    return static_cast<double>(y_treatment) / n_treatment - static_cast<double>(y_control) / n_control;
}

SummaryMeasure rate_difference_summary(const BinomialArmData& d) {
    d.validate();
    auto var_part = [](int y, int n) {
        double p = static_cast<double>(y) / n;
        if (y == 0 || y == n) p = (y + 0.5) / (n + 1.0);
        return p * (1.0 - p) / n;
    };
    SummaryMeasure s;
    s.estimate = d.rate_difference();
    s.std_err = std::sqrt(var_part(d.y_control, d.n_control) + var_part(d.y_treatment, d.n_treatment));
    s.scale = EffectScale::RateDiff;
    s.n_control = d.n_control;
    s.n_treatment = d.n_treatment;
    s.aux.control_rate = static_cast<double>(d.y_control) / d.n_control;
    s.aux.treatment_rate = static_cast<double>(d.y_treatment) / d.n_treatment;
    return s;
}

namespace {

double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log of y log p + (n - y) log(1 - p), with 0 log 0 = 0.
double log_kernel(int y, int n, double p) {
    double r = 0.0;
    if (y > 0) r += y * std::log(p);
    if (n - y > 0) r += (n - y) * std::log1p(-p);
    return r;
}

struct PairLikelihood {
    const BinomialArmData& d;
    double log_const;

    double log_at(double pc, double theta) const {
        const double pt = pc + theta;
        if (pc < 0.0 || pc > 1.0 || pt < 0.0 || pt > 1.0) return -std::numeric_limits<double>::infinity();
        return log_const + log_kernel(d.y_control, d.n_control, pc) + log_kernel(d.y_treatment, d.n_treatment, pt);
    }
};

// d/dpc of the log pair likelihood; strictly decreasing on the support.
double pair_score(const BinomialArmData& d, double pc, double theta) {
    const double pt = pc + theta;
    double g = 0.0;
    if (d.y_control > 0) g += d.y_control / pc;
    if (d.n_control > d.y_control) g -= (d.n_control - d.y_control) / (1.0 - pc);
    if (d.y_treatment > 0) g += d.y_treatment / pt;
    if (d.n_treatment > d.y_treatment) g -= (d.n_treatment - d.y_treatment) / (1.0 - pt);
    return g;
}

double pair_score_slope(const BinomialArmData& d, double pc, double theta) {
    const double pt = pc + theta;
    double h = 0.0;
    if (d.y_control > 0) h -= d.y_control / (pc * pc);
    if (d.n_control > d.y_control) h -= (d.n_control - d.y_control) / ((1.0 - pc) * (1.0 - pc));
    if (d.y_treatment > 0) h -= d.y_treatment / (pt * pt);
    if (d.n_treatment > d.y_treatment) h -= (d.n_treatment - d.y_treatment) / ((1.0 - pt) * (1.0 - pt));
    return h;
}

// Mode in p_c of the log-concave pair likelihood on [lo, hi]: Newton on the
// score, safeguarded by a bisection bracket.
double pair_mode(const BinomialArmData& d, double theta, double lo, double hi) {
    const double eps = 1e-15 * (hi - lo);
    if (pair_score(d, lo + eps, theta) <= 0.0) return lo;
    if (pair_score(d, hi - eps, theta) >= 0.0) return hi;
    double a = lo, b = hi;
    double x = 0.5 * (a + b);
    for (int i = 0; i < 100; ++i) {
        const double g = pair_score(d, x, theta);
        (g > 0.0 ? a : b) = x;
        double next = x - g / pair_score_slope(d, x, theta);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (std::abs(next - x) <= 1e-14 || b - a <= 1e-14) return next;
        x = next;
    }
    return x;
}

// Log marginal likelihood over p_c of one study's counts, at fixed theta, with
// the likelihood raised to `power`. The integrand is scaled by its maximum so
// large arms do not underflow, and split at the mode so both pieces are monotone.
double log_integrated_likelihood(const BinomialArmData& d, double theta, double power, double rel_tol) {
    const PairLikelihood lik{d, log_choose(d.n_control, d.y_control) + log_choose(d.n_treatment, d.y_treatment)};
    const double lo = std::max(0.0, -theta);
    const double hi = std::min(1.0, 1.0 - theta);
    if (!(hi > lo)) return -std::numeric_limits<double>::infinity();
    const double mode = pair_mode(d, theta, lo, hi);
    const double log_scale = power * lik.log_at(mode, theta);
    if (!std::isfinite(log_scale)) return -std::numeric_limits<double>::infinity();
    auto f = [&](double pc) {
        const double v = power * lik.log_at(pc, theta) - log_scale;
        return v < -745.0 ? 0.0 : std::exp(v);
    };
    // Trim each side where the integrand has dropped below e^-45 of its peak,
    // starting from ten curvature sds; log-concavity makes the drop monotone.
    const double curv = -power * pair_score_slope(d, std::clamp(mode, lo + 1e-12, hi - 1e-12), theta);
    const double sd = curv > 0.0 && std::isfinite(curv) ? 1.0 / std::sqrt(curv) : hi - lo;
    auto trim = [&](double dir, double limit) {
        double t = 10.0 * sd;
        for (int i = 0; i < 40; ++i) {
            const double x = mode + dir * t;
            if (dir * (x - limit) >= 0.0) return limit;
            if (power * lik.log_at(x, theta) - log_scale < -45.0) return x;
            t *= 1.5;
        }
        return limit;
    };
    const double a = mode > lo ? trim(-1.0, lo) : lo;
    const double b = hi > mode ? trim(1.0, hi) : hi;
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double total = 0.0;
    if (mode > a) total += GK::integrate(f, a, mode, 15, rel_tol);
    if (b > mode) total += GK::integrate(f, mode, b, 15, rel_tol);
    if (!(total > 0.0)) return -std::numeric_limits<double>::infinity();
    return log_scale + std::log(total);
}

std::vector<double> theta_grid(std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    return x;
}

// Evaluates a log-concave log function on the grid outward from `start`,
// stopping once it has fallen 50 nats below the running peak; the rest stays -inf.
template <class F>
std::vector<double> eval_log_concave_on_grid(const std::vector<double>& x, double start, const F& f) {
    const auto n = x.size();
    std::vector<double> out(n, -std::numeric_limits<double>::infinity());
    const auto i0 = static_cast<std::size_t>(std::clamp(std::lround((start + 1.0) / 2.0 * static_cast<double>(n - 1)),
                                                        0L, static_cast<long>(n - 1)));
    double peak = -std::numeric_limits<double>::infinity();
    constexpr double kCut = 50.0;
    for (std::size_t i = i0; i < n; ++i) {
        out[i] = f(x[i]);
        peak = std::max(peak, out[i]);
        if (std::isfinite(peak) && out[i] < peak - kCut) break;
    }
    for (std::size_t i = i0; i-- > 0;) {
        out[i] = f(x[i]);
        peak = std::max(peak, out[i]);
        if (std::isfinite(peak) && out[i] < peak - kCut) break;
    }
    return out;
}

double log_sum_exp_trapezoid(const std::vector<double>& logv, double h) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logv) mx = std::max(mx, v);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (std::size_t i = 0; i < logv.size(); ++i)
        s += ((i == 0 || i + 1 == logv.size()) ? 0.5 : 1.0) * std::exp(logv[i] - mx);
    return mx + std::log(s * h);
}

GridDensity grid_from_log(const std::vector<double>& logv) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logv) mx = std::max(mx, v);
    if (!std::isfinite(mx)) throw std::domain_error("binomial_posterior: posterior vanishes on the grid");
    std::vector<double> d(logv.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::exp(logv[i] - mx);
    return GridDensity(-1.0, 1.0, std::move(d));
}

// Log source factor under the CPP structure: mean over the attainable source
// control rates of the source likelihood raised to gamma.
std::vector<double> log_source_factor(const std::variant<BinomialArmData, SummaryMeasure>& source,
                                      const std::vector<double>& x, double gamma, double rel_tol) {
    std::vector<double> out(x.size(), 0.0);
    if (gamma == 0.0) return out;
    if (const auto* s = std::get_if<SummaryMeasure>(&source)) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double z = (s->estimate - x[i]) / s->std_err;
            out[i] = -0.5 * gamma * z * z;
        }
        return out;
    }
    const auto& d = std::get<BinomialArmData>(source);
    d.validate();
    return eval_log_concave_on_grid(x, d.rate_difference(), [&](double th) {
        const double width = 1.0 - std::abs(th);
        if (!(width > 0.0)) return -std::numeric_limits<double>::infinity();
        return log_integrated_likelihood(d, th, gamma, rel_tol) - std::log(width);
    });
}

Posterior truncate_to_unit_range(const Posterior& p, std::size_t n) {
    const auto x = theta_grid(n);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = p.pdf(x[i]);
    return GridDensity(-1.0, 1.0, std::move(d));
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

SummaryMeasure source_summary(const std::variant<BinomialArmData, SummaryMeasure>& source) {
    if (const auto* d = std::get_if<BinomialArmData>(&source)) return rate_difference_summary(*d);
    return std::get<SummaryMeasure>(source);
}

}  // namespace

double binomial_marginal_likelihood(double theta, const BinomialArmData& data, double rel_tol) {
    if (!(theta >= -1.0 && theta <= 1.0)) throw std::domain_error("binomial_marginal_likelihood: theta outside [-1, 1]");
    data.validate();
    return std::exp(log_integrated_likelihood(data, theta, 1.0, rel_tol));
}

Analysis binomial_posterior(const BinomialArmData& data, const RateDiffPrior& prior, const BinomialOptions& opts) {
    data.validate();
    if (opts.grid_points < 3) throw std::invalid_argument("binomial_posterior: need at least 3 grid points");
    const auto x = theta_grid(opts.grid_points);
    const double h = 2.0 / static_cast<double>(opts.grid_points - 1);

    // Under the uniform-conditional prior the joint (p_c, theta) density is 1,
    // so the unnormalized posterior of theta is the marginal likelihood.
    auto log_ml = [&] {
        return eval_log_concave_on_grid(x, data.rate_difference(), [&](double th) {
            return log_integrated_likelihood(data, th, 1.0, opts.rel_tol);
        });
    };
    auto with_cpp = [&](const std::variant<BinomialArmData, SummaryMeasure>& source, double gamma) {
        auto logp = log_ml();
        if (gamma > 0.0) {
            const auto sf = log_source_factor(source, x, gamma, opts.rel_tol);
            for (std::size_t i = 0; i < x.size(); ++i) logp[i] += sf[i];
        }
        return grid_from_log(logp);
    };

    if (std::holds_alternative<UniformConditional>(prior.effect_prior)) return Analysis{grid_from_log(log_ml())};

    const auto& induced = std::get<SourceInduced>(prior.effect_prior);
    validate(induced.method);
    const auto target = rate_difference_summary(data);

    return std::visit(
        overloaded{
            [&](const Separate&) { return Analysis{grid_from_log(log_ml()), {.effective_gamma = 0.0}}; },
            [&](const Pooling&) { return Analysis{with_cpp(induced.source, 1.0), {.effective_gamma = 1.0}}; },
            [&](const ConditionalPP& m) {
                return Analysis{with_cpp(induced.source, m.gamma), {.effective_gamma = m.gamma}};
            },
            [&](const PValuePP& m) {
                const auto src = source_summary(induced.source);
                const double p = tost_p_value(src, target, m.lambda);
                const double gamma = p > 0.0 ? pvalue_gamma(p, m.k) : 1.0;
                return Analysis{with_cpp(induced.source, gamma), {.effective_gamma = gamma, .p_value = p}};
            },
            [&](const TestThenPoolDiff& m) {
                const auto src = source_summary(induced.source);
                const double p = difference_p_value(src, target);
                const bool pooled = ttp_pools(PreTest::Difference, p, m.eta);
                return Analysis{with_cpp(induced.source, pooled ? 1.0 : 0.0),
                                {.effective_gamma = pooled ? 1.0 : 0.0, .pooled_flag = pooled, .p_value = p}};
            },
            [&](const TestThenPoolEquiv& m) {
                const auto src = source_summary(induced.source);
                const double p = tost_p_value(src, target, m.lambda);
                const bool pooled = ttp_pools(PreTest::Equivalence, p, m.eta);
                return Analysis{with_cpp(induced.source, pooled ? 1.0 : 0.0),
                                {.effective_gamma = pooled ? 1.0 : 0.0, .pooled_flag = pooled, .p_value = p}};
            },
            [&](const RobustMixture& m) {
                // Informative prior on theta proportional to the integrated source likelihood.
                const auto log_inf_prior_raw = log_source_factor(induced.source, x, 1.0, opts.rel_tol);
                std::vector<double> log_inf_prior = log_inf_prior_raw;
                // The source factor already divides by the attainable width; undo it so
                // the prior is the integrated likelihood itself.
                if (std::holds_alternative<BinomialArmData>(induced.source))
                    for (std::size_t i = 0; i < x.size(); ++i) log_inf_prior[i] += std::log(std::max(1.0 - std::abs(x[i]), 0.0));
                const double log_norm = log_sum_exp_trapezoid(log_inf_prior, h);
                const auto lml = log_ml();
                std::vector<double> log_post_inf(x.size()), log_post_vague(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double width = 1.0 - std::abs(x[i]);
                    // p_c | theta is uniform on an interval of length 1 - |theta|.
                    log_post_inf[i] = width > 0.0 ? log_inf_prior[i] - log_norm + lml[i] - std::log(width)
                                                  : -std::numeric_limits<double>::infinity();
                    log_post_vague[i] = lml[i];  // prior density (1 - |theta|) cancels the same factor
                }
                const double log_m_inf = log_sum_exp_trapezoid(log_post_inf, h);
                const double log_m_vague = log_sum_exp_trapezoid(log_post_vague, h);
                double w_post = m.w;
                if (m.w > 0.0 && m.w < 1.0)
                    w_post = 1.0 / (1.0 + std::exp(std::log1p(-m.w) - std::log(m.w) + log_m_vague - log_m_inf));
                std::vector<double> d(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double a = std::isfinite(log_post_inf[i]) ? std::exp(log_post_inf[i] - log_m_inf) : 0.0;
                    const double b = std::isfinite(log_post_vague[i]) ? std::exp(log_post_vague[i] - log_m_vague) : 0.0;
                    d[i] = w_post * a + (1.0 - w_post) * b;
                }
                return Analysis{GridDensity(-1.0, 1.0, std::move(d)), {.posterior_weight = w_post}};
            },
            [&](const auto& other) {
                // Normal-likelihood route on the delta-method summaries.
                const auto src = source_summary(induced.source);
                Analysis a = analyze(MethodSpec{other}, src, target, opts.normal_prior);
                a.posterior = truncate_to_unit_range(a.posterior, opts.grid_points);
                return a;
            },
        },
        induced.method);
}

}  // namespace borrowsim
