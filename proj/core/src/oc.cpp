#include "borrowsim/oc.hpp"

#include "borrowsim/binomial_model.hpp"
#include "borrowsim/numerics.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace borrowsim {

std::string_view to_string(PointEstimator e) { return e == PointEstimator::PosteriorMean ? "mean" : "median"; }

std::string_view to_string(FrequentistTest t) {
    switch (t) {
        case FrequentistTest::TTest: return "t";
        case FrequentistTest::ZTest: return "z";
        case FrequentistTest::CohensH: return "cohens_h";
    }
    return "unknown";
}

FrequentistTest frequentist_test_from_string(std::string_view name) {
    if (name == "t") return FrequentistTest::TTest;
    if (name == "z") return FrequentistTest::ZTest;
    if (name == "cohens_h") return FrequentistTest::CohensH;
    throw std::invalid_argument("unknown frequentist test '" + std::string(name) + "' (expected t|z|cohens_h)");
}

void FrequentistComparator::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("FrequentistComparator: alpha outside (0, 1)");
}

FrequentistTest default_frequentist_test(Endpoint e) {
    switch (e) {
        case Endpoint::Continuous: return FrequentistTest::TTest;
        case Endpoint::BinaryRateDiff: return FrequentistTest::CohensH;
        default: return FrequentistTest::ZTest;
    }
}

// ---------------------------------------------------------------------------

Analysis analyze_replicate(const Scenario& scenario, const MethodSpec& method, const TargetData& target) {
    if (scenario.preset.endpoint == Endpoint::BinaryRateDiff) {
        if (!target.counts) throw std::logic_error("analyze_replicate: rate-difference replicate without counts");
        RateDiffPrior prior;
        if (!std::holds_alternative<Separate>(method)) {
            auto counts = scenario_source_counts(scenario.preset, scenario.knobs);
            if (!counts) throw std::logic_error("analyze_replicate: rate-difference preset without source counts");
            prior.effect_prior = SourceInduced{method, *counts};
        }
        return binomial_posterior(*target.counts, prior);
    }
    return analyze(method, scenario_source(scenario.preset, scenario.knobs), target.summary);
}

EssScale ess_scale(const Scenario& scenario) {
    return scenario.preset.endpoint == Endpoint::BinaryRateDiff ? EssScale::BetaTransformed : EssScale::Normal;
}

double ess_reference_sd(const Scenario& scenario) { return expected_target_se(scenario.preset, scenario.knobs, 1); }

int ess_target_units(const Scenario& scenario) {
    // A Bernoulli unit on the rate-difference scale is one patient of either arm.
    return ess_scale(scenario) == EssScale::BetaTransformed ? 2 * scenario.n_per_arm : scenario.n_per_arm;
}

namespace {

struct ReplicateResult {
    bool ok = false;
    bool success = false;
    double estimate = 0.0;
    double half_width = 0.0;
    int position = 0;  // -1 interval below theta_true, 0 covers, +1 above
    double ess[3] = {0.0, 0.0, 0.0};
    int resamples = 0;
};

// Runs body(i) for i in [0, n) on `threads` workers.
template <class F>
void parallel_for(int n, unsigned threads, F&& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max(n, 1))));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) body(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

OCRecord estimate_oc(const Scenario& scenario, const MethodSpec& method, int n_reps, const OCOptions& opts) {
    if (n_reps < 100) throw std::invalid_argument("estimate_oc: n_reps must be >= 100");
    const int n_est = opts.n_estimation == 0 ? n_reps : opts.n_estimation;
    if (n_est < 2 || n_est > n_reps) throw std::invalid_argument("estimate_oc: n_estimation outside [2, n_reps]");
    validate(method);
    const double theta_true = true_target_effect(scenario.preset, scenario.knobs);
    const auto& rule = scenario.preset.decision;
    const EssScale scale = ess_scale(scenario);
    const double ref_sd = opts.compute_ess ? ess_reference_sd(scenario) : 1.0;
    const int units = ess_target_units(scenario);

    std::vector<ReplicateResult> reps(static_cast<std::size_t>(n_reps));
    parallel_for(n_reps, opts.threads, [&](int r) {
        ReplicateResult& out = reps[static_cast<std::size_t>(r)];
        try {
            CounterRng rng(scenario.seed, static_cast<std::uint64_t>(r));
            const TargetData data = generate_target(scenario.preset, scenario.knobs, scenario.n_per_arm, rng);
            out.resamples = data.resamples;
            const Analysis a = analyze_replicate(scenario, method, data);
            const Posterior& post = a.posterior;
            out.success = decide_success(post, rule);
            out.estimate = opts.estimator == PointEstimator::PosteriorMean ? post.mean() : post.quantile(0.5);
            const auto cri = equal_tail_interval(post, 0.95);
            out.half_width = cri.half_width();
            out.position = cri.lo > theta_true ? 1 : (cri.hi < theta_true ? -1 : 0);
            if (opts.compute_ess && r < n_est) {
                out.ess[0] = prior_ess_from_posterior(ess_moment(post, ref_sd, scale), units);
                out.ess[1] = prior_ess_from_posterior(ess_precision(post, ref_sd, scale), units);
                out.ess[2] = prior_ess_from_posterior(ess_elir(post, ref_sd, scale), units);
            }
            out.ok = std::isfinite(out.estimate) && std::isfinite(out.half_width);
        } catch (const std::exception&) {
            out.ok = false;
        }
    });

    // Ordered reduction by replicate index.
    OCRecord rec;
    rec.scenario_id = scenario.id;
    rec.method = method;
    rec.estimator = opts.estimator;
    rec.theta_true = theta_true;
    rec.n_reps = n_reps;
    rec.n_estimation = n_est;
    rec.mc_seed = scenario.seed;
    std::vector<double> err, sq, hw, e0, e1, e2;
    long successes = 0, covered = 0;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const auto& r = reps[i];
        rec.resamples += r.resamples;
        if (!r.ok) {
            ++rec.n_failed;
            continue;
        }
        successes += r.success ? 1 : 0;
        covered += r.position == 0 ? 1 : 0;
        rec.cri_above += r.position > 0 ? 1 : 0;
        rec.cri_below += r.position < 0 ? 1 : 0;
        if (static_cast<int>(i) >= n_est) continue;
        const double e = r.estimate - theta_true;
        err.push_back(e);
        sq.push_back(e * e);
        hw.push_back(r.half_width);
        if (opts.compute_ess) {
            e0.push_back(r.ess[0]);
            e1.push_back(r.ess[1]);
            e2.push_back(r.ess[2]);
        }
    }
    rec.unreliable = rec.n_failed * 100 > n_reps;
    const long ok = n_reps - rec.n_failed;
    if (ok < 2 || err.size() < 2)
        throw std::runtime_error("estimate_oc: fewer than two successful replicates in " + scenario.id);
    rec.success_prob = clopper_pearson(successes, ok);
    rec.coverage = clopper_pearson(covered, ok);
    const int B = opts.bootstrap_resamples;
    const std::uint64_t boot = derive_seed(scenario.seed, "bootstrap:" + params_label(method));
    rec.bias = bootstrap_mean_ci(err, derive_seed(boot, "bias"), B);
    rec.mse = bootstrap_mean_ci(sq, derive_seed(boot, "mse"), B);
    rec.precision = bootstrap_mean_ci(hw, derive_seed(boot, "precision"), B);
    if (opts.compute_ess) {
        const auto finite_ci = [&](const std::vector<double>& v, const char* label) {
            for (double x : v)
                if (!std::isfinite(x)) {
                    const double inf = std::numeric_limits<double>::infinity();
                    return Estimate{inf, inf, inf};
                }
            return bootstrap_mean_ci(v, derive_seed(boot, label), B);
        };
        rec.prior_ess = EssMeans{finite_ci(e0, "ess_moment"), finite_ci(e1, "ess_precision"), finite_ci(e2, "ess_elir")};
    }
    return rec;
}

// ---------------------------------------------------------------------------

Estimate clopper_pearson(long successes, long n, double level) {
    if (n < 1 || successes < 0 || successes > n) throw std::invalid_argument("clopper_pearson: bad counts");
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("clopper_pearson: level outside (0, 1)");
    const double a = 0.5 * (1.0 - level);
    const double x = static_cast<double>(successes), nn = static_cast<double>(n);
    using boost::math::beta_distribution;
    const double lo = successes == 0 ? 0.0 : boost::math::quantile(beta_distribution<double>(x, nn - x + 1.0), a);
    const double hi = successes == n ? 1.0 : boost::math::quantile(beta_distribution<double>(x + 1.0, nn - x), 1.0 - a);
    return {x / nn, lo, hi};
}

Estimate bootstrap_mean_ci(std::span<const double> values, std::uint64_t seed, int resamples, double level) {
    const std::size_t n = values.size();
    if (n < 2) throw std::invalid_argument("bootstrap_mean_ci: need at least two values");
    if (resamples < 2) throw std::invalid_argument("bootstrap_mean_ci: need at least two resamples");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (*mn == *mx) return {mean, mean, mean};
    std::vector<double> means(static_cast<std::size_t>(resamples));
    boost::random::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int b = 0; b < resamples; ++b) {
        CounterRng rng(seed, static_cast<std::uint64_t>(b));
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[pick(rng)];
        means[static_cast<std::size_t>(b)] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const auto pct = [&](double q) {
        const double h = q * static_cast<double>(means.size() - 1);
        const auto i = static_cast<std::size_t>(h);
        const double f = h - static_cast<double>(i);
        return i + 1 < means.size() ? means[i] + f * (means[i + 1] - means[i]) : means[i];
    };
    const double a = 0.5 * (1.0 - level);
    return {mean, std::min(pct(a), mean), std::max(pct(1.0 - a), mean)};
}

// ---------------------------------------------------------------------------

namespace {

double one_sided_p(FrequentistTest test, const Scenario& sc, const TargetData& d) {
    const auto& rule = sc.preset.decision;
    const double sign = rule.direction == Direction::GreaterIsEffective ? 1.0 : -1.0;
    switch (test) {
        case FrequentistTest::TTest: {
            const double t = sign * (d.summary.estimate - rule.theta0) / d.summary.std_err;
            return num::student_t_sf(t, sc.n_per_arm - 1.0);
        }
        case FrequentistTest::ZTest: {
            const double z = sign * (d.summary.estimate - rule.theta0) / d.summary.std_err;
            return num::std_normal_cdf(-z);
        }
        case FrequentistTest::CohensH: {
            if (!d.counts) throw std::invalid_argument("Cohen's h test needs binary counts");
            const auto& c = *d.counts;
            const double pc = static_cast<double>(c.y_control) / c.n_control;
            const double pt = static_cast<double>(c.y_treatment) / c.n_treatment;
            // h against the rate difference theta0 reduces to the usual h when theta0 = 0.
            const double pt0 = std::clamp(pc + rule.theta0, 0.0, 1.0);
            const double h = 2.0 * std::asin(std::sqrt(pt)) - 2.0 * std::asin(std::sqrt(pt0));
            const double n = 2.0 / (1.0 / c.n_control + 1.0 / c.n_treatment);  // n per arm, harmonic for unequal arms
            return num::std_normal_cdf(-sign * h * std::sqrt(n / 2.0));
        }
    }
    throw std::logic_error("one_sided_p: unhandled test");
}

}  // namespace

std::vector<double> frequentist_p_values(FrequentistTest test, const Scenario& scenario, int n_reps) {
    if (n_reps < 1) throw std::invalid_argument("frequentist_p_values: n_reps must be positive");
    std::vector<double> p(static_cast<std::size_t>(n_reps));
    for (int r = 0; r < n_reps; ++r) {
        CounterRng rng(scenario.seed, static_cast<std::uint64_t>(r));
        const TargetData data = generate_target(scenario.preset, scenario.knobs, scenario.n_per_arm, rng);
        p[static_cast<std::size_t>(r)] = one_sided_p(test, scenario, data);
    }
    return p;
}

Estimate rejection_rate(std::span<const double> p_values, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("rejection_rate: alpha outside (0, 1)");
    const long k = std::count_if(p_values.begin(), p_values.end(), [alpha](double p) { return p < alpha; });
    return clopper_pearson(k, static_cast<long>(p_values.size()));
}

Estimate frequentist_power(const FrequentistComparator& comparator, const Scenario& scenario, int n_reps) {
    comparator.validate();
    return rejection_rate(frequentist_p_values(comparator.test, scenario, n_reps), comparator.alpha);
}

EquivalentTieComparison compare_at_equivalent_tie(const OCRecord& at_null, const OCRecord& at_alternative,
                                                  const Scenario& alternative, FrequentistTest test, int n_reps) {
    EquivalentTieComparison out;
    out.alpha_B = at_null.success_prob.value;
    out.power_B = at_alternative.success_prob;
    if (out.alpha_B <= 0.0 || out.alpha_B >= 1.0) {
        out.alpha_zero = out.alpha_B <= 0.0;
        return out;
    }
    out.power_freq = rejection_rate(frequentist_p_values(test, alternative, n_reps), out.alpha_B);
    return out;
}

// ---------------------------------------------------------------------------

double quantile_se_ratio(int n, double q1, double q2, int n_outer, std::uint64_t seed) {
    if (n < 2 || n_outer < 2) throw std::invalid_argument("quantile_se_ratio: n and n_outer must be >= 2");
    if (!(q1 > 0.0 && q1 < 1.0 && q2 > 0.0 && q2 < 1.0)) throw std::domain_error("quantile_se_ratio: q outside (0, 1)");
    // Linear interpolation between order statistics.
    const auto sample_quantile = [n](std::vector<double>& x, double q) {
        const double h = q * (n - 1);
        const auto i = static_cast<std::size_t>(h);
        std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(i), x.end());
        const double lo = x[i];
        if (i + 1 >= x.size()) return lo;
        const double hi = *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(i) + 1, x.end());
        return lo + (h - static_cast<double>(i)) * (hi - lo);
    };
    std::vector<double> a(static_cast<std::size_t>(n_outer)), b(static_cast<std::size_t>(n_outer));
    std::vector<double> x(static_cast<std::size_t>(n));
    boost::random::normal_distribution<double> z;
    for (int o = 0; o < n_outer; ++o) {
        CounterRng rng(seed, static_cast<std::uint64_t>(o));
        for (auto& v : x) v = z(rng);
        a[static_cast<std::size_t>(o)] = sample_quantile(x, q1);
        b[static_cast<std::size_t>(o)] = sample_quantile(x, q2);
    }
    const auto sd = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double s = 0.0;
        for (double e : v) s += (e - m) * (e - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    return sd(a) / sd(b);
}

double asymptotic_quantile_se_ratio(double q1, double q2) {
    if (!(q1 > 0.0 && q1 < 1.0 && q2 > 0.0 && q2 < 1.0)) throw std::domain_error("asymptotic_quantile_se_ratio: q outside (0, 1)");
    const boost::math::normal_distribution<double> nd;
    const double f1 = boost::math::pdf(nd, boost::math::quantile(nd, q1));
    const double f2 = boost::math::pdf(nd, boost::math::quantile(nd, q2));
    return std::sqrt(q1 * (1.0 - q1) / (q2 * (1.0 - q2))) * f2 / f1;
}

}  // namespace borrowsim
