#pragma once

#include "borrowsim/datagen.hpp"
#include "borrowsim/ess.hpp"
#include "borrowsim/methods.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace borrowsim {

/// One data-generating cell. Every method analysed on the same scenario sees
/// the same replicate data: replicate r draws from stream r of `seed`.
struct Scenario {
    std::string id;
    CaseStudyPreset preset;
    int n_per_arm = 1;
    ScenarioKnobs knobs{};
    std::uint64_t seed = 0;
};

enum class PointEstimator { PosteriorMean, PosteriorMedian };
std::string_view to_string(PointEstimator e);

/// A Monte-Carlo estimate with its 95% interval.
struct Estimate {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct EssMeans {
    Estimate moment;
    Estimate precision;
    Estimate elir;
};

struct OCRecord {
    std::string scenario_id;
    MethodSpec method;
    PointEstimator estimator = PointEstimator::PosteriorMean;
    double theta_true = 0.0;
    int n_reps = 0;
    int n_estimation = 0;
    int n_failed = 0;
    bool unreliable = false;  // more than 1% failed replicates
    Estimate success_prob;
    Estimate mse;
    Estimate bias;
    Estimate precision;  // mean half-width of the 95% credible interval
    Estimate coverage;
    int cri_above = 0;  // intervals entirely above theta_true
    int cri_below = 0;
    std::optional<EssMeans> prior_ess;
    long resamples = 0;
    std::uint64_t mc_seed = 0;
};

struct OCOptions {
    PointEstimator estimator = PointEstimator::PosteriorMean;
    bool compute_ess = true;
    int bootstrap_resamples = 2000;
    /// Bias, MSE, precision and ESS use replicates [0, n_estimation); 0 means all.
    int n_estimation = 0;
    unsigned threads = 1;
};

/// Analysis of one simulated target trial under `method`. Rate-difference
/// presets go through the binomial model, everything else through the
/// normal-likelihood analyses.
Analysis analyze_replicate(const Scenario& scenario, const MethodSpec& method, const TargetData& target);

/// ESS scale and one-information-unit sd for a scenario.
EssScale ess_scale(const Scenario& scenario);
double ess_reference_sd(const Scenario& scenario);
/// Target information subtracted from the posterior ESS: patients per arm on
/// the normal scale, patients in both arms on the Beta scale.
int ess_target_units(const Scenario& scenario);

/// Throws std::invalid_argument if n_reps < 100.
OCRecord estimate_oc(const Scenario& scenario, const MethodSpec& method, int n_reps, const OCOptions& opts = {});

// ---------------------------------------------------------------------------
// Interval estimates

/// Exact two-sided Clopper-Pearson interval for `successes` of `n`.
Estimate clopper_pearson(long successes, long n, double level = 0.95);

/// Percentile bootstrap interval for the mean of `values`, resampled with a
/// counter-based stream of `seed`. The interval is widened to contain the
/// sample mean when the percentiles miss it.
Estimate bootstrap_mean_ci(std::span<const double> values, std::uint64_t seed, int resamples = 2000,
                           double level = 0.95);

// ---------------------------------------------------------------------------
// Frequentist comparators

/// TTest: one-sample t on the replicate's estimate and SE with n - 1 df
/// (the continuous effect is a mean of n per-pair differences). ZTest: known
/// variance z on the summary. CohensH: z = h sqrt(n / 2) with
/// h = 2 asin sqrt(p_t) - 2 asin sqrt(p_c); needs counts.
enum class FrequentistTest { TTest, ZTest, CohensH };
std::string_view to_string(FrequentistTest t);
FrequentistTest frequentist_test_from_string(std::string_view name);

struct FrequentistComparator {
    FrequentistTest test = FrequentistTest::TTest;
    double alpha = 0.025;
    void validate() const;
};

/// The comparator the case study calls for: t for continuous, Cohen's h for
/// the rate difference, z otherwise.
FrequentistTest default_frequentist_test(Endpoint e);

/// One-sided p-values of the comparator for replicates 0..n_reps-1, drawn
/// from the same streams estimate_oc uses.
std::vector<double> frequentist_p_values(FrequentistTest test, const Scenario& scenario, int n_reps);

/// Rejection rate at `alpha` with its Clopper-Pearson interval.
Estimate frequentist_power(const FrequentistComparator& comparator, const Scenario& scenario, int n_reps);
Estimate rejection_rate(std::span<const double> p_values, double alpha);

struct EquivalentTieComparison {
    double alpha_B = 0.0;
    Estimate power_B;
    std::optional<Estimate> power_freq;  // empty when alpha_B == 0
    bool alpha_zero = false;
};

/// Frequentist power at the borrowing method's type 1 error rate.
/// `at_null` must have been estimated with theta_T = theta0.
EquivalentTieComparison compare_at_equivalent_tie(const OCRecord& at_null, const OCRecord& at_alternative,
                                                  const Scenario& alternative, FrequentistTest test, int n_reps);

// ---------------------------------------------------------------------------

/// sd(sample q1-quantile) / sd(sample q2-quantile) over n_outer standard
/// normal samples of size n.
double quantile_se_ratio(int n, double q1, double q2, int n_outer, std::uint64_t seed);
/// Large-sample value of the same ratio.
double asymptotic_quantile_se_ratio(double q1, double q2);

}  // namespace borrowsim
