#pragma once

#include "borrowsim/binomial_model.hpp"
#include "borrowsim/rng.hpp"
#include "borrowsim/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace borrowsim {

enum class Endpoint { Continuous, BinaryLogOR, BinaryRateDiff, TimeToEvent, RecurrentEvent };

std::string_view to_string(Endpoint e);
Endpoint endpoint_from_string(std::string_view name);
/// Analysis scale implied by the endpoint.
EffectScale endpoint_scale(Endpoint e);

struct CaseStudyPreset {
    std::string name;
    std::string description;
    SummaryMeasure source;
    Endpoint endpoint = Endpoint::Continuous;
    DecisionRule decision{};
    std::vector<int> sample_sizes;
    std::optional<double> followup_dt;               // time-to-event only
    std::optional<BinomialArmData> source_counts;    // rate-difference only
    std::vector<std::string> notes;                  // provenance of assumed values

    /// Throws std::invalid_argument when the preset cannot drive its generator.
    void validate() const;
};

struct ScenarioKnobs {
    double drift = 0.0;
    double std_ratio = 1.0;           // target / source patient sd (continuous only)
    double denominator_factor = 1.0;  // ratio scales only
};

/// One simulated target trial.
struct TargetData {
    SummaryMeasure summary;
    std::optional<BinomialArmData> counts;  // binary endpoints
    int resamples = 0;                      // zero-event redraws
};

// ---------------------------------------------------------------------------
// Generators

/// Mean of n draws from N(theta_S_hat + drift, sigma_T^2); SE = sample sd / sqrt(n).
/// The draw goes through the sufficient statistics (normal mean, chi-square
/// variance), which have exactly the distribution of the n-sample versions.
SummaryMeasure generate_continuous(double theta_S_hat, double drift, double sigma_T, int n_per_arm,
                                   CounterRng& rng);

/// Binomial counts per arm with the control rate of the source and treatment
/// odds e^drift times the source treatment odds. Log-OR with the delta SE.
TargetData generate_binary_logor(const SummaryMeasure& source, double drift, int n_per_arm, CounterRng& rng);

/// Binomial counts with the source control rate and treatment rate shifted
/// by drift on the rate-difference scale.
TargetData generate_binary_ratediff(const BinomialArmData& source_counts, double drift, int n_per_arm,
                                    CounterRng& rng);

/// Approximate sampling: Poisson event counts, then the log-HR from its
/// normal approximation.
TargetData generate_tte(double lambda_c, double lambda_t_source, double drift, int n_per_arm, double dt,
                        CounterRng& rng);

/// Negative-binomial counts (mean mu, dispersion k) per patient. Only arm
/// totals enter the estimate, so each total is drawn directly as
/// Poisson(Gamma(n k, mu / k)).
TargetData generate_recurrent(double mu_c, double mu_t, double k, double drift, int n_per_arm, CounterRng& rng);

/// Delta-method SE of the log rate ratio for negative-binomial counts.
double recurrent_log_rr_se(double mu_c, double mu_t, double k, int n_control, int n_treatment);

/// Dispatches on the preset endpoint after applying the knobs.
TargetData generate_target(const CaseStudyPreset& preset, const ScenarioKnobs& knobs, int n_per_arm,
                           CounterRng& rng);

// ---------------------------------------------------------------------------
// Scenario geometry

/// Source summary as seen by a scenario: denominator factor applied.
SummaryMeasure scenario_source(const CaseStudyPreset& preset, const ScenarioKnobs& knobs);
/// Source counts as seen by a scenario (rate-difference presets).
std::optional<BinomialArmData> scenario_source_counts(const CaseStudyPreset& preset, const ScenarioKnobs& knobs);

/// True target effect theta_T = theta_S_hat + drift.
double true_target_effect(const CaseStudyPreset& preset, const ScenarioKnobs& knobs);

/// SE of the target estimate at the design values (no sampling noise).
double expected_target_se(const CaseStudyPreset& preset, const ScenarioKnobs& knobs, int n_per_arm);

/// Per-patient sd of the continuous endpoint in the target (std ratio applied).
double continuous_sigma_T(const CaseStudyPreset& preset, const ScenarioKnobs& knobs);

/// Hellinger distance between two normal densities.
double hellinger_normal(double m1, double s1, double m2, double s2);

struct DriftRange {
    double lo;
    double hi;
    double delta_star;  // negative root with H = 0.9
};

/// [delta*, -delta*] joined with [theta0 - theta_S_hat, 0]; for the rate
/// difference, intersected with the attainable drifts.
DriftRange drift_range(const SummaryMeasure& source, double target_se, const DecisionRule& rule,
                       std::optional<double> source_treatment_rate = std::nullopt, double threshold = 0.9);

/// Scales the control-arm quantity (odds, hazard or mean count) by `factor`,
/// holding the effect fixed, and rescales the SE by the delta-method variance
/// ratio. Needs the aux rates of the ratio scale; factor 1 is the identity.
SummaryMeasure apply_denominator_factor(const SummaryMeasure& source, double factor);

}  // namespace borrowsim
