#pragma once

#include "borrowsim/posterior.hpp"
#include "borrowsim/types.hpp"

#include <optional>
#include <string>
#include <variant>

namespace borrowsim {

// ---------------------------------------------------------------------------
// Method specifications
// ---------------------------------------------------------------------------

struct Separate {};
struct Pooling {};
struct ConditionalPP {
    double gamma = 0.5;
};
/// Beta(p, q) prior on the power parameter, given by its mean and sd.
struct NormalizedPP {
    double xi_gamma = 0.5;
    double sd_gamma = 0.1;
};
struct EmpiricalBayesPP {};
struct PValuePP {
    double k = 1.0;
    double lambda = 0.0;  // equivalence margin of the TOST feeding the p-value
};
struct TestThenPoolDiff {
    double eta = 0.05;
};
struct TestThenPoolEquiv {
    double eta = 0.05;
    double lambda = 0.1;
};
struct FixedTau {
    double tau = 1.0;
};
/// Cauchy prior on log(tau), truncated to the quadrature range.
struct LogTauCauchy {
    double location = 0.0;
    double scale = 10.0;
};
using TauPrior = std::variant<FixedTau, LogTauCauchy>;
struct CommensuratePP {
    TauPrior tau_prior = LogTauCauchy{};
};
/// Two-component mixture of the source posterior and a unit-information
/// normal centered at `vague_center`.
struct RobustMixture {
    double w = 0.5;
    double vague_center = 0.0;
};

using MethodSpec = std::variant<Separate, Pooling, ConditionalPP, NormalizedPP, EmpiricalBayesPP, PValuePP,
                                TestThenPoolDiff, TestThenPoolEquiv, CommensuratePP, RobustMixture>;

/// Throws std::domain_error for parameters outside their ranges.
void validate(const MethodSpec& spec);

/// Stable machine name, e.g. "cpp", "rmp".
std::string method_name(const MethodSpec& spec);
/// Short display label with the borrowing parameters, e.g. "CPP γ=0.25".
std::string params_label(const MethodSpec& spec);

struct BorrowingDiagnostics {
    std::optional<double> effective_gamma{};
    std::optional<double> posterior_weight{};
    std::optional<bool> pooled_flag{};
    std::optional<double> p_value{};
};

struct Analysis {
    Posterior posterior;
    BorrowingDiagnostics diagnostics{};
};

// ---------------------------------------------------------------------------
// Normal-likelihood analyses of the target summary given the source summary
// ---------------------------------------------------------------------------

Posterior analyze_separate(const SummaryMeasure& target, const VaguePrior& prior);
Posterior analyze_pooling(const SummaryMeasure& source, const SummaryMeasure& target, const VaguePrior& prior);
/// Source likelihood raised to `gamma`; gamma == 0 is the exact separate analysis.
Posterior analyze_cpp(const SummaryMeasure& source, const SummaryMeasure& target, double gamma,
                      const VaguePrior& prior);

struct NppOptions {
    std::size_t grid_points = 4001;
};
/// Flat initial prior on theta, Beta prior on gamma integrated numerically.
/// The posterior mean of gamma is reported as `effective_gamma`.
Analysis analyze_npp(const SummaryMeasure& source, const SummaryMeasure& target, double xi_gamma,
                     double sd_gamma, const NppOptions& opts = {});

/// Beta parameters (p, q) for a given mean and sd of gamma.
struct BetaShape {
    double p;
    double q;
};
BetaShape npp_beta_shape(double xi_gamma, double sd_gamma);

/// Plug-in power parameter maximizing the marginal likelihood.
double ebpp_delta(const SummaryMeasure& source, const SummaryMeasure& target);
Analysis analyze_ebpp(const SummaryMeasure& source, const SummaryMeasure& target);

/// gamma(p) = exp[k ln(1 - p) / (1 - p)], continuously extended to p = 1.
double pvalue_gamma(double p_value, double k);

/// TOST p-value for H0: |theta_S - theta_T| >= lambda (max of the one-sided p-values).
double tost_p_value(const SummaryMeasure& source, const SummaryMeasure& target, double lambda);
/// Two-sided z-test p-value for H0: theta_S = theta_T.
double difference_p_value(const SummaryMeasure& source, const SummaryMeasure& target);

enum class PreTest { Difference, Equivalence };
/// Pooling decision of a test-then-pool pre-test. A p-value equal to eta is
/// not significant: the difference test pools, the equivalence test does not.
bool ttp_pools(PreTest kind, double p_value, double eta);

Analysis analyze_pvalue_pp(const SummaryMeasure& source, const SummaryMeasure& target, double k, double lambda,
                           const VaguePrior& prior);
Analysis analyze_ttp_diff(const SummaryMeasure& source, const SummaryMeasure& target, double eta,
                          const VaguePrior& prior);
Analysis analyze_ttp_equiv(const SummaryMeasure& source, const SummaryMeasure& target, double eta, double lambda,
                           const VaguePrior& prior);

struct CommensurateOptions {
    std::size_t log_tau_points = 801;
    double log_tau_lo = -15.0;
    double log_tau_hi = 15.0;
    std::size_t grid_points = 4001;
};
/// `prior` is the initial prior on the source effect.
Analysis analyze_commensurate(const SummaryMeasure& source, const SummaryMeasure& target, const TauPrior& tau_prior,
                              const VaguePrior& prior, const CommensurateOptions& opts = {});

/// Variance of the unit-information vague component: one subject per arm.
double unit_information_variance(const SummaryMeasure& target);
Analysis analyze_rmp(const SummaryMeasure& source, const SummaryMeasure& target, double w,
                     double vague_center = 0.0);

/// Dispatches on the method. `prior` is ignored by the methods that use a flat
/// initial prior (NPP, EBPP, RMP).
Analysis analyze(const MethodSpec& spec, const SummaryMeasure& source, const SummaryMeasure& target,
                 const VaguePrior& prior = {});

}  // namespace borrowsim
