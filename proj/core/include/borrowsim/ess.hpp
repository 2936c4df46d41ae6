#pragma once

#include "borrowsim/posterior.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace borrowsim {

/// Scale on which a distribution is matched. BetaTransformed maps a rate
/// difference theta in [-1, 1] to (theta + 1) / 2 and matches a Beta.
enum class EssScale { Normal, BetaTransformed };

struct BetaParams {
    double a;
    double b;
};

/// Moment-based ESS. Normal: reference_sd^2 / Var. BetaTransformed: a + b of
/// the moment-matched Beta (reference_sd unused). Zero variance gives +inf.
double ess_moment(const Posterior& dist, double reference_sd, EssScale scale = EssScale::Normal);

/// Precision-based ESS. On the normal scale this is the moment ESS. On the
/// Beta scale the Beta keeps the mean and matches the curvature
/// -d^2/dy^2 log f at the mean.
double ess_precision(const Posterior& dist, double reference_sd, EssScale scale = EssScale::Normal);

/// Unit Fisher information of one observation at a parameter value.
using UnitInformation = std::function<double(double)>;
/// Normal unit with known sd: 1 / sd^2.
UnitInformation normal_unit(double reference_sd);
/// Bernoulli unit on the (0, 1) scale: 1 / (y (1 - y)).
UnitInformation bernoulli_unit();

struct ElirOptions {
    std::size_t points = 4001;
    double fd_step_sds = 1e-4;  // finite-difference step in units of the sd
    double width_sds = 12.0;
};

/// Expected local-information ratio E_pi[I_pi(theta) / I_1(theta)].
/// `log_density` may be unnormalized; the expectation runs over
/// [lo, hi] with I_pi from 5-point central differences.
double ess_elir(const std::function<double(double)>& log_density, double lo, double hi,
                const UnitInformation& unit, double fd_step, std::size_t points = 4001);

/// ELIR of a posterior with the normal unit (normal scale) or the Bernoulli
/// unit after the (theta + 1) / 2 map (Beta scale).
double ess_elir(const Posterior& dist, double reference_sd, EssScale scale = EssScale::Normal,
                const ElirOptions& opts = {});

/// Posterior ESS minus the target sample size per arm; may be negative.
double prior_ess_from_posterior(double posterior_ess, int n_target_per_arm);

struct MixtureFitOptions {
    int max_components = 3;
    int max_iterations = 1000;
    double tolerance = 1e-10;
    /// Sample count charged in the BIC penalty for weighted (grid) inputs.
    double pseudo_samples = 1000.0;
};

/// EM fit with 1..max_components components chosen by BIC. Means start at
/// quantile-spaced points. Zero-variance input yields one component with a
/// floor sd.
NormalMixture fit_mixture(std::span<const double> samples, const MixtureFitOptions& opts = {});
NormalMixture fit_mixture(const GridDensity& grid, const MixtureFitOptions& opts = {});

struct EssReport {
    double moment;
    double precision;
    double elir;
    double reference_sd;
    std::optional<NormalMixture> mixture_fit;
    std::optional<BetaParams> beta_fit;
};

/// All three posterior ESS measures; `fit` also records the matching fit.
EssReport ess_report(const Posterior& dist, double reference_sd, EssScale scale = EssScale::Normal,
                     bool fit = false);

/// Moment-matched Beta for a distribution on (0, 1).
BetaParams beta_moment_match(double mean, double variance);

}  // namespace borrowsim
