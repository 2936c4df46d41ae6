#pragma once

#include "borrowsim/methods.hpp"
#include "borrowsim/posterior.hpp"
#include "borrowsim/types.hpp"

#include <optional>
#include <variant>

namespace borrowsim {

/// Responder counts per arm.
struct BinomialArmData {
    int y_control = 0;
    int n_control = 1;
    int y_treatment = 0;
    int n_treatment = 1;

    /// Throws std::domain_error on impossible counts.
    void validate() const;
    double rate_difference() const;
};

/// Rate-difference summary with the delta-method SE. Rates at 0 or 1 use
/// (y + 0.5) / (n + 1) in the variance so the SE stays positive.
SummaryMeasure rate_difference_summary(const BinomialArmData& data);

/// theta | p_c ~ U(-p_c, 1 - p_c) with p_c ~ U(0, 1).
struct UniformConditional {};

/// Prior built from a source study by one of the borrowing methods.
/// CPP and RMP use the source counts natively when available; a summary
/// source enters through its normal likelihood.
struct SourceInduced {
    MethodSpec method;
    std::variant<BinomialArmData, SummaryMeasure> source;
};

struct RateDiffPrior {
    std::variant<UniformConditional, SourceInduced> effect_prior = UniformConditional{};
};

struct BinomialOptions {
    std::size_t grid_points = 2001;
    double rel_tol = 1e-9;
    /// Initial prior for the methods fitted on the normal approximation.
    VaguePrior normal_prior{};
};

/// Integral over p_c in [0, 1] of Bin(y_c | p_c, n_c) Bin(y_t | p_c + theta, n_t),
/// with the integrand zero wherever p_c + theta leaves [0, 1].
double binomial_marginal_likelihood(double theta, const BinomialArmData& data, double rel_tol = 1e-9);

/// Posterior over the rate difference on a uniform grid over [-1, 1].
Analysis binomial_posterior(const BinomialArmData& data, const RateDiffPrior& prior = {},
                            const BinomialOptions& opts = {});

}  // namespace borrowsim
