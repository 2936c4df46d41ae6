#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace borrowsim {

/// Scale on which a treatment effect is summarized.
enum class EffectScale { MeanDiff, LogOR, LogHR, LogRR, RateDiff };

std::string_view to_string(EffectScale scale);
EffectScale effect_scale_from_string(std::string_view name);

inline bool is_ratio_scale(EffectScale s) {
    return s == EffectScale::LogOR || s == EffectScale::LogHR || s == EffectScale::LogRR;
}

/// Per-arm quantities the generators need beyond the effect estimate itself.
/// Which fields are meaningful depends on the endpoint.
struct ArmAux {
    std::optional<double> patient_sd;          // continuous: per-patient outcome sd
    std::optional<double> control_rate;        // binary: control response probability
    std::optional<double> treatment_rate;      // binary: treatment response probability
    std::optional<double> control_event_rate;  // tte: hazard, recurrent: mean count
    std::optional<double> treatment_event_rate;
    std::optional<double> dispersion;          // recurrent: negative-binomial k
};

/// A treatment-effect estimate with its standard error.
struct SummaryMeasure {
    double estimate = 0.0;
    double std_err = 1.0;
    EffectScale scale = EffectScale::MeanDiff;
    int n_control = 1;
    int n_treatment = 1;
    ArmAux aux{};

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;

    double variance() const { return std_err * std_err; }
};

enum class Direction { GreaterIsEffective, LessIsEffective };

std::string_view to_string(Direction d);
Direction direction_from_string(std::string_view name);

/// Success is declared when Pr(theta outside the null region | data) > rho.
struct DecisionRule {
    double theta0 = 0.0;
    Direction direction = Direction::GreaterIsEffective;
    double rho = 0.975;

    void validate() const;
};

/// Normal initial prior on the effect. An infinite sd encodes a flat prior.
struct VaguePrior {
    double mean = 0.0;
    double sd = std::sqrt(1000.0);

    static VaguePrior flat() { return {0.0, std::numeric_limits<double>::infinity()}; }
    bool is_flat() const { return std::isinf(sd); }
    double precision() const { return is_flat() ? 0.0 : 1.0 / (sd * sd); }
};

}  // namespace borrowsim
