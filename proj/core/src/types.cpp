#include "borrowsim/types.hpp"

#include <array>
#include <utility>

namespace borrowsim {

namespace {

constexpr std::array<std::pair<EffectScale, std::string_view>, 5> kScaleNames{{
    {EffectScale::MeanDiff, "mean_diff"},
    {EffectScale::LogOR, "log_or"},
    {EffectScale::LogHR, "log_hr"},
    {EffectScale::LogRR, "log_rr"},
    {EffectScale::RateDiff, "rate_diff"},
}};

}  // namespace

std::string_view to_string(EffectScale scale) {
    for (const auto& [s, name] : kScaleNames)
        if (s == scale) return name;
    return "unknown";
}

EffectScale effect_scale_from_string(std::string_view name) {
    for (const auto& [s, n] : kScaleNames)
        if (n == name) return s;
    throw std::invalid_argument("unknown effect scale '" + std::string(name) + "'");
}

std::string_view to_string(Direction d) {
    return d == Direction::GreaterIsEffective ? "greater" : "less";
}

Direction direction_from_string(std::string_view name) {
    if (name == "greater") return Direction::GreaterIsEffective;
    if (name == "less") return Direction::LessIsEffective;
    throw std::invalid_argument("unknown direction '" + std::string(name) + "' (expected greater|less)");
}

void SummaryMeasure::validate() const {
    if (!(std_err > 0.0) || !std::isfinite(std_err))
        throw std::invalid_argument("SummaryMeasure: std_err must be positive and finite");
    if (!std::isfinite(estimate)) throw std::invalid_argument("SummaryMeasure: estimate not finite");
    if (n_control < 1 || n_treatment < 1)
        throw std::invalid_argument("SummaryMeasure: arm sizes must be >= 1");
    if (scale == EffectScale::RateDiff && (estimate < -1.0 || estimate > 1.0))
        throw std::invalid_argument("SummaryMeasure: rate difference outside [-1, 1]");
}

void DecisionRule::validate() const {
    if (!(rho > 0.5 && rho < 1.0)) throw std::invalid_argument("DecisionRule: rho must lie in (0.5, 1)");
    if (!std::isfinite(theta0)) throw std::invalid_argument("DecisionRule: theta0 not finite");
}

}  // namespace borrowsim
