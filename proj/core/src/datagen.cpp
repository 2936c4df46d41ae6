#include "borrowsim/datagen.hpp"

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace borrowsim {

namespace {

constexpr std::array<std::pair<Endpoint, std::string_view>, 5> kEndpointNames{{
    {Endpoint::Continuous, "continuous"},
    {Endpoint::BinaryLogOR, "binary_log_or"},
    {Endpoint::BinaryRateDiff, "binary_rate_diff"},
    {Endpoint::TimeToEvent, "time_to_event"},
    {Endpoint::RecurrentEvent, "recurrent_event"},
}};

constexpr int kMaxResamples = 10000;

double require_aux(const std::optional<double>& v, const char* what) {
    if (!v) throw std::invalid_argument(std::string("missing aux field: ") + what);
    return *v;
}

// Draws from a Poisson, falling back to a normal approximation for means
// beyond the range where the rejection sampler is well behaved.
int poisson_draw(double mean, CounterRng& rng) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::domain_error("poisson_draw: invalid mean");
    if (mean == 0.0) return 0;
    if (mean > 1e9) {
        boost::random::normal_distribution<double> z(mean, std::sqrt(mean));
        return static_cast<int>(std::max(0.0, std::round(z(rng))));
    }
    boost::random::poisson_distribution<int, double> dist(mean);
    return dist(rng);
}

int binomial_draw(int n, double p, CounterRng& rng) {
    boost::random::binomial_distribution<int, double> dist(n, p);
    return dist(rng);
}

double odds(double p) { return p / (1.0 - p); }
double rate_from_odds(double o) { return o / (1.0 + o); }

// 2x2 delta variance for n per arm at given rates.
double logor_cell_variance(double p, double n) { return 1.0 / (n * p) + 1.0 / (n * (1.0 - p)); }

double recurrent_arm_variance(double mu, double k, double n) { return (1.0 / mu + 1.0 / k) / n; }

}  // namespace

std::string_view to_string(Endpoint e) {
    for (const auto& [v, n] : kEndpointNames)
        if (v == e) return n;
    return "unknown";
}

Endpoint endpoint_from_string(std::string_view name) {
    for (const auto& [v, n] : kEndpointNames)
        if (n == name) return v;
    throw std::invalid_argument("unknown endpoint '" + std::string(name) + "'");
}

EffectScale endpoint_scale(Endpoint e) {
    switch (e) {
        case Endpoint::Continuous: return EffectScale::MeanDiff;
        case Endpoint::BinaryLogOR: return EffectScale::LogOR;
        case Endpoint::BinaryRateDiff: return EffectScale::RateDiff;
        case Endpoint::TimeToEvent: return EffectScale::LogHR;
        case Endpoint::RecurrentEvent: return EffectScale::LogRR;
    }
    return EffectScale::MeanDiff;
}

void CaseStudyPreset::validate() const {
    if (name.empty()) throw std::invalid_argument("preset: empty name");
    source.validate();
    decision.validate();
    if (source.scale != endpoint_scale(endpoint))
        throw std::invalid_argument("preset '" + name + "': source scale does not match the endpoint");
    if (sample_sizes.empty()) throw std::invalid_argument("preset '" + name + "': no sample sizes");
    for (int n : sample_sizes)
        if (n < 2) throw std::invalid_argument("preset '" + name + "': sample sizes must be >= 2");
    switch (endpoint) {
        case Endpoint::Continuous: {
            const double sd = require_aux(source.aux.patient_sd, "patient_sd");
            if (!(sd > 0.0)) throw std::invalid_argument("preset '" + name + "': patient_sd must be positive");
            break;
        }
        case Endpoint::BinaryLogOR: {
            const double p = require_aux(source.aux.control_rate, "control_rate");
            if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("preset '" + name + "': control_rate outside (0, 1)");
            break;
        }
        case Endpoint::BinaryRateDiff:
            if (!source_counts) throw std::invalid_argument("preset '" + name + "': rate-difference preset needs source counts");
            source_counts->validate();
            break;
        case Endpoint::TimeToEvent:
            if (!(require_aux(source.aux.control_event_rate, "control_event_rate") > 0.0))
                throw std::invalid_argument("preset '" + name + "': control_event_rate must be positive");
            if (!followup_dt || !(*followup_dt > 0.0))
                throw std::invalid_argument("preset '" + name + "': time-to-event preset needs followup_dt > 0");
            break;
        case Endpoint::RecurrentEvent:
            if (!(require_aux(source.aux.control_event_rate, "control_event_rate") > 0.0))
                throw std::invalid_argument("preset '" + name + "': control_event_rate must be positive");
            if (!(require_aux(source.aux.dispersion, "dispersion") > 0.0))
                throw std::invalid_argument("preset '" + name + "': dispersion must be positive");
            break;
    }
}

// ---------------------------------------------------------------------------

SummaryMeasure generate_continuous(double theta_S_hat, double drift, double sigma_T, int n, CounterRng& rng) {
    if (n < 2) throw std::domain_error("generate_continuous: n must be >= 2");
    if (!(sigma_T > 0.0)) throw std::domain_error("generate_continuous: sigma_T must be positive");
    const double nd = n;
    boost::random::normal_distribution<double> z(0.0, 1.0);
    const double mean = theta_S_hat + drift + sigma_T / std::sqrt(nd) * z(rng);
    boost::random::gamma_distribution<double> chi2_half(0.5 * (nd - 1.0), 2.0);
    double ss = 0.0;
    while (!(ss > 0.0)) ss = chi2_half(rng);
    const double sd = sigma_T * std::sqrt(ss / (nd - 1.0));
    SummaryMeasure s;
    s.estimate = mean;
    s.std_err = sd / std::sqrt(nd);
    s.scale = EffectScale::MeanDiff;
    s.n_control = n;
    s.n_treatment = n;
    return s;
}

TargetData generate_binary_logor(const SummaryMeasure& source, double drift, int n, CounterRng& rng) {
    if (n < 1) throw std::domain_error("generate_binary_logor: n must be >= 1");
    const double pc = require_aux(source.aux.control_rate, "control_rate");
    if (!(pc > 0.0 && pc < 1.0)) throw std::domain_error("generate_binary_logor: control rate outside (0, 1)");
    const double odds_s = odds(pc) * std::exp(source.estimate);
    const double pt = std::exp(drift) / (std::exp(drift) + 1.0 / odds_s);
    const int yc = binomial_draw(n, pc, rng);
    const int yt = binomial_draw(n, pt, rng);
    double a = yt, b = n - yt, c = yc, d = n - yc;
    if (a == 0 || b == 0 || c == 0 || d == 0) {
        a += 0.5;
        b += 0.5;
        c += 0.5;
        d += 0.5;
    }
    TargetData out;
    out.summary.estimate = std::log(a / b) - std::log(c / d);
    out.summary.std_err = std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);
    out.summary.scale = EffectScale::LogOR;
    out.summary.n_control = n;
    out.summary.n_treatment = n;
    out.summary.aux.control_rate = static_cast<double>(yc) / n;
    out.summary.aux.treatment_rate = static_cast<double>(yt) / n;
    out.counts = BinomialArmData{yc, n, yt, n};
    return out;
}

TargetData generate_binary_ratediff(const BinomialArmData& src, double drift, int n, CounterRng& rng) {
    src.validate();
    const double pc = static_cast<double>(src.y_control) / src.n_control;
    const double pt = static_cast<double>(src.y_treatment) / src.n_treatment + drift;
    if (!(pt >= 0.0 && pt <= 1.0)) throw std::domain_error("generate_binary_ratediff: drift leaves [0, 1]");
    BinomialArmData d{binomial_draw(n, pc, rng), n, binomial_draw(n, pt, rng), n};
    return TargetData{rate_difference_summary(d), d, 0};
}

TargetData generate_tte(double lambda_c, double lambda_t_source, double drift, int n, double dt, CounterRng& rng) {
    if (!(lambda_c > 0.0 && lambda_t_source > 0.0 && dt > 0.0)) throw std::domain_error("generate_tte: rates and dt must be positive");
    const double lambda_t = std::exp(drift) * lambda_t_source;
    TargetData out;
    int ec = 0, et = 0;
    for (;;) {
        ec = poisson_draw(lambda_c * dt * n, rng);
        et = poisson_draw(lambda_t * dt * n, rng);
        if (ec > 0 && et > 0) break;
        if (++out.resamples > kMaxResamples) throw std::runtime_error("generate_tte: no events after repeated resampling");
    }
    const double se = std::sqrt(1.0 / et + 1.0 / ec);
    boost::random::normal_distribution<double> z(std::log(lambda_t / lambda_c), se);
    out.summary.estimate = z(rng);
    out.summary.std_err = se;
    out.summary.scale = EffectScale::LogHR;
    out.summary.n_control = n;
    out.summary.n_treatment = n;
    return out;
}

double recurrent_log_rr_se(double mu_c, double mu_t, double k, int n_control, int n_treatment) {
    return std::sqrt(recurrent_arm_variance(mu_t, k, n_treatment) + recurrent_arm_variance(mu_c, k, n_control));
}

TargetData generate_recurrent(double mu_c, double mu_t, double k, double drift, int n, CounterRng& rng) {
    if (!(mu_c > 0.0 && mu_t > 0.0 && k > 0.0)) throw std::domain_error("generate_recurrent: means and k must be positive");
    const double mu_t_drift = std::exp(drift) * mu_t;
    auto arm_total = [&](double mu) {
        boost::random::gamma_distribution<double> g(n * k, mu / k);
        return poisson_draw(g(rng), rng);
    };
    TargetData out;
    int yc = 0, yt = 0;
    for (;;) {
        yc = arm_total(mu_c);
        yt = arm_total(mu_t_drift);
        if (yc > 0 && yt > 0) break;
        if (++out.resamples > kMaxResamples) throw std::runtime_error("generate_recurrent: no events after repeated resampling");
    }
    const double mc = static_cast<double>(yc) / n;
    const double mt = static_cast<double>(yt) / n;
    out.summary.estimate = std::log(mt / mc);
    out.summary.std_err = recurrent_log_rr_se(mc, mt, k, n, n);
    out.summary.scale = EffectScale::LogRR;
    out.summary.n_control = n;
    out.summary.n_treatment = n;
    out.summary.aux.control_event_rate = mc;
    out.summary.aux.treatment_event_rate = mt;
    out.summary.aux.dispersion = k;
    return out;
}

// ---------------------------------------------------------------------------

SummaryMeasure apply_denominator_factor(const SummaryMeasure& s, double factor) {
    if (!(factor > 0.0)) throw std::domain_error("apply_denominator_factor: factor must be positive");
    if (factor == 1.0) return s;
    if (!is_ratio_scale(s.scale)) throw std::domain_error("apply_denominator_factor: needs a ratio-scale summary");
    SummaryMeasure out = s;
    const double nc = s.n_control, nt = s.n_treatment;
    const double effect = std::exp(s.estimate);
    double v_old = 0.0, v_new = 0.0;
    switch (s.scale) {
        case EffectScale::LogOR: {
            const double pc = require_aux(s.aux.control_rate, "control_rate");
            const double pt = rate_from_odds(odds(pc) * effect);
            const double pc2 = rate_from_odds(odds(pc) * factor);
            const double pt2 = rate_from_odds(odds(pc) * factor * effect);
            v_old = logor_cell_variance(pc, nc) + logor_cell_variance(pt, nt);
            v_new = logor_cell_variance(pc2, nc) + logor_cell_variance(pt2, nt);
            out.aux.control_rate = pc2;
            out.aux.treatment_rate = pt2;
            break;
        }
        case EffectScale::LogHR: {
            const double lc = require_aux(s.aux.control_event_rate, "control_event_rate");
            const double lt = lc * effect;
            v_old = 1.0 / (nc * lc) + 1.0 / (nt * lt);
            v_new = v_old / factor;  // the follow-up time cancels in the ratio
            out.aux.control_event_rate = lc * factor;
            out.aux.treatment_event_rate = lt * factor;
            break;
        }
        case EffectScale::LogRR: {
            const double mc = require_aux(s.aux.control_event_rate, "control_event_rate");
            const double k = require_aux(s.aux.dispersion, "dispersion");
            const double mt = mc * effect;
            v_old = recurrent_arm_variance(mc, k, nc) + recurrent_arm_variance(mt, k, nt);
            v_new = recurrent_arm_variance(mc * factor, k, nc) + recurrent_arm_variance(mt * factor, k, nt);
            out.aux.control_event_rate = mc * factor;
            out.aux.treatment_event_rate = mt * factor;
            break;
        }
        default: break;
    }
    out.std_err = s.std_err * std::sqrt(v_new / v_old);
    return out;
}

SummaryMeasure scenario_source(const CaseStudyPreset& preset, const ScenarioKnobs& knobs) {
    if (knobs.denominator_factor == 1.0) return preset.source;
    return apply_denominator_factor(preset.source, knobs.denominator_factor);
}

std::optional<BinomialArmData> scenario_source_counts(const CaseStudyPreset& preset, const ScenarioKnobs& knobs) {
    if (knobs.denominator_factor != 1.0 && preset.source_counts)
        throw std::domain_error("denominator factor is not defined on the rate-difference scale");
    return preset.source_counts;
}

double true_target_effect(const CaseStudyPreset& preset, const ScenarioKnobs& knobs) {
    return preset.source.estimate + knobs.drift;
}

double continuous_sigma_T(const CaseStudyPreset& preset, const ScenarioKnobs& knobs) {
    if (!(knobs.std_ratio > 0.0)) throw std::domain_error("std_ratio must be positive");
    // The generator draws per-pair differences: sd of a treated minus a control outcome.
    return knobs.std_ratio * require_aux(preset.source.aux.patient_sd, "patient_sd") * std::numbers::sqrt2;
}

namespace {

void check_knobs(const CaseStudyPreset& preset, const ScenarioKnobs& knobs) {
    if (knobs.std_ratio != 1.0 && preset.endpoint != Endpoint::Continuous)
        throw std::domain_error("std_ratio applies to continuous endpoints only");
    if (knobs.denominator_factor != 1.0 && !is_ratio_scale(preset.source.scale))
        throw std::domain_error("denominator_factor applies to ratio-scale endpoints only");
}

}  // namespace

TargetData generate_target(const CaseStudyPreset& preset, const ScenarioKnobs& knobs, int n, CounterRng& rng) {
    check_knobs(preset, knobs);
    const SummaryMeasure src = scenario_source(preset, knobs);
    switch (preset.endpoint) {
        case Endpoint::Continuous:
            return TargetData{generate_continuous(src.estimate, knobs.drift, continuous_sigma_T(preset, knobs), n, rng),
                              std::nullopt, 0};
        case Endpoint::BinaryLogOR: return generate_binary_logor(src, knobs.drift, n, rng);
        case Endpoint::BinaryRateDiff: return generate_binary_ratediff(*preset.source_counts, knobs.drift, n, rng);
        case Endpoint::TimeToEvent: {
            const double lc = require_aux(src.aux.control_event_rate, "control_event_rate");
            return generate_tte(lc, lc * std::exp(src.estimate), knobs.drift, n, *preset.followup_dt, rng);
        }
        case Endpoint::RecurrentEvent: {
            const double mc = require_aux(src.aux.control_event_rate, "control_event_rate");
            const double k = require_aux(src.aux.dispersion, "dispersion");
            return generate_recurrent(mc, mc * std::exp(src.estimate), k, knobs.drift, n, rng);
        }
    }
    throw std::logic_error("generate_target: unhandled endpoint");
}

double expected_target_se(const CaseStudyPreset& preset, const ScenarioKnobs& knobs, int n) {
    check_knobs(preset, knobs);
    if (n < 1) throw std::domain_error("expected_target_se: n must be >= 1");
    const SummaryMeasure src = scenario_source(preset, knobs);
    const double nd = n;
    switch (preset.endpoint) {
        case Endpoint::Continuous: return continuous_sigma_T(preset, knobs) / std::sqrt(nd);
        case Endpoint::BinaryLogOR: {
            const double pc = *src.aux.control_rate;
            const double pt = rate_from_odds(odds(pc) * std::exp(src.estimate + knobs.drift));
            return std::sqrt(logor_cell_variance(pc, nd) + logor_cell_variance(pt, nd));
        }
        case Endpoint::BinaryRateDiff: {
            const auto& c = *preset.source_counts;
            const double pc = static_cast<double>(c.y_control) / c.n_control;
            const double pt = std::clamp(static_cast<double>(c.y_treatment) / c.n_treatment + knobs.drift, 0.0, 1.0);
            return std::sqrt((pc * (1.0 - pc) + pt * (1.0 - pt)) / nd);
        }
        case Endpoint::TimeToEvent: {
            const double lc = *src.aux.control_event_rate;
            const double lt = lc * std::exp(src.estimate + knobs.drift);
            const double dt = *preset.followup_dt;
            return std::sqrt(1.0 / (lc * dt * nd) + 1.0 / (lt * dt * nd));
        }
        case Endpoint::RecurrentEvent: {
            const double mc = *src.aux.control_event_rate;
            const double mt = mc * std::exp(src.estimate + knobs.drift);
            return recurrent_log_rr_se(mc, mt, *src.aux.dispersion, n, n);
        }
    }
    throw std::logic_error("expected_target_se: unhandled endpoint");
}

// ---------------------------------------------------------------------------

double hellinger_normal(double m1, double s1, double m2, double s2) {
    if (!(s1 > 0.0 && s2 > 0.0)) throw std::domain_error("hellinger_normal: sds must be positive");
    const double v = s1 * s1 + s2 * s2;
    const double bc = std::sqrt(2.0 * s1 * s2 / v) * std::exp(-(m1 - m2) * (m1 - m2) / (4.0 * v));
    return std::sqrt(std::max(0.0, 1.0 - bc));
}

DriftRange drift_range(const SummaryMeasure& source, double target_se, const DecisionRule& rule,
                       std::optional<double> source_treatment_rate, double threshold) {
    if (!(target_se > 0.0)) throw std::domain_error("drift_range: target_se must be positive");
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::domain_error("drift_range: threshold outside (0, 1)");
    const double m = source.estimate;
    const double s = source.std_err;
    auto excess = [&](double delta) { return hellinger_normal(m, s, m + delta, target_se) - threshold; };

    double delta_star = 0.0;
    if (excess(0.0) < 0.0) {
        // Bracket [lo, hi] with excess(lo) >= 0 > excess(hi), widening geometrically.
        const double limit = 1e3 * std::max(s, target_se);
        double hi = 0.0;
        double lo = -std::max(s, target_se);
        while (excess(lo) < 0.0) {
            hi = lo;
            lo *= 2.0;
            if (-lo > limit) throw std::domain_error("drift_range: Hellinger threshold not reached within the bracket");
        }
        while (hi - lo > 1e-10) {
            const double mid = 0.5 * (lo + hi);
            (excess(mid) >= 0.0 ? lo : hi) = mid;
        }
        delta_star = 0.5 * (lo + hi);
    }
    const double null_drift = rule.theta0 - m;
    DriftRange r{std::min({delta_star, null_drift, 0.0}), std::max({-delta_star, null_drift, 0.0}), delta_star};
    if (source.scale == EffectScale::RateDiff) {
        double lo_att = -1.0 - m, hi_att = 1.0 - m;
        if (source_treatment_rate) {
            lo_att = std::max(lo_att, -*source_treatment_rate);
            hi_att = std::min(hi_att, 1.0 - *source_treatment_rate);
        }
        r.lo = std::max(r.lo, lo_att);
        r.hi = std::min(r.hi, hi_att);
    }
    return r;
}

}  // namespace borrowsim
