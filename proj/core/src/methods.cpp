#include "borrowsim/methods.hpp"

#include "borrowsim/normal_mixture_grid.hpp"
#include "borrowsim/numerics.hpp"


#include <algorithm>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace borrowsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct Observation {
    double value;
    double precision;
};

// Normal prior updated with independent normal observations, in the given order.
NormalDist conjugate(const VaguePrior& prior, std::initializer_list<Observation> obs) {
    double precision = prior.precision();
    double weighted = prior.is_flat() ? 0.0 : precision * prior.mean;
    for (const auto& o : obs) {
        precision += o.precision;
        weighted += o.precision * o.value;
    }
    if (!(precision > 0.0)) throw std::domain_error("conjugate update: improper posterior");
    return {weighted / precision, 1.0 / std::sqrt(precision)};
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

void require(bool ok, const char* msg) {
    if (!ok) throw std::domain_error(msg);
}

}  // namespace

void validate(const MethodSpec& spec) {
    std::visit(overloaded{
                   [](const Separate&) {},
                   [](const Pooling&) {},
                   [](const ConditionalPP& m) { require(m.gamma >= 0.0 && m.gamma <= 1.0, "CPP: gamma outside [0, 1]"); },
                   [](const NormalizedPP& m) {
                       require(m.xi_gamma > 0.0 && m.xi_gamma < 1.0, "NPP: xi_gamma outside (0, 1)");
                       require(m.sd_gamma > 0.0 && m.sd_gamma <= 0.5, "NPP: sd_gamma outside (0, 0.5]");
                       require(m.sd_gamma * m.sd_gamma < m.xi_gamma * (1.0 - m.xi_gamma),
                               "NPP: sd_gamma^2 must be below xi_gamma (1 - xi_gamma)");
                   },
                   [](const EmpiricalBayesPP&) {},
                   [](const PValuePP& m) {
                       require(m.k > 0.0, "p-PP: k must be positive");
                       require(m.lambda >= 0.0, "p-PP: lambda must be nonnegative");
                   },
                   [](const TestThenPoolDiff& m) { require(m.eta > 0.0 && m.eta < 1.0, "TtP: eta outside (0, 1)"); },
                   [](const TestThenPoolEquiv& m) {
                       require(m.eta > 0.0 && m.eta < 1.0, "TtP: eta outside (0, 1)");
                       require(m.lambda > 0.0, "TtP: lambda must be positive");
                   },
                   [](const CommensuratePP& m) {
                       std::visit(overloaded{[](const FixedTau& t) { require(t.tau > 0.0, "Com. PP: tau must be positive"); },
                                             [](const LogTauCauchy& c) {
                                                 require(c.scale > 0.0, "Com. PP: Cauchy scale must be positive");
                                             }},
                                  m.tau_prior);
                   },
                   [](const RobustMixture& m) { require(m.w >= 0.0 && m.w <= 1.0, "RMP: w outside [0, 1]"); },
               },
               spec);
}

std::string method_name(const MethodSpec& spec) {
    return std::visit(overloaded{
                          [](const Separate&) { return std::string("separate"); },
                          [](const Pooling&) { return std::string("pooling"); },
                          [](const ConditionalPP&) { return std::string("cpp"); },
                          [](const NormalizedPP&) { return std::string("npp"); },
                          [](const EmpiricalBayesPP&) { return std::string("ebpp"); },
                          [](const PValuePP&) { return std::string("pvalue_pp"); },
                          [](const TestThenPoolDiff&) { return std::string("ttp_diff"); },
                          [](const TestThenPoolEquiv&) { return std::string("ttp_equiv"); },
                          [](const CommensuratePP&) { return std::string("commensurate"); },
                          [](const RobustMixture&) { return std::string("rmp"); },
                      },
                      spec);
}

std::string params_label(const MethodSpec& spec) {
    return std::visit(
        overloaded{
            [](const Separate&) { return std::string("Separate"); },
            [](const Pooling&) { return std::string("Pooling"); },
            [](const ConditionalPP& m) { return "Conditional PP γ=" + fmt(m.gamma); },
            [](const NormalizedPP& m) { return "NPP ξγ=" + fmt(m.xi_gamma) + " σγ=" + fmt(m.sd_gamma); },
            [](const EmpiricalBayesPP&) { return std::string("EBPP"); },
            [](const PValuePP& m) { return "p-PP k=" + fmt(m.k) + " λ=" + fmt(m.lambda); },
            [](const TestThenPoolDiff& m) { return "TtP (diff) η=" + fmt(m.eta); },
            [](const TestThenPoolEquiv& m) { return "TtP (eq) η=" + fmt(m.eta) + " λ=" + fmt(m.lambda); },
            [](const CommensuratePP& m) {
                return std::visit(overloaded{[](const FixedTau& t) { return "Com. PP τ=" + fmt(t.tau); },
                                             [](const LogTauCauchy& c) {
                                                 return "Com. PP log τ~Cauchy(" + fmt(c.location) + "," + fmt(c.scale) + ")";
                                             }},
                                  m.tau_prior);
            },
            [](const RobustMixture& m) {
                std::string s = "RMP w=" + fmt(m.w);
                if (m.vague_center != 0.0) s += " c=" + fmt(m.vague_center);
                return s;
            },
        },
        spec);
}

// ---------------------------------------------------------------------------

Posterior analyze_separate(const SummaryMeasure& target, const VaguePrior& prior) {
    return conjugate(prior, {{target.estimate, 1.0 / target.variance()}});
}

Posterior analyze_cpp(const SummaryMeasure& source, const SummaryMeasure& target, double gamma,
                      const VaguePrior& prior) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::domain_error("analyze_cpp: gamma outside [0, 1]");
    if (gamma == 0.0) return analyze_separate(target, prior);
    return conjugate(prior, {{target.estimate, 1.0 / target.variance()}, {source.estimate, gamma / source.variance()}});
}

Posterior analyze_pooling(const SummaryMeasure& source, const SummaryMeasure& target, const VaguePrior& prior) {
    return analyze_cpp(source, target, 1.0, prior);
}

// ---------------------------------------------------------------------------
// Normalized power prior

BetaShape npp_beta_shape(double xi_gamma, double sd_gamma) {
    require(xi_gamma > 0.0 && xi_gamma < 1.0, "NPP: xi_gamma outside (0, 1)");
    require(sd_gamma > 0.0, "NPP: sd_gamma must be positive");
    const double var = sd_gamma * sd_gamma;
    const double cap = xi_gamma * (1.0 - xi_gamma);
    if (!(var < cap)) throw std::domain_error("NPP: sd_gamma^2 must be below xi_gamma (1 - xi_gamma)");
    const double omega = var / (cap - var);
    return {xi_gamma / omega, (1.0 - xi_gamma) / omega};
}

Analysis analyze_npp(const SummaryMeasure& source, const SummaryMeasure& target, double xi_gamma, double sd_gamma,
                     const NppOptions& opts) {
    const auto [p, q] = npp_beta_shape(xi_gamma, sd_gamma);

    // Step in the tanh-sinh variable: resolve the Beta bulk and the
    // x^(p+1/2) exp(-a x) peak, whose width in log x shrinks like 1/sqrt(p).
    const double step = std::min(1.0 / 32.0, 0.1 / std::sqrt(std::max(p, q) + 1.0));
    // Half-range: the endpoint decay x^(p+1/2) (1-x)^q must reach e^-60.
    const double slowest = std::min(p + 0.5, q);
    const double u_needed = 30.0 / slowest;
    const double t_max = std::max(4.0, std::asinh(2.0 * u_needed / std::numbers::pi) + step);
    const auto rule = num::tanh_sinh_unit_rule(step, t_max);

    const double vs = source.variance();
    const double vt = target.variance();
    const double log_beta = std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
    const double diff = target.estimate - source.estimate;

    std::vector<WeightedNormal> comps;
    std::vector<double> gammas;
    comps.reserve(rule.x.size());
    gammas.reserve(rule.x.size());
    for (std::size_t j = 0; j < rule.x.size(); ++j) {
        const double g = rule.x[j];
        if (!(g > 0.0)) continue;
        const double prior_var = vs / g;  // N(theta | theta_S, sigma_S^2 / gamma)
        // Be(gamma | p, q) dgamma, folded into the rule weight.
        const double log_w_beta =
            rule.log_weight[j] + (p - 1.0) * rule.log_x[j] + (q - 1.0) * rule.log_1mx[j] - log_beta;
        const double marg_var = vt + prior_var;
        const double log_marg = num::normal_logpdf(diff, 0.0, std::sqrt(marg_var));
        const double post_prec = 1.0 / vt + 1.0 / prior_var;
        const double post_mean = (target.estimate / vt + source.estimate / prior_var) / post_prec;
        comps.push_back({log_w_beta + log_marg, post_mean, 1.0 / std::sqrt(post_prec)});
        gammas.push_back(g);
    }
    // E[gamma | D] over every node; normalize_log_weights drops negligible ones.
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& c : comps) mx = std::max(mx, c.log_weight);
    double gamma_num = 0.0, gamma_den = 0.0;
    for (std::size_t k = 0; k < comps.size(); ++k) {
        const double w = std::exp(comps[k].log_weight - mx);
        gamma_num += w * gammas[k];
        gamma_den += w;
    }
    const auto normalized = normalize_log_weights(comps);

    Analysis out{tabulate_mixture(normalized, opts.grid_points)};
    out.diagnostics.effective_gamma = gamma_num / gamma_den;
    return out;
}

// ---------------------------------------------------------------------------
// Empirical Bayes power prior

double ebpp_delta(const SummaryMeasure& source, const SummaryMeasure& target) {
    const double vs = source.variance();
    const double vt = target.variance();
    const double d2 = (target.estimate - source.estimate) * (target.estimate - source.estimate);
    return vs / (std::max(d2, vt + vs) - vt);
}

Analysis analyze_ebpp(const SummaryMeasure& source, const SummaryMeasure& target) {
    const double vs = source.variance();
    const double vt = target.variance();
    const double d2 = (source.estimate - target.estimate) * (source.estimate - target.estimate);
    const double prior_var = d2 > vt + vs ? d2 - vt : vs;
    Analysis out{conjugate(VaguePrior::flat(), {{target.estimate, 1.0 / vt}, {source.estimate, 1.0 / prior_var}})};
    out.diagnostics.effective_gamma = ebpp_delta(source, target);
    return out;
}

// ---------------------------------------------------------------------------
// Test-based borrowing

double pvalue_gamma(double p_value, double k) {
    if (!(p_value > 0.0 && p_value <= 1.0)) throw std::domain_error("pvalue_gamma: p outside (0, 1]");
    if (!(k > 0.0)) throw std::domain_error("pvalue_gamma: k must be positive");
    if (p_value == 1.0) return 0.0;
    return std::exp(k * std::log1p(-p_value) / (1.0 - p_value));
}

double tost_p_value(const SummaryMeasure& source, const SummaryMeasure& target, double lambda) {
    const double d = source.estimate - target.estimate;
    const double s = std::sqrt(source.variance() + target.variance());
    // H0a: d >= lambda rejected for small d; H0b: d <= -lambda rejected for large d.
    const double p_upper = num::std_normal_cdf((d - lambda) / s);
    const double p_lower = num::std_normal_cdf(-(d + lambda) / s);
    return std::max(p_upper, p_lower);
}

double difference_p_value(const SummaryMeasure& source, const SummaryMeasure& target) {
    const double z = (source.estimate - target.estimate) / std::sqrt(source.variance() + target.variance());
    return std::min(1.0, 2.0 * num::std_normal_cdf(-std::abs(z)));
}

bool ttp_pools(PreTest kind, double p_value, double eta) {
    const bool significant = p_value < eta;
    return kind == PreTest::Difference ? !significant : significant;
}

Analysis analyze_pvalue_pp(const SummaryMeasure& source, const SummaryMeasure& target, double k, double lambda,
                           const VaguePrior& prior) {
    require(lambda >= 0.0, "p-PP: lambda must be nonnegative");
    const double p = tost_p_value(source, target, lambda);
    // A TOST p-value can underflow to 0 for overwhelming equivalence; gamma is 1 there.
    const double gamma = p > 0.0 ? pvalue_gamma(p, k) : 1.0;
    Analysis out{analyze_cpp(source, target, gamma, prior)};
    out.diagnostics.effective_gamma = gamma;
    out.diagnostics.p_value = p;
    return out;
}

Analysis analyze_ttp_diff(const SummaryMeasure& source, const SummaryMeasure& target, double eta,
                          const VaguePrior& prior) {
    require(eta > 0.0 && eta < 1.0, "TtP: eta outside (0, 1)");
    const double p = difference_p_value(source, target);
    const bool pooled = ttp_pools(PreTest::Difference, p, eta);
    Analysis out{pooled ? analyze_pooling(source, target, prior) : analyze_separate(target, prior)};
    out.diagnostics.pooled_flag = pooled;
    out.diagnostics.p_value = p;
    out.diagnostics.effective_gamma = pooled ? 1.0 : 0.0;
    return out;
}

Analysis analyze_ttp_equiv(const SummaryMeasure& source, const SummaryMeasure& target, double eta, double lambda,
                           const VaguePrior& prior) {
    require(eta > 0.0 && eta < 1.0, "TtP: eta outside (0, 1)");
    require(lambda > 0.0, "TtP: lambda must be positive");
    const double p = tost_p_value(source, target, lambda);
    const bool pooled = ttp_pools(PreTest::Equivalence, p, eta);
    Analysis out{pooled ? analyze_pooling(source, target, prior) : analyze_separate(target, prior)};
    out.diagnostics.pooled_flag = pooled;
    out.diagnostics.p_value = p;
    out.diagnostics.effective_gamma = pooled ? 1.0 : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Commensurate power prior (power parameter fixed at 1)

Analysis analyze_commensurate(const SummaryMeasure& source, const SummaryMeasure& target, const TauPrior& tau_prior,
                              const VaguePrior& prior, const CommensurateOptions& opts) {
    // Source effect after its initial prior: theta_S | D_S ~ N(ms, vs).
    const NormalDist src = conjugate(prior, {{source.estimate, 1.0 / source.variance()}});
    const double ms = src.mean;
    const double vs = src.sd * src.sd;
    const double vt = target.variance();

    if (const auto* fixed = std::get_if<FixedTau>(&tau_prior)) {
        require(fixed->tau > 0.0, "Com. PP: tau must be positive");
        const double prior_var = vs + 1.0 / fixed->tau;
        return Analysis{conjugate(VaguePrior{ms, std::sqrt(prior_var)}, {{target.estimate, 1.0 / vt}})};
    }

    const auto& cauchy = std::get<LogTauCauchy>(tau_prior);
    require(cauchy.scale > 0.0, "Com. PP: Cauchy scale must be positive");
    require(opts.log_tau_points >= 3 && opts.log_tau_hi > opts.log_tau_lo, "Com. PP: bad log tau grid");
    const double h = (opts.log_tau_hi - opts.log_tau_lo) / static_cast<double>(opts.log_tau_points - 1);
    std::vector<WeightedNormal> comps;
    comps.reserve(opts.log_tau_points);
    for (std::size_t j = 0; j < opts.log_tau_points; ++j) {
        const double log_tau = opts.log_tau_lo + h * static_cast<double>(j);
        const double z = (log_tau - cauchy.location) / cauchy.scale;
        const double trap = (j == 0 || j + 1 == opts.log_tau_points) ? 0.5 : 1.0;
        const double log_prior = std::log(trap) - std::log1p(z * z);
        const double prior_var = vs + std::exp(-log_tau);
        const double log_marg = num::normal_logpdf(target.estimate, ms, std::sqrt(vt + prior_var));
        const double post_prec = 1.0 / vt + 1.0 / prior_var;
        const double post_mean = (target.estimate / vt + ms / prior_var) / post_prec;
        comps.push_back({log_prior + log_marg, post_mean, 1.0 / std::sqrt(post_prec)});
    }
    return Analysis{tabulate_mixture(normalize_log_weights(comps), opts.grid_points)};
}

// ---------------------------------------------------------------------------
// Robust mixture prior

double unit_information_variance(const SummaryMeasure& target) {
    // sigma_T^2 = s^2 (1/n_c + 1/n_t); one subject per arm has variance 2 s^2.
    const double inv_n = 1.0 / target.n_control + 1.0 / target.n_treatment;
    return target.variance() * 2.0 / inv_n;
}

Analysis analyze_rmp(const SummaryMeasure& source, const SummaryMeasure& target, double w, double vague_center) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::domain_error("analyze_rmp: w outside [0, 1]");
    const double vt = target.variance();
    struct Component {
        double mean;
        double var;
    };
    const Component informative{source.estimate, source.variance()};
    const Component vague{vague_center, unit_information_variance(target)};

    auto log_marginal = [&](const Component& c) {
        return num::normal_logpdf(target.estimate, c.mean, std::sqrt(vt + c.var));
    };
    auto update = [&](const Component& c) {
        return conjugate(VaguePrior{c.mean, std::sqrt(c.var)}, {{target.estimate, 1.0 / vt}});
    };

    double w_post;
    if (w == 0.0 || w == 1.0 || (informative.mean == vague.mean && informative.var == vague.var)) {
        w_post = w;
    } else {
        const double log_ratio = std::log1p(-w) - std::log(w) + log_marginal(vague) - log_marginal(informative);
        w_post = 1.0 / (1.0 + std::exp(log_ratio));
    }
    const NormalDist inf_post = update(informative);
    const NormalDist vague_post = update(vague);
    std::vector<MixtureComponent> comps;
    if (w_post > 0.0) comps.push_back({w_post, inf_post.mean, inf_post.sd});
    if (w_post < 1.0) comps.push_back({1.0 - w_post, vague_post.mean, vague_post.sd});
    Analysis out{NormalMixture(std::move(comps))};
    out.diagnostics.posterior_weight = w_post;
    return out;
}

// ---------------------------------------------------------------------------

Analysis analyze(const MethodSpec& spec, const SummaryMeasure& source, const SummaryMeasure& target,
                 const VaguePrior& prior) {
    return std::visit(
        overloaded{
            [&](const Separate&) { return Analysis{analyze_separate(target, prior), {.effective_gamma = 0.0}}; },
            [&](const Pooling&) { return Analysis{analyze_pooling(source, target, prior), {.effective_gamma = 1.0}}; },
            [&](const ConditionalPP& m) {
                return Analysis{analyze_cpp(source, target, m.gamma, prior), {.effective_gamma = m.gamma}};
            },
            [&](const NormalizedPP& m) { return analyze_npp(source, target, m.xi_gamma, m.sd_gamma); },
            [&](const EmpiricalBayesPP&) { return analyze_ebpp(source, target); },
            [&](const PValuePP& m) { return analyze_pvalue_pp(source, target, m.k, m.lambda, prior); },
            [&](const TestThenPoolDiff& m) { return analyze_ttp_diff(source, target, m.eta, prior); },
            [&](const TestThenPoolEquiv& m) { return analyze_ttp_equiv(source, target, m.eta, m.lambda, prior); },
            [&](const CommensuratePP& m) { return analyze_commensurate(source, target, m.tau_prior, prior); },
            [&](const RobustMixture& m) { return analyze_rmp(source, target, m.w, m.vague_center); },
        },
        spec);
}

}  // namespace borrowsim
