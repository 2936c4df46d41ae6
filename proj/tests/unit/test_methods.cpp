#include "borrowsim/methods.hpp"
#include "borrowsim/numerics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace borrowsim;

namespace {

SummaryMeasure sm(double est, double se, int n = 100) {
    SummaryMeasure s{est, se};
    s.n_control = s.n_treatment = n;
    return s;
}

const NormalDist& normal_of(const Posterior& p) { return p.as_normal(); }

double Phi(double z) { return boost::math::cdf(boost::math::normal_distribution<double>(), z); }

double kummer_m(double a, double b, double z) { return boost::math::hypergeometric_1F1(a, b, z); }

}  // namespace

TEST(Separate, PrecisionWeighting) {
    const auto p = normal_of(analyze_separate(sm(0.3, 0.2), VaguePrior{}));
    EXPECT_NEAR(p.mean, 0.3 * 1000.0 / (1000.0 + 0.04), 1e-12);
    EXPECT_NEAR(p.sd, std::sqrt(1.0 / (1.0 / 1000.0 + 25.0)), 1e-12);
    const auto flat = normal_of(analyze_separate(sm(0.3, 0.2), VaguePrior::flat()));
    EXPECT_DOUBLE_EQ(flat.mean, 0.3);
    EXPECT_DOUBLE_EQ(flat.sd, 0.2);
    EXPECT_NEAR(normal_of(analyze_separate(sm(0.3, 1e-6), VaguePrior{})).mean, 0.3, 1e-12);
}

TEST(Pooling, EqualSummariesHalveVariance) {
    const auto p = normal_of(analyze_pooling(sm(0.4, 0.1), sm(0.4, 0.1), VaguePrior::flat()));
    EXPECT_NEAR(p.sd, 0.1 / std::sqrt(2.0), 1e-14);
    EXPECT_NEAR(p.mean, 0.4, 1e-14);
}

TEST(Pooling, BelimumabPrecisionWeighting) {
    const double th_s = std::log(1.62), se_s = (std::log(2.05) - std::log(1.27)) / (2 * 1.96);
    const auto p = normal_of(analyze_pooling(sm(th_s, se_s), sm(0.0, 0.2), VaguePrior{}));
    const double prec = 1.0 / 1000.0 + 1.0 / (se_s * se_s) + 1.0 / 0.04;
    EXPECT_NEAR(p.sd, std::sqrt(1.0 / prec), 1e-12);
    EXPECT_NEAR(p.mean, (th_s / (se_s * se_s)) / prec, 1e-12);
}

TEST(Cpp, IdentitiesOnRandomInputs) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> m(-2.0, 2.0), s(0.01, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const auto src = sm(m(gen), s(gen)), tgt = sm(m(gen), s(gen));
        const auto c1 = normal_of(analyze_cpp(src, tgt, 1.0, VaguePrior{}));
        const auto po = normal_of(analyze_pooling(src, tgt, VaguePrior{}));
        EXPECT_EQ(c1.mean, po.mean);
        EXPECT_EQ(c1.sd, po.sd);
        const auto c0 = normal_of(analyze_cpp(src, tgt, 0.0, VaguePrior{}));
        const auto se = normal_of(analyze_separate(tgt, VaguePrior{}));
        EXPECT_EQ(c0.mean, se.mean);
        EXPECT_EQ(c0.sd, se.sd);
    }
}

TEST(Cpp, DiscountedPrecisionExample) {
    const auto p = normal_of(analyze_cpp(sm(0.4824, 0.1221), sm(0.30, 0.20), 0.5, VaguePrior{}));
    const double a = 0.5 / (0.1221 * 0.1221), b = 1.0 / 0.04, c = 1.0 / 1000.0;
    EXPECT_NEAR(p.sd, std::sqrt(1.0 / (a + b + c)), 1e-12);
    EXPECT_NEAR(p.mean, (a * 0.4824 + b * 0.30) / (a + b + c), 1e-12);
    EXPECT_THROW(analyze_cpp(sm(0, 1), sm(0, 1), 1.5, VaguePrior{}), std::domain_error);
    EXPECT_THROW(analyze_cpp(sm(0, 1), sm(0, 1), -0.1, VaguePrior{}), std::domain_error);
}

TEST(Cpp, VarianceNonincreasingInGamma) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> m(-2.0, 2.0), s(0.01, 1.0), g(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const auto src = sm(m(gen), s(gen)), tgt = sm(m(gen), s(gen));
        double g1 = g(gen), g2 = g(gen);
        if (g1 > g2) std::swap(g1, g2);
        EXPECT_GE(normal_of(analyze_cpp(src, tgt, g1, VaguePrior{})).sd, normal_of(analyze_cpp(src, tgt, g2, VaguePrior{})).sd);
    }
}

TEST(Npp, BetaShape) {
    const auto b = npp_beta_shape(0.5, 0.1);
    const double omega = 0.01 / (0.25 - 0.01);
    EXPECT_NEAR(b.p, 0.5 / omega, 1e-12);
    EXPECT_NEAR(b.q, 0.5 / omega, 1e-12);
    EXPECT_THROW(npp_beta_shape(0.5, 0.5), std::domain_error);
    EXPECT_THROW(npp_beta_shape(0.1, 0.35), std::domain_error);
}

TEST(Npp, MatchesKummerClosedForm) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> m(-1.0, 1.0), s(0.05, 0.5), xi(0.1, 0.9), u(0.05, 0.95);
    for (int f = 0; f < 20; ++f) {
        const double x = xi(gen);
        const double sd_max = std::min(0.5, 0.95 * std::sqrt(x * (1.0 - x)));
        const double sdg = 0.05 + u(gen) * (sd_max - 0.05);
        const auto src = sm(m(gen), s(gen)), tgt = sm(m(gen), s(gen));
        const auto a = analyze_npp(src, tgt, x, sdg);
        const auto& g = std::get<GridDensity>(a.posterior.repr());
        const auto [p, q] = npp_beta_shape(x, sdg);
        std::vector<double> oracle(g.size());
        double mass = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double th = g.node(i);
            const double zt = (tgt.estimate - th) / tgt.std_err, zs = (src.estimate - th) / src.std_err;
            oracle[i] = std::exp(-0.5 * zt * zt) * kummer_m(p + 0.5, p + q + 0.5, -0.5 * zs * zs);
        }
        for (std::size_t i = 0; i + 1 < g.size(); ++i) mass += 0.5 * g.step() * (oracle[i] + oracle[i + 1]);
        double err = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            err = std::max(err, std::abs(g.density()[i] - oracle[i] / mass));
            peak = std::max(peak, oracle[i] / mass);
        }
        EXPECT_LT(err / peak, 1e-6) << "fixture " << f;
    }
}

TEST(Npp, ConsistencyIncreasesBorrowing) {
    const auto a = analyze_npp(sm(0.3, 0.1), sm(0.3, 0.1), 0.5, 0.2);
    // 1-D quadrature oracle for E[gamma | D].
    const auto [p, q] = npp_beta_shape(0.5, 0.2);
    const auto post = [&](double g) {
        return std::pow(g, p - 1) * std::pow(1 - g, q - 1) * num::normal_pdf(0.3, 0.3, std::sqrt(0.01 + 0.01 / g));
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    const double z = ts.integrate(post, 0.0, 1.0);
    const double m = ts.integrate([&](double g) { return g * post(g); }, 0.0, 1.0) / z;
    ASSERT_TRUE(a.diagnostics.effective_gamma.has_value());
    EXPECT_NEAR(*a.diagnostics.effective_gamma, m, 1e-8);
    EXPECT_GT(m, 0.5);
}

TEST(Npp, DegenerateBetaIsCpp) {
    const auto src = sm(0.2, 0.15), tgt = sm(0.5, 0.2);
    const auto a = analyze_npp(src, tgt, 0.5, 0.002);
    const Posterior cpp = analyze_cpp(src, tgt, 0.5, VaguePrior::flat());
    const auto& g = std::get<GridDensity>(a.posterior.repr());
    double err = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        err = std::max(err, std::abs(g.density()[i] - cpp.pdf(g.node(i))));
        peak = std::max(peak, cpp.pdf(g.node(i)));
    }
    EXPECT_LT(err / peak, 1e-4);
}

TEST(Ebpp, FormulaExample) {
    EXPECT_NEAR(ebpp_delta(sm(0.0, 0.1), sm(1.0, 0.1)), 0.01 / (1.0 - 0.01), 1e-12);
    EXPECT_DOUBLE_EQ(ebpp_delta(sm(0.0, 0.1), sm(0.05, 0.1)), 1.0);
}

TEST(Ebpp, ConsistentDataPoolsUnderFlatPrior) {
    const auto a = normal_of(analyze_ebpp(sm(0.2, 0.1), sm(0.25, 0.12)).posterior);
    const auto p = normal_of(analyze_pooling(sm(0.2, 0.1), sm(0.25, 0.12), VaguePrior::flat()));
    EXPECT_NEAR(a.mean, p.mean, 1e-14);
    EXPECT_NEAR(a.sd, p.sd, 1e-14);
}

TEST(Ebpp, GridArgmaxOracle) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> m(-1.0, 1.0), s(0.05, 0.5);
    for (int f = 0; f < 100; ++f) {
        const auto src = sm(m(gen), s(gen)), tgt = sm(m(gen), s(gen));
        double best = -1e300, arg = 0.0;
        for (int i = 1; i <= 10000; ++i) {
            const double g = i / 10000.0;
            const double ll = num::normal_logpdf(tgt.estimate, src.estimate, std::sqrt(tgt.variance() + src.variance() / g));
            if (ll > best) {
                best = ll;
                arg = g;
            }
        }
        EXPECT_NEAR(ebpp_delta(src, tgt), arg, 1e-3) << f;
    }
}

TEST(Ebpp, PosteriorIsDensityProduct) {
    const auto src = sm(0.0, 0.1), tgt = sm(0.8, 0.15);
    const double d = ebpp_delta(src, tgt);
    const Posterior p = analyze_ebpp(src, tgt).posterior;
    const auto logprod = [&](double x) {
        return num::normal_logpdf(tgt.estimate, x, tgt.std_err) + num::normal_logpdf(x, src.estimate, src.std_err / std::sqrt(d));
    };
    const double c0 = std::log(p.pdf(0.5)) - logprod(0.5);
    for (double x : {0.3, 0.6, 0.7, 0.9})
        EXPECT_NEAR(std::log(p.pdf(x)) - logprod(x), c0, 1e-10);
}

TEST(PValueGamma, Examples) {
    EXPECT_NEAR(pvalue_gamma(1e-12, 3.0), 1.0, 1e-10);
    EXPECT_LT(pvalue_gamma(1.0 - 1e-9, 1.0), 1e-6);
    EXPECT_DOUBLE_EQ(pvalue_gamma(1.0, 1.0), 0.0);
    EXPECT_NEAR(pvalue_gamma(0.5, 1.0), 0.25, 1e-15);
    double prev = 1.0;
    for (double p = 0.01; p < 1.0; p += 0.01) {
        const double g = pvalue_gamma(p, 2.0);
        EXPECT_LE(g, prev);
        EXPECT_LE(pvalue_gamma(p, 3.0), g);
        prev = g;
    }
}

TEST(PValuePP, IndependentTost) {
    const auto src = sm(0.5, 0.1), tgt = sm(0.0, 0.1);
    const double s = std::sqrt(0.02), d = 0.5, lambda = 0.2;
    const double pa = Phi((d - lambda) / s), pb = 1.0 - Phi((d + lambda) / s);
    const double p = std::max(pa, pb);
    EXPECT_NEAR(tost_p_value(src, tgt, lambda), p, 1e-14);
    const auto a = analyze_pvalue_pp(src, tgt, 2.0, lambda, VaguePrior{});
    EXPECT_NEAR(*a.diagnostics.p_value, p, 1e-14);
    EXPECT_NEAR(*a.diagnostics.effective_gamma, std::exp(2.0 * std::log(1.0 - p) / (1.0 - p)), 1e-14);
}

TEST(PValuePP, LimitsAndBounds) {
    const auto a = analyze_pvalue_pp(sm(0.3, 0.1), sm(0.3, 0.1), 1.0, 10.0, VaguePrior{});
    EXPECT_NEAR(*a.diagnostics.effective_gamma, 1.0, 1e-12);
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> m(-1.0, 1.0), s(0.05, 0.5), k(0.5, 20.0);
    for (int i = 0; i < 500; ++i) {
        const double kk = k(gen);
        const auto r = analyze_pvalue_pp(sm(m(gen), s(gen)), sm(m(gen), s(gen)), kk, 0.0, VaguePrior{});
        EXPECT_GE(*r.diagnostics.p_value, 0.5);
        EXPECT_LE(*r.diagnostics.effective_gamma, pvalue_gamma(0.5, kk) + 1e-15);
    }
}

TEST(TestThenPool, DifferenceTest) {
    EXPECT_TRUE(*analyze_ttp_diff(sm(0.3, 0.1), sm(0.3, 0.1), 0.05, VaguePrior{}).diagnostics.pooled_flag);
    const double s = 0.1;
    const double gap = 5.0 * std::sqrt(2.0) * s;
    EXPECT_FALSE(*analyze_ttp_diff(sm(gap, s), sm(0.0, s), 0.05, VaguePrior{}).diagnostics.pooled_flag);
    // The boundary z = 1.959964 gives p = 0.05; a tie is not a rejection.
    const double z = 1.959963984540054;
    EXPECT_NEAR(difference_p_value(sm(z * std::sqrt(2.0) * s, s), sm(0.0, s)), 0.05, 1e-14);
    EXPECT_TRUE(ttp_pools(PreTest::Difference, 0.05, 0.05));
    EXPECT_FALSE(ttp_pools(PreTest::Difference, 0.0499, 0.05));
}

TEST(TestThenPool, EquivalenceTest) {
    const double s = 0.05 / std::sqrt(2.0);
    const auto a = analyze_ttp_equiv(sm(0.1, s), sm(0.0, s), 0.05, 0.2, VaguePrior{});
    EXPECT_NEAR(*a.diagnostics.p_value, Phi(-2.0), 1e-12);
    EXPECT_TRUE(*a.diagnostics.pooled_flag);
    EXPECT_TRUE(*analyze_ttp_equiv(sm(0.3, 0.01), sm(0.3, 0.01), 0.05, 1.0, VaguePrior{}).diagnostics.pooled_flag);
    EXPECT_FALSE(*analyze_ttp_equiv(sm(2.0, 0.1), sm(0.0, 0.1), 0.05, 0.2, VaguePrior{}).diagnostics.pooled_flag);
    EXPECT_FALSE(ttp_pools(PreTest::Equivalence, 0.05, 0.05));
    const auto sep = normal_of(analyze_separate(sm(0.0, 0.1), VaguePrior{}));
    const auto r = normal_of(analyze_ttp_equiv(sm(2.0, 0.1), sm(0.0, 0.1), 0.05, 0.2, VaguePrior{}).posterior);
    EXPECT_EQ(r.mean, sep.mean);
}

TEST(Commensurate, FixedTauLimits) {
    const auto src = sm(0.4824, 0.1221), tgt = sm(0.2, 0.25);
    const auto big = normal_of(analyze_commensurate(src, tgt, FixedTau{1e14}, VaguePrior{}).posterior);
    const auto pool = normal_of(analyze_pooling(src, tgt, VaguePrior{}));
    EXPECT_NEAR(big.mean, pool.mean, 1e-10);
    EXPECT_NEAR(big.sd, pool.sd, 1e-10);
    const auto small = normal_of(analyze_commensurate(src, tgt, FixedTau{1e-12}, VaguePrior::flat()).posterior);
    EXPECT_NEAR(small.mean, 0.2, 1e-9);
    EXPECT_NEAR(small.sd, 0.25, 1e-9);
}

TEST(Commensurate, FixedTauConjugateOracle) {
    const auto src = sm(0.4824, 0.1221), tgt = sm(0.2, 0.25);
    const auto p = normal_of(analyze_commensurate(src, tgt, FixedTau{4.0}, VaguePrior::flat()).posterior);
    const double v0 = 0.1221 * 0.1221 + 0.25, vt = 0.0625;
    const double v = 1.0 / (1.0 / v0 + 1.0 / vt);
    EXPECT_NEAR(p.sd, std::sqrt(v), 1e-12);
    EXPECT_NEAR(p.mean, v * (0.4824 / v0 + 0.2 / vt), 1e-12);
}

TEST(Commensurate, CauchyLiesBetweenSeparateAndPooling) {
    const auto src = sm(0.4, 0.1), tgt = sm(0.1, 0.15);
    const auto a = analyze_commensurate(src, tgt, LogTauCauchy{0.0, 10.0}, VaguePrior{});
    const double sep = normal_of(analyze_separate(tgt, VaguePrior{})).mean;
    const double pool = normal_of(analyze_pooling(src, tgt, VaguePrior{})).mean;
    EXPECT_GT(a.posterior.mean(), sep);
    EXPECT_LT(a.posterior.mean(), pool);
}

TEST(Rmp, Limits) {
    const auto src = sm(0.3, 0.1, 200), tgt = sm(0.1, 0.15, 100);
    const auto w1 = analyze_rmp(src, tgt, 1.0);
    const Posterior cpp = analyze_cpp(src, tgt, 1.0, VaguePrior::flat());
    EXPECT_NEAR(w1.posterior.mean(), cpp.mean(), 1e-14);
    EXPECT_NEAR(w1.posterior.variance(), cpp.variance(), 1e-14);
    const auto w0 = analyze_rmp(src, tgt, 0.0);
    const double vu = unit_information_variance(tgt);
    EXPECT_NEAR(vu, 0.15 * 0.15 * 100.0, 1e-12);
    const double v = 1.0 / (1.0 / vu + 1.0 / 0.0225);
    EXPECT_NEAR(w0.posterior.mean(), v * 0.1 / 0.0225, 1e-14);
    EXPECT_THROW(analyze_rmp(src, tgt, 1.2), std::domain_error);
}

TEST(Rmp, IdenticalComponentsKeepPriorWeight) {
    auto tgt = sm(0.1, 0.2, 50);
    const double vu = unit_information_variance(tgt);
    const auto src = sm(0.7, std::sqrt(vu));
    for (double w : {0.1, 0.25, 0.5, 0.8}) EXPECT_EQ(*analyze_rmp(src, tgt, w, 0.7).diagnostics.posterior_weight, w);
}

TEST(Rmp, BruteForceBayesFactor) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> m(-1.0, 1.0), s(0.05, 0.4), w(0.05, 0.95);
    for (int f = 0; f < 200; ++f) {
        const auto src = sm(m(gen), s(gen)), tgt = sm(m(gen), s(gen), 80);
        const double ww = w(gen);
        const double vu = unit_information_variance(tgt);
        const auto marginal = [&](double mc, double vc) {
            const auto f = [&](double th) { return num::normal_pdf(tgt.estimate, th, tgt.std_err) * num::normal_pdf(th, mc, std::sqrt(vc)); };
            const double sd = std::sqrt(vc);
            return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, mc - 40 * sd, mc + 40 * sd, 15, 1e-14);
        };
        const double m1 = marginal(src.estimate, src.variance()), m0 = marginal(0.0, vu);
        const double oracle = ww * m1 / (ww * m1 + (1 - ww) * m0);
        EXPECT_NEAR(*analyze_rmp(src, tgt, ww).diagnostics.posterior_weight, oracle, 1e-10);
    }
    const auto far = analyze_rmp(sm(0.0, 0.1), sm(1.0, 0.1, 100), 0.5);
    EXPECT_LT(*far.diagnostics.posterior_weight, 0.05);
}

TEST(Adaptive, DiscardFarSource) {
    const auto src = sm(0.0, 0.1), tgt = sm(20.0, 0.1);
    const double sep = normal_of(analyze_separate(tgt, VaguePrior{})).mean;
    const std::vector<MethodSpec> adaptive{NormalizedPP{0.5, 0.1}, EmpiricalBayesPP{}, PValuePP{1.0, 0.1},
                                           TestThenPoolDiff{0.05}, TestThenPoolEquiv{0.05, 0.1},
                                           CommensuratePP{LogTauCauchy{}}, RobustMixture{0.5}};
    for (const auto& m : adaptive) EXPECT_NEAR(analyze(m, src, tgt).posterior.mean(), sep, 0.01 * std::abs(sep)) << method_name(m);
}

TEST(MethodSpec, ValidationAndLabels) {
    EXPECT_THROW(validate(ConditionalPP{1.1}), std::domain_error);
    EXPECT_THROW(validate(NormalizedPP{0.5, 0.6}), std::domain_error);
    EXPECT_THROW(validate(PValuePP{0.0, 0.1}), std::domain_error);
    EXPECT_THROW(validate(TestThenPoolEquiv{0.05, 0.0}), std::domain_error);
    EXPECT_THROW(validate(CommensuratePP{FixedTau{0.0}}), std::domain_error);
    EXPECT_NO_THROW(validate(RobustMixture{0.0}));
    EXPECT_EQ(method_name(ConditionalPP{}), "cpp");
    EXPECT_EQ(method_name(RobustMixture{}), "rmp");
    EXPECT_EQ(params_label(ConditionalPP{0.25}), "Conditional PP γ=0.25");
    EXPECT_EQ(params_label(RobustMixture{0.5}), "RMP w=0.5");
}
