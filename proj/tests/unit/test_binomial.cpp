#include "borrowsim/binomial_model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace borrowsim;

namespace {

double binom_pmf(int y, int n, double p) {
    if (p < 0.0 || p > 1.0) return 0.0;
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n - y + 1.0)) * std::pow(p, y) *
           std::pow(1.0 - p, n - y);
}

// Midpoint rule on the attainable p_c range.
double riemann_marginal(double theta, const BinomialArmData& d, int points) {
    const double lo = std::max(0.0, -theta), hi = std::min(1.0, 1.0 - theta);
    if (!(hi > lo)) return 0.0;
    const double h = (hi - lo) / points;
    double s = 0.0;
    for (int i = 0; i < points; ++i) {
        const double p = lo + (i + 0.5) * h;
        s += binom_pmf(d.y_control, d.n_control, p) * binom_pmf(d.y_treatment, d.n_treatment, p + theta);
    }
    return s * h;
}

}  // namespace

TEST(BinomialMarginal, SymbolicExample) {
    EXPECT_NEAR(binomial_marginal_likelihood(0.0, {0, 1, 1, 1}), 1.0 / 6.0, 1e-12);
    EXPECT_EQ(binomial_marginal_likelihood(1.0, {2, 5, 3, 5}), 0.0);
    EXPECT_THROW(binomial_marginal_likelihood(1.5, {0, 1, 1, 1}), std::domain_error);
    EXPECT_THROW((BinomialArmData{6, 5, 0, 5}.validate()), std::domain_error);
}

TEST(BinomialMarginal, RiemannOracleSmallArms) {
    const BinomialArmData d{2, 5, 4, 5};
    double worst = 0.0, peak = 0.0;
    for (int i = 0; i <= 2000; i += 10) {
        const double th = -1.0 + i * 0.001;
        const double o = riemann_marginal(th, d, 200000);
        worst = std::max(worst, std::abs(binomial_marginal_likelihood(th, d) - o));
        peak = std::max(peak, o);
    }
    EXPECT_LT(worst, 1e-8 * std::max(peak, 1.0));
}

TEST(BinomialPosterior, ShapeFollowsMarginalLikelihood) {
    const BinomialArmData d{2, 5, 4, 5};
    const auto a = binomial_posterior(d);
    const auto& g = std::get<GridDensity>(a.posterior.repr());
    EXPECT_EQ(g.size(), 2001u);
    EXPECT_DOUBLE_EQ(g.lo(), -1.0);
    EXPECT_DOUBLE_EQ(g.hi(), 1.0);
    const double ref_theta = g.node(1200);
    const double ref_l = riemann_marginal(ref_theta, d, 200000);
    for (std::size_t i = 100; i < 2000; i += 100) {
        const double o = riemann_marginal(g.node(i), d, 200000) / ref_l;
        EXPECT_NEAR(g.density()[i] / g.density()[1200], o, 1e-8);
    }
    EXPECT_NEAR(g.cdf(1.0), 1.0, 1e-8);
}

TEST(BinomialPosterior, AprepitantLikeTarget) {
    const BinomialArmData d{79, 143, 84, 143};
    const auto p = binomial_posterior(d).posterior;
    EXPECT_NEAR(p.mean(), 5.0 / 143.0, 0.01);
}

TEST(BinomialPosterior, SymmetricDataHasZeroMedian) {
    const auto p = binomial_posterior({30, 70, 30, 70}).posterior;
    EXPECT_NEAR(p.quantile(0.5), 0.0, 1e-3);
}

TEST(BinomialPosterior, SupportRespectsAttainability) {
    // With y_c = n_c the control rate is near 1, so theta cannot be strongly positive.
    const auto p = binomial_posterior({10, 10, 10, 10}).posterior;
    EXPECT_EQ(p.pdf(1.0), 0.0);
    EXPECT_GT(p.pdf(0.0), 0.0);
}

TEST(BinomialPosterior, CppZeroEqualsNoBorrowing) {
    const BinomialArmData target{40, 71, 47, 71}, source{154, 280, 185, 293};
    const auto sep = binomial_posterior(target);
    const auto c0 = binomial_posterior(target, RateDiffPrior{SourceInduced{ConditionalPP{0.0}, source}});
    const auto& a = std::get<GridDensity>(sep.posterior.repr());
    const auto& b = std::get<GridDensity>(c0.posterior.repr());
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.density()[i], b.density()[i], 1e-9 * (1.0 + a.density()[i]));
}

TEST(BinomialPosterior, BorrowingPullsTowardSource) {
    const BinomialArmData target{40, 71, 40, 71}, source{154, 280, 185, 293};
    const double sep = binomial_posterior(target).posterior.mean();
    for (const MethodSpec& m : std::vector<MethodSpec>{ConditionalPP{0.5}, Pooling{}, RobustMixture{0.5},
                                                        NormalizedPP{0.5, 0.1}, CommensuratePP{}}) {
        const double b = binomial_posterior(target, RateDiffPrior{SourceInduced{m, source}}).posterior.mean();
        EXPECT_GT(b, sep) << method_name(m);
    }
}

TEST(BinomialPosterior, StableUnderGridDoubling) {
    const BinomialArmData target{40, 71, 48, 71};
    BinomialOptions fine;
    fine.grid_points = 4001;
    const DecisionRule rule{};
    for (const RateDiffPrior& pr : {RateDiffPrior{}, RateDiffPrior{SourceInduced{ConditionalPP{0.5}, BinomialArmData{154, 280, 185, 293}}}}) {
        const double a = prob_effective(binomial_posterior(target, pr).posterior, rule);
        const double b = prob_effective(binomial_posterior(target, pr, fine).posterior, rule);
        EXPECT_NEAR(a, b, 1e-4);
    }
}

TEST(RateDifference, DeltaMethodSummary) {
    const auto s = rate_difference_summary({50, 100, 60, 100});
    EXPECT_NEAR(s.estimate, 0.1, 1e-15);
    EXPECT_NEAR(s.std_err, std::sqrt(0.25 / 100 + 0.24 / 100), 1e-15);
    EXPECT_GT(rate_difference_summary({0, 20, 20, 20}).std_err, 0.0);
}
