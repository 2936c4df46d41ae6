#include "borrowsim/numerics.hpp"
#include "borrowsim/posterior.hpp"
#include "borrowsim/types.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace borrowsim;

namespace {

GridDensity normal_grid(double m, double s, double lo, double hi, std::size_t n = 4001) {
    std::vector<double> d(n);
    const double h = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) d[i] = num::normal_pdf(lo + h * static_cast<double>(i), m, s);
    return GridDensity(lo, hi, d);
}

}  // namespace

TEST(SummaryMeasure, Invariants) {
    SummaryMeasure s{0.1, 0.2};
    EXPECT_NO_THROW(s.validate());
    s.std_err = 0.0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = {1.5, 0.1, EffectScale::RateDiff};
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = {0.1, 0.1};
    s.n_control = 0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(DecisionRule, RhoRange) {
    EXPECT_NO_THROW((DecisionRule{0.0, Direction::GreaterIsEffective, 0.975}.validate()));
    EXPECT_THROW((DecisionRule{0.0, Direction::GreaterIsEffective, 0.5}.validate()), std::invalid_argument);
    EXPECT_THROW((DecisionRule{0.0, Direction::GreaterIsEffective, 1.0}.validate()), std::invalid_argument);
}

TEST(VaguePrior, Defaults) {
    VaguePrior p;
    EXPECT_DOUBLE_EQ(p.sd * p.sd, 1000.0);
    EXPECT_TRUE(VaguePrior::flat().is_flat());
}

TEST(PosteriorMean, Examples) {
    EXPECT_DOUBLE_EQ(posterior_mean(Posterior(NormalDist{0.3, 0.1})), 0.3);
    EXPECT_DOUBLE_EQ(posterior_mean(Posterior(NormalMixture({{0.5, 0.0, 1.0}, {0.5, 2.0, 1.0}}))), 1.0);
    EXPECT_NEAR(posterior_mean(Posterior(normal_grid(0.0, 1.0, -8.0, 8.0))), 0.0, 1e-8);
}

TEST(GridDensity, IntegratesToOne) {
    const auto g = normal_grid(0.3, 0.7, -5.0, 6.0);
    double mass = 0.0;
    const auto d = g.density();
    for (std::size_t i = 0; i + 1 < d.size(); ++i) mass += 0.5 * g.step() * (d[i] + d[i + 1]);
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_NEAR(g.variance(), 0.49, 1e-5);
}

TEST(PosteriorQuantile, Examples) {
    EXPECT_NEAR(posterior_quantile(Posterior(NormalDist{0.0, 1.0}), 0.975), 1.959963984540054, 1e-12);
    EXPECT_DOUBLE_EQ(posterior_quantile(Posterior(NormalDist{0.7, 2.0}), 0.5), 0.7);
    EXPECT_NEAR(posterior_quantile(Posterior(NormalMixture({{1.0, 0.2, 0.3}})), 0.025), 0.2 - 1.959963984540054 * 0.3, 1e-12);
    EXPECT_THROW(posterior_quantile(Posterior(NormalDist{}), 0.0), std::domain_error);
    EXPECT_THROW(posterior_quantile(Posterior(NormalDist{}), 1.0), std::domain_error);
}

TEST(PosteriorQuantile, MixtureAndGridInvertCdf) {
    const Posterior mix(NormalMixture({{0.3, -1.0, 0.5}, {0.7, 1.0, 0.8}}));
    const Posterior grid(normal_grid(0.0, 1.0, -9.0, 9.0, 8001));
    double prev = -1e300;
    for (double q = 0.01; q < 1.0; q += 0.01) {
        const double x = mix.quantile(q);
        EXPECT_NEAR(mix.cdf(x), q, 1e-9);
        EXPECT_GT(x, prev);
        prev = x;
        EXPECT_NEAR(grid.quantile(q), num::std_normal_quantile(q), 2e-5);
    }
}

TEST(ProbEffective, Examples) {
    const DecisionRule greater{0.0, Direction::GreaterIsEffective, 0.975};
    const DecisionRule less{0.0, Direction::LessIsEffective, 0.975};
    EXPECT_DOUBLE_EQ(prob_effective(Posterior(NormalDist{0.0, 1.0}), greater), 0.5);
    EXPECT_NEAR(prob_effective(Posterior(NormalDist{1.959963984540054, 1.0}), greater), 0.975, 1e-6);
    EXPECT_NEAR(prob_effective(Posterior(normal_grid(-0.4, 0.2, -2.0, 1.2, 8001)), less), 0.9772498680518208, 1e-6);
}

TEST(ProbEffective, DirectionsSumToOne) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0), s(0.05, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double th0 = u(gen);
        const DecisionRule g{th0, Direction::GreaterIsEffective}, l{th0, Direction::LessIsEffective};
        const Posterior n(NormalDist{u(gen), s(gen)});
        const Posterior m(NormalMixture({{0.4, u(gen), s(gen)}, {0.6, u(gen), s(gen)}}));
        EXPECT_NEAR(prob_effective(n, g) + prob_effective(n, l), 1.0, 1e-8);
        EXPECT_NEAR(prob_effective(m, g) + prob_effective(m, l), 1.0, 1e-8);
    }
}

TEST(DecideSuccess, StrictThreshold) {
    const DecisionRule r{0.0, Direction::GreaterIsEffective, 0.975};
    EXPECT_TRUE(decide_success(0.976, r));
    EXPECT_FALSE(decide_success(0.975, r));
    EXPECT_FALSE(decide_success(Posterior(NormalDist{0.0, 1.0}), r));
}

TEST(DecideSuccess, EquivalentToLowerCredibleLimit) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0), s(0.01, 2.0);
    const DecisionRule r{0.0, Direction::GreaterIsEffective, 0.975};
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const Posterior p(NormalDist{u(gen), s(gen)});
        const double lower = equal_tail_interval(p).lo;
        if (std::abs(lower) < 1e-9) continue;  // knife edge
        EXPECT_EQ(decide_success(p, r), lower > 0.0);
        ++checked;
    }
    EXPECT_GT(checked, 990);
}

TEST(Numerics, TanhSinhIntegratesBetaKernel) {
    // Integral of x^(a-1) (1-x)^(b-1) over (0, 1) is B(a, b).
    const auto rule = num::tanh_sinh_unit_rule(1.0 / 32.0, 6.0);
    for (auto [a, b] : {std::pair{0.5, 0.5}, {2.0, 3.0}, {0.3, 7.0}}) {
        double sum = 0.0;
        for (std::size_t i = 0; i < rule.x.size(); ++i)
            sum += std::exp(rule.log_weight[i] + (a - 1.0) * rule.log_x[i] + (b - 1.0) * rule.log_1mx[i]);
        const double exact = std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
        EXPECT_NEAR(sum / exact, 1.0, 1e-10) << a << "," << b;
    }
}
