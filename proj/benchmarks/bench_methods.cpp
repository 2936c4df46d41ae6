#include "borrowsim/binomial_model.hpp"
#include "borrowsim/methods.hpp"
#include "borrowsim/oc.hpp"
#include "borrowsim/presets.hpp"

#include <benchmark/benchmark.h>

using namespace borrowsim;

namespace {

SummaryMeasure sm(double est, double se) {
    SummaryMeasure s{est, se};
    s.n_control = s.n_treatment = 58;
    return s;
}

const SummaryMeasure kSource = sm(0.20, 0.065);
const SummaryMeasure kTarget = sm(0.12, 0.13);

void analyze_method(benchmark::State& state, const MethodSpec& m) {
    for (auto _ : state) benchmark::DoNotOptimize(analyze(m, kSource, kTarget).posterior.mean());
}

void BM_BinomialPosterior(benchmark::State& state) {
    const BinomialArmData target{40, 71, 47, 71};
    for (auto _ : state) benchmark::DoNotOptimize(binomial_posterior(target).posterior.mean());
}

void BM_BinomialCpp(benchmark::State& state) {
    const BinomialArmData target{40, 71, 47, 71}, source{154, 280, 185, 293};
    const RateDiffPrior prior{SourceInduced{ConditionalPP{0.5}, source}};
    for (auto _ : state) benchmark::DoNotOptimize(binomial_posterior(target, prior).posterior.mean());
}

// Replicate loop of one OC cell: generation, analysis, ESS, reduction.
void BM_ReplicateLoop(benchmark::State& state, const MethodSpec& m) {
    Scenario s;
    s.preset = find_preset("botox");
    s.id = "bench";
    s.n_per_arm = 58;
    s.seed = 1;
    OCOptions o;
    o.bootstrap_resamples = 200;
    for (auto _ : state) benchmark::DoNotOptimize(estimate_oc(s, m, 200, o).success_prob.value);
    state.SetItemsProcessed(state.iterations() * 200);
}

}  // namespace

BENCHMARK_CAPTURE(analyze_method, separate, Separate{});
BENCHMARK_CAPTURE(analyze_method, cpp, ConditionalPP{0.5});
BENCHMARK_CAPTURE(analyze_method, npp, NormalizedPP{0.5, 0.1});
BENCHMARK_CAPTURE(analyze_method, ebpp, EmpiricalBayesPP{});
BENCHMARK_CAPTURE(analyze_method, pvalue_pp, PValuePP{2.0, 0.2});
BENCHMARK_CAPTURE(analyze_method, commensurate, CommensuratePP{LogTauCauchy{}});
BENCHMARK_CAPTURE(analyze_method, rmp, RobustMixture{0.5});
BENCHMARK(BM_BinomialPosterior)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BinomialCpp)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ReplicateLoop, separate, Separate{})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_ReplicateLoop, npp, NormalizedPP{0.5, 0.1})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
