#include <benchmark/benchmark.h>

#include <tuple>

#include "fairbatch/bilevel.hpp"
#include "fairbatch/dataset.hpp"
#include "fairbatch/metrics.hpp"
#include "fairbatch/sampler.hpp"

using namespace fairbatch;

namespace {

const Dataset& data(std::size_t n) {
  static Dataset d = gen_synthetic(100000, 1);
  static Dataset small = d.subset([] {
    std::vector<std::size_t> rows(3000);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
  }());
  return n <= 3000 ? small : d;
}

ModelParams fitted_params() {
  ModelParams p = ModelParams::zeros(2);
  p.weights = {0.4, 0.9};
  p.bias = {0.05};
  return p;
}

}  // namespace

static void BM_GenSynthetic(benchmark::State& state) {
  for (auto _ : state) {
    Dataset d = gen_synthetic(state.range(0), 7);
    benchmark::DoNotOptimize(d.features.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenSynthetic)->Arg(3000)->Arg(30000);

static void BM_DrawEpoch(benchmark::State& state) {
  const Dataset& d = data(state.range(0));
  const GroupIndex gi = build_group_index(d);
  const SamplingDistribution sd = uniform_distribution(gi);
  Rng rng(5);
  const std::size_t batches = (d.size() + 99) / 100;
  for (auto _ : state) {
    BatchPlan plan = draw_epoch(sd, 100, batches, rng);
    benchmark::DoNotOptimize(plan.batches.data());
  }
  state.SetItemsProcessed(state.iterations() * batches * 100);
}
BENCHMARK(BM_DrawEpoch)->Arg(3000)->Arg(100000);

static void BM_BatchGradient(benchmark::State& state) {
  const Dataset& d = data(3000);
  const ModelParams p = fitted_params();
  std::vector<std::size_t> batch(state.range(0));
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i * 7 % d.size();
  for (auto _ : state) {
    Gradient g = batch_gradient(p, batch, d);
    benchmark::DoNotOptimize(g.weights.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchGradient)->Arg(100)->Arg(1000);

static void BM_GroupLosses(benchmark::State& state) {
  const Dataset& d = data(state.range(0));
  const GroupIndex gi = build_group_index(d);
  const ModelParams p = fitted_params();
  const LossSpec bce{LossKind::binary_cross_entropy};
  for (auto _ : state) {
    GroupLossTable t = group_losses(p, d, gi, bce);
    benchmark::DoNotOptimize(t.cell.data());
  }
  state.SetItemsProcessed(state.iterations() * d.size());
}
BENCHMARK(BM_GroupLosses)->Arg(3000)->Arg(100000);

static void BM_LambdaUpdate(benchmark::State& state) {
  const Dataset& d = data(3000);
  const GroupIndex gi = build_group_index(d);
  const FairnessCriterion crit{Fairness::eqodds, 0};
  const LambdaState ls = init_lambda(crit, gi, 0.005);
  const ModelParams p = fitted_params();
  const GroupLossTable t =
      group_losses(p, d, gi, {LossKind::binary_cross_entropy});
  for (auto _ : state) {
    LambdaState next = update_lambda(ls, crit, t);
    SamplingDistribution sd = sampling_distribution(next, crit, gi);
    benchmark::DoNotOptimize(sd.set_probs.data());
  }
}
BENCHMARK(BM_LambdaUpdate);

static void BM_InnerSolve(benchmark::State& state) {
  const InnerProblem1D p = counterexample_problem();
  double lambda = 0.0;
  for (auto _ : state) {
    lambda = lambda < 0.99 ? lambda + 0.01 : 0.0;
    benchmark::DoNotOptimize(inner_solve(p, lambda));
  }
}
BENCHMARK(BM_InnerSolve);

static void BM_SweepSurface(benchmark::State& state) {
  const InnerProblem1D p = counterexample_problem();
  for (auto _ : state) {
    OuterSurface s = sweep_surface(p, state.range(0));
    benchmark::DoNotOptimize(s.f_outer.data());
  }
}
BENCHMARK(BM_SweepSurface)->Arg(201)->Arg(2001);

BENCHMARK_MAIN();
