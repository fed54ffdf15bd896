// Forward and training-step costs of the four-channel model at the three
// network scales.

#include <benchmark/benchmark.h>

#include <array>

#include "odsage/model.hpp"
#include "odsage/rng.hpp"

namespace {

using namespace odsage;

struct Instance {
  std::array<Adjacency, 4> adj;
  Matrix features;
  std::vector<double> targets;
  MGraphSageModel model;

  GraphSet graphs() const { return {&adj[0], &adj[1], &adj[2], &adj[3]}; }
};

Instance make_instance(int n, int f, int hidden, double edge_prob) {
  Instance inst;
  Rng rng(7);
  for (int c = 0; c < 4; ++c) {
    OdGraph g;
    g.n = n;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < edge_prob) g.edges.push_back({i, j});
    inst.adj[c] = Adjacency::from(g);
  }
  inst.features = Matrix(n, f);
  for (double& v : inst.features.data) v = rng.uniform(-1, 1);
  inst.targets.resize(n);
  for (double& t : inst.targets) t = rng.poisson(3.0);
  TrainConfig tc;
  tc.hidden_dim = hidden;
  inst.model = init_model(f, tc);
  return inst;
}

void BM_ForwardSampled(benchmark::State& state) {
  const auto inst = make_instance(static_cast<int>(state.range(0)), 66, 64, 0.05);
  Rng rng(3);
  for (auto _ : state)
    benchmark::DoNotOptimize(mgraphsage_forward(inst.features, inst.graphs(), inst.model, rng));
}
BENCHMARK(BM_ForwardSampled)->Arg(12)->Arg(132)->Arg(1000);

void BM_ForwardFullNeighborhood(benchmark::State& state) {
  const auto inst = make_instance(static_cast<int>(state.range(0)), 66, 64, 0.05);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        mgraphsage_forward(inst.features, inst.graphs(), inst.model, nullptr));
}
BENCHMARK(BM_ForwardFullNeighborhood)->Arg(12)->Arg(132)->Arg(1000);

void BM_TrainingStep(benchmark::State& state) {
  const auto inst = make_instance(static_cast<int>(state.range(0)), 66, 64, 0.05);
  Rng rng(4);
  for (auto _ : state) {
    const ModelSamples samples = draw_samples(inst.graphs(), {10, 10}, rng);
    benchmark::DoNotOptimize(
        loss_and_gradients(inst.model, inst.features, inst.graphs(), inst.targets, &samples));
  }
}
BENCHMARK(BM_TrainingStep)->Arg(12)->Arg(132)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
