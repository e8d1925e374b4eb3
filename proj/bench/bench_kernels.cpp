#include <benchmark/benchmark.h>
#include <omp.h>

#include "gkr/kernels.hpp"
#include "gkr/trainer.hpp"

#include <map>

namespace {

using namespace gkr;

struct Fixture {
  SynthData data;
  KinshipModel model;
  std::vector<Sample> samples;

  explicit Fixture(std::size_t dim) : data(make_data(dim)), model(make(dim)) {
    for (const auto& p : data.pairs.all())
      samples.push_back({data.features.features(p.parent), data.features.features(p.child), p.label});
  }

  static SynthData make_data(std::size_t dim) {
    SynthSpec spec;
    spec.families = 64;
    spec.dim = dim;
    return gen_synthetic(spec);
  }
  static KinshipModel make(std::size_t dim) {
    ModelSpec spec;
    spec.gkr.layer_dims = {16, 4};
    return make_model(spec, {}, dim, 1);
  }
  std::span<const Sample> batch(std::size_t n) const { return {samples.data(), n}; }
};

const Fixture& fixture(std::size_t dim) {
  static std::map<std::size_t, Fixture> cache;
  return cache.try_emplace(dim, dim).first->second;
}

void BM_GradientReference(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  const auto batch = f.batch(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient_reference(f.model, batch));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_GradientOpenMP(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  const auto batch = f.batch(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(f.model, batch));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_LogitsReference(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(batch_logits_reference(f.model, f.samples));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.samples.size()));
}

void BM_LogitsOpenMP(benchmark::State& state) {
  const auto& f = fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(batch_logits(f.model, f.samples));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.samples.size()));
  state.counters["threads"] = omp_get_max_threads();
}

}  // namespace

BENCHMARK(BM_GradientReference)->ArgsProduct({{16, 64}, {16, 128}});
BENCHMARK(BM_GradientOpenMP)->ArgsProduct({{16, 64}, {16, 128}});
BENCHMARK(BM_LogitsReference)->Arg(16)->Arg(64);
BENCHMARK(BM_LogitsOpenMP)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
