// Serial reference kernels against the batched OpenMP ones.

#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "mmhash/data.hpp"
#include "mmhash/loss.hpp"
#include "mmhash/retrieval.hpp"
#include "mmhash/rng.hpp"

using namespace mmhash;

namespace {

struct Problem {
  CoupledModel model;
  Matrix x, y;
  PairSets pairs;
  LossConfig cfg;
};

const Problem& problem(std::size_t layers) {
  static std::vector<std::unique_ptr<Problem>> cache(3);
  auto& slot = cache[layers];
  if (!slot) {
    SyntheticSpec spec;
    spec.samples_per_class = 50;
    const SyntheticData d = synthesize(spec);
    const PairSets pairs = build_pairsets(*d.x.labels, *d.y.labels,
                                          {1000, 3000, 1000, 3000, 1000, 3000}, 7);
    slot.reset(new Problem{
        CoupledModel(init_random(layer_dims(32, 16, layers, 64), 1.0, derive_seed(7, "init_x")),
                     init_random(layer_dims(64, 16, layers, 64), 1.0, derive_seed(7, "init_y"))),
        d.x.values, d.y.values, pairs, LossConfig{}});
  }
  return *slot;
}

void BM_GradientReference(benchmark::State& state) {
  const Problem& p = problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::total_gradient(p.model, p.x, p.y, p.pairs, p.cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.pairs.size()));
}

void BM_GradientParallel(benchmark::State& state) {
  const Problem& p = problem(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(total_gradient(p.model, p.x, p.y, p.pairs, p.cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.pairs.size()));
}

struct Database {
  HashIndex index;
  std::vector<HashCode> queries;
};

Database make_database(std::size_t n, std::size_t bits) {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.5);
  auto code = [&] {
    HashCode c(bits);
    for (std::size_t b = 0; b < bits; ++b) c.set(b, coin(rng));
    return c;
  };
  std::vector<HashCode> codes;
  for (std::size_t i = 0; i < n; ++i) codes.push_back(code());
  std::vector<HashCode> queries;
  for (int i = 0; i < 16; ++i) queries.push_back(code());
  return {HashIndex(codes), std::move(queries)};
}

void BM_QueryReference(benchmark::State& state) {
  const Database db = make_database(static_cast<std::size_t>(state.range(0)), 64);
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::query(db.index, db.queries[i++ % db.queries.size()], 10));
}

void BM_QueryScan(benchmark::State& state) {
  const Database db = make_database(static_cast<std::size_t>(state.range(0)), 64);
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(query(db.index, db.queries[i++ % db.queries.size()], 10));
}

}  // namespace

BENCHMARK(BM_GradientReference)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_QueryReference)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_QueryScan)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
