#include <benchmark/benchmark.h>

#include "cwms/checkpoint_io.hpp"
#include "cwms/encoder.hpp"
#include "cwms/index.hpp"
#include "cwms/pipeline.hpp"
#include "cwms/synthetic.hpp"

namespace {

using namespace cwms;

// Shared, lazily built benchmark corpus at the default size.
const Benchmark& bench() {
  static const Benchmark b = [] {
    BenchmarkSpec spec;
    spec.seed = 1;
    return generate_benchmark(spec);
  }();
  return b;
}

const EmbedderCheckpoint& embedder() {
  static const EmbedderCheckpoint e = EmbedderCheckpoint::initialize(1, kEmbeddingDim, kFeatureBuckets);
  return e;
}

void BM_Featurize(benchmark::State& state) {
  const std::string& text = bench().corpus[0].text;
  for (auto _ : state) benchmark::DoNotOptimize(featurize(text));
}
BENCHMARK(BM_Featurize);

void BM_EmbedDocument(benchmark::State& state) {
  const std::string& text = bench().corpus[0].text;
  benchmark::DoNotOptimize(embedder());
  for (auto _ : state) benchmark::DoNotOptimize(embed(embedder(), text));
}
BENCHMARK(BM_EmbedDocument);

void BM_Retrieve(benchmark::State& state) {
  static const Index index = build_index(embedder(), bench().corpus);
  const Embedding q = embed(embedder(), bench().test[0].text);
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(retrieve(index, q, k));
  state.SetLabel(std::to_string(index.size()) + " docs");
}
BENCHMARK(BM_Retrieve)->Arg(10)->Arg(60)->Arg(100);

void BM_PipelineQuery(benchmark::State& state) {
  static const Index index = build_index(embedder(), bench().corpus);
  static const RerankerCheckpoint reranker = RerankerCheckpoint::initialize(1, fingerprint(embedder()));
  const Pipeline p(bench().corpus, embedder(), index, reranker, embedder(), index, 60, 10);
  const Query& q = bench().test[0];
  for (auto _ : state) benchmark::DoNotOptimize(p.run(q));
}
BENCHMARK(BM_PipelineQuery)->Unit(benchmark::kMicrosecond);

void BM_TrainEpoch(benchmark::State& state) {
  const auto examples = generate_weak_pairs(bench().corpus, static_cast<std::size_t>(state.range(0)), 3);
  TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(train_epoch(embedder(), examples, bench().corpus, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainEpoch)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
