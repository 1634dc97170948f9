// Serial reference vs OpenMP kernels on a 600-node SBM.
// GCL_NUM_THREADS (or OMP_NUM_THREADS) picks the parallel width.

#include "gcl/config.hpp"
#include "gcl/encoder.hpp"
#include "gcl/graph.hpp"
#include "gcl/kernels.hpp"
#include "gcl/log.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

namespace {

using namespace gcl;

struct Fixture {
  Graph graph;
  TrainConfig cfg;
  EncoderParams params;
  std::vector<NodeSet> khops;
  EmbeddingTable table;
  std::vector<AnchorSets> sets;
  std::vector<NodeId> batch;

  Fixture()
      : graph(generate_sbm({{200, 200, 200}, 0.05, 0.005, 64, 3.0}, 1)) {
    set_log_level(LogLevel::kQuiet);
    configure_threads_from_env();
    cfg.hidden_dim = 128;
    cfg.embed_dim = 128;
    cfg.seed = 3;
    params = xavier_init({graph.feature_dim(), cfg.hidden_dim, cfg.embed_dim}, cfg.seed);
    khops = all_k_hop(graph, cfg.hops);
    table = refresh_embeddings(params, graph, cfg, 0);
    sets = rebuild_contrast_sets(graph, table, khops, cfg, 0);
    batch.resize(static_cast<std::size_t>(cfg.batch_size));
    std::iota(batch.begin(), batch.end(), NodeId{0});
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Refresh(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(refresh_embeddings(f.params, f.graph, f.cfg, 1));
}
void BM_RefreshSerial(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(serial::refresh_embeddings(f.params, f.graph, f.cfg, 1));
}

void BM_Rebuild(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(rebuild_contrast_sets(f.graph, f.table, f.khops, f.cfg, 1));
}
void BM_RebuildSerial(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(serial::rebuild_contrast_sets(f.graph, f.table, f.khops, f.cfg, 1));
}

void BM_BatchGradients(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(batch_gradients(f.params, f.graph, f.batch, f.sets, f.table, f.cfg, 1));
}
void BM_BatchGradientsSerial(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        serial::batch_gradients(f.params, f.graph, f.batch, f.sets, f.table, f.cfg, 1));
}

void BM_FinalEmbeddings(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(final_embeddings(f.params, f.graph, f.cfg));
}
void BM_FinalEmbeddingsSerial(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(serial::final_embeddings(f.params, f.graph, f.cfg));
}

}  // namespace

BENCHMARK(BM_Refresh)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RefreshSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Rebuild)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RebuildSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BatchGradients)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BatchGradientsSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FinalEmbeddings)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FinalEmbeddingsSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
