#include <benchmark/benchmark.h>

#include "lfvg/embedding_space.hpp"
#include "lfvg/evaluation.hpp"
#include "lfvg/grounding.hpp"
#include "lfvg/proposal.hpp"
#include "lfvg/pseudo_query.hpp"
#include "lfvg/training.hpp"

using namespace lfvg;

namespace {

const Dataset& bench_videos() {
  static const Dataset d = [] {
    AlignmentConfig w;
    w.seed = 1;
    SyntheticShape s;
    s.n_videos = 16;
    s.segments_per_video = 128;
    s.events_per_video = 8;
    return generate_synthetic_dataset(w, s);
  }();
  return d;
}

FeatureMatrix segments(Index T) { return bench_videos().videos[0].segment_features.topRows(T); }

GroundingConfig model_config() {
  const TrainConfig c = desk_preset();
  return grounding_config(c, 32, 32);
}

void BM_SimilarityMatrix(benchmark::State& state) {
  const FeatureMatrix f = segments(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(similarity_matrix(f));
}
BENCHMARK(BM_SimilarityMatrix)->Arg(32)->Arg(128);

void BM_KMeans(benchmark::State& state) {
  const FeatureMatrix f = segments(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(kmeans_cluster(f, 5, 7));
}
BENCHMARK(BM_KMeans)->Arg(32)->Arg(128);

void BM_GenerateProposals(benchmark::State& state) {
  const FeatureMatrix f = segments(32);
  for (auto _ : state) benchmark::DoNotOptimize(generate_proposals(f, {}, 3));
}
BENCHMARK(BM_GenerateProposals);

void BM_SelectPseudoQuery(benchmark::State& state) {
  const auto& v = bench_videos().videos[0];
  const SelectionTransformer sel(selector_config(desk_preset(), 32), 5);
  const TemporalProposal p = make_proposal({0, 15}, v.num_segments());
  PseudoQueryConfig cfg;
  cfg.n_candidates = state.range(0);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(make_training_pair(view_of(v), p, sel, cfg, seed++));
}
BENCHMARK(BM_SelectPseudoQuery)->Arg(1)->Arg(9)->Arg(16);

void BM_GroundingForward(benchmark::State& state) {
  const GroundingModel m(model_config(), 3);
  const FeatureMatrix f = segments(state.range(0));
  const Vector q = bench_videos().queries[0].feature.normalized();
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(f, q));
}
BENCHMARK(BM_GroundingForward)->Arg(32)->Arg(128);

void BM_GroundingLossAndGradient(benchmark::State& state) {
  const GroundingModel m(model_config(), 3);
  const FeatureMatrix f = segments(state.range(0));
  const Vector q = bench_videos().queries[0].feature.normalized();
  Vector g = m.params().zero_grads();
  for (auto _ : state) {
    g.setZero();
    benchmark::DoNotOptimize(grounding_loss(m, f, q, {0.25, 0.5}, 1.0, 1.0, &g));
  }
}
BENCHMARK(BM_GroundingLossAndGradient)->Arg(32)->Arg(128);

void BM_Evaluate(benchmark::State& state) {
  const GroundingModel m(model_config(), 3);
  const Dataset& d = bench_videos();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(m, d));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.queries.size()));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
