#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "revmine/corpus.hpp"
#include "revmine/hypotheses.hpp"
#include "revmine/llm.hpp"
#include "revmine/nli.hpp"

using namespace revmine;

namespace {

EntailmentMatrix random_matrix(std::size_t rows, const HypothesisSet& set) {
  EntailmentMatrix m;
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (std::size_t r = 0; r < rows; ++r) m.review_ids.push_back("r" + std::to_string(r));
  for (const auto& h : set.hypotheses) m.hypothesis_ids.push_back(h.id);
  m.backend = "bench";
  m.set_hash = set.version_hash;
  m.scores.resize(rows * m.cols());
  for (auto& s : m.scores) s = u(rng);
  return m;
}

ReviewCorpus synthetic_corpus(std::size_t n) {
  ReviewCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    Review r;
    r.id = "r" + std::to_string(i);
    r.app_name = "Calm";
    r.rating = 1;
    r.text_raw = "The app shares my data with advertisers, review #" + std::to_string(i);
    r.text_norm = normalize_text(r.text_raw);
    c.reviews.push_back(std::move(r));
  }
  return c;
}

void BM_ApplyHeuristics(benchmark::State& state) {
  const auto& set = builtin_domain_mh();
  auto m = random_matrix(static_cast<std::size_t>(state.range(0)), set);
  for (auto _ : state) benchmark::DoNotOptimize(apply_heuristics(m, set.heuristics));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ApplyHeuristics)->Arg(1000)->Arg(100000);

void BM_NormalizeText(benchmark::State& state) {
  const std::string text =
      "  I \xE2\x80\x9Cloved\xE2\x80\x9D this app\xE2\x80\xA6 until it   started   asking for my contacts!!  ";
  for (auto _ : state) benchmark::DoNotOptimize(normalize_text(text));
}
BENCHMARK(BM_NormalizeText);

void BM_MatrixRoundTrip(benchmark::State& state) {
  const auto& set = builtin_generic();
  auto m = random_matrix(static_cast<std::size_t>(state.range(0)), set);
  const auto path = std::filesystem::temp_directory_path() / "revmine_bench_matrix.bin";
  for (auto _ : state) {
    write_matrix(path, m);
    benchmark::DoNotOptimize(read_matrix(path));
  }
  std::filesystem::remove(path);
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(m.scores.size() * sizeof(float)));
}
BENCHMARK(BM_MatrixRoundTrip)->Arg(10000);

void BM_MockScoring(benchmark::State& state) {
  const auto& set = builtin_generic();
  auto corpus = synthetic_corpus(static_cast<std::size_t>(state.range(0)));
  MockNliTable table;
  table.triggers.push_back({"shares my data", {3, 14}, 0.9});
  MockNliBackend backend({"mock", "mock"}, table);
  for (auto _ : state) benchmark::DoNotOptimize(score_corpus(backend, corpus, set));
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(set.hypotheses.size()));
}
BENCHMARK(BM_MockScoring)->Arg(500)->UseRealTime();

void BM_MajorityVote(benchmark::State& state) {
  const std::vector<std::string> raw{"Yes.", "no", "YES", "maybe", "No, it does not."};
  for (auto _ : state) {
    std::vector<Vote> votes;
    for (const auto& r : raw) votes.push_back(parse_response(r));
    benchmark::DoNotOptimize(majority_vote(votes));
  }
}
BENCHMARK(BM_MajorityVote);

}  // namespace

BENCHMARK_MAIN();
