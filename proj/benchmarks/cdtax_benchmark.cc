/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax_benchmark.cc
 */
#include <benchmark/benchmark.h>
#include <cdtax/grammar.h>
#include <cdtax/lm.h>
#include <cdtax/projection.h>

#include <random>
#include <string>
#include <vector>

namespace {

using namespace cdtax;

Vocabulary BenchVocab(std::size_t extra_words) {
  std::vector<std::string> bytes;
  for (int b = 0; b < 256; ++b) bytes.emplace_back(1, static_cast<char>(b));
  std::mt19937_64 rng(1);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789 \",:{}";
  for (std::size_t i = 0; i < extra_words; ++i) {
    std::string w;
    std::size_t len = 2 + rng() % 6;
    for (std::size_t k = 0; k < len; ++k) w.push_back(alphabet[rng() % alphabet.size()]);
    bytes.push_back(w);
  }
  bytes.emplace_back();
  return Vocabulary::FromBytes(bytes, static_cast<TokenId>(bytes.size() - 1));
}

SchemaSpec BenchSchema() {
  SchemaSpec s;
  s.fields = {{"reasoning", ValueKind::kString}, {"confidence", ValueKind::kNumber}, {"answer", ValueKind::kInteger}};
  s.max_string_len = 64;
  s.max_number_len = 16;
  return s;
}

void BM_Compile(benchmark::State& state) {
  Vocabulary vocab = BenchVocab(static_cast<std::size_t>(state.range(0)));
  SchemaSpec schema = BenchSchema();
  for (auto _ : state) benchmark::DoNotOptimize(CompiledGrammar::Compile(schema, vocab));
  state.counters["vocab"] = static_cast<double>(vocab.size());
}
BENCHMARK(BM_Compile)->Arg(0)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ValidTokens(benchmark::State& state) {
  Vocabulary vocab = BenchVocab(2000);
  CompiledGrammar g = CompiledGrammar::Compile(BenchSchema(), vocab);
  DecoderState s = g.Replay(*GreedyTokenize(vocab, "{\"reasoning\":\"abc"), vocab);
  for (auto _ : state) benchmark::DoNotOptimize(g.ValidTokens(s, vocab));
}
BENCHMARK(BM_ValidTokens);

void BM_Constrain(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<double> logits(n);
  for (double& l : logits) l = normal(rng);
  NextTokenDistribution p = NextTokenDistribution::FromLogits(logits);
  std::vector<TokenId> valid;
  for (std::size_t i = 0; i < n; i += 3) valid.push_back(static_cast<TokenId>(i));
  ValidTokenSet set(valid, false);
  for (auto _ : state) benchmark::DoNotOptimize(Constrain(p, set));
}
BENCHMARK(BM_Constrain)->Arg(1024)->Arg(32768);

void BM_Enumerate(benchmark::State& state) {
  std::vector<std::string> tokens = {"{\"a\":\"", "x", "y", "\"}", "\"", "}", "xy"};
  tokens.emplace_back();
  Vocabulary vocab = Vocabulary::FromBytes(tokens, static_cast<TokenId>(tokens.size() - 1));
  SchemaSpec schema;
  schema.fields = {{"a", ValueKind::kString}};
  schema.max_string_len = 4;
  CompiledGrammar g = CompiledGrammar::Compile(schema, vocab);
  TabularLM lm(vocab.size(), 0, NextTokenDistribution::Uniform(vocab.size()));
  EnumerationOptions options{static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(EnumerateContinuations(lm, vocab, Prefix{{}, {0}}, options, &g));
}
BENCHMARK(BM_Enumerate)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
