/*!
 *  Copyright (c) 2026 by Contributors
 * \file lm.cc
 */
#include <cdtax/error.h>
#include <cdtax/io_util.h>
#include <cdtax/lm.h>
#include <cdtax/log_math.h>

#include <algorithm>
#include <cmath>

#include "json_support.h"

namespace cdtax {

using nlohmann::json;

NextTokenDistribution::NextTokenDistribution(std::vector<double> logprobs)
    : logprobs_(std::move(logprobs)) {
  for (double v : logprobs_) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw DomainError("log-probability vector contains NaN or +inf");
    }
  }
  double norm = LogSumExp(logprobs_);
  if (!(std::abs(norm) <= kNormalizationTolerance)) {
    throw DomainError("log-probabilities are not normalized (logsumexp = " + std::to_string(norm) + ")");
  }
}

NextTokenDistribution NextTokenDistribution::FromLogits(std::vector<double> logits) {
  double top = kNegInf;
  for (double v : logits) top = std::max(top, v);
  if (!std::isfinite(top)) throw DomainError("logits carry no mass");
  for (double& v : logits) v -= top;
  double norm = LogSumExp(logits);
  for (double& v : logits) v -= norm;
  return NextTokenDistribution(std::move(logits));
}

NextTokenDistribution NextTokenDistribution::Uniform(std::size_t size) {
  if (size == 0) throw DomainError("uniform distribution over an empty vocabulary");
  return NextTokenDistribution(std::vector<double>(size, -std::log(static_cast<double>(size))));
}

double NextTokenDistribution::prob(TokenId id) const { return std::exp(logprob(id)); }

std::vector<TokenId> Prefix::Context() const {
  std::vector<TokenId> ctx = prompt_ids;
  ctx.insert(ctx.end(), generated_ids.begin(), generated_ids.end());
  return ctx;
}

namespace {

void CheckIds(std::span<const TokenId> ids, std::size_t vocab_size) {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw LookupError("prefix token id " + std::to_string(id) + " is outside the vocabulary");
    }
  }
}

}  // namespace

TabularLM::TabularLM(std::size_t vocab_size, std::size_t horizon, NextTokenDistribution default_distribution)
    : vocab_size_(vocab_size), horizon_(horizon), default_(std::move(default_distribution)) {
  if (default_.size() != vocab_size_) throw ValidationError("default distribution has the wrong length");
}

void TabularLM::Set(std::vector<TokenId> context, NextTokenDistribution distribution) {
  if (distribution.size() != vocab_size_) throw ValidationError("table entry has the wrong length");
  if (context.size() > horizon_) throw ValidationError("table context is longer than the horizon");
  CheckIds(context, vocab_size_);
  table_.insert_or_assign(std::move(context), std::move(distribution));
}

NextTokenDistribution TabularLM::Next(const Prefix& prefix) const {
  CheckIds(prefix.prompt_ids, vocab_size_);
  CheckIds(prefix.generated_ids, vocab_size_);
  if (prefix.prompt_ids.size() + prefix.generated_ids.size() > horizon_) return default_;
  auto it = table_.find(prefix.Context());
  return it == table_.end() ? default_ : it->second;
}

std::string TabularLM::ToJson() const {
  json entries = json::array();
  for (const auto& [ctx, dist] : table_) {
    entries.push_back({{"context", ctx}, {"logprobs", detail::LogprobsToJson(dist.logprobs())}});
  }
  json doc = {{"vocab_size", vocab_size_},
              {"horizon", horizon_},
              {"default", detail::LogprobsToJson(default_.logprobs())},
              {"entries", entries}};
  return doc.dump();
}

TabularLM TabularLM::FromJson(std::string_view json_text) {
  try {
    json doc = json::parse(json_text);
    TabularLM lm(doc.at("vocab_size").get<std::size_t>(), doc.at("horizon").get<std::size_t>(),
                 NextTokenDistribution(detail::LogprobsFromJson(doc.at("default"))));
    for (const json& e : doc.at("entries")) {
      lm.Set(e.at("context").get<std::vector<TokenId>>(),
             NextTokenDistribution(detail::LogprobsFromJson(e.at("logprobs"))));
    }
    return lm;
  } catch (const json::exception& e) {
    throw ParseError(std::string("tabular model: ") + e.what());
  }
}

TabularLM TabularLM::Load(const std::filesystem::path& path) { return FromJson(ReadFile(path)); }

NGramLM FitNGram(std::span<const std::vector<TokenId>> corpus, std::size_t order, double k,
                 std::size_t vocab_size) {
  if (corpus.empty()) throw ValidationError("n-gram corpus is empty");
  if (order == 0) throw ValidationError("n-gram order must be at least 1");
  if (!(k > 0.0)) throw ValidationError("add-k smoothing constant must be positive");
  NGramLM lm(order, k, vocab_size);
  for (const auto& seq : corpus) {
    CheckIds(seq, vocab_size);
    std::vector<TokenId> padded(order - 1, NGramLM::kBeginPad);
    padded.insert(padded.end(), seq.begin(), seq.end());
    for (std::size_t i = order - 1; i < padded.size(); ++i) {
      std::vector<TokenId> ctx(padded.begin() + static_cast<std::ptrdiff_t>(i - (order - 1)),
                               padded.begin() + static_cast<std::ptrdiff_t>(i));
      auto& cc = lm.counts_[std::move(ctx)];
      ++cc.next[padded[i]];
      ++cc.total;
    }
  }
  return lm;
}

NextTokenDistribution NGramLM::Next(const Prefix& prefix) const {
  CheckIds(prefix.prompt_ids, vocab_size_);
  CheckIds(prefix.generated_ids, vocab_size_);
  std::vector<TokenId> full = prefix.Context();
  std::vector<TokenId> ctx(order_ - 1, kBeginPad);
  std::size_t take = std::min(full.size(), order_ - 1);
  std::copy(full.end() - static_cast<std::ptrdiff_t>(take), full.end(),
            ctx.end() - static_cast<std::ptrdiff_t>(take));
  const double v = static_cast<double>(vocab_size_);
  std::vector<double> logprobs(vocab_size_);
  auto it = counts_.find(ctx);
  const double total = it == counts_.end() ? 0.0 : static_cast<double>(it->second.total);
  const double log_denominator = std::log(total + k_ * v);
  for (std::size_t id = 0; id < vocab_size_; ++id) {
    double c = 0.0;
    if (it != counts_.end()) {
      auto found = it->second.next.find(static_cast<TokenId>(id));
      if (found != it->second.next.end()) c = static_cast<double>(found->second);
    }
    logprobs[id] = std::log(c + k_) - log_denominator;
  }
  return NextTokenDistribution(std::move(logprobs));
}

std::size_t NGramLM::Count(std::span<const TokenId> context, TokenId next) const {
  auto it = counts_.find(std::vector<TokenId>(context.begin(), context.end()));
  if (it == counts_.end()) return 0;
  auto found = it->second.next.find(next);
  return found == it->second.next.end() ? 0 : found->second;
}

NGramLM LoadNGram(const std::filesystem::path& path, std::size_t vocab_size) {
  try {
    json doc = json::parse(ReadFile(path));
    auto corpus = doc.at("corpus").get<std::vector<std::vector<TokenId>>>();
    return FitNGram(corpus, doc.at("order").get<std::size_t>(), doc.at("k").get<double>(), vocab_size);
  } catch (const json::exception& e) {
    throw ParseError(std::string("n-gram spec: ") + e.what());
  }
}

std::string LogprobsToJsonArray(std::span<const double> logprobs) {
  return detail::LogprobsToJson(logprobs).dump();
}

}  // namespace cdtax
