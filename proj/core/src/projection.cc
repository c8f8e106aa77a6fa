/*!
 *  Copyright (c) 2026 by Contributors
 * \file projection.cc
 * \brief Masked renormalization, KL helpers and the constrained decode loop.
 */
#include <cdtax/error.h>
#include <cdtax/log_math.h>
#include <cdtax/projection.h>

#include <cmath>
#include <random>

#include "json.hpp"

namespace cdtax {

using nlohmann::json;

namespace {
constexpr double kLogHalf = -0.6931471805599453;
}  // namespace

double ConstrainedDistribution::z() const { return std::exp(log_z); }

ConstrainedDistribution Constrain(const NextTokenDistribution& p, const ValidTokenSet& valid) {
  if (valid.empty()) throw ContractError("valid token set is empty");
  const std::size_t n = p.size();
  std::vector<char> allowed(n, 0);
  std::vector<double> kept;
  kept.reserve(valid.size());
  for (TokenId id : valid.ids()) {
    if (id < 0 || static_cast<std::size_t>(id) >= n) throw LookupError("valid token id out of range");
    allowed[static_cast<std::size_t>(id)] = 1;
    kept.push_back(p.logprob(id));
  }
  std::vector<double> removed;
  for (std::size_t i = 0; i < n; ++i) {
    if (!allowed[i]) removed.push_back(p.logprobs()[i]);
  }
  const double log_valid = LogSumExp(kept);
  if (log_valid == kNegInf) {
    throw ZeroMassError("all valid tokens have zero probability; model and grammar supports are disjoint");
  }
  const double log_removed = LogSumExp(removed);
  ConstrainedDistribution out;
  if (log_removed == kNegInf) {
    out.log_z = 0.0;
    out.tax = 0.0;
  } else {
    // Whichever side is smaller determines Z most accurately.
    out.log_z = log_removed > kLogHalf ? log_valid : Log1mExp(log_removed);
    out.tax = -out.log_z;
  }
  std::vector<double> q(n, kNegInf);
  for (TokenId id : valid.ids()) q[static_cast<std::size_t>(id)] = p.logprob(id) - log_valid;
  out.q = NextTokenDistribution(std::move(q));
  return out;
}

double KlDivergence(std::span<const double> r_log, std::span<const double> p_log) {
  if (r_log.size() != p_log.size()) throw DomainError("KL arguments have different lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < r_log.size(); ++i) {
    if (r_log[i] == kNegInf) continue;
    if (p_log[i] == kNegInf) {
      throw SharedSupportError("reference assigns zero mass where the first argument does not (index " +
                               std::to_string(i) + ")");
    }
    sum += std::exp(r_log[i]) * (r_log[i] - p_log[i]);
  }
  return sum;
}

KlProjectionCheck KlProjectionIdentity(const NextTokenDistribution& r, const NextTokenDistribution& p,
                                       const NextTokenDistribution& q, double z) {
  if (r.size() != q.size() || p.size() != q.size()) throw DomainError("distribution lengths differ");
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r.logprobs()[i] != kNegInf && q.logprobs()[i] == kNegInf) {
      throw DomainError("r is not supported inside the valid set (index " + std::to_string(i) + ")");
    }
  }
  if (!(z > 0.0 && z <= 1.0 + 1e-12)) throw DomainError("Z must lie in (0, 1]");
  return KlProjectionCheck{KlDivergence(r.logprobs(), p.logprobs()),
                           KlDivergence(r.logprobs(), q.logprobs()) - std::log(z)};
}

std::string DecodeTrace::ToJsonLines() const {
  std::string out;
  for (const StepTrace& s : steps) {
    json line = {{"t", s.step},         {"z", s.z},
                 {"log_z", s.log_z},    {"tax", s.tax},
                 {"chosen_id", s.chosen_id}, {"valid_count", s.valid_count}};
    out += line.dump() + "\n";
  }
  json footer = {{"footer", true},
                 {"cumulative_tax", cumulative_tax},
                 {"output_ids", output_ids},
                 {"steps", steps.size()},
                 {"truncated", truncated}};
  out += footer.dump() + "\n";
  return out;
}

namespace {

TokenId ChooseGreedy(const NextTokenDistribution& q, const ValidTokenSet& valid) {
  TokenId best = valid.ids().front();
  for (TokenId id : valid.ids()) {
    if (q.logprob(id) > q.logprob(best)) best = id;
  }
  return best;
}

TokenId ChooseSampled(const NextTokenDistribution& q, const ValidTokenSet& valid, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double cumulative = 0.0;
  TokenId last_positive = valid.ids().front();
  for (TokenId id : valid.ids()) {
    double prob = q.prob(id);
    if (prob <= 0.0) continue;
    last_positive = id;
    cumulative += prob;
    if (u < cumulative) return id;
  }
  return last_positive;
}

}  // namespace

DecodeTrace DecodeConstrained(const LanguageModel& model, const CompiledGrammar& grammar,
                              const Vocabulary& vocab, std::span<const TokenId> prompt_ids,
                              DecodePolicy policy, std::size_t max_steps) {
  if (max_steps == 0) throw ValidationError("max_steps must be at least 1");
  if (model.vocab_size() != vocab.size()) throw ValidationError("model and vocabulary sizes differ");
  DecodeTrace trace;
  Prefix prefix{std::vector<TokenId>(prompt_ids.begin(), prompt_ids.end()), {}};
  DecoderState state = grammar.Start();
  std::mt19937_64 rng(policy.seed);
  for (std::size_t t = 0; t < max_steps && !state.terminal; ++t) {
    ValidTokenSet valid = grammar.ValidTokens(state, vocab);
    ConstrainedDistribution c;
    try {
      c = Constrain(model.Next(prefix), valid);
    } catch (const ZeroMassError& e) {
      throw ZeroMassError("step " + std::to_string(t) + ": " + e.what(), static_cast<long>(t));
    }
    TokenId chosen = policy.kind == DecodePolicy::Kind::kGreedy ? ChooseGreedy(c.q, valid)
                                                                : ChooseSampled(c.q, valid, rng);
    trace.steps.push_back(StepTrace{t, c.z(), c.log_z, c.tax, chosen, valid.size()});
    trace.cumulative_tax += c.tax;
    trace.output_ids.push_back(chosen);
    prefix.generated_ids.push_back(chosen);
    state = grammar.Advance(state, chosen, vocab);
  }
  trace.truncated = !state.terminal;
  return trace;
}

}  // namespace cdtax
