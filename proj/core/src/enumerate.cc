/*!
 *  Copyright (c) 2026 by Contributors
 * \file enumerate.cc
 * \brief Exact depth-first enumeration of continuation distributions and the divergences
 *  between them.
 */
#include <cdtax/error.h>
#include <cdtax/log_math.h>
#include <cdtax/projection.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace cdtax {

ContinuationDistribution::ContinuationDistribution(ContinuationKind kind, Prefix origin, std::size_t max_len,
                                                   std::vector<Continuation> support,
                                                   double log_truncation_mass)
    : kind_(kind),
      origin_(std::move(origin)),
      max_len_(max_len),
      support_(std::move(support)),
      log_truncation_mass_(log_truncation_mass) {
  std::sort(support_.begin(), support_.end(),
            [](const Continuation& a, const Continuation& b) { return a.ids < b.ids; });
  std::vector<double> logs;
  logs.reserve(support_.size());
  for (const Continuation& c : support_) logs.push_back(c.log_prob);
  log_completed_mass_ = LogSumExp(logs);
  if (log_completed_mass_ == kNegInf) {
    throw ZeroMassError("no continuation completes within " + std::to_string(max_len) + " tokens");
  }
}

double ContinuationDistribution::completed_mass() const { return std::exp(log_completed_mass_); }
double ContinuationDistribution::truncation_mass() const { return std::exp(log_truncation_mass_); }
double ContinuationDistribution::Probability(std::size_t index) const { return std::exp(LogProbability(index)); }

std::optional<std::size_t> ContinuationDistribution::Find(std::span<const TokenId> ids) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), ids, [](const Continuation& c, std::span<const TokenId> key) {
    return std::lexicographical_compare(c.ids.begin(), c.ids.end(), key.begin(), key.end());
  });
  if (it == support_.end() || !std::equal(it->ids.begin(), it->ids.end(), ids.begin(), ids.end())) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(it - support_.begin());
}

double EstimateEnumerationNodes(std::size_t vocab_size, std::size_t max_len) {
  double total = 0.0;
  double level = 1.0;
  for (std::size_t d = 0; d < max_len; ++d) {
    total += level;
    level *= static_cast<double>(vocab_size);
  }
  return total;
}

namespace {

void CheckBudget(const Vocabulary& vocab, const EnumerationOptions& options) {
  if (options.max_len == 0) throw ValidationError("max_len must be at least 1");
  double estimate = EstimateEnumerationNodes(vocab.size(), options.max_len);
  if (estimate > options.node_budget) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "enumeration refused: estimated %.3g nodes exceeds the budget of %.3g",
                  estimate, options.node_budget);
    throw BudgetError(buf, estimate);
  }
}

/*! \brief Runs fn(0..n-1) on up to `jobs` threads; rethrows the first failure by index. */
void RunIndexed(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < std::min(jobs, n); ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) guarded(i);
      });
    }
    for (auto& t : workers) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Branch {
  TokenId id;
  double log_prob;  // step log-probability under p (unconstrained) or q (constrained)
  double tax;       // step tax; 0 when unconstrained
};

struct Node {
  std::vector<Branch> branches;
};

class Expander {
 public:
  Expander(const LanguageModel& model, const Vocabulary& vocab, const CompiledGrammar* grammar)
      : model_(model), vocab_(vocab), grammar_(grammar) {}

  Node Expand(const Prefix& prefix, const DecoderState& state) const {
    NextTokenDistribution p = model_.Next(prefix);
    Node node;
    if (grammar_ == nullptr) {
      for (std::size_t id = 0; id < p.size(); ++id) {
        double lp = p.logprobs()[id];
        if (lp != kNegInf) node.branches.push_back(Branch{static_cast<TokenId>(id), lp, 0.0});
      }
      return node;
    }
    ValidTokenSet valid = grammar_->ValidTokens(state, vocab_);
    ConstrainedDistribution c = Constrain(p, valid);
    for (TokenId id : valid.ids()) {
      double lq = c.q.logprob(id);
      if (lq != kNegInf) node.branches.push_back(Branch{id, lq, c.tax});
    }
    return node;
  }

  DecoderState Step(const DecoderState& state, TokenId id) const {
    return grammar_ == nullptr ? state : grammar_->Advance(state, id, vocab_);
  }

  const Vocabulary& vocab() const { return vocab_; }

 private:
  const LanguageModel& model_;
  const Vocabulary& vocab_;
  const CompiledGrammar* grammar_;
};

struct PathLeaf {
  std::vector<TokenId> ids;
  double log_prob;
  double tax_sum;
};

struct SubtreeResult {
  std::vector<PathLeaf> leaves;
  double log_truncated = kNegInf;
};

/*!
 * \brief Depth-first walk below one root branch. depth counts continuation tokens taken so far.
 */
void Walk(const Expander& expander, Prefix& prefix, std::vector<TokenId>& path, const DecoderState& state,
          double log_prob, double tax_sum, std::size_t max_len, SubtreeResult& out) {
  Node node = expander.Expand(prefix, state);
  const TokenId eos = expander.vocab().eos_id();
  for (const Branch& b : node.branches) {
    double lp = log_prob + b.log_prob;
    double tax = tax_sum + b.tax;
    path.push_back(b.id);
    if (b.id == eos) {
      out.leaves.push_back(PathLeaf{path, lp, tax});
    } else if (path.size() < max_len) {
      prefix.generated_ids.push_back(b.id);
      Walk(expander, prefix, path, expander.Step(state, b.id), lp, tax, max_len, out);
      prefix.generated_ids.pop_back();
    } else {
      out.log_truncated = LogAddExp(out.log_truncated, lp);
    }
    path.pop_back();
  }
}

/*!
 * \brief Enumerates all root subtrees (in parallel when asked) and concatenates them in branch
 *  order so the result does not depend on the worker count.
 */
SubtreeResult EnumerateAll(const Expander& expander, const Prefix& origin, const DecoderState& start,
                           std::size_t max_len, std::size_t jobs) {
  Node root = expander.Expand(origin, start);
  std::vector<SubtreeResult> parts(root.branches.size());
  const TokenId eos = expander.vocab().eos_id();
  RunIndexed(root.branches.size(), jobs, [&](std::size_t i) {
    const Branch& b = root.branches[i];
    SubtreeResult& part = parts[i];
    if (b.id == eos) {
      part.leaves.push_back(PathLeaf{{b.id}, b.log_prob, b.tax});
    } else if (max_len > 1) {
      Prefix prefix = origin;
      prefix.generated_ids.push_back(b.id);
      std::vector<TokenId> path{b.id};
      Walk(expander, prefix, path, expander.Step(start, b.id), b.log_prob, b.tax, max_len, part);
    } else {
      part.log_truncated = b.log_prob;
    }
  });
  SubtreeResult all;
  for (SubtreeResult& part : parts) {
    for (PathLeaf& leaf : part.leaves) all.leaves.push_back(std::move(leaf));
    all.log_truncated = LogAddExp(all.log_truncated, part.log_truncated);
  }
  return all;
}

DecoderState StartState(const CompiledGrammar* grammar, const Vocabulary& vocab, const Prefix& prefix) {
  if (grammar == nullptr) return DecoderState{};
  DecoderState state = grammar->Replay(prefix.generated_ids, vocab);
  if (state.terminal) throw ContractError("prefix already ends the grammar");
  return state;
}

}  // namespace

ContinuationDistribution EnumerateContinuations(const LanguageModel& model, const Vocabulary& vocab,
                                                const Prefix& prefix, const EnumerationOptions& options,
                                                const CompiledGrammar* grammar) {
  CheckBudget(vocab, options);
  Expander expander(model, vocab, grammar);
  SubtreeResult all = EnumerateAll(expander, prefix, StartState(grammar, vocab, prefix), options.max_len, options.jobs);
  std::vector<Continuation> support;
  support.reserve(all.leaves.size());
  for (PathLeaf& leaf : all.leaves) support.push_back(Continuation{std::move(leaf.ids), leaf.log_prob});
  return ContinuationDistribution(grammar ? ContinuationKind::kConstrained : ContinuationKind::kUnconstrained,
                                  prefix, options.max_len, std::move(support), all.log_truncated);
}

double ExpectedTax(const LanguageModel& model, const CompiledGrammar& grammar, const Vocabulary& vocab,
                   const Prefix& prefix, const EnumerationOptions& options) {
  CheckBudget(vocab, options);
  Expander expander(model, vocab, &grammar);
  SubtreeResult all = EnumerateAll(expander, prefix, StartState(&grammar, vocab, prefix), options.max_len, options.jobs);
  std::vector<double> logs;
  for (const PathLeaf& leaf : all.leaves) logs.push_back(leaf.log_prob);
  const double log_mass = LogSumExp(logs);
  if (log_mass == kNegInf) throw ZeroMassError("no constrained continuation completes");
  double expected = 0.0;
  for (const PathLeaf& leaf : all.leaves) expected += std::exp(leaf.log_prob - log_mass) * leaf.tax_sum;
  return expected;
}

TaxReport Divergences(const ContinuationDistribution& q_bar, const ContinuationDistribution& p_bar) {
  TaxReport report;
  double kl = 0.0;
  double l1 = 0.0;
  const auto& qs = q_bar.support();
  const auto& ps = p_bar.support();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < qs.size() || j < ps.size()) {
    bool take_q = j == ps.size() || (i < qs.size() && qs[i].ids <= ps[j].ids);
    bool take_p = i == qs.size() || (j < ps.size() && ps[j].ids <= qs[i].ids);
    double lq = take_q ? q_bar.LogProbability(i) : kNegInf;
    double lp = take_p ? p_bar.LogProbability(j) : kNegInf;
    if (lq != kNegInf) {
      if (lp == kNegInf) {
        throw SharedSupportError("constrained continuation has no unconstrained mass (shared support violated)");
      }
      kl += std::exp(lq) * (lq - lp);
    }
    l1 += std::abs(std::exp(lq) - std::exp(lp));
    if (take_q) ++i;
    if (take_p) ++j;
  }
  report.t_val = std::max(kl, 0.0);
  report.bound = std::sqrt(report.t_val / 2.0);
  report.tv = 0.5 * l1;
  if (report.tv > report.bound + 1e-9) {
    throw std::logic_error("Pinsker inequality violated: numerical failure in divergence computation");
  }
  return report;
}

double KlToRawPathMass(const ContinuationDistribution& q_bar, const ContinuationDistribution& p_bar) {
  double kl = 0.0;
  for (std::size_t i = 0; i < q_bar.size(); ++i) {
    const Continuation& c = q_bar.support()[i];
    auto j = p_bar.Find(c.ids);
    if (!j) throw SharedSupportError("constrained continuation has no unconstrained mass (shared support violated)");
    double lq = q_bar.LogProbability(i);
    kl += std::exp(lq) * (lq - p_bar.support()[*j].log_prob);
  }
  return kl;
}

Prefix ExtendThroughForcedBytes(const CompiledGrammar& grammar, const Vocabulary& vocab, Prefix prefix) {
  DecoderState state = grammar.Replay(prefix.generated_ids, vocab);
  if (state.terminal) return prefix;
  std::string forced = grammar.automaton().ForcedBytes(state.state);
  if (forced.empty()) return prefix;
  auto tokens = GreedyTokenize(vocab, forced, grammar, state);
  if (!tokens) throw CoverageError("cannot tokenize the forced bytes \"" + forced + "\" with valid tokens");
  prefix.generated_ids.insert(prefix.generated_ids.end(), tokens->begin(), tokens->end());
  return prefix;
}

}  // namespace cdtax
