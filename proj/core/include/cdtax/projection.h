/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/projection.h
 * \brief Masked renormalization with projection-tax bookkeeping, and exact enumeration of
 *  continuation distributions for small instances.
 *
 * Masking a next-token distribution p onto a valid set V gives q = p 1[V] / Z with
 * Z = sum_{v in V} p(v). Among distributions supported on V, q is the reverse-KL projection of p
 * and D(q || p) = -ln Z; that quantity is the per-step tax recorded during decoding.
 */
#ifndef CDTAX_PROJECTION_H_
#define CDTAX_PROJECTION_H_

#include <cdtax/grammar.h>
#include <cdtax/lm.h>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdtax {

struct ConstrainedDistribution {
  NextTokenDistribution q;
  /*! \brief ln Z; Z is the unconstrained mass on the valid set. */
  double log_z = 0.0;
  /*! \brief -ln Z, exactly 0 when the mask removed no mass. */
  double tax = 0.0;

  double z() const;
};

/*! \throws ZeroMassError when every valid token has zero probability. */
ConstrainedDistribution Constrain(const NextTokenDistribution& p, const ValidTokenSet& valid);

/*!
 * \brief D(r || p) for log-domain vectors. Terms with r = 0 contribute nothing.
 * \throws SharedSupportError when r > 0 where p = 0.
 */
double KlDivergence(std::span<const double> r_log, std::span<const double> p_log);

struct KlProjectionCheck {
  double lhs = 0.0;  ///< D(r || p)
  double rhs = 0.0;  ///< D(r || q) - ln Z
};

/*! \throws DomainError when r puts mass outside q's support. */
KlProjectionCheck KlProjectionIdentity(const NextTokenDistribution& r, const NextTokenDistribution& p,
                                       const NextTokenDistribution& q, double z);

struct StepTrace {
  std::size_t step = 0;
  double z = 1.0;
  double log_z = 0.0;
  double tax = 0.0;
  TokenId chosen_id = 0;
  std::size_t valid_count = 0;
};

struct DecodeTrace {
  std::vector<StepTrace> steps;
  /*! \brief Generated ids including the final eos (absent when truncated). */
  std::vector<TokenId> output_ids;
  double cumulative_tax = 0.0;
  /*! \brief max_steps ran out before eos. */
  bool truncated = false;

  /*! \brief One JSON object per step, then a footer with cumulative_tax. */
  std::string ToJsonLines() const;
};

struct DecodePolicy {
  enum class Kind { kGreedy, kSample };
  Kind kind = Kind::kGreedy;
  std::uint64_t seed = 0;

  static DecodePolicy Greedy() { return {}; }
  static DecodePolicy Sample(std::uint64_t seed) { return {Kind::kSample, seed}; }
};

/*!
 * \brief Autoregressive masked decoding. Greedy ties go to the lowest id; sampling draws from q
 *  with a seeded mt19937_64 and an inverse-CDF scan in id order.
 * \throws ZeroMassError carrying the step index.
 */
DecodeTrace DecodeConstrained(const LanguageModel& model, const CompiledGrammar& grammar,
                              const Vocabulary& vocab, std::span<const TokenId> prompt_ids,
                              DecodePolicy policy, std::size_t max_steps);

enum class ContinuationKind { kUnconstrained, kConstrained };

struct Continuation {
  std::vector<TokenId> ids;  ///< ends with eos
  double log_prob = 0.0;     ///< raw path log-probability (before renormalization)
};

/*!
 * \brief Exact distribution over complete continuations (ending in eos, at most max_len tokens)
 *  of a prefix. Supports are sorted lexicographically. Probability() renormalizes over the
 *  completed set; truncation_mass() is the raw mass of branches cut by the length bound.
 */
class ContinuationDistribution {
 public:
  ContinuationDistribution(ContinuationKind kind, Prefix origin, std::size_t max_len,
                           std::vector<Continuation> support, double log_truncation_mass);

  ContinuationKind kind() const { return kind_; }
  const Prefix& origin() const { return origin_; }
  std::size_t max_len() const { return max_len_; }
  const std::vector<Continuation>& support() const { return support_; }
  std::size_t size() const { return support_.size(); }

  double log_completed_mass() const { return log_completed_mass_; }
  double completed_mass() const;
  double truncation_mass() const;

  double LogProbability(std::size_t index) const { return support_[index].log_prob - log_completed_mass_; }
  double Probability(std::size_t index) const;
  std::optional<std::size_t> Find(std::span<const TokenId> ids) const;

 private:
  ContinuationKind kind_;
  Prefix origin_;
  std::size_t max_len_;
  std::vector<Continuation> support_;
  double log_completed_mass_;
  double log_truncation_mass_;
};

inline constexpr double kDefaultNodeBudget = 1e7;

struct EnumerationOptions {
  std::size_t max_len = 1;
  double node_budget = kDefaultNodeBudget;
  /*! \brief Worker threads for first-level subtrees; results are identical for any value. */
  std::size_t jobs = 1;
};

/*! \brief Worst-case model calls: sum_{d < max_len} |V|^d. */
double EstimateEnumerationNodes(std::size_t vocab_size, std::size_t max_len);

/*!
 * \brief Enumerates P-bar (no grammar) or Q-bar (grammar given; generated prefix ids are replayed
 *  through it first).
 * \throws BudgetError when the estimate exceeds the budget, ZeroMassError when nothing completes.
 */
ContinuationDistribution EnumerateContinuations(const LanguageModel& model, const Vocabulary& vocab,
                                                const Prefix& prefix, const EnumerationOptions& options,
                                                const CompiledGrammar* grammar = nullptr);

struct TaxReport {
  double t_val = 0.0;  ///< D(Q-bar || P-bar)
  double bound = 0.0;  ///< sqrt(t_val / 2)
  double tv = 0.0;     ///< total variation over the union support
};

/*!
 * \brief KL, Pinsker bound and total variation between two renormalized continuation
 *  distributions.
 * \throws SharedSupportError when q_bar has mass on a continuation p_bar lacks.
 */
TaxReport Divergences(const ContinuationDistribution& q_bar, const ContinuationDistribution& p_bar);

/*!
 * \brief D(Q-bar || P) where P is p_bar's raw path mass (no truncation renormalization). Equals
 *  ExpectedTax(...) - ln(completed mass of Q-bar).
 */
double KlToRawPathMass(const ContinuationDistribution& q_bar, const ContinuationDistribution& p_bar);

/*!
 * \brief E over Q-bar of the cumulative per-step tax, by its own enumeration of masked steps.
 */
double ExpectedTax(const LanguageModel& model, const CompiledGrammar& grammar, const Vocabulary& vocab,
                   const Prefix& prefix, const EnumerationOptions& options);

/*!
 * \brief Extends prefix.generated_ids with the forced structural bytes up to the next value region
 *  (for a key this is the key literal and `":`), tokenized greedily among valid tokens.
 * \throws CoverageError when the forced bytes cannot be tokenized that way.
 */
Prefix ExtendThroughForcedBytes(const CompiledGrammar& grammar, const Vocabulary& vocab, Prefix prefix);

}  // namespace cdtax

#endif  // CDTAX_PROJECTION_H_
