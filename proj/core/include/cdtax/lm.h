/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/lm.h
 * \brief Next-token distribution interface and the in-process backends.
 */
#ifndef CDTAX_LM_H_
#define CDTAX_LM_H_

#include <cdtax/vocab.h>

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdtax {

/*! \brief Natural-log probabilities over the full vocabulary; -inf marks zero mass. */
class NextTokenDistribution {
 public:
  static constexpr double kNormalizationTolerance = 1e-9;

  NextTokenDistribution() = default;
  /*! \throws DomainError on NaN, +inf, or a log-normalizer further than 1e-9 from zero. */
  explicit NextTokenDistribution(std::vector<double> logprobs);

  /*! \brief Shifts arbitrary finite-or-(-inf) scores so they normalize. */
  static NextTokenDistribution FromLogits(std::vector<double> logits);
  static NextTokenDistribution Uniform(std::size_t size);

  std::size_t size() const { return logprobs_.size(); }
  std::span<const double> logprobs() const { return logprobs_; }
  double logprob(TokenId id) const { return logprobs_[static_cast<std::size_t>(id)]; }
  double prob(TokenId id) const;

  bool operator==(const NextTokenDistribution&) const = default;

 private:
  std::vector<double> logprobs_;
};

/*! \brief Conditioning input: prompt ids (x plus any channel text) and generated ids. */
struct Prefix {
  std::vector<TokenId> prompt_ids;
  std::vector<TokenId> generated_ids;

  std::vector<TokenId> Context() const;
};

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::size_t vocab_size() const = 0;
  /*! \brief Temperature-1 distribution; no top-k or nucleus filtering. */
  virtual NextTokenDistribution Next(const Prefix& prefix) const = 0;
};

/*!
 * \brief Exact lookup table. The key is the whole context (prompt ++ generated). Unseen contexts,
 *  and contexts longer than the horizon, get the default distribution.
 */
class TabularLM : public LanguageModel {
 public:
  TabularLM(std::size_t vocab_size, std::size_t horizon, NextTokenDistribution default_distribution);

  void Set(std::vector<TokenId> context, NextTokenDistribution distribution);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t num_entries() const { return table_.size(); }
  NextTokenDistribution Next(const Prefix& prefix) const override;

  /*!
   * \brief `{"vocab_size","horizon","default":[...],"entries":[{"context":[...],"logprobs":[...]}]}`,
   *  log-probabilities as numbers or the string "-inf".
   */
  std::string ToJson() const;
  static TabularLM FromJson(std::string_view json_text);
  static TabularLM Load(const std::filesystem::path& path);

 private:
  std::size_t vocab_size_;
  std::size_t horizon_;
  NextTokenDistribution default_;
  std::map<std::vector<TokenId>, NextTokenDistribution> table_;
};

/*! \brief Add-k smoothed n-gram model; the first order-1 positions see a begin-of-sequence pad. */
class NGramLM : public LanguageModel {
 public:
  static constexpr TokenId kBeginPad = -1;

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t order() const { return order_; }
  double smoothing() const { return k_; }
  NextTokenDistribution Next(const Prefix& prefix) const override;

  /*! \brief Count of `context` followed by `next` in the training windows. */
  std::size_t Count(std::span<const TokenId> context, TokenId next) const;

 private:
  friend NGramLM FitNGram(std::span<const std::vector<TokenId>> corpus, std::size_t order, double k,
                          std::size_t vocab_size);
  NGramLM(std::size_t order, double k, std::size_t vocab_size)
      : order_(order), k_(k), vocab_size_(vocab_size) {}

  struct ContextCounts {
    std::map<TokenId, std::size_t> next;
    std::size_t total = 0;
  };

  std::size_t order_;
  double k_;
  std::size_t vocab_size_;
  std::map<std::vector<TokenId>, ContextCounts> counts_;
};

/*! \throws ValidationError on an empty corpus, order 0, k <= 0, or out-of-range ids. */
NGramLM FitNGram(std::span<const std::vector<TokenId>> corpus, std::size_t order, double k,
                 std::size_t vocab_size);

/*! \brief `{"order":n,"k":k,"corpus":[[ids...],...]}` fitted against vocab_size. */
NGramLM LoadNGram(const std::filesystem::path& path, std::size_t vocab_size);

/*! \brief Serializes one log-probability, writing -inf as the string "-inf". */
std::string LogprobsToJsonArray(std::span<const double> logprobs);

}  // namespace cdtax

#endif  // CDTAX_LM_H_
