/*!
 *  Copyright (c) 2026 by Contributors
 * \file test_support.h
 * \brief Independent oracles and random instance generators shared by the unit and acceptance
 *  tests. Nothing here calls into the automaton or the enumerator.
 */
#ifndef CDTAX_TESTS_SUPPORT_H_
#define CDTAX_TESTS_SUPPORT_H_

#include <cdtax/grammar.h>
#include <cdtax/lm.h>
#include <cdtax/vocab.h>

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cdtax::testing {

/*! \brief Vocabulary from byte strings; eos is appended as the last id. */
Vocabulary MakeVocab(std::vector<std::string> tokens);
/*! \brief All 256 single bytes, then extras, then eos. */
Vocabulary ByteVocabulary(const std::vector<std::string>& extras = {});

SchemaSpec MakeSchema(std::vector<std::pair<std::string, ValueKind>> fields, std::size_t max_string_len = 512,
                      std::size_t max_number_len = 32);

// --- byte-level language oracle --------------------------------------------------------------

enum class Viability { kDead, kPrefix, kComplete };

/*! \brief Hand-written recursive-descent recognizer for the minified flat-object language. */
Viability Classify(const SchemaSpec& schema, std::string_view bytes);

/*! \brief Tokens extending bytes to a live prefix, plus eos iff bytes is complete; sorted. */
std::vector<TokenId> BruteValidTokens(const SchemaSpec& schema, const Vocabulary& vocab, std::string_view bytes);

/*! \brief Strict JSON check with an off-the-shelf parser: object, key order, value kinds. */
bool ParsesAsSchemaObject(const SchemaSpec& schema, std::string_view bytes);

// --- brute-force sequence oracle -------------------------------------------------------------

struct BruteLeaf {
  double raw = 0.0;  ///< product of unconstrained probabilities
  double q = 0.0;    ///< product of masked probabilities (equals raw when unconstrained)
  double tax = 0.0;  ///< sum of -ln Z along the path
};

struct BruteEnumeration {
  std::map<std::vector<TokenId>, BruteLeaf> leaves;
  double truncated = 0.0;  ///< q-mass cut by the length bound

  double completed() const;
  /*! \brief Leaf probability renormalized over completed leaves. */
  double Normalized(const std::vector<TokenId>& ids) const;
};

/*!
 * \brief Enumerates continuations by plain recursion in the linear domain. With a schema, valid
 *  sets come from BruteValidTokens over the detokenized generated bytes.
 */
BruteEnumeration BruteEnumerate(const LanguageModel& model, const Vocabulary& vocab, const Prefix& prefix,
                                std::size_t max_len, const SchemaSpec* schema);

/*! \brief sum_y qbar(y) ln(qbar(y) / raw_p(y)). */
double BruteKlToRaw(const BruteEnumeration& q, const BruteEnumeration& p);
/*! \brief sum_y qbar(y) ln(qbar(y) / pbar(y)) with both renormalized. */
double BruteKl(const BruteEnumeration& q, const BruteEnumeration& p);
double BruteTv(const BruteEnumeration& q, const BruteEnumeration& p);
double BruteExpectedTax(const BruteEnumeration& q);

// --- generators ------------------------------------------------------------------------------

/*! \brief Softmax of N(0, scale^2) logits. */
NextTokenDistribution RandomDistribution(std::mt19937_64& rng, std::size_t n, double scale = 1.5);

/*!
 * \brief TabularLM with an independent random distribution for every context prompt ++ s, where
 *  s ranges over non-eos sequences of length < max_len.
 */
std::shared_ptr<TabularLM> RandomTabularLM(std::mt19937_64& rng, const Vocabulary& vocab,
                                           const std::vector<TokenId>& prompt, std::size_t max_len,
                                           double scale = 1.5);

/*! \brief A random serialization accepted by the schema (escapes, UTF-8, signed numbers). */
std::string RandomSchemaObject(std::mt19937_64& rng, const SchemaSpec& schema);

struct EnumerableInstance {
  std::string label;
  Vocabulary vocab;
  SchemaSpec schema;
  std::shared_ptr<TabularLM> model;
  Prefix prefix;        ///< before the first key
  Prefix value_prefix;  ///< after the first key's `":`
  std::size_t max_len = 0;
};

/*!
 * \brief Random tiny schemas (one or two fields, short caps), at most 8 tokens, max_len <= 6,
 *  random full tables. Only instances whose constrained continuations all finish within max_len
 *  are kept.
 */
std::vector<EnumerableInstance> GenerateEnumerableInstances(std::uint64_t seed, std::size_t count);

struct VariantPairInstance {
  std::string label;
  Vocabulary vocab;
  SchemaSpec schema;  ///< canonical: r (string), a (integer)
  KeyVariant k1;
  KeyVariant k0;
  std::shared_ptr<TabularLM> model;
  Prefix prefix;
  std::size_t max_len = 4;
  std::string gold = "1";
};

/*!
 * \brief Instances where the first key's wording steers the answer. invalid_mass controls how
 *  much unconstrained mass leaves the grammar; answer_bias_k1/k0 the odds of the gold answer.
 */
VariantPairInstance MakeVariantPairInstance(std::mt19937_64& rng, double invalid_mass, double answer_bias_k1,
                                            double answer_bias_k0);

// --- placement experiments -------------------------------------------------------------------

/*!
 * \brief Experiment vocabulary: 0 `{"steps":"`, 1 `{"think_step_by_step":"`, 2 `ok`,
 *  3 `","answer":`, 4 `1}`, 5 `2}`, 6 `P`, 7 `N` (neutral description), 8 `I` (instructional
 *  description), then one token per item, then eos.
 */
Vocabulary ExperimentVocab(std::size_t n_items);

/*!
 * \brief Walks the fixed answer template and answers `1` for item k iff k is below the per-cell
 *  threshold, where the cell is read off the prompt (token 8) and the first generated token.
 */
class PlacementLM : public LanguageModel {
 public:
  PlacementLM(std::size_t n_items, std::array<std::size_t, 4> correct_per_cell, double preferred_logit = 6.0);
  std::size_t vocab_size() const override { return vocab_size_; }
  NextTokenDistribution Next(const Prefix& prefix) const override;

 private:
  std::size_t n_items_;
  std::size_t vocab_size_;
  std::array<std::size_t, 4> correct_;
  double preferred_logit_;
};

/*! \brief Forwards to another model and throws BackendError from call number fail_at on. */
class FailingLM : public LanguageModel {
 public:
  FailingLM(const LanguageModel& inner, std::size_t fail_at) : inner_(inner), fail_at_(fail_at) {}
  std::size_t vocab_size() const override { return inner_.vocab_size(); }
  NextTokenDistribution Next(const Prefix& prefix) const override;
  std::size_t calls() const { return calls_.load(); }

 private:
  const LanguageModel& inner_;
  std::size_t fail_at_;
  mutable std::atomic<std::size_t> calls_{0};
};

/*!
 * \brief Writes vocab.txt and experiment.json (gold "1", inline schema and variants) into dir
 *  and returns the config path. backend is spliced in verbatim.
 */
std::filesystem::path WriteExperiment(const std::filesystem::path& dir, std::size_t n_items,
                                      const std::string& backend_json, const std::string& policy = "greedy",
                                      bool with_instructional_description = true);

/*! \brief Fresh empty directory under the system temp dir. */
std::filesystem::path TempDir(const std::string& name);

}  // namespace cdtax::testing

#endif  // CDTAX_TESTS_SUPPORT_H_
