/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/metrics.h
 * \brief Canonicalization of variant outputs, bounded metrics and the score-level diagnostics
 *  built on enumerated continuation distributions.
 */
#ifndef CDTAX_METRICS_H_
#define CDTAX_METRICS_H_

#include <cdtax/grammar.h>
#include <cdtax/projection.h>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cdtax {

struct JsonNumber {
  std::string text;  ///< literal as emitted
  double value = 0.0;
  bool integral_literal = false;  ///< no fraction and no exponent

  bool operator==(const JsonNumber&) const = default;
};

/*! \brief Integers compare exactly; anything else within 1e-9 relative. `1.0` equals `1`. */
bool NumbersEqual(const JsonNumber& a, const JsonNumber& b);
/*! \brief Strict JSON number literal parse (no leading zeros, no whitespace). */
std::optional<JsonNumber> ParseJsonNumber(std::string_view text);

struct CanonicalField {
  std::string key;  ///< canonical name, whatever the emitted wording was
  ValueKind kind = ValueKind::kString;
  std::variant<std::string, JsonNumber> value;  ///< strings are unescaped
};

struct CanonicalObject {
  std::vector<CanonicalField> fields;

  const CanonicalField* Find(std::string_view key) const;
};

/*!
 * \brief Parses output under ApplyVariant(schema, variant) and renames the variant key back to
 *  its canonical name. nullopt is the invalid-output signal.
 */
std::optional<CanonicalObject> Canonicalize(std::string_view output, const KeyVariant& variant,
                                            const SchemaSpec& schema);

/*! \brief A scoring rule over canonical objects with range [0, 1]. */
class Metric {
 public:
  using Rule = std::function<double(const CanonicalObject&)>;

  /*!
   * \brief Registers a rule after evaluating it on the probe objects.
   * \throws ValidationError if any probe scores outside [0, 1].
   */
  static Metric Create(std::string name, Rule rule, std::span<const CanonicalObject> probes = {});

  const std::string& name() const { return name_; }
  /*! \throws DomainError if the rule leaves [0, 1]. */
  double operator()(const CanonicalObject& object) const;

 private:
  Metric(std::string name, Rule rule) : name_(std::move(name)), rule_(std::move(rule)) {}
  std::string name_;
  Rule rule_;
};

Metric ConstantMetric();
/*! \brief 1 when the answer field equals gold (numeric comparison for number fields). */
Metric ExactAnswerMetric(std::string answer_field, std::string gold);
/*! \brief min(len(field) / target_len, 1) over the unescaped string field. */
Metric ReasoningLengthMetric(std::string field, std::size_t target_len);

/*!
 * \brief Metric by name: `constant`, `exact_answer[@field]` (needs gold) or
 *  `reasoning_len:N[@field]`. Default fields are "answer" (else the last field) and the first
 *  string field.
 */
Metric ParseMetric(std::string_view spec, const SchemaSpec& schema, const std::optional<std::string>& gold);

/*! \brief Total: metric(canonical) if the output is valid under the variant schema, else 0. */
double BoundedMetric(std::string_view output, const KeyVariant& variant, const SchemaSpec& schema,
                     const Metric& metric);

struct ExpectedScore {
  double value = 0.0;
  ContinuationKind under = ContinuationKind::kUnconstrained;
  std::string key_variant;
};

/*!
 * \brief Sum over the support of probability times the bounded metric of the full output
 *  (origin generated ids followed by the continuation).
 */
ExpectedScore ComputeExpectedScore(const ContinuationDistribution& dist, const Vocabulary& vocab,
                                   const KeyVariant& variant, const SchemaSpec& schema, const Metric& metric);

struct SufficientCondition {
  bool holds = false;
  double margin = 0.0;
};

/*!
 * \brief Holds iff the unconstrained score gain exceeds the sum of both Pinsker bounds. It
 *  implies the constrained ordering; failing it implies nothing.
 */
SufficientCondition CheckSufficientCondition(const ExpectedScore& rp_k1, const ExpectedScore& rp_k0,
                                             double bound_k1, double bound_k0);

/*! \brief Continuation-level diagnostics for one key wording at one prefix. */
struct VariantDiagnostics {
  KeyVariant variant;
  Prefix value_prefix;  ///< prefix extended through the key literal and `":`
  TaxReport tax;
  double expected_tax = 0.0;
  ExpectedScore r_p;
  ExpectedScore r_q;
  double p_completed_mass = 0.0;
  double q_completed_mass = 0.0;
};

/*!
 * \brief Compiles ApplyVariant(schema, variant), extends prefix through the forced key bytes and
 *  enumerates both continuation distributions. prefix.generated_ids must stop before the key.
 */
VariantDiagnostics DiagnoseVariant(const LanguageModel& model, const Vocabulary& vocab, const SchemaSpec& schema,
                                   const KeyVariant& variant, const Prefix& prefix,
                                   const EnumerationOptions& options, const Metric& metric);

struct VariantPairReport {
  VariantDiagnostics k1;
  VariantDiagnostics k0;
  SufficientCondition condition;
  bool ordering_holds = false;  ///< R_Q(k1) > R_Q(k0)
};

VariantPairReport CompareVariants(const LanguageModel& model, const Vocabulary& vocab, const SchemaSpec& schema,
                                  const KeyVariant& k1, const KeyVariant& k0, const Prefix& prefix,
                                  const EnumerationOptions& options, const Metric& metric);

using ReasoningPredicate = std::function<bool(const CanonicalObject&)>;

/*! \brief True when the (first string, unless named) field has at least n unescaped bytes. */
ReasoningPredicate MinReasoningLength(std::string field, std::size_t n);
/*! \brief `min_reasoning_len:N[@field]`. */
ReasoningPredicate ParseReasoningPredicate(std::string_view spec, const SchemaSpec& schema);

struct ActivationDecomposition {
  double activation = 0.0;  ///< A_k: mass of the reasoning set (invalid outputs are outside it)
  double mu_plus = 0.0;
  double mu_minus = 0.0;
  bool plus_degenerate = false;   ///< empty reasoning set; mu_plus reported as 0
  bool minus_degenerate = false;  ///< empty complement; mu_minus reported as 0
  double reconstructed = 0.0;     ///< A mu+ + (1 - A) mu-
  double direct = 0.0;            ///< expected score computed directly
};

/*! \throws std::logic_error if reconstruction and direct score differ by more than 1e-9. */
ActivationDecomposition Decompose(const ContinuationDistribution& dist, const Vocabulary& vocab,
                                  const KeyVariant& variant, const SchemaSpec& schema, const Metric& metric,
                                  const ReasoningPredicate& predicate);

}  // namespace cdtax

#endif  // CDTAX_METRICS_H_
