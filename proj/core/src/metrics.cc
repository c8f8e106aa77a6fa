/*!
 *  Copyright (c) 2026 by Contributors
 * \file metrics.cc
 * \brief Strict minified-object parser, canonicalization and the score diagnostics.
 */
#include <cdtax/error.h>
#include <cdtax/metrics.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace cdtax {

namespace {

bool IsDigit(char c) { return c >= '0' && c <= '9'; }

/*! \brief Length of the number literal at the front of text under JSON syntax, or 0. */
std::size_t ScanNumber(std::string_view text, bool integer_only, bool* integral) {
  std::size_t i = 0;
  if (i < text.size() && text[i] == '-') ++i;
  if (i >= text.size()) return 0;
  if (text[i] == '0') {
    ++i;
  } else if (text[i] >= '1' && text[i] <= '9') {
    while (i < text.size() && IsDigit(text[i])) ++i;
  } else {
    return 0;
  }
  *integral = true;
  if (integer_only) return i;
  if (i < text.size() && text[i] == '.') {
    ++i;
    if (i >= text.size() || !IsDigit(text[i])) return 0;
    while (i < text.size() && IsDigit(text[i])) ++i;
    *integral = false;
  }
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
    if (i >= text.size() || !IsDigit(text[i])) return 0;
    while (i < text.size() && IsDigit(text[i])) ++i;
    *integral = false;
  }
  return i;
}

/*! \brief Length of one well-formed UTF-8 multi-byte sequence at text[0], or 0. */
std::size_t Utf8SequenceLength(std::string_view text) {
  auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  unsigned char b0 = byte(0);
  std::size_t len = 0;
  unsigned char lo = 0x80;
  unsigned char hi = 0xBF;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    len = 2;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    len = 3;
    if (b0 == 0xE0) lo = 0xA0;
    if (b0 == 0xED) hi = 0x9F;
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    len = 4;
    if (b0 == 0xF0) lo = 0x90;
    if (b0 == 0xF4) hi = 0x8F;
  } else {
    return 0;
  }
  if (text.size() < len) return 0;
  if (byte(1) < lo || byte(1) > hi) return 0;
  for (std::size_t i = 2; i < len; ++i) {
    if (byte(i) < 0x80 || byte(i) > 0xBF) return 0;
  }
  return len;
}

class StrictParser {
 public:
  StrictParser(std::string_view text, const SchemaSpec& schema) : text_(text), schema_(schema) {}

  std::optional<CanonicalObject> Parse() {
    CanonicalObject out;
    if (!Expect('{')) return std::nullopt;
    for (std::size_t i = 0; i < schema_.fields.size(); ++i) {
      const FieldSpec& f = schema_.fields[i];
      if (i > 0 && !Expect(',')) return std::nullopt;
      if (!Expect('"') || !ExpectLiteral(f.key) || !Expect('"') || !Expect(':')) return std::nullopt;
      CanonicalField field{f.key, f.kind, std::string()};
      if (f.kind == ValueKind::kString) {
        auto s = ParseString();
        if (!s) return std::nullopt;
        field.value = std::move(*s);
      } else {
        auto n = ParseNumber(f.kind == ValueKind::kInteger);
        if (!n) return std::nullopt;
        field.value = std::move(*n);
      }
      out.fields.push_back(std::move(field));
    }
    if (!Expect('}') || pos_ != text_.size()) return std::nullopt;
    return out;
  }

 private:
  bool Expect(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool ExpectLiteral(std::string_view lit) {
    if (text_.substr(pos_, lit.size()) != lit) return false;
    pos_ += lit.size();
    return true;
  }

  std::optional<std::string> ParseString() {
    if (!Expect('"')) return std::nullopt;
    std::string value;
    std::size_t raw = 0;
    while (pos_ < text_.size()) {
      auto c = static_cast<unsigned char>(text_[pos_]);
      if (c == '"') {
        ++pos_;
        return value;
      }
      std::size_t len = 1;
      if (c == '\\') {
        if (pos_ + 1 >= text_.size() || (text_[pos_ + 1] != '"' && text_[pos_ + 1] != '\\')) return std::nullopt;
        len = 2;
        value.push_back(text_[pos_ + 1]);
      } else if (c >= 0x20 && c <= 0x7F) {
        value.push_back(static_cast<char>(c));
      } else {
        len = Utf8SequenceLength(text_.substr(pos_));
        if (len == 0) return std::nullopt;
        value.append(text_.substr(pos_, len));
      }
      raw += len;
      if (raw > schema_.max_string_len) return std::nullopt;
      pos_ += len;
    }
    return std::nullopt;
  }

  std::optional<JsonNumber> ParseNumber(bool integer_only) {
    bool integral = false;
    std::size_t len = ScanNumber(text_.substr(pos_), integer_only, &integral);
    if (len == 0 || len > schema_.max_number_len) return std::nullopt;
    auto n = ParseJsonNumber(text_.substr(pos_, len));
    pos_ += len;
    return n;
  }

  std::string_view text_;
  const SchemaSpec& schema_;
  std::size_t pos_ = 0;
};

std::string NormalizeInteger(std::string_view text) {
  std::string digits(text);
  if (digits == "-0") return "0";
  return digits;
}

const FieldSpec* FindSpec(const SchemaSpec& schema, std::string_view key) {
  for (const FieldSpec& f : schema.fields) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::string DefaultAnswerField(const SchemaSpec& schema) {
  if (FindSpec(schema, "answer")) return "answer";
  return schema.fields.back().key;
}

std::string DefaultReasoningField(const SchemaSpec& schema) {
  for (const FieldSpec& f : schema.fields) {
    if (f.kind == ValueKind::kString) return f.key;
  }
  return schema.fields.front().key;
}

std::size_t ParseCount(std::string_view text, std::string_view what) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("malformed count in " + std::string(what));
  }
  return value;
}

/*! \brief Splits `body@field`; field defaults to fallback. */
std::pair<std::string_view, std::string> SplitField(std::string_view spec, const std::string& fallback) {
  auto at = spec.find('@');
  if (at == std::string_view::npos) return {spec, fallback};
  return {spec.substr(0, at), std::string(spec.substr(at + 1))};
}

void RequireField(const SchemaSpec& schema, const std::string& field, bool string_only, std::string_view spec) {
  auto index = schema.FindField(field);
  if (!index) throw ConfigError("'" + std::string(spec) + "' names unknown field '" + field + "'");
  if (string_only && schema.fields[*index].kind != ValueKind::kString) {
    throw ConfigError("'" + std::string(spec) + "' needs a string field, '" + field + "' is not");
  }
}

}  // namespace

std::optional<JsonNumber> ParseJsonNumber(std::string_view text) {
  bool integral = false;
  if (text.empty() || ScanNumber(text, false, &integral) != text.size()) return std::nullopt;
  JsonNumber n;
  n.text = std::string(text);
  n.integral_literal = integral;
  n.value = std::strtod(n.text.c_str(), nullptr);
  return n;
}

bool NumbersEqual(const JsonNumber& a, const JsonNumber& b) {
  if (a.integral_literal && b.integral_literal) return NormalizeInteger(a.text) == NormalizeInteger(b.text);
  if (a.value == b.value) return true;
  double scale = std::max(std::abs(a.value), std::abs(b.value));
  return std::abs(a.value - b.value) <= 1e-9 * scale;
}

const CanonicalField* CanonicalObject::Find(std::string_view key) const {
  for (const CanonicalField& f : fields) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

std::optional<CanonicalObject> Canonicalize(std::string_view output, const KeyVariant& variant,
                                            const SchemaSpec& schema) {
  if (variant.target_field_index >= schema.fields.size() ||
      schema.fields[variant.target_field_index].key != variant.canonical_key) {
    throw ValidationError("variant does not address the canonical schema");
  }
  SchemaSpec emitted = ApplyVariant(schema, variant);
  auto parsed = StrictParser(output, emitted).Parse();
  if (!parsed) return std::nullopt;
  parsed->fields[variant.target_field_index].key = variant.canonical_key;
  return parsed;
}

Metric Metric::Create(std::string name, Rule rule, std::span<const CanonicalObject> probes) {
  for (const CanonicalObject& probe : probes) {
    double v = rule(probe);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("metric '" + name + "' scores " + std::to_string(v) + " outside [0, 1]");
    }
  }
  return Metric(std::move(name), std::move(rule));
}

double Metric::operator()(const CanonicalObject& object) const {
  double v = rule_(object);
  if (!(v >= 0.0 && v <= 1.0)) {
    throw DomainError("metric '" + name_ + "' returned " + std::to_string(v) + " outside [0, 1]");
  }
  return v;
}

Metric ConstantMetric() {
  return Metric::Create("constant", [](const CanonicalObject&) { return 1.0; });
}

Metric ExactAnswerMetric(std::string answer_field, std::string gold) {
  auto gold_number = ParseJsonNumber(gold);
  return Metric::Create("exact_answer", [answer_field, gold, gold_number](const CanonicalObject& o) {
    const CanonicalField* f = o.Find(answer_field);
    if (f == nullptr) return 0.0;
    if (const auto* n = std::get_if<JsonNumber>(&f->value)) {
      return gold_number && NumbersEqual(*n, *gold_number) ? 1.0 : 0.0;
    }
    return std::get<std::string>(f->value) == gold ? 1.0 : 0.0;
  });
}

Metric ReasoningLengthMetric(std::string field, std::size_t target_len) {
  if (target_len == 0) throw ConfigError("reasoning_len target must be positive");
  return Metric::Create("reasoning_len", [field, target_len](const CanonicalObject& o) {
    const CanonicalField* f = o.Find(field);
    if (f == nullptr) return 0.0;
    const auto* s = std::get_if<std::string>(&f->value);
    if (s == nullptr) return 0.0;
    return std::min(1.0, static_cast<double>(s->size()) / static_cast<double>(target_len));
  });
}

Metric ParseMetric(std::string_view spec, const SchemaSpec& schema, const std::optional<std::string>& gold) {
  if (spec == "constant") return ConstantMetric();
  if (spec.substr(0, 12) == "exact_answer") {
    auto [body, field] = SplitField(spec, DefaultAnswerField(schema));
    if (body != "exact_answer") throw ConfigError("unknown metric '" + std::string(spec) + "'");
    if (!gold) throw ConfigError("exact_answer needs a gold answer");
    RequireField(schema, field, false, spec);
    return ExactAnswerMetric(field, *gold);
  }
  if (spec.substr(0, 14) == "reasoning_len:") {
    auto [body, field] = SplitField(spec.substr(14), DefaultReasoningField(schema));
    RequireField(schema, field, true, spec);
    return ReasoningLengthMetric(field, ParseCount(body, spec));
  }
  throw ConfigError("unknown metric '" + std::string(spec) + "'");
}

double BoundedMetric(std::string_view output, const KeyVariant& variant, const SchemaSpec& schema,
                     const Metric& metric) {
  auto canonical = Canonicalize(output, variant, schema);
  return canonical ? metric(*canonical) : 0.0;
}

ExpectedScore ComputeExpectedScore(const ContinuationDistribution& dist, const Vocabulary& vocab,
                                   const KeyVariant& variant, const SchemaSpec& schema, const Metric& metric) {
  ExpectedScore score{0.0, dist.kind(), variant.wording};
  std::vector<TokenId> ids = dist.origin().generated_ids;
  const std::size_t base = ids.size();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    ids.resize(base);
    ids.insert(ids.end(), dist.support()[i].ids.begin(), dist.support()[i].ids.end());
    score.value += dist.Probability(i) * BoundedMetric(Detokenize(vocab, ids), variant, schema, metric);
  }
  score.value = std::clamp(score.value, 0.0, 1.0);
  return score;
}

SufficientCondition CheckSufficientCondition(const ExpectedScore& rp_k1, const ExpectedScore& rp_k0,
                                             double bound_k1, double bound_k0) {
  double margin = (rp_k1.value - rp_k0.value) - (bound_k1 + bound_k0);
  return SufficientCondition{margin > 0.0, margin};
}

VariantDiagnostics DiagnoseVariant(const LanguageModel& model, const Vocabulary& vocab, const SchemaSpec& schema,
                                   const KeyVariant& variant, const Prefix& prefix,
                                   const EnumerationOptions& options, const Metric& metric) {
  CompiledGrammar grammar = CompiledGrammar::Compile(ApplyVariant(schema, variant), vocab);
  VariantDiagnostics d;
  d.variant = variant;
  d.value_prefix = ExtendThroughForcedBytes(grammar, vocab, prefix);
  ContinuationDistribution p_bar = EnumerateContinuations(model, vocab, d.value_prefix, options);
  ContinuationDistribution q_bar = EnumerateContinuations(model, vocab, d.value_prefix, options, &grammar);
  d.tax = Divergences(q_bar, p_bar);
  d.expected_tax = ExpectedTax(model, grammar, vocab, d.value_prefix, options);
  d.r_p = ComputeExpectedScore(p_bar, vocab, variant, schema, metric);
  d.r_q = ComputeExpectedScore(q_bar, vocab, variant, schema, metric);
  d.p_completed_mass = p_bar.completed_mass();
  d.q_completed_mass = q_bar.completed_mass();
  return d;
}

VariantPairReport CompareVariants(const LanguageModel& model, const Vocabulary& vocab, const SchemaSpec& schema,
                                  const KeyVariant& k1, const KeyVariant& k0, const Prefix& prefix,
                                  const EnumerationOptions& options, const Metric& metric) {
  VariantPairReport report;
  report.k1 = DiagnoseVariant(model, vocab, schema, k1, prefix, options, metric);
  report.k0 = DiagnoseVariant(model, vocab, schema, k0, prefix, options, metric);
  report.condition = CheckSufficientCondition(report.k1.r_p, report.k0.r_p, report.k1.tax.bound, report.k0.tax.bound);
  report.ordering_holds = report.k1.r_q.value > report.k0.r_q.value;
  return report;
}

ReasoningPredicate MinReasoningLength(std::string field, std::size_t n) {
  return [field = std::move(field), n](const CanonicalObject& o) {
    const CanonicalField* f = o.Find(field);
    if (f == nullptr) return false;
    const auto* s = std::get_if<std::string>(&f->value);
    return s != nullptr && s->size() >= n;
  };
}

ReasoningPredicate ParseReasoningPredicate(std::string_view spec, const SchemaSpec& schema) {
  constexpr std::string_view kPrefix = "min_reasoning_len:";
  if (spec.substr(0, kPrefix.size()) != kPrefix) {
    throw ConfigError("unknown reasoning predicate '" + std::string(spec) + "'");
  }
  auto [body, field] = SplitField(spec.substr(kPrefix.size()), DefaultReasoningField(schema));
  RequireField(schema, field, true, spec);
  return MinReasoningLength(field, ParseCount(body, spec));
}

ActivationDecomposition Decompose(const ContinuationDistribution& dist, const Vocabulary& vocab,
                                  const KeyVariant& variant, const SchemaSpec& schema, const Metric& metric,
                                  const ReasoningPredicate& predicate) {
  double mass_plus = 0.0;
  double mass_minus = 0.0;
  double score_plus = 0.0;
  double score_minus = 0.0;
  std::vector<TokenId> ids = dist.origin().generated_ids;
  const std::size_t base = ids.size();
  for (std::size_t i = 0; i < dist.size(); ++i) {
    ids.resize(base);
    ids.insert(ids.end(), dist.support()[i].ids.begin(), dist.support()[i].ids.end());
    auto canonical = Canonicalize(Detokenize(vocab, ids), variant, schema);
    double p = dist.Probability(i);
    double m = canonical ? metric(*canonical) : 0.0;
    if (canonical && predicate(*canonical)) {
      mass_plus += p;
      score_plus += p * m;
    } else {
      mass_minus += p;
      score_minus += p * m;
    }
  }
  ActivationDecomposition out;
  const double total = mass_plus + mass_minus;
  out.activation = mass_plus / total;
  out.plus_degenerate = mass_plus == 0.0;
  out.minus_degenerate = mass_minus == 0.0;
  out.mu_plus = out.plus_degenerate ? 0.0 : score_plus / mass_plus;
  out.mu_minus = out.minus_degenerate ? 0.0 : score_minus / mass_minus;
  out.reconstructed = out.activation * out.mu_plus + (1.0 - out.activation) * out.mu_minus;
  out.direct = ComputeExpectedScore(dist, vocab, variant, schema, metric).value;
  if (std::abs(out.reconstructed - out.direct) > 1e-9) {
    throw std::logic_error("activation decomposition does not reconstruct the expected score");
  }
  return out;
}

}  // namespace cdtax
