/*!
 *  Copyright (c) 2026 by Contributors
 * \file test_support.cc
 */
#include "test_support.h"

#include <cdtax/error.h>
#include <cdtax/projection.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <atomic>
#include <set>
#include <unistd.h>

#include "json.hpp"

namespace cdtax::testing {

Vocabulary MakeVocab(std::vector<std::string> tokens) {
  tokens.emplace_back();
  const auto eos = static_cast<TokenId>(tokens.size() - 1);
  return Vocabulary::FromBytes(std::move(tokens), eos);
}

Vocabulary ByteVocabulary(const std::vector<std::string>& extras) {
  std::vector<std::string> tokens;
  for (int b = 0; b < 256; ++b) tokens.emplace_back(1, static_cast<char>(b));
  tokens.insert(tokens.end(), extras.begin(), extras.end());
  return MakeVocab(std::move(tokens));
}

SchemaSpec MakeSchema(std::vector<std::pair<std::string, ValueKind>> fields, std::size_t max_string_len,
                      std::size_t max_number_len) {
  SchemaSpec schema;
  for (auto& [key, kind] : fields) schema.fields.push_back(FieldSpec{key, kind});
  schema.max_string_len = max_string_len;
  schema.max_number_len = max_number_len;
  return schema;
}

// --- Classify --------------------------------------------------------------------------------

namespace {

class Recognizer {
 public:
  Recognizer(const SchemaSpec& schema, std::string_view s) : schema_(schema), s_(s) {}

  Viability Run() {
    if (auto r = Lit("{")) return *r;
    for (std::size_t f = 0; f < schema_.fields.size(); ++f) {
      if (f > 0) {
        if (auto r = Lit(",")) return *r;
      }
      if (auto r = Lit("\"" + schema_.fields[f].key + "\":")) return *r;
      auto r = schema_.fields[f].kind == ValueKind::kString ? String() : Number(schema_.fields[f].kind == ValueKind::kInteger);
      if (r) return *r;
    }
    if (auto r = Lit("}")) return *r;
    return i_ == s_.size() ? Viability::kComplete : Viability::kDead;
  }

 private:
  bool End() const { return i_ == s_.size(); }
  unsigned char At(std::size_t k) const { return static_cast<unsigned char>(s_[k]); }

  /*! \brief nullopt means "matched, continue"; otherwise the verdict. */
  std::optional<Viability> Lit(const std::string& lit) {
    for (char c : lit) {
      if (End()) return Viability::kPrefix;
      if (s_[i_] != c) return Viability::kDead;
      ++i_;
    }
    return std::nullopt;
  }

  std::optional<Viability> String() {
    if (auto r = Lit("\"")) return r;
    const std::size_t cap = schema_.max_string_len;
    std::size_t raw = 0;
    while (true) {
      if (End()) return Viability::kPrefix;
      unsigned char c = At(i_);
      if (c == '"') {
        ++i_;
        return std::nullopt;
      }
      if (c == '\\') {
        if (raw + 2 > cap) return Viability::kDead;
        ++i_;
        if (End()) return Viability::kPrefix;
        if (s_[i_] != '"' && s_[i_] != '\\') return Viability::kDead;
        ++i_;
        raw += 2;
        continue;
      }
      if (c < 0x20) return Viability::kDead;
      if (c < 0x80) {
        if (raw + 1 > cap) return Viability::kDead;
        ++i_;
        ++raw;
        continue;
      }
      std::size_t len = 0;
      unsigned char lo = 0x80, hi = 0xBF;
      if (c >= 0xC2 && c <= 0xDF) {
        len = 2;
      } else if (c >= 0xE0 && c <= 0xEF) {
        len = 3;
        if (c == 0xE0) lo = 0xA0;
        if (c == 0xED) hi = 0x9F;
      } else if (c >= 0xF0 && c <= 0xF4) {
        len = 4;
        if (c == 0xF0) lo = 0x90;
        if (c == 0xF4) hi = 0x8F;
      } else {
        return Viability::kDead;
      }
      if (raw + len > cap) return Viability::kDead;
      for (std::size_t k = 1; k < len; ++k) {
        if (i_ + k >= s_.size()) return Viability::kPrefix;
        unsigned char b = At(i_ + k);
        unsigned char klo = k == 1 ? lo : 0x80;
        unsigned char khi = k == 1 ? hi : 0xBF;
        if (b < klo || b > khi) return Viability::kDead;
      }
      i_ += len;
      raw += len;
    }
  }

  std::optional<Viability> Number(bool integer) {
    enum St { kStart, kMinus, kZero, kInt, kDot, kFrac, kExp, kExpSign, kExpDig };
    static constexpr int kNeed[] = {1, 1, 0, 0, 1, 0, 1, 1, 0};
    static constexpr bool kFinal[] = {false, false, true, true, false, true, false, false, true};
    St st = kStart;
    std::size_t len = 0;
    auto digit = [](char c) { return c >= '0' && c <= '9'; };
    while (true) {
      if (End()) return len + kNeed[st] <= schema_.max_number_len ? Viability::kPrefix : Viability::kDead;
      char c = s_[i_];
      std::optional<St> next;
      switch (st) {
        case kStart:
          if (c == '-') next = kMinus;
          [[fallthrough]];
        case kMinus:
          if (c == '0') next = kZero;
          if (c >= '1' && c <= '9') next = kInt;
          if (!next) return Viability::kDead;
          break;
        case kInt:
          if (digit(c)) next = kInt;
          [[fallthrough]];
        case kZero:
          if (!integer && c == '.') next = kDot;
          if (!integer && (c == 'e' || c == 'E')) next = kExp;
          break;
        case kDot:
          if (!digit(c)) return Viability::kDead;
          next = kFrac;
          break;
        case kFrac:
          if (digit(c)) next = kFrac;
          if (c == 'e' || c == 'E') next = kExp;
          break;
        case kExp:
          if (c == '+' || c == '-') next = kExpSign;
          [[fallthrough]];
        case kExpSign:
          if (digit(c)) next = kExpDig;
          if (!next) return Viability::kDead;
          break;
        case kExpDig:
          if (digit(c)) next = kExpDig;
          break;
      }
      if (!next) return kFinal[st] ? std::nullopt : std::optional<Viability>(Viability::kDead);
      if (++len > schema_.max_number_len) return Viability::kDead;
      st = *next;
      ++i_;
    }
  }

  const SchemaSpec& schema_;
  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace

Viability Classify(const SchemaSpec& schema, std::string_view bytes) { return Recognizer(schema, bytes).Run(); }

std::vector<TokenId> BruteValidTokens(const SchemaSpec& schema, const Vocabulary& vocab, std::string_view bytes) {
  std::vector<TokenId> out;
  const Viability here = Classify(schema, bytes);
  for (const Token& t : vocab.tokens()) {
    if (t.id == vocab.eos_id()) {
      if (here == Viability::kComplete) out.push_back(t.id);
      continue;
    }
    if (Classify(schema, std::string(bytes) + t.bytes) != Viability::kDead) out.push_back(t.id);
  }
  return out;
}

namespace {

/*! \brief Records where a parse stopped and why; accepts everything else. */
struct ErrorLocator : nlohmann::ordered_json::json_sax_t {
  std::size_t position = 0;
  std::string token;
  int id = 0;

  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(number_integer_t) override { return true; }
  bool number_unsigned(number_unsigned_t) override { return true; }
  bool number_float(number_float_t, const string_t&) override { return true; }
  bool string(string_t&) override { return true; }
  bool binary(binary_t&) override { return true; }
  bool start_object(std::size_t) override { return true; }
  bool key(string_t&) override { return true; }
  bool end_object() override { return true; }
  bool start_array(std::size_t) override { return true; }
  bool end_array() override { return true; }
  bool parse_error(std::size_t pos, const std::string& last_token, const nlohmann::detail::exception& e) override {
    position = pos;
    token = last_token;
    id = e.id;
    return false;
  }
};

}  // namespace

bool ParsesAsSchemaObject(const SchemaSpec& schema, std::string_view bytes) {
  // The parser refuses literals beyond double range (error 406) although they are valid JSON;
  // such a literal is swapped for an in-range float and the document parsed again.
  std::string text(bytes);
  nlohmann::ordered_json doc;
  for (;;) {
    ErrorLocator locator;
    if (nlohmann::ordered_json::sax_parse(text, &locator)) break;
    if (locator.id != 406 || locator.token.size() > locator.position) return false;
    const std::size_t begin = locator.position - locator.token.size();
    if (text.compare(begin, locator.token.size(), locator.token) != 0) return false;
    text.replace(begin, locator.token.size(), "0.0");
  }
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::ordered_json::exception&) {
    return false;
  }
  if (!doc.is_object() || doc.size() != schema.fields.size()) return false;
  std::size_t f = 0;
  for (auto it = doc.begin(); it != doc.end(); ++it, ++f) {
    const FieldSpec& spec = schema.fields[f];
    if (it.key() != spec.key) return false;
    switch (spec.kind) {
      case ValueKind::kString:
        if (!it.value().is_string()) return false;
        break;
      case ValueKind::kInteger:
        if (!it.value().is_number_integer()) return false;
        break;
      case ValueKind::kNumber:
        if (!it.value().is_number()) return false;
        break;
    }
  }
  return true;
}

// --- brute-force enumeration ------------------------------------------------------------------

double BruteEnumeration::completed() const {
  double total = 0.0;
  for (const auto& [ids, leaf] : leaves) total += leaf.q;
  return total;
}

double BruteEnumeration::Normalized(const std::vector<TokenId>& ids) const {
  auto it = leaves.find(ids);
  return it == leaves.end() ? 0.0 : it->second.q / completed();
}

BruteEnumeration BruteEnumerate(const LanguageModel& model, const Vocabulary& vocab, const Prefix& prefix,
                                std::size_t max_len, const SchemaSpec* schema) {
  BruteEnumeration out;
  std::vector<TokenId> path;
  std::function<void(double, double, double)> visit = [&](double raw, double q, double tax) {
    Prefix here = prefix;
    here.generated_ids.insert(here.generated_ids.end(), path.begin(), path.end());
    NextTokenDistribution p = model.Next(here);
    std::vector<TokenId> allowed;
    if (schema != nullptr) {
      allowed = BruteValidTokens(*schema, vocab, Detokenize(vocab, here.generated_ids));
    } else {
      for (std::size_t i = 0; i < vocab.size(); ++i) allowed.push_back(static_cast<TokenId>(i));
    }
    double z = 0.0;
    for (TokenId id : allowed) z += p.prob(id);
    for (TokenId id : allowed) {
      const double pv = p.prob(id);
      if (pv == 0.0) continue;
      const double step_q = schema != nullptr ? pv / z : pv;
      const double step_tax = schema != nullptr ? -std::log(z) : 0.0;
      path.push_back(id);
      if (id == vocab.eos_id()) {
        out.leaves[path] = BruteLeaf{raw * pv, q * step_q, tax + step_tax};
      } else if (path.size() < max_len) {
        visit(raw * pv, q * step_q, tax + step_tax);
      } else {
        out.truncated += q * step_q;
      }
      path.pop_back();
    }
  };
  visit(1.0, 1.0, 0.0);
  return out;
}

double BruteKlToRaw(const BruteEnumeration& q, const BruteEnumeration& p) {
  const double cq = q.completed();
  double kl = 0.0;
  for (const auto& [ids, leaf] : q.leaves) {
    const double qn = leaf.q / cq;
    kl += qn * std::log(qn / p.leaves.at(ids).raw);
  }
  return kl;
}

double BruteKl(const BruteEnumeration& q, const BruteEnumeration& p) {
  double kl = 0.0;
  for (const auto& [ids, leaf] : q.leaves) {
    const double qn = q.Normalized(ids);
    kl += qn * std::log(qn / p.Normalized(ids));
  }
  return kl;
}

double BruteTv(const BruteEnumeration& q, const BruteEnumeration& p) {
  std::set<std::vector<TokenId>> keys;
  for (const auto& [ids, leaf] : q.leaves) keys.insert(ids);
  for (const auto& [ids, leaf] : p.leaves) keys.insert(ids);
  double l1 = 0.0;
  for (const auto& ids : keys) l1 += std::abs(q.Normalized(ids) - p.Normalized(ids));
  return l1 / 2.0;
}

double BruteExpectedTax(const BruteEnumeration& q) {
  const double cq = q.completed();
  double total = 0.0;
  for (const auto& [ids, leaf] : q.leaves) total += leaf.q / cq * leaf.tax;
  return total;
}

// --- generators -------------------------------------------------------------------------------

NextTokenDistribution RandomDistribution(std::mt19937_64& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> logits(n);
  for (double& v : logits) v = normal(rng);
  return NextTokenDistribution::FromLogits(std::move(logits));
}

std::shared_ptr<TabularLM> RandomTabularLM(std::mt19937_64& rng, const Vocabulary& vocab,
                                           const std::vector<TokenId>& prompt, std::size_t max_len, double scale) {
  auto lm = std::make_shared<TabularLM>(vocab.size(), prompt.size() + max_len,
                                        NextTokenDistribution::Uniform(vocab.size()));
  std::vector<TokenId> context = prompt;
  std::function<void()> fill = [&] {
    lm->Set(context, RandomDistribution(rng, vocab.size(), scale));
    if (context.size() - prompt.size() + 1 >= max_len) return;
    for (std::size_t id = 0; id < vocab.size(); ++id) {
      if (static_cast<TokenId>(id) == vocab.eos_id()) continue;
      context.push_back(static_cast<TokenId>(id));
      fill();
      context.pop_back();
    }
  };
  fill();
  return lm;
}

namespace {

std::string RandomStringContent(std::mt19937_64& rng, std::size_t cap) {
  std::uniform_int_distribution<std::size_t> len_dist(0, std::min<std::size_t>(cap, 24));
  const std::size_t target = len_dist(rng);
  std::string out;
  std::size_t raw = 0;
  std::uniform_int_distribution<int> kind(0, 9);
  static const std::vector<std::string> kMulti = {"\xC3\xA9", "\xE2\x82\xAC", "\xF0\x9F\x98\x80", "\xED\x9F\xBF",
                                                  "\xE0\xA0\x80", "\xF4\x8F\xBF\xBF", "\xC2\x80"};
  while (raw < target) {
    int k = kind(rng);
    std::string piece;
    if (k == 0) {
      piece = std::uniform_int_distribution<int>(0, 1)(rng) ? "\\\"" : "\\\\";
    } else if (k == 1) {
      piece = kMulti[std::uniform_int_distribution<std::size_t>(0, kMulti.size() - 1)(rng)];
    } else {
      char c;
      do {
        c = static_cast<char>(std::uniform_int_distribution<int>(0x20, 0x7F)(rng));
      } while (c == '"' || c == '\\');
      piece = std::string(1, c);
    }
    if (raw + piece.size() > cap) break;
    out += piece;
    raw += piece.size();
  }
  return out;
}

std::string RandomNumber(std::mt19937_64& rng, bool integer, std::size_t cap) {
  std::uniform_int_distribution<int> digit(0, 9);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::string s;
    if (coin(rng)) s += '-';
    if (std::uniform_int_distribution<int>(0, 4)(rng) == 0) {
      s += '0';
    } else {
      s += static_cast<char>('1' + std::uniform_int_distribution<int>(0, 8)(rng));
      int extra = std::uniform_int_distribution<int>(0, 5)(rng);
      for (int i = 0; i < extra; ++i) s += static_cast<char>('0' + digit(rng));
    }
    if (!integer && coin(rng)) {
      s += '.';
      int frac = std::uniform_int_distribution<int>(1, 4)(rng);
      for (int i = 0; i < frac; ++i) s += static_cast<char>('0' + digit(rng));
    }
    if (!integer && coin(rng)) {
      s += coin(rng) ? 'e' : 'E';
      int sign = std::uniform_int_distribution<int>(0, 2)(rng);
      if (sign == 1) s += '+';
      if (sign == 2) s += '-';
      s += static_cast<char>('0' + digit(rng));
    }
    if (s.size() <= cap) return s;
  }
  return "0";
}

}  // namespace

std::string RandomSchemaObject(std::mt19937_64& rng, const SchemaSpec& schema) {
  std::string out = "{";
  for (std::size_t f = 0; f < schema.fields.size(); ++f) {
    if (f > 0) out += ',';
    out += "\"" + schema.fields[f].key + "\":";
    if (schema.fields[f].kind == ValueKind::kString) {
      out += "\"" + RandomStringContent(rng, schema.max_string_len) + "\"";
    } else {
      out += RandomNumber(rng, schema.fields[f].kind == ValueKind::kInteger, schema.max_number_len);
    }
  }
  return out + "}";
}

std::vector<EnumerableInstance> GenerateEnumerableInstances(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<EnumerableInstance> out;
  const std::vector<std::string> keys = {"a", "b", "c", "d"};
  const std::vector<ValueKind> kinds = {ValueKind::kString, ValueKind::kNumber, ValueKind::kInteger};
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 200 * count) throw std::runtime_error("instance generator stalled");
    EnumerableInstance inst;
    const std::size_t n_fields = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
    std::vector<std::string> order = keys;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::pair<std::string, ValueKind>> fields;
    for (std::size_t f = 0; f < n_fields; ++f) {
      fields.emplace_back(order[f], kinds[std::uniform_int_distribution<std::size_t>(0, 2)(rng)]);
    }
    inst.schema = MakeSchema(fields, std::uniform_int_distribution<std::size_t>(0, 2)(rng),
                             std::uniform_int_distribution<std::size_t>(1, 2)(rng));

    std::vector<std::string> tokens = {"{\"" + fields[0].first + "\":", "}"};
    if (n_fields == 2) tokens.push_back(",\"" + fields[1].first + "\":");
    bool has_string = false, has_number = false;
    for (auto& f : fields) (f.second == ValueKind::kString ? has_string : has_number) = true;
    if (has_string) {
      tokens.push_back("\"");
      tokens.push_back("x");
    }
    if (has_number) tokens.push_back("1");
    std::vector<std::string> pool = {"\"x\"", "\"\"", "1}", "\"}", "x\"", "0", "-", "2", "\"x", ".", "e", "7}"};
    std::shuffle(pool.begin(), pool.end(), rng);
    for (const std::string& extra : pool) {
      if (tokens.size() >= 7) break;
      if (std::find(tokens.begin(), tokens.end(), extra) == tokens.end() && std::uniform_int_distribution<int>(0, 2)(rng)) {
        tokens.push_back(extra);
      }
    }
    std::shuffle(tokens.begin(), tokens.end(), rng);
    inst.vocab = MakeVocab(tokens);

    std::optional<CompiledGrammar> grammar;
    try {
      grammar = CompiledGrammar::Compile(inst.schema, inst.vocab);
    } catch (const CoverageError&) {
      continue;
    }
    inst.max_len = std::uniform_int_distribution<std::size_t>(4, 6)(rng);
    const std::size_t prompt_len = std::uniform_int_distribution<std::size_t>(0, 1)(rng);
    for (std::size_t i = 0; i < prompt_len; ++i) {
      inst.prefix.prompt_ids.push_back(
          std::uniform_int_distribution<TokenId>(0, static_cast<TokenId>(inst.vocab.size()) - 2)(rng));
    }
    try {
      inst.value_prefix = ExtendThroughForcedBytes(*grammar, inst.vocab, inst.prefix);
    } catch (const CoverageError&) {
      continue;
    }
    std::vector<TokenId> base = inst.value_prefix.Context();
    const double scale = std::vector<double>{0.5, 1.5, 3.0}[std::uniform_int_distribution<int>(0, 2)(rng)];
    inst.model = RandomTabularLM(rng, inst.vocab, base, inst.max_len, scale);
    BruteEnumeration q = BruteEnumerate(*inst.model, inst.vocab, inst.value_prefix, inst.max_len, &inst.schema);
    if (q.truncated != 0.0 || q.leaves.empty()) continue;
    inst.label = "instance-" + std::to_string(out.size());
    out.push_back(std::move(inst));
  }
  return out;
}

VariantPairInstance MakeVariantPairInstance(std::mt19937_64& rng, double invalid_mass, double answer_bias_k1,
                                            double answer_bias_k0) {
  VariantPairInstance inst;
  inst.vocab = MakeVocab({"{\"s\":", "{\"r\":", "\"x\"", "\"\"", ",\"a\":1}", ",\"a\":2}", "x"});
  inst.schema = MakeSchema({{"r", ValueKind::kString}, {"a", ValueKind::kInteger}}, 1, 1);
  inst.k1 = KeyVariant{0, "r", "s"};
  inst.k0 = IdentityVariant(inst.schema, 0);
  const CompiledGrammar g1 = CompiledGrammar::Compile(ApplyVariant(inst.schema, inst.k1), inst.vocab);
  const CompiledGrammar g0 = CompiledGrammar::Compile(ApplyVariant(inst.schema, inst.k0), inst.vocab);
  const std::size_t v = inst.vocab.size();
  const TokenId kGold = 4;
  const TokenId kWrong = 5;

  auto lm = std::make_shared<TabularLM>(v, inst.max_len, NextTokenDistribution::Uniform(v));
  std::uniform_real_distribution<double> weight(0.2, 1.0);
  std::vector<TokenId> context;
  std::function<void()> fill = [&] {
    std::vector<double> w(v);
    for (double& x : w) x = weight(rng);
    if (!context.empty() && (context[0] == 0 || context[0] == 1)) {
      const CompiledGrammar& g = context[0] == 0 ? g1 : g0;
      const double bias = context[0] == 0 ? answer_bias_k1 : answer_bias_k0;
      std::optional<DecoderState> state;
      try {
        state = g.Replay(context, inst.vocab);
      } catch (const ContractError&) {
      }
      if (state && !state->terminal) {
        ValidTokenSet valid = g.ValidTokens(*state, inst.vocab);
        if (valid.Contains(kGold) && valid.Contains(kWrong)) {
          w[kGold] = bias;
          w[kWrong] = 1.0 - bias;
        }
        double valid_sum = 0.0, invalid_sum = 0.0;
        for (std::size_t id = 0; id < v; ++id) (valid.Contains(static_cast<TokenId>(id)) ? valid_sum : invalid_sum) += w[id];
        const double target_invalid = invalid_sum > 0.0 ? invalid_mass : 0.0;
        for (std::size_t id = 0; id < v; ++id) {
          w[id] = valid.Contains(static_cast<TokenId>(id)) ? w[id] / valid_sum * (1.0 - target_invalid)
                                                           : w[id] / invalid_sum * target_invalid;
        }
      }
    }
    std::vector<double> logs(v);
    double total = 0.0;
    for (double x : w) total += x;
    for (std::size_t id = 0; id < v; ++id) logs[id] = w[id] > 0.0 ? std::log(w[id] / total) : -INFINITY;
    lm->Set(context, NextTokenDistribution::FromLogits(logs));
    if (context.size() + 1 >= inst.max_len) return;
    for (std::size_t id = 0; id + 1 < v; ++id) {
      context.push_back(static_cast<TokenId>(id));
      fill();
      context.pop_back();
    }
  };
  fill();
  inst.model = lm;
  inst.label = "pair";
  return inst;
}

Vocabulary ExperimentVocab(std::size_t n_items) {
  std::vector<std::string> tokens = {"{\"steps\":\"", "{\"think_step_by_step\":\"", "ok", "\",\"answer\":",
                                     "1}", "2}", "P", "N", "I"};
  for (std::size_t k = 0; k < n_items; ++k) tokens.push_back("q" + std::to_string(k));
  return MakeVocab(tokens);
}

PlacementLM::PlacementLM(std::size_t n_items, std::array<std::size_t, 4> correct_per_cell, double preferred_logit)
    : n_items_(n_items), vocab_size_(9 + n_items + 1), correct_(correct_per_cell), preferred_logit_(preferred_logit) {}

NextTokenDistribution PlacementLM::Next(const Prefix& prefix) const {
  const TokenId eos = static_cast<TokenId>(vocab_size_ - 1);
  std::size_t item = n_items_;
  bool instructional_prompt = false;
  for (TokenId id : prefix.prompt_ids) {
    if (id == 8) instructional_prompt = true;
    if (id >= 9 && id < eos) item = static_cast<std::size_t>(id - 9);
  }
  const auto& gen = prefix.generated_ids;
  TokenId preferred = eos;
  if (gen.empty()) {
    preferred = 0;
  } else if (gen.back() == 0 || gen.back() == 1) {
    preferred = 2;
  } else if (gen.back() == 2) {
    preferred = 3;
  } else if (gen.back() == 3) {
    const std::size_t cell = (instructional_prompt ? 2 : 0) + (gen.front() == 1 ? 1 : 0);
    preferred = item < correct_[cell] ? 4 : 5;
  }
  std::vector<double> logits(vocab_size_, 0.0);
  logits[static_cast<std::size_t>(preferred)] = preferred_logit_;
  return NextTokenDistribution::FromLogits(logits);
}

NextTokenDistribution FailingLM::Next(const Prefix& prefix) const {
  if (calls_.fetch_add(1) >= fail_at_) throw BackendError("injected backend failure");
  return inner_.Next(prefix);
}

std::filesystem::path WriteExperiment(const std::filesystem::path& dir, std::size_t n_items,
                                      const std::string& backend_json, const std::string& policy,
                                      bool with_instructional_description) {
  using nlohmann::json;
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "vocab.txt", std::ios::binary);
    out << ExperimentVocab(n_items).Serialize();
  }
  json items = json::array();
  for (std::size_t k = 0; k < n_items; ++k) {
    items.push_back({{"id", "item-" + std::to_string(k)}, {"prompt_ids", {9 + k}}, {"gold", 1}});
  }
  json prompt = {{"template", {6, -1, 6}}, {"neutral_description", {7}}};
  if (with_instructional_description) prompt["instructional_description"] = {8, 8};
  json doc = {{"vocab", "vocab.txt"},
              {"schema", {{"fields", {{{"key", "steps"}, {"kind", "string"}}, {{"key", "answer"}, {"kind", "integer"}}}},
                          {"max_string_len", 16}}},
              {"neutral_variant", {{"field", "steps"}, {"wording", "steps"}}},
              {"instructional_variant", {{"field", "steps"}, {"wording", "think_step_by_step"}}},
              {"prompt", prompt},
              {"backend", json::parse(backend_json)},
              {"items", items},
              {"policy", policy},
              {"seed", 7},
              {"max_steps", 32},
              {"metric", "exact_answer"},
              {"model", "placement-lm"},
              {"benchmark", "synthetic"}};
  std::ofstream(dir / "experiment.json") << doc.dump(2);
  return dir / "experiment.json";
}

std::filesystem::path TempDir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("cdtax-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cdtax::testing
