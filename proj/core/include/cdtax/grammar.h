/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/grammar.h
 * \brief Flat JSON-schema subset compiled into a byte-level DFA, plus token masking against a
 *  vocabulary.
 *
 * The accepted language is the set of minified serializations of a flat object whose fields
 * appear in schema order. Keys are `[A-Za-z0-9_]+`. String values admit printable ASCII,
 * well-formed multi-byte UTF-8 and the escapes `\"` and `\\`; their raw content length is
 * capped by `max_string_len`. Numbers follow JSON number syntax (integers: no fraction, no
 * exponent) and are capped by `max_number_len` bytes.
 */
#ifndef CDTAX_GRAMMAR_H_
#define CDTAX_GRAMMAR_H_

#include <cdtax/vocab.h>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdtax {

enum class ValueKind : std::uint8_t { kString, kNumber, kInteger };

const char* ValueKindName(ValueKind kind);
ValueKind ParseValueKind(std::string_view name);

struct FieldSpec {
  std::string key;
  ValueKind kind = ValueKind::kString;

  bool operator==(const FieldSpec&) const = default;
};

struct SchemaSpec {
  std::vector<FieldSpec> fields;
  std::size_t max_string_len = 512;
  std::size_t max_number_len = 32;

  /*! \throws ValidationError on an empty field list, duplicate or malformed keys. */
  void Validate() const;
  /*! \return index of the field named key, if any. */
  std::optional<std::size_t> FindField(std::string_view key) const;

  bool operator==(const SchemaSpec&) const = default;
};

bool IsValidKey(std::string_view key);

SchemaSpec ParseSchema(std::string_view json_text);
SchemaSpec LoadSchema(const std::filesystem::path& path);
std::string SchemaToJson(const SchemaSpec& schema);

/*! \brief A rewording of one field's key. Everything else about the schema stays put. */
struct KeyVariant {
  std::size_t target_field_index = 0;
  std::string canonical_key;
  std::string wording;

  bool operator==(const KeyVariant&) const = default;
};

/*! \brief Resolves `{"field": <canonical key>, "wording": <key>}` against schema. */
KeyVariant ParseVariant(std::string_view json_text, const SchemaSpec& schema);
KeyVariant LoadVariant(const std::filesystem::path& path, const SchemaSpec& schema);
std::string VariantToJson(const KeyVariant& variant);
KeyVariant IdentityVariant(const SchemaSpec& schema, std::size_t field_index);

SchemaSpec ApplyVariant(const SchemaSpec& schema, const KeyVariant& variant);

/*! \brief Same field count, order and value kinds (keys may differ). */
bool StructurallyEquivalent(const SchemaSpec& a, const SchemaSpec& b);

using StateId = std::int32_t;
inline constexpr StateId kNoState = -1;

enum class RegionKind : std::uint8_t { kStructure, kKey, kValue, kDone };

/*! \brief Which part of the serialization the next consumed byte belongs to. */
struct Region {
  RegionKind kind = RegionKind::kStructure;
  std::int32_t field = 0;

  bool operator==(const Region&) const = default;
};

const char* RegionKindName(RegionKind kind);

/*!
 * \brief State pair delimiting a field's value: `begin` is reached right after `":`, `end` right
 *  after the delimiter (`,` or `}`) that closes the value.
 */
struct ValueRegionMarks {
  StateId begin = kNoState;
  StateId end = kNoState;

  bool operator==(const ValueRegionMarks&) const = default;
};

/*! \brief Dense DFA over bytes. Every state can reach the accepting state. */
class ByteAutomaton {
 public:
  static ByteAutomaton Build(const SchemaSpec& schema);

  StateId start() const { return start_; }
  std::size_t num_states() const { return accepting_.size(); }
  std::size_t num_transitions() const;

  StateId Next(StateId state, std::uint8_t byte) const {
    return table_[static_cast<std::size_t>(state) * 256 + byte];
  }
  bool IsAccepting(StateId state) const { return accepting_[static_cast<std::size_t>(state)] != 0; }
  Region region(StateId state) const { return regions_[static_cast<std::size_t>(state)]; }
  const std::vector<ValueRegionMarks>& value_regions() const { return value_regions_; }

  /*! \return state after consuming bytes from `from`, or kNoState. */
  StateId Walk(StateId from, std::string_view bytes) const;
  bool Accepts(std::string_view bytes) const;
  /*! \brief Number of distinct bytes with a transition out of state. */
  int OutDegree(StateId state) const;
  /*! \brief Structural bytes the automaton forces from state up to the next value region. */
  std::string ForcedBytes(StateId state) const;

  /*! \brief Transitions as [from, lo, hi, to] byte ranges. */
  std::string ToJson() const;
  static ByteAutomaton FromJson(std::string_view json_text);

  bool operator==(const ByteAutomaton&) const = default;

 private:
  StateId start_ = 0;
  std::vector<StateId> table_;
  std::vector<std::uint8_t> accepting_;
  std::vector<Region> regions_;
  std::vector<ValueRegionMarks> value_regions_;
};

/*!
 * \brief True when a and b are isomorphic outside the key literal of `field`: the walk skips each
 *  side's key literal and compares everything else transition by transition.
 */
bool AutomataDifferOnlyInKeyLiteral(const ByteAutomaton& a, const ByteAutomaton& b,
                                    std::size_t field);

/*! \brief Per-sequence recognizer position. */
struct DecoderState {
  StateId state = kNoState;
  std::size_t bytes_consumed = 0;
  Region region;
  bool terminal = false;

  bool operator==(const DecoderState&) const = default;
};

/*! \brief Tokens whose whole byte string is consumable from a state, plus eos iff accepting. */
class ValidTokenSet {
 public:
  ValidTokenSet() = default;
  ValidTokenSet(std::vector<TokenId> sorted_ids, bool includes_eos)
      : ids_(std::move(sorted_ids)), includes_eos_(includes_eos) {}

  const std::vector<TokenId>& ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool includes_eos() const { return includes_eos_; }
  bool Contains(TokenId id) const;

 private:
  std::vector<TokenId> ids_;
  bool includes_eos_ = false;
};

struct GrammarStats {
  std::size_t states = 0;
  std::size_t transitions = 0;
  std::size_t token_reachable_states = 0;
};

/*!
 * \brief Automaton bound to one vocabulary, with per-state token masks precomputed.
 *
 * Compilation fails with CoverageError unless every state reachable by tokens has a non-empty
 * valid set and can still reach acceptance through tokens, so a masked step always has Z > 0
 * whenever the model gives the valid set any mass.
 */
class CompiledGrammar {
 public:
  static CompiledGrammar Compile(const SchemaSpec& schema, const Vocabulary& vocab);
  /*! \brief Loads a serialized grammar and binds it to vocab (fingerprints must agree). */
  static CompiledGrammar Load(std::string_view json_text, const Vocabulary& vocab);
  std::string Serialize() const;

  const SchemaSpec& schema() const { return impl_->schema; }
  const ByteAutomaton& automaton() const { return impl_->automaton; }
  const std::string& vocab_fingerprint() const { return impl_->vocab_fingerprint; }
  const std::vector<ValueRegionMarks>& value_region_marks() const {
    return impl_->automaton.value_regions();
  }
  GrammarStats stats() const;

  DecoderState Start() const;
  /*! \throws ContractError if the token is not valid from state or state is terminal. */
  DecoderState Advance(const DecoderState& state, TokenId token, const Vocabulary& vocab) const;
  /*! \brief Replays ids from Start(); throws ContractError on the first invalid id. */
  DecoderState Replay(std::span<const TokenId> ids, const Vocabulary& vocab) const;
  /*! \throws ContractError for a terminal state. */
  ValidTokenSet ValidTokens(const DecoderState& state, const Vocabulary& vocab) const;
  bool IsValid(const DecoderState& state, TokenId token, const Vocabulary& vocab) const;

 private:
  struct Impl {
    SchemaSpec schema;
    ByteAutomaton automaton;
    std::string vocab_fingerprint;
    std::size_t vocab_size = 0;
    TokenId eos_id = 0;
    std::size_t words_per_state = 0;
    std::vector<std::uint64_t> masks;
    std::size_t token_reachable_states = 0;
  };

  static CompiledGrammar Bind(SchemaSpec schema, ByteAutomaton automaton, const Vocabulary& vocab);
  void CheckVocab(const Vocabulary& vocab) const;
  bool MaskBit(StateId state, TokenId id) const;

  std::shared_ptr<const Impl> impl_;
};

/*!
 * \brief Longest-match tokenization of bytes. When a grammar state is given, only tokens valid
 *  at each step are considered. Returns nullopt when no tokenization is found this way.
 */
std::optional<std::vector<TokenId>> GreedyTokenize(const Vocabulary& vocab, std::string_view bytes);
std::optional<std::vector<TokenId>> GreedyTokenize(const Vocabulary& vocab, std::string_view bytes,
                                                   const CompiledGrammar& grammar,
                                                   DecoderState state);

}  // namespace cdtax

#endif  // CDTAX_GRAMMAR_H_
