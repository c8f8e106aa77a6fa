/*!
 *  Copyright (c) 2026 by Contributors
 * \file grammar.cc
 * \brief Binds a schema automaton to a vocabulary: token masks, coverage checks, advance.
 */
#include <cdtax/error.h>
#include <cdtax/grammar.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <deque>
#include <set>

#include "json.hpp"
#include "token_trie.h"

namespace cdtax {

using nlohmann::json;

bool ValidTokenSet::Contains(TokenId id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

namespace {

std::string ByteName(std::uint8_t b) {
  char buf[16];
  if (b >= 0x20 && b < 0x7F) {
    std::snprintf(buf, sizeof(buf), "0x%02X ('%c')", b, b);
  } else {
    std::snprintf(buf, sizeof(buf), "0x%02X", b);
  }
  return buf;
}

std::string DescribeState(const ByteAutomaton& automaton, StateId s) {
  Region r = automaton.region(s);
  return "state " + std::to_string(s) + " (" + RegionKindName(r.kind) + " of field " +
         std::to_string(r.field) + ")";
}

}  // namespace

CompiledGrammar CompiledGrammar::Compile(const SchemaSpec& schema, const Vocabulary& vocab) {
  schema.Validate();
  // Every structural byte must occur in at least one token.
  std::set<std::uint8_t> required{'{', '}', '"', ':'};
  if (schema.fields.size() > 1) required.insert(',');
  for (const FieldSpec& f : schema.fields) {
    for (char c : f.key) required.insert(static_cast<std::uint8_t>(c));
  }
  std::vector<char> present(256, 0);
  for (const Token& t : vocab.tokens()) {
    for (char c : t.bytes) present[static_cast<std::uint8_t>(c)] = 1;
  }
  std::string missing;
  for (std::uint8_t b : required) {
    if (!present[b]) missing += (missing.empty() ? "" : ", ") + ByteName(b);
  }
  if (!missing.empty()) throw CoverageError("vocabulary cannot express bytes: " + missing);
  return Bind(schema, ByteAutomaton::Build(schema), vocab);
}

CompiledGrammar CompiledGrammar::Bind(SchemaSpec schema, ByteAutomaton automaton,
                                      const Vocabulary& vocab) {
  auto impl = std::make_shared<Impl>();
  impl->vocab_fingerprint = vocab.fingerprint();
  impl->vocab_size = vocab.size();
  impl->eos_id = vocab.eos_id();
  impl->words_per_state = (vocab.size() + 63) / 64;
  const std::size_t num_states = automaton.num_states();
  impl->masks.assign(num_states * impl->words_per_state, 0);

  detail::TokenTrie trie(vocab);
  std::vector<std::vector<StateId>> token_edges(num_states);
  std::vector<std::pair<std::int32_t, StateId>> stack;
  for (std::size_t s = 0; s < num_states; ++s) {
    std::uint64_t* mask = impl->masks.data() + s * impl->words_per_state;
    auto& edges = token_edges[s];
    stack.clear();
    stack.emplace_back(trie.root(), static_cast<StateId>(s));
    while (!stack.empty()) {
      auto [node_id, state] = stack.back();
      stack.pop_back();
      const auto& node = trie.node(node_id);
      if (node_id != trie.root() && !node.ends.empty()) {
        for (TokenId id : node.ends) mask[id / 64] |= std::uint64_t{1} << (id % 64);
        edges.push_back(state);
      }
      for (const auto& [byte, child] : node.children) {
        StateId next = automaton.Next(state, byte);
        if (next != kNoState) stack.emplace_back(child, next);
      }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    if (automaton.IsAccepting(static_cast<StateId>(s))) {
      mask[vocab.eos_id() / 64] |= std::uint64_t{1} << (vocab.eos_id() % 64);
    }
  }

  // Token-level reachability from start, then co-reachability of acceptance.
  std::vector<char> reachable(num_states, 0);
  std::deque<StateId> queue{automaton.start()};
  reachable[static_cast<std::size_t>(automaton.start())] = 1;
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (StateId t : token_edges[static_cast<std::size_t>(s)]) {
      if (!reachable[static_cast<std::size_t>(t)]) {
        reachable[static_cast<std::size_t>(t)] = 1;
        queue.push_back(t);
      }
    }
  }
  std::vector<std::vector<StateId>> reverse(num_states);
  for (std::size_t s = 0; s < num_states; ++s) {
    if (!reachable[s]) continue;
    for (StateId t : token_edges[s]) reverse[static_cast<std::size_t>(t)].push_back(static_cast<StateId>(s));
  }
  std::vector<char> finishes(num_states, 0);
  for (std::size_t s = 0; s < num_states; ++s) {
    if (reachable[s] && automaton.IsAccepting(static_cast<StateId>(s))) {
      finishes[s] = 1;
      queue.push_back(static_cast<StateId>(s));
    }
  }
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (StateId p : reverse[static_cast<std::size_t>(s)]) {
      if (!finishes[static_cast<std::size_t>(p)]) {
        finishes[static_cast<std::size_t>(p)] = 1;
        queue.push_back(p);
      }
    }
  }
  std::size_t reachable_count = 0;
  for (std::size_t s = 0; s < num_states; ++s) {
    if (!reachable[s]) continue;
    ++reachable_count;
    if (!finishes[s]) {
      std::string forced = automaton.ForcedBytes(static_cast<StateId>(s));
      throw CoverageError("no token sequence completes the grammar from " +
                          DescribeState(automaton, static_cast<StateId>(s)) +
                          (forced.empty() ? std::string() : "; next bytes \"" + forced + "\""));
    }
  }
  impl->token_reachable_states = reachable_count;
  impl->schema = std::move(schema);
  impl->automaton = std::move(automaton);
  CompiledGrammar out;
  out.impl_ = std::move(impl);
  return out;
}

CompiledGrammar CompiledGrammar::Load(std::string_view json_text, const Vocabulary& vocab) {
  SchemaSpec schema;
  ByteAutomaton automaton;
  std::string fingerprint;
  try {
    json doc = json::parse(json_text);
    if (doc.value("format", "") != "cdtax.grammar.v1") throw ParseError("not a cdtax grammar file");
    schema = ParseSchema(doc.at("schema").dump());
    fingerprint = doc.at("vocab_fingerprint").get<std::string>();
    automaton = ByteAutomaton::FromJson(doc.at("automaton").dump());
  } catch (const json::exception& e) {
    throw ParseError(std::string("grammar: ") + e.what());
  }
  if (fingerprint != vocab.fingerprint()) {
    throw ValidationError("grammar was compiled against vocabulary " + fingerprint +
                          ", got " + vocab.fingerprint());
  }
  if (!(automaton == ByteAutomaton::Build(schema))) {
    throw ValidationError("grammar automaton does not match its embedded schema");
  }
  return Bind(std::move(schema), std::move(automaton), vocab);
}

std::string CompiledGrammar::Serialize() const {
  GrammarStats s = stats();
  json doc = {{"format", "cdtax.grammar.v1"},
              {"schema", json::parse(SchemaToJson(impl_->schema))},
              {"vocab_fingerprint", impl_->vocab_fingerprint},
              {"stats",
               {{"states", s.states},
                {"transitions", s.transitions},
                {"token_reachable_states", s.token_reachable_states}}},
              {"automaton", json::parse(impl_->automaton.ToJson())}};
  return doc.dump();
}

GrammarStats CompiledGrammar::stats() const {
  return GrammarStats{impl_->automaton.num_states(), impl_->automaton.num_transitions(),
                      impl_->token_reachable_states};
}

void CompiledGrammar::CheckVocab(const Vocabulary& vocab) const {
  if (vocab.fingerprint() != impl_->vocab_fingerprint) {
    throw ContractError("vocabulary fingerprint does not match the compiled grammar");
  }
}

bool CompiledGrammar::MaskBit(StateId state, TokenId id) const {
  const std::uint64_t word =
      impl_->masks[static_cast<std::size_t>(state) * impl_->words_per_state + static_cast<std::size_t>(id) / 64];
  return (word >> (id % 64)) & 1U;
}

DecoderState CompiledGrammar::Start() const {
  StateId s = impl_->automaton.start();
  return DecoderState{s, 0, impl_->automaton.region(s), false};
}

bool CompiledGrammar::IsValid(const DecoderState& state, TokenId token, const Vocabulary& vocab) const {
  CheckVocab(vocab);
  if (state.terminal || !vocab.Contains(token)) return false;
  return MaskBit(state.state, token);
}

DecoderState CompiledGrammar::Advance(const DecoderState& state, TokenId token,
                                      const Vocabulary& vocab) const {
  CheckVocab(vocab);
  if (state.terminal) throw ContractError("cannot advance a terminal decoder state");
  if (!vocab.Contains(token)) throw LookupError("unknown token id " + std::to_string(token));
  if (!MaskBit(state.state, token)) {
    throw ContractError("token " + std::to_string(token) + " is not valid from " +
                        DescribeState(impl_->automaton, state.state));
  }
  DecoderState next = state;
  if (token == impl_->eos_id) {
    next.terminal = true;
    next.region = Region{RegionKind::kDone, state.region.field};
    return next;
  }
  const std::string& bytes = vocab.bytes(token);
  next.state = impl_->automaton.Walk(state.state, bytes);
  next.bytes_consumed += bytes.size();
  next.region = impl_->automaton.region(next.state);
  return next;
}

DecoderState CompiledGrammar::Replay(std::span<const TokenId> ids, const Vocabulary& vocab) const {
  DecoderState state = Start();
  for (TokenId id : ids) state = Advance(state, id, vocab);
  return state;
}

ValidTokenSet CompiledGrammar::ValidTokens(const DecoderState& state, const Vocabulary& vocab) const {
  CheckVocab(vocab);
  if (state.terminal) throw ContractError("terminal decoder state has no valid tokens");
  std::vector<TokenId> ids;
  const std::uint64_t* words = impl_->masks.data() + static_cast<std::size_t>(state.state) * impl_->words_per_state;
  for (std::size_t w = 0; w < impl_->words_per_state; ++w) {
    std::uint64_t bits = words[w];
    while (bits) {
      int bit = std::countr_zero(bits);
      ids.push_back(static_cast<TokenId>(w * 64 + static_cast<std::size_t>(bit)));
      bits &= bits - 1;
    }
  }
  bool eos = impl_->automaton.IsAccepting(state.state);
  return ValidTokenSet(std::move(ids), eos);
}

std::optional<std::vector<TokenId>> GreedyTokenize(const Vocabulary& vocab, std::string_view bytes) {
  detail::TokenTrie trie(vocab);
  std::vector<TokenId> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto matches = trie.PrefixMatches(bytes.substr(pos));
    if (matches.empty()) return std::nullopt;
    out.push_back(matches.front());
    pos += vocab.bytes(matches.front()).size();
  }
  return out;
}

std::optional<std::vector<TokenId>> GreedyTokenize(const Vocabulary& vocab, std::string_view bytes,
                                                   const CompiledGrammar& grammar,
                                                   DecoderState state) {
  detail::TokenTrie trie(vocab);
  std::vector<TokenId> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    bool advanced = false;
    for (TokenId id : trie.PrefixMatches(bytes.substr(pos))) {
      if (!grammar.IsValid(state, id, vocab)) continue;
      state = grammar.Advance(state, id, vocab);
      out.push_back(id);
      pos += vocab.bytes(id).size();
      advanced = true;
      break;
    }
    if (!advanced) return std::nullopt;
  }
  return out;
}

}  // namespace cdtax
