/*!
 *  Copyright (c) 2026 by Contributors
 * \file automaton.cc
 * \brief Direct construction of the schema DFA, dead-state pruning and serialization.
 */
#include <cdtax/error.h>
#include <cdtax/grammar.h>

#include <deque>
#include <map>
#include <unordered_map>

#include "json.hpp"

namespace cdtax {

using nlohmann::json;

const char* RegionKindName(RegionKind kind) {
  switch (kind) {
    case RegionKind::kStructure: return "structure";
    case RegionKind::kKey: return "key";
    case RegionKind::kValue: return "value";
    case RegionKind::kDone: return "done";
  }
  return "unknown";
}

namespace {

enum class StrSub : int { kNormal, kEscape, kU1, kU2, kU3, kE0, kED, kF0, kF4 };
enum class NumSub : int { kStart, kSign, kZero, kInt, kDot, kFrac, kExp, kExpSign, kExpDigits };

class Builder {
 public:
  StateId NewState(Region region, bool accepting = false) {
    auto id = static_cast<StateId>(regions_.size());
    regions_.push_back(region);
    accepting_.push_back(accepting ? 1 : 0);
    table_.resize(table_.size() + 256, kNoState);
    return id;
  }

  void Add(StateId from, std::uint8_t byte, StateId to) {
    table_[static_cast<std::size_t>(from) * 256 + byte] = to;
  }

  void AddRange(StateId from, int lo, int hi, StateId to) {
    for (int b = lo; b <= hi; ++b) Add(from, static_cast<std::uint8_t>(b), to);
  }

  /*! \brief Emits literal[0..n-2] into fresh states of `region`; the last byte lands on `to`. */
  void AddLiteral(StateId from, std::string_view literal, Region region, StateId to) {
    StateId cur = from;
    for (std::size_t i = 0; i + 1 < literal.size(); ++i) {
      StateId next = NewState(region);
      Add(cur, static_cast<std::uint8_t>(literal[i]), next);
      cur = next;
    }
    Add(cur, static_cast<std::uint8_t>(literal.back()), to);
  }

  void BuildString(std::int32_t field, StateId begin, StateId exit, std::size_t max_len) {
    Region value{RegionKind::kValue, field};
    StateId after = NewState(Region{RegionKind::kStructure, field});
    std::map<std::pair<std::size_t, StrSub>, StateId> states;
    std::deque<std::pair<std::size_t, StrSub>> pending;
    auto get = [&](std::size_t len, StrSub sub) {
      auto [it, fresh] = states.try_emplace({len, sub}, kNoState);
      if (fresh) {
        it->second = NewState(value);
        pending.emplace_back(len, sub);
      }
      return it->second;
    };
    Add(begin, '"', get(0, StrSub::kNormal));
    while (!pending.empty()) {
      auto [len, sub] = pending.front();
      pending.pop_front();
      StateId s = states.at({len, sub});
      bool room = len < max_len;
      switch (sub) {
        case StrSub::kNormal:
          Add(s, '"', after);
          if (!room) break;
          Add(s, '\\', get(len + 1, StrSub::kEscape));
          for (int b = 0x20; b <= 0x7F; ++b) {
            if (b != '"' && b != '\\') Add(s, static_cast<std::uint8_t>(b), get(len + 1, StrSub::kNormal));
          }
          AddRange(s, 0xC2, 0xDF, get(len + 1, StrSub::kU1));
          Add(s, 0xE0, get(len + 1, StrSub::kE0));
          AddRange(s, 0xE1, 0xEC, get(len + 1, StrSub::kU2));
          Add(s, 0xED, get(len + 1, StrSub::kED));
          AddRange(s, 0xEE, 0xEF, get(len + 1, StrSub::kU2));
          Add(s, 0xF0, get(len + 1, StrSub::kF0));
          AddRange(s, 0xF1, 0xF3, get(len + 1, StrSub::kU3));
          Add(s, 0xF4, get(len + 1, StrSub::kF4));
          break;
        case StrSub::kEscape:
          if (!room) break;
          Add(s, '"', get(len + 1, StrSub::kNormal));
          Add(s, '\\', get(len + 1, StrSub::kNormal));
          break;
        case StrSub::kU1:
          if (room) AddRange(s, 0x80, 0xBF, get(len + 1, StrSub::kNormal));
          break;
        case StrSub::kU2:
          if (room) AddRange(s, 0x80, 0xBF, get(len + 1, StrSub::kU1));
          break;
        case StrSub::kU3:
          if (room) AddRange(s, 0x80, 0xBF, get(len + 1, StrSub::kU2));
          break;
        case StrSub::kE0:
          if (room) AddRange(s, 0xA0, 0xBF, get(len + 1, StrSub::kU1));
          break;
        case StrSub::kED:
          if (room) AddRange(s, 0x80, 0x9F, get(len + 1, StrSub::kU1));
          break;
        case StrSub::kF0:
          if (room) AddRange(s, 0x90, 0xBF, get(len + 1, StrSub::kU2));
          break;
        case StrSub::kF4:
          if (room) AddRange(s, 0x80, 0x8F, get(len + 1, StrSub::kU2));
          break;
      }
    }
    Add(after, exit_byte_, exit);
  }

  void BuildNumber(std::int32_t field, StateId begin, StateId exit, std::size_t max_len,
                   bool integer_only) {
    Region value{RegionKind::kValue, field};
    std::map<std::pair<std::size_t, NumSub>, StateId> states;
    std::deque<std::pair<std::size_t, NumSub>> pending;
    states[{0, NumSub::kStart}] = begin;
    pending.emplace_back(0, NumSub::kStart);
    auto get = [&](std::size_t len, NumSub sub) {
      auto [it, fresh] = states.try_emplace({len, sub}, kNoState);
      if (fresh) {
        it->second = NewState(value);
        pending.emplace_back(len, sub);
      }
      return it->second;
    };
    while (!pending.empty()) {
      auto [len, sub] = pending.front();
      pending.pop_front();
      StateId s = states.at({len, sub});
      bool room = len < max_len;
      bool terminal = sub == NumSub::kZero || sub == NumSub::kInt || sub == NumSub::kFrac ||
                      sub == NumSub::kExpDigits;
      if (terminal) Add(s, exit_byte_, exit);
      if (!room) continue;
      std::size_t n = len + 1;
      switch (sub) {
        case NumSub::kStart:
          Add(s, '-', get(n, NumSub::kSign));
          [[fallthrough]];
        case NumSub::kSign:
          Add(s, '0', get(n, NumSub::kZero));
          AddRange(s, '1', '9', get(n, NumSub::kInt));
          break;
        case NumSub::kZero:
        case NumSub::kInt:
          if (sub == NumSub::kInt) AddRange(s, '0', '9', get(n, NumSub::kInt));
          if (!integer_only) {
            Add(s, '.', get(n, NumSub::kDot));
            Add(s, 'e', get(n, NumSub::kExp));
            Add(s, 'E', get(n, NumSub::kExp));
          }
          break;
        case NumSub::kDot:
          AddRange(s, '0', '9', get(n, NumSub::kFrac));
          break;
        case NumSub::kFrac:
          AddRange(s, '0', '9', get(n, NumSub::kFrac));
          Add(s, 'e', get(n, NumSub::kExp));
          Add(s, 'E', get(n, NumSub::kExp));
          break;
        case NumSub::kExp:
          Add(s, '+', get(n, NumSub::kExpSign));
          Add(s, '-', get(n, NumSub::kExpSign));
          [[fallthrough]];
        case NumSub::kExpSign:
        case NumSub::kExpDigits:
          AddRange(s, '0', '9', get(n, NumSub::kExpDigits));
          break;
      }
    }
  }

  void set_exit_byte(std::uint8_t b) { exit_byte_ = b; }

  std::vector<StateId> table_;
  std::vector<std::uint8_t> accepting_;
  std::vector<Region> regions_;

 private:
  std::uint8_t exit_byte_ = ',';
};

}  // namespace

ByteAutomaton ByteAutomaton::Build(const SchemaSpec& schema) {
  schema.Validate();
  Builder b;
  const auto n = static_cast<std::int32_t>(schema.fields.size());
  StateId start = b.NewState(Region{RegionKind::kStructure, 0});
  std::vector<StateId> key_entry;
  for (std::int32_t i = 0; i < n; ++i) key_entry.push_back(b.NewState(Region{RegionKind::kKey, i}));
  StateId accept = b.NewState(Region{RegionKind::kDone, n - 1}, /*accepting=*/true);
  b.Add(start, '{', key_entry[0]);

  std::vector<ValueRegionMarks> marks;
  for (std::int32_t i = 0; i < n; ++i) {
    const FieldSpec& field = schema.fields[static_cast<std::size_t>(i)];
    StateId colon = b.NewState(Region{RegionKind::kStructure, i});
    b.AddLiteral(key_entry[static_cast<std::size_t>(i)], "\"" + field.key + "\"",
                 Region{RegionKind::kKey, i}, colon);
    StateId value = b.NewState(Region{RegionKind::kValue, i});
    b.Add(colon, ':', value);
    bool last = i + 1 == n;
    StateId exit = last ? accept : key_entry[static_cast<std::size_t>(i + 1)];
    b.set_exit_byte(last ? '}' : ',');
    if (field.kind == ValueKind::kString) {
      b.BuildString(i, value, exit, schema.max_string_len);
    } else {
      b.BuildNumber(i, value, exit, schema.max_number_len, field.kind == ValueKind::kInteger);
    }
    marks.push_back(ValueRegionMarks{value, exit});
  }

  // Keep states that are reachable from start and can reach acceptance.
  const std::size_t count = b.regions_.size();
  std::vector<std::vector<StateId>> reverse(count);
  for (std::size_t s = 0; s < count; ++s) {
    for (int byte = 0; byte < 256; ++byte) {
      StateId t = b.table_[s * 256 + static_cast<std::size_t>(byte)];
      if (t != kNoState) reverse[static_cast<std::size_t>(t)].push_back(static_cast<StateId>(s));
    }
  }
  std::vector<char> live(count, 0);
  std::deque<StateId> queue{accept};
  live[static_cast<std::size_t>(accept)] = 1;
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (StateId p : reverse[static_cast<std::size_t>(s)]) {
      if (!live[static_cast<std::size_t>(p)]) {
        live[static_cast<std::size_t>(p)] = 1;
        queue.push_back(p);
      }
    }
  }
  std::vector<char> reached(count, 0);
  queue.push_back(start);
  reached[static_cast<std::size_t>(start)] = 1;
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (int byte = 0; byte < 256; ++byte) {
      StateId t = b.table_[static_cast<std::size_t>(s) * 256 + static_cast<std::size_t>(byte)];
      if (t != kNoState && live[static_cast<std::size_t>(t)] && !reached[static_cast<std::size_t>(t)]) {
        reached[static_cast<std::size_t>(t)] = 1;
        queue.push_back(t);
      }
    }
  }
  std::vector<StateId> remap(count, kNoState);
  StateId next_id = 0;
  for (std::size_t s = 0; s < count; ++s) {
    if (live[s] && reached[s]) remap[s] = next_id++;
  }

  ByteAutomaton out;
  out.start_ = remap[static_cast<std::size_t>(start)];
  out.table_.assign(static_cast<std::size_t>(next_id) * 256, kNoState);
  out.accepting_.resize(static_cast<std::size_t>(next_id));
  out.regions_.resize(static_cast<std::size_t>(next_id));
  for (std::size_t s = 0; s < count; ++s) {
    StateId ns = remap[s];
    if (ns == kNoState) continue;
    out.accepting_[static_cast<std::size_t>(ns)] = b.accepting_[s];
    out.regions_[static_cast<std::size_t>(ns)] = b.regions_[s];
    for (std::size_t byte = 0; byte < 256; ++byte) {
      StateId t = b.table_[s * 256 + byte];
      if (t != kNoState) out.table_[static_cast<std::size_t>(ns) * 256 + byte] = remap[static_cast<std::size_t>(t)];
    }
  }
  for (const ValueRegionMarks& m : marks) {
    out.value_regions_.push_back(
        ValueRegionMarks{remap[static_cast<std::size_t>(m.begin)], remap[static_cast<std::size_t>(m.end)]});
  }
  return out;
}

std::size_t ByteAutomaton::num_transitions() const {
  std::size_t n = 0;
  for (StateId t : table_) n += t != kNoState;
  return n;
}

StateId ByteAutomaton::Walk(StateId from, std::string_view bytes) const {
  StateId s = from;
  for (char c : bytes) {
    if (s == kNoState) return kNoState;
    s = Next(s, static_cast<std::uint8_t>(c));
  }
  return s;
}

bool ByteAutomaton::Accepts(std::string_view bytes) const {
  StateId s = Walk(start_, bytes);
  return s != kNoState && IsAccepting(s);
}

int ByteAutomaton::OutDegree(StateId state) const {
  int n = 0;
  for (int b = 0; b < 256; ++b) n += Next(state, static_cast<std::uint8_t>(b)) != kNoState;
  return n;
}

std::string ByteAutomaton::ForcedBytes(StateId state) const {
  std::string out;
  for (std::size_t guard = 0; guard < num_states(); ++guard) {
    if (region(state).kind == RegionKind::kValue || IsAccepting(state)) break;
    if (OutDegree(state) != 1) break;
    for (int b = 0; b < 256; ++b) {
      StateId t = Next(state, static_cast<std::uint8_t>(b));
      if (t != kNoState) {
        out.push_back(static_cast<char>(b));
        state = t;
        break;
      }
    }
  }
  return out;
}

std::string ByteAutomaton::ToJson() const {
  json transitions = json::array();
  for (std::size_t s = 0; s < num_states(); ++s) {
    int b = 0;
    while (b < 256) {
      StateId t = Next(static_cast<StateId>(s), static_cast<std::uint8_t>(b));
      if (t == kNoState) {
        ++b;
        continue;
      }
      int hi = b;
      while (hi + 1 < 256 && Next(static_cast<StateId>(s), static_cast<std::uint8_t>(hi + 1)) == t) ++hi;
      transitions.push_back({s, b, hi, t});
      b = hi + 1;
    }
  }
  json regions = json::array();
  json accepting = json::array();
  for (std::size_t s = 0; s < num_states(); ++s) {
    regions.push_back({static_cast<int>(regions_[s].kind), regions_[s].field});
    if (accepting_[s]) accepting.push_back(s);
  }
  json marks = json::array();
  for (const ValueRegionMarks& m : value_regions_) marks.push_back({m.begin, m.end});
  json doc = {{"start", start_},     {"num_states", num_states()}, {"accepting", accepting},
              {"regions", regions},  {"value_regions", marks},     {"transitions", transitions}};
  return doc.dump();
}

ByteAutomaton ByteAutomaton::FromJson(std::string_view json_text) {
  ByteAutomaton out;
  try {
    json doc = json::parse(json_text);
    auto n = doc.at("num_states").get<std::size_t>();
    out.start_ = doc.at("start").get<StateId>();
    out.table_.assign(n * 256, kNoState);
    out.accepting_.assign(n, 0);
    out.regions_.resize(n);
    auto check = [n](long long s) {
      if (s < 0 || static_cast<std::size_t>(s) >= n) throw ParseError("automaton state out of range");
    };
    check(out.start_);
    for (const json& s : doc.at("accepting")) {
      check(s.get<long long>());
      out.accepting_[s.get<std::size_t>()] = 1;
    }
    const json& regions = doc.at("regions");
    if (regions.size() != n) throw ParseError("automaton regions length mismatch");
    for (std::size_t s = 0; s < n; ++s) {
      int kind = regions[s].at(0).get<int>();
      if (kind < 0 || kind > static_cast<int>(RegionKind::kDone)) throw ParseError("bad region kind");
      out.regions_[s] = Region{static_cast<RegionKind>(kind), regions[s].at(1).get<std::int32_t>()};
    }
    for (const json& m : doc.at("value_regions")) {
      ValueRegionMarks mark{m.at(0).get<StateId>(), m.at(1).get<StateId>()};
      check(mark.begin);
      check(mark.end);
      out.value_regions_.push_back(mark);
    }
    for (const json& t : doc.at("transitions")) {
      auto from = t.at(0).get<long long>();
      int lo = t.at(1).get<int>();
      int hi = t.at(2).get<int>();
      auto to = t.at(3).get<long long>();
      check(from);
      check(to);
      if (lo < 0 || hi > 255 || lo > hi) throw ParseError("automaton byte range out of bounds");
      for (int b = lo; b <= hi; ++b) {
        out.table_[static_cast<std::size_t>(from) * 256 + static_cast<std::size_t>(b)] = static_cast<StateId>(to);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("automaton: ") + e.what());
  }
  return out;
}

bool AutomataDifferOnlyInKeyLiteral(const ByteAutomaton& a, const ByteAutomaton& b,
                                    std::size_t field) {
  const auto target = static_cast<std::int32_t>(field);
  auto in_key = [target](const ByteAutomaton& m, StateId s) {
    Region r = m.region(s);
    return r.kind == RegionKind::kKey && r.field == target;
  };
  // Key literals are linear chains; skip to the state after the closing quote.
  auto skip = [&](const ByteAutomaton& m, StateId s) {
    std::size_t guard = 0;
    while (in_key(m, s) && guard++ < m.num_states()) {
      if (m.OutDegree(s) != 1) return kNoState;
      for (int byte = 0; byte < 256; ++byte) {
        StateId t = m.Next(s, static_cast<std::uint8_t>(byte));
        if (t != kNoState) {
          s = t;
          break;
        }
      }
    }
    return s;
  };
  std::unordered_map<StateId, StateId> a_to_b;
  std::unordered_map<StateId, StateId> b_to_a;
  std::deque<std::pair<StateId, StateId>> queue;
  auto visit = [&](StateId sa, StateId sb) {
    auto ia = a_to_b.find(sa);
    auto ib = b_to_a.find(sb);
    if (ia != a_to_b.end() || ib != b_to_a.end()) {
      return ia != a_to_b.end() && ib != b_to_a.end() && ia->second == sb && ib->second == sa;
    }
    a_to_b[sa] = sb;
    b_to_a[sb] = sa;
    queue.emplace_back(sa, sb);
    return true;
  };
  if (!visit(a.start(), b.start())) return false;
  while (!queue.empty()) {
    auto [sa, sb] = queue.front();
    queue.pop_front();
    bool ka = in_key(a, sa);
    bool kb = in_key(b, sb);
    if (ka != kb) return false;
    if (ka) {
      StateId na = skip(a, sa);
      StateId nb = skip(b, sb);
      if (na == kNoState || nb == kNoState || !visit(na, nb)) return false;
      continue;
    }
    if (a.IsAccepting(sa) != b.IsAccepting(sb) || !(a.region(sa) == b.region(sb))) return false;
    for (int byte = 0; byte < 256; ++byte) {
      StateId ta = a.Next(sa, static_cast<std::uint8_t>(byte));
      StateId tb = b.Next(sb, static_cast<std::uint8_t>(byte));
      if ((ta == kNoState) != (tb == kNoState)) return false;
      if (ta != kNoState && !visit(ta, tb)) return false;
    }
  }
  return a.value_regions().size() == b.value_regions().size();
}

}  // namespace cdtax
