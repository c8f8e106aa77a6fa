/*!
 *  Copyright (c) 2026 by Contributors
 * \file vocab.cc
 */
#include <cdtax/error.h>
#include <cdtax/io_util.h>
#include <cdtax/vocab.h>
#include <openssl/evp.h>
#include <openssl/sha.h>

#include <charconv>
#include <map>
#include <optional>

namespace cdtax {

std::string Base64Encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(bytes.data()),
                          static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string Base64Decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ParseError("base64 length is not a multiple of 4");
  if (text.empty()) return {};
  std::string out(3 * (text.size() / 4), '\0');
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw ParseError("invalid base64 payload");
  std::size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    hex.push_back(kHex[c >> 4]);
    hex.push_back(kHex[c & 0xF]);
  }
  return hex;
}

Vocabulary Vocabulary::FromBytes(std::vector<std::string> bytes, TokenId eos_id) {
  if (bytes.empty()) throw ValidationError("vocabulary has no tokens");
  if (eos_id < 0 || static_cast<std::size_t>(eos_id) >= bytes.size()) {
    throw ValidationError("eos id " + std::to_string(eos_id) + " is not a valid token id");
  }
  auto impl = std::make_shared<Impl>();
  impl->eos_id = eos_id;
  impl->tokens.reserve(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto id = static_cast<TokenId>(i);
    if (id == eos_id) {
      if (!bytes[i].empty()) throw ValidationError("eos token must have empty bytes");
    } else if (bytes[i].empty()) {
      throw ValidationError("token " + std::to_string(id) + " has empty bytes");
    }
    impl->tokens.push_back(Token{id, std::move(bytes[i])});
  }
  Vocabulary vocab;
  vocab.impl_ = impl;
  impl->fingerprint = Sha256Hex(vocab.Serialize());
  return vocab;
}

const Token& Vocabulary::token(TokenId id) const {
  if (!Contains(id)) throw LookupError("unknown token id " + std::to_string(id));
  return impl_->tokens[static_cast<std::size_t>(id)];
}

std::string Vocabulary::Serialize() const {
  std::string out = "#eos " + std::to_string(impl_->eos_id) + "\n";
  for (const Token& t : impl_->tokens) {
    out += std::to_string(t.id);
    out += '\t';
    out += Base64Encode(t.bytes);
    out += '\n';
  }
  return out;
}

namespace {

std::optional<long> ParseId(std::string_view text) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 0) return std::nullopt;
  return value;
}

}  // namespace

Vocabulary ParseVocabulary(std::string_view text) {
  std::optional<long> eos;
  std::map<long, std::string> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    if (line.front() == '#') {
      if (line.substr(0, 5) == "#eos ") {
        auto id = ParseId(line.substr(5));
        if (!id) throw ParseError(where() + "malformed eos header");
        if (eos) throw ParseError(where() + "duplicate eos header");
        eos = id;
      }
      continue;
    }
    std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(where() + "expected <id><TAB><base64>");
    auto id = ParseId(line.substr(0, tab));
    if (!id) throw ParseError(where() + "malformed token id");
    std::string bytes;
    try {
      bytes = Base64Decode(line.substr(tab + 1));
    } catch (const ParseError& e) {
      throw ParseError(where() + e.what());
    }
    if (!entries.emplace(*id, std::move(bytes)).second) {
      throw ValidationError("duplicate token id " + std::to_string(*id) + " (line " +
                            std::to_string(line_no) + ")");
    }
  }
  if (!eos) throw ParseError("missing '#eos <id>' header");
  entries.try_emplace(*eos, std::string());
  std::vector<std::string> bytes;
  bytes.reserve(entries.size());
  long expected = 0;
  for (auto& [id, b] : entries) {
    if (id != expected) throw ValidationError("token ids have a gap at " + std::to_string(expected));
    bytes.push_back(std::move(b));
    ++expected;
  }
  return Vocabulary::FromBytes(std::move(bytes), static_cast<TokenId>(*eos));
}

Vocabulary LoadVocabulary(const std::filesystem::path& path) {
  return ParseVocabulary(ReadFile(path));
}

std::string Detokenize(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) out += vocab.bytes(id);
  return out;
}

}  // namespace cdtax
