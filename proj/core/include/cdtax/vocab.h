/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/vocab.h
 * \brief Byte-level token alphabet shared by the grammar engine and every model backend.
 */
#ifndef CDTAX_VOCAB_H_
#define CDTAX_VOCAB_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdtax {

using TokenId = std::int32_t;

struct Token {
  TokenId id = 0;
  /*! \brief Surface form. Empty only for the end-of-sequence token. */
  std::string bytes;
};

/*!
 * \brief Immutable, cheaply copyable token table with a designated end-of-sequence id.
 *
 * Ids are exactly 0..N-1. Distinct ids may share a byte string. The fingerprint is the
 * hex SHA-256 of the canonical serialization, so two vocabularies with identical content
 * always agree on it.
 */
class Vocabulary {
 public:
  Vocabulary() = default;

  /*! \brief Builds from byte strings indexed by id; bytes[eos_id] must be empty. */
  static Vocabulary FromBytes(std::vector<std::string> bytes, TokenId eos_id);

  std::size_t size() const { return impl_ ? impl_->tokens.size() : 0; }
  TokenId eos_id() const { return impl_->eos_id; }
  const std::string& fingerprint() const { return impl_->fingerprint; }

  bool Contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }
  /*! \throws LookupError for ids outside 0..N-1. */
  const Token& token(TokenId id) const;
  const std::string& bytes(TokenId id) const { return token(id).bytes; }
  std::span<const Token> tokens() const { return impl_->tokens; }

  /*! \brief Canonical file form: `#eos <id>` header then `<id>\t<base64>` per token. */
  std::string Serialize() const;

 private:
  struct Impl {
    std::vector<Token> tokens;
    TokenId eos_id = 0;
    std::string fingerprint;
  };
  std::shared_ptr<const Impl> impl_;
};

/*! \brief Parses the text vocabulary format; parse errors name the offending line. */
Vocabulary ParseVocabulary(std::string_view text);
Vocabulary LoadVocabulary(const std::filesystem::path& path);

/*! \brief Concatenates token bytes; eos contributes nothing. */
std::string Detokenize(const Vocabulary& vocab, std::span<const TokenId> ids);

std::string Base64Encode(std::string_view bytes);
/*! \throws ParseError on malformed input. */
std::string Base64Decode(std::string_view text);
std::string Sha256Hex(std::string_view bytes);

}  // namespace cdtax

#endif  // CDTAX_VOCAB_H_
