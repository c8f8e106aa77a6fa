/*!
 *  Copyright (c) 2026 by Contributors
 * \file schema.cc
 * \brief Schema and key-variant parsing, validation and rewriting.
 */
#include <cdtax/error.h>
#include <cdtax/grammar.h>
#include <cdtax/io_util.h>

#include <set>

#include "json.hpp"

namespace cdtax {

using nlohmann::json;

const char* ValueKindName(ValueKind kind) {
  switch (kind) {
    case ValueKind::kString: return "string";
    case ValueKind::kNumber: return "number";
    case ValueKind::kInteger: return "integer";
  }
  return "unknown";
}

ValueKind ParseValueKind(std::string_view name) {
  if (name == "string") return ValueKind::kString;
  if (name == "number") return ValueKind::kNumber;
  if (name == "integer") return ValueKind::kInteger;
  throw ValidationError("unknown value kind '" + std::string(name) + "'");
}

bool IsValidKey(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

void SchemaSpec::Validate() const {
  if (fields.empty()) throw ValidationError("schema has no fields");
  std::set<std::string> seen;
  for (const FieldSpec& f : fields) {
    if (!IsValidKey(f.key)) {
      throw ValidationError("key '" + f.key + "' is outside the [A-Za-z0-9_]+ charset");
    }
    if (!seen.insert(f.key).second) throw ValidationError("duplicate key '" + f.key + "'");
  }
  if (max_number_len == 0) throw ValidationError("max_number_len must be positive");
}

std::optional<std::size_t> SchemaSpec::FindField(std::string_view key) const {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].key == key) return i;
  }
  return std::nullopt;
}

SchemaSpec ParseSchema(std::string_view json_text) {
  SchemaSpec schema;
  try {
    json doc = json::parse(json_text);
    for (const json& f : doc.at("fields")) {
      schema.fields.push_back(
          FieldSpec{f.at("key").get<std::string>(), ParseValueKind(f.at("kind").get<std::string>())});
    }
    if (doc.contains("max_string_len")) schema.max_string_len = doc["max_string_len"].get<std::size_t>();
    if (doc.contains("max_number_len")) schema.max_number_len = doc["max_number_len"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema: ") + e.what());
  }
  schema.Validate();
  return schema;
}

SchemaSpec LoadSchema(const std::filesystem::path& path) { return ParseSchema(ReadFile(path)); }

std::string SchemaToJson(const SchemaSpec& schema) {
  json fields = json::array();
  for (const FieldSpec& f : schema.fields) {
    fields.push_back({{"key", f.key}, {"kind", ValueKindName(f.kind)}});
  }
  json doc = {{"fields", fields},
              {"max_string_len", schema.max_string_len},
              {"max_number_len", schema.max_number_len}};
  return doc.dump();
}

KeyVariant ParseVariant(std::string_view json_text, const SchemaSpec& schema) {
  std::string field;
  std::string wording;
  try {
    json doc = json::parse(json_text);
    field = doc.at("field").get<std::string>();
    wording = doc.at("wording").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("variant: ") + e.what());
  }
  auto index = schema.FindField(field);
  if (!index) throw ValidationError("variant targets unknown field '" + field + "'");
  KeyVariant variant{*index, field, wording};
  ApplyVariant(schema, variant);
  return variant;
}

KeyVariant LoadVariant(const std::filesystem::path& path, const SchemaSpec& schema) {
  return ParseVariant(ReadFile(path), schema);
}

std::string VariantToJson(const KeyVariant& variant) {
  return json{{"field", variant.canonical_key}, {"wording", variant.wording}}.dump();
}

KeyVariant IdentityVariant(const SchemaSpec& schema, std::size_t field_index) {
  if (field_index >= schema.fields.size()) throw ValidationError("field index out of range");
  const std::string& key = schema.fields[field_index].key;
  return KeyVariant{field_index, key, key};
}

SchemaSpec ApplyVariant(const SchemaSpec& schema, const KeyVariant& variant) {
  if (variant.target_field_index >= schema.fields.size()) {
    throw ValidationError("variant field index " + std::to_string(variant.target_field_index) +
                          " out of range");
  }
  if (!IsValidKey(variant.wording)) {
    throw ValidationError("wording '" + variant.wording + "' is outside the [A-Za-z0-9_]+ charset");
  }
  SchemaSpec out = schema;
  out.fields[variant.target_field_index].key = variant.wording;
  out.Validate();
  return out;
}

bool StructurallyEquivalent(const SchemaSpec& a, const SchemaSpec& b) {
  if (a.fields.size() != b.fields.size()) return false;
  if (a.max_string_len != b.max_string_len || a.max_number_len != b.max_number_len) return false;
  for (std::size_t i = 0; i < a.fields.size(); ++i) {
    if (a.fields[i].kind != b.fields[i].kind) return false;
  }
  return true;
}

}  // namespace cdtax
