/*!
 *  Copyright (c) 2026 by Contributors
 * \file channels.cc
 */
#include <cdtax/channels.h>
#include <cdtax/error.h>
#include <cdtax/io_util.h>
#include <cdtax/metrics.h>
#include <cdtax/remote_lm.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cdtax {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path Resolve(const fs::path& base_dir, const std::string& ref) {
  fs::path p(ref);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<TokenId> IdsFromJson(const json& value, const char* what) {
  if (!value.is_array()) throw ConfigError(std::string(what) + " must be an array of token ids");
  std::vector<TokenId> ids;
  for (const json& v : value) {
    if (!v.is_number_integer()) throw ConfigError(std::string(what) + " must contain integers");
    ids.push_back(v.get<TokenId>());
  }
  return ids;
}

void CheckIds(const Vocabulary& vocab, const std::vector<TokenId>& ids, const char* what) {
  for (TokenId id : ids) {
    if (!vocab.Contains(id)) {
      throw ValidationError(std::string(what) + " contains id " + std::to_string(id) + " outside the vocabulary");
    }
  }
}

SchemaSpec SchemaFrom(const json& value, const fs::path& base_dir) {
  if (value.is_string()) return LoadSchema(Resolve(base_dir, value.get<std::string>()));
  if (value.is_object()) return ParseSchema(value.dump());
  throw ConfigError("schema must be a path or an inline object");
}

KeyVariant VariantFrom(const json& value, const SchemaSpec& schema, const fs::path& base_dir) {
  if (value.is_string()) return LoadVariant(Resolve(base_dir, value.get<std::string>()), schema);
  if (value.is_object()) return ParseVariant(value.dump(), schema);
  throw ConfigError("variants must be paths or inline objects");
}

template <typename T>
T Get(const json& doc, const char* key, T fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

std::string CsvField(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/*! \brief Half-open differing span [lo, hi) of a against b after trimming common ends. */
std::pair<std::size_t, std::size_t> DiffSpan(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  std::size_t lo = 0;
  while (lo < a.size() && lo < b.size() && a[lo] == b[lo]) ++lo;
  std::size_t tail = 0;
  while (tail < a.size() - lo && tail < b.size() - lo && a[a.size() - 1 - tail] == b[b.size() - 1 - tail]) ++tail;
  return {lo, a.size() - tail};
}

json RecordToJson(const ItemRecord& r) {
  json j = {{"index", r.index},
            {"item_id", r.item_id},
            {"seed", r.seed},
            {"output_ids", r.output_ids},
            {"output", r.output},
            {"valid", r.valid},
            {"correct", r.correct},
            {"score", r.score},
            {"cumulative_tax", r.cumulative_tax},
            {"truncated", r.truncated},
            {"trace", r.trace}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

ItemRecord RecordFromJson(const json& j, const Vocabulary& vocab) {
  ItemRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.item_id = j.at("item_id").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.output_ids = j.at("output_ids").get<std::vector<TokenId>>();
  r.output = Detokenize(vocab, r.output_ids);
  r.valid = j.at("valid").get<bool>();
  r.correct = j.at("correct").get<bool>();
  r.score = j.at("score").get<double>();
  r.cumulative_tax = j.at("cumulative_tax").get<double>();
  r.truncated = j.at("truncated").get<bool>();
  r.trace = j.at("trace").get<std::string>();
  r.error = j.value("error", std::string());
  return r;
}

std::string Dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

void PersistCell(const fs::path& cell_dir, const std::vector<ItemRecord>& records, std::size_t total,
                 const std::string& error) {
  std::string lines;
  for (const ItemRecord& r : records) lines += Dump(RecordToJson(r)) + "\n";
  WriteFileAtomic(cell_dir / "items.jsonl", lines);
  json manifest = {{"status", records.size() == total && error.empty() ? "complete" : "partial"},
                   {"completed", records.size()},
                   {"total", total}};
  if (!error.empty()) manifest["error"] = error;
  WriteFileAtomic(cell_dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<ItemRecord> LoadCellProgress(const fs::path& cell_dir, const ExperimentConfig& config) {
  std::vector<ItemRecord> records;
  if (!fs::exists(cell_dir / "items.jsonl")) return records;
  std::istringstream in(ReadFile(cell_dir / "items.jsonl"));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ItemRecord r;
    try {
      r = RecordFromJson(json::parse(line), config.vocab);
    } catch (const json::exception& e) {
      throw ParseError("resume state " + (cell_dir / "items.jsonl").string() + ": " + e.what());
    }
    if (r.index != records.size() || r.index >= config.items.size() || config.items[r.index].id != r.item_id) {
      throw ConfigError("resume state in " + cell_dir.string() + " does not match the config's item list");
    }
    records.push_back(std::move(r));
  }
  return records;
}

ItemRecord RunItem(const ExperimentConfig& config, const LanguageModel& model, const CompiledGrammar& grammar,
                   const CellInputs& inputs, std::size_t index, const fs::path& cell_dir) {
  const ExperimentItem& item = config.items[index];
  ItemRecord r;
  r.index = index;
  r.item_id = item.id;
  r.seed = DeriveItemSeed(config.seed, item.id);
  std::vector<TokenId> prompt = inputs.prompt_ids;
  prompt.insert(prompt.end(), item.prompt_ids.begin(), item.prompt_ids.end());
  Metric metric = ParseMetric(config.metric, config.schema, item.gold);
  DecodeTrace trace;
  try {
    trace = DecodeConstrained(model, grammar, config.vocab, prompt, DecodePolicy{config.policy, r.seed},
                              config.max_steps);
  } catch (const ZeroMassError& e) {
    r.error = e.what();
    return r;
  }
  r.output_ids = trace.output_ids;
  r.output = Detokenize(config.vocab, r.output_ids);
  r.cumulative_tax = trace.cumulative_tax;
  r.truncated = trace.truncated;
  r.trace = "traces/item-" + std::to_string(index) + ".jsonl";
  WriteFileAtomic(cell_dir / r.trace, trace.ToJsonLines());
  if (!r.truncated) {
    auto canonical = Canonicalize(r.output, inputs.variant, config.schema);
    r.valid = canonical.has_value();
    if (canonical) r.score = metric(*canonical);
  }
  r.correct = r.score >= 1.0;
  return r;
}

CellResult RunCell(const ExperimentConfig& config, const LanguageModel& model, PlacementSetting setting,
                   const MatrixOptions& options, std::size_t* executed) {
  const fs::path cell_dir = options.out_dir / SettingName(setting);
  const std::size_t n = config.items.size();
  std::vector<ItemRecord> records;
  if (options.resume) {
    records = LoadCellProgress(cell_dir, config);
  } else {
    fs::remove_all(cell_dir);
  }
  fs::create_directories(cell_dir / "traces");

  CellInputs inputs = BuildCellInputs(config, setting);
  CompiledGrammar grammar = CompiledGrammar::Compile(inputs.enforced_schema, config.vocab);
  const std::size_t jobs = std::max<std::size_t>(1, options.jobs);

  while (records.size() < n) {
    const std::size_t begin = records.size();
    const std::size_t end = std::min(n, begin + jobs);
    std::vector<std::optional<ItemRecord>> done(end - begin);
    std::vector<std::exception_ptr> failed(end - begin);
    auto work = [&](std::size_t i) {
      try {
        done[i] = RunItem(config, model, grammar, inputs, begin + i, cell_dir);
      } catch (...) {
        failed[i] = std::current_exception();
      }
    };
    if (end - begin == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t i = 0; i < end - begin; ++i) threads.emplace_back(work, i);
      for (std::thread& t : threads) t.join();
    }
    for (std::size_t i = 0; i < end - begin; ++i) {
      if (failed[i]) {
        std::string message = "item " + std::to_string(begin + i) + " failed";
        try {
          std::rethrow_exception(failed[i]);
        } catch (const std::exception& e) {
          message = e.what();
        }
        PersistCell(cell_dir, records, n, message);
        std::rethrow_exception(failed[i]);
      }
      records.push_back(std::move(*done[i]));
      ++*executed;
    }
    PersistCell(cell_dir, records, n, "");
  }
  PersistCell(cell_dir, records, n, "");

  CellResult cell;
  cell.setting = setting;
  double total = 0.0;
  for (const ItemRecord& r : records) total += r.score;
  cell.score = 100.0 * total / static_cast<double>(n);
  cell.items = std::move(records);
  return cell;
}

}  // namespace

const char* SettingName(PlacementSetting setting) {
  static constexpr const char* kNames[2][2] = {{"none", "key_only"}, {"prompt_only", "both"}};
  return kNames[setting.c_p != 0][setting.c_s != 0];
}

std::string SettingCode(PlacementSetting setting) {
  return std::string(1, setting.c_p ? '1' : '0') + (setting.c_s ? '1' : '0');
}

std::size_t ExperimentConfig::placeholder_index() const {
  auto it = std::find(prompt_template.begin(), prompt_template.end(), kPlaceholderId);
  if (it == prompt_template.end()) throw ConfigError("prompt template has no placeholder");
  return static_cast<std::size_t>(it - prompt_template.begin());
}

ExperimentConfig ParseExperimentConfig(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("experiment config must be a JSON object");
  for (const char* key : {"vocab", "schema", "neutral_variant", "instructional_variant", "prompt", "backend", "items"}) {
    if (!doc.contains(key)) throw ConfigError(std::string("experiment config lacks '") + key + "'");
  }

  ExperimentConfig config;
  config.vocab = LoadVocabulary(Resolve(base_dir, Get<std::string>(doc, "vocab", "")));
  config.schema = SchemaFrom(doc["schema"], base_dir);
  config.neutral = VariantFrom(doc["neutral_variant"], config.schema, base_dir);
  config.instructional = VariantFrom(doc["instructional_variant"], config.schema, base_dir);
  if (config.neutral.target_field_index != config.instructional.target_field_index) {
    throw ValidationError("neutral and instructional variants must target the same field");
  }

  const json& prompt = doc["prompt"];
  if (!prompt.is_object() || !prompt.contains("template") || !prompt.contains("neutral_description")) {
    throw ConfigError("prompt needs 'template' and 'neutral_description'");
  }
  config.prompt_template = IdsFromJson(prompt["template"], "prompt template");
  if (std::count(config.prompt_template.begin(), config.prompt_template.end(), kPlaceholderId) != 1) {
    throw ConfigError("prompt template must contain exactly one placeholder (-1)");
  }
  std::vector<TokenId> fixed;
  for (TokenId id : config.prompt_template) {
    if (id != kPlaceholderId) fixed.push_back(id);
  }
  CheckIds(config.vocab, fixed, "prompt template");
  config.neutral_description = IdsFromJson(prompt["neutral_description"], "neutral_description");
  CheckIds(config.vocab, config.neutral_description, "neutral_description");
  if (prompt.contains("instructional_description")) {
    config.instructional_description = IdsFromJson(prompt["instructional_description"], "instructional_description");
    CheckIds(config.vocab, *config.instructional_description, "instructional_description");
  }

  const json& backend = doc["backend"];
  if (!backend.is_object()) throw ConfigError("backend must be an object");
  config.backend.type = Get<std::string>(backend, "type", "");
  if (backend.contains("path")) config.backend.path = Resolve(base_dir, Get<std::string>(backend, "path", ""));
  config.backend.url = Get<std::string>(backend, "url", "");

  if (!doc["items"].is_array()) throw ConfigError("items must be an array");
  std::set<std::string> seen;
  for (const json& entry : doc["items"]) {
    ExperimentItem item;
    item.id = entry.contains("id") ? Get<std::string>(entry, "id", "") : std::to_string(config.items.size());
    if (!seen.insert(item.id).second) throw ValidationError("duplicate item id '" + item.id + "'");
    item.prompt_ids = IdsFromJson(entry.value("prompt_ids", json::array()), "item prompt_ids");
    CheckIds(config.vocab, item.prompt_ids, "item prompt_ids");
    if (entry.contains("gold")) {
      const json& gold = entry["gold"];
      item.gold = gold.is_string() ? gold.get<std::string>() : gold.dump();
    }
    config.items.push_back(std::move(item));
  }
  if (config.items.empty()) throw ValidationError("experiment config has an empty item list");

  std::string policy = Get<std::string>(doc, "policy", "greedy");
  if (policy == "greedy") {
    config.policy = DecodePolicy::Kind::kGreedy;
  } else if (policy == "sample") {
    config.policy = DecodePolicy::Kind::kSample;
  } else {
    throw ConfigError("unknown policy '" + policy + "'");
  }
  config.seed = Get<std::uint64_t>(doc, "seed", 0);
  config.max_steps = Get<std::size_t>(doc, "max_steps", config.max_steps);
  config.metric = Get<std::string>(doc, "metric", config.metric);
  config.model_label = Get<std::string>(doc, "model", config.model_label);
  config.benchmark_label = Get<std::string>(doc, "benchmark", config.benchmark_label);
  ParseMetric(config.metric, config.schema, std::string("0"));
  return config;
}

ExperimentConfig LoadExperimentConfig(const fs::path& path) {
  return ParseExperimentConfig(ReadFile(path), path.parent_path());
}

CellInputs BuildCellInputs(const ExperimentConfig& config, PlacementSetting setting) {
  const std::vector<TokenId>* description = &config.neutral_description;
  if (setting.c_p) {
    if (!config.instructional_description) throw ConfigError("config has no instructional prompt description");
    description = &*config.instructional_description;
  }
  CellInputs inputs;
  const std::size_t at = config.placeholder_index();
  inputs.prompt_ids.assign(config.prompt_template.begin(), config.prompt_template.begin() + at);
  inputs.prompt_ids.insert(inputs.prompt_ids.end(), description->begin(), description->end());
  inputs.prompt_ids.insert(inputs.prompt_ids.end(), config.prompt_template.begin() + at + 1,
                           config.prompt_template.end());
  inputs.variant = setting.c_s ? config.instructional : config.neutral;
  inputs.enforced_schema = ApplyVariant(config.schema, inputs.variant);
  return inputs;
}

std::shared_ptr<const LanguageModel> MakeBackend(const BackendSpec& spec, const Vocabulary& vocab) {
  std::shared_ptr<const LanguageModel> model;
  if (spec.type == "tabular") {
    model = std::make_shared<TabularLM>(TabularLM::Load(spec.path));
  } else if (spec.type == "ngram") {
    model = std::make_shared<NGramLM>(LoadNGram(spec.path, vocab.size()));
  } else if (spec.type == "remote") {
    std::string url = spec.url;
    if (const char* env = std::getenv("CDTAX_BACKEND_URL"); env != nullptr && *env != '\0') url = env;
    if (url.empty()) throw ConfigError("remote backend needs a url");
    model = std::make_shared<RemoteLM>(url, vocab.fingerprint(), vocab.size());
  } else {
    throw ConfigError("unknown backend type '" + spec.type + "'");
  }
  if (model->vocab_size() != vocab.size()) {
    throw ValidationError("backend vocabulary size " + std::to_string(model->vocab_size()) +
                          " does not match the vocabulary (" + std::to_string(vocab.size()) + ")");
  }
  return model;
}

std::uint64_t DeriveItemSeed(std::uint64_t master_seed, std::string_view item_id) {
  std::string digest = Sha256Hex(std::to_string(master_seed) + ":" + std::string(item_id));
  return std::stoull(digest.substr(0, 16), nullptr, 16);
}

EffectReport Effects(double r00, double r01, double r10, double r11) {
  EffectReport e;
  e.delta_key = r01 - r00;
  e.delta_prompt = r10 - r00;
  e.delta_both = r11 - r00;
  e.delta_int = e.delta_both - e.delta_key - e.delta_prompt;
  return e;
}

MatrixResult RunMatrix(const ExperimentConfig& config, const LanguageModel& model, const MatrixOptions& options) {
  if (config.items.empty()) throw ValidationError("experiment has no items");
  if (model.vocab_size() != config.vocab.size()) throw ValidationError("backend vocabulary size mismatch");
  fs::create_directories(options.out_dir);
  MatrixResult result;
  for (std::size_t c = 0; c < kPlacementSettings.size(); ++c) {
    result.cells[c] = RunCell(config, model, kPlacementSettings[c], options, &result.executed_items);
  }
  result.scores = PlacementScores{config.model_label, config.benchmark_label, result.cells[0].score,
                                  result.cells[1].score, result.cells[2].score, result.cells[3].score};
  WriteFileAtomic(options.out_dir / "matrix.json", MatrixToJson(result));
  WriteFileAtomic(options.out_dir / "effects.csv", EffectsCsv({result.scores}));
  return result;
}

std::string MatrixToJson(const MatrixResult& result) {
  const PlacementScores& s = result.scores;
  EffectReport e = s.effects();
  json cells = json::object();
  for (const CellResult& cell : result.cells) {
    std::size_t valid = 0;
    std::size_t correct = 0;
    double tax = 0.0;
    for (const ItemRecord& r : cell.items) {
      valid += r.valid;
      correct += r.correct;
      tax += r.cumulative_tax;
    }
    cells[SettingName(cell.setting)] = {{"setting", SettingCode(cell.setting)},
                                        {"score", cell.score},
                                        {"items", cell.items.size()},
                                        {"valid", valid},
                                        {"correct", correct},
                                        {"mean_cumulative_tax", cell.items.empty() ? 0.0 : tax / cell.items.size()}};
  }
  json doc = {{"format", "cdtax.matrix.v1"},
              {"model", s.model},
              {"benchmark", s.benchmark},
              {"R", {{"00", s.r00}, {"01", s.r01}, {"10", s.r10}, {"11", s.r11}}},
              {"effects",
               {{"delta_key", e.delta_key},
                {"delta_prompt", e.delta_prompt},
                {"delta_both", e.delta_both},
                {"delta_int", e.delta_int}}},
              {"cells", cells}};
  return doc.dump(2) + "\n";
}

std::vector<PlacementScores> ParsePlacementScores(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("matrix: ") + e.what());
  }
  auto one = [](const json& m) {
    try {
      const json& r = m.at("R");
      return PlacementScores{m.value("model", std::string("model")), m.value("benchmark", std::string("benchmark")),
                             r.at("00").get<double>(), r.at("01").get<double>(), r.at("10").get<double>(),
                             r.at("11").get<double>()};
    } catch (const json::exception& e) {
      throw ValidationError(std::string("matrix entry: ") + e.what());
    }
  };
  std::vector<PlacementScores> out;
  if (doc.is_object() && doc.contains("matrices")) {
    if (!doc["matrices"].is_array()) throw ValidationError("'matrices' must be an array");
    for (const json& m : doc["matrices"]) out.push_back(one(m));
  } else {
    out.push_back(one(doc));
  }
  if (out.empty()) throw ValidationError("no matrices to report");
  return out;
}

std::string FormatPoints(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  std::string out(buf);
  if (out == "-0.00") out = "0.00";
  return out;
}

std::string EffectsCsv(const std::vector<PlacementScores>& rows) {
  std::string out = "model,benchmark,r00,r01,r10,r11,delta_key,delta_prompt,delta_both,delta_int\n";
  for (const PlacementScores& s : rows) {
    EffectReport e = s.effects();
    out += CsvField(s.model) + "," + CsvField(s.benchmark);
    for (double v : {s.r00, s.r01, s.r10, s.r11, e.delta_key, e.delta_prompt, e.delta_both, e.delta_int}) {
      out += "," + FormatPoints(v);
    }
    out += "\n";
  }
  return out;
}

const char* InteractionKindName(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::kSynergy:
      return "synergy";
    case InteractionKind::kAdditive:
      return "additive";
    case InteractionKind::kRedundancy:
      return "redundancy/conflict";
  }
  return "additive";
}

InteractionKind ClassifyInteraction(double delta_int, double epsilon) {
  if (delta_int > epsilon) return InteractionKind::kSynergy;
  if (delta_int < -epsilon) return InteractionKind::kRedundancy;
  return InteractionKind::kAdditive;
}

std::vector<SensitivityRow> SensitivityMap(const std::vector<PlacementScores>& rows, double epsilon) {
  if (rows.empty()) throw ValidationError("sensitivity map needs at least one report");
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<SensitivityRow> out;
  for (const PlacementScores& s : rows) {
    if (!seen.emplace(s.model, s.benchmark).second) {
      throw ValidationError("duplicate report for (" + s.model + ", " + s.benchmark + ")");
    }
    EffectReport e = s.effects();
    out.push_back(SensitivityRow{s.model, s.benchmark, e, ClassifyInteraction(e.delta_int, epsilon)});
  }
  return out;
}

std::string SensitivityMapCsv(const std::vector<SensitivityRow>& rows) {
  std::string out = "model,benchmark,delta_key,delta_prompt,delta_int,annotation\n";
  for (const SensitivityRow& r : rows) {
    out += CsvField(r.model) + "," + CsvField(r.benchmark) + "," + FormatPoints(r.effects.delta_key) + "," +
           FormatPoints(r.effects.delta_prompt) + "," + FormatPoints(r.effects.delta_int) + "," +
           InteractionKindName(r.annotation) + "\n";
  }
  return out;
}

std::string SensitivityMapJson(const std::vector<SensitivityRow>& rows, double epsilon) {
  json out = {{"epsilon", epsilon}, {"columns", {"delta_key", "delta_prompt", "delta_int"}}, {"rows", json::array()}};
  for (const SensitivityRow& r : rows) {
    out["rows"].push_back({{"model", r.model},
                           {"benchmark", r.benchmark},
                           {"delta_key", r.effects.delta_key},
                           {"delta_prompt", r.effects.delta_prompt},
                           {"delta_both", r.effects.delta_both},
                           {"delta_int", r.effects.delta_int},
                           {"annotation", InteractionKindName(r.annotation)}});
  }
  return out.dump(2) + "\n";
}

ControlReport CheckControls(const ExperimentConfig& config) {
  ControlReport report;
  std::array<CellInputs, 4> inputs;
  for (std::size_t c = 0; c < 4; ++c) inputs[c] = BuildCellInputs(config, kPlacementSettings[c]);

  // Prompts: equal across c_s; across c_p the difference sits inside the placeholder span.
  report.prompts_differ_only_in_placeholder = true;
  const std::size_t at = config.placeholder_index();
  for (std::size_t s = 0; s < 2 && report.prompts_differ_only_in_placeholder; ++s) {
    const auto& p0 = inputs[s].prompt_ids;
    const auto& p1 = inputs[2 + s].prompt_ids;
    if (inputs[1 - s].prompt_ids != p0 || inputs[3 - s].prompt_ids != p1) {
      report.prompts_differ_only_in_placeholder = false;
      report.detail = "prompt ids change with the enforced key";
      break;
    }
    auto [lo0, hi0] = DiffSpan(p0, p1);
    auto [lo1, hi1] = DiffSpan(p1, p0);
    const std::size_t end0 = at + config.neutral_description.size();
    const std::size_t end1 = at + config.instructional_description->size();
    bool inside0 = lo0 >= hi0 || (lo0 >= at && hi0 <= end0);
    bool inside1 = lo1 >= hi1 || (lo1 >= at && hi1 <= end1);
    if (!inside0 || !inside1) {
      report.prompts_differ_only_in_placeholder = false;
      report.detail = "prompt ids differ outside the placeholder span";
    }
  }

  // Automata: equal across c_p; across c_s they differ only in the target key literal.
  std::array<ByteAutomaton, 4> automata;
  for (std::size_t c = 0; c < 4; ++c) automata[c] = ByteAutomaton::Build(inputs[c].enforced_schema);
  const std::size_t field = config.neutral.target_field_index;
  bool same_across_prompt = automata[0] == automata[2] && automata[1] == automata[3];
  bool key_only = AutomataDifferOnlyInKeyLiteral(automata[0], automata[1], field) &&
                  AutomataDifferOnlyInKeyLiteral(automata[2], automata[3], field);
  bool rest_identical = true;
  for (std::size_t c = 1; c < 4; ++c) {
    SchemaSpec a = inputs[0].enforced_schema;
    SchemaSpec b = inputs[c].enforced_schema;
    a.fields[field].key.clear();
    b.fields[field].key.clear();
    rest_identical = rest_identical && a == b;
  }
  report.automata_differ_only_in_key_literal = same_across_prompt && key_only && rest_identical;
  if (!report.automata_differ_only_in_key_literal && report.detail.empty()) {
    report.detail = same_across_prompt ? "enforced automata differ outside the key literal"
                                       : "enforced automaton changes with the prompt";
  }
  return report;
}

}  // namespace cdtax
