/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/channels.h
 * \brief The 2x2 prompt/key placement harness: cell inputs, matrix runs, effects and the
 *  sensitivity map.
 */
#ifndef CDTAX_CHANNELS_H_
#define CDTAX_CHANNELS_H_

#include <cdtax/grammar.h>
#include <cdtax/lm.h>
#include <cdtax/projection.h>
#include <cdtax/vocab.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdtax {

/*! \brief c_p: instructional wording in the prompt; c_s: instructional key enforced by the decoder. */
struct PlacementSetting {
  int c_p = 0;
  int c_s = 0;

  bool operator==(const PlacementSetting&) const = default;
};

/*! \brief None, Key-only, Prompt-only, Both; the order used everywhere a cell array appears. */
inline constexpr std::array<PlacementSetting, 4> kPlacementSettings = {
    PlacementSetting{0, 0}, PlacementSetting{0, 1}, PlacementSetting{1, 0}, PlacementSetting{1, 1}};

/*! \brief "none", "key_only", "prompt_only" or "both"; also the cell directory name. */
const char* SettingName(PlacementSetting setting);
/*! \brief "00", "01", "10" or "11" (c_p then c_s). */
std::string SettingCode(PlacementSetting setting);

struct BackendSpec {
  std::string type;  ///< tabular, ngram or remote
  std::filesystem::path path;
  std::string url;
};

struct ExperimentItem {
  std::string id;
  std::vector<TokenId> prompt_ids;
  std::string gold;
};

inline constexpr TokenId kPlaceholderId = -1;

/*!
 * \brief A resolved experiment. The channel prompt is prompt_template with its single
 *  placeholder replaced by the neutral or instructional description; each item's prompt ids are
 *  appended after it.
 */
struct ExperimentConfig {
  Vocabulary vocab;
  SchemaSpec schema;
  KeyVariant neutral;
  KeyVariant instructional;
  std::vector<TokenId> prompt_template;
  std::vector<TokenId> neutral_description;
  std::optional<std::vector<TokenId>> instructional_description;
  BackendSpec backend;
  std::vector<ExperimentItem> items;
  DecodePolicy::Kind policy = DecodePolicy::Kind::kGreedy;
  std::uint64_t seed = 0;
  std::size_t max_steps = 256;
  std::string metric = "exact_answer";
  std::string model_label = "model";
  std::string benchmark_label = "benchmark";

  std::size_t placeholder_index() const;
};

/*!
 * \brief Parses the experiment document. Relative file references resolve against base_dir.
 * \throws ParseError, ConfigError or ValidationError.
 */
ExperimentConfig ParseExperimentConfig(std::string_view json_text, const std::filesystem::path& base_dir);
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);

struct CellInputs {
  std::vector<TokenId> prompt_ids;  ///< channel prompt, before any item ids
  SchemaSpec enforced_schema;
  KeyVariant variant;  ///< wording the decoder enforces in this cell
};

/*! \throws ConfigError when the setting needs a template the config lacks. */
CellInputs BuildCellInputs(const ExperimentConfig& config, PlacementSetting setting);

/*!
 * \brief Backend for a spec. For remote backends the CDTAX_BACKEND_URL environment variable, when
 *  set, replaces the configured url.
 */
std::shared_ptr<const LanguageModel> MakeBackend(const BackendSpec& spec, const Vocabulary& vocab);

/*! \brief Stable per-item seed from the master seed and item id; identical in all four cells. */
std::uint64_t DeriveItemSeed(std::uint64_t master_seed, std::string_view item_id);

struct ItemRecord {
  std::size_t index = 0;
  std::string item_id;
  std::uint64_t seed = 0;
  std::vector<TokenId> output_ids;
  std::string output;
  bool valid = false;
  bool correct = false;
  double score = 0.0;  ///< bounded metric in [0, 1]
  double cumulative_tax = 0.0;
  bool truncated = false;
  std::string error;  ///< non-empty when the decode hit zero valid mass
  std::string trace;  ///< trace path relative to the cell directory

  bool operator==(const ItemRecord&) const = default;
};

struct CellResult {
  PlacementSetting setting;
  double score = 0.0;  ///< 100 x mean item score
  std::vector<ItemRecord> items;

  bool operator==(const CellResult&) const = default;
};

struct EffectReport {
  double delta_key = 0.0;
  double delta_prompt = 0.0;
  double delta_both = 0.0;
  double delta_int = 0.0;  ///< computed as delta_both - delta_key - delta_prompt
};

EffectReport Effects(double r00, double r01, double r10, double r11);

struct PlacementScores {
  std::string model;
  std::string benchmark;
  double r00 = 0.0;
  double r01 = 0.0;
  double r10 = 0.0;
  double r11 = 0.0;

  EffectReport effects() const { return Effects(r00, r01, r10, r11); }
};

struct MatrixOptions {
  std::filesystem::path out_dir = "results";
  bool resume = false;
  std::size_t jobs = 1;
};

struct MatrixResult {
  std::array<CellResult, 4> cells;  ///< in kPlacementSettings order
  PlacementScores scores;
  std::size_t executed_items = 0;  ///< decodes run by this call (fewer than 4 x items on resume)
};

/*!
 * \brief Runs all four cells over the same items and writes `<out>/<cell>/items.jsonl`,
 *  `<out>/<cell>/traces/`, `<out>/<cell>/manifest.json`, `<out>/matrix.json` and
 *  `<out>/effects.csv`.
 * \throws BackendError after persisting the completed prefix of the failing cell; a later call
 *  with resume set continues from the first missing item.
 */
MatrixResult RunMatrix(const ExperimentConfig& config, const LanguageModel& model, const MatrixOptions& options);

std::string MatrixToJson(const MatrixResult& result);
/*! \brief Accepts one matrix document or `{"matrices": [...]}`. */
std::vector<PlacementScores> ParsePlacementScores(std::string_view json_text);

/*! \brief `model,benchmark,r00,r01,r10,r11,delta_key,delta_prompt,delta_both,delta_int`. */
std::string EffectsCsv(const std::vector<PlacementScores>& rows);

enum class InteractionKind { kSynergy, kAdditive, kRedundancy };
/*! \brief "synergy", "additive" or "redundancy/conflict". */
const char* InteractionKindName(InteractionKind kind);
/*! \brief Additive when |delta_int| <= epsilon. */
InteractionKind ClassifyInteraction(double delta_int, double epsilon);

struct SensitivityRow {
  std::string model;
  std::string benchmark;
  EffectReport effects;
  InteractionKind annotation = InteractionKind::kAdditive;
};

inline constexpr double kDefaultAdditiveEpsilon = 0.5;

/*! \throws ValidationError on an empty list or a repeated (model, benchmark) pair. */
std::vector<SensitivityRow> SensitivityMap(const std::vector<PlacementScores>& rows,
                                           double epsilon = kDefaultAdditiveEpsilon);
/*! \brief `model,benchmark,delta_key,delta_prompt,delta_int,annotation`, two decimals. */
std::string SensitivityMapCsv(const std::vector<SensitivityRow>& rows);
std::string SensitivityMapJson(const std::vector<SensitivityRow>& rows, double epsilon);

/*! \brief Fixed two-decimal rendering; never prints a negative zero. */
std::string FormatPoints(double value);

struct ControlReport {
  bool prompts_differ_only_in_placeholder = false;
  bool automata_differ_only_in_key_literal = false;
  std::string detail;  ///< first failing check, empty when both hold

  bool ok() const { return prompts_differ_only_in_placeholder && automata_differ_only_in_key_literal; }
};

/*! \brief Byte-level checks that the four cells differ only where the placement says they should. */
ControlReport CheckControls(const ExperimentConfig& config);

}  // namespace cdtax

#endif  // CDTAX_CHANNELS_H_
