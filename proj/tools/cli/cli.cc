/*!
 *  Copyright (c) 2026 by Contributors
 * \file cli.cc
 * \brief Subcommands: compile, decode, oracle, matrix, report, mock-server.
 */
#include "cli.h"

#include <cdtax/channels.h>
#include <cdtax/error.h>
#include <cdtax/grammar.h>
#include <cdtax/io_util.h>
#include <cdtax/lm.h>
#include <cdtax/metrics.h>
#include <cdtax/projection.h>
#include <cdtax/remote_lm.h>
#include <cdtax/vocab.h>

#include <charconv>
#include <csignal>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace cdtax::cli {

namespace {

using nlohmann::json;

std::vector<TokenId> ParseIdList(const std::string& text) {
  std::vector<TokenId> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string_view piece(text.data() + pos, comma - pos);
    while (!piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
    while (!piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
    TokenId id = 0;
    auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), id);
    if (piece.empty() || ec != std::errc() || ptr != piece.data() + piece.size()) {
      throw ConfigError("malformed id list '" + text + "'");
    }
    ids.push_back(id);
    pos = comma + 1;
  }
  return ids;
}

void CheckIds(const Vocabulary& vocab, const std::vector<TokenId>& ids, const char* flag) {
  for (TokenId id : ids) {
    if (!vocab.Contains(id)) throw ValidationError(std::string(flag) + " id " + std::to_string(id) + " is outside the vocabulary");
  }
}

/*! \brief `tabular:<path>`, `ngram:<path>` or `remote:<url>`. */
BackendSpec ParseBackendSpec(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("backend must look like tabular:<path>, ngram:<path> or remote:<url>");
  BackendSpec spec;
  spec.type = text.substr(0, colon);
  std::string rest = text.substr(colon + 1);
  if (spec.type == "remote") {
    spec.url = rest;
  } else {
    spec.path = rest;
  }
  return spec;
}

void Emit(std::ostream& out, const std::optional<std::string>& path, const std::string& text) {
  if (path) {
    WriteFileAtomic(*path, text);
  } else {
    out << text;
  }
}

json DistributionSummary(const ContinuationDistribution& d) {
  return {{"support", d.size()},
          {"completed_mass", d.completed_mass()},
          {"truncation_mass", d.truncation_mass()},
          {"max_len", d.max_len()}};
}

json VariantJson(const VariantDiagnostics& d) {
  return {{"wording", d.variant.wording},
          {"value_prefix_ids", d.value_prefix.generated_ids},
          {"T_val", d.tax.t_val},
          {"B_k", d.tax.bound},
          {"tv", d.tax.tv},
          {"expected_tax", d.expected_tax},
          {"R_P", d.r_p.value},
          {"R_Q", d.r_q.value}};
}

struct CompileArgs {
  std::string schema;
  std::string variant;
  std::string vocab;
  std::optional<std::string> out;
};

int CmdCompile(const CompileArgs& a, std::ostream& out, std::ostream& err) {
  Vocabulary vocab = LoadVocabulary(a.vocab);
  SchemaSpec schema = LoadSchema(a.schema);
  if (!a.variant.empty()) schema = ApplyVariant(schema, LoadVariant(a.variant, schema));
  CompiledGrammar grammar = CompiledGrammar::Compile(schema, vocab);
  GrammarStats stats = grammar.stats();
  err << "compiled: states=" << stats.states << " transitions=" << stats.transitions
      << " token_reachable_states=" << stats.token_reachable_states << "\n";
  Emit(out, a.out, grammar.Serialize() + "\n");
  return kOk;
}

struct DecodeArgs {
  std::string grammar;
  std::string vocab;
  std::string backend;
  std::string prompt_ids;
  std::string policy = "greedy";
  std::uint64_t seed = 0;
  std::size_t max_steps = 256;
  std::optional<std::string> trace;
};

int CmdDecode(const DecodeArgs& a, std::ostream& out, std::ostream& err) {
  Vocabulary vocab = LoadVocabulary(a.vocab);
  CompiledGrammar grammar = CompiledGrammar::Load(ReadFile(a.grammar), vocab);
  auto model = MakeBackend(ParseBackendSpec(a.backend), vocab);
  std::vector<TokenId> prompt = ParseIdList(a.prompt_ids);
  CheckIds(vocab, prompt, "--prompt-ids");
  DecodePolicy policy = a.policy == "sample" ? DecodePolicy::Sample(a.seed) : DecodePolicy::Greedy();
  DecodeTrace trace = DecodeConstrained(*model, grammar, vocab, prompt, policy, a.max_steps);
  if (a.trace) WriteFileAtomic(*a.trace, trace.ToJsonLines());
  std::string output = Detokenize(vocab, trace.output_ids);
  json doc = {{"output", output},
              {"output_ids", trace.output_ids},
              {"cumulative_tax", trace.cumulative_tax},
              {"steps", trace.steps.size()},
              {"truncated", trace.truncated}};
  out << doc.dump(-1, ' ', false, json::error_handler_t::replace) << "\n";
  err << "decoded " << trace.steps.size() << " steps, cumulative tax " << trace.cumulative_tax
      << (trace.truncated ? " (truncated)" : "") << "\n";
  return kOk;
}

struct OracleArgs {
  std::string grammar;
  std::string vocab;
  std::string backend;
  std::string prompt_ids;
  std::string prefix_ids;
  std::size_t max_len = 4;
  std::string metric;
  std::optional<std::string> gold;
  std::string variant_pair;
  std::string reasoning;
  std::size_t jobs = 1;
  double node_budget = kDefaultNodeBudget;
};

int CmdOracle(const OracleArgs& a, std::ostream& out, std::ostream& err) {
  Vocabulary vocab = LoadVocabulary(a.vocab);
  CompiledGrammar grammar = CompiledGrammar::Load(ReadFile(a.grammar), vocab);
  const SchemaSpec& schema = grammar.schema();
  auto model = MakeBackend(ParseBackendSpec(a.backend), vocab);
  Prefix prefix{ParseIdList(a.prompt_ids), ParseIdList(a.prefix_ids)};
  CheckIds(vocab, prefix.prompt_ids, "--prompt-ids");
  CheckIds(vocab, prefix.generated_ids, "--prefix-ids");
  EnumerationOptions options{a.max_len, a.node_budget, a.jobs};
  double estimate = EstimateEnumerationNodes(vocab.size(), a.max_len);
  if (estimate > options.node_budget) {
    throw BudgetError("enumeration would visit about " + std::to_string(estimate) + " nodes", estimate);
  }

  std::optional<Metric> metric;
  if (!a.metric.empty()) metric = ParseMetric(a.metric, schema, a.gold);

  json doc;
  if (!a.variant_pair.empty()) {
    auto comma = a.variant_pair.find(',');
    if (comma == std::string::npos) throw ConfigError("--variant-pair takes two files separated by a comma");
    KeyVariant k1 = LoadVariant(a.variant_pair.substr(0, comma), schema);
    KeyVariant k0 = LoadVariant(a.variant_pair.substr(comma + 1), schema);
    if (!metric) metric = ConstantMetric();
    VariantPairReport r = CompareVariants(*model, vocab, schema, k1, k0, prefix, options, *metric);
    doc = {{"metric", metric->name()},
           {"k1", VariantJson(r.k1)},
           {"k0", VariantJson(r.k0)},
           {"sufficient_condition", {{"holds", r.condition.holds}, {"margin", r.condition.margin}}},
           {"ordering_holds", r.ordering_holds}};
    err << "sufficient condition " << (r.condition.holds ? "holds" : "does not hold") << " (margin "
        << r.condition.margin << ")\n";
    out << doc.dump(2) << "\n";
    return kOk;
  }

  Prefix value_prefix = ExtendThroughForcedBytes(grammar, vocab, prefix);
  ContinuationDistribution p_bar = EnumerateContinuations(*model, vocab, value_prefix, options);
  ContinuationDistribution q_bar = EnumerateContinuations(*model, vocab, value_prefix, options, &grammar);
  TaxReport tax = Divergences(q_bar, p_bar);
  doc = {{"value_prefix_ids", value_prefix.generated_ids},
         {"p_bar", DistributionSummary(p_bar)},
         {"q_bar", DistributionSummary(q_bar)},
         {"T_val", tax.t_val},
         {"B_k", tax.bound},
         {"tv", tax.tv},
         {"expected_tax", ExpectedTax(*model, grammar, vocab, value_prefix, options)},
         {"kl_to_raw_path_mass", KlToRawPathMass(q_bar, p_bar)}};
  if (metric) {
    KeyVariant identity = IdentityVariant(schema, 0);
    doc["metric"] = metric->name();
    doc["R_P"] = ComputeExpectedScore(p_bar, vocab, identity, schema, *metric).value;
    doc["R_Q"] = ComputeExpectedScore(q_bar, vocab, identity, schema, *metric).value;
    if (!a.reasoning.empty()) {
      ReasoningPredicate predicate = ParseReasoningPredicate(a.reasoning, schema);
      ActivationDecomposition d = Decompose(q_bar, vocab, identity, schema, *metric, predicate);
      doc["activation"] = {{"A", d.activation},
                           {"mu_plus", d.mu_plus},
                           {"mu_minus", d.mu_minus},
                           {"plus_degenerate", d.plus_degenerate},
                           {"minus_degenerate", d.minus_degenerate},
                           {"reconstructed", d.reconstructed},
                           {"direct", d.direct}};
    }
  }
  err << "T_val " << tax.t_val << ", Pinsker bound " << tax.bound << ", tv " << tax.tv << "\n";
  out << doc.dump(2) << "\n";
  return kOk;
}

struct MatrixArgs {
  std::string config;
  bool resume = false;
  std::string out = "results";
  std::size_t jobs = 1;
};

int CmdMatrix(const MatrixArgs& a, std::ostream& out, std::ostream& err) {
  ExperimentConfig config = LoadExperimentConfig(a.config);
  ControlReport control = CheckControls(config);
  if (!control.ok()) throw ValidationError("placement controls failed: " + control.detail);
  auto model = MakeBackend(config.backend, config.vocab);
  MatrixResult result;
  try {
    result = RunMatrix(config, *model, MatrixOptions{a.out, a.resume, a.jobs});
  } catch (const BackendError&) {
    err << "backend failure; completed items are saved under " << a.out << ", rerun with --resume\n";
    throw;
  }
  const PlacementScores& s = result.scores;
  err << "R00=" << s.r00 << " R01=" << s.r01 << " R10=" << s.r10 << " R11=" << s.r11 << " ("
      << result.executed_items << " decodes)\n";
  out << MatrixToJson(result);
  return kOk;
}

struct ReportArgs {
  std::string matrix;
  std::string out_csv;
  std::optional<std::string> map_csv;
  std::optional<std::string> map_json;
  double epsilon = kDefaultAdditiveEpsilon;
};

int CmdReport(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<PlacementScores> rows = ParsePlacementScores(ReadFile(a.matrix));
  std::vector<SensitivityRow> map = SensitivityMap(rows, a.epsilon);
  std::filesystem::path base = std::filesystem::path(a.out_csv).parent_path();
  std::string map_csv = a.map_csv.value_or((base / "sensitivity_map.csv").string());
  std::string map_json = a.map_json.value_or((base / "sensitivity_map.json").string());
  WriteFileAtomic(a.out_csv, EffectsCsv(rows));
  WriteFileAtomic(map_csv, SensitivityMapCsv(map));
  WriteFileAtomic(map_json, SensitivityMapJson(map, a.epsilon));
  err << "wrote " << rows.size() << " rows to " << a.out_csv << ", " << map_csv << " and " << map_json << "\n";
  out << SensitivityMapCsv(map);
  return kOk;
}

struct MockArgs {
  std::string model;
  std::string vocab;
  std::string host = "127.0.0.1";
  int port = 8080;
};

MockLogprobsServer* g_server = nullptr;

int CmdMockServer(const MockArgs& a, std::ostream&, std::ostream& err) {
  Vocabulary vocab = LoadVocabulary(a.vocab);
  BackendSpec spec = ParseBackendSpec(a.model);
  if (spec.type == "remote") throw ConfigError("mock-server serves a local tabular or ngram model");
  MockLogprobsServer server(MakeBackend(spec, vocab), vocab.fingerprint());
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->Stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->Stop();
  });
  err << "serving " << kNextLogprobsPath << " on http://" << a.host << ":" << a.port << "\n";
  server.Listen(a.host, a.port);
  g_server = nullptr;
  return kOk;
}

int ExitCodeFor(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kBudget:
      return kBudget;
    case ErrorKind::kBackend:
      return kBackend;
    case ErrorKind::kIo:
      return kUsage;
    default:
      return kValidation;
  }
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grammar-constrained decoding with projection-tax diagnostics and placement experiments", "cdtax"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "cdtax 0.1.0");

  CompileArgs compile;
  auto* c = app.add_subcommand("compile", "Compile a schema (optionally reworded) against a vocabulary");
  c->add_option("--schema", compile.schema, "Schema JSON file")->required()->check(CLI::ExistingFile);
  c->add_option("--variant", compile.variant, "Key variant JSON file applied before compiling")->check(CLI::ExistingFile);
  c->add_option("--vocab", compile.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  c->add_option("--out", compile.out, "Write the grammar JSON here instead of stdout");

  DecodeArgs decode;
  auto* d = app.add_subcommand("decode", "Constrained decoding with a per-step tax trace");
  d->add_option("--grammar", decode.grammar, "Compiled grammar JSON")->required()->check(CLI::ExistingFile);
  d->add_option("--vocab", decode.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  d->add_option("--backend", decode.backend, "tabular:<path>, ngram:<path> or remote:<url>")->required();
  d->add_option("--prompt-ids", decode.prompt_ids, "Comma-separated prompt token ids");
  d->add_option("--policy", decode.policy, "greedy or sample")->check(CLI::IsMember({"greedy", "sample"}));
  d->add_option("--seed", decode.seed, "Sampling seed");
  d->add_option("--max-steps", decode.max_steps, "Step limit")->check(CLI::PositiveNumber);
  d->add_option("--trace", decode.trace, "Write the step trace (JSON lines) here");

  OracleArgs oracle;
  auto* o = app.add_subcommand("oracle", "Exact continuation-level tax, Pinsker and score diagnostics");
  o->add_option("--grammar", oracle.grammar, "Compiled grammar JSON (its schema is the canonical one)")
      ->required()
      ->check(CLI::ExistingFile);
  o->add_option("--vocab", oracle.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  o->add_option("--backend", oracle.backend, "tabular:<path>, ngram:<path> or remote:<url>")->required();
  o->add_option("--prompt-ids", oracle.prompt_ids, "Comma-separated prompt token ids");
  o->add_option("--prefix-ids", oracle.prefix_ids, "Comma-separated generated ids before the target key");
  o->add_option("--max-len", oracle.max_len, "Continuation length bound, eos included")->check(CLI::PositiveNumber);
  o->add_option("--metric", oracle.metric, "constant, exact_answer[@field] or reasoning_len:N[@field]");
  o->add_option("--gold", oracle.gold, "Gold answer for exact_answer");
  o->add_option("--variant-pair", oracle.variant_pair, "k1.json,k0.json: compare two key wordings");
  o->add_option("--reasoning", oracle.reasoning, "min_reasoning_len:N[@field]: report the activation decomposition");
  o->add_option("--jobs", oracle.jobs, "Worker threads")->check(CLI::PositiveNumber);
  o->add_option("--node-budget", oracle.node_budget, "Refuse enumerations estimated above this many nodes");

  MatrixArgs matrix;
  auto* m = app.add_subcommand("matrix", "Run the four placement cells of an experiment");
  m->add_option("--config", matrix.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  m->add_flag("--resume", matrix.resume, "Continue each cell from its saved items");
  m->add_option("--out", matrix.out, "Results directory");
  m->add_option("--jobs", matrix.jobs, "Items decoded concurrently")->check(CLI::PositiveNumber);

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Effects table and channel-sensitivity map from matrix results");
  r->add_option("--matrix", report.matrix, "matrix.json or {\"matrices\": [...]}")->required()->check(CLI::ExistingFile);
  r->add_option("--out-csv", report.out_csv, "Effects CSV path")->required();
  r->add_option("--map-csv", report.map_csv, "Sensitivity map CSV (default: next to --out-csv)");
  r->add_option("--map-json", report.map_json, "Sensitivity map JSON (default: next to --out-csv)");
  r->add_option("--epsilon", report.epsilon, "Additive band half-width in points")->check(CLI::NonNegativeNumber);

  MockArgs mock;
  auto* s = app.add_subcommand("mock-server", "Serve a local model over the logprobs protocol");
  s->add_option("--model", mock.model, "tabular:<path> or ngram:<path>")->required();
  s->add_option("--vocab", mock.vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  s->add_option("--host", mock.host, "Bind address");
  s->add_option("--port", mock.port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*c) return CmdCompile(compile, out, err);
    if (*d) return CmdDecode(decode, out, err);
    if (*o) return CmdOracle(oracle, out, err);
    if (*m) return CmdMatrix(matrix, out, err);
    if (*r) return CmdReport(report, out, err);
    if (*s) return CmdMockServer(mock, out, err);
  } catch (const Error& e) {
    err << "error (" << ErrorKindName(e.kind()) << "): " << e.what() << "\n";
    if (e.kind() == ErrorKind::kIo) err << "Run with --help for usage.\n";
    return ExitCodeFor(e);
  }
  return kUsage;
}

}  // namespace cdtax::cli
