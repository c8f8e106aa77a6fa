/*!
 *  Copyright (c) 2026 by Contributors
 * \file cli_test.cc
 */
#include <cdtax/grammar.h>
#include <cdtax/io_util.h>
#include <cdtax/remote_lm.h>
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.h"
#include "json.hpp"
#include "test_support.h"

namespace cdtax {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult RunCli(std::vector<std::string> args) {
  args.insert(args.begin(), "cdtax");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  int code = cli::Run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

/*! \brief vocab.txt, schema.json, uniform model.json and a grammar.json path. */
struct Workspace {
  fs::path dir;
  std::string vocab, schema, model, grammar;

  explicit Workspace(const std::string& name) : dir(testing::TempDir(name)) {
    vocab = (dir / "vocab.txt").string();
    schema = (dir / "schema.json").string();
    model = (dir / "model.json").string();
    grammar = (dir / "grammar.json").string();
    Vocabulary v = testing::MakeVocab({"{\"steps\":", "\"", "ok", "\",\"answer\":", ",\"answer\":", "1}", "2}", "1", "}", "{\"think_step_by_step\":"});
    std::ofstream(vocab, std::ios::binary) << v.Serialize();
    std::ofstream(schema) << R"({"fields":[{"key":"steps","kind":"string"},{"key":"answer","kind":"integer"}],)"
                          << R"("max_string_len":4,"max_number_len":2})";
    std::ofstream(model) << TabularLM(v.size(), 0, NextTokenDistribution::Uniform(v.size())).ToJson();
  }
};

TEST(Cli, HelpAndVersionExitZero) {
  EXPECT_EQ(RunCli({"--help"}).code, 0);
  EXPECT_EQ(RunCli({"--version"}).code, 0);
  for (const char* sub : {"compile", "decode", "oracle", "matrix", "report", "mock-server"}) {
    CliResult r = RunCli({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(RunCli({}).code, 1);
  EXPECT_EQ(RunCli({"frobnicate"}).code, 1);
  EXPECT_EQ(RunCli({"compile", "--schema", "/nonexistent/schema.json", "--vocab", "/nonexistent/v.txt"}).code, 1);
  Workspace ws("cli-usage");
  EXPECT_EQ(RunCli({"compile", "--schema", ws.schema}).code, 1);
  EXPECT_EQ(RunCli({"decode", "--grammar", ws.schema, "--vocab", ws.vocab, "--backend", "tabular:x", "--policy",
                    "beam"})
                .code,
            1);
}

TEST(Cli, CompileWritesGrammar) {
  Workspace ws("cli-compile");
  CliResult r = RunCli({"compile", "--schema", ws.schema, "--vocab", ws.vocab, "--out", ws.grammar});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("compiled: states="), std::string::npos);
  EXPECT_TRUE(fs::exists(ws.grammar));
  CompiledGrammar g = CompiledGrammar::Load(ReadFile(ws.grammar), LoadVocabulary(ws.vocab));
  EXPECT_EQ(g.schema().fields[0].key, "steps");

  std::ofstream(ws.dir / "variant.json") << R"({"field":"steps","wording":"think_step_by_step"})";
  CliResult v = RunCli({"compile", "--schema", ws.schema, "--vocab", ws.vocab, "--variant",
                        (ws.dir / "variant.json").string()});
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.out.find("think_step_by_step"), std::string::npos);
}

TEST(Cli, CompileValidationErrors) {
  Workspace ws("cli-coverage");
  std::ofstream(ws.dir / "small.txt", std::ios::binary) << testing::MakeVocab({"\"", "a"}).Serialize();
  CliResult r = RunCli({"compile", "--schema", ws.schema, "--vocab", (ws.dir / "small.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("0x7B"), std::string::npos) << r.err;

  std::ofstream(ws.dir / "bad_schema.json") << R"({"fields":[]})";
  EXPECT_EQ(RunCli({"compile", "--schema", (ws.dir / "bad_schema.json").string(), "--vocab", ws.vocab}).code, 2);
  std::ofstream(ws.dir / "garbled.json") << "{";
  EXPECT_EQ(RunCli({"compile", "--schema", (ws.dir / "garbled.json").string(), "--vocab", ws.vocab}).code, 2);
}

TEST(Cli, DecodeAndOracle) {
  Workspace ws("cli-decode");
  ASSERT_EQ(RunCli({"compile", "--schema", ws.schema, "--vocab", ws.vocab, "--out", ws.grammar}).code, 0);
  std::string backend = "tabular:" + ws.model;
  fs::path trace = ws.dir / "trace.jsonl";
  CliResult d = RunCli({"decode", "--grammar", ws.grammar, "--vocab", ws.vocab, "--backend", backend, "--policy",
                        "sample", "--seed", "3", "--trace", trace.string()});
  ASSERT_EQ(d.code, 0) << d.err;
  json doc = json::parse(d.out);
  SchemaSpec schema = LoadSchema(ws.schema);
  EXPECT_TRUE(testing::ParsesAsSchemaObject(schema, doc["output"].get<std::string>())) << doc["output"];
  EXPECT_GT(doc["cumulative_tax"].get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(trace));
  EXPECT_EQ(RunCli({"decode", "--grammar", ws.grammar, "--vocab", ws.vocab, "--backend", backend, "--policy", "sample",
                    "--seed", "3"})
                .out,
            d.out);

  CliResult o = RunCli({"oracle", "--grammar", ws.grammar, "--vocab", ws.vocab, "--backend", backend, "--max-len", "4",
                        "--metric", "constant", "--reasoning", "min_reasoning_len:1"});
  ASSERT_EQ(o.code, 0) << o.err;
  json report = json::parse(o.out);
  EXPECT_EQ(report["value_prefix_ids"], json::array({0}));
  EXPECT_LE(report["tv"].get<double>(), report["B_k"].get<double>() + 1e-12);
  EXPECT_GE(report["T_val"].get<double>(), 0.0);
  EXPECT_TRUE(report.contains("activation"));

  EXPECT_EQ(RunCli({"oracle", "--grammar", ws.grammar, "--vocab", ws.vocab, "--backend", backend, "--metric",
                    "exact_answer"})
                .code,
            2);
  EXPECT_EQ(RunCli({"decode", "--grammar", ws.grammar, "--vocab", ws.vocab, "--backend", backend, "--prompt-ids",
                    "99"})
                .code,
            2);
}

TEST(Cli, OracleBudgetRefusal) {
  Workspace ws("cli-budget");
  std::ofstream(ws.dir / "bytes.txt", std::ios::binary) << testing::ByteVocabulary().Serialize();
  std::string bytes = (ws.dir / "bytes.txt").string();
  ASSERT_EQ(RunCli({"compile", "--schema", ws.schema, "--vocab", bytes, "--out", ws.grammar}).code, 0);
  std::ofstream(ws.dir / "bytes_model.json") << TabularLM(257, 0, NextTokenDistribution::Uniform(257)).ToJson();
  CliResult r = RunCli({"oracle", "--grammar", ws.grammar, "--vocab", bytes, "--backend",
                        "tabular:" + (ws.dir / "bytes_model.json").string(), "--max-len", "4"});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("nodes"), std::string::npos) << r.err;
}

TEST(Cli, UnreachableBackend) {
  Workspace ws("cli-backend");
  ASSERT_EQ(RunCli({"compile", "--schema", ws.schema, "--vocab", ws.vocab, "--out", ws.grammar}).code, 0);
  CliResult r = RunCli({"decode", "--grammar", ws.grammar, "--vocab", ws.vocab, "--backend", "remote:http://127.0.0.1:9"});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, MatrixAndReport) {
  fs::path dir = testing::TempDir("cli-matrix");
  Vocabulary vocab = testing::ExperimentVocab(4);
  MockLogprobsServer server(std::make_shared<testing::PlacementLM>(4, std::array<std::size_t, 4>{1, 2, 2, 4}),
                            vocab.fingerprint());
  server.Start();
  fs::path config = testing::WriteExperiment(dir, 4, json{{"type", "remote"}, {"url", server.url()}}.dump());
  CliResult m = RunCli({"matrix", "--config", config.string(), "--out", (dir / "out").string()});
  ASSERT_EQ(m.code, 0) << m.err;
  json matrix = json::parse(m.out);
  EXPECT_NEAR(matrix["R"]["00"].get<double>(), 25.0, 1e-9);
  EXPECT_NEAR(matrix["R"]["11"].get<double>(), 100.0, 1e-9);
  EXPECT_NEAR(matrix["effects"]["delta_int"].get<double>(), 25.0, 1e-9);

  CliResult again = RunCli({"matrix", "--config", config.string(), "--out", (dir / "out").string(), "--resume"});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(again.out, m.out);
  EXPECT_NE(again.err.find("(0 decodes)"), std::string::npos) << again.err;

  CliResult r = RunCli({"report", "--matrix", (dir / "out" / "matrix.json").string(), "--out-csv",
                        (dir / "effects.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "model,benchmark,delta_key,delta_prompt,delta_int,annotation\n"
                   "placement-lm,synthetic,25.00,25.00,25.00,synergy\n");
  EXPECT_TRUE(fs::exists(dir / "sensitivity_map.csv"));
  EXPECT_TRUE(fs::exists(dir / "sensitivity_map.json"));
}

TEST(Cli, MatrixValidation) {
  fs::path dir = testing::TempDir("cli-matrix-bad");
  fs::path config = testing::WriteExperiment(dir, 2, R"({"type":"remote","url":"http://127.0.0.1:9"})");
  json doc = json::parse(ReadFile(config));
  doc["items"] = json::array();
  std::ofstream(dir / "empty.json") << doc.dump();
  EXPECT_EQ(RunCli({"matrix", "--config", (dir / "empty.json").string(), "--out", (dir / "out").string()}).code, 2);
  CliResult down = RunCli({"matrix", "--config", config.string(), "--out", (dir / "out").string()});
  EXPECT_EQ(down.code, 3);
  EXPECT_NE(down.err.find("--resume"), std::string::npos);
}

TEST(Cli, ReportOnReferenceTable) {
  fs::path dir = testing::TempDir("cli-report");
  fs::path fixture = fs::path(CDTAX_FIXTURE_DIR) / "placement_scores_reference.json";
  CliResult r = RunCli({"report", "--matrix", fixture.string(), "--out-csv", (dir / "effects.csv").string(),
                        "--map-json", (dir / "map.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("DeepSeek-R1-Distill-Qwen-7B,GSM8K,-11.29,9.56,14.85,synergy"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Qwen2.5-3B,GSM8K,2.14,-0.67,-5.32,redundancy/conflict"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "map.json"));
  EXPECT_EQ(RunCli({"report", "--matrix", fixture.string(), "--out-csv", (dir / "e.csv").string(), "--epsilon", "-1"})
                .code,
            1);
}

}  // namespace
}  // namespace cdtax
