// End-to-end tests for the command-line binary. Each case drives the real
// executable (path injected as SHELLSIFT_BIN) through std::system and checks
// exit codes plus the files it writes.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "shellsift/transform.hpp"
#include "shellsift/util.hpp"

using namespace shellsift;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kTinyArch =
    " --src-embed 8 --src-filters 4 --ast-embed 4 --ast-filters 2 --stat-out 4 --hidden 8";

fs::path scratch_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "shellsift_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

int run(const std::string& args, const fs::path& out_file = {}) {
  std::string cmd = std::string(SHELLSIFT_BIN) + " " + args;
  cmd += out_file.empty() ? " >/dev/null" : " >" + out_file.string();
  cmd += " 2>/dev/null";
  int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string run_stdout(const std::string& args, int expect_rc = 0) {
  fs::path tmp = scratch_root() / "stdout.tmp";
  REQUIRE(run(args, tmp) == expect_rc);
  return read_file(tmp);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    if (nl > start) out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

// Shared fixture corpus, split, and trained checkpoint, built once.
struct Env {
  fs::path dir, manifest, split, model;
  bool ok = false;
};

const Env& env() {
  static Env e = [] {
    Env v;
    v.dir = scratch_root() / "env";
    v.manifest = v.dir / "corpus/manifest.jsonl";
    v.split = v.dir / "split.json";
    v.model = v.dir / "model.ckpt";
    fs::create_directories(v.dir);
    if (run("corpus synth --benign 14 --positive 14 --seed 7 --out " +
            (v.dir / "corpus").string()) != 0)
      return v;
    if (run("corpus split " + v.manifest.string() + " --ratios 0.6,0.2,0.2 --seed 3 --out " +
            v.split.string()) != 0)
      return v;
    if (run("train " + v.manifest.string() + " --split " + v.split.string() + " --out " +
            v.model.string() + " --seed 11 --epochs 3" + kTinyArch) != 0)
      return v;
    v.ok = true;
    return v;
  }();
  return e;
}

}  // namespace

TEST_CASE("cli: exit codes for help and bad invocations") {
  CHECK(run("--help") == 0);
  CHECK(run("--help-all") == 0);
  CHECK(run("train --help") == 0);
  CHECK(run("frobnicate") == 1);
  CHECK(run("eval") == 1);                                  // missing required args
  CHECK(run("corpus synth --benign 1 --positive 1") == 1);  // missing --seed and --out
  CHECK(run("scan /nonexistent --model also-missing.ckpt") == 2);
}

TEST_CASE("cli: synth, ingest, and split agree on the corpus") {
  REQUIRE(env().ok);
  fs::path dir = scratch_root() / "ingest";
  REQUIRE(run("corpus synth --benign 5 --positive 4 --seed 9 --out " + dir.string()) == 0);

  // Re-ingesting the synthesized tree must reproduce the same ids and labels.
  fs::path re = scratch_root() / "reingest.jsonl";
  REQUIRE(run("corpus ingest " + dir.string() + " --out " + re.string()) == 0);
  CorpusManifest a = read_manifest(dir / "manifest.jsonl");
  CorpusManifest b = read_manifest(re);
  // The re-ingest also sees the manifest file itself; ignore non-php entries.
  size_t matched = 0;
  for (const auto& ea : a.entries) {
    const ManifestEntry* eb = b.find(ea.id);
    REQUIRE(eb != nullptr);
    CHECK(eb->label == ea.label);
    CHECK(eb->hash == ea.hash);
    ++matched;
  }
  CHECK(matched == 9);

  std::string split_text = run_stdout("corpus split " + (dir / "manifest.jsonl").string() +
                                      " --ratios 0.5,0.25,0.25 --seed 1");
  json js = json::parse(split_text);
  CHECK(js.at("assign").size() == 9);
}

TEST_CASE("cli: train is deterministic and logs epochs") {
  REQUIRE(env().ok);
  fs::path a = scratch_root() / "a.ckpt", b = scratch_root() / "b.ckpt",
           c = scratch_root() / "c.ckpt", log = scratch_root() / "train_log.jsonl";
  std::string base = "train " + env().manifest.string() + " --split " + env().split.string() +
                     " --epochs 2" + kTinyArch;
  REQUIRE(run(base + " --out " + a.string() + " --seed 11 --log " + log.string()) == 0);
  REQUIRE(run(base + " --out " + b.string() + " --seed 11") == 0);
  REQUIRE(run(base + " --out " + c.string() + " --seed 12") == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a) != read_file(c));

  auto log_lines = lines_of(read_file(log));
  REQUIRE(log_lines.size() == 2);
  json first = json::parse(log_lines[0]);
  CHECK(first.at("epoch") == 0);
  CHECK(first.at("val").contains("f1"));
  CHECK(first.at("train_loss").get<double>() > 0.0);
}

TEST_CASE("cli: eval emits json and csv reports") {
  REQUIRE(env().ok);
  std::string base =
      "eval " + env().manifest.string() + " --model " + env().model.string() + " --split-file " +
      env().split.string() + " --split test";
  json j = json::parse(run_stdout(base));
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("kind") == "eval");
  CHECK(j.at("delta") == 0.5);
  CHECK(j.at("model_hash").get<std::string>().size() == 64);
  CHECK(j.at("metrics").contains("f1"));
  double f1 = j.at("metrics").at("f1").get<double>();
  CHECK(f1 >= 0.0);
  CHECK(f1 <= 1.0);

  auto csv = lines_of(run_stdout(base + " --format csv"));
  REQUIRE(csv.size() == 3);
  CHECK(csv[0] == "# shellsift-report v1");
  CHECK(csv[1] == "accuracy,precision,recall,f1");
  // four comma-separated 4-decimal fields
  int fields = 0;
  for (size_t pos = 0; pos < csv[2].size();) {
    size_t dot = csv[2].find('.', pos);
    REQUIRE(dot != std::string::npos);
    size_t end = csv[2].find(',', dot);
    if (end == std::string::npos) end = csv[2].size();
    CHECK(end - dot - 1 == 4);
    ++fields;
    pos = end + 1;
  }
  CHECK(fields == 4);

  CHECK(run(base + " --format yaml") == 1);
}

TEST_CASE("cli: scan reports per-file scores and aggregate metrics") {
  REQUIRE(env().ok);
  fs::path report = scratch_root() / "scan.json";
  REQUIRE(run("scan " + (env().dir / "corpus").string() + " --model " + env().model.string() +
              " --report " + report.string() + " --jobs 2") == 0);
  json j = json::parse(read_file(report));
  CHECK(j.at("kind") == "scan");
  CHECK(j.at("files").size() == 28);
  for (const auto& row : j.at("files")) {
    double q = row.at("q").get<double>();
    CHECK(q >= 0.0);
    CHECK(q <= 1.0);
    CHECK(row.at("flagged").get<bool>() == (q >= 0.5));
    std::string v = row.at("top_view").get<std::string>();
    CHECK((v == "source" || v == "ast" || v == "stats"));
  }
  // synthesized tree uses the benign/ and webshell/ layout, so metrics appear
  REQUIRE(j.contains("metrics"));
  size_t n = j["metrics"].at("tp").get<size_t>() + j["metrics"].at("fp").get<size_t>() +
             j["metrics"].at("tn").get<size_t>() + j["metrics"].at("fn").get<size_t>();
  CHECK(n == 28);
}

TEST_CASE("cli: extract subcommands emit well-formed json") {
  REQUIRE(env().ok);
  fs::path file = env().dir / "corpus/webshell/w0000.php";

  json src = json::parse(run_stdout("extract source " + file.string()));
  CHECK(src.at("tokens").is_array());
  CHECK(src.at("tokens").size() > 0);
  CHECK(src.at("n_original").get<size_t>() >= src.at("tokens").size());

  json ast = json::parse(run_stdout("extract ast " + file.string()));
  REQUIRE(ast.at("ids").size() == ast.at("types").size());
  CHECK(ast.at("ids").size() > 0);
  CHECK(ast.at("types")[0] == "program");

  json st = json::parse(run_stdout("extract stats " + file.string()));
  CHECK(st.at("risky_counts").size() == 11);
  CHECK(st.at("entropy").get<double>() > 0.0);
  double total = 0;
  for (const auto& [k, v] : st.at("risky_counts").items()) total += v.get<double>();
  CHECK(total > 0.0);  // fixture webshells call at least one risky function

  // token budget flag is honored
  json cut = json::parse(run_stdout("extract source " + file.string() + " --max-tokens 4"));
  CHECK(cut.at("tokens").size() == 4);
  CHECK(cut.at("truncated") == true);
}

TEST_CASE("cli: mutate writes variants, manifest, and recipe log") {
  REQUIRE(env().ok);
  fs::path out = scratch_root() / "mutants";
  REQUIRE(run("mutate " + env().manifest.string() + " --n 10 --seed 5 --out " + out.string()) ==
          0);

  CorpusManifest m = read_manifest(out / "manifest.jsonl");
  auto recipes = lines_of(read_file(out / "recipes.jsonl"));
  CHECK(m.entries.size() == recipes.size());
  CHECK(m.entries.size() >= 8);  // small shortfall tolerated
  for (const auto& e : m.entries) {
    CHECK(e.label == 1);
    ScriptSample s = load_sample(m, e.id);
    CHECK(s.origin == Origin::mutated);
    REQUIRE(s.lineage.has_value());
  }
  for (const auto& line : recipes) {
    json j = json::parse(line);
    CHECK(j.at("ops").size() >= 1);
    CHECK(j.at("ops").size() <= 4);
    CHECK(j.at("applied").size() >= 1);
    CHECK(m.find(j.at("child_id").get<std::string>()) != nullptr);
  }

  // determinism at the file level
  fs::path out2 = scratch_root() / "mutants2";
  REQUIRE(run("mutate " + env().manifest.string() + " --n 10 --seed 5 --out " + out2.string()) ==
          0);
  CHECK(read_file(out / "manifest.jsonl") == read_file(out2 / "manifest.jsonl"));
  CHECK(read_file(out / "recipes.jsonl") == read_file(out2 / "recipes.jsonl"));
}

TEST_CASE("cli: demalicious output passes the independent benign check") {
  REQUIRE(env().ok);
  fs::path mut = scratch_root() / "mutants";  // produced by the mutate case
  if (!fs::exists(mut / "manifest.jsonl"))
    REQUIRE(run("mutate " + env().manifest.string() + " --n 10 --seed 5 --out " + mut.string()) ==
            0);
  fs::path out = scratch_root() / "defanged";
  REQUIRE(run("demalicious " + (mut / "manifest.jsonl").string() + " --out " + out.string()) == 0);

  CorpusManifest m = read_manifest(out / "manifest.jsonl");
  CHECK(m.entries.size() > 0);
  for (const auto& e : m.entries) {
    CHECK(e.label == 0);
    ScriptSample s = load_sample(m, e.id);
    CHECK(s.origin == Origin::de_malicious);
    CHECK(verify_benign(s));
  }
}

TEST_CASE("cli: coevolve runs are byte-identical and abort cleanly") {
  REQUIRE(env().ok);
  std::string base = "coevolve " + env().manifest.string() + " --split " + env().split.string() +
                     " --rounds 2 --candidates 8 --seed 42 --epochs 3 --epochs-per-round 2" +
                     kTinyArch;
  fs::path r1 = scratch_root() / "run1", r2 = scratch_root() / "run2";
  REQUIRE(run(base + " --out " + r1.string()) == 0);
  REQUIRE(run(base + " --out " + r2.string()) == 0);
  for (const char* f : {"rounds.jsonl", "rounds.csv", "model.ckpt", "weights.json"})
    CHECK(read_file(r1 / f) == read_file(r2 / f));
  CHECK(read_file(r1 / "evoset/manifest.jsonl") == read_file(r2 / "evoset/manifest.jsonl"));

  auto rounds = lines_of(read_file(r1 / "rounds.jsonl"));
  REQUIRE(rounds.size() >= 1);
  json round1 = json::parse(rounds[0]);
  CHECK(round1.at("round") == 1);
  CHECK(round1.at("generated").get<size_t>() ==
        round1.at("rejected").get<size_t>() + round1.at("evaded").get<size_t>());
  CHECK(!round1.contains("wall_ms"));  // timing lives in the sidecar
  CHECK(fs::exists(r1 / "timing.jsonl"));

  // a divergent learning rate must abort with exit 2 but keep the run dir
  fs::path r3 = scratch_root() / "run3";
  CHECK(run(base + " --lr 1e14 --out " + r3.string()) == 2);
  CHECK(fs::exists(r3 / "rounds.jsonl"));
}

TEST_CASE("cli: dump-embeddings matches the fused width") {
  REQUIRE(env().ok);
  fs::path out = scratch_root() / "emb.csv";
  REQUIRE(run("dump-embeddings " + env().manifest.string() + " --model " + env().model.string() +
              " --split-file " + env().split.string() + " --split val --out " + out.string()) ==
          0);
  auto rows = lines_of(read_file(out));
  REQUIRE(rows.size() > 1);
  // tiny arch: 3*4 source + 3*2 ast + 4 stats = 22 dims, plus id and label
  size_t cols = 1 + std::count(rows[0].begin(), rows[0].end(), ',');
  CHECK(cols == 24);
  CHECK(rows[0].rfind("id,label,h0,", 0) == 0);
  for (size_t i = 1; i < rows.size(); ++i)
    CHECK(1 + std::count(rows[i].begin(), rows[i].end(), ',') == cols);
}

TEST_CASE("cli: report reformats metrics with fixed precision") {
  REQUIRE(env().ok);
  fs::path in = scratch_root() / "fixed_report.json";
  write_file(in, R"({"metrics":{"accuracy":0.9936,"precision":0.994,"recall":0.992,"f1":0.993}})");
  auto csv = lines_of(run_stdout("report " + in.string() + " --format csv"));
  REQUIRE(csv.size() == 3);
  CHECK(csv[2] == "0.9936,0.9940,0.9920,0.9930");

  json j = json::parse(run_stdout("report " + in.string() + " --format json"));
  CHECK(j.at("metrics").at("recall") == 0.992);

  // reports without metrics degrade to a header-only table
  fs::path empty = scratch_root() / "empty_report.json";
  write_file(empty, "{}");
  auto empty_csv = lines_of(run_stdout("report " + empty.string() + " --format csv"));
  CHECK(empty_csv.size() == 2);
}

TEST_CASE("cli: config file supplies defaults, flags win") {
  REQUIRE(env().ok);
  fs::path ini = scratch_root() / "cfg.ini";
  write_file(ini, "[train]\nepochs=4\n");
  fs::path log1 = scratch_root() / "cfg_log1.jsonl", log2 = scratch_root() / "cfg_log2.jsonl";
  std::string base = "--config " + ini.string() + " train " + env().manifest.string() +
                     " --split " + env().split.string() + " --seed 11" + kTinyArch;
  REQUIRE(run(base + " --out " + (scratch_root() / "cfg1.ckpt").string() + " --log " +
              log1.string()) == 0);
  CHECK(lines_of(read_file(log1)).size() == 4);  // epochs came from the ini
  REQUIRE(run(base + " --epochs 2 --out " + (scratch_root() / "cfg2.ckpt").string() + " --log " +
              log2.string()) == 0);
  CHECK(lines_of(read_file(log2)).size() == 2);  // explicit flag overrides it
}
