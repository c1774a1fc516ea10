// Command-line front end. Logs go to stderr, data goes to files or stdout;
// exit codes: 0 success, 1 usage error, 2 runtime error.

#include <CLI11.hpp>

#include <array>
#include <cstdio>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "shellsift/ast_view.hpp"
#include "shellsift/coevolution.hpp"
#include "shellsift/corpus.hpp"
#include "shellsift/detector.hpp"
#include "shellsift/source_view.hpp"
#include "shellsift/stats_view.hpp"
#include "shellsift/transform.hpp"
#include "shellsift/util.hpp"

using namespace shellsift;
using nlohmann::json;

namespace {

constexpr int kReportSchemaVersion = 1;

void emit_data(const std::string& out_path, const std::string& data) {
  if (out_path.empty() || out_path == "-") {
    std::cout << data;
    return;
  }
  write_file(out_path, data);
}

Partition partition_from_name(const std::string& name) {
  if (name == "train") return Partition::train;
  if (name == "val") return Partition::val;
  if (name == "test") return Partition::test;
  throw UsageError("unknown split name: " + name + " (expected train, val, or test)");
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  char extra = 0;
  if (sscanf(text.c_str(), "%lf,%lf,%lf%c", &r[0], &r[1], &r[2], &extra) != 3)
    throw UsageError("ratios must be three comma-separated numbers, e.g. 0.8,0.1,0.1");
  return r;
}

ViewMask parse_views(const std::string& text) {
  if (text.empty()) return {};
  ViewMask m{false, false, false};
  size_t start = 0;
  while (start <= text.size()) {
    size_t comma = text.find(',', start);
    std::string part = text.substr(start, comma == std::string::npos ? comma : comma - start);
    if (part == "src" || part == "source")
      m.src = true;
    else if (part == "ast")
      m.ast = true;
    else if (part == "stat" || part == "stats")
      m.stat = true;
    else
      throw UsageError("unknown view: " + part + " (expected src, ast, stat)");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return m;
}

std::vector<ScriptSample> load_partition(const CorpusManifest& m, const SplitAssignment& split,
                                         Partition p) {
  std::vector<ScriptSample> out;
  for (const auto& e : m.entries) {
    auto it = split.parts.find(e.id);
    if (it != split.parts.end() && it->second == p) out.push_back(load_sample(m, e.id));
  }
  return out;
}

TokenVocab vocab_from(const std::vector<ScriptSample>& train, const FeatureConfig& fcfg) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(train.size());
  for (const auto& s : train) docs.push_back(source_token_texts(s.raw, fcfg.tau));
  return TokenVocab::build(docs);
}

Dataset to_dataset(const std::vector<ScriptSample>& samples, const TokenVocab& vocab,
                   const FeatureConfig& fcfg) {
  Dataset out;
  out.reserve(samples.size());
  for (const auto& s : samples)
    out.push_back({s.id, s.label, extract_features(s.raw, vocab, fcfg)});
  return out;
}

json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
          {"f1", m.f1},             {"tp", m.tp},               {"fp", m.fp},
          {"tn", m.tn},             {"fn", m.fn}};
}

// Table-style CSV: schema comment, header, one 4-decimal row per metric set.
std::string metrics_csv(const std::vector<Metrics>& rows) {
  std::string out = "# shellsift-report v1\naccuracy,precision,recall,f1\n";
  char buf[96];
  for (const auto& m : rows) {
    snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f\n", m.accuracy, m.precision, m.recall, m.f1);
    out += buf;
  }
  return out;
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.tp = j.value("tp", size_t(0));
  m.fp = j.value("fp", size_t(0));
  m.tn = j.value("tn", size_t(0));
  m.fn = j.value("fn", size_t(0));
  return m;
}

// Options shared by every command that builds or loads feature extraction.
struct FeatureFlags {
  FeatureConfig fcfg;
  void attach(CLI::App* cmd) {
    cmd->add_option("--tau", fcfg.tau, "Long-string compression threshold (codepoints)");
    cmd->add_option("--max-tokens", fcfg.max_tokens, "Head-tail token budget");
    cmd->add_option("--ast-max-len", fcfg.ast_max_len, "AST sequence budget");
    cmd->add_option("--array-cap", fcfg.array_cap, "Array elements kept before truncation");
    cmd->add_flag("--bytes-entropy", fcfg.bytes_entropy, "Entropy over raw bytes, not codepoints");
  }
};

struct ArchFlags {
  ArchConfig arch;
  void attach(CLI::App* cmd) {
    cmd->add_option("--src-embed", arch.src_embed_dim, "Source embedding width");
    cmd->add_option("--src-filters", arch.src_filters, "Source conv filters per width");
    cmd->add_option("--ast-embed", arch.ast_embed_dim, "AST embedding width");
    cmd->add_option("--ast-filters", arch.ast_filters, "AST conv filters per width");
    cmd->add_option("--stat-out", arch.stat_out_dim, "Statistics projection width");
    cmd->add_option("--hidden", arch.hidden_dim, "Fusion hidden width");
  }
};

struct MutationRecipeBook {
  std::map<std::string, MutationRecipe> by_id;
};

// recipes.jsonl sits next to a mutate-produced manifest; it lets the
// de-malicious pass replay the exact recipe on the sanitized ancestor.
MutationRecipeBook load_recipes(const std::filesystem::path& manifest_file) {
  MutationRecipeBook book;
  auto path = manifest_file.parent_path() / "recipes.jsonl";
  if (!std::filesystem::exists(path)) return book;
  std::string text = read_file(path);
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    std::string_view line(text.data() + start, (nl == std::string::npos ? text.size() : nl) - start);
    start = (nl == std::string::npos) ? text.size() : nl + 1;
    if (line.empty()) continue;
    json j = json::parse(line);
    MutationRecipe r;
    r.recipe_id = j.at("recipe_id").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    for (const auto& op : j.at("ops"))
      r.ops.push_back({op.at("name").get<std::string>(), op.value("params", std::string())});
    book.by_id[r.recipe_id] = std::move(r);
  }
  return book;
}

// ---------------------------------------------------------------- corpus ---

int cmd_corpus_ingest(const std::string& dir, const std::string& rulefile,
                      const std::string& out) {
  std::vector<LabelRule> rules =
      rulefile.empty() ? default_label_rules() : parse_label_rules(read_file(rulefile));
  IngestReport report = ingest(dir, rules);
  for (const auto& e : report.errors) std::cerr << "ingest: " << e << "\n";
  std::string path = out.empty() ? (std::filesystem::path(dir) / "manifest.jsonl").string() : out;
  if (path == "-") {
    std::cout << manifest_to_jsonl(report.manifest);
  } else {
    write_manifest(report.manifest, path);
    auto counts = report.manifest.label_counts();
    std::cerr << "ingested " << report.manifest.entries.size() << " samples (" << counts[0]
              << " benign, " << counts[1] << " webshell) -> " << path << "\n";
  }
  return 0;
}

int cmd_corpus_split(const std::string& manifest_file, const std::string& ratios_text,
                     uint64_t seed, const std::string& out) {
  CorpusManifest m = read_manifest(manifest_file);
  SplitAssignment split = stratified_split(m, parse_ratios(ratios_text), seed);
  emit_data(out, split_to_json(split));
  return 0;
}

int cmd_corpus_synth(size_t benign, size_t positive, uint64_t seed, const std::string& out) {
  CorpusManifest m = synth_fixtures(benign, positive, seed, out);
  write_manifest(m, std::filesystem::path(out) / "manifest.jsonl");
  std::cerr << "wrote " << m.entries.size() << " fixtures under " << out << "\n";
  return 0;
}

// --------------------------------------------------------------- extract ---

int cmd_extract_source(const std::string& file, const FeatureConfig& fcfg) {
  TokenSequence seq;
  seq.texts = source_token_texts(read_file(file), fcfg.tau);
  seq.n_original = seq.texts.size();
  seq = head_tail_truncate(std::move(seq), fcfg.max_tokens);
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["tokens"] = seq.texts;
  j["truncated"] = seq.truncated;
  j["n_original"] = seq.n_original;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_extract_ast(const std::string& file, const FeatureConfig& fcfg) {
  SyntaxTree tree = parse_php(read_file(file));
  PrunedCounts counts;
  std::vector<int> ids = linearize_pruned(tree, fcfg.ast_max_len, fcfg.array_cap, &counts);
  json names = json::array();
  for (int id : ids) {
    if (id == kAstTruncMarkId)
      names.push_back("<TRUNC>");
    else if (id >= kAstReserved)
      names.push_back(node_type_name(static_cast<NodeType>(id - kAstReserved)));
    else
      names.push_back("<UNK>");
  }
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["ids"] = ids;
  j["types"] = names;
  j["pruned"] = {{"html", counts.html},
                 {"strings", counts.strings},
                 {"array_truncations", counts.array_truncations}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_extract_stats(const std::string& file, const FeatureConfig& fcfg) {
  std::string raw = read_file(file);
  auto v = stat_vector(raw, fcfg.bytes_entropy);
  json risky;
  for (size_t i = 0; i < kRiskyNames.size(); ++i) risky[kRiskyNames[i]] = v[i];
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["risky_counts"] = risky;
  j["max_line_len"] = v[11];
  j["mean_line_len"] = v[12];
  j["entropy"] = v[13];
  std::cout << j.dump() << "\n";
  return 0;
}

// ----------------------------------------------------------------- train ---

struct TrainArgs {
  std::string manifest_file, split_file, out, log_file, views_text;
  uint64_t seed = 0;
  TrainHyper hyper;
  FeatureFlags feat;
  ArchFlags archf;
};

int cmd_train(const TrainArgs& a) {
  CorpusManifest m = read_manifest(a.manifest_file);
  SplitAssignment split = split_from_json(read_file(a.split_file));
  auto train = load_partition(m, split, Partition::train);
  auto val = load_partition(m, split, Partition::val);
  if (train.empty()) throw UsageError("split has no training samples for this manifest");

  TokenVocab vocab = vocab_from(train, a.feat.fcfg);
  Dataset train_ds = to_dataset(train, vocab, a.feat.fcfg);
  Dataset val_ds = to_dataset(val, vocab, a.feat.fcfg);

  DetectorModel model;
  model.build(std::move(vocab), a.feat.fcfg, parse_views(a.views_text), a.seed, a.archf.arch);
  TrainLog log = train_detector(model, train_ds, val_ds, a.hyper);
  save_checkpoint(model, a.out);

  if (!a.log_file.empty()) {
    std::string lines;
    for (size_t e = 0; e < log.epochs.size(); ++e) {
      json j;
      j["epoch"] = e;
      j["train_loss"] = log.epochs[e].train_loss;
      j["val"] = metrics_json(log.epochs[e].val);
      j["best"] = (e == log.best_epoch);
      lines += j.dump() + "\n";
    }
    write_file(a.log_file, lines);
  }
  std::cerr << "trained " << log.epochs.size() << " epochs, best epoch " << log.best_epoch
            << " (val F1 " << log.epochs[log.best_epoch].val.f1 << ") -> " << a.out << "\n";
  return 0;
}

// ------------------------------------------------------------ eval / scan ---

struct EvalArgs {
  std::string manifest_file, model_file, split_file, split_name = "test", report, format = "json";
  double delta = 0.5;
};

int cmd_eval(const EvalArgs& a) {
  CorpusManifest m = read_manifest(a.manifest_file);
  DetectorModel model = load_checkpoint(a.model_file);
  std::vector<ScriptSample> samples;
  if (!a.split_file.empty()) {
    SplitAssignment split = split_from_json(read_file(a.split_file));
    samples = load_partition(m, split, partition_from_name(a.split_name));
  } else {
    for (const auto& e : m.entries) samples.push_back(load_sample(m, e.id));
  }
  if (samples.empty()) throw UsageError("no samples selected for evaluation");

  std::vector<double> q(samples.size());
  std::vector<int> y(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    q[i] = score_bytes(model, samples[i].raw);
    y[i] = samples[i].label;
  }
  Metrics metrics = compute_metrics(q, y, a.delta);

  if (a.format == "csv") {
    emit_data(a.report, metrics_csv({metrics}));
  } else if (a.format == "json") {
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["kind"] = "eval";
    j["delta"] = a.delta;
    j["model_hash"] = sha256_hex(read_file(a.model_file));
    j["split"] = a.split_file.empty() ? "all" : a.split_name;
    j["n"] = samples.size();
    j["metrics"] = metrics_json(metrics);
    emit_data(a.report, j.dump(2) + "\n");
  } else {
    throw UsageError("unknown report format: " + a.format);
  }
  return 0;
}

struct ScanArgs {
  std::string dir, model_file, report;
  double delta = 0.5;
  int jobs = 1;
};

int cmd_scan(const ScanArgs& a) {
  DetectorModel model = load_checkpoint(a.model_file);
  auto files = list_files_recursive(a.dir);
  if (files.empty()) throw UsageError("no files to scan under " + a.dir);

  // One ablated copy per view: the top contributing view for a file is the
  // one whose removal drops its score the most.
  DetectorModel no_src = model, no_ast = model, no_stat = model;
  no_src.views.src = false;
  no_ast.views.ast = false;
  no_stat.views.stat = false;

  struct Row {
    std::string rel;
    double q = 0;
    const char* top = "";
  };
  std::vector<Row> rows(files.size());
  parallel_for(files.size(), a.jobs, [&](size_t i) {
    std::string raw = read_file(files[i]);
    double q = score_bytes(model, raw);
    double drops[3] = {q - score_bytes(no_src, raw), q - score_bytes(no_ast, raw),
                       q - score_bytes(no_stat, raw)};
    static const char* kViews[3] = {"source", "ast", "stats"};
    size_t best = 0;
    for (size_t v = 1; v < 3; ++v)
      if (drops[v] > drops[best]) best = v;
    rows[i] = {std::filesystem::relative(files[i], a.dir).generic_string(), q, kViews[best]};
  });

  // Aggregate metrics only when the whole tree is labeled by the standard
  // directory convention.
  std::vector<double> q;
  std::vector<int> y;
  bool all_labeled = true;
  for (const auto& r : rows) {
    if (r.rel.rfind("benign/", 0) == 0)
      y.push_back(0);
    else if (r.rel.rfind("webshell/", 0) == 0)
      y.push_back(1);
    else if (r.rel == "manifest.jsonl" || r.rel == "recipes.jsonl")
      continue;  // sidecars, not samples
    else {
      all_labeled = false;
      break;
    }
    q.push_back(r.q);
  }

  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "scan";
  j["delta"] = a.delta;
  j["model_hash"] = sha256_hex(read_file(a.model_file));
  j["root"] = a.dir;
  json file_rows = json::array();
  for (const auto& r : rows) {
    if (r.rel == "manifest.jsonl" || r.rel == "recipes.jsonl") continue;
    file_rows.push_back(
        {{"path", r.rel}, {"q", r.q}, {"flagged", r.q >= a.delta}, {"top_view", r.top}});
  }
  j["files"] = std::move(file_rows);
  if (all_labeled && !q.empty()) j["metrics"] = metrics_json(compute_metrics(q, y, a.delta));
  emit_data(a.report, j.dump(2) + "\n");
  return 0;
}

// ------------------------------------------------------ mutate / demalicious ---

struct MutateArgs {
  std::string manifest_file, weights_file, out;
  size_t n = 0;
  uint64_t seed = 0;
  int jobs = 1;
};

int cmd_mutate(const MutateArgs& a) {
  CorpusManifest m = read_manifest(a.manifest_file);
  std::vector<ScriptSample> pool;
  for (const auto& e : m.entries)
    if (e.label == 1) pool.push_back(load_sample(m, e.id));
  if (pool.empty()) throw UsageError("manifest has no label-1 samples to mutate");

  OperatorWeights weights = a.weights_file.empty() ? OperatorWeights::uniform()
                                                   : weights_from_json(read_file(a.weights_file));
  GenerationResult gen = generate_round(pool, weights, a.n, a.seed, a.jobs);

  std::vector<ScriptSample> children;
  std::string recipe_lines;
  for (const auto& c : gen.candidates) {
    children.push_back(c.sample);
    MutationResult res;
    res.child = c.sample;
    res.applied = c.applied;
    res.skipped = c.skipped;
    res.no_op = false;
    recipe_lines += recipe_log_line(c.recipe, res, pool[c.parent].id);
  }
  write_evoset(a.out, children);
  write_file(std::filesystem::path(a.out) / "recipes.jsonl", recipe_lines);
  std::cerr << "mutated " << children.size() << " samples (" << gen.shortfall
            << " short of requested) -> " << a.out << "\n";
  return 0;
}

struct DemaliciousArgs {
  std::string manifest_file, out;
};

int cmd_demalicious(const DemaliciousArgs& a) {
  CorpusManifest m = read_manifest(a.manifest_file);
  MutationRecipeBook book = load_recipes(a.manifest_file);

  std::vector<ScriptSample> outputs;
  size_t failed = 0;
  for (const auto& e : m.entries) {
    if (e.label != 1) continue;
    ScriptSample s = load_sample(m, e.id);
    const ScriptSample* ancestor = nullptr;
    const MutationRecipe* recipe = nullptr;
    ScriptSample parent;
    auto recipe_it = book.by_id.end();
    if (s.origin == Origin::mutated && s.lineage) {
      recipe_it = book.by_id.find(s.lineage->recipe_id);
      const ManifestEntry* pe = m.find(s.lineage->parent_id);
      if (pe && recipe_it != book.by_id.end()) {
        parent = load_sample(m, pe->id);
        ancestor = &parent;
        recipe = &recipe_it->second;
      }
    }
    std::string diag;
    auto defanged = de_malicious(s, ancestor, recipe, &diag);
    if (!defanged) {
      ++failed;
      std::cerr << "demalicious: " << s.id << ": " << (diag.empty() ? "failed" : diag) << "\n";
      continue;
    }
    outputs.push_back(std::move(*defanged));
  }
  write_evoset(a.out, outputs);
  std::cerr << "defanged " << outputs.size() << " samples, " << failed << " failed -> " << a.out
            << "\n";
  return 0;
}

// -------------------------------------------------------------- coevolve ---

struct CoevoArgs {
  std::string manifest_file, split_file, out, weights_file;
  CoevoConfig cfg;
  FeatureFlags feat;
  ArchFlags archf;
};

int cmd_coevolve(const CoevoArgs& a) {
  CorpusManifest m = read_manifest(a.manifest_file);
  SplitAssignment split = split_from_json(read_file(a.split_file));
  auto train = load_partition(m, split, Partition::train);
  auto val = load_partition(m, split, Partition::val);
  auto test = load_partition(m, split, Partition::test);
  std::vector<ScriptSample> pool;
  for (const auto& s : train)
    if (s.label == 1) pool.push_back(s);

  CoevoConfig cfg = a.cfg;
  if (!a.weights_file.empty()) cfg.initial_weights = weights_from_json(read_file(a.weights_file));

  CoevoResult res =
      coevolve(cfg, train, val, test, pool, a.feat.fcfg, a.archf.arch, std::filesystem::path(a.out));
  save_checkpoint(res.model, std::filesystem::path(a.out) / "model.ckpt");
  write_file(std::filesystem::path(a.out) / "weights.json", weights_to_json(res.weights));

  if (res.aborted) {
    std::cerr << "coevolve aborted: " << res.abort_reason << " (logs kept under " << a.out
              << ")\n";
    return 2;
  }
  std::cerr << "coevolve finished after " << res.rounds.size() << " rounds";
  if (!res.rounds.empty())
    std::cerr << ", held-out F1 " << res.rounds.back().heldout.f1 << ", evasion rate "
              << res.rounds.back().evasion;
  std::cerr << ", evoset " << res.evoset.size() << " samples -> " << a.out << "\n";
  return 0;
}

// ------------------------------------------------------- dump-embeddings ---

struct DumpArgs {
  std::string manifest_file, model_file, split_file, split_name = "test", out;
};

int cmd_dump_embeddings(const DumpArgs& a) {
  CorpusManifest m = read_manifest(a.manifest_file);
  DetectorModel model = load_checkpoint(a.model_file);
  std::vector<ScriptSample> samples;
  if (!a.split_file.empty()) {
    SplitAssignment split = split_from_json(read_file(a.split_file));
    samples = load_partition(m, split, partition_from_name(a.split_name));
  } else {
    for (const auto& e : m.entries) samples.push_back(load_sample(m, e.id));
  }
  if (samples.empty()) throw UsageError("no samples selected");

  Dataset ds = to_dataset(samples, model.vocab, model.fcfg);
  auto rows = fused_embeddings(model, ds);

  std::string csv = "id,label";
  for (size_t d = 0; d < model.arch.fused(); ++d) csv += ",h" + std::to_string(d);
  csv += "\n";
  char buf[32];
  for (size_t i = 0; i < rows.size(); ++i) {
    csv += ds[i].id + "," + std::to_string(ds[i].label);
    for (float v : rows[i]) {
      snprintf(buf, sizeof buf, ",%.6f", double(v));
      csv += buf;
    }
    csv += "\n";
  }
  emit_data(a.out, csv);
  return 0;
}

// ---------------------------------------------------------------- report ---

int cmd_report(const std::string& in, const std::string& format, const std::string& out) {
  json j = json::parse(read_file(in));
  if (format == "json") {
    json o;
    o["schema_version"] = kReportSchemaVersion;
    o["metrics"] = j.contains("metrics") ? j["metrics"] : json(nullptr);
    emit_data(out, o.dump(2) + "\n");
  } else if (format == "csv") {
    std::vector<Metrics> rows;
    if (j.contains("metrics") && !j["metrics"].is_null())
      rows.push_back(metrics_from_json(j["metrics"]));
    emit_data(out, metrics_csv(rows));
  } else {
    throw UsageError("unknown report format: " + format);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PHP webshell detection toolkit: corpus tools, three-view detector, "
               "obfuscation mutator, and adversarial co-training"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; explicit flags win");
  app.set_help_all_flag("--help-all", "Expanded help for every subcommand");

  std::function<int()> action;

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Ingest, split, and synthesize labeled corpora");
  corpus->require_subcommand(1);
  {
    auto args = std::make_shared<std::tuple<std::string, std::string, std::string>>();
    auto* c = corpus->add_subcommand("ingest", "Build a manifest from a directory tree");
    c->add_option("dir", std::get<0>(*args), "Corpus root directory")->required();
    c->add_option("--labels", std::get<1>(*args), "Label rulefile (default: benign/, webshell/)");
    c->add_option("--out", std::get<2>(*args), "Manifest path ('-' for stdout)");
    c->callback([args, &action] {
      action = [args] {
        return cmd_corpus_ingest(std::get<0>(*args), std::get<1>(*args), std::get<2>(*args));
      };
    });
  }
  {
    struct A {
      std::string manifest, ratios = "0.8,0.1,0.1", out;
      uint64_t seed = 0;
    };
    auto args = std::make_shared<A>();
    auto* c = corpus->add_subcommand("split", "Stratified train/val/test assignment");
    c->add_option("manifest", args->manifest, "Manifest file")->required();
    c->add_option("--ratios", args->ratios, "Three comma-separated fractions");
    c->add_option("--seed", args->seed, "Shuffle seed")->required();
    c->add_option("--out", args->out, "Split JSON path (default: stdout)");
    c->callback([args, &action] {
      action = [args] { return cmd_corpus_split(args->manifest, args->ratios, args->seed, args->out); };
    });
  }
  {
    struct A {
      size_t benign = 0, positive = 0;
      uint64_t seed = 0;
      std::string out;
    };
    auto args = std::make_shared<A>();
    auto* c = corpus->add_subcommand("synth", "Write deterministic test-pattern fixtures");
    c->add_option("--benign", args->benign, "Benign fixture count")->required();
    c->add_option("--positive", args->positive, "Webshell fixture count")->required();
    c->add_option("--seed", args->seed, "Content seed")->required();
    c->add_option("--out", args->out, "Output directory")->required();
    c->callback([args, &action] {
      action = [args] { return cmd_corpus_synth(args->benign, args->positive, args->seed, args->out); };
    });
  }

  // extract
  auto* extract = app.add_subcommand("extract", "Run one feature view on a file");
  extract->require_subcommand(1);
  {
    auto file = std::make_shared<std::string>();
    auto feat = std::make_shared<FeatureFlags>();
    auto* c = extract->add_subcommand("source", "Compressed, truncated token stream");
    c->add_option("file", *file, "PHP file")->required();
    feat->attach(c);
    c->callback([file, feat, &action] {
      action = [file, feat] { return cmd_extract_source(*file, feat->fcfg); };
    });
  }
  {
    auto file = std::make_shared<std::string>();
    auto feat = std::make_shared<FeatureFlags>();
    auto* c = extract->add_subcommand("ast", "Pruned syntax-node-type sequence");
    c->add_option("file", *file, "PHP file")->required();
    feat->attach(c);
    c->callback([file, feat, &action] {
      action = [file, feat] { return cmd_extract_ast(*file, feat->fcfg); };
    });
  }
  {
    auto file = std::make_shared<std::string>();
    auto feat = std::make_shared<FeatureFlags>();
    auto* c = extract->add_subcommand("stats", "Risky-call counts, line shape, entropy");
    c->add_option("file", *file, "PHP file")->required();
    feat->attach(c);
    c->callback([file, feat, &action] {
      action = [file, feat] { return cmd_extract_stats(*file, feat->fcfg); };
    });
  }

  // train
  {
    auto args = std::make_shared<TrainArgs>();
    auto* c = app.add_subcommand("train", "Train the fused detector on a split");
    c->add_option("manifest", args->manifest_file, "Manifest file")->required();
    c->add_option("--split", args->split_file, "Split JSON from 'corpus split'")->required();
    c->add_option("--out", args->out, "Checkpoint path")->required();
    c->add_option("--seed", args->seed, "Init/shuffle/dropout seed")->required();
    c->add_option("--epochs", args->hyper.epochs, "Training epochs");
    c->add_option("--batch", args->hyper.batch, "Minibatch size");
    c->add_option("--lr", args->hyper.lr, "AdamW learning rate");
    c->add_option("--weight-decay", args->hyper.weight_decay, "AdamW weight decay");
    c->add_option("--delta", args->hyper.delta, "Decision threshold for validation metrics");
    c->add_option("--views", args->views_text, "Comma list of views: src,ast,stat");
    c->add_option("--log", args->log_file, "Per-epoch training log (JSON lines)");
    args->feat.attach(c);
    args->archf.attach(c);
    c->callback([args, &action] { action = [args] { return cmd_train(*args); }; });
  }

  // eval
  {
    auto args = std::make_shared<EvalArgs>();
    auto* c = app.add_subcommand("eval", "Metrics for a checkpoint on a manifest split");
    c->add_option("manifest", args->manifest_file, "Manifest file")->required();
    c->add_option("--model", args->model_file, "Checkpoint")->required();
    c->add_option("--split-file", args->split_file, "Split JSON (omit to use every sample)");
    c->add_option("--split", args->split_name, "Partition: train, val, test");
    c->add_option("--delta", args->delta, "Decision threshold");
    c->add_option("--report", args->report, "Output path (default: stdout)");
    c->add_option("--format", args->format, "json or csv");
    c->callback([args, &action] { action = [args] { return cmd_eval(*args); }; });
  }

  // scan
  {
    auto args = std::make_shared<ScanArgs>();
    auto* c = app.add_subcommand("scan", "Score every file under a directory");
    c->add_option("dir", args->dir, "Directory to scan")->required();
    c->add_option("--model", args->model_file, "Checkpoint")->required();
    c->add_option("--delta", args->delta, "Decision threshold");
    c->add_option("--report", args->report, "Report path (default: stdout)");
    c->add_option("--jobs", args->jobs, "Parallel scoring workers");
    c->callback([args, &action] { action = [args] { return cmd_scan(*args); }; });
  }

  // mutate
  {
    auto args = std::make_shared<MutateArgs>();
    auto* c = app.add_subcommand("mutate", "Generate obfuscated variants of positives");
    c->add_option("manifest", args->manifest_file, "Manifest file")->required();
    c->add_option("--n", args->n, "Candidates to draw")->required();
    c->add_option("--seed", args->seed, "Sampling seed")->required();
    c->add_option("--weights", args->weights_file, "Operator weights JSON (default: uniform)");
    c->add_option("--out", args->out, "Output directory")->required();
    c->add_option("--jobs", args->jobs, "Parallel workers");
    c->callback([args, &action] { action = [args] { return cmd_mutate(*args); }; });
  }

  // demalicious
  {
    auto args = std::make_shared<DemaliciousArgs>();
    auto* c = app.add_subcommand("demalicious",
                                 "Strip sinks from positives, keeping obfuscation scaffolding");
    c->add_option("manifest", args->manifest_file, "Manifest file")->required();
    c->add_option("--out", args->out, "Output directory")->required();
    c->callback([args, &action] { action = [args] { return cmd_demalicious(*args); }; });
  }

  // coevolve
  {
    auto args = std::make_shared<CoevoArgs>();
    auto* c = app.add_subcommand("coevolve", "Adversarial co-training loop");
    c->add_option("manifest", args->manifest_file, "Manifest file")->required();
    c->add_option("--split", args->split_file, "Split JSON from 'corpus split'")->required();
    c->add_option("--rounds", args->cfg.rounds_max, "Maximum rounds");
    c->add_option("--candidates", args->cfg.candidates_per_round, "Candidates per round")
        ->required();
    c->add_option("--delta", args->cfg.delta, "Decision threshold");
    c->add_option("--eta", args->cfg.eta, "Mutation weight update rate");
    c->add_option("--eps-f1", args->cfg.eps_f1, "Plateau band for held-out F1");
    c->add_option("--eps-er", args->cfg.eps_er, "Plateau band for evasion rate");
    c->add_option("--patience", args->cfg.patience, "In-band rounds before stopping");
    c->add_option("--seed", args->cfg.seed, "Run seed")->required();
    c->add_option("--epochs", args->cfg.hyper.epochs, "Initial training epochs");
    c->add_option("--batch", args->cfg.hyper.batch, "Minibatch size");
    c->add_option("--lr", args->cfg.hyper.lr, "AdamW learning rate");
    c->add_option("--epochs-per-round", args->cfg.epochs_per_round, "Refresh epochs per round");
    c->add_flag("--retrain", args->cfg.retrain_from_scratch,
                "Retrain from scratch each round instead of refreshing");
    c->add_option("--weights", args->weights_file, "Initial operator weights JSON");
    c->add_option("--jobs", args->cfg.jobs, "Parallel generation/scoring workers");
    c->add_option("--out", args->out, "Run directory")->required();
    args->feat.attach(c);
    args->archf.attach(c);
    c->callback([args, &action] { action = [args] { return cmd_coevolve(*args); }; });
  }

  // dump-embeddings
  {
    auto args = std::make_shared<DumpArgs>();
    auto* c = app.add_subcommand("dump-embeddings", "Fused-layer embeddings as CSV");
    c->add_option("manifest", args->manifest_file, "Manifest file")->required();
    c->add_option("--model", args->model_file, "Checkpoint")->required();
    c->add_option("--split-file", args->split_file, "Split JSON (omit to use every sample)");
    c->add_option("--split", args->split_name, "Partition: train, val, test");
    c->add_option("--out", args->out, "CSV path")->required();
    c->callback([args, &action] { action = [args] { return cmd_dump_embeddings(*args); }; });
  }

  // report
  {
    auto args = std::make_shared<std::tuple<std::string, std::string, std::string>>();
    std::get<1>(*args) = "csv";
    auto* c = app.add_subcommand("report", "Reformat an eval/scan report");
    c->add_option("input", std::get<0>(*args), "Report JSON from eval or scan")->required();
    c->add_option("--format", std::get<1>(*args), "csv or json");
    c->add_option("--out", std::get<2>(*args), "Output path (default: stdout)");
    c->callback([args, &action] {
      action = [args] {
        return cmd_report(std::get<0>(*args), std::get<1>(*args), std::get<2>(*args));
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    return action ? action() : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
