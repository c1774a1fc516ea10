#include "shellsift/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "shellsift/php_parser.hpp"
#include "shellsift/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace shellsift {

const char* origin_name(Origin o) {
  switch (o) {
    case Origin::original: return "original";
    case Origin::mutated: return "mutated";
    case Origin::de_malicious: return "de_malicious";
    case Origin::synthetic_fixture: return "synthetic_fixture";
  }
  throw HardError("invalid origin value");
}

Origin origin_from_name(std::string_view name) {
  if (name == "original") return Origin::original;
  if (name == "mutated") return Origin::mutated;
  if (name == "de_malicious") return Origin::de_malicious;
  if (name == "synthetic_fixture") return Origin::synthetic_fixture;
  throw IntegrityError("unknown origin: " + std::string(name));
}

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
  }
  throw HardError("invalid partition value");
}

static Partition partition_from_name(std::string_view name) {
  if (name == "train") return Partition::train;
  if (name == "val") return Partition::val;
  if (name == "test") return Partition::test;
  throw IntegrityError("unknown partition: " + std::string(name));
}

const ManifestEntry* CorpusManifest::find(std::string_view id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

std::array<size_t, 2> CorpusManifest::label_counts() const {
  std::array<size_t, 2> c{0, 0};
  for (const auto& e : entries) ++c[size_t(e.label)];
  return c;
}

std::vector<LabelRule> default_label_rules() {
  return {{"benign/", 0}, {"webshell/", 1}};
}

std::vector<LabelRule> parse_label_rules(std::string_view text) {
  std::vector<LabelRule> rules;
  size_t pos = 0, lineno = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    size_t sp = line.find(' ');
    if (sp == std::string_view::npos)
      throw UsageError("label rule line " + std::to_string(lineno) +
                       ": expected \"<label> <path-prefix>\"");
    std::string_view lab = line.substr(0, sp);
    std::string_view prefix = line.substr(sp + 1);
    while (!prefix.empty() && prefix.front() == ' ') prefix.remove_prefix(1);
    if ((lab != "0" && lab != "1") || prefix.empty())
      throw UsageError("label rule line " + std::to_string(lineno) + ": label must be 0 or 1");
    rules.push_back({std::string(prefix), lab == "1" ? 1 : 0});
  }
  if (rules.empty()) throw UsageError("label rulefile contains no rules");
  return rules;
}

IngestReport ingest(const fs::path& root, const std::vector<LabelRule>& rules) {
  if (!fs::is_directory(root)) throw UsageError("not a directory: " + root.string());
  if (rules.empty()) throw UsageError("no labeling rules given");

  std::vector<std::string> rel_paths;
  for (const auto& de : fs::recursive_directory_iterator(root)) {
    if (!de.is_regular_file()) continue;
    rel_paths.push_back(fs::relative(de.path(), root).generic_string());
  }
  std::sort(rel_paths.begin(), rel_paths.end());

  IngestReport report;
  report.manifest.root = root;
  for (const std::string& rel : rel_paths) {
    const LabelRule* matched = nullptr;
    bool ambiguous = false;
    for (const auto& r : rules) {
      if (rel.rfind(r.prefix, 0) == 0) {
        if (matched) ambiguous = true;
        matched = &r;
      }
    }
    if (!matched) {
      report.errors.push_back(rel + ": no labeling rule matches");
      continue;
    }
    if (ambiguous) {
      report.errors.push_back(rel + ": multiple labeling rules match");
      continue;
    }
    std::string bytes;
    try {
      bytes = read_file(root / rel);
    } catch (const std::runtime_error& e) {
      report.errors.push_back(rel + ": " + e.what());
      continue;
    }
    ManifestEntry e;
    e.id = rel;
    e.path = rel;
    e.label = matched->label;
    e.origin = Origin::original;
    e.hash = sha256_hex(bytes);
    report.manifest.entries.push_back(std::move(e));
  }
  if (report.manifest.entries.empty()) throw HardError("no samples matched");
  return report;
}

SplitAssignment stratified_split(const CorpusManifest& manifest,
                                 const std::array<double, 3>& ratios, uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios)
    if (!(r > 0)) throw UsageError("split ratios must all be positive");
  if (std::abs(sum - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");

  std::map<int, std::vector<std::string>> by_label;
  for (const auto& e : manifest.entries) by_label[e.label].push_back(e.id);

  SplitAssignment out;
  out.ratios = ratios;
  out.seed = seed;
  for (auto& [label, ids] : by_label) {
    if (ids.size() < 3)
      throw HardError("label " + std::to_string(label) +
                      " has fewer than 3 samples; cannot populate all partitions");
    Rng rng(derive_seed(seed, "split", uint64_t(label)));
    rng.shuffle(ids);

    size_t n = ids.size();
    std::array<size_t, 3> want{};
    std::array<double, 3> frac{};
    size_t assigned = 0;
    for (size_t p = 0; p < 3; ++p) {
      double exact = double(n) * ratios[p];
      want[p] = size_t(exact);
      frac[p] = exact - double(want[p]);
      assigned += want[p];
    }
    std::array<size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return frac[a] > frac[b]; });
    for (size_t k = 0; assigned < n; ++k, ++assigned) ++want[order[k % 3]];

    size_t pos = 0;
    for (size_t p = 0; p < 3; ++p)
      for (size_t k = 0; k < want[p]; ++k) out.parts.emplace(ids[pos++], Partition(p));
  }
  return out;
}

std::vector<std::string> split_ids(const SplitAssignment& split, Partition p) {
  std::vector<std::string> ids;
  for (const auto& [id, part] : split.parts)
    if (part == p) ids.push_back(id);
  return ids;
}

std::string split_to_json(const SplitAssignment& split) {
  json assign = json::object();
  for (const auto& [id, part] : split.parts) assign[id] = partition_name(part);
  json j{{"seed", split.seed},
         {"ratios", {split.ratios[0], split.ratios[1], split.ratios[2]}},
         {"assign", std::move(assign)}};
  return j.dump(2) + "\n";
}

SplitAssignment split_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    SplitAssignment out;
    out.seed = j.at("seed").get<uint64_t>();
    for (size_t p = 0; p < 3; ++p) out.ratios[p] = j.at("ratios").at(p).get<double>();
    for (const auto& [id, part] : j.at("assign").items())
      out.parts.emplace(id, partition_from_name(part.get<std::string>()));
    return out;
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("split file malformed: ") + e.what());
  }
}

ScriptSample load_sample(const CorpusManifest& manifest, std::string_view id) {
  const ManifestEntry* e = manifest.find(id);
  if (!e) throw NotFoundError("unknown sample id: " + std::string(id));
  std::string bytes = read_file(manifest.root / e->path);
  std::string hash = sha256_hex(bytes);
  if (hash != e->hash)
    throw IntegrityError("content hash mismatch for " + e->id + " (file changed after ingest)");
  ScriptSample s;
  s.id = e->id;
  s.raw = std::move(bytes);
  s.label = e->label;
  s.origin = e->origin;
  s.lineage = e->lineage;
  s.content_hash = e->hash;
  return s;
}

std::string manifest_to_jsonl(const CorpusManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    json j{{"id", e.id},          {"path", e.path},
           {"label", e.label},    {"origin", origin_name(e.origin)},
           {"hash", e.hash},      {"hash_alg", e.hash_alg}};
    if (e.lineage)
      j["lineage"] = {{"parent_id", e.lineage->parent_id},
                      {"recipe_id", e.lineage->recipe_id},
                      {"seed", e.lineage->seed}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

CorpusManifest manifest_from_jsonl(std::string_view text, fs::path root) {
  CorpusManifest m;
  m.root = std::move(root);
  size_t pos = 0, lineno = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.path = j.at("path").get<std::string>();
      e.label = j.at("label").get<int>();
      if (e.label != 0 && e.label != 1) throw IntegrityError("label must be 0 or 1");
      e.origin = origin_from_name(j.at("origin").get<std::string>());
      e.hash = j.at("hash").get<std::string>();
      e.hash_alg = j.at("hash_alg").get<std::string>();
      if (auto it = j.find("lineage"); it != j.end()) {
        Lineage l;
        l.parent_id = it->at("parent_id").get<std::string>();
        l.recipe_id = it->at("recipe_id").get<std::string>();
        l.seed = it->at("seed").get<uint64_t>();
        e.lineage = std::move(l);
      }
      m.entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw IntegrityError("manifest line " + std::to_string(lineno) +
                           " malformed: " + e.what());
    }
  }
  return m;
}

void write_manifest(const CorpusManifest& manifest, const fs::path& file) {
  write_file(file, manifest_to_jsonl(manifest));
}

CorpusManifest read_manifest(const fs::path& file) {
  return manifest_from_jsonl(read_file(file), file.parent_path());
}

// ---------------------------------------------------------------------------
// Fixture synthesis. Benign files rotate through four mundane PHP categories;
// positives rotate through standard documented webshell test patterns (risky
// sink fed from request input, single and multi stage). Content depends only
// on (seed, index), never on the output directory.

namespace {

std::string pick(Rng& rng, const std::vector<std::string>& pool) { return pool[rng.below(pool.size())]; }

const std::vector<std::string> kVarNames = {"data", "payload", "input", "tmp",
                                            "raw",  "buf",     "val",   "req"};
const std::vector<std::string> kKeys = {"x", "cmd", "c", "q", "id", "k", "f", "a", "d"};
const std::vector<std::string> kSources = {"_GET", "_POST", "_REQUEST", "_COOKIE"};

std::string benign_config(Rng& rng) {
  std::string app = pick(rng, {"shop", "blog", "wiki", "forum", "portal", "tracker"});
  std::string s = "<?php\n\nreturn [\n";
  s += "    'name' => '" + app + "',\n";
  s += "    'debug' => " + std::string(rng.below(2) ? "true" : "false") + ",\n";
  s += "    'cache_ttl' => " + std::to_string(60 * (1 + rng.below(60))) + ",\n";
  s += "    'database' => [\n";
  s += "        'host' => 'localhost',\n";
  s += "        'port' => " + std::to_string(3306 + rng.below(4)) + ",\n";
  s += "        'name' => '" + app + "_db',\n";
  s += "    ],\n";
  s += "    'locales' => ['en', 'de', 'fr'],\n";
  s += "];\n";
  return s;
}

std::string benign_routing(Rng& rng) {
  std::string home = pick(rng, {"home", "index", "landing"});
  std::string s = "<?php\n\n$routes = [\n";
  s += "    '/' => '" + home + "',\n";
  s += "    '/about' => 'about',\n";
  s += "    '/items' => 'item_list',\n";
  s += "    '/items/show' => 'item_show',\n";
  s += "];\n\n";
  s += "function dispatch($routes, $path) {\n";
  s += "    $path = '/' . trim($path, '/');\n";
  s += "    if (isset($routes[$path])) {\n";
  s += "        return $routes[$path];\n";
  s += "    }\n";
  s += "    return 'not_found';\n";
  s += "}\n\n";
  s += "$page = dispatch($routes, $_SERVER['REQUEST_URI'] ?? '/');\n";
  s += "echo 'view: ' . $page;\n";
  return s;
}

std::string benign_strings(Rng& rng) {
  std::string fn = pick(rng, {"slugify", "normalize", "labelize"});
  std::string sep = rng.below(2) ? "-" : "_";
  std::string s = "<?php\n\n";
  s += "function " + fn + "($text) {\n";
  s += "    $text = strtolower(trim($text));\n";
  s += "    $text = preg_replace('/[^a-z0-9]+/', '" + sep + "', $text);\n";
  s += "    return trim($text, '" + sep + "');\n";
  s += "}\n\n";
  s += "function truncate($text, $limit = " + std::to_string(20 + rng.below(60)) + ") {\n";
  s += "    if (strlen($text) <= $limit) {\n";
  s += "        return $text;\n";
  s += "    }\n";
  s += "    return substr($text, 0, $limit) . '...';\n";
  s += "}\n\n";
  s += "foreach (['Hello World', 'Some Title'] as $t) {\n";
  s += "    echo " + fn + "($t) . \"\\n\";\n";
  s += "}\n";
  return s;
}

std::string benign_template(Rng& rng) {
  std::string cls = pick(rng, {"View", "Template", "Page"});
  std::string s = "<?php\n\n";
  s += "class " + cls + " {\n";
  s += "    private $vars = [];\n\n";
  s += "    public function set($key, $value) {\n";
  s += "        $this->vars[$key] = $value;\n";
  s += "        return $this;\n";
  s += "    }\n\n";
  s += "    public function render($layout) {\n";
  s += "        foreach ($this->vars as $key => $value) {\n";
  s += "            $layout = str_replace('{{' . $key . '}}', $value, $layout);\n";
  s += "        }\n";
  s += "        return $layout;\n";
  s += "    }\n";
  s += "}\n\n";
  s += "$v = new " + cls + "();\n";
  s += "$v->set('title', '" + pick(rng, {"Dashboard", "Reports", "Settings"}) + "');\n";
  s += "echo $v->render('<h1>{{title}}</h1>');\n";
  return s;
}

std::string positive_one_liner(Rng& rng) {
  std::string src = pick(rng, kSources);
  std::string key = pick(rng, kKeys);
  switch (rng.below(4)) {
    case 0: return "<?php eval($" + src + "['" + key + "']); ?>\n";
    case 1: return "<?php system($" + src + "['" + key + "']); ?>\n";
    case 2: return "<?php echo shell_exec($" + src + "['" + key + "']); ?>\n";
    default: return "<?php assert($" + src + "['" + key + "']); ?>\n";
  }
}

std::string positive_decode_stage(Rng& rng) {
  std::string var = pick(rng, kVarNames);
  std::string src = pick(rng, kSources);
  std::string key = pick(rng, kKeys);
  std::string s = "<?php\n";
  s += "$" + var + " = $" + src + "['" + key + "'];\n";
  s += "eval(base64_decode($" + var + "));\n";
  return s;
}

std::string positive_guarded(Rng& rng) {
  std::string src = pick(rng, kSources);
  std::string key = pick(rng, kKeys);
  std::string sink = pick(rng, {"passthru", "exec", "system"});
  std::string s = "<?php\n";
  s += "if (isset($" + src + "['" + key + "'])) {\n";
  s += "    " + sink + "($" + src + "['" + key + "']);\n";
  s += "}\n";
  return s;
}

std::string positive_multi_stage(Rng& rng) {
  std::string var = pick(rng, kVarNames);
  std::string src = pick(rng, kSources);
  std::string key = pick(rng, kKeys);
  std::string s = "<?php\n";
  s += "$" + var + " = $" + src + "['" + key + "'];\n";
  s += "$code = gzinflate(base64_decode($" + var + "));\n";
  s += "eval($code);\n";
  return s;
}

std::string positive_variable_call(Rng& rng) {
  std::string src = pick(rng, kSources);
  std::string key = pick(rng, kKeys);
  std::string s = "<?php\n";
  s += "$fn = $" + src + "['" + key + "'];\n";
  s += "$arg = base64_decode($" + src + "['payload'] ?? '');\n";
  s += "echo $fn($arg);\n";
  return s;
}

std::string make_benign(Rng& rng, size_t index) {
  switch (index % 4) {
    case 0: return benign_config(rng);
    case 1: return benign_routing(rng);
    case 2: return benign_strings(rng);
    default: return benign_template(rng);
  }
}

std::string make_positive(Rng& rng, size_t index) {
  switch (index % 5) {
    case 0: return positive_one_liner(rng);
    case 1: return positive_decode_stage(rng);
    case 2: return positive_guarded(rng);
    case 3: return positive_multi_stage(rng);
    default: return positive_variable_call(rng);
  }
}

std::string num4(size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", n);
  return buf;
}

}  // namespace

CorpusManifest synth_fixtures(size_t n_benign, size_t n_positive, uint64_t seed,
                              const fs::path& out_dir) {
  if (n_benign < 1 || n_positive < 1)
    throw UsageError("fixture counts must both be at least 1");
  fs::create_directories(out_dir / "benign");
  fs::create_directories(out_dir / "webshell");

  CorpusManifest m;
  m.root = out_dir;
  auto emit = [&](const std::string& rel, int label, const std::string& body) {
    write_file(out_dir / rel, body);
    ManifestEntry e;
    e.id = rel;
    e.path = rel;
    e.label = label;
    e.origin = Origin::synthetic_fixture;
    e.hash = sha256_hex(body);
    m.entries.push_back(std::move(e));
  };
  for (size_t i = 0; i < n_benign; ++i) {
    Rng rng(derive_seed(seed, "fixture-benign", i));
    emit("benign/b" + num4(i) + ".php", 0, make_benign(rng, i));
  }
  for (size_t i = 0; i < n_positive; ++i) {
    Rng rng(derive_seed(seed, "fixture-positive", i));
    emit("webshell/w" + num4(i) + ".php", 1, make_positive(rng, i));
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return m;
}

}  // namespace shellsift
