#include "shellsift/coevolution.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "shellsift/source_view.hpp"
#include "shellsift/util.hpp"

namespace shellsift {

using nlohmann::json;

namespace {

std::string safe_stem(const std::string& id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')
               ? c
               : '_';
  if (out.size() > 80) out.resize(80);
  return out;
}

// The hash suffix keeps paths unique: exchange dedups by content hash, so no
// two evoset samples share one.
CorpusManifest make_evoset_manifest(const std::vector<ScriptSample>& evoset,
                                    std::filesystem::path root) {
  CorpusManifest m;
  m.root = std::move(root);
  for (const auto& s : evoset) {
    ManifestEntry e;
    e.id = s.id;
    e.path = std::string(s.label == 1 ? "webshell/" : "benign/") + safe_stem(s.id) + "-" +
             s.content_hash.substr(0, 8) + ".php";
    e.label = s.label;
    e.origin = s.origin;
    e.lineage = s.lineage;
    e.hash = s.content_hash;
    m.entries.push_back(std::move(e));
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return m;
}

Dataset make_dataset(const std::vector<ScriptSample>& samples, const TokenVocab& vocab,
                     const FeatureConfig& fcfg) {
  Dataset out;
  out.reserve(samples.size());
  for (const auto& s : samples)
    out.push_back({s.id, s.label, extract_features(s.raw, vocab, fcfg)});
  return out;
}

void validate(const CoevoConfig& cfg) {
  if (cfg.rounds_max < 1) throw UsageError("rounds_max must be at least 1");
  if (cfg.candidates_per_round < 1) throw UsageError("candidates_per_round must be at least 1");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw UsageError("delta must be in (0, 1)");
  if (!(cfg.eta > 0.0 && cfg.eta < 1.0)) throw UsageError("eta must be in (0, 1)");
  if (cfg.eps_f1 < 0.0 || cfg.eps_er < 0.0)
    throw UsageError("plateau bands must be non-negative");
  if (cfg.patience < 1) throw UsageError("patience must be at least 1");
  if (cfg.epochs_per_round < 1) throw UsageError("epochs_per_round must be at least 1");
  if (cfg.jobs < 1) throw UsageError("jobs must be at least 1");
  for (const char* name : kOperatorRegistry)
    if (!cfg.initial_weights.w.count(name))
      throw UsageError(std::string("initial weights missing operator: ") + name);
}

std::string timing_line(const CoevoRoundLog& log) {
  json j;
  j["round"] = log.round;
  j["wall_ms"] = log.wall_ms;
  return j.dump() + "\n";
}

}  // namespace

GenerationResult generate_round(const std::vector<ScriptSample>& pool,
                                const OperatorWeights& weights, size_t n, uint64_t seed,
                                int jobs) {
  if (pool.empty()) throw HardError("mutation pool is empty");
  for (const auto& s : pool)
    if (s.label != 1) throw UsageError("mutation pool must contain only label-1 samples");

  std::vector<std::optional<RoundCandidate>> slots(n);
  parallel_for(n, jobs, [&](size_t i) {
    Rng pick(derive_seed(seed, "parent", i));
    size_t parent = pick.below(pool.size());
    MutationRecipe recipe = sample_recipe(weights, derive_seed(seed, "candidate", i));
    try {
      MutationResult res = apply_recipe(pool[parent], recipe);
      if (!res.no_op)
        slots[i] = RoundCandidate{std::move(res.child), std::move(recipe), parent,
                                  std::move(res.applied), std::move(res.skipped)};
    } catch (const UsageError&) {
      // a parent that does not parse cleanly can never yield a mutation;
      // it counts toward the shortfall exactly like an all-no-op recipe
    }
  });

  GenerationResult out;
  for (auto& s : slots)
    if (s) out.candidates.push_back(std::move(*s));
  out.shortfall = n - out.candidates.size();
  return out;
}

PartitionResult partition(const std::vector<RoundCandidate>& candidates,
                          const DetectorModel& model, double delta, int jobs) {
  if (!(delta > 0.0 && delta < 1.0)) throw UsageError("delta must be in (0, 1)");
  PartitionResult out;
  out.scores.resize(candidates.size());
  parallel_for(candidates.size(), jobs,
               [&](size_t i) { out.scores[i] = score_bytes(model, candidates[i].sample.raw); });
  for (size_t i = 0; i < candidates.size(); ++i)
    (out.scores[i] >= delta ? out.rejected : out.evaded).push_back(i);
  return out;
}

double evasion_rate(size_t evaded, size_t generated) {
  if (generated == 0) throw UsageError("evasion rate undefined for an empty candidate set");
  if (evaded > generated) throw HardError("more evasions than candidates");
  return double(evaded) / double(generated);
}

ExchangeResult exchange(std::vector<ScriptSample>& train,
                        const std::vector<RoundCandidate>& candidates,
                        const std::vector<size_t>& evaded,
                        const std::vector<ScriptSample>& pool,
                        std::unordered_set<std::string>& seen,
                        std::vector<ScriptSample>* evoset) {
  ExchangeResult r;
  for (size_t idx : evaded) {
    const RoundCandidate& c = candidates.at(idx);
    if (seen.count(c.sample.content_hash)) {
      ++r.dup_skipped;
    } else {
      train.push_back(c.sample);
      seen.insert(c.sample.content_hash);
      if (evoset) evoset->push_back(c.sample);
      ++r.added_pos;
    }
    const ScriptSample* ancestor = c.parent < pool.size() ? &pool[c.parent] : nullptr;
    auto twin = de_malicious(c.sample, ancestor, ancestor ? &c.recipe : nullptr);
    if (!twin) {
      ++r.discarded_neg;
      continue;
    }
    if (seen.count(twin->content_hash)) {
      ++r.dup_skipped;
      continue;
    }
    train.push_back(*twin);
    seen.insert(twin->content_hash);
    if (evoset) evoset->push_back(*twin);
    ++r.added_neg;
  }
  return r;
}

std::string round_log_to_json(const CoevoRoundLog& log) {
  json j;
  j["round"] = log.round;
  j["generated"] = log.generated;
  j["rejected"] = log.rejected;
  j["evaded"] = log.evaded;
  j["evasion_rate"] = log.evasion;
  j["heldout"] = {{"accuracy", log.heldout.accuracy}, {"precision", log.heldout.precision},
                  {"recall", log.heldout.recall},     {"f1", log.heldout.f1},
                  {"tp", log.heldout.tp},             {"fp", log.heldout.fp},
                  {"tn", log.heldout.tn},             {"fn", log.heldout.fn}};
  j["mean_token_len"] = log.mean_token_len;
  j["exchanged_pos"] = log.exchanged_pos;
  j["exchanged_neg"] = log.exchanged_neg;
  j["discarded_neg"] = log.discarded_neg;
  j["dup_skipped"] = log.dup_skipped;
  j["shortfall"] = log.shortfall;
  j["train_size"] = log.train_size;
  j["weights"] = json(log.weights.w);
  return j.dump() + "\n";
}

std::string rounds_to_csv(const std::vector<CoevoRoundLog>& rounds) {
  std::string out = "round,evaded,evasion_rate,f1,mean_token_len\n";
  char buf[128];
  for (const auto& r : rounds) {
    snprintf(buf, sizeof buf, "%d,%zu,%.4f,%.4f,%.2f\n", r.round, r.evaded, r.evasion,
             r.heldout.f1, r.mean_token_len);
    out += buf;
  }
  return out;
}

bool plateaued(const std::vector<CoevoRoundLog>& rounds, const CoevoConfig& cfg) {
  if (cfg.patience < 1) return false;
  if (rounds.size() < size_t(cfg.patience) + 1) return false;
  for (int i = 0; i < cfg.patience; ++i) {
    const auto& cur = rounds[rounds.size() - 1 - size_t(i)];
    const auto& prev = rounds[rounds.size() - 2 - size_t(i)];
    if (std::abs(cur.heldout.f1 - prev.heldout.f1) >= cfg.eps_f1) return false;
    if (std::abs(cur.evasion - prev.evasion) >= cfg.eps_er) return false;
  }
  return true;
}

CorpusManifest write_evoset(const std::filesystem::path& dir,
                            const std::vector<ScriptSample>& evoset) {
  CorpusManifest m = make_evoset_manifest(evoset, dir);
  std::filesystem::create_directories(dir / "webshell");
  std::filesystem::create_directories(dir / "benign");
  for (const auto& e : m.entries) {
    for (const auto& s : evoset)
      if (s.id == e.id) {
        write_file(dir / e.path, s.raw);
        break;
      }
  }
  write_manifest(m, dir / "manifest.jsonl");
  return m;
}

CoevoResult coevolve(const CoevoConfig& cfg, const std::vector<ScriptSample>& train,
                     const std::vector<ScriptSample>& val,
                     const std::vector<ScriptSample>& test,
                     const std::vector<ScriptSample>& pool, const FeatureConfig& fcfg,
                     const ArchConfig& arch,
                     const std::optional<std::filesystem::path>& out_dir) {
  validate(cfg);

  // The vocabulary is built once from the initial training split and stays
  // frozen: exchanged samples are encoded with it, and checkpoints saved in
  // any round stay mutually comparable.
  std::vector<std::vector<std::string>> docs;
  docs.reserve(train.size());
  for (const auto& s : train) docs.push_back(source_token_texts(s.raw, fcfg.tau));
  TokenVocab vocab = TokenVocab::build(docs);

  OperatorWeights weights = cfg.initial_weights;
  weights.normalize();

  std::unordered_set<std::string> seen;
  for (const auto* split : {&train, &val, &test})
    for (const auto& s : *split) seen.insert(s.content_hash);

  // Frozen snapshot of pre-training mutations: the plateau signal is measured
  // against a set the exchange never touches.
  GenerationResult held =
      generate_round(pool, weights, cfg.candidates_per_round, derive_seed(cfg.seed, "heldout"),
                     cfg.jobs);
  std::vector<ScriptSample> heldout_samples = val;
  for (auto& c : held.candidates) {
    seen.insert(c.sample.content_hash);
    heldout_samples.push_back(std::move(c.sample));
  }

  Dataset train_ds = make_dataset(train, vocab, fcfg);
  Dataset val_ds = make_dataset(val, vocab, fcfg);
  Dataset heldout_ds = make_dataset(heldout_samples, vocab, fcfg);
  std::vector<ScriptSample> train_samples = train;

  CoevoResult result;
  uint64_t model_seed = derive_seed(cfg.seed, "model");
  result.model.build(vocab, fcfg, ViewMask{}, model_seed, arch);

  for (int k = 1; k <= cfg.rounds_max; ++k) {
    auto t0 = std::chrono::steady_clock::now();
    try {
      if (k == 1 || cfg.retrain_from_scratch) {
        if (k > 1) {
          DetectorModel fresh;
          fresh.build(vocab, fcfg, ViewMask{}, model_seed, arch);
          result.model = std::move(fresh);
        }
        train_detector(result.model, train_ds, val_ds, cfg.hyper);
      } else {
        size_t base = cfg.hyper.epochs + size_t(k - 2) * cfg.epochs_per_round;
        continue_training(result.model, train_ds, val_ds, cfg.epochs_per_round, base);
      }
    } catch (const HardError& e) {
      result.aborted = true;
      result.abort_reason = e.what();
      break;
    }

    GenerationResult gen = generate_round(pool, weights, cfg.candidates_per_round,
                                          derive_seed(cfg.seed, "round", uint64_t(k)), cfg.jobs);
    PartitionResult part = partition(gen.candidates, result.model, cfg.delta, cfg.jobs);

    CoevoRoundLog log;
    log.round = k;
    log.generated = gen.candidates.size();
    log.shortfall = gen.shortfall;
    log.rejected = part.rejected.size();
    log.evaded = part.evaded.size();
    log.evasion = log.generated == 0 ? 0.0 : evasion_rate(log.evaded, log.generated);
    log.heldout = evaluate(result.model, heldout_ds, cfg.delta);

    double tok_sum = 0;
    for (size_t idx : part.evaded)
      tok_sum += double(source_token_texts(gen.candidates[idx].sample.raw, fcfg.tau).size());
    log.mean_token_len = part.evaded.empty() ? 0.0 : tok_sum / double(part.evaded.size());

    size_t before = train_samples.size();
    ExchangeResult ex =
        exchange(train_samples, gen.candidates, part.evaded, pool, seen, &result.evoset);
    for (size_t i = before; i < train_samples.size(); ++i)
      train_ds.push_back({train_samples[i].id, train_samples[i].label,
                          extract_features(train_samples[i].raw, vocab, fcfg)});
    log.exchanged_pos = ex.added_pos;
    log.exchanged_neg = ex.added_neg;
    log.discarded_neg = ex.discarded_neg;
    log.dup_skipped = ex.dup_skipped;
    log.train_size = train_samples.size();

    std::vector<MutationRecipe> caught, evasive;
    for (size_t idx : part.rejected) caught.push_back(gen.candidates[idx].recipe);
    for (size_t idx : part.evaded) evasive.push_back(gen.candidates[idx].recipe);
    weights = update_weights(weights, caught, evasive, cfg.eta);
    log.weights = weights;

    log.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.rounds.push_back(std::move(log));
    if (plateaued(result.rounds, cfg)) break;
  }

  result.weights = weights;

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::string rounds_jsonl, timing;
    for (const auto& r : result.rounds) {
      rounds_jsonl += round_log_to_json(r);
      timing += timing_line(r);
    }
    write_file(*out_dir / "rounds.jsonl", rounds_jsonl);
    write_file(*out_dir / "rounds.csv", rounds_to_csv(result.rounds));
    write_file(*out_dir / "timing.jsonl", timing);
    result.evoset_manifest = write_evoset(*out_dir / "evoset", result.evoset);
  } else {
    result.evoset_manifest = make_evoset_manifest(result.evoset, {});
  }
  return result;
}

}  // namespace shellsift
