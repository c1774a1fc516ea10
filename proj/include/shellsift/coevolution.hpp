#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "shellsift/corpus.hpp"
#include "shellsift/detector.hpp"
#include "shellsift/transform.hpp"

namespace shellsift {

// Adversarial training loop: mutate known webshells, find the ones the current
// detector misses, feed those back as hard positives (plus their defanged
// twins as hard negatives), and shift mutation weight toward what worked.

struct CoevoConfig {
  int rounds_max = 6;
  size_t candidates_per_round = 0;  // required, >= 1
  double delta = 0.5;               // decision threshold for catching candidates
  double eta = 0.2;                 // mutation weight update rate
  double eps_f1 = 0.005;            // plateau band for held-out F1
  double eps_er = 0.02;             // plateau band for the evasion rate
  int patience = 2;                 // consecutive in-band rounds before stopping
  uint64_t seed = 0;
  size_t epochs_per_round = 3;      // detector refresh budget after round 1
  bool retrain_from_scratch = false;
  int jobs = 1;
  TrainHyper hyper;                 // initial training and refresh hyperparameters
  OperatorWeights initial_weights = OperatorWeights::uniform();
};

struct RoundCandidate {
  ScriptSample sample;
  MutationRecipe recipe;
  size_t parent = 0;  // index into the mutation pool
  std::vector<std::string> applied, skipped;
};

struct GenerationResult {
  std::vector<RoundCandidate> candidates;
  // recipes that applied nothing (or hit an unusable parent) and were dropped
  size_t shortfall = 0;
};

GenerationResult generate_round(const std::vector<ScriptSample>& pool,
                                const OperatorWeights& weights, size_t n, uint64_t seed,
                                int jobs = 1);

struct PartitionResult {
  std::vector<size_t> rejected;  // q >= delta: the detector caught these
  std::vector<size_t> evaded;    // q < delta: undetected, become hard samples
  std::vector<double> scores;    // aligned with the candidate list
};

PartitionResult partition(const std::vector<RoundCandidate>& candidates,
                          const DetectorModel& model, double delta, int jobs = 1);

double evasion_rate(size_t evaded, size_t generated);

struct ExchangeResult {
  size_t added_pos = 0;
  size_t added_neg = 0;
  size_t discarded_neg = 0;  // defanging failed or did not verify benign
  size_t dup_skipped = 0;    // content hash already present somewhere it matters
};

// Appends the evaded candidates to `train` as label-1 hard samples and their
// verified de-malicious twins as label-0 hard samples. `seen` carries every
// content hash that must never be added (current train data, held-out splits,
// prior exchanges); it is extended as samples land. When `evoset` is given the
// appended samples are also recorded there in exchange order.
ExchangeResult exchange(std::vector<ScriptSample>& train,
                        const std::vector<RoundCandidate>& candidates,
                        const std::vector<size_t>& evaded,
                        const std::vector<ScriptSample>& pool,
                        std::unordered_set<std::string>& seen,
                        std::vector<ScriptSample>* evoset = nullptr);

struct CoevoRoundLog {
  int round = 0;  // 1-based
  size_t generated = 0;
  size_t rejected = 0;
  size_t evaded = 0;
  double evasion = 0;         // evaded / generated
  Metrics heldout;            // fixed validation split plus the frozen snapshot
  double mean_token_len = 0;  // mean source-token count over the evaded set
  size_t exchanged_pos = 0;
  size_t exchanged_neg = 0;
  size_t discarded_neg = 0;
  size_t dup_skipped = 0;
  size_t shortfall = 0;
  size_t train_size = 0;      // after this round's exchange
  OperatorWeights weights;    // snapshot after this round's update
  double wall_ms = 0;         // written to the timing sidecar, not the round log
};

// One JSON object per round. Timing is deliberately left out so the file is
// byte-stable under fixed seeds; it goes to a separate sidecar instead.
std::string round_log_to_json(const CoevoRoundLog& log);
std::string rounds_to_csv(const std::vector<CoevoRoundLog>& rounds);

// True when the last `patience` round-over-round deltas of held-out F1 and
// evasion rate all sit inside the configured bands.
bool plateaued(const std::vector<CoevoRoundLog>& rounds, const CoevoConfig& cfg);

struct CoevoResult {
  DetectorModel model;
  OperatorWeights weights;
  std::vector<CoevoRoundLog> rounds;
  std::vector<ScriptSample> evoset;  // exchanged hard samples in exchange order
  CorpusManifest evoset_manifest;
  bool aborted = false;       // detector blew up mid-loop; logs up to that point kept
  std::string abort_reason;
};

// Runs the full loop. `test` never enters training; its hashes only guard the
// exchange against leakage. When out_dir is set, writes rounds.jsonl,
// rounds.csv, timing.jsonl, and the materialized evoset under it.
CoevoResult coevolve(const CoevoConfig& cfg, const std::vector<ScriptSample>& train,
                     const std::vector<ScriptSample>& val,
                     const std::vector<ScriptSample>& test,
                     const std::vector<ScriptSample>& pool, const FeatureConfig& fcfg = {},
                     const ArchConfig& arch = {},
                     const std::optional<std::filesystem::path>& out_dir = std::nullopt);

// Writes every evoset sample under dir/webshell or dir/benign plus a
// manifest.jsonl, and returns the manifest rooted at dir.
CorpusManifest write_evoset(const std::filesystem::path& dir,
                            const std::vector<ScriptSample>& evoset);

}  // namespace shellsift
