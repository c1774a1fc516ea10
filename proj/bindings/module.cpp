// Python bindings for the main operations: feature views, sink removal,
// mutation, detector training/scoring, and the co-training loop.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shellsift/ast_view.hpp"
#include "shellsift/coevolution.hpp"
#include "shellsift/corpus.hpp"
#include "shellsift/detector.hpp"
#include "shellsift/source_view.hpp"
#include "shellsift/stats_view.hpp"
#include "shellsift/transform.hpp"
#include "shellsift/util.hpp"

namespace py = pybind11;
using namespace shellsift;

namespace {

using Rows = std::vector<std::pair<std::string, int>>;

std::vector<ScriptSample> to_samples(const Rows& rows, const char* prefix) {
  std::vector<ScriptSample> out;
  out.reserve(rows.size());
  size_t i = 0;
  for (const auto& [code, label] : rows) {
    ScriptSample s;
    s.id = std::string(prefix) + std::to_string(i++);
    s.raw = code;
    s.label = label;
    s.content_hash = sha256_hex(code);
    out.push_back(std::move(s));
  }
  return out;
}

ViewMask mask_from(bool src, bool ast, bool stat) {
  if (!src && !ast && !stat) throw UsageError("at least one view must stay enabled");
  return ViewMask{src, ast, stat};
}

ArchConfig arch_from(size_t src_embed, size_t src_filters, size_t ast_embed, size_t ast_filters,
                     size_t stat_out, size_t hidden) {
  ArchConfig a;
  a.src_embed_dim = src_embed;
  a.src_filters = src_filters;
  a.ast_embed_dim = ast_embed;
  a.ast_filters = ast_filters;
  a.stat_out_dim = stat_out;
  a.hidden_dim = hidden;
  return a;
}

OperatorWeights weights_from(const std::optional<std::map<std::string, double>>& w) {
  if (!w) return OperatorWeights::uniform();
  OperatorWeights out;
  out.w = *w;
  out.normalize();
  return out;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  d["tp"] = m.tp;
  d["fp"] = m.fp;
  d["tn"] = m.tn;
  d["fn"] = m.fn;
  return d;
}

struct PyDetector {
  DetectorModel model;

  double score(const std::string& code) const {
    double q;
    {
      py::gil_scoped_release release;
      q = score_bytes(model, code);
    }
    return q;
  }

  std::vector<double> score_many(const std::vector<std::string>& codes) const {
    py::gil_scoped_release release;
    std::vector<double> out;
    out.reserve(codes.size());
    for (const auto& c : codes) out.push_back(score_bytes(model, c));
    return out;
  }

  py::dict evaluate_rows(const Rows& rows, double delta) const {
    Metrics m;
    {
      py::gil_scoped_release release;
      auto samples = to_samples(rows, "eval-");
      Dataset ds;
      for (const auto& s : samples)
        ds.push_back({s.id, s.label, extract_features(s.raw, model.vocab, model.fcfg)});
      m = evaluate(model, ds, delta);
    }
    return metrics_dict(m);
  }

  void save(const std::string& path) { save_checkpoint(model, path); }
};

PyDetector train_rows(const Rows& train, const Rows& val, uint64_t seed, size_t epochs,
                      size_t batch, double lr, double weight_decay, bool src, bool ast, bool stat,
                      size_t src_embed, size_t src_filters, size_t ast_embed, size_t ast_filters,
                      size_t stat_out, size_t hidden) {
  py::gil_scoped_release release;
  auto train_s = to_samples(train, "train-");
  auto val_s = to_samples(val, "val-");

  FeatureConfig fc;
  std::vector<std::vector<std::string>> docs;
  for (const auto& s : train_s) docs.push_back(source_token_texts(s.raw, fc.tau));
  TokenVocab vocab = TokenVocab::build(docs);

  auto mk = [&](const std::vector<ScriptSample>& v) {
    Dataset d;
    for (const auto& s : v) d.push_back({s.id, s.label, extract_features(s.raw, vocab, fc)});
    return d;
  };
  Dataset ds_tr = mk(train_s), ds_val = mk(val_s);

  PyDetector d;
  d.model.build(std::move(vocab), fc, mask_from(src, ast, stat), seed,
                arch_from(src_embed, src_filters, ast_embed, ast_filters, stat_out, hidden));
  TrainHyper hy;
  hy.epochs = epochs;
  hy.batch = batch;
  hy.lr = lr;
  hy.weight_decay = weight_decay;
  train_detector(d.model, ds_tr, ds_val, hy);
  return d;
}

PyDetector load_rows(const std::string& path) {
  PyDetector d;
  d.model = load_checkpoint(path);
  return d;
}

py::dict coevolve_rows(const Rows& train, const Rows& val, const Rows& test, size_t rounds,
                       size_t candidates, double delta, double eta, double eps_f1, double eps_er,
                       size_t patience, uint64_t seed, size_t epochs, size_t epochs_per_round,
                       bool retrain, int jobs, size_t src_embed, size_t src_filters,
                       size_t ast_embed, size_t ast_filters, size_t stat_out, size_t hidden) {
  CoevoResult r;
  {
    py::gil_scoped_release release;
    auto train_s = to_samples(train, "train-");
    auto val_s = to_samples(val, "val-");
    auto test_s = to_samples(test, "test-");
    std::vector<ScriptSample> pool;
    for (const auto& s : train_s)
      if (s.label == 1) pool.push_back(s);

    CoevoConfig cfg;
    cfg.rounds_max = static_cast<int>(rounds);
    cfg.candidates_per_round = candidates;
    cfg.delta = delta;
    cfg.eta = eta;
    cfg.eps_f1 = eps_f1;
    cfg.eps_er = eps_er;
    cfg.patience = static_cast<int>(patience);
    cfg.seed = seed;
    cfg.hyper.epochs = epochs;
    cfg.epochs_per_round = epochs_per_round;
    cfg.retrain_from_scratch = retrain;
    cfg.jobs = jobs;
    r = coevolve(cfg, train_s, val_s, test_s, pool, {},
                 arch_from(src_embed, src_filters, ast_embed, ast_filters, stat_out, hidden));
  }

  py::list rounds_out;
  for (const auto& rd : r.rounds) {
    py::dict row;
    row["round"] = rd.round;
    row["generated"] = rd.generated;
    row["rejected"] = rd.rejected;
    row["evaded"] = rd.evaded;
    row["evasion_rate"] = rd.evasion;
    row["heldout"] = metrics_dict(rd.heldout);
    row["mean_token_len"] = rd.mean_token_len;
    row["exchanged_pos"] = rd.exchanged_pos;
    row["exchanged_neg"] = rd.exchanged_neg;
    row["discarded_neg"] = rd.discarded_neg;
    row["dup_skipped"] = rd.dup_skipped;
    row["shortfall"] = rd.shortfall;
    row["train_size"] = rd.train_size;
    rounds_out.append(row);
  }
  py::list evoset;
  for (const auto& s : r.evoset) evoset.append(py::make_tuple(s.raw, s.label));

  py::dict out;
  auto detector = new PyDetector{std::move(r.model)};
  out["detector"] = py::cast(detector, py::return_value_policy::take_ownership);
  out["rounds"] = rounds_out;
  out["weights"] = r.weights.w;
  out["evoset"] = evoset;
  out["aborted"] = r.aborted;
  out["abort_reason"] = r.abort_reason;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "PHP webshell detection toolkit: feature views, sink removal, mutation, "
            "detector training, and adversarial co-training";
  m.attr("__version__") = "0.1.0";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const NotFoundError& e) {
      PyErr_SetString(PyExc_FileNotFoundError, e.what());
    }
  });

  m.def(
      "source_tokens",
      [](const std::string& code, size_t tau, size_t max_tokens) {
        TokenSequence seq;
        seq.texts = source_token_texts(code, tau);
        return head_tail_truncate(std::move(seq), max_tokens).texts;
      },
      py::arg("code"), py::arg("tau") = 200, py::arg("max_tokens") = 512,
      "Compressed, head-tail-truncated token surface of a script");

  m.def(
      "ast_types",
      [](const std::string& code, size_t max_len, size_t array_cap) {
        std::vector<int> ids = linearize_pruned(parse_php(code), max_len, array_cap);
        std::vector<std::string> names;
        names.reserve(ids.size());
        for (int id : ids) {
          if (id == kAstTruncMarkId)
            names.emplace_back("<TRUNC>");
          else if (id >= kAstReserved)
            names.emplace_back(node_type_name(static_cast<NodeType>(id - kAstReserved)));
          else
            names.emplace_back("<UNK>");
        }
        return names;
      },
      py::arg("code"), py::arg("max_len") = 128, py::arg("array_cap") = 10,
      "Pruned syntax-node-type sequence of a script");

  m.def(
      "stat_features",
      [](const std::string& code, bool bytes_entropy) {
        auto v = stat_vector(code, bytes_entropy);
        py::dict d;
        for (size_t i = 0; i < kRiskyNames.size(); ++i) d[kRiskyNames[i]] = v[i];
        d["max_line_len"] = v[11];
        d["mean_line_len"] = v[12];
        d["entropy"] = v[13];
        return d;
      },
      py::arg("code"), py::arg("bytes_entropy") = false,
      "Risky-call counts, line-shape statistics, and entropy");

  m.def("shannon_entropy",
        [](const std::string& data, bool bytes_mode) { return shannon_entropy(data, bytes_mode); },
        py::arg("data"), py::arg("bytes_mode") = false);

  m.def(
      "sanitize_sinks",
      [](const std::string& code) -> std::optional<std::string> { return sanitize_sinks(code); },
      py::arg("code"),
      "Replace every risky-sink call with a same-arity length computation; None on failure");

  m.def(
      "de_malicious",
      [](const std::string& code) -> std::optional<std::string> {
        ScriptSample s;
        s.id = "py";
        s.raw = code;
        s.label = 1;
        s.content_hash = sha256_hex(code);
        auto out = de_malicious(s);
        if (!out) return std::nullopt;
        return out->raw;
      },
      py::arg("code"), "Sink-free twin that keeps the obfuscation scaffolding; None on failure");

  m.def("verify_benign",
        [](const std::string& code) { return verify_benign_source(code); }, py::arg("code"),
        "Independent token-level check that no risky sink remains");

  m.def(
      "mutate",
      [](const std::string& code, uint64_t seed,
         const std::optional<std::map<std::string, double>>& weights)
          -> std::optional<std::string> {
        ScriptSample s;
        s.id = "py";
        s.raw = code;
        s.label = 1;
        s.content_hash = sha256_hex(code);
        MutationRecipe recipe = sample_recipe(weights_from(weights), seed);
        MutationResult res = apply_recipe(s, recipe);
        if (res.no_op) return std::nullopt;
        return res.child.raw;
      },
      py::arg("code"), py::arg("seed"), py::arg("weights") = py::none(),
      "One obfuscated variant under a seeded random recipe; None when nothing applied");

  m.def("operator_names", [] {
    std::vector<std::string> names;
    for (const auto& [k, v] : OperatorWeights::uniform().w) names.push_back(k);
    return names;
  });

  py::class_<PyDetector>(m, "Detector")
      .def_static("train", &train_rows, py::arg("train"), py::arg("val"), py::arg("seed") = 0,
                  py::arg("epochs") = 10, py::arg("batch") = 8, py::arg("lr") = 1e-3,
                  py::arg("weight_decay") = 0.01, py::arg("src") = true, py::arg("ast") = true,
                  py::arg("stat") = true, py::arg("src_embed") = 128, py::arg("src_filters") = 100,
                  py::arg("ast_embed") = 64, py::arg("ast_filters") = 32, py::arg("stat_out") = 32,
                  py::arg("hidden") = 256,
                  "Train the fused detector on (code, label) pairs")
      .def_static("load", &load_rows, py::arg("path"))
      .def("score", &PyDetector::score, py::arg("code"),
           "Probability that a script is a webshell")
      .def("score_many", &PyDetector::score_many, py::arg("codes"))
      .def("evaluate", &PyDetector::evaluate_rows, py::arg("samples"), py::arg("delta") = 0.5)
      .def("save", &PyDetector::save, py::arg("path"));

  m.def("coevolve", &coevolve_rows, py::arg("train"), py::arg("val"), py::arg("test"),
        py::arg("rounds") = 6, py::arg("candidates") = 100, py::arg("delta") = 0.5,
        py::arg("eta") = 0.2, py::arg("eps_f1") = 0.005, py::arg("eps_er") = 0.02,
        py::arg("patience") = 2, py::arg("seed") = 0, py::arg("epochs") = 10,
        py::arg("epochs_per_round") = 3, py::arg("retrain") = false, py::arg("jobs") = 1,
        py::arg("src_embed") = 128, py::arg("src_filters") = 100, py::arg("ast_embed") = 64,
        py::arg("ast_filters") = 32, py::arg("stat_out") = 32, py::arg("hidden") = 256,
        "Adversarial co-training loop over (code, label) pairs");
}
