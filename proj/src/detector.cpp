#include "shellsift/detector.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "shellsift/php_parser.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint tensors are written in host order and pinned little-endian");

namespace shellsift {

using nlohmann::json;

ThreeViewFeatures extract_features(std::string_view raw, const TokenVocab& vocab,
                                   const FeatureConfig& cfg) {
  ThreeViewFeatures out;
  std::vector<std::string> texts = source_token_texts(raw, cfg.tau);
  TokenSequence seq;
  seq.ids = vocab.apply(texts);
  seq.texts = std::move(texts);
  seq = head_tail_truncate(std::move(seq), cfg.max_tokens);
  out.token_ids = std::move(seq.ids);
  SyntaxTree tree = parse_php(raw);
  out.ast_ids = linearize_pruned(tree, cfg.ast_max_len, cfg.array_cap, nullptr);
  out.stats = stat_vector(raw, cfg.bytes_entropy);
  return out;
}

Metrics compute_metrics(const std::vector<double>& q, const std::vector<int>& labels,
                        double delta) {
  if (q.size() != labels.size()) throw HardError("score and label counts differ");
  Metrics m;
  for (size_t i = 0; i < q.size(); ++i) {
    bool pred = q[i] >= delta;
    bool pos = labels[i] == 1;
    if (pred && pos)
      ++m.tp;
    else if (pred && !pos)
      ++m.fp;
    else if (!pred && pos)
      ++m.fn;
    else
      ++m.tn;
  }
  size_t total = q.size();
  m.accuracy = total ? double(m.tp + m.tn) / double(total) : 0.0;
  m.precision = (m.tp + m.fp) ? double(m.tp) / double(m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) ? double(m.tp) / double(m.tp + m.fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

namespace {

constexpr char kMagic[8] = {'S', 'S', 'F', 'T', 'C', 'K', 'P', '1'};
constexpr uint32_t kFormatVersion = 1;

struct TensorEntry {
  std::string name;
  std::vector<float>* data;
  std::vector<uint64_t> shape;
};

std::vector<TensorEntry> tensor_table(DetectorModel& m) {
  std::vector<TensorEntry> t;
  auto add = [&](std::string name, std::vector<float>& v, std::vector<uint64_t> shape) {
    t.push_back({std::move(name), &v, std::move(shape)});
  };
  add("src.emb.w", m.src_emb.w, {m.src_emb.vocab, m.src_emb.dim});
  for (size_t i = 0; i < 3; ++i) {
    auto& c = m.src_conv[i];
    std::string p = "src.conv" + std::to_string(c.width);
    add(p + ".w", c.w, {c.filters, c.width, c.dim});
    add(p + ".b", c.b, {c.filters});
  }
  add("ast.emb.w", m.ast_emb.w, {m.ast_emb.vocab, m.ast_emb.dim});
  for (size_t i = 0; i < 3; ++i) {
    auto& c = m.ast_conv[i];
    std::string p = "ast.conv" + std::to_string(c.width);
    add(p + ".w", c.w, {c.filters, c.width, c.dim});
    add(p + ".b", c.b, {c.filters});
  }
  add("stat.bn.gamma", m.stat_bn.gamma, {kStatDim});
  add("stat.bn.beta", m.stat_bn.beta, {kStatDim});
  add("stat.bn.run_mean", m.stat_bn.run_mean, {kStatDim});
  add("stat.bn.run_var", m.stat_bn.run_var, {kStatDim});
  add("stat.proj.w", m.stat_proj.w, {m.stat_proj.out, m.stat_proj.in});
  add("stat.proj.b", m.stat_proj.b, {m.stat_proj.out});
  add("fuse.hidden.w", m.fuse_hidden.w, {m.fuse_hidden.out, m.fuse_hidden.in});
  add("fuse.hidden.b", m.fuse_hidden.b, {m.fuse_hidden.out});
  add("fuse.out.w", m.fuse_out.w, {m.fuse_out.out, m.fuse_out.in});
  add("fuse.out.b", m.fuse_out.b, {m.fuse_out.out});
  return t;
}

std::string vocab_hash(const TokenVocab& v) {
  std::string cat;
  for (const auto& [tok, id] : v.token_to_id) {
    cat += tok;
    cat += '\0';
    cat += std::to_string(id);
    cat += '\n';
  }
  return sha256_hex(cat);
}

std::string ast_vocab_hash() {
  std::string cat;
  for (size_t i = 0; i < kNodeTypeCount; ++i) {
    cat += node_type_name(NodeType(i));
    cat += '\n';
  }
  return sha256_hex(cat);
}

json header_json(DetectorModel& m) {
  json h;
  h["format_version"] = kFormatVersion;
  h["seed"] = m.seed;
  h["feature_config"] = {{"tau", m.fcfg.tau},
                         {"max_tokens", m.fcfg.max_tokens},
                         {"ast_max_len", m.fcfg.ast_max_len},
                         {"array_cap", m.fcfg.array_cap},
                         {"bytes_entropy", m.fcfg.bytes_entropy}};
  h["views"] = {{"src", m.views.src}, {"ast", m.views.ast}, {"stat", m.views.stat}};
  h["train_hyper"] = {{"epochs", m.hyper.epochs},
                      {"batch", m.hyper.batch},
                      {"lr", m.hyper.lr},
                      {"weight_decay", m.hyper.weight_decay},
                      {"delta", m.hyper.delta}};
  h["arch"] = {{"src_embed_dim", m.arch.src_embed_dim}, {"src_filters", m.arch.src_filters},
               {"ast_embed_dim", m.arch.ast_embed_dim}, {"ast_filters", m.arch.ast_filters},
               {"stat_dim", kStatDim},                  {"stat_out_dim", m.arch.stat_out_dim},
               {"fused_dim", m.arch.fused()},           {"hidden_dim", m.arch.hidden_dim}};
  json vocab = json::object();
  // token bytes are arbitrary, so keys go through base64 to stay valid JSON
  for (const auto& [tok, id] : m.vocab.token_to_id) vocab[base64_encode(tok)] = id;
  h["vocab"] = std::move(vocab);
  h["vocab_hash"] = vocab_hash(m.vocab);
  h["ast_vocab_hash"] = ast_vocab_hash();
  json risky = json::array();
  for (const char* name : kRiskyNames) risky.push_back(name);
  h["risky_names"] = std::move(risky);
  return h;
}

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(char((v >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::string& buf;
  size_t off = 0;

  void need(size_t n) const {
    if (off + n > buf.size()) throw IntegrityError("checkpoint truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[off + size_t(i)])) << (8 * i);
    off += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[off + size_t(i)])) << (8 * i);
    off += 8;
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(off, n);
    off += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(DetectorModel& model, const std::filesystem::path& path) {
  json header = header_json(model);
  std::string header_bytes = header.dump();

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u64(out, header_bytes.size());
  out += header_bytes;

  auto tensors = tensor_table(model);
  put_u32(out, uint32_t(tensors.size()));
  for (const auto& t : tensors) {
    uint64_t count = 1;
    for (uint64_t d : t.shape) count *= d;
    if (count != t.data->size()) throw HardError("tensor shape disagrees with storage: " + t.name);
    for (float x : *t.data)
      if (!std::isfinite(x)) throw HardError("non-finite parameter in tensor " + t.name);
    put_u32(out, uint32_t(t.name.size()));
    out += t.name;
    put_u32(out, uint32_t(t.shape.size()));
    for (uint64_t d : t.shape) put_u64(out, d);
    out.append(reinterpret_cast<const char*>(t.data->data()), t.data->size() * sizeof(float));
  }

  write_file(path, out);
  write_file(path.string() + ".json", header.dump(2) + "\n");
}

DetectorModel load_checkpoint(const std::filesystem::path& path) {
  std::string buf = read_file(path);
  Reader r{buf};
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw IntegrityError("not a detector checkpoint: " + path.string());
  if (r.u32() != kFormatVersion) throw IntegrityError("unsupported checkpoint version");
  size_t header_len = size_t(r.u64());
  json header = json::parse(r.bytes(header_len));

  TokenVocab vocab;
  for (const auto& [b64, id] : header.at("vocab").items())
    vocab.token_to_id.emplace(base64_decode(b64), id.get<int>());
  vocab.next_id = 3 + int(vocab.token_to_id.size());

  FeatureConfig fcfg;
  const json& fc = header.at("feature_config");
  fcfg.tau = fc.at("tau").get<size_t>();
  fcfg.max_tokens = fc.at("max_tokens").get<size_t>();
  fcfg.ast_max_len = fc.at("ast_max_len").get<size_t>();
  fcfg.array_cap = fc.at("array_cap").get<size_t>();
  fcfg.bytes_entropy = fc.at("bytes_entropy").get<bool>();

  ViewMask views;
  views.src = header.at("views").at("src").get<bool>();
  views.ast = header.at("views").at("ast").get<bool>();
  views.stat = header.at("views").at("stat").get<bool>();

  ArchConfig arch;
  const json& a = header.at("arch");
  arch.src_embed_dim = a.at("src_embed_dim").get<size_t>();
  arch.src_filters = a.at("src_filters").get<size_t>();
  arch.ast_embed_dim = a.at("ast_embed_dim").get<size_t>();
  arch.ast_filters = a.at("ast_filters").get<size_t>();
  arch.stat_out_dim = a.at("stat_out_dim").get<size_t>();
  arch.hidden_dim = a.at("hidden_dim").get<size_t>();

  DetectorModel model;
  model.build(std::move(vocab), fcfg, views, header.at("seed").get<uint64_t>(), arch);
  const json& th = header.at("train_hyper");
  model.hyper.epochs = th.at("epochs").get<size_t>();
  model.hyper.batch = th.at("batch").get<size_t>();
  model.hyper.lr = th.at("lr").get<double>();
  model.hyper.weight_decay = th.at("weight_decay").get<double>();
  model.hyper.delta = th.at("delta").get<double>();

  if (header.at("vocab_hash").get<std::string>() != vocab_hash(model.vocab))
    throw IntegrityError("checkpoint vocabulary hash mismatch");
  if (header.at("ast_vocab_hash").get<std::string>() != ast_vocab_hash())
    throw IntegrityError("checkpoint was written against a different grammar vocabulary");

  auto tensors = tensor_table(model);
  uint32_t count = r.u32();
  if (count != tensors.size()) throw IntegrityError("checkpoint tensor count mismatch");
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32());
    if (name != tensors[i].name)
      throw IntegrityError("checkpoint tensor order mismatch at " + name);
    uint32_t ndim = r.u32();
    std::vector<uint64_t> shape(ndim);
    for (auto& d : shape) d = r.u64();
    if (shape != tensors[i].shape) throw IntegrityError("checkpoint tensor shape mismatch at " + name);
    uint64_t n = 1;
    for (uint64_t d : shape) n *= d;
    std::string payload = r.bytes(size_t(n) * sizeof(float));
    std::memcpy(tensors[i].data->data(), payload.data(), payload.size());
  }
  if (r.off != buf.size()) throw IntegrityError("checkpoint has trailing bytes");
  return model;
}

}  // namespace shellsift
