#include "ipp3d/policynet.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "ipp3d/diffmath/ops.hpp"
#include "ipp3d/errors.hpp"
#include "ipp3d/roadmap.hpp"
#include "ipp3d/simenv.hpp"

namespace ipp3d {

using dm::Tensor;

void NetConfig::validate() const {
  if (embed_dim == 0 || heads == 0) throw ConfigError("embed_dim and heads must be > 0");
  if (embed_dim % heads != 0) throw ConfigError("embed_dim must be divisible by heads");
  if (!(logit_clip > 0.0) || !std::isfinite(logit_clip)) {
    throw ConfigError("logit_clip must be positive and finite");
  }
  if (k_pe == 0) throw ConfigError("k_pe must be > 0");
  if (ff_hidden == 0) throw ConfigError("ff_hidden must be > 0");
}

dm::NamedTensors PolicyParams::named() const {
  return {{"embed.w_l", w_l},         {"embed.b_l", b_l},
          {"embed.w_d", w_d},         {"embed.b_d", b_d},
          {"embed.w_pe", w_pe},       {"embed.b_pe", b_pe},
          {"enc.ln1.g", enc_ln1_g},   {"enc.ln1.b", enc_ln1_b},
          {"enc.attn.wq", enc_wq},    {"enc.attn.wk", enc_wk},
          {"enc.attn.wv", enc_wv},    {"enc.attn.wo", enc_wo},
          {"enc.ln2.g", enc_ln2_g},   {"enc.ln2.b", enc_ln2_b},
          {"enc.ff.w1", enc_w1},      {"enc.ff.b1", enc_b1},
          {"enc.ff.w2", enc_w2},      {"enc.ff.b2", enc_b2},
          {"dec.attn.wq", dec_wq},    {"dec.attn.wk", dec_wk},
          {"dec.attn.wv", dec_wv},    {"dec.attn.wo", dec_wo},
          {"dec.ptr.wq", ptr_wq},     {"dec.ptr.wk", ptr_wk},
          {"value.w", val_w},         {"value.b", val_b}};
}

namespace {

// Pointers to members in the same order as named().
std::vector<Tensor PolicyParams::*> member_list() {
  return {&PolicyParams::w_l,       &PolicyParams::b_l,       &PolicyParams::w_d,
          &PolicyParams::b_d,       &PolicyParams::w_pe,      &PolicyParams::b_pe,
          &PolicyParams::enc_ln1_g, &PolicyParams::enc_ln1_b, &PolicyParams::enc_wq,
          &PolicyParams::enc_wk,    &PolicyParams::enc_wv,    &PolicyParams::enc_wo,
          &PolicyParams::enc_ln2_g, &PolicyParams::enc_ln2_b, &PolicyParams::enc_w1,
          &PolicyParams::enc_b1,    &PolicyParams::enc_w2,    &PolicyParams::enc_b2,
          &PolicyParams::dec_wq,    &PolicyParams::dec_wk,    &PolicyParams::dec_wv,
          &PolicyParams::dec_wo,    &PolicyParams::ptr_wq,    &PolicyParams::ptr_wk,
          &PolicyParams::val_w,     &PolicyParams::val_b};
}

struct ShapeSpec {
  std::size_t rows, cols;
};

std::vector<ShapeSpec> expected_shapes(const NetConfig& c) {
  const std::size_t d = c.embed_dim, f = kNodeFeatures;
  return {{f, d},    {1, d}, {f, d},          {1, d},           {c.k_pe, d}, {1, d},
          {1, d},    {1, d}, {d, d},          {d, d},           {d, d},      {d, d},
          {1, d},    {1, d}, {d, c.ff_hidden}, {1, c.ff_hidden}, {c.ff_hidden, d},
          {1, d},    {d, d}, {d, d},          {d, d},           {d, d},      {d, d},
          {d, d},    {d, 1}, {1, 1}};
}

enum class InitKind { kXavier, kZero, kOne };

std::vector<InitKind> init_kinds() {
  using K = InitKind;
  return {K::kXavier, K::kZero,   K::kXavier, K::kZero,   K::kXavier, K::kZero,
          K::kOne,    K::kZero,   K::kXavier, K::kXavier, K::kXavier, K::kXavier,
          K::kOne,    K::kZero,   K::kXavier, K::kZero,   K::kXavier, K::kZero,
          K::kXavier, K::kXavier, K::kXavier, K::kXavier, K::kXavier, K::kXavier,
          K::kXavier, K::kZero};
}

const Tensor& rows_or_throw(const Tensor& t, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + " is undefined");
  return t;
}

}  // namespace

std::vector<Tensor> PolicyParams::tensors() const {
  std::vector<Tensor> out;
  for (auto m : member_list()) out.push_back(this->*m);
  return out;
}

std::size_t PolicyParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

PolicyParams PolicyParams::clone() const {
  PolicyParams out;
  for (auto m : member_list()) {
    const Tensor& src = this->*m;
    out.*m = Tensor::from(src.rows(), src.cols(),
                          std::vector<double>(src.values().begin(), src.values().end()),
                          true);
  }
  return out;
}

bool PolicyParams::all_finite() const {
  for (const auto& t : tensors()) {
    for (double v : t.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void PolicyParams::zero_grad() {
  for (auto m : member_list()) (this->*m).zero_grad();
}

PolicyParams init_params(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  PolicyParams p;
  const auto shapes = expected_shapes(cfg);
  const auto kinds = init_kinds();
  const auto members = member_list();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto [r, c] = shapes[i];
    std::vector<double> v(r * c, 0.0);
    if (kinds[i] == InitKind::kOne) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (kinds[i] == InitKind::kXavier) {
      const double a = std::sqrt(6.0 / static_cast<double>(r + c));
      std::uniform_real_distribution<double> u(-a, a);
      for (auto& x : v) x = u(rng);
    }
    p.*members[i] = Tensor::from(r, c, std::move(v), true);
  }
  return p;
}

void check_shapes(const PolicyParams& params, const NetConfig& cfg) {
  const auto shapes = expected_shapes(cfg);
  const auto named = params.named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const Tensor& t = rows_or_throw(named[i].second, named[i].first.c_str());
    if (t.rows() != shapes[i].rows || t.cols() != shapes[i].cols) {
      throw ShapeError("parameter " + named[i].first + " has shape " +
                       std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                       ", expected " + std::to_string(shapes[i].rows) + "x" +
                       std::to_string(shapes[i].cols));
    }
  }
}

NodeInputs node_inputs(const AugmentedGraph& graph, const Roadmap& roadmap) {
  const std::size_t n = roadmap.size();
  if (graph.node_mu.size() != n || graph.node_std.size() != n ||
      graph.normalized_coords.size() != n) {
    throw ShapeError("augmented graph does not match roadmap size");
  }
  NodeInputs in;
  in.count = n;
  in.features.resize(n * kNodeFeatures);
  for (std::size_t i = 0; i < n; ++i) {
    double* f = in.features.data() + i * kNodeFeatures;
    f[0] = graph.normalized_coords[i].x;
    f[1] = graph.normalized_coords[i].y;
    f[2] = graph.normalized_coords[i].z;
    f[3] = graph.node_mu[i];
    f[4] = graph.node_std[i];
  }
  in.pe = roadmap.pe;
  return in;
}

Tensor embed_nodes(const NodeInputs& in, std::size_t current, const PolicyParams& p,
                   const NetConfig& cfg) {
  const std::size_t n = in.count;
  if (n == 0) throw ShapeError("embed_nodes: no nodes");
  if (in.features.size() != n * kNodeFeatures) {
    throw ShapeError("embed_nodes: feature matrix must be n x 5");
  }
  if (in.pe.size() != n * cfg.k_pe) {
    throw ShapeError("embed_nodes: positional encoding dimension does not match k_pe=" +
                     std::to_string(cfg.k_pe));
  }
  if (current >= n) throw IndexError("embed_nodes: current node out of range");
  const Tensor x = Tensor::from(n, kNodeFeatures, in.features);
  const Tensor pe = Tensor::from(n, cfg.k_pe, in.pe);
  const Tensor pe_term = dm::add_row_bias(dm::matmul(pe, p.w_pe), p.b_pe);
  const Tensor h = dm::add(dm::add_row_bias(dm::matmul(x, p.w_l), p.b_l), pe_term);

  const std::size_t idx[1] = {current};
  const Tensor xc = dm::gather_rows(x, idx);
  const Tensor hc = dm::add(dm::add_row_bias(dm::matmul(xc, p.w_d), p.b_d),
                            dm::gather_rows(pe_term, idx));
  return dm::set_row(h, current, hc);
}

namespace {

Tensor attention(const Tensor& q_in, const Tensor& kv_in, const Tensor& wq,
                 const Tensor& wk, const Tensor& wv, const Tensor& wo,
                 std::size_t heads) {
  const std::size_t d = wq.cols();
  const std::size_t dk = d / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  const Tensor q = dm::matmul(q_in, wq);
  const Tensor k = dm::matmul(kv_in, wk);
  const Tensor v = dm::matmul(kv_in, wv);
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : dm::slice_cols(q, h * dk, dk);
    const Tensor kh = heads == 1 ? k : dm::slice_cols(k, h * dk, dk);
    const Tensor vh = heads == 1 ? v : dm::slice_cols(v, h * dk, dk);
    const Tensor a = dm::softmax_rows(dm::scale(dm::matmul_nt(qh, kh), inv));
    outs.push_back(dm::matmul(a, vh));
  }
  const Tensor cat = heads == 1 ? outs[0] : dm::concat_cols(outs);
  return dm::matmul(cat, wo);
}

}  // namespace

Tensor encode(const Tensor& h, const PolicyParams& p, const NetConfig& cfg,
              std::span<const std::size_t> query_rows) {
  if (h.rows() == 0) throw ShapeError("encode: no nodes");
  if (h.cols() != cfg.embed_dim) throw ShapeError("encode: embedding width mismatch");
  for (std::size_t r : query_rows) {
    if (r >= h.rows()) throw IndexError("encode: query row out of range");
  }
  const Tensor ln = dm::layer_norm(h, p.enc_ln1_g, p.enc_ln1_b);
  Tensor q_ln = ln, h_q = h;
  if (!query_rows.empty()) {
    q_ln = dm::gather_rows(ln, query_rows);
    h_q = dm::gather_rows(h, query_rows);
  }
  const Tensor h1 = dm::add(
      h_q, attention(q_ln, ln, p.enc_wq, p.enc_wk, p.enc_wv, p.enc_wo, cfg.heads));
  const Tensor ln2 = dm::layer_norm(h1, p.enc_ln2_g, p.enc_ln2_b);
  const Tensor ff = dm::add_row_bias(
      dm::matmul(dm::relu(dm::add_row_bias(dm::matmul(ln2, p.enc_w1), p.enc_b1)),
                 p.enc_w2),
      p.enc_b2);
  return dm::add(h1, ff);
}

DecodeOutput decode(const Tensor& h_en, std::size_t current,
                    std::span<const std::size_t> neighbors,
                    std::span<const std::uint8_t> allowed_mask, const PolicyParams& p,
                    const NetConfig& cfg) {
  if (neighbors.empty()) throw StateError("decode: empty neighbor list");
  if (!allowed_mask.empty() && allowed_mask.size() != neighbors.size()) {
    throw ShapeError("decode: mask length differs from neighbor count");
  }
  if (current >= h_en.rows()) throw IndexError("decode: current row out of range");
  for (std::size_t r : neighbors) {
    if (r >= h_en.rows()) throw IndexError("decode: neighbor row out of range");
  }
  DecodeOutput out;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (allowed_mask.empty() || allowed_mask[i]) out.allowed.push_back(i);
  }
  if (out.allowed.empty()) throw StateError("decode: no allowed neighbor");

  const std::size_t cur[1] = {current};
  const Tensor hc = dm::gather_rows(h_en, cur);
  const Tensor hn = dm::gather_rows(h_en, neighbors);
  const Tensor glimpse = dm::add(
      hc, attention(hc, hn, p.dec_wq, p.dec_wk, p.dec_wv, p.dec_wo, cfg.heads));
  out.value = dm::add(dm::matmul(glimpse, p.val_w), p.val_b);

  const double inv = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
  const Tensor u = dm::scale(
      dm::matmul_nt(dm::matmul(glimpse, p.ptr_wq), dm::matmul(hn, p.ptr_wk)), inv);
  out.logits = dm::scale(dm::tanh(u), cfg.logit_clip);
  out.log_probs = dm::log_softmax_rows(dm::gather_cols(out.logits, out.allowed));

  out.probs.assign(neighbors.size(), 0.0);
  for (std::size_t j = 0; j < out.allowed.size(); ++j) {
    out.probs[out.allowed[j]] = std::exp(out.log_probs.at(0, j));
  }
  return out;
}

DecodeOutput policy_forward(const NodeInputs& in, std::size_t current,
                            std::span<const std::size_t> neighbors,
                            std::span<const std::uint8_t> allowed_mask,
                            const PolicyParams& p, const NetConfig& cfg) {
  if (neighbors.empty()) throw StateError("policy_forward: empty neighbor list");
  const Tensor h = embed_nodes(in, current, p, cfg);
  std::vector<std::size_t> rows;
  rows.reserve(neighbors.size() + 1);
  rows.push_back(current);
  rows.insert(rows.end(), neighbors.begin(), neighbors.end());
  const Tensor h_en = encode(h, p, cfg, rows);
  std::vector<std::size_t> local(neighbors.size());
  for (std::size_t i = 0; i < local.size(); ++i) local[i] = i + 1;
  return decode(h_en, 0, local, allowed_mask, p, cfg);
}

DecodeOutput policy_forward(const Observation& obs, const Roadmap& roadmap,
                            const PolicyParams& p, const NetConfig& cfg) {
  if (roadmap.pe_dim != cfg.k_pe) {
    throw ShapeError("roadmap positional encoding has " + std::to_string(roadmap.pe_dim) +
                     " columns, network expects " + std::to_string(cfg.k_pe));
  }
  return policy_forward(node_inputs(obs.graph, roadmap), obs.current_node, obs.neighbors,
                        obs.affordable, p, cfg);
}

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".manifest");
}

void write_manifest(const std::filesystem::path& path, const NetConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  out << std::setprecision(17);
  out << "format ipp3d-policy\n"
      << "version 1\n"
      << "embed_dim " << cfg.embed_dim << "\n"
      << "heads " << cfg.heads << "\n"
      << "k_pe " << cfg.k_pe << "\n"
      << "logit_clip " << cfg.logit_clip << "\n"
      << "ff_hidden " << cfg.ff_hidden << "\n"
      << "node_features " << kNodeFeatures << "\n";
}

NetConfig read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing checkpoint manifest " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key >> value)) throw FormatError("malformed manifest line: " + line);
    kv[key] = value;
  }
  if (kv["format"] != "ipp3d-policy" || kv["version"] != "1") {
    throw FormatError("unrecognized manifest " + path.string());
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("manifest lacks ") + key);
    return it->second;
  };
  if (std::stoul(get("node_features")) != kNodeFeatures) {
    throw FormatError("manifest node feature count differs from this build");
  }
  NetConfig cfg;
  try {
    cfg.embed_dim = std::stoul(get("embed_dim"));
    cfg.heads = std::stoul(get("heads"));
    cfg.k_pe = std::stoul(get("k_pe"));
    cfg.logit_clip = std::stod(get("logit_clip"));
    cfg.ff_hidden = std::stoul(get("ff_hidden"));
  } catch (const std::logic_error&) {
    throw FormatError("non-numeric value in manifest " + path.string());
  }
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& p,
                     const NetConfig& cfg) {
  check_shapes(p, cfg);
  dm::save_params(path, p.named());
  write_manifest(manifest_path(path), cfg);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("checkpoint not found: " + path.string());
  }
  Checkpoint ck;
  ck.cfg = read_manifest(manifest_path(path));
  auto loaded = dm::load_params(path);
  const auto members = member_list();
  const auto expected = PolicyParams{}.named();
  if (loaded.size() != members.size()) {
    throw FormatError("checkpoint holds " + std::to_string(loaded.size()) +
                      " tensors, expected " + std::to_string(members.size()));
  }
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (loaded[i].first != expected[i].first) {
      throw FormatError("checkpoint tensor " + std::to_string(i) + " is '" +
                        loaded[i].first + "', expected '" + expected[i].first + "'");
    }
    ck.params.*members[i] = loaded[i].second;
    (ck.params.*members[i]).set_requires_grad(true);
  }
  try {
    check_shapes(ck.params, ck.cfg);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint disagrees with manifest: ") + e.what());
  }
  return ck;
}

}  // namespace ipp3d
