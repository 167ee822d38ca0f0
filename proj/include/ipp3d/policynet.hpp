#pragma once

// Attention encoder / pointer decoder over the augmented roadmap graph.
//
// Node embedding:   h_i = W^L v_i + b^L + W^PE pe_i + b^PE   (W^D, b^D for the
//                   current node), v_i = (x, y, z, mu, std).
// Encoder:          one pre-norm block, h + MHA(LN(h)) then h + FF(LN(h)).
// Decoder:          glimpse = h_c + MHA(q = h_c, kv = neighbors); value is a
//                   linear head on the glimpse; a single-head compatibility
//                   between the glimpse and each neighbor, clipped as
//                   C * tanh(u), gives the pointer logits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ipp3d/diffmath/serialize.hpp"
#include "ipp3d/diffmath/tensor.hpp"

namespace ipp3d {

struct Roadmap;
struct AugmentedGraph;
struct Observation;

inline constexpr std::size_t kNodeFeatures = 5;

struct NetConfig {
  std::size_t embed_dim = 128;
  std::size_t heads = 4;
  std::size_t k_pe = 32;
  double logit_clip = 10.0;
  std::size_t ff_hidden = 512;

  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

struct PolicyParams {
  dm::Tensor w_l, b_l, w_d, b_d, w_pe, b_pe;
  dm::Tensor enc_ln1_g, enc_ln1_b, enc_wq, enc_wk, enc_wv, enc_wo;
  dm::Tensor enc_ln2_g, enc_ln2_b, enc_w1, enc_b1, enc_w2, enc_b2;
  dm::Tensor dec_wq, dec_wk, dec_wv, dec_wo;
  dm::Tensor ptr_wq, ptr_wk;
  dm::Tensor val_w, val_b;

  // Stable name/tensor pairs; the order defines the checkpoint layout.
  dm::NamedTensors named() const;
  std::vector<dm::Tensor> tensors() const;
  std::size_t parameter_count() const;
  // Deep copy; the copy's tensors are fresh leaves requiring gradients.
  PolicyParams clone() const;
  bool all_finite() const;
  void zero_grad();
};

// Xavier-uniform weights, zero biases, unit layer-norm gains.
PolicyParams init_params(const NetConfig& cfg, std::uint64_t seed);
// Throws ShapeError if any tensor disagrees with cfg.
void check_shapes(const PolicyParams& params, const NetConfig& cfg);

// Dense per-node inputs: features is n x kNodeFeatures, pe is n x k_pe.
struct NodeInputs {
  std::size_t count = 0;
  std::vector<double> features;
  std::vector<double> pe;
};

NodeInputs node_inputs(const AugmentedGraph& graph, const Roadmap& roadmap);

dm::Tensor embed_nodes(const NodeInputs& in, std::size_t current,
                       const PolicyParams& p, const NetConfig& cfg);

// Encoded features for the given query rows (all rows when empty). Keys and
// values always range over every node, so each returned row equals the
// corresponding row of a full encode.
dm::Tensor encode(const dm::Tensor& h, const PolicyParams& p, const NetConfig& cfg,
                  std::span<const std::size_t> query_rows = {});

struct DecodeOutput {
  dm::Tensor logits;     // 1 x |neighbors|, clipped compatibilities
  dm::Tensor log_probs;  // 1 x |allowed|, log-softmax over allowed logits
  dm::Tensor value;      // 1 x 1
  std::vector<std::size_t> allowed;  // positions into the neighbor list
  std::vector<double> probs;         // |neighbors|, zero where masked
};

// h_en holds encoded node rows; current and neighbors index into its rows.
// An empty mask allows every neighbor. Throws StateError when no neighbor is
// given or allowed, IndexError on out-of-range rows.
DecodeOutput decode(const dm::Tensor& h_en, std::size_t current,
                    std::span<const std::size_t> neighbors,
                    std::span<const std::uint8_t> allowed_mask, const PolicyParams& p,
                    const NetConfig& cfg);

// embed -> encode (current + neighbor rows only) -> decode.
DecodeOutput policy_forward(const NodeInputs& in, std::size_t current,
                            std::span<const std::size_t> neighbors,
                            std::span<const std::uint8_t> allowed_mask,
                            const PolicyParams& p, const NetConfig& cfg);

DecodeOutput policy_forward(const Observation& obs, const Roadmap& roadmap,
                            const PolicyParams& p, const NetConfig& cfg);

// Writes the parameter file at path and the NetConfig manifest at
// manifest_path(path).
std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& p,
                     const NetConfig& cfg);
void write_manifest(const std::filesystem::path& path, const NetConfig& cfg);
NetConfig read_manifest(const std::filesystem::path& path);

struct Checkpoint {
  NetConfig cfg;
  PolicyParams params;
};
// Throws ConfigError if the file or manifest is missing, FormatError on a
// malformed file or a tensor layout that disagrees with the manifest.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ipp3d
