#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "histoprism/matrix.hpp"
#include "histoprism/tape.hpp"

namespace histoprism {

/// Architectural hyperparameters. Defaults are the reference configuration:
/// one 4-head cross-attention layer, two 8-head encoder layers, hidden
/// width 256. Data dimensions (d_img/d_gene/d_onco) must be set per dataset.
struct ModelConfig {
  std::size_t d_img = 0;
  std::size_t d_gene = 0;
  std::size_t d_onco = 0;
  std::size_t d_hidden = 256;
  std::size_t n_cross_layers = 1;
  std::size_t n_cross_heads = 4;
  std::size_t n_enc_layers = 2;
  std::size_t n_enc_heads = 8;
  bool use_positional_encoding = false;
  bool use_cross_attention = true;
  /// Residual connection around the cross-attention block. The block is
  /// rank-1 without it (a single context token), so it defaults on; the
  /// switch exists for fidelity experiments.
  bool use_cross_residual = true;
  double layer_norm_eps = 1e-5;

  void validate() const;
};

struct CrossAttentionParams {
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
};

struct EncoderLayerParams {
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln1_gain, ln1_bias;
  Matrix ff1_w, ff1_b, ff2_w, ff2_b;
  Matrix ln2_gain, ln2_bias;
};

/// All learnable tensors. When cross-attention is disabled the conditioning
/// tensors are absent (empty cancer_embed, empty cross vector) so the
/// optimizer and checkpoints never touch unused parameters.
struct ModelParams {
  Matrix cancer_embed;  // d_onco x d_img
  std::vector<CrossAttentionParams> cross;
  Matrix hidden_w, hidden_b;  // d_img x d_hidden, 1 x d_hidden
  std::vector<EncoderLayerParams> encoder;
  Matrix head_w1, head_b1;  // d_hidden x d_hidden
  Matrix head_w2, head_b2;  // d_hidden x d_gene

  /// Visits every allocated tensor in the canonical (checkpoint) order with
  /// fn(name, Matrix&). Order: cancer_embed, cross layers, hidden projection,
  /// encoder layers, head.
  template <typename Fn>
  void for_each_tensor(Fn&& fn);
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const;

  std::vector<std::string> tensor_names() const;
  std::size_t tensor_count() const;
  std::vector<Matrix> tensors_flat() const;
  void load_flat(const std::vector<Matrix>& tensors);
  bool all_finite() const;
};

/// Seed-deterministic initialization: weights uniform in
/// +-sqrt(3/fan_in), biases zero, layer-norm gain 1 / bias 0.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// One whole-slide sample: N patch feature vectors plus the slide-level
/// cancer one-hot; expression (log1p counts) and grid coords are optional.
struct SlideSample {
  std::string slide_id;
  std::string cancer_label;
  std::size_t cancer_index = 0;
  Matrix patch_features;  // N x d_img
  std::vector<double> cancer_onehot;
  std::optional<Matrix> expression;  // N x d_gene
  std::optional<Matrix> coords;      // N x 2

  std::size_t n_patches() const { return patch_features.rows(); }
  void validate() const;
  void validate_against(const ModelConfig& cfg) const;
};

/// c * W for a validated one-hot c: selects one row of the embedding table.
Matrix embed_cancer(const std::vector<double>& onehot, const ModelParams& params);

/// One multi-head cross-attention block. Queries come from the patches,
/// key/value from the single context token, so every attention weight is
/// exactly 1; the residual connection preserves patch identity.
Matrix cross_attend(const Matrix& x, const Matrix& c_emb, const CrossAttentionParams& layer,
                    const ModelConfig& cfg);

/// Projection to d_hidden (+ optional 2-D sinusoidal positional encoding),
/// then the post-norm self-attention encoder stack.
Matrix encode(const Matrix& x_cond, const ModelParams& params, const ModelConfig& cfg,
              const std::optional<Matrix>& coords);

/// Row-wise regression head; the same MLP applied to every patch.
Matrix regress(const Matrix& h, const ModelParams& params, const ModelConfig& cfg);

/// Full pipeline: embed_cancer -> cross_attend (unless ablated) -> encode -> regress.
Matrix forward(const SlideSample& sample, const ModelParams& params, const ModelConfig& cfg);

/// Mean of squared differences over all N x d_gene entries.
double mse_loss(const Matrix& pred, const Matrix& truth);

/// Sinusoidal 2-D positional table: the first half of the channels encodes
/// the x coordinate, the second half y, sin/cos interleaved per axis.
Matrix positional_encoding(const Matrix& coords, std::size_t d_hidden);

/// Tape-building forward used by training and gradient checking.
/// param_nodes holds the leaf ids in canonical tensor order.
struct ForwardNodes {
  NodeId output;
  std::vector<NodeId> param_nodes;
};
ForwardNodes forward_on_tape(Tape& tape, const SlideSample& sample, const ModelParams& params,
                             const ModelConfig& cfg);
NodeId mse_on_tape(Tape& tape, NodeId pred, const Matrix& truth);

// --- template bodies ---

template <typename Fn>
void ModelParams::for_each_tensor(Fn&& fn) {
  if (!cancer_embed.empty()) fn("cancer_embed", cancer_embed);
  for (std::size_t i = 0; i < cross.size(); ++i) {
    auto& l = cross[i];
    const std::string p = "cross" + std::to_string(i) + ".";
    fn(p + "wq", l.wq);
    fn(p + "bq", l.bq);
    fn(p + "wk", l.wk);
    fn(p + "bk", l.bk);
    fn(p + "wv", l.wv);
    fn(p + "bv", l.bv);
    fn(p + "wo", l.wo);
    fn(p + "bo", l.bo);
  }
  fn("hidden.w", hidden_w);
  fn("hidden.b", hidden_b);
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    auto& l = encoder[i];
    const std::string p = "enc" + std::to_string(i) + ".";
    fn(p + "attn.wq", l.wq);
    fn(p + "attn.bq", l.bq);
    fn(p + "attn.wk", l.wk);
    fn(p + "attn.bk", l.bk);
    fn(p + "attn.wv", l.wv);
    fn(p + "attn.bv", l.bv);
    fn(p + "attn.wo", l.wo);
    fn(p + "attn.bo", l.bo);
    fn(p + "ln1.gain", l.ln1_gain);
    fn(p + "ln1.bias", l.ln1_bias);
    fn(p + "ff.w1", l.ff1_w);
    fn(p + "ff.b1", l.ff1_b);
    fn(p + "ff.w2", l.ff2_w);
    fn(p + "ff.b2", l.ff2_b);
    fn(p + "ln2.gain", l.ln2_gain);
    fn(p + "ln2.bias", l.ln2_bias);
  }
  fn("head.w1", head_w1);
  fn("head.b1", head_b1);
  fn("head.w2", head_w2);
  fn("head.b2", head_b2);
}

template <typename Fn>
void ModelParams::for_each_tensor(Fn&& fn) const {
  const_cast<ModelParams*>(this)->for_each_tensor(
      [&](const std::string& name, Matrix& m) { fn(name, static_cast<const Matrix&>(m)); });
}

}  // namespace histoprism
