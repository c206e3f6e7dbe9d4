#include "histoprism/model.hpp"

#include <cmath>
#include <stdexcept>

#include "histoprism/rng.hpp"

namespace histoprism {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

Matrix row_vector(const std::vector<double>& v) {
  Matrix m(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
  return m;
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

// Multi-head attention shared by the cross and self blocks. Splits the
// projected Q/K/V by column range per head and folds the concat+output
// projection into per-head row slices of wo, which is algebraically the
// same thing without a concat primitive.
NodeId multi_head_attention(Tape& t, NodeId q_in, NodeId kv_in, std::size_t n_heads,
                            NodeId wq, NodeId bq, NodeId wk, NodeId bk, NodeId wv, NodeId bv,
                            NodeId wo, NodeId bo) {
  const std::size_t d_model = t.value(wq).rows();
  const std::size_t d_head = d_model / n_heads;
  const std::size_t n_q = t.value(q_in).rows();
  const std::size_t n_kv = t.value(kv_in).rows();

  NodeId q_full = t.add(t.matmul(q_in, wq), bq);
  NodeId k_full = t.add(t.matmul(kv_in, wk), bk);
  NodeId v_full = t.add(t.matmul(kv_in, wv), bv);

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_head));
  NodeId acc{};
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t c0 = h * d_head, c1 = (h + 1) * d_head;
    NodeId qh = t.slice(q_full, 0, n_q, c0, c1);
    NodeId kh = t.slice(k_full, 0, n_kv, c0, c1);
    NodeId vh = t.slice(v_full, 0, n_kv, c0, c1);
    NodeId scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt_dk);
    NodeId attn = t.softmax_rows(scores);
    NodeId ctx = t.matmul(attn, vh);
    NodeId contrib = t.matmul(ctx, t.slice(wo, c0, c1, 0, d_model));
    acc = (h == 0) ? contrib : t.add(acc, contrib);
  }
  return t.add(acc, bo);
}

NodeId cross_attend_on_tape(Tape& t, NodeId x, NodeId c_emb,
                            const CrossAttentionParams& layer, const ModelConfig& cfg,
                            std::vector<NodeId>* param_nodes) {
  NodeId wq = t.leaf(layer.wq), bq = t.leaf(layer.bq);
  NodeId wk = t.leaf(layer.wk), bk = t.leaf(layer.bk);
  NodeId wv = t.leaf(layer.wv), bv = t.leaf(layer.bv);
  NodeId wo = t.leaf(layer.wo), bo = t.leaf(layer.bo);
  if (param_nodes)
    for (NodeId id : {wq, bq, wk, bk, wv, bv, wo, bo}) param_nodes->push_back(id);
  NodeId attn = multi_head_attention(t, x, c_emb, cfg.n_cross_heads, wq, bq, wk, bk, wv, bv,
                                     wo, bo);
  return cfg.use_cross_residual ? t.add(x, attn) : attn;
}

NodeId encoder_layer_on_tape(Tape& t, NodeId h, const EncoderLayerParams& layer,
                             const ModelConfig& cfg, std::vector<NodeId>* param_nodes) {
  NodeId wq = t.leaf(layer.wq), bq = t.leaf(layer.bq);
  NodeId wk = t.leaf(layer.wk), bk = t.leaf(layer.bk);
  NodeId wv = t.leaf(layer.wv), bv = t.leaf(layer.bv);
  NodeId wo = t.leaf(layer.wo), bo = t.leaf(layer.bo);
  NodeId ln1g = t.leaf(layer.ln1_gain), ln1b = t.leaf(layer.ln1_bias);
  NodeId f1w = t.leaf(layer.ff1_w), f1b = t.leaf(layer.ff1_b);
  NodeId f2w = t.leaf(layer.ff2_w), f2b = t.leaf(layer.ff2_b);
  NodeId ln2g = t.leaf(layer.ln2_gain), ln2b = t.leaf(layer.ln2_bias);
  if (param_nodes)
    for (NodeId id : {wq, bq, wk, bk, wv, bv, wo, bo, ln1g, ln1b, f1w, f1b, f2w, f2b, ln2g, ln2b})
      param_nodes->push_back(id);

  NodeId attn = multi_head_attention(t, h, h, cfg.n_enc_heads, wq, bq, wk, bk, wv, bv, wo, bo);
  NodeId y1 = t.layer_norm(t.add(h, attn), ln1g, ln1b, cfg.layer_norm_eps);
  NodeId ff = t.add(t.matmul(t.gelu(t.add(t.matmul(y1, f1w), f1b)), f2w), f2b);
  return t.layer_norm(t.add(y1, ff), ln2g, ln2b, cfg.layer_norm_eps);
}

}  // namespace

void ModelConfig::validate() const {
  require(d_img >= 1 && d_gene >= 1 && d_onco >= 1 && d_hidden >= 1,
          "ModelConfig: data dimensions must be >= 1");
  require(n_cross_layers >= 1 && n_cross_heads >= 1 && n_enc_layers >= 1 && n_enc_heads >= 1,
          "ModelConfig: layer/head counts must be >= 1");
  require(d_hidden % n_enc_heads == 0, "ModelConfig: d_hidden (" + std::to_string(d_hidden) +
                                           ") must be divisible by n_enc_heads (" +
                                           std::to_string(n_enc_heads) + ")");
  require(d_img % n_cross_heads == 0, "ModelConfig: d_img (" + std::to_string(d_img) +
                                          ") must be divisible by n_cross_heads (" +
                                          std::to_string(n_cross_heads) + ")");
  require(layer_norm_eps > 0.0, "ModelConfig: layer_norm_eps must be positive");
}

std::vector<std::string> ModelParams::tensor_names() const {
  std::vector<std::string> names;
  for_each_tensor([&](const std::string& n, const Matrix&) { names.push_back(n); });
  return names;
}

std::size_t ModelParams::tensor_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const Matrix&) { ++n; });
  return n;
}

std::vector<Matrix> ModelParams::tensors_flat() const {
  std::vector<Matrix> out;
  for_each_tensor([&](const std::string&, const Matrix& m) { out.push_back(m); });
  return out;
}

void ModelParams::load_flat(const std::vector<Matrix>& tensors) {
  std::size_t i = 0;
  for_each_tensor([&](const std::string& name, Matrix& m) {
    if (i >= tensors.size()) throw std::invalid_argument("load_flat: too few tensors");
    if (!m.same_shape(tensors[i]))
      throw std::invalid_argument("load_flat: shape mismatch for " + name);
    m = tensors[i++];
  });
  if (i != tensors.size()) throw std::invalid_argument("load_flat: too many tensors");
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const std::string&, const Matrix& m) { ok = ok && m.all_finite(); });
  return ok;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  std::uint64_t stream = 0;
  auto weights = [&](std::size_t rows, std::size_t cols) {
    Rng rng(seed, stream++);
    return uniform_matrix(rows, cols, std::sqrt(3.0 / static_cast<double>(rows)), rng);
  };
  auto zeros = [&](std::size_t cols) {
    ++stream;  // keep streams aligned whether or not a tensor is random
    return Matrix(1, cols, 0.0);
  };
  auto ones = [&](std::size_t cols) {
    ++stream;
    return Matrix(1, cols, 1.0);
  };

  if (cfg.use_cross_attention) {
    p.cancer_embed = weights(cfg.d_onco, cfg.d_img);
    for (std::size_t i = 0; i < cfg.n_cross_layers; ++i) {
      CrossAttentionParams l;
      l.wq = weights(cfg.d_img, cfg.d_img);
      l.bq = zeros(cfg.d_img);
      l.wk = weights(cfg.d_img, cfg.d_img);
      l.bk = zeros(cfg.d_img);
      l.wv = weights(cfg.d_img, cfg.d_img);
      l.bv = zeros(cfg.d_img);
      l.wo = weights(cfg.d_img, cfg.d_img);
      l.bo = zeros(cfg.d_img);
      p.cross.push_back(std::move(l));
    }
  }
  p.hidden_w = weights(cfg.d_img, cfg.d_hidden);
  p.hidden_b = zeros(cfg.d_hidden);
  const std::size_t d_ff = 4 * cfg.d_hidden;
  for (std::size_t i = 0; i < cfg.n_enc_layers; ++i) {
    EncoderLayerParams l;
    l.wq = weights(cfg.d_hidden, cfg.d_hidden);
    l.bq = zeros(cfg.d_hidden);
    l.wk = weights(cfg.d_hidden, cfg.d_hidden);
    l.bk = zeros(cfg.d_hidden);
    l.wv = weights(cfg.d_hidden, cfg.d_hidden);
    l.bv = zeros(cfg.d_hidden);
    l.wo = weights(cfg.d_hidden, cfg.d_hidden);
    l.bo = zeros(cfg.d_hidden);
    l.ln1_gain = ones(cfg.d_hidden);
    l.ln1_bias = zeros(cfg.d_hidden);
    l.ff1_w = weights(cfg.d_hidden, d_ff);
    l.ff1_b = zeros(d_ff);
    l.ff2_w = weights(d_ff, cfg.d_hidden);
    l.ff2_b = zeros(cfg.d_hidden);
    l.ln2_gain = ones(cfg.d_hidden);
    l.ln2_bias = zeros(cfg.d_hidden);
    p.encoder.push_back(std::move(l));
  }
  p.head_w1 = weights(cfg.d_hidden, cfg.d_hidden);
  p.head_b1 = zeros(cfg.d_hidden);
  p.head_w2 = weights(cfg.d_hidden, cfg.d_gene);
  p.head_b2 = zeros(cfg.d_gene);
  return p;
}

void SlideSample::validate() const {
  require(patch_features.rows() >= 1, "SlideSample " + slide_id + ": needs at least one patch");
  require(patch_features.all_finite(), "SlideSample " + slide_id + ": non-finite patch features");
  double sum = 0.0;
  for (double v : cancer_onehot) {
    require(v == 0.0 || v == 1.0, "SlideSample " + slide_id + ": one-hot entries must be 0 or 1");
    sum += v;
  }
  require(sum == 1.0, "SlideSample " + slide_id + ": one-hot must sum to exactly 1");
  if (expression) {
    require(expression->rows() == patch_features.rows(),
            "SlideSample " + slide_id + ": expression rows != patch count");
    for (std::size_t i = 0; i < expression->size(); ++i) {
      double v = expression->data()[i];
      require(std::isfinite(v) && v >= 0.0,
              "SlideSample " + slide_id + ": expression must be finite and nonnegative");
    }
  }
  if (coords) {
    require(coords->rows() == patch_features.rows() && coords->cols() == 2,
            "SlideSample " + slide_id + ": coords must be N x 2");
  }
}

void SlideSample::validate_against(const ModelConfig& cfg) const {
  validate();
  require(patch_features.cols() == cfg.d_img,
          "SlideSample " + slide_id + ": patch width " + std::to_string(patch_features.cols()) +
              " != d_img " + std::to_string(cfg.d_img));
  require(cancer_onehot.size() == cfg.d_onco,
          "SlideSample " + slide_id + ": one-hot length != d_onco");
  if (expression)
    require(expression->cols() == cfg.d_gene,
            "SlideSample " + slide_id + ": expression cols != d_gene");
}

Matrix embed_cancer(const std::vector<double>& onehot, const ModelParams& params) {
  double sum = 0.0;
  for (double v : onehot) {
    require(v == 0.0 || v == 1.0, "embed_cancer: input is not a one-hot vector");
    sum += v;
  }
  require(sum == 1.0, "embed_cancer: one-hot must have exactly one 1");
  require(onehot.size() == params.cancer_embed.rows(),
          "embed_cancer: one-hot length != embedding table rows");
  return histoprism::matmul(row_vector(onehot), params.cancer_embed);
}

Matrix cross_attend(const Matrix& x, const Matrix& c_emb, const CrossAttentionParams& layer,
                    const ModelConfig& cfg) {
  require(cfg.use_cross_attention, "cross_attend: cross-attention disabled in config");
  require(c_emb.rows() == 1 && c_emb.cols() == x.cols(),
          "cross_attend: context must be 1 x " + std::to_string(x.cols()));
  Tape t;
  NodeId xn = t.constant(x);
  NodeId cn = t.constant(c_emb);
  NodeId out = cross_attend_on_tape(t, xn, cn, layer, cfg, nullptr);
  return t.value(out);
}

Matrix positional_encoding(const Matrix& coords, std::size_t d_hidden) {
  require(coords.cols() == 2, "positional_encoding: coords must be N x 2");
  const std::size_t half = d_hidden / 2;
  require(half >= 1, "positional_encoding: d_hidden too small");
  Matrix pe(coords.rows(), d_hidden);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    const std::size_t base = axis * half;
    const std::size_t span = (axis == 0) ? half : d_hidden - half;
    for (std::size_t k = 0; k < span; ++k) {
      double freq = std::pow(10000.0, -2.0 * static_cast<double>(k / 2) /
                                          static_cast<double>(span));
      for (std::size_t i = 0; i < coords.rows(); ++i) {
        double v = coords(i, axis) * freq;
        pe(i, base + k) = (k % 2 == 0) ? std::sin(v) : std::cos(v);
      }
    }
  }
  return pe;
}

Matrix encode(const Matrix& x_cond, const ModelParams& params, const ModelConfig& cfg,
              const std::optional<Matrix>& coords) {
  Tape t;
  NodeId h = t.add(t.matmul(t.constant(x_cond), t.constant(params.hidden_w)),
                   t.constant(params.hidden_b));
  if (cfg.use_positional_encoding) {
    require(coords.has_value(), "encode: positional encoding enabled but coords absent");
    h = t.add(h, t.constant(positional_encoding(*coords, cfg.d_hidden)));
  }
  for (const auto& layer : params.encoder) h = encoder_layer_on_tape(t, h, layer, cfg, nullptr);
  return t.value(h);
}

Matrix regress(const Matrix& h, const ModelParams& params, const ModelConfig& cfg) {
  (void)cfg;
  Tape t;
  NodeId z = t.gelu(t.add(t.matmul(t.constant(h), t.constant(params.head_w1)),
                          t.constant(params.head_b1)));
  NodeId out = t.add(t.matmul(z, t.constant(params.head_w2)), t.constant(params.head_b2));
  return t.value(out);
}

ForwardNodes forward_on_tape(Tape& t, const SlideSample& sample, const ModelParams& params,
                             const ModelConfig& cfg) {
  sample.validate_against(cfg);
  ForwardNodes fw;
  NodeId x = t.constant(sample.patch_features);

  if (cfg.use_cross_attention) {
    require(params.cross.size() == cfg.n_cross_layers && !params.cancer_embed.empty(),
            "forward: conditioning parameters missing");
    NodeId embed = t.leaf(params.cancer_embed);
    fw.param_nodes.push_back(embed);
    NodeId c_emb = t.matmul(t.constant(row_vector(sample.cancer_onehot)), embed);
    for (const auto& layer : params.cross)
      x = cross_attend_on_tape(t, x, c_emb, layer, cfg, &fw.param_nodes);
  }

  NodeId hw = t.leaf(params.hidden_w), hb = t.leaf(params.hidden_b);
  fw.param_nodes.push_back(hw);
  fw.param_nodes.push_back(hb);
  NodeId h = t.add(t.matmul(x, hw), hb);
  if (cfg.use_positional_encoding) {
    require(sample.coords.has_value(), "forward: positional encoding enabled but coords absent");
    h = t.add(h, t.constant(positional_encoding(*sample.coords, cfg.d_hidden)));
  }
  for (const auto& layer : params.encoder)
    h = encoder_layer_on_tape(t, h, layer, cfg, &fw.param_nodes);

  NodeId w1 = t.leaf(params.head_w1), b1 = t.leaf(params.head_b1);
  NodeId w2 = t.leaf(params.head_w2), b2 = t.leaf(params.head_b2);
  for (NodeId id : {w1, b1, w2, b2}) fw.param_nodes.push_back(id);
  NodeId z = t.gelu(t.add(t.matmul(h, w1), b1));
  fw.output = t.add(t.matmul(z, w2), b2);
  return fw;
}

NodeId mse_on_tape(Tape& t, NodeId pred, const Matrix& truth) {
  require(t.value(pred).same_shape(truth),
          "mse: shape mismatch " + t.value(pred).shape_str() + " vs " + truth.shape_str());
  NodeId diff = t.add(pred, t.scale(t.constant(truth), -1.0));
  return t.mean_all(t.square(diff));
}

Matrix forward(const SlideSample& sample, const ModelParams& params, const ModelConfig& cfg) {
  Tape t;
  return t.value(forward_on_tape(t, sample, params, cfg).output);
}

double mse_loss(const Matrix& pred, const Matrix& truth) {
  require(pred.same_shape(truth),
          "mse_loss: shape mismatch " + pred.shape_str() + " vs " + truth.shape_str());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred.data()[i] - truth.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

}  // namespace histoprism
