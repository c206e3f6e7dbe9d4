#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "histoprism/gradcheck.hpp"
#include "histoprism/model.hpp"
#include "histoprism/rng.hpp"
#include "histoprism/train.hpp"
#include "oracle_helpers.hpp"

using namespace histoprism;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d_img = 8;
  cfg.d_gene = 5;
  cfg.d_onco = 3;
  cfg.d_hidden = 16;
  cfg.n_cross_layers = 1;
  cfg.n_cross_heads = 2;
  cfg.n_enc_layers = 2;
  cfg.n_enc_heads = 4;
  return cfg;
}

SlideSample make_slide(const ModelConfig& cfg, std::size_t n, std::uint64_t seed,
                       std::size_t cancer = 0) {
  Rng rng(seed);
  SlideSample s;
  s.slide_id = "s" + std::to_string(seed);
  s.cancer_label = "c" + std::to_string(cancer);
  s.cancer_index = cancer;
  s.cancer_onehot.assign(cfg.d_onco, 0.0);
  s.cancer_onehot[cancer] = 1.0;
  s.patch_features = Matrix(n, cfg.d_img);
  for (std::size_t i = 0; i < s.patch_features.size(); ++i)
    s.patch_features.data()[i] = rng.next_gaussian();
  Matrix expr(n, cfg.d_gene);
  for (std::size_t i = 0; i < expr.size(); ++i) expr.data()[i] = std::fabs(rng.next_gaussian());
  s.expression = expr;
  Matrix coords(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    coords(i, 0) = static_cast<double>(i % 4);
    coords(i, 1) = static_cast<double>(i / 4);
  }
  s.coords = coords;
  return s;
}

Matrix permute_rows(const Matrix& m, const std::vector<std::size_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], j);
  return out;
}

}  // namespace

TEST_CASE("embed_cancer selects rows of the embedding table") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 1);
  for (std::size_t c = 0; c < cfg.d_onco; ++c) {
    std::vector<double> onehot(cfg.d_onco, 0.0);
    onehot[c] = 1.0;
    Matrix e = embed_cancer(onehot, p);
    for (std::size_t j = 0; j < cfg.d_img; ++j) CHECK(e(0, j) == p.cancer_embed(c, j));
  }
}

TEST_CASE("embed_cancer matches a dense matvec oracle") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 2);
  std::vector<double> onehot = {0.0, 1.0, 0.0};
  Matrix got = embed_cancer(onehot, p);
  for (std::size_t j = 0; j < cfg.d_img; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < cfg.d_onco; ++k) s += onehot[k] * p.cancer_embed(k, j);
    CHECK(std::fabs(got(0, j) - s) < 1e-12);
  }
}

TEST_CASE("embed_cancer rejects non-one-hot input") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 3);
  CHECK_THROWS_AS(embed_cancer({0.5, 0.5, 0.0}, p), std::invalid_argument);
  CHECK_THROWS_AS(embed_cancer({1.0, 1.0, 0.0}, p), std::invalid_argument);
  CHECK_THROWS_AS(embed_cancer({0.0, 0.0, 0.0}, p), std::invalid_argument);
}

TEST_CASE("cross_attend: single context token gives identical pre-residual rows") {
  ModelConfig cfg = small_config();
  cfg.use_cross_residual = false;
  ModelParams p = init_params(cfg, 4);
  Rng rng(9);
  Matrix x(6, cfg.d_img);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  Matrix c_emb(1, cfg.d_img);
  for (std::size_t i = 0; i < c_emb.size(); ++i) c_emb.data()[i] = rng.next_gaussian();

  Matrix out = cross_attend(x, c_emb, p.cross[0], cfg);
  // every patch attends to the single token with weight exactly 1, so all
  // rows equal the projected context
  for (std::size_t i = 1; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) CHECK(out(i, j) == out(0, j));

  const auto& l = p.cross[0];
  Matrix expected =
      oracle::linear(oracle::linear(c_emb, l.wv, l.bv), l.wo, l.bo);
  for (std::size_t j = 0; j < out.cols(); ++j)
    CHECK(out(0, j) == doctest::Approx(expected(0, j)).epsilon(1e-12));
}

TEST_CASE("cross_attend: zero context and zero biases give zero pre-residual output") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 5);
  auto& l = p.cross[0];
  for (Matrix* b : {&l.bq, &l.bk, &l.bv, &l.bo})
    for (std::size_t i = 0; i < b->size(); ++i) b->data()[i] = 0.0;
  Rng rng(11);
  Matrix x(4, cfg.d_img);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  Matrix zero_ctx(1, cfg.d_img, 0.0);

  ModelConfig no_res = cfg;
  no_res.use_cross_residual = false;
  Matrix pre = cross_attend(x, zero_ctx, l, no_res);
  for (std::size_t i = 0; i < pre.size(); ++i) CHECK(pre.data()[i] == 0.0);

  Matrix with_res = cross_attend(x, zero_ctx, l, cfg);
  CHECK(oracle::max_abs_diff(with_res, x) == 0.0);
}

TEST_CASE("cross_attend matches the straight-line reference") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 6);
  Rng rng(13);
  Matrix x(7, cfg.d_img);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  Matrix c_emb(1, cfg.d_img);
  for (std::size_t i = 0; i < c_emb.size(); ++i) c_emb.data()[i] = rng.next_gaussian();

  const auto& l = p.cross[0];
  Matrix ref = oracle::reference_mha(x, c_emb, cfg.n_cross_heads, l.wq, l.bq, l.wk, l.bk, l.wv,
                                     l.bv, l.wo, l.bo);
  for (std::size_t i = 0; i < ref.size(); ++i) ref.data()[i] += x.data()[i];  // residual
  Matrix got = cross_attend(x, c_emb, l, cfg);
  CHECK(oracle::max_abs_diff(got, ref) < 1e-12);
}

TEST_CASE("encode: N=1 reduces self-attention to an identity mix") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 7);
  Rng rng(15);
  Matrix x(1, cfg.d_img);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  Matrix got = encode(x, p, cfg, std::nullopt);
  // reference path with attention weights forced to the single token
  Matrix h = oracle::linear(x, p.hidden_w, p.hidden_b);
  for (const auto& layer : p.encoder)
    h = oracle::reference_encoder_layer(h, layer, cfg.n_enc_heads, cfg.layer_norm_eps);
  CHECK(oracle::max_abs_diff(got, h) < 1e-12);
}

TEST_CASE("encode matches the layer-by-layer reference on random input") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 8);
  Rng rng(17);
  Matrix x(6, cfg.d_img);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  Matrix got = encode(x, p, cfg, std::nullopt);
  Matrix h = oracle::linear(x, p.hidden_w, p.hidden_b);
  for (const auto& layer : p.encoder)
    h = oracle::reference_encoder_layer(h, layer, cfg.n_enc_heads, cfg.layer_norm_eps);
  CHECK(oracle::max_abs_diff(got, h) < 1e-10);
}

TEST_CASE("encode: positional encoding without coords is rejected") {
  ModelConfig cfg = small_config();
  cfg.use_positional_encoding = true;
  ModelParams p = init_params(cfg, 9);
  Matrix x(3, cfg.d_img, 0.1);
  CHECK_THROWS_AS(encode(x, p, cfg, std::nullopt), std::invalid_argument);
}

TEST_CASE("encode: permuting rows permutes output identically when PE is off") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 10);
  Rng rng(21);
  Matrix x(8, cfg.d_img);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  std::vector<std::size_t> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Matrix direct = encode(permute_rows(x, perm), p, cfg, std::nullopt);
  Matrix permuted = permute_rows(encode(x, p, cfg, std::nullopt), perm);
  CHECK(oracle::max_abs_diff(direct, permuted) < 1e-9);
}

TEST_CASE("regress: identical input rows give identical outputs") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 11);
  Matrix h(5, cfg.d_hidden);
  Rng rng(23);
  for (std::size_t j = 0; j < cfg.d_hidden; ++j) {
    double v = rng.next_gaussian();
    for (std::size_t i = 0; i < 5; ++i) h(i, j) = v;
  }
  Matrix out = regress(h, p, cfg);
  for (std::size_t i = 1; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) CHECK(out(i, j) == out(0, j));
}

TEST_CASE("regress: zero weights leave only the bias") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 12);
  for (Matrix* w : {&p.head_w1, &p.head_w2})
    for (std::size_t i = 0; i < w->size(); ++i) w->data()[i] = 0.0;
  for (std::size_t i = 0; i < p.head_b2.size(); ++i) p.head_b2.data()[i] = 0.25 * (i + 1);
  Matrix h(3, cfg.d_hidden, 1.7);
  Matrix out = regress(h, p, cfg);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j)
      CHECK(out(i, j) == doctest::Approx(p.head_b2(0, j)).epsilon(1e-15));
}

TEST_CASE("regress matches the per-row oracle") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 13);
  Rng rng(27);
  Matrix h(6, cfg.d_hidden);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.next_gaussian();
  CHECK(oracle::max_abs_diff(regress(h, p, cfg), oracle::reference_head(h, p)) < 1e-12);
}

TEST_CASE("forward equals the chained component oracles") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 14);
  SlideSample s = make_slide(cfg, 6, 31, 1);
  Matrix got = forward(s, p, cfg);

  Matrix c_emb = embed_cancer(s.cancer_onehot, p);
  Matrix x = s.patch_features;
  for (const auto& layer : p.cross) {
    Matrix attn = oracle::reference_mha(x, c_emb, cfg.n_cross_heads, layer.wq, layer.bq,
                                        layer.wk, layer.bk, layer.wv, layer.bv, layer.wo,
                                        layer.bo);
    for (std::size_t i = 0; i < x.size(); ++i) attn.data()[i] += x.data()[i];
    x = attn;
  }
  Matrix h = oracle::linear(x, p.hidden_w, p.hidden_b);
  for (const auto& layer : p.encoder)
    h = oracle::reference_encoder_layer(h, layer, cfg.n_enc_heads, cfg.layer_norm_eps);
  Matrix expected = oracle::reference_head(h, p);
  CHECK(oracle::max_abs_diff(got, expected) < 1e-10);
}

TEST_CASE("forward: end-to-end permutation equivariance with PE off") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 15);
  SlideSample s = make_slide(cfg, 8, 33, 2);
  Matrix base = forward(s, p, cfg);
  Rng rng(35);
  std::vector<std::size_t> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  SlideSample permuted = s;
  permuted.patch_features = permute_rows(s.patch_features, perm);
  permuted.expression = permute_rows(*s.expression, perm);
  Matrix got = forward(permuted, p, cfg);
  CHECK(oracle::max_abs_diff(got, permute_rows(base, perm)) < 1e-9);
}

TEST_CASE("forward: cross-attention makes the output depend on the cancer type") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 16);
  SlideSample a = make_slide(cfg, 5, 37, 0);
  SlideSample b = a;
  b.cancer_index = 1;
  b.cancer_onehot.assign(cfg.d_onco, 0.0);
  b.cancer_onehot[1] = 1.0;
  Matrix out_a = forward(a, p, cfg);
  Matrix out_b = forward(b, p, cfg);
  CHECK(oracle::max_abs_diff(out_a, out_b) > 1e-8);

  ModelConfig ablated = cfg;
  ablated.use_cross_attention = false;
  ModelParams q = init_params(ablated, 16);
  Matrix abl_a = forward(a, q, ablated);
  Matrix abl_b = forward(b, q, ablated);
  CHECK(oracle::max_abs_diff(abl_a, abl_b) == 0.0);
}

TEST_CASE("forward: ablated model carries no conditioning parameters") {
  ModelConfig cfg = small_config();
  cfg.use_cross_attention = false;
  ModelParams p = init_params(cfg, 17);
  CHECK(p.cancer_embed.empty());
  CHECK(p.cross.empty());
  for (const std::string& name : p.tensor_names()) {
    CHECK(name.rfind("cross", 0) != 0);
    CHECK(name != "cancer_embed");
  }
}

TEST_CASE("mse_loss: exact cases and the scalar loop oracle") {
  Rng rng(41);
  Matrix a(3, 4), b(3, 4);
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.next_gaussian();
  CHECK(mse_loss(a, a) == 0.0);

  Matrix shifted = a;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted.data()[i] += 1.0;
  CHECK(mse_loss(shifted, a) == doctest::Approx(1.0).epsilon(1e-14));

  for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.next_gaussian();
  double expect = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    expect += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  expect /= static_cast<double>(a.size());
  CHECK(mse_loss(a, b) == doctest::Approx(expect).epsilon(1e-14));

  Matrix wrong(4, 3);
  CHECK_THROWS_AS(mse_loss(a, wrong), std::invalid_argument);
}

TEST_CASE("full model: every parameter tensor passes finite-difference checks") {
  ModelConfig cfg = small_config();
  ModelParams p = init_params(cfg, 18);
  SlideSample s = make_slide(cfg, 4, 43, 1);

  std::vector<std::string> names = p.tensor_names();
  auto loss = [&](const std::vector<Matrix>& tensors, std::vector<Matrix>* grads) {
    ModelParams q = p;
    q.load_flat(tensors);
    return slide_loss_and_grads(s, q, cfg, grads);
  };
  GradCheckReport report = check_gradients(loss, p.tensors_flat(), names, 3, 1e-5, 7);
  for (const auto& e : report.entries) {
    CAPTURE(e.tensor);
    CHECK(e.max_rel_err < 1e-4);
  }
}

TEST_CASE("positional encoding changes with coordinates and breaks equivariance") {
  ModelConfig cfg = small_config();
  cfg.use_positional_encoding = true;
  ModelParams p = init_params(cfg, 19);
  SlideSample s = make_slide(cfg, 6, 47, 0);
  Matrix with_pe = forward(s, p, cfg);
  ModelConfig no_pe = cfg;
  no_pe.use_positional_encoding = false;
  Matrix without = forward(s, p, no_pe);
  CHECK(oracle::max_abs_diff(with_pe, without) > 1e-8);

  Matrix pe = positional_encoding(*s.coords, cfg.d_hidden);
  CHECK(pe.rows() == 6);
  CHECK(pe.cols() == cfg.d_hidden);
  for (std::size_t i = 0; i < pe.size(); ++i) CHECK(std::fabs(pe.data()[i]) <= 1.0);
}
