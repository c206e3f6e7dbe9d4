#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "histoprism/clustering.hpp"
#include "histoprism/dataset_io.hpp"
#include "histoprism/metrics.hpp"
#include "histoprism/rng.hpp"
#include "histoprism/synth.hpp"
#include "oracle_helpers.hpp"

using namespace histoprism;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.n_cancers = 3;
  s.slides_per_cancer = 4;
  s.patches_min = 10;
  s.patches_max = 14;
  s.d_img = 10;
  s.d_gene = 12;
  s.signal_rank = 3;
  s.noise_sigma = 0.02;
  s.cancer_effect_scale = 1.0;
  s.seed = 42;
  return s;
}

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("histoprism_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.gene_names != b.gene_names || a.cancer_names != b.cancer_names) return false;
  if (a.slides.size() != b.slides.size() || a.splits.size() != b.splits.size()) return false;
  for (std::size_t i = 0; i < a.slides.size(); ++i) {
    const SlideSample &x = a.slides[i], &y = b.slides[i];
    if (x.slide_id != y.slide_id || x.cancer_label != y.cancer_label ||
        x.cancer_index != y.cancer_index)
      return false;
    if (!(x.patch_features == y.patch_features)) return false;
    if (x.expression.has_value() != y.expression.has_value()) return false;
    if (x.expression && !(*x.expression == *y.expression)) return false;
    if (x.coords.has_value() != y.coords.has_value()) return false;
    if (x.coords && !(*x.coords == *y.coords)) return false;
    if (x.cancer_onehot != y.cancer_onehot) return false;
  }
  for (std::size_t s = 0; s < a.splits.size(); ++s) {
    if (a.splits[s].name != b.splits[s].name) return false;
    if (a.splits[s].by_slide != b.splits[s].by_slide) return false;
  }
  if (a.generator.has_value() != b.generator.has_value()) return false;
  if (a.generator) {
    if (!(a.generator->mixture_means == b.generator->mixture_means)) return false;
    if (!(a.generator->feature_map_a == b.generator->feature_map_a)) return false;
    if (!(a.generator->feature_map_b == b.generator->feature_map_b)) return false;
    if (!(a.generator->gene_baseline == b.generator->gene_baseline)) return false;
    if (!(a.generator->cancer_offsets == b.generator->cancer_offsets)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("log1p_normalize: zero, the e-1 point, the elementwise oracle, negatives") {
  Matrix z(1, 1, 0.0);
  CHECK(log1p_normalize(z)(0, 0) == 0.0);
  Matrix e1(1, 1, std::exp(1.0) - 1.0);
  CHECK(log1p_normalize(e1)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  Rng rng(3);
  Matrix counts(4, 5);
  for (std::size_t i = 0; i < counts.size(); ++i)
    counts.data()[i] = std::floor(rng.uniform(0.0, 500.0));
  Matrix out = log1p_normalize(counts);
  for (std::size_t i = 0; i < counts.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(std::log(1.0 + counts.data()[i])).epsilon(1e-15));
  Matrix neg(1, 1, -0.5);
  CHECK_THROWS_AS(log1p_normalize(neg), std::invalid_argument);
}

TEST_CASE("generate: same seed twice is bit-identical, different seed differs") {
  SynthSpec spec = small_spec();
  Dataset a = generate(spec);
  Dataset b = generate(spec);
  CHECK(datasets_equal(a, b));
  spec.seed = 43;
  Dataset c = generate(spec);
  CHECK(!datasets_equal(a, c));
}

TEST_CASE("generate: expression is finite, nonnegative, log1p of integer counts") {
  Dataset ds = generate(small_spec());
  for (const SlideSample& s : ds.slides) {
    REQUIRE(s.expression.has_value());
    for (std::size_t i = 0; i < s.expression->size(); ++i) {
      double v = s.expression->data()[i];
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      double count = std::exp(v) - 1.0;
      CHECK(std::fabs(count - std::round(count)) < 1e-6);
    }
    s.validate();
  }
}

TEST_CASE("generate: patch counts respect the configured range") {
  SynthSpec spec = small_spec();
  spec.patches_min = 5;
  spec.patches_max = 9;
  Dataset ds = generate(spec);
  bool saw_non_min = false;
  for (const SlideSample& s : ds.slides) {
    CHECK(s.n_patches() >= 5);
    CHECK(s.n_patches() <= 9);
    saw_non_min = saw_non_min || s.n_patches() != 5;
  }
  CHECK(saw_non_min);
}

TEST_CASE("generate: stratified splits cover train/val/test per cancer") {
  Dataset ds = generate(small_spec());
  REQUIRE(ds.splits.size() == 2);
  for (std::size_t split = 0; split < 2; ++split) {
    for (std::size_t c = 0; c < ds.cancer_names.size(); ++c) {
      int train = 0, val = 0, test = 0;
      for (std::size_t i = 0; i < ds.slides.size(); ++i) {
        if (ds.slides[i].cancer_index != c) continue;
        switch (ds.splits[split].by_slide[i]) {
          case SplitPart::Train: ++train; break;
          case SplitPart::Val: ++val; break;
          case SplitPart::Test: ++test; break;
        }
      }
      CHECK(train >= 1);
      CHECK(val >= 1);
      CHECK(test >= 1);
    }
  }
  // the two splits differ
  CHECK(ds.splits[0].by_slide != ds.splits[1].by_slide);
}

TEST_CASE("generate: offset genes are exactly half, zero columns elsewhere") {
  Dataset ds = generate(small_spec());
  REQUIRE(ds.generator.has_value());
  auto offset = ds.generator->offset_genes();
  CHECK(offset.size() == ds.spec.d_gene / 2);
  SynthSpec no_effect = small_spec();
  no_effect.cancer_effect_scale = 0.0;
  Dataset flat = generate(no_effect);
  CHECK(flat.generator->offset_genes().empty());
}

TEST_CASE("planted signal: closed-form ridge on noiseless data reaches micro PCC > 0.999") {
  SynthSpec spec;
  spec.n_cancers = 2;
  spec.slides_per_cancer = 6;
  spec.patches_min = spec.patches_max = 48;
  spec.d_img = 16;
  spec.d_gene = 30;
  spec.signal_rank = 4;
  spec.noise_sigma = 0.0;
  spec.cancer_effect_scale = 0.0;
  spec.seed = 7;
  Dataset ds = generate(spec);

  // pool all patches, fit ridge, then score per slide like the evaluation
  std::size_t total = 0;
  for (const auto& s : ds.slides) total += s.n_patches();
  Matrix x(total, spec.d_img);
  Matrix y(total, spec.d_gene);
  std::size_t row = 0;
  for (const auto& s : ds.slides) {
    for (std::size_t i = 0; i < s.n_patches(); ++i, ++row) {
      for (std::size_t j = 0; j < spec.d_img; ++j) x(row, j) = s.patch_features(i, j);
      for (std::size_t g = 0; g < spec.d_gene; ++g) y(row, g) = (*s.expression)(i, g);
    }
  }
  // center, fit, predict
  std::vector<double> xm(spec.d_img, 0.0), ym(spec.d_gene, 0.0);
  for (std::size_t i = 0; i < total; ++i)
    for (std::size_t j = 0; j < spec.d_img; ++j) xm[j] += x(i, j);
  for (double& v : xm) v /= total;
  for (std::size_t i = 0; i < total; ++i)
    for (std::size_t g = 0; g < spec.d_gene; ++g) ym[g] += y(i, g);
  for (double& v : ym) v /= total;
  Matrix xc = x, yc = y;
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = 0; j < spec.d_img; ++j) xc(i, j) -= xm[j];
    for (std::size_t g = 0; g < spec.d_gene; ++g) yc(i, g) -= ym[g];
  }
  Matrix w = oracle::ridge_fit(xc, yc, 1e-8);

  double slide_sum = 0.0;
  std::size_t slide_count = 0;
  for (const auto& s : ds.slides) {
    Matrix xs(s.n_patches(), spec.d_img);
    for (std::size_t i = 0; i < s.n_patches(); ++i)
      for (std::size_t j = 0; j < spec.d_img; ++j) xs(i, j) = s.patch_features(i, j) - xm[j];
    Matrix pred = matmul(xs, w);
    auto pccs = per_gene_pcc(*s.expression, pred, s.slide_id);
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& g : pccs)
      if (g.r) {
        sum += *g.r;
        ++defined;
      }
    REQUIRE(defined > 0);
    slide_sum += sum / defined;
    ++slide_count;
  }
  double micro = slide_sum / slide_count;
  CHECK(micro > 0.999);
}

TEST_CASE("planted signal: strong cancer offsets make ground truth cluster perfectly") {
  SynthSpec spec = small_spec();
  spec.cancer_effect_scale = 8.0;
  spec.noise_sigma = 0.0;
  Dataset ds = generate(spec);
  std::vector<Matrix> truth;
  std::vector<std::string> labels;
  for (const SlideSample& s : ds.slides) {
    truth.push_back(*s.expression);
    labels.push_back(s.cancer_label);
  }
  ClusterEval e = cluster_eval(truth, labels, 11);
  CHECK(e.ami == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.ari == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dataset round trip: write then read preserves every field") {
  Dataset ds = generate(small_spec());
  fs::path dir = temp_dir("roundtrip");
  write_dataset(ds, dir);
  Dataset back = read_dataset(dir);
  CHECK(datasets_equal(ds, back));
  CHECK(back.spec.seed == ds.spec.seed);
  CHECK(back.spec.noise_sigma == ds.spec.noise_sigma);
  fs::remove_all(dir);
}

TEST_CASE("dataset writes are byte-identical across runs") {
  Dataset ds = generate(small_spec());
  fs::path d1 = temp_dir("bytes1"), d2 = temp_dir("bytes2");
  write_dataset(ds, d1);
  write_dataset(ds, d2);
  for (const auto& entry : fs::recursive_directory_iterator(d1)) {
    if (!entry.is_regular_file()) continue;
    fs::path rel = fs::relative(entry.path(), d1);
    std::ifstream a(entry.path(), std::ios::binary), b(d2 / rel, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("tensor file: truncation fails with file and offset, no partial result") {
  Dataset ds = generate(small_spec());
  fs::path dir = temp_dir("truncate");
  write_dataset(ds, dir);
  fs::path victim = dir / "slides" / (ds.slides[0].slide_id + ".bin");
  auto size = fs::file_size(victim);
  fs::resize_file(victim, size - 16);
  try {
    read_dataset(dir);
    FAIL("expected a truncation error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find(victim.string()) != std::string::npos);
    CHECK(msg.find("truncated at offset") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("tensor file: sizes match header-declared shapes exactly") {
  fs::path dir = temp_dir("shape");
  Matrix a(3, 4, 1.5), b(2, 2, -0.5);
  fs::path file = dir / "t.bin";
  write_tensor_file(file, {{"a", &a}, {"b", &b}});
  // magic + count + per tensor (name_len + name + rows + cols + data)
  std::size_t expected = 8 + 4 + (4 + 1 + 8 + 8 + 12 * 8) + (4 + 1 + 8 + 8 + 4 * 8);
  CHECK(fs::file_size(file) == expected);
  auto tensors = read_tensor_file(file);
  REQUIRE(tensors.size() == 2);
  CHECK(tensors[0].first == "a");
  CHECK(tensors[0].second == a);
  CHECK(tensors[1].second == b);
  fs::remove_all(dir);
}

TEST_CASE("tensor file: bad magic is rejected at offset zero") {
  fs::path dir = temp_dir("magic");
  fs::path file = dir / "bad.bin";
  std::ofstream(file, std::ios::binary) << "NOTMAGIC plus junk";
  CHECK_THROWS_WITH_AS(read_tensor_file(file), doctest::Contains("bad magic"),
                       std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("synth spec validation rejects bad inputs") {
  SynthSpec s = small_spec();
  s.patches_max = s.patches_min - 1;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s = small_spec();
  s.noise_sigma = -0.1;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
  s = small_spec();
  s.d_gene = 0;
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
}
