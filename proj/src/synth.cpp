#include "histoprism/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "histoprism/rng.hpp"

namespace histoprism {

namespace {

using namespace synthconst;

// Stream ids for seed splitting; fixed forever.
enum Stream : std::uint64_t {
  kStreamMixture = 1,
  kStreamFeatureMap = 2,
  kStreamBaseline = 3,
  kStreamOffsets = 4,
  kStreamSlideBase = 1000,   // + global slide index
  kStreamSplitBase = 500000  // + split * 4096 + cancer index
};

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

std::string zero_pad(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*zu", width, v);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_cancers < 1 || slides_per_cancer < 1 || patches_min < 1 || d_img < 1 || d_gene < 1 ||
      signal_rank < 1)
    throw std::invalid_argument("SynthSpec: all counts must be >= 1");
  if (patches_max < patches_min)
    throw std::invalid_argument("SynthSpec: patches_max < patches_min");
  if (noise_sigma < 0.0) throw std::invalid_argument("SynthSpec: noise_sigma must be >= 0");
  if (cancer_effect_scale < 0.0)
    throw std::invalid_argument("SynthSpec: cancer_effect_scale must be >= 0");
}

std::vector<std::size_t> GeneratorParams::offset_genes() const {
  std::vector<std::size_t> genes;
  for (std::size_t g = 0; g < cancer_offsets.cols(); ++g) {
    for (std::size_t c = 0; c < cancer_offsets.rows(); ++c) {
      if (cancer_offsets(c, g) != 0.0) {
        genes.push_back(g);
        break;
      }
    }
  }
  return genes;
}

std::string to_string(SplitPart p) {
  switch (p) {
    case SplitPart::Train: return "train";
    case SplitPart::Val: return "val";
    default: return "test";
  }
}

SplitPart split_part_from_string(const std::string& s) {
  if (s == "train") return SplitPart::Train;
  if (s == "val") return SplitPart::Val;
  if (s == "test") return SplitPart::Test;
  throw std::invalid_argument("unknown split part: " + s);
}

std::vector<SlideSample> Dataset::slides_in(std::size_t split, SplitPart part) const {
  if (split >= splits.size()) throw std::invalid_argument("Dataset: split index out of range");
  std::vector<SlideSample> out;
  for (std::size_t i = 0; i < slides.size(); ++i)
    if (splits[split].by_slide[i] == part) out.push_back(slides[i]);
  return out;
}

Matrix log1p_normalize(const Matrix& counts) {
  Matrix out = counts;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = out.data()[i];
    if (v < 0.0) throw std::invalid_argument("log1p_normalize: negative entry");
    out.data()[i] = std::log1p(v);
  }
  return out;
}

Dataset generate(const SynthSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;

  for (std::size_t c = 0; c < spec.n_cancers; ++c)
    ds.cancer_names.push_back("cancer_" + zero_pad(c, 2));
  for (std::size_t g = 0; g < spec.d_gene; ++g)
    ds.gene_names.push_back("gene_" + zero_pad(g, 4));

  GeneratorParams gen;

  // Per-cancer mixture components, perturbations of one shared pool so the
  // features alone carry only a weak cancer signal; the planted cancer
  // signal lives in the expression offsets.
  {
    Rng rng(spec.seed, kStreamMixture);
    Matrix pool(kMixtureComponents, spec.d_img);
    for (std::size_t i = 0; i < pool.size(); ++i) pool.data()[i] = rng.next_gaussian();
    gen.mixture_means = Matrix(spec.n_cancers * kMixtureComponents, spec.d_img);
    for (std::size_t c = 0; c < spec.n_cancers; ++c)
      for (std::size_t j = 0; j < kMixtureComponents; ++j)
        for (std::size_t d = 0; d < spec.d_img; ++d)
          gen.mixture_means(c * kMixtureComponents + j, d) =
              pool(j, d) + kCancerComponentShift * rng.next_gaussian();
  }
  {
    Rng rng(spec.seed, kStreamFeatureMap);
    gen.feature_map_a = Matrix(spec.d_img, spec.signal_rank);
    for (std::size_t i = 0; i < gen.feature_map_a.size(); ++i)
      gen.feature_map_a.data()[i] = rng.next_gaussian() / std::sqrt(static_cast<double>(spec.d_img));
    // unit-norm columns give every gene the same planted signal strength
    gen.feature_map_b = Matrix(spec.signal_rank, spec.d_gene);
    for (std::size_t i = 0; i < gen.feature_map_b.size(); ++i)
      gen.feature_map_b.data()[i] = rng.next_gaussian();
    for (std::size_t g = 0; g < spec.d_gene; ++g) {
      double norm_sq = 0.0;
      for (std::size_t r = 0; r < spec.signal_rank; ++r)
        norm_sq += gen.feature_map_b(r, g) * gen.feature_map_b(r, g);
      double inv = 1.0 / std::sqrt(norm_sq);
      for (std::size_t r = 0; r < spec.signal_rank; ++r) gen.feature_map_b(r, g) *= inv;
    }
  }
  {
    Rng rng(spec.seed, kStreamBaseline);
    gen.gene_baseline = Matrix(1, spec.d_gene);
    for (std::size_t g = 0; g < spec.d_gene; ++g)
      gen.gene_baseline(0, g) = rng.uniform(kBaselineLow, kBaselineHigh);
  }
  {
    // Offsets are planted on half of the genes, chosen by a seeded shuffle.
    Rng rng(spec.seed, kStreamOffsets);
    std::vector<std::size_t> order(spec.d_gene);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::size_t n_offset = spec.d_gene / 2;
    std::vector<bool> has_offset(spec.d_gene, false);
    for (std::size_t i = 0; i < n_offset; ++i) has_offset[order[i]] = true;
    gen.cancer_offsets = Matrix(spec.n_cancers, spec.d_gene);
    for (std::size_t c = 0; c < spec.n_cancers; ++c)
      for (std::size_t g = 0; g < spec.d_gene; ++g) {
        double draw = rng.next_gaussian();  // drawn either way: keeps streams stable
        gen.cancer_offsets(c, g) = has_offset[g] ? spec.cancer_effect_scale * draw : 0.0;
      }
  }

  std::size_t global_slide = 0;
  for (std::size_t c = 0; c < spec.n_cancers; ++c) {
    for (std::size_t s = 0; s < spec.slides_per_cancer; ++s, ++global_slide) {
      Rng rng(spec.seed, kStreamSlideBase + global_slide);
      SlideSample slide;
      slide.slide_id = "slide_" + zero_pad(global_slide, 4);
      slide.cancer_label = ds.cancer_names[c];
      slide.cancer_index = c;
      slide.cancer_onehot.assign(spec.n_cancers, 0.0);
      slide.cancer_onehot[c] = 1.0;

      std::size_t n = spec.patches_min +
                      static_cast<std::size_t>(rng.next_below(spec.patches_max - spec.patches_min + 1));
      slide.patch_features = Matrix(n, spec.d_img);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t comp = static_cast<std::size_t>(rng.next_below(kMixtureComponents));
        const std::size_t mrow = c * kMixtureComponents + comp;
        for (std::size_t d = 0; d < spec.d_img; ++d)
          slide.patch_features(i, d) =
              gen.mixture_means(mrow, d) + kPatchJitter * rng.next_gaussian();
      }

      // counts = round(kCountScale * (softplus(baseline + signal + offset) + noise))
      Matrix signal = matmul(matmul(slide.patch_features, gen.feature_map_a), gen.feature_map_b);
      Matrix counts(n, spec.d_gene);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t g = 0; g < spec.d_gene; ++g) {
          double z = gen.gene_baseline(0, g) + kSignalScale * signal(i, g) +
                     gen.cancer_offsets(c, g);
          double expr = softplus(z) + spec.noise_sigma * rng.next_gaussian();
          counts(i, g) = std::max(0.0, std::round(kCountScale * expr));
        }
      slide.expression = log1p_normalize(counts);

      // Square-lattice grid coordinates.
      std::size_t side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
      Matrix coords(n, 2);
      for (std::size_t i = 0; i < n; ++i) {
        coords(i, 0) = static_cast<double>(i % side);
        coords(i, 1) = static_cast<double>(i / side);
      }
      slide.coords = coords;
      ds.slides.push_back(std::move(slide));
    }
  }
  ds.generator = std::move(gen);

  // Two splits, stratified by cancer: every cancer is dealt into
  // train/val/test whenever it has at least three slides.
  for (std::size_t split = 0; split < 2; ++split) {
    SplitAssignment assign;
    assign.name = "split" + std::to_string(split);
    assign.by_slide.assign(ds.slides.size(), SplitPart::Train);
    for (std::size_t c = 0; c < spec.n_cancers; ++c) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < ds.slides.size(); ++i)
        if (ds.slides[i].cancer_index == c) idx.push_back(i);
      Rng rng(spec.seed, kStreamSplitBase + split * 4096 + c);
      rng.shuffle(idx);
      const std::size_t total = idx.size();
      std::size_t n_test = 0, n_val = 0;
      if (total >= 3) {
        n_test = std::max<std::size_t>(1, total / 6);
        n_val = std::max<std::size_t>(1, total / 5);
      } else if (total == 2) {
        n_val = 1;
      }
      for (std::size_t i = 0; i < total; ++i) {
        SplitPart part = SplitPart::Train;
        if (i < n_test)
          part = SplitPart::Test;
        else if (i < n_test + n_val)
          part = SplitPart::Val;
        assign.by_slide[idx[i]] = part;
      }
    }
    ds.splits.push_back(std::move(assign));
  }
  return ds;
}

}  // namespace histoprism
