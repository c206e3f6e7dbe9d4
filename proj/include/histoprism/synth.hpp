#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "histoprism/matrix.hpp"
#include "histoprism/model.hpp"

namespace histoprism {

/// Everything that determines a generated dataset; byte-identical replay is
/// guaranteed for equal specs (fixed SplitMix64 streams, no platform RNG).
struct SynthSpec {
  std::size_t n_cancers = 4;
  std::size_t slides_per_cancer = 6;
  std::size_t patches_min = 64;
  std::size_t patches_max = 64;
  std::size_t d_img = 16;
  std::size_t d_gene = 40;
  std::size_t signal_rank = 4;
  double noise_sigma = 0.05;
  double cancer_effect_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ground-truth generator tensors, stored with the dataset so tests can use
/// the generator itself as the evaluation oracle.
struct GeneratorParams {
  Matrix mixture_means;   // (n_cancers * kMixtureComponents) x d_img
  Matrix feature_map_a;   // d_img x signal_rank
  Matrix feature_map_b;   // signal_rank x d_gene
  Matrix gene_baseline;   // 1 x d_gene
  Matrix cancer_offsets;  // n_cancers x d_gene; all-zero columns carry no offset

  /// Genes whose offset column is not identically zero.
  std::vector<std::size_t> offset_genes() const;
};

enum class SplitPart { Train, Val, Test };
std::string to_string(SplitPart p);
SplitPart split_part_from_string(const std::string& s);

struct SplitAssignment {
  std::string name;
  std::vector<SplitPart> by_slide;  // aligned with Dataset::slides
};

struct Dataset {
  SynthSpec spec;
  std::vector<std::string> cancer_names;
  std::vector<std::string> gene_names;
  std::vector<SlideSample> slides;
  std::vector<SplitAssignment> splits;
  std::optional<GeneratorParams> generator;

  std::vector<SlideSample> slides_in(std::size_t split, SplitPart part) const;
};

/// Elementwise ln(1 + x); rejects negative entries.
Matrix log1p_normalize(const Matrix& counts);

/// Planted-signal generator. Patch features come from per-cancer Gaussian
/// mixtures over a shared component pool; expression is
/// round(150 * (softplus(baseline + 0.2*(x A B) + offset_c) + noise)),
/// log1p-normalized, with the additive cancer offset planted on half of the
/// genes. Two train/val/test splits are assigned stratified by cancer type.
Dataset generate(const SynthSpec& spec);

namespace synthconst {
inline constexpr std::size_t kMixtureComponents = 4;
inline constexpr double kCancerComponentShift = 0.1;
inline constexpr double kPatchJitter = 0.75;
inline constexpr double kSignalScale = 0.25;
inline constexpr double kBaselineLow = 5.5;
inline constexpr double kBaselineHigh = 6.5;
inline constexpr double kCountScale = 150.0;
}  // namespace synthconst

}  // namespace histoprism
