#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histoprism/matrix.hpp"
#include "histoprism/pathway.hpp"

namespace histoprism {

/// Per-gene correlation between truth and prediction across one slide's
/// patches. r is empty ("undefined") when either profile has zero variance;
/// undefined values are excluded from averages rather than zeroed.
struct GeneCorrelation {
  std::string slide_id;
  std::size_t gene_index = 0;
  std::optional<double> r;
};

/// Pearson correlation with population (1/n) moments; empty when either
/// vector is constant. Lengths must match and be >= 2.
std::optional<double> pcc(std::span<const double> y, std::span<const double> yhat);

/// One correlation per gene column.
std::vector<GeneCorrelation> per_gene_pcc(const Matrix& truth, const Matrix& pred,
                                          const std::string& slide_id = "");

/// Population variance of each column over the pooled rows of the given
/// matrices (all must share a column count).
std::vector<double> column_variances(const std::vector<const Matrix*>& stacked);

/// Per-cancer top-n gene lists by pooled expression variance (ties broken by
/// lower index) plus their sorted union.
struct HvgPanel {
  std::size_t n = 0;
  std::map<std::string, std::vector<std::size_t>> per_cancer;  // variance-rank order
  std::vector<std::size_t> union_panel;                        // ascending
};
HvgPanel select_hvg(const std::map<std::string, std::vector<const Matrix*>>& per_cancer_expression,
                    std::size_t n);

struct SlideMeta {
  std::string slide_id;
  std::string cancer;
  std::size_t split = 0;
};

struct SlideScore {
  std::string slide_id;
  std::string cancer;
  std::size_t split = 0;
  double mean_pcc = 0.0;
  std::size_t genes_defined = 0;
  std::size_t genes_undefined = 0;
};

struct MacroMicroRow {
  std::string cancer;
  double macro = 0.0;
  double macro_std = 0.0;  // across split means
  double micro = 0.0;
  double micro_std = 0.0;  // across slides
  std::size_t n_slides = 0;
};

struct MacroMicroReport {
  std::vector<MacroMicroRow> per_cancer;  // sorted by cancer name
  MacroMicroRow overall;                  // cancer == "OVERALL"
  std::vector<SlideScore> per_slide;
  std::vector<std::string> warnings;
};

/// Slide score = mean defined-gene PCC over the slide's cancer top-n HVGs
/// (the panel of the slide's split). Per cancer, macro averages the split
/// means and micro pools the slides; the overall row averages cancers
/// (macro) and pools all slides (micro).
MacroMicroReport macro_micro_pcc(const std::vector<std::vector<GeneCorrelation>>& per_slide_pcc,
                                 const std::vector<SlideMeta>& slide_meta,
                                 const std::vector<HvgPanel>& panel_per_split);

struct GpcRow {
  std::string name;
  GeneSetSource source = GeneSetSource::Other;
  std::size_t genes_full = 0;   // set size before panel restriction
  std::size_t genes_panel = 0;  // |P_m| actually scored
  bool scored = false;
  double score = 0.0;
  double mean_variance = 0.0;    // filled by the variance-level pipeline
  double variance_level = 0.0;   // possibly half-integer across splits
  std::size_t undefined_pairs = 0;
  std::size_t slides_scored = 0;
};

struct GpcReport {
  std::vector<GpcRow> rows;  // sorted by pathway name
};

/// Pathway coherence: mean over slides of the slide's mean defined-gene
/// correlation over the pathway's panel genes. Pathways must already be
/// panel-restricted; gene symbols are resolved through gene_names.
GpcReport gpc_score(const std::vector<std::vector<GeneCorrelation>>& per_slide_pcc,
                    const PathwayCollection& pathways,
                    const std::vector<std::string>& gene_names);

struct WinRateGroup {
  std::size_t wins = 0;
  std::size_t comparable = 0;
  double rate() const { return comparable ? static_cast<double>(wins) / comparable : 0.0; }
};

struct WinRates {
  WinRateGroup hallmark;
  WinRateGroup go;
  WinRateGroup other;
};

/// Fraction of pathways where a's score strictly exceeds b's, grouped by
/// source (ties are non-wins). Reports must carry identical pathway rows.
WinRates gpc_win_rate(const GpcReport& a, const GpcReport& b);

/// Decile discretization of positive gene variances into n_levels buckets.
/// lower_bounds[0] is 0 (exclusive); a gene's level is the largest one whose
/// bound it strictly exceeds, so zero-variance genes land in level 1.
struct VarianceLevels {
  std::vector<double> lower_bounds;  // size n_levels, strictly increasing
  std::size_t level_of(double variance) const;
};
VarianceLevels variance_levels(const std::vector<double>& gene_variances,
                               std::size_t n_levels = 10);

/// Per split, the pathway's unweighted mean gene variance is mapped through
/// that split's thresholds; the reported level is the mean over splits
/// (half-integers when splits disagree). Also returns the mean variance.
struct PathwayVarianceLevel {
  double mean_variance = 0.0;
  double level = 0.0;
};
PathwayVarianceLevel pathway_variance_level(
    const std::vector<std::size_t>& pathway_gene_indices,
    const std::vector<std::vector<double>>& variances_per_split,
    const std::vector<VarianceLevels>& levels_per_split);

}  // namespace histoprism
