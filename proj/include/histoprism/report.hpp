#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "histoprism/clustering.hpp"
#include "histoprism/metrics.hpp"
#include "histoprism/synth.hpp"

namespace histoprism {

/// Predictions produced by one training run (one split); keyed by slide id.
struct PredictionSet {
  std::size_t trained_split = 0;
  std::map<std::string, Matrix> by_slide;
};

/// Per-gene correlations of the test slides covered by the prediction sets,
/// each split's test slides scored against that split's run.
struct TestCorrelations {
  std::vector<std::vector<GeneCorrelation>> per_slide;
  std::vector<SlideMeta> meta;
};
TestCorrelations test_correlations(const Dataset& ds, const std::vector<PredictionSet>& preds);

struct HvgEvalResult {
  std::vector<HvgPanel> panel_per_split;  // indexed by split id
  MacroMicroReport report;
};
/// HVG panels come from each split's training-slide ground truth; slide
/// scores and macro/micro aggregation follow the panel of the slide's split.
HvgEvalResult evaluate_hvg(const Dataset& ds, const std::vector<PredictionSet>& preds,
                           std::size_t hvg_n);

struct GpcEvalResult {
  GpcReport report;
  std::vector<std::vector<double>> variances_per_split;  // test-set gene variances
  std::vector<VarianceLevels> levels_per_split;
  std::size_t n_slides = 0;
};
/// Pathway scores over the evaluated test slides plus the per-split variance
/// level tables (from ground truth) and per-pathway level annotations.
/// `curated` must already be restricted to the dataset's gene names.
GpcEvalResult evaluate_gpc(const Dataset& ds, const std::vector<PredictionSet>& preds,
                           const PathwayCollection& curated, std::size_t n_levels);

/// Mean-over-patches slide profiles of the test predictions, clustered with
/// k = number of distinct cancer types and scored against the true labels.
ClusterEval evaluate_clustering(const Dataset& ds, const std::vector<PredictionSet>& preds,
                                std::uint64_t seed);

// Report writers; text tables are aligned for reading, CSVs carry full f64
// precision and round-trip losslessly.
void write_hvg_text(const MacroMicroReport& r, std::ostream& out);
void write_hvg_csv(const MacroMicroReport& r, std::ostream& out);
void write_gpc_text(const GpcReport& r, std::ostream& out);
void write_gpc_csv(const GpcReport& r, std::ostream& out);
GpcReport read_gpc_csv(std::istream& in, const std::string& source);
void write_win_rates_text(const WinRates& w, std::ostream& out);
void write_cluster_csv(const ClusterEval& e, std::ostream& out);
void write_variance_levels_csv(const std::vector<VarianceLevels>& levels, std::ostream& out);
/// Two-model mean score per variance level, one panel per source group.
void write_gpc_comparison_svg(const GpcReport& ours, const GpcReport& baseline,
                              std::ostream& out);

}  // namespace histoprism
