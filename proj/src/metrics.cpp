#include "histoprism/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace histoprism {

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::optional<double> pcc(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("pcc: length mismatch");
  if (y.size() < 2) throw std::invalid_argument("pcc: need at least two samples");
  const double n = static_cast<double>(y.size());
  double my = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mh += yhat[i];
  }
  my /= n;
  mh /= n;
  double cov = 0.0, vy = 0.0, vh = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double a = y[i] - my, b = yhat[i] - mh;
    cov += a * b;
    vy += a * a;
    vh += b * b;
  }
  if (vy == 0.0 || vh == 0.0) return std::nullopt;
  return cov / std::sqrt(vy * vh);
}

std::vector<GeneCorrelation> per_gene_pcc(const Matrix& truth, const Matrix& pred,
                                          const std::string& slide_id) {
  if (!truth.same_shape(pred))
    throw std::invalid_argument("per_gene_pcc: shape mismatch " + truth.shape_str() + " vs " +
                                pred.shape_str());
  if (truth.rows() < 2) throw std::invalid_argument("per_gene_pcc: need at least two patches");
  std::vector<GeneCorrelation> out;
  out.reserve(truth.cols());
  std::vector<double> a(truth.rows()), b(truth.rows());
  for (std::size_t g = 0; g < truth.cols(); ++g) {
    for (std::size_t i = 0; i < truth.rows(); ++i) {
      a[i] = truth(i, g);
      b[i] = pred(i, g);
    }
    out.push_back({slide_id, g, pcc(a, b)});
  }
  return out;
}

std::vector<double> column_variances(const std::vector<const Matrix*>& stacked) {
  if (stacked.empty()) throw std::invalid_argument("column_variances: no matrices");
  const std::size_t cols = stacked[0]->cols();
  std::size_t rows = 0;
  for (const Matrix* m : stacked) {
    if (m->cols() != cols) throw std::invalid_argument("column_variances: column mismatch");
    rows += m->rows();
  }
  if (rows < 2) throw std::invalid_argument("column_variances: need at least two rows");
  std::vector<double> mean(cols, 0.0), var(cols, 0.0);
  for (const Matrix* m : stacked)
    for (std::size_t r = 0; r < m->rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c) mean[c] += (*m)(r, c);
  for (std::size_t c = 0; c < cols; ++c) mean[c] /= static_cast<double>(rows);
  for (const Matrix* m : stacked)
    for (std::size_t r = 0; r < m->rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        double d = (*m)(r, c) - mean[c];
        var[c] += d * d;
      }
  for (std::size_t c = 0; c < cols; ++c) var[c] /= static_cast<double>(rows);
  return var;
}

HvgPanel select_hvg(const std::map<std::string, std::vector<const Matrix*>>& per_cancer_expression,
                    std::size_t n) {
  if (per_cancer_expression.empty()) throw std::invalid_argument("select_hvg: no cancers");
  HvgPanel panel;
  panel.n = n;
  std::set<std::size_t> uni;
  for (const auto& [cancer, mats] : per_cancer_expression) {
    std::vector<double> var = column_variances(mats);
    if (n > var.size())
      throw std::invalid_argument("select_hvg: n (" + std::to_string(n) +
                                  ") exceeds gene count (" + std::to_string(var.size()) + ")");
    std::vector<std::size_t> idx(var.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (var[a] != var[b]) return var[a] > var[b];
      return a < b;
    });
    idx.resize(n);
    for (std::size_t g : idx) uni.insert(g);
    panel.per_cancer[cancer] = std::move(idx);
  }
  panel.union_panel.assign(uni.begin(), uni.end());
  return panel;
}

MacroMicroReport macro_micro_pcc(const std::vector<std::vector<GeneCorrelation>>& per_slide_pcc,
                                 const std::vector<SlideMeta>& slide_meta,
                                 const std::vector<HvgPanel>& panel_per_split) {
  if (per_slide_pcc.size() != slide_meta.size())
    throw std::invalid_argument("macro_micro_pcc: one meta entry per slide required");
  if (panel_per_split.empty()) throw std::invalid_argument("macro_micro_pcc: no HVG panels");

  MacroMicroReport report;
  for (std::size_t s = 0; s < per_slide_pcc.size(); ++s) {
    const SlideMeta& meta = slide_meta[s];
    // A single shared panel may serve all splits.
    const HvgPanel& panel =
        panel_per_split[std::min(meta.split, panel_per_split.size() - 1)];
    auto it = panel.per_cancer.find(meta.cancer);
    if (it == panel.per_cancer.end())
      throw std::invalid_argument("macro_micro_pcc: no HVG list for cancer " + meta.cancer);
    SlideScore score;
    score.slide_id = meta.slide_id;
    score.cancer = meta.cancer;
    score.split = meta.split;
    double sum = 0.0;
    for (std::size_t g : it->second) {
      if (g >= per_slide_pcc[s].size())
        throw std::invalid_argument("macro_micro_pcc: HVG index out of range");
      const auto& r = per_slide_pcc[s][g].r;
      if (r) {
        sum += *r;
        ++score.genes_defined;
      } else {
        ++score.genes_undefined;
      }
    }
    if (score.genes_defined == 0) {
      report.warnings.push_back("slide " + meta.slide_id +
                                " has no defined HVG correlations; excluded");
      continue;
    }
    score.mean_pcc = sum / static_cast<double>(score.genes_defined);
    report.per_slide.push_back(std::move(score));
  }

  std::map<std::string, std::vector<const SlideScore*>> by_cancer;
  for (const SlideScore& s : report.per_slide) by_cancer[s.cancer].push_back(&s);

  std::vector<double> cancer_macros;
  std::vector<double> all_slide_scores;
  for (const auto& [cancer, slides] : by_cancer) {
    MacroMicroRow row;
    row.cancer = cancer;
    row.n_slides = slides.size();
    std::map<std::size_t, std::vector<double>> by_split;
    std::vector<double> pooled;
    for (const SlideScore* s : slides) {
      by_split[s->split].push_back(s->mean_pcc);
      pooled.push_back(s->mean_pcc);
      all_slide_scores.push_back(s->mean_pcc);
    }
    std::vector<double> split_means;
    bool balanced = true;
    std::size_t first_count = by_split.begin()->second.size();
    for (const auto& [split, vals] : by_split) {
      split_means.push_back(mean_of(vals));
      balanced = balanced && vals.size() == first_count;
    }
    row.macro = mean_of(split_means);
    row.macro_std = pop_std(split_means);
    // Balanced designs evaluate the micro mean through the identical
    // expression as the macro mean, so the identity holds bit-exactly.
    row.micro = balanced ? mean_of(split_means) : mean_of(pooled);
    row.micro_std = pop_std(pooled);
    cancer_macros.push_back(row.macro);
    report.per_cancer.push_back(std::move(row));
  }
  if (cancer_macros.empty()) throw std::invalid_argument("macro_micro_pcc: no scorable slides");

  report.overall.cancer = "OVERALL";
  report.overall.n_slides = all_slide_scores.size();
  report.overall.macro = mean_of(cancer_macros);
  report.overall.macro_std = pop_std(cancer_macros);
  report.overall.micro = mean_of(all_slide_scores);
  report.overall.micro_std = pop_std(all_slide_scores);
  return report;
}

GpcReport gpc_score(const std::vector<std::vector<GeneCorrelation>>& per_slide_pcc,
                    const PathwayCollection& pathways,
                    const std::vector<std::string>& gene_names) {
  if (per_slide_pcc.empty()) throw std::invalid_argument("gpc_score: no slides");
  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < gene_names.size(); ++i) index_of[gene_names[i]] = i;

  GpcReport report;
  for (const GeneSet& set : pathways.sets) {
    GpcRow row;
    row.name = set.name;
    row.source = set.source;
    row.genes_full = set.size();
    std::vector<std::size_t> indices;
    for (const std::string& g : set.genes) {
      auto it = index_of.find(g);
      if (it == index_of.end())
        throw std::invalid_argument("gpc_score: gene " + g + " of " + set.name +
                                    " not in panel; restrict_to_panel first");
      indices.push_back(it->second);
    }
    row.genes_panel = indices.size();

    double slide_sum = 0.0;
    for (const auto& slide : per_slide_pcc) {
      double sum = 0.0;
      std::size_t defined = 0;
      for (std::size_t g : indices) {
        if (g >= slide.size()) throw std::invalid_argument("gpc_score: gene index out of range");
        if (slide[g].r) {
          sum += *slide[g].r;
          ++defined;
        } else {
          ++row.undefined_pairs;
        }
      }
      if (defined > 0) {
        slide_sum += sum / static_cast<double>(defined);
        ++row.slides_scored;
      }
    }
    if (row.slides_scored > 0) {
      row.scored = true;
      row.score = slide_sum / static_cast<double>(row.slides_scored);
    }
    report.rows.push_back(std::move(row));
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const GpcRow& a, const GpcRow& b) { return a.name < b.name; });
  return report;
}

WinRates gpc_win_rate(const GpcReport& a, const GpcReport& b) {
  if (a.rows.size() != b.rows.size())
    throw std::invalid_argument("gpc_win_rate: reports carry different pathway rows");
  WinRates wr;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].name != b.rows[i].name)
      throw std::invalid_argument("gpc_win_rate: pathway rows disagree at " + a.rows[i].name);
    if (!a.rows[i].scored || !b.rows[i].scored) continue;
    WinRateGroup* group = &wr.other;
    switch (a.rows[i].source) {
      case GeneSetSource::Hallmark: group = &wr.hallmark; break;
      case GeneSetSource::GO_BP:
      case GeneSetSource::GO_CC:
      case GeneSetSource::GO_MF: group = &wr.go; break;
      default: break;
    }
    ++group->comparable;
    if (a.rows[i].score > b.rows[i].score) ++group->wins;
  }
  return wr;
}

std::size_t VarianceLevels::level_of(double variance) const {
  std::size_t level = 1;
  for (std::size_t i = 1; i < lower_bounds.size(); ++i)
    if (variance > lower_bounds[i]) level = i + 1;
  return level;
}

VarianceLevels variance_levels(const std::vector<double>& gene_variances,
                               std::size_t n_levels) {
  if (n_levels < 2) throw std::invalid_argument("variance_levels: need at least two levels");
  std::vector<double> pos;
  for (double v : gene_variances) {
    if (v < 0.0) throw std::invalid_argument("variance_levels: negative variance");
    if (v > 0.0) pos.push_back(v);
  }
  std::sort(pos.begin(), pos.end());
  std::set<double> distinct(pos.begin(), pos.end());
  if (distinct.size() < n_levels)
    throw std::invalid_argument("variance_levels: fewer distinct positive variances (" +
                                std::to_string(distinct.size()) + ") than levels");

  VarianceLevels levels;
  levels.lower_bounds.resize(n_levels);
  levels.lower_bounds[0] = 0.0;
  const std::size_t m = pos.size();
  for (std::size_t k = 1; k < n_levels; ++k) {
    // last value of the previous decile block: level k+1 starts strictly above it
    std::size_t idx = (k * m) / n_levels;
    levels.lower_bounds[k] = pos[idx - 1];
  }
  for (std::size_t k = 1; k < n_levels; ++k)
    if (!(levels.lower_bounds[k] > levels.lower_bounds[k - 1]))
      throw std::invalid_argument(
          "variance_levels: duplicate values at a decile boundary; thresholds not strictly "
          "increasing");
  return levels;
}

PathwayVarianceLevel pathway_variance_level(
    const std::vector<std::size_t>& pathway_gene_indices,
    const std::vector<std::vector<double>>& variances_per_split,
    const std::vector<VarianceLevels>& levels_per_split) {
  if (pathway_gene_indices.empty())
    throw std::invalid_argument("pathway_variance_level: empty pathway");
  if (variances_per_split.size() != levels_per_split.size() || variances_per_split.empty())
    throw std::invalid_argument("pathway_variance_level: one VarianceLevels per split required");

  PathwayVarianceLevel out;
  double level_sum = 0.0, var_sum = 0.0;
  for (std::size_t s = 0; s < variances_per_split.size(); ++s) {
    double mean_var = 0.0;
    for (std::size_t g : pathway_gene_indices) {
      if (g >= variances_per_split[s].size())
        throw std::invalid_argument("pathway_variance_level: gene index out of range");
      mean_var += variances_per_split[s][g];
    }
    mean_var /= static_cast<double>(pathway_gene_indices.size());
    var_sum += mean_var;
    level_sum += static_cast<double>(levels_per_split[s].level_of(mean_var));
  }
  out.mean_variance = var_sum / static_cast<double>(variances_per_split.size());
  out.level = level_sum / static_cast<double>(levels_per_split.size());
  return out;
}

}  // namespace histoprism
