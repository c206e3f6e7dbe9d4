#include "histoprism/report.hpp"

#include "histoprism/num_format.hpp"

#include "histoprism/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace histoprism {

namespace {

std::string fmt4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fixed_width(const std::string& s, std::size_t w) {
  if (s.size() >= w) return s;
  return s + std::string(w - s.size(), ' ');
}

}  // namespace

TestCorrelations test_correlations(const Dataset& ds, const std::vector<PredictionSet>& preds) {
  if (preds.empty()) throw std::invalid_argument("test_correlations: no prediction sets");
  std::set<std::size_t> seen_splits;
  TestCorrelations out;
  for (const PredictionSet& ps : preds) {
    if (ps.trained_split >= ds.splits.size())
      throw std::invalid_argument("test_correlations: prediction set references split " +
                                  std::to_string(ps.trained_split) + " not in dataset");
    if (!seen_splits.insert(ps.trained_split).second)
      throw std::invalid_argument("test_correlations: duplicate prediction set for split " +
                                  std::to_string(ps.trained_split));
    for (std::size_t i = 0; i < ds.slides.size(); ++i) {
      if (ds.splits[ps.trained_split].by_slide[i] != SplitPart::Test) continue;
      const SlideSample& slide = ds.slides[i];
      if (!slide.expression)
        throw std::invalid_argument("test_correlations: slide " + slide.slide_id +
                                    " has no ground truth");
      auto it = ps.by_slide.find(slide.slide_id);
      if (it == ps.by_slide.end())
        throw std::invalid_argument("test_correlations: missing prediction for test slide " +
                                    slide.slide_id);
      out.per_slide.push_back(per_gene_pcc(*slide.expression, it->second, slide.slide_id));
      out.meta.push_back({slide.slide_id, slide.cancer_label, ps.trained_split});
    }
  }
  if (out.per_slide.empty())
    throw std::invalid_argument("test_correlations: no test slides covered");
  return out;
}

HvgEvalResult evaluate_hvg(const Dataset& ds, const std::vector<PredictionSet>& preds,
                           std::size_t hvg_n) {
  HvgEvalResult result;
  // Panels for every dataset split (from training ground truth only).
  for (std::size_t split = 0; split < ds.splits.size(); ++split) {
    std::map<std::string, std::vector<const Matrix*>> per_cancer;
    for (std::size_t i = 0; i < ds.slides.size(); ++i) {
      if (ds.splits[split].by_slide[i] != SplitPart::Train) continue;
      const SlideSample& s = ds.slides[i];
      if (!s.expression)
        throw std::invalid_argument("evaluate_hvg: training slide " + s.slide_id +
                                    " has no expression");
      per_cancer[s.cancer_label].push_back(&*s.expression);
    }
    result.panel_per_split.push_back(select_hvg(per_cancer, hvg_n));
  }
  TestCorrelations tc = test_correlations(ds, preds);
  result.report = macro_micro_pcc(tc.per_slide, tc.meta, result.panel_per_split);
  return result;
}

GpcEvalResult evaluate_gpc(const Dataset& ds, const std::vector<PredictionSet>& preds,
                           const PathwayCollection& curated, std::size_t n_levels) {
  GpcEvalResult result;
  TestCorrelations tc = test_correlations(ds, preds);
  result.n_slides = tc.per_slide.size();
  result.report = gpc_score(tc.per_slide, curated, ds.gene_names);

  // Variance tables from each split's test-set ground truth.
  for (std::size_t split = 0; split < ds.splits.size(); ++split) {
    std::vector<const Matrix*> test_truth;
    for (std::size_t i = 0; i < ds.slides.size(); ++i)
      if (ds.splits[split].by_slide[i] == SplitPart::Test && ds.slides[i].expression)
        test_truth.push_back(&*ds.slides[i].expression);
    if (test_truth.empty())
      throw std::invalid_argument("evaluate_gpc: split " + std::to_string(split) +
                                  " has no test ground truth");
    result.variances_per_split.push_back(column_variances(test_truth));
    result.levels_per_split.push_back(variance_levels(result.variances_per_split.back(),
                                                      n_levels));
  }

  std::map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < ds.gene_names.size(); ++i) index_of[ds.gene_names[i]] = i;
  for (GpcRow& row : result.report.rows) {
    const GeneSet* set = curated.find(row.name);
    std::vector<std::size_t> indices;
    for (const std::string& g : set->genes) indices.push_back(index_of.at(g));
    PathwayVarianceLevel lvl =
        pathway_variance_level(indices, result.variances_per_split, result.levels_per_split);
    row.mean_variance = lvl.mean_variance;
    row.variance_level = lvl.level;
  }
  return result;
}

ClusterEval evaluate_clustering(const Dataset& ds, const std::vector<PredictionSet>& preds,
                                std::uint64_t seed) {
  std::vector<Matrix> profiles;
  std::vector<std::string> labels;
  std::set<std::size_t> seen_splits;
  for (const PredictionSet& ps : preds) {
    if (!seen_splits.insert(ps.trained_split).second)
      throw std::invalid_argument("evaluate_clustering: duplicate prediction set");
    for (std::size_t i = 0; i < ds.slides.size(); ++i) {
      if (ds.splits.at(ps.trained_split).by_slide[i] != SplitPart::Test) continue;
      const SlideSample& s = ds.slides[i];
      auto it = ps.by_slide.find(s.slide_id);
      if (it == ps.by_slide.end())
        throw std::invalid_argument("evaluate_clustering: missing prediction for " + s.slide_id);
      profiles.push_back(it->second);
      labels.push_back(s.cancer_label);
    }
  }
  return cluster_eval(profiles, labels, seed);
}

void write_hvg_text(const MacroMicroReport& r, std::ostream& out) {
  out << "Per-cancer PCC over top HVGs (std in parentheses; macro std across splits, micro std "
         "across slides)\n\n";
  out << fixed_width("Cancer", 16) << fixed_width("Macro PCC", 20) << fixed_width("Micro PCC", 20)
      << "Slides\n";
  auto row_line = [&](const MacroMicroRow& row) {
    out << fixed_width(row.cancer, 16)
        << fixed_width(fmt4(row.macro) + " (" + fmt4(row.macro_std) + ")", 20)
        << fixed_width(fmt4(row.micro) + " (" + fmt4(row.micro_std) + ")", 20) << row.n_slides
        << "\n";
  };
  for (const MacroMicroRow& row : r.per_cancer) row_line(row);
  out << std::string(62, '-') << "\n";
  row_line(r.overall);
  for (const std::string& w : r.warnings) out << "warning: " << w << "\n";
}

void write_hvg_csv(const MacroMicroReport& r, std::ostream& out) {
  out << "cancer,macro_pcc,macro_std,micro_pcc,micro_std,n_slides\n";
  auto row_line = [&](const MacroMicroRow& row) {
    out << row.cancer << ',' << format_double(row.macro) << ',' << format_double(row.macro_std) << ','
        << format_double(row.micro) << ',' << format_double(row.micro_std) << ',' << row.n_slides << "\n";
  };
  for (const MacroMicroRow& row : r.per_cancer) row_line(row);
  row_line(r.overall);
  out << "\nslide_id,cancer,split,mean_pcc,genes_defined,genes_undefined\n";
  for (const SlideScore& s : r.per_slide)
    out << s.slide_id << ',' << s.cancer << ',' << s.split << ',' << format_double(s.mean_pcc) << ','
        << s.genes_defined << ',' << s.genes_undefined << "\n";
}

void write_gpc_text(const GpcReport& r, std::ostream& out) {
  out << fixed_width("Pathway", 56) << fixed_width("#Genes", 8) << fixed_width("#Panel", 8)
      << fixed_width("Avg. Variance", 15) << fixed_width("Level", 7) << "Score\n";
  for (const GpcRow& row : r.rows) {
    char lvl[16];
    std::snprintf(lvl, sizeof(lvl), "%.1f", row.variance_level);
    out << fixed_width(row.name, 56) << fixed_width(std::to_string(row.genes_full), 8)
        << fixed_width(std::to_string(row.genes_panel), 8)
        << fixed_width(fmt4(row.mean_variance), 15) << fixed_width(lvl, 7)
        << (row.scored ? fmt4(row.score) : std::string("unscored")) << "\n";
  }
}

void write_gpc_csv(const GpcReport& r, std::ostream& out) {
  out << "pathway,source,genes_full,genes_panel,scored,score,mean_variance,variance_level,"
         "undefined_pairs,slides_scored\n";
  for (const GpcRow& row : r.rows)
    out << row.name << ',' << to_string(row.source) << ',' << row.genes_full << ','
        << row.genes_panel << ',' << (row.scored ? 1 : 0) << ',' << format_double(row.score) << ','
        << format_double(row.mean_variance) << ',' << format_double(row.variance_level) << ','
        << row.undefined_pairs << ',' << row.slides_scored << "\n";
}

GpcReport read_gpc_csv(std::istream& in, const std::string& source) {
  GpcReport r;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header_seen) {
      if (line.rfind("pathway,", 0) != 0)
        throw std::runtime_error(source + ": not a GPC CSV (bad header)");
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(ss, field, ','))
        throw std::runtime_error(source + ": short GPC CSV row: " + line);
      return field;
    };
    GpcRow row;
    row.name = next();
    std::string src = next();
    if (src == "Hallmark")
      row.source = GeneSetSource::Hallmark;
    else if (src == "GO_BP")
      row.source = GeneSetSource::GO_BP;
    else if (src == "GO_CC")
      row.source = GeneSetSource::GO_CC;
    else if (src == "GO_MF")
      row.source = GeneSetSource::GO_MF;
    else
      row.source = GeneSetSource::Other;
    row.genes_full = std::stoull(next());
    row.genes_panel = std::stoull(next());
    row.scored = next() == "1";
    row.score = std::strtod(next().c_str(), nullptr);
    row.mean_variance = std::strtod(next().c_str(), nullptr);
    row.variance_level = std::strtod(next().c_str(), nullptr);
    row.undefined_pairs = std::stoull(next());
    row.slides_scored = std::stoull(next());
    r.rows.push_back(std::move(row));
  }
  if (!header_seen) throw std::runtime_error(source + ": empty GPC CSV");
  return r;
}

void write_win_rates_text(const WinRates& w, std::ostream& out) {
  auto line = [&](const char* name, const WinRateGroup& g) {
    if (g.comparable == 0) return;
    char pct[16];
    std::snprintf(pct, sizeof(pct), "%.1f%%", 100.0 * g.rate());
    out << name << ": " << g.wins << "/" << g.comparable << " (" << pct << ")\n";
  };
  out << "Pathways where this model strictly outperforms the baseline\n";
  line("Hallmark", w.hallmark);
  line("GO", w.go);
  line("Other", w.other);
}

void write_cluster_csv(const ClusterEval& e, std::ostream& out) {
  out << "k,seed,ami,ari\n";
  out << e.k << ',' << e.seed << ',' << format_double(e.ami) << ',' << format_double(e.ari) << "\n";
}

void write_variance_levels_csv(const std::vector<VarianceLevels>& levels, std::ostream& out) {
  out << "level";
  for (std::size_t s = 0; s < levels.size(); ++s) out << ",lower_bound_split" << s;
  out << "\n";
  if (levels.empty()) return;
  for (std::size_t l = 0; l < levels[0].lower_bounds.size(); ++l) {
    out << (l + 1);
    for (const VarianceLevels& v : levels) out << ',' << format_double(v.lower_bounds.at(l));
    out << "\n";
  }
}

void write_gpc_comparison_svg(const GpcReport& ours, const GpcReport& baseline,
                              std::ostream& out) {
  if (ours.rows.size() != baseline.rows.size())
    throw std::invalid_argument("gpc comparison: reports differ in pathway rows");
  auto is_go = [](GeneSetSource s) {
    return s == GeneSetSource::GO_BP || s == GeneSetSource::GO_CC || s == GeneSetSource::GO_MF;
  };
  std::vector<PlotPanel> panels;
  for (int group = 0; group < 2; ++group) {
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_level;
    for (std::size_t i = 0; i < ours.rows.size(); ++i) {
      const GpcRow& a = ours.rows[i];
      const GpcRow& b = baseline.rows[i];
      if (a.name != b.name)
        throw std::invalid_argument("gpc comparison: pathway rows disagree at " + a.name);
      bool hallmark = a.source == GeneSetSource::Hallmark;
      if (group == 0 && !hallmark) continue;
      if (group == 1 && !is_go(a.source)) continue;
      if (!a.scored || !b.scored) continue;
      by_level[a.variance_level].first.push_back(a.score);
      by_level[a.variance_level].second.push_back(b.score);
    }
    PlotPanel panel;
    panel.title = group == 0 ? "Hallmark pathways" : "Gene Ontology pathways";
    panel.x_label = "variance level";
    panel.y_label = "mean pathway score";
    PlotSeries sa{"model", "#1f77b4", {}, {}};
    PlotSeries sb{"baseline", "#d62728", {}, {}};
    for (const auto& [level, scores] : by_level) {
      auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      sa.x.push_back(level);
      sa.y.push_back(mean(scores.first));
      sb.x.push_back(level);
      sb.y.push_back(mean(scores.second));
    }
    panel.series = {sa, sb};
    panels.push_back(std::move(panel));
  }
  write_svg_panels(out, panels);
}

}  // namespace histoprism
