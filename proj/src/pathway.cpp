#include "histoprism/pathway.hpp"

#include "histoprism/num_format.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace histoprism {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> sorted_genes(const GeneSet& s) {
  std::vector<std::string> v = s.genes;
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::string to_string(GeneSetSource s) {
  switch (s) {
    case GeneSetSource::Hallmark: return "Hallmark";
    case GeneSetSource::GO_BP: return "GO_BP";
    case GeneSetSource::GO_CC: return "GO_CC";
    case GeneSetSource::GO_MF: return "GO_MF";
    default: return "Other";
  }
}

GeneSetSource source_from_name(const std::string& name) {
  if (name.rfind("HALLMARK_", 0) == 0) return GeneSetSource::Hallmark;
  if (name.rfind("GOBP_", 0) == 0) return GeneSetSource::GO_BP;
  if (name.rfind("GOCC_", 0) == 0) return GeneSetSource::GO_CC;
  if (name.rfind("GOMF_", 0) == 0) return GeneSetSource::GO_MF;
  return GeneSetSource::Other;
}

const GeneSet* PathwayCollection::find(const std::string& name) const {
  for (const GeneSet& s : sets)
    if (s.name == name) return &s;
  return nullptr;
}

PathwayCollection parse_gmt(std::istream& in, const std::string& filename) {
  PathwayCollection c;
  std::unordered_set<std::string> names;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 3)
      throw std::runtime_error(filename + ":" + std::to_string(lineno) +
                               ": GMT line needs name, description and at least one gene");
    GeneSet set;
    set.name = trim(fields[0]);
    set.description = trim(fields[1]);
    set.source = source_from_name(set.name);
    if (set.name.empty())
      throw std::runtime_error(filename + ":" + std::to_string(lineno) + ": empty set name");
    if (!names.insert(set.name).second)
      throw std::runtime_error(filename + ":" + std::to_string(lineno) + ": duplicate set name " +
                               set.name);
    std::unordered_set<std::string> seen;
    for (std::size_t i = 2; i < fields.size(); ++i) {
      std::string g = trim(fields[i]);
      if (g.empty()) continue;
      if (!seen.insert(g).second) {
        c.curation_log.push_back({"parse", g, set.name, 0.0,
                                  filename + ":" + std::to_string(lineno) +
                                      ": duplicate gene symbol deduplicated"});
        continue;
      }
      set.genes.push_back(std::move(g));
    }
    if (set.genes.empty())
      throw std::runtime_error(filename + ":" + std::to_string(lineno) + ": set " + set.name +
                               " has no genes");
    c.sets.push_back(std::move(set));
  }
  return c;
}

PathwayCollection parse_gmt_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open GMT file " + path);
  return parse_gmt(in, path);
}

PathwayCollection merge_collections(std::vector<PathwayCollection> parts) {
  PathwayCollection out;
  std::unordered_set<std::string> names;
  for (auto& part : parts) {
    for (auto& s : part.sets) {
      if (!names.insert(s.name).second)
        throw std::runtime_error("duplicate set name across GMT files: " + s.name);
      out.sets.push_back(std::move(s));
    }
    for (auto& e : part.curation_log) out.curation_log.push_back(std::move(e));
  }
  return out;
}

double jaccard(const GeneSet& a, const GeneSet& b) {
  if (a.genes.empty() || b.genes.empty())
    throw std::invalid_argument("jaccard: empty gene set");
  std::vector<std::string> sa = sorted_genes(a), sb = sorted_genes(b);
  std::size_t inter = 0, i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    int cmp = sa[i].compare(sb[j]);
    if (cmp == 0) {
      ++inter;
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

PathwayCollection size_filter(PathwayCollection c, std::size_t min_genes,
                              std::size_t max_genes) {
  if (min_genes > max_genes)
    throw std::invalid_argument("size_filter: min must not exceed max");
  std::vector<GeneSet> kept;
  for (GeneSet& s : c.sets) {
    bool exempt = s.source == GeneSetSource::Hallmark;
    if (exempt || (s.size() >= min_genes && s.size() <= max_genes)) {
      kept.push_back(std::move(s));
    } else {
      c.curation_log.push_back({"size", s.name, "", 0.0,
                                "size " + std::to_string(s.size()) + " outside [" +
                                    std::to_string(min_genes) + "," +
                                    std::to_string(max_genes) + "]"});
    }
  }
  c.sets = std::move(kept);
  return c;
}

PathwayCollection redundancy_filter(PathwayCollection c, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("redundancy_filter: tau must be in (0,1)");
  for (;;) {
    double best_sim = 0.0;
    // victim/keeper of the current best pair
    const GeneSet* victim = nullptr;
    const GeneSet* keeper = nullptr;
    for (std::size_t i = 0; i < c.sets.size(); ++i) {
      for (std::size_t j = i + 1; j < c.sets.size(); ++j) {
        double sim = jaccard(c.sets[i], c.sets[j]);
        if (!(sim > tau)) continue;
        const GeneSet* v = &c.sets[i];
        const GeneSet* k = &c.sets[j];
        if (v->size() < k->size() || (v->size() == k->size() && v->name < k->name))
          std::swap(v, k);
        bool better = false;
        if (victim == nullptr) {
          better = true;
        } else if (sim != best_sim) {
          better = sim > best_sim;
        } else if (v->size() != victim->size()) {
          better = v->size() > victim->size();
        } else if (v->name != victim->name) {
          better = v->name > victim->name;
        } else {
          better = k->name < keeper->name;
        }
        if (better) {
          best_sim = sim;
          victim = v;
          keeper = k;
        }
      }
    }
    if (victim == nullptr) break;
    c.curation_log.push_back({"redundancy", victim->name, keeper->name, best_sim,
                              "jaccard above tau"});
    std::string victim_name = victim->name;
    c.sets.erase(std::remove_if(c.sets.begin(), c.sets.end(),
                                [&](const GeneSet& s) { return s.name == victim_name; }),
                 c.sets.end());
  }
  return c;
}

PathwayCollection restrict_to_panel(PathwayCollection c, const std::set<std::string>& panel) {
  if (panel.empty()) throw std::invalid_argument("restrict_to_panel: empty panel");
  std::vector<GeneSet> kept;
  for (GeneSet& s : c.sets) {
    GeneSet r = s;
    r.genes.clear();
    for (const std::string& g : s.genes)
      if (panel.count(g)) r.genes.push_back(g);
    if (r.genes.empty()) {
      c.curation_log.push_back({"panel", s.name, "", 0.0, "no genes in panel"});
    } else {
      kept.push_back(std::move(r));
    }
  }
  c.sets = std::move(kept);
  return c;
}

double max_pairwise_jaccard(const PathwayCollection& c) {
  double mx = 0.0;
  for (std::size_t i = 0; i < c.sets.size(); ++i)
    for (std::size_t j = i + 1; j < c.sets.size(); ++j)
      mx = std::max(mx, jaccard(c.sets[i], c.sets[j]));
  return mx;
}

void write_gmt(const PathwayCollection& c, std::ostream& out) {
  for (const GeneSet& s : c.sets) {
    out << s.name << '\t' << s.description;
    for (const std::string& g : s.genes) out << '\t' << g;
    out << '\n';
  }
}

void write_curation_log(const PathwayCollection& c, std::ostream& out, double tau) {
  out << "# curation log: stage\tremoved\tkept\tsimilarity\tdetail\n";
  out << "# tau " << format_double(tau) << "\n";
  out << "# pair order: similarity desc, victim size desc, victim name desc; this order is\n"
      << "# one deterministic choice among several valid iteration orders\n";
  for (const CurationEvent& e : c.curation_log)
    out << e.stage << '\t' << e.removed << '\t' << e.kept << '\t' << format_double(e.similarity)
        << '\t' << e.detail << '\n';
}

}  // namespace histoprism
