#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace histoprism {

enum class GeneSetSource { Hallmark, GO_BP, GO_CC, GO_MF, Other };

std::string to_string(GeneSetSource s);
GeneSetSource source_from_name(const std::string& set_name);

/// One named gene set. Genes keep file order, deduplicated, symbols
/// whitespace-trimmed and compared case-sensitively.
struct GeneSet {
  std::string name;
  std::string description;
  GeneSetSource source = GeneSetSource::Other;
  std::vector<std::string> genes;

  std::size_t size() const { return genes.size(); }
};

struct CurationEvent {
  std::string stage;    // "parse" | "size" | "redundancy" | "panel"
  std::string removed;  // removed set (or deduplicated gene, for parse)
  std::string kept;     // surviving counterpart, if any
  double similarity = 0.0;
  std::string detail;
};

struct PathwayCollection {
  std::vector<GeneSet> sets;
  std::vector<CurationEvent> curation_log;

  const GeneSet* find(const std::string& name) const;
};

/// Parses GMT: one set per nonblank line, tab-separated
/// name<TAB>description<TAB>gene... Lines with fewer than three fields and
/// duplicate set names are errors; duplicate genes within a line are
/// deduplicated with a log entry.
PathwayCollection parse_gmt(std::istream& in, const std::string& filename);
PathwayCollection parse_gmt_file(const std::string& path);

/// Union of several collections; duplicate set names across files are errors.
PathwayCollection merge_collections(std::vector<PathwayCollection> parts);

/// |A intersect B| / |A union B|.
double jaccard(const GeneSet& a, const GeneSet& b);

/// Keeps sets with min <= size <= max (inclusive). Hallmark-source sets are
/// exempt and always retained.
PathwayCollection size_filter(PathwayCollection c, std::size_t min_genes, std::size_t max_genes);

/// Iteratively removes the larger set of the most similar violating pair
/// (similarity strictly above tau) until no pair violates. Deterministic
/// ordering: pairs ranked by similarity desc, then victim size desc, then
/// victim name desc, then keeper name asc; equal sizes resolve the victim to
/// the lexicographically larger name.
PathwayCollection redundancy_filter(PathwayCollection c, double tau);

/// Intersects every set with the model's gene panel; sets left empty are
/// dropped with a log entry.
PathwayCollection restrict_to_panel(PathwayCollection c, const std::set<std::string>& panel);

/// Certificate scan: largest pairwise Jaccard similarity (0 if < 2 sets).
double max_pairwise_jaccard(const PathwayCollection& c);

void write_gmt(const PathwayCollection& c, std::ostream& out);
/// Line-oriented log, one event per line:
/// stage<TAB>removed<TAB>kept<TAB>similarity<TAB>detail.
void write_curation_log(const PathwayCollection& c, std::ostream& out, double tau);

}  // namespace histoprism
