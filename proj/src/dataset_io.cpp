#include "histoprism/dataset_io.hpp"

#include <json.hpp>

#include "binio.hpp"

namespace histoprism {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr char kTensorMagic[] = "HPTB0001";
constexpr char kDatasetFormat[] = "histoprism-dataset-v1";

ordered_json spec_to_json(const SynthSpec& s) {
  ordered_json j;
  j["n_cancers"] = s.n_cancers;
  j["slides_per_cancer"] = s.slides_per_cancer;
  j["patches_min"] = s.patches_min;
  j["patches_max"] = s.patches_max;
  j["d_img"] = s.d_img;
  j["d_gene"] = s.d_gene;
  j["signal_rank"] = s.signal_rank;
  j["noise_sigma"] = s.noise_sigma;
  j["cancer_effect_scale"] = s.cancer_effect_scale;
  j["seed"] = s.seed;
  return j;
}

SynthSpec spec_from_json(const ordered_json& j) {
  SynthSpec s;
  s.n_cancers = j.at("n_cancers").get<std::size_t>();
  s.slides_per_cancer = j.at("slides_per_cancer").get<std::size_t>();
  s.patches_min = j.at("patches_min").get<std::size_t>();
  s.patches_max = j.at("patches_max").get<std::size_t>();
  s.d_img = j.at("d_img").get<std::size_t>();
  s.d_gene = j.at("d_gene").get<std::size_t>();
  s.signal_rank = j.at("signal_rank").get<std::size_t>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.cancer_effect_scale = j.at("cancer_effect_scale").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace

void write_tensor_file(const fs::path& path,
                       const std::vector<std::pair<std::string, const Matrix*>>& tensors) {
  std::string buf;
  buf.append(kTensorMagic, 8);
  binio::put_u32(buf, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    binio::put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    binio::put_u64(buf, m->rows());
    binio::put_u64(buf, m->cols());
    for (std::size_t i = 0; i < m->size(); ++i) binio::put_f64(buf, m->data()[i]);
  }
  binio::write_file(path.string(), buf);
}

std::vector<std::pair<std::string, Matrix>> read_tensor_file(const fs::path& path) {
  binio::Reader r(binio::read_file(path.string()), path.string());
  r.expect_magic(kTensorMagic);
  std::uint32_t count = r.get_u32();
  std::vector<std::pair<std::string, Matrix>> tensors;
  tensors.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    std::uint32_t name_len = r.get_u32();
    std::string name = r.get_bytes(name_len);
    std::uint64_t rows = r.get_u64();
    std::uint64_t cols = r.get_u64();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.get_f64();
    tensors.emplace_back(std::move(name), std::move(m));
  }
  r.require_exhausted();
  return tensors;
}

void write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "slides");

  ordered_json j;
  j["format"] = kDatasetFormat;
  j["spec"] = spec_to_json(ds.spec);
  j["cancer_names"] = ds.cancer_names;
  j["gene_names"] = ds.gene_names;
  ordered_json slides = ordered_json::array();
  for (std::size_t i = 0; i < ds.slides.size(); ++i) {
    const SlideSample& s = ds.slides[i];
    ordered_json js;
    js["slide_id"] = s.slide_id;
    js["cancer"] = s.cancer_label;
    js["cancer_index"] = s.cancer_index;
    js["n_patches"] = s.n_patches();
    js["file"] = "slides/" + s.slide_id + ".bin";
    js["has_expression"] = s.expression.has_value();
    js["has_coords"] = s.coords.has_value();
    slides.push_back(std::move(js));

    std::vector<std::pair<std::string, const Matrix*>> tensors;
    tensors.emplace_back("features", &s.patch_features);
    if (s.expression) tensors.emplace_back("expression", &*s.expression);
    if (s.coords) tensors.emplace_back("coords", &*s.coords);
    write_tensor_file(dir / "slides" / (s.slide_id + ".bin"), tensors);
  }
  j["slides"] = std::move(slides);

  ordered_json splits = ordered_json::array();
  for (const SplitAssignment& a : ds.splits) {
    ordered_json ja;
    ja["name"] = a.name;
    std::vector<std::string> parts;
    for (SplitPart p : a.by_slide) parts.push_back(to_string(p));
    ja["assignment"] = parts;
    splits.push_back(std::move(ja));
  }
  j["splits"] = std::move(splits);
  j["has_generator"] = ds.generator.has_value();

  if (ds.generator) {
    const GeneratorParams& g = *ds.generator;
    write_tensor_file(dir / "generator.bin",
                      {{"mixture_means", &g.mixture_means},
                       {"feature_map_a", &g.feature_map_a},
                       {"feature_map_b", &g.feature_map_b},
                       {"gene_baseline", &g.gene_baseline},
                       {"cancer_offsets", &g.cancer_offsets}});
  }

  binio::write_file((dir / "dataset.json").string(), j.dump(2) + "\n");
}

Dataset read_dataset(const fs::path& dir) {
  ordered_json j = ordered_json::parse(binio::read_file((dir / "dataset.json").string()));
  if (j.at("format").get<std::string>() != kDatasetFormat)
    throw std::runtime_error(dir.string() + ": unknown dataset format");

  Dataset ds;
  ds.spec = spec_from_json(j.at("spec"));
  ds.cancer_names = j.at("cancer_names").get<std::vector<std::string>>();
  ds.gene_names = j.at("gene_names").get<std::vector<std::string>>();

  for (const auto& js : j.at("slides")) {
    SlideSample s;
    s.slide_id = js.at("slide_id").get<std::string>();
    s.cancer_label = js.at("cancer").get<std::string>();
    s.cancer_index = js.at("cancer_index").get<std::size_t>();
    s.cancer_onehot.assign(ds.cancer_names.size(), 0.0);
    if (s.cancer_index >= ds.cancer_names.size())
      throw std::runtime_error(dir.string() + ": cancer_index out of range for " + s.slide_id);
    s.cancer_onehot[s.cancer_index] = 1.0;

    auto tensors = read_tensor_file(dir / js.at("file").get<std::string>());
    const std::size_t n_patches = js.at("n_patches").get<std::size_t>();
    for (auto& [name, m] : tensors) {
      if (name == "features")
        s.patch_features = std::move(m);
      else if (name == "expression")
        s.expression = std::move(m);
      else if (name == "coords")
        s.coords = std::move(m);
      else
        throw std::runtime_error(dir.string() + ": unknown tensor '" + name + "' in " +
                                 s.slide_id);
    }
    if (s.patch_features.rows() != n_patches)
      throw std::runtime_error(dir.string() + ": " + s.slide_id +
                               " patch count disagrees with metadata");
    if (js.at("has_expression").get<bool>() != s.expression.has_value())
      throw std::runtime_error(dir.string() + ": " + s.slide_id + " expression flag mismatch");
    if (js.at("has_coords").get<bool>() != s.coords.has_value())
      throw std::runtime_error(dir.string() + ": " + s.slide_id + " coords flag mismatch");
    ds.slides.push_back(std::move(s));
  }

  for (const auto& ja : j.at("splits")) {
    SplitAssignment a;
    a.name = ja.at("name").get<std::string>();
    for (const auto& part : ja.at("assignment"))
      a.by_slide.push_back(split_part_from_string(part.get<std::string>()));
    if (a.by_slide.size() != ds.slides.size())
      throw std::runtime_error(dir.string() + ": split " + a.name + " length mismatch");
    ds.splits.push_back(std::move(a));
  }

  if (j.at("has_generator").get<bool>()) {
    auto tensors = read_tensor_file(dir / "generator.bin");
    GeneratorParams g;
    for (auto& [name, m] : tensors) {
      if (name == "mixture_means")
        g.mixture_means = std::move(m);
      else if (name == "feature_map_a")
        g.feature_map_a = std::move(m);
      else if (name == "feature_map_b")
        g.feature_map_b = std::move(m);
      else if (name == "gene_baseline")
        g.gene_baseline = std::move(m);
      else if (name == "cancer_offsets")
        g.cancer_offsets = std::move(m);
      else
        throw std::runtime_error(dir.string() + ": unknown generator tensor '" + name + "'");
    }
    ds.generator = std::move(g);
  }
  return ds;
}

}  // namespace histoprism
