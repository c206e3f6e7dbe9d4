#include "histoprism/cli_commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binio.hpp"
#include "histoprism/checkpoint.hpp"
#include "histoprism/dataset_io.hpp"
#include "histoprism/profiler.hpp"
#include "histoprism/report.hpp"
#include "histoprism/sha256.hpp"
#include "histoprism/svg_plot.hpp"
#include "histoprism/train.hpp"

namespace histoprism {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr char kArtifactVersion[] = "1.0.0";

std::string iso_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct ManifestBuilder {
  ordered_json j;
  explicit ManifestBuilder(const std::string& subcommand) {
    j["artifact_version"] = kArtifactVersion;
    j["subcommand"] = subcommand;
    j["timestamp_utc"] = iso_timestamp();
    j["inputs"] = ordered_json::array();
  }
  void input(const std::string& path) {
    j["inputs"].push_back({{"path", path}, {"sha256", sha256_hex_file(path)}});
  }
  void input_dir_manifest(const fs::path& dir, const std::string& name) {
    input((dir / name).string());
  }
  void write(const fs::path& out_dir) {
    binio::write_file((out_dir / "manifest.json").string(), j.dump(2) + "\n");
  }
};

/// Runs a command body; on any exception a FAILED marker lands in out_dir so
/// partial outputs are never mistaken for complete ones.
template <typename Fn>
void guarded(const fs::path& out_dir, Fn&& body) {
  fs::create_directories(out_dir);
  try {
    body();
  } catch (const std::exception& e) {
    std::ofstream marker(out_dir / "FAILED");
    marker << e.what() << "\n";
    throw;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  binio::write_file(path.string(), text);
}

SynthSpec load_synth_spec(const std::string& file) {
  ordered_json j = ordered_json::parse(binio::read_file(file));
  SynthSpec s;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("n_cancers", s.n_cancers);
  opt("slides_per_cancer", s.slides_per_cancer);
  opt("patches_min", s.patches_min);
  opt("patches_max", s.patches_max);
  opt("d_img", s.d_img);
  opt("d_gene", s.d_gene);
  opt("signal_rank", s.signal_rank);
  opt("noise_sigma", s.noise_sigma);
  opt("cancer_effect_scale", s.cancer_effect_scale);
  opt("seed", s.seed);
  return s;
}

PredictionSet load_prediction_set(const fs::path& dir) {
  ordered_json j = ordered_json::parse(binio::read_file((dir / "predictions.json").string()));
  PredictionSet ps;
  ps.trained_split = j.at("trained_split").get<std::size_t>();
  for (const auto& entry : j.at("slides")) {
    std::string slide_id = entry.at("slide_id").get<std::string>();
    auto tensors = read_tensor_file(dir / entry.at("file").get<std::string>());
    for (auto& [name, m] : tensors)
      if (name == "prediction") ps.by_slide.emplace(slide_id, std::move(m));
  }
  return ps;
}

}  // namespace

void cmd_gen_synth(const GenSynthArgs& args) {
  fs::path out_dir(args.out_dir);
  guarded(out_dir, [&] {
    ManifestBuilder manifest("gen-synth");
    SynthSpec spec;
    if (!args.spec_file.empty()) {
      spec = load_synth_spec(args.spec_file);
      manifest.input(args.spec_file);
    }
    if (args.seed) spec.seed = *args.seed;
    Dataset ds = generate(spec);
    write_dataset(ds, out_dir);
    manifest.j["seeds"] = {spec.seed};
    manifest.j["spec"] = ordered_json::parse(binio::read_file((out_dir / "dataset.json").string()))
                             .at("spec");
    manifest.j["slides"] = ds.slides.size();
    manifest.write(out_dir);
  });
}

void cmd_train(const TrainArgs& args) {
  fs::path out_dir(args.out_dir);
  guarded(out_dir, [&] {
    ManifestBuilder manifest("train");
    manifest.input_dir_manifest(args.dataset_dir, "dataset.json");
    Dataset ds = read_dataset(args.dataset_dir);

    ModelConfig cfg;
    if (!args.model_config_file.empty()) {
      cfg = model_config_from_json_text(binio::read_file(args.model_config_file),
                                        args.model_config_file);
      manifest.input(args.model_config_file);
    }
    // Data dimensions always come from the dataset.
    cfg.d_img = ds.spec.d_img;
    cfg.d_gene = ds.spec.d_gene;
    cfg.d_onco = ds.cancer_names.size();
    if (args.no_cross_attention) cfg.use_cross_attention = false;
    if (args.no_cross_residual) cfg.use_cross_residual = false;
    cfg.validate();

    TrainConfig tc;
    if (!args.train_config_file.empty()) {
      tc = train_config_from_json_text(binio::read_file(args.train_config_file),
                                       args.train_config_file);
      manifest.input(args.train_config_file);
    }
    if (args.seed) tc.seed = *args.seed;

    if (args.split >= ds.splits.size())
      throw std::invalid_argument("train: dataset has no split " + std::to_string(args.split));
    std::vector<SlideSample> train_set = ds.slides_in(args.split, SplitPart::Train);
    std::vector<SlideSample> val_set = ds.slides_in(args.split, SplitPart::Val);

    TrainResult result = train(train_set, val_set, cfg, tc);

    Checkpoint ck;
    ck.config = cfg;
    ck.train_config = tc;
    ck.trace = result.trace;
    ck.params = std::move(result.params);
    ck.trained_split = args.split;
    fs::path ck_path = out_dir / args.out_checkpoint;
    write_checkpoint(ck, ck_path);

    manifest.j["seeds"] = {tc.seed};
    manifest.j["split"] = args.split;
    manifest.j["model_config"] =
        ordered_json::parse(model_config_to_json_text(cfg));
    manifest.j["train_config"] = ordered_json::parse(train_config_to_json_text(tc));
    manifest.j["epochs_run"] = ck.trace.epochs.size();
    manifest.j["best_epoch"] = ck.trace.best_epoch;
    manifest.j["best_val_mse"] = ck.trace.best_val_mse;
    manifest.j["stop_reason"] = ck.trace.stop_reason;
    manifest.j["checkpoint"] = ck_path.string();
    manifest.write(out_dir);
  });
}

void cmd_predict(const PredictArgs& args) {
  fs::path out_dir(args.out_dir);
  guarded(out_dir, [&] {
    ManifestBuilder manifest("predict");
    manifest.input(args.checkpoint_file);
    manifest.input_dir_manifest(args.dataset_dir, "dataset.json");

    Checkpoint ck = read_checkpoint(args.checkpoint_file);
    Dataset ds = read_dataset(args.dataset_dir);
    fs::create_directories(out_dir / "slides");

    ordered_json j;
    j["format"] = "histoprism-predictions-v1";
    j["trained_split"] = ck.trained_split;
    j["checkpoint_sha256"] = sha256_hex_file(args.checkpoint_file);
    ordered_json slides = ordered_json::array();
    for (const SlideSample& s : ds.slides) {
      Matrix pred = forward(s, ck.params, ck.config);
      std::string rel = "slides/" + s.slide_id + ".pred.bin";
      write_tensor_file(out_dir / rel, {{"prediction", &pred}});
      slides.push_back({{"slide_id", s.slide_id}, {"file", rel}, {"n_patches", pred.rows()}});
    }
    j["slides"] = std::move(slides);
    write_text(out_dir / "predictions.json", j.dump(2) + "\n");
    manifest.write(out_dir);
  });
}

void cmd_curate(const CurateArgs& args) {
  fs::path out_dir(args.out_dir);
  guarded(out_dir, [&] {
    ManifestBuilder manifest("curate");
    std::vector<PathwayCollection> parts;
    for (const std::string& f : args.gmt_files) {
      manifest.input(f);
      parts.push_back(parse_gmt_file(f));
    }
    PathwayCollection all = merge_collections(std::move(parts));
    std::size_t n_parsed = all.sets.size();
    all = size_filter(std::move(all), args.min_genes, args.max_genes);
    std::size_t n_sized = all.sets.size();
    all = redundancy_filter(std::move(all), args.tau);
    std::size_t n_dedup = all.sets.size();

    if (!args.panel_file.empty()) {
      manifest.input(args.panel_file);
      std::set<std::string> panel;
      std::istringstream in(binio::read_file(args.panel_file));
      std::string line;
      while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) panel.insert(line);
      }
      all = restrict_to_panel(std::move(all), panel);
    }

    double certificate = max_pairwise_jaccard(all);

    std::ostringstream gmt;
    write_gmt(all, gmt);
    write_text(out_dir / "curated.gmt", gmt.str());
    std::ostringstream log;
    write_curation_log(all, log, args.tau);
    write_text(out_dir / "curation_log.tsv", log.str());

    manifest.j["tau"] = args.tau;
    manifest.j["min_genes"] = args.min_genes;
    manifest.j["max_genes"] = args.max_genes;
    manifest.j["sets_parsed"] = n_parsed;
    manifest.j["sets_after_size_filter"] = n_sized;
    manifest.j["sets_after_redundancy_filter"] = n_dedup;
    manifest.j["sets_final"] = all.sets.size();
    manifest.j["certificate_max_jaccard"] = certificate;
    manifest.write(out_dir);
  });
}

void cmd_eval(const EvalArgs& args) {
  fs::path out_dir(args.out_dir);
  guarded(out_dir, [&] {
    ManifestBuilder manifest("eval");
    manifest.input_dir_manifest(args.dataset_dir, "dataset.json");
    Dataset ds = read_dataset(args.dataset_dir);
    std::vector<PredictionSet> preds;
    for (const std::string& dir : args.predictions_dirs) {
      manifest.input_dir_manifest(dir, "predictions.json");
      preds.push_back(load_prediction_set(dir));
    }

    manifest.j["facets"] = ordered_json::array();
    if (args.facet_hvg) {
      manifest.j["facets"].push_back("hvg");
      HvgEvalResult hvg = evaluate_hvg(ds, preds, args.hvg_n);
      std::ostringstream text, csv;
      write_hvg_text(hvg.report, text);
      write_hvg_csv(hvg.report, csv);
      write_text(out_dir / "hvg_report.txt", text.str());
      write_text(out_dir / "hvg_report.csv", csv.str());
      manifest.j["hvg_n"] = args.hvg_n;
      manifest.j["overall_macro_pcc"] = hvg.report.overall.macro;
      manifest.j["overall_micro_pcc"] = hvg.report.overall.micro;
    }
    if (args.facet_gpc) {
      manifest.j["facets"].push_back("gpc");
      if (args.pathways_gmt.empty())
        throw std::invalid_argument("eval-gpc: --pathways GMT file required");
      manifest.input(args.pathways_gmt);
      PathwayCollection curated = parse_gmt_file(args.pathways_gmt);
      std::set<std::string> panel(ds.gene_names.begin(), ds.gene_names.end());
      curated = restrict_to_panel(std::move(curated), panel);
      GpcEvalResult gpc = evaluate_gpc(ds, preds, curated, args.levels);
      std::ostringstream text, csv, lv;
      write_gpc_text(gpc.report, text);
      write_gpc_csv(gpc.report, csv);
      write_variance_levels_csv(gpc.levels_per_split, lv);
      write_text(out_dir / "gpc_report.txt", text.str());
      write_text(out_dir / "gpc_report.csv", csv.str());
      write_text(out_dir / "variance_levels.csv", lv.str());
      manifest.j["levels"] = args.levels;
      manifest.j["pathways_scored"] = gpc.report.rows.size();
      if (!args.baseline_gpc.empty()) {
        manifest.input(args.baseline_gpc);
        std::istringstream bin(binio::read_file(args.baseline_gpc));
        GpcReport baseline = read_gpc_csv(bin, args.baseline_gpc);
        WinRates wr = gpc_win_rate(gpc.report, baseline);
        std::ostringstream wtext;
        write_win_rates_text(wr, wtext);
        write_text(out_dir / "win_rates.txt", wtext.str());
        std::ostringstream svg;
        write_gpc_comparison_svg(gpc.report, baseline, svg);
        write_text(out_dir / "gpc_by_variance.svg", svg.str());
        manifest.j["hallmark_win_rate"] = wr.hallmark.rate();
        manifest.j["go_win_rate"] = wr.go.rate();
      }
    }
    if (args.facet_cluster) {
      manifest.j["facets"].push_back("cluster");
      ClusterEval ce = evaluate_clustering(ds, preds, args.seed);
      std::ostringstream csv;
      write_cluster_csv(ce, csv);
      write_text(out_dir / "cluster_report.csv", csv.str());
      manifest.j["ami"] = ce.ami;
      manifest.j["ari"] = ce.ari;
      manifest.j["k"] = ce.k;
    }
    manifest.j["seeds"] = {args.seed};
    manifest.write(out_dir);
  });
}

void cmd_profile(const ProfileArgs& args) {
  fs::path out_dir(args.out_dir);
  guarded(out_dir, [&] {
    ManifestBuilder manifest("profile");
    ModelConfig cfg;
    cfg.d_img = 32;
    cfg.d_gene = 64;
    cfg.d_onco = 4;
    cfg.d_hidden = 64;
    if (!args.model_config_file.empty()) {
      cfg = model_config_from_json_text(binio::read_file(args.model_config_file),
                                        args.model_config_file);
      manifest.input(args.model_config_file);
    }
    cfg.validate();
    ModelParams params = init_params(cfg, args.seed);
    ProfileReport report = benchmark_forward(cfg, params, args.n_patches, args.runs, args.seed);

    std::ostringstream csv;
    write_profile_csv(report, csv);
    write_text(out_dir / "profile.csv", csv.str());

    std::vector<PlotPanel> panels(3);
    panels[0] = {"Forward runtime", "patches", "seconds", {}, true, true};
    panels[1] = {"Peak memory", "patches", "bytes", {}, true, true};
    panels[2] = {"Analytical FLOPs", "patches", "FLOPs", {}, true, true};
    PlotSeries wall{"", "#1f77b4", {}, {}}, mem{"", "#2ca02c", {}, {}}, fl{"", "#d62728", {}, {}};
    for (const ProfilePoint& p : report.points) {
      double n = static_cast<double>(p.n_patches);
      wall.x.push_back(n);
      wall.y.push_back(p.wall_mean_s);
      mem.x.push_back(n);
      mem.y.push_back(static_cast<double>(p.peak_bytes));
      fl.x.push_back(n);
      fl.y.push_back(static_cast<double>(p.analytical_flops));
    }
    panels[0].series = {wall};
    panels[1].series = {mem};
    panels[2].series = {fl};
    std::ostringstream svg;
    write_svg_panels(svg, panels);
    write_text(out_dir / "profile.svg", svg.str());

    manifest.j["seeds"] = {args.seed};
    manifest.j["runs"] = args.runs;
    manifest.j["n_patches"] = args.n_patches;
    manifest.j["model_config"] = ordered_json::parse(model_config_to_json_text(cfg));
    manifest.j["slope_flops"] = report.slope_flops;
    manifest.j["slope_wall"] = report.slope_wall;
    manifest.j["slope_mem"] = report.slope_mem;
    manifest.write(out_dir);
  });
}

}  // namespace histoprism
