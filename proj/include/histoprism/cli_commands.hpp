#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace histoprism {

/// Subcommand entry points shared by the CLI binary and the tests. Each
/// command resolves its configuration, runs, writes its outputs plus a
/// manifest.json (inputs with SHA-256 digests, resolved config, seeds) into
/// the output directory, and on failure leaves a FAILED marker file there
/// instead. All throw on error; the binary maps that to a nonzero exit.

struct GenSynthArgs {
  std::string spec_file;  // empty -> built-in default spec
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};
void cmd_gen_synth(const GenSynthArgs& args);

struct TrainArgs {
  std::string dataset_dir;
  std::string out_checkpoint;  // written inside out_dir
  std::string out_dir;
  std::string model_config_file;  // optional
  std::string train_config_file;  // optional
  std::size_t split = 0;
  std::optional<std::uint64_t> seed;
  bool no_cross_attention = false;  // ablation switches, override the config file
  bool no_cross_residual = false;
};
void cmd_train(const TrainArgs& args);

struct PredictArgs {
  std::string checkpoint_file;
  std::string dataset_dir;
  std::string out_dir;
};
void cmd_predict(const PredictArgs& args);

struct CurateArgs {
  std::vector<std::string> gmt_files;
  std::string panel_file;  // optional; one gene symbol per line
  double tau = 0.1;
  std::size_t min_genes = 50;
  std::size_t max_genes = 100;
  std::string out_dir;
};
void cmd_curate(const CurateArgs& args);

struct EvalArgs {
  std::vector<std::string> predictions_dirs;  // one per trained split
  std::string dataset_dir;
  std::string pathways_gmt;  // required for the gpc facet
  std::string baseline_gpc;  // optional gpc_report.csv of another model
  std::string out_dir;
  std::size_t hvg_n = 50;
  std::size_t levels = 10;
  std::uint64_t seed = 0;
  bool facet_hvg = false;
  bool facet_gpc = false;
  bool facet_cluster = false;
};
void cmd_eval(const EvalArgs& args);

struct ProfileArgs {
  std::string model_config_file;  // optional
  std::vector<std::size_t> n_patches;
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  std::string out_dir;
};
void cmd_profile(const ProfileArgs& args);

}  // namespace histoprism
