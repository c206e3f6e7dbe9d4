// histoprism: desk-scale slide-to-expression model with the pathway
// coherence benchmark, planted-signal synthetic data and an efficiency
// profiler. See README.md for the workflow.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>

#include "histoprism/cli_commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"histoprism: cancer-conditioned gene expression prediction and evaluation"};
  app.require_subcommand(1);

  using namespace histoprism;

  GenSynthArgs gen;
  auto* cmd_gen = app.add_subcommand("gen-synth", "Generate a planted-signal synthetic dataset");
  cmd_gen->add_option("--spec", gen.spec_file, "Synthetic spec JSON (defaults used if omitted)");
  cmd_gen->add_option("--out", gen.out_dir, "Output dataset directory")->required();
  std::uint64_t gen_seed = 0;
  auto* gen_seed_opt = cmd_gen->add_option("--seed", gen_seed, "Override spec seed");

  TrainArgs tr;
  auto* cmd_tr = app.add_subcommand("train", "Train a model on one dataset split");
  cmd_tr->add_option("--dataset", tr.dataset_dir, "Dataset directory")->required();
  cmd_tr->add_option("--out", tr.out_dir, "Output directory")->required();
  cmd_tr->add_option("--checkpoint-name", tr.out_checkpoint, "Checkpoint file name")
      ->default_val("model.ckpt");
  cmd_tr->add_option("--model-config", tr.model_config_file, "Model config JSON");
  cmd_tr->add_option("--train-config", tr.train_config_file, "Training config JSON");
  cmd_tr->add_option("--split", tr.split, "Dataset split to train on")->default_val(0);
  cmd_tr->add_flag("--no-cross-attention", tr.no_cross_attention,
                   "Ablate the conditioning stage entirely");
  cmd_tr->add_flag("--no-cross-residual", tr.no_cross_residual,
                   "Drop the residual connection around cross-attention");
  std::uint64_t tr_seed = 0;
  auto* tr_seed_opt = cmd_tr->add_option("--seed", tr_seed, "Override training seed");

  PredictArgs pr;
  auto* cmd_pr = app.add_subcommand("predict", "Write per-slide predictions for a checkpoint");
  cmd_pr->add_option("--checkpoint", pr.checkpoint_file, "Checkpoint file")->required();
  cmd_pr->add_option("--dataset", pr.dataset_dir, "Dataset directory")->required();
  cmd_pr->add_option("--out", pr.out_dir, "Output predictions directory")->required();

  CurateArgs cu;
  auto* cmd_cu = app.add_subcommand("curate", "Curate pathway collections from GMT files");
  cmd_cu->add_option("--gmt", cu.gmt_files, "Input GMT file(s)")->required()->expected(-1);
  cmd_cu->add_option("--panel", cu.panel_file, "Gene panel file (one symbol per line)");
  cmd_cu->add_option("--tau", cu.tau, "Jaccard redundancy threshold")->default_val(0.1);
  cmd_cu->add_option("--min", cu.min_genes, "Minimum gene-set size")->default_val(50);
  cmd_cu->add_option("--max", cu.max_genes, "Maximum gene-set size")->default_val(100);
  cmd_cu->add_option("--out", cu.out_dir, "Output directory")->required();

  auto add_eval = [&](const char* name, const char* help, bool hvg, bool gpc, bool cluster,
                      EvalArgs& ev) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("--predictions", ev.predictions_dirs, "Predictions directory (repeat per split)")
        ->required()
        ->expected(-1);
    c->add_option("--dataset", ev.dataset_dir, "Dataset directory")->required();
    c->add_option("--out", ev.out_dir, "Output directory")->required();
    if (hvg) c->add_option("--hvg-n", ev.hvg_n, "Top-n highly variable genes")->default_val(50);
    if (gpc) {
      c->add_option("--pathways", ev.pathways_gmt, "Curated pathway GMT")->required();
      c->add_option("--levels", ev.levels, "Number of variance levels")->default_val(10);
      c->add_option("--baseline", ev.baseline_gpc, "Baseline gpc_report.csv for comparison");
    }
    if (cluster) c->add_option("--seed", ev.seed, "Clustering seed")->default_val(0);
    ev.facet_hvg = hvg;
    ev.facet_gpc = gpc;
    ev.facet_cluster = cluster;
    return c;
  };
  EvalArgs ev_hvg, ev_gpc, ev_cluster;
  auto* cmd_ehvg =
      add_eval("eval-hvg", "Macro/micro PCC over top HVGs", true, false, false, ev_hvg);
  auto* cmd_egpc =
      add_eval("eval-gpc", "Pathway coherence scores", false, true, false, ev_gpc);
  auto* cmd_eclu =
      add_eval("eval-cluster", "Clustering agreement with cancer types", false, false, true,
               ev_cluster);

  ProfileArgs pf;
  auto* cmd_pf = app.add_subcommand("profile", "Forward-pass FLOPs/runtime/memory scaling");
  cmd_pf->add_option("--model-config", pf.model_config_file, "Model config JSON");
  cmd_pf->add_option("--n", pf.n_patches, "Patch counts (strictly increasing)")
      ->required()
      ->expected(-1);
  cmd_pf->add_option("--runs", pf.runs, "Timed runs per patch count")->default_val(100);
  cmd_pf->add_option("--seed", pf.seed, "Seed for the profiled slide")->default_val(0);
  cmd_pf->add_option("--out", pf.out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_gen->parsed()) {
      if (!gen_seed_opt->empty()) gen.seed = gen_seed;
      cmd_gen_synth(gen);
    } else if (cmd_tr->parsed()) {
      if (!tr_seed_opt->empty()) tr.seed = tr_seed;
      cmd_train(tr);
    } else if (cmd_pr->parsed()) {
      cmd_predict(pr);
    } else if (cmd_cu->parsed()) {
      cmd_curate(cu);
    } else if (cmd_ehvg->parsed()) {
      cmd_eval(ev_hvg);
    } else if (cmd_egpc->parsed()) {
      cmd_eval(ev_gpc);
    } else if (cmd_eclu->parsed()) {
      cmd_eval(ev_cluster);
    } else if (cmd_pf->parsed()) {
      cmd_profile(pf);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
