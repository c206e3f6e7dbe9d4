#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "histoprism/model.hpp"

namespace histoprism {

/// Optimization hyperparameters; the defaults are the reference recipe
/// (AdamW, lr 5e-4, weight decay 0.01, up to 1000 epochs, patience 30,
/// gradient clipping at norm 1.0).
struct TrainConfig {
  double learning_rate = 5e-4;
  double weight_decay = 0.01;
  std::size_t max_epochs = 1000;
  std::size_t patience = 30;
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// First/second moment estimates, one per parameter tensor, plus the shared
/// step counter for bias correction.
struct AdamState {
  std::vector<Matrix> m, v;
  std::uint64_t step = 0;
};

/// Scales all gradients by max_norm/g when the global L2 norm g exceeds
/// max_norm; returns the pre-clip norm.
double clip_gradients(std::vector<Matrix>& grads, double max_norm);

/// Decoupled-weight-decay adaptive-moment update (beta1 0.9, beta2 0.999,
/// eps 1e-8): moments with bias correction drive the gradient term, decay is
/// applied directly to the parameters. Rejects non-finite gradients.
void adamw_step(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state,
                const TrainConfig& tc);

struct EpochStats {
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainingTrace {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  std::string stop_reason;  // "early_stop" | "max_epochs"
};

struct TrainResult {
  ModelParams params;
  TrainingTrace trace;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& msg, TrainingTrace t)
      : std::runtime_error(msg), trace(std::move(t)) {}
  TrainingTrace trace;
};

/// Stop once `patience` epochs have passed without strict improvement over
/// the best value seen so far.
bool should_stop(const std::vector<double>& val_history, std::size_t patience);

/// Loss (and optionally gradients, canonical tensor order) of one slide.
double slide_loss_and_grads(const SlideSample& sample, const ModelParams& params,
                            const ModelConfig& cfg, std::vector<Matrix>* grads);

/// Pooled MSE over every patch-gene entry of the given slides.
double dataset_mse(const std::vector<SlideSample>& slides, const ModelParams& params,
                   const ModelConfig& cfg);

/// Full training loop: one slide per optimizer step, slide order reshuffled
/// per epoch from tc.seed, validation MSE evaluated each epoch, parameters
/// returned from the best validation epoch. Deterministic given tc.seed.
TrainResult train(const std::vector<SlideSample>& train_set,
                  const std::vector<SlideSample>& val_set, const ModelConfig& cfg,
                  const TrainConfig& tc);

}  // namespace histoprism
