#include "histoprism/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "histoprism/rng.hpp"

namespace histoprism {

namespace {
constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
  if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay < 0");
  if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs < 1");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience < 1");
  if (!(grad_clip_norm > 0.0)) throw std::invalid_argument("TrainConfig: grad_clip_norm <= 0");
}

double clip_gradients(std::vector<Matrix>& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be > 0");
  double sq = 0.0;
  for (const Matrix& g : grads)
    for (std::size_t i = 0; i < g.size(); ++i) sq += g.data()[i] * g.data()[i];
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double s = max_norm / norm;
    for (Matrix& g : grads)
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] *= s;
  }
  return norm;
}

void adamw_step(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state,
                const TrainConfig& tc) {
  std::vector<Matrix*> tensors;
  params.for_each_tensor([&](const std::string&, Matrix& m) { tensors.push_back(&m); });
  if (tensors.size() != grads.size())
    throw std::invalid_argument("adamw_step: gradient count != tensor count");

  for (const Matrix& g : grads)
    if (!g.all_finite()) throw std::runtime_error("adamw_step: non-finite gradient, step rejected");

  if (state.m.empty()) {
    for (Matrix* t : tensors) {
      state.m.emplace_back(t->rows(), t->cols());
      state.v.emplace_back(t->rows(), t->cols());
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));

  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Matrix& w = *tensors[t];
    Matrix& m = state.m[t];
    Matrix& v = state.v[t];
    const Matrix& g = grads[t];
    for (std::size_t i = 0; i < w.size(); ++i) {
      double gi = g.data()[i];
      m.data()[i] = kBeta1 * m.data()[i] + (1.0 - kBeta1) * gi;
      v.data()[i] = kBeta2 * v.data()[i] + (1.0 - kBeta2) * gi * gi;
      double mhat = m.data()[i] / bc1;
      double vhat = v.data()[i] / bc2;
      w.data()[i] -= tc.learning_rate * (mhat / (std::sqrt(vhat) + kAdamEps) +
                                         tc.weight_decay * w.data()[i]);
    }
  }
  if (!params.all_finite())
    throw std::runtime_error("adamw_step: parameters non-finite after update");
}

bool should_stop(const std::vector<double>& val_history, std::size_t patience) {
  if (val_history.empty()) return false;
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_history.size(); ++i)
    if (val_history[i] < val_history[best]) best = i;
  return val_history.size() - 1 - best >= patience;
}

double slide_loss_and_grads(const SlideSample& sample, const ModelParams& params,
                            const ModelConfig& cfg, std::vector<Matrix>* grads) {
  if (!sample.expression)
    throw std::invalid_argument("slide_loss_and_grads: slide " + sample.slide_id +
                                " carries no expression");
  Tape tape;
  ForwardNodes fw = forward_on_tape(tape, sample, params, cfg);
  NodeId loss = mse_on_tape(tape, fw.output, *sample.expression);
  if (grads) {
    tape.backward(loss);
    grads->clear();
    for (NodeId id : fw.param_nodes) grads->push_back(tape.grad(id));
  }
  return tape.value(loss)(0, 0);
}

double dataset_mse(const std::vector<SlideSample>& slides, const ModelParams& params,
                   const ModelConfig& cfg) {
  double sq_sum = 0.0;
  std::size_t entries = 0;
  for (const SlideSample& s : slides) {
    if (!s.expression)
      throw std::invalid_argument("dataset_mse: slide " + s.slide_id + " carries no expression");
    Matrix pred = forward(s, params, cfg);
    sq_sum += mse_loss(pred, *s.expression) * static_cast<double>(pred.size());
    entries += pred.size();
  }
  return sq_sum / static_cast<double>(entries);
}

TrainResult train(const std::vector<SlideSample>& train_set,
                  const std::vector<SlideSample>& val_set, const ModelConfig& cfg,
                  const TrainConfig& tc) {
  cfg.validate();
  tc.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("train: train and validation sets must be nonempty");
  for (const auto& s : train_set)
    if (!s.expression)
      throw std::invalid_argument("train: slide " + s.slide_id + " carries no expression");
  for (const auto& s : val_set)
    if (!s.expression)
      throw std::invalid_argument("train: slide " + s.slide_id + " carries no expression");

  ModelParams params = init_params(cfg, tc.seed);
  AdamState state;
  Rng shuffle_rng(tc.seed, 0x5f75ULL);

  TrainingTrace trace;
  std::vector<double> val_history;
  ModelParams best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Matrix> grads;
  for (std::size_t epoch = 0; epoch < tc.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double sq_sum = 0.0;
    std::size_t entries = 0;
    for (std::size_t idx : order) {
      const SlideSample& s = train_set[idx];
      double loss = slide_loss_and_grads(s, params, cfg, &grads);
      if (!std::isfinite(loss))
        throw TrainingDivergence("train: non-finite loss on slide " + s.slide_id, trace);
      std::size_t n = s.n_patches() * cfg.d_gene;
      sq_sum += loss * static_cast<double>(n);
      entries += n;
      clip_gradients(grads, tc.grad_clip_norm);
      try {
        adamw_step(params, grads, state, tc);
      } catch (const std::runtime_error& e) {
        throw TrainingDivergence(std::string("train: ") + e.what(), trace);
      }
    }
    double train_mse = sq_sum / static_cast<double>(entries);
    double val_mse = dataset_mse(val_set, params, cfg);
    if (!std::isfinite(val_mse))
      throw TrainingDivergence("train: non-finite validation MSE", trace);
    trace.epochs.push_back({train_mse, val_mse});
    val_history.push_back(val_mse);
    if (val_mse < best_val) {
      best_val = val_mse;
      best_epoch = epoch;
      best_params = params;
    }
    if (should_stop(val_history, tc.patience)) {
      trace.stop_reason = "early_stop";
      break;
    }
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "max_epochs";
  trace.best_epoch = best_epoch;
  trace.best_val_mse = best_val;
  return TrainResult{std::move(best_params), std::move(trace)};
}

}  // namespace histoprism
