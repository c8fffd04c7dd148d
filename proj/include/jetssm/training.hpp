#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jetssm/checkpoint.hpp"
#include "jetssm/dataset.hpp"
#include "jetssm/neural_net.hpp"

namespace jetssm {

struct TrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.1;
  std::uint64_t seed = 0;
  std::size_t window = 128;  // frames per training window
  std::size_t stride = 64;
  bool standardize_targets = true;
  // Probability that a training window is presented with the profile columns
  // zeroed. Mixing masked windows in keeps the inference-time input
  // distribution (audio only) inside the training objective; profiles stay
  // visible on the remaining windows.
  double profile_mask_prob = 0.5;

  void validate() const;
};

/// One chronological split, model-ready: normalized 130-channel inputs with
/// the profile feature columns populated, plus raw-um targets and the
/// normalization statistics (always computed on the training rows).
struct TrainData {
  SequenceTensor input;      // [F x 130]
  SequenceTensor target_um;  // [F x 70]
  NormStats feature_stats;
  NormStats target_stats;
};

struct EvalReport {
  std::string model_name;
  ModelKind kind = ModelKind::S4D;
  ModelConfig config;
  double tau_um = 1.0;
  double accuracy_pct = 0.0;       // |pred - target| <= tau, in raw um
  double accuracy_norm_pct = 0.0;  // same tau applied to z-scored pred/target
  double mse_um2 = 0.0;
  std::vector<double> frame_abs_err_um;   // mean |err| per frame
  std::vector<double> column_abs_err_um;  // mean |err| per profile column
};

double mse_loss(const SequenceTensor& pred, const SequenceTensor& target);

/// Computes the loss and records its gradient seed on the tape.
double mse_loss_record(GradientTape& tape, const SequenceTensor& pred,
                       const SequenceTensor& target);

/// 100 * fraction of entries with |pred - target| <= tau.
double accuracy_within(const SequenceTensor& pred, const SequenceTensor& target,
                       double tau = 1.0);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t t = 0;
};

/// Bias-corrected Adam over every trainable array in the store.
void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;
};

TrainResult train(ModelKind kind, ModelConfig mcfg, const TrainConfig& tcfg,
                  const TrainData& data);

/// Inference (profiles masked, training off) and metrics in physical um.
EvalReport evaluate(const Checkpoint& ckpt, const TrainData& data, double tau_um = 1.0);

/// Same, but with the profile feature columns left visible; used for the
/// information-monotonicity diagnostic.
EvalReport evaluate_with_profiles(const Checkpoint& ckpt, const TrainData& data,
                                  double tau_um = 1.0);

/// Eval-mode forward of already-normalized (and possibly masked) input,
/// mapped back to um via the checkpoint's target statistics.
SequenceTensor predict_um(Model& model, const Checkpoint& ckpt, const SequenceTensor& input);

struct TrialSpace {
  ModelKind kind = ModelKind::S4D;
  std::vector<std::size_t> hidden_dims{64, 128, 256};
  std::size_t n_blocks_min = 1, n_blocks_max = 6;
  std::vector<std::size_t> n_states{32, 64};
  double lr_min = 1e-4, lr_max = 1e-2;  // log-uniform
  double dropout_min = 0.0, dropout_max = 0.3;
  std::size_t mlp_layers_min = 2, mlp_layers_max = 5;
  std::size_t gru_layers_min = 1, gru_layers_max = 2;
  std::size_t n_trials = 50;

  void validate() const;
};

struct TrialResult {
  std::size_t trial_id = 0;
  ModelKind kind = ModelKind::S4D;
  ModelConfig config;
  double learning_rate = 0.0;
  double dropout = 0.0;
  double accuracy_pct = 0.0;
  double mse_um2 = 0.0;
  double wall_s = 0.0;
};

struct SearchResult {
  std::vector<TrialResult> leaderboard;  // accuracy desc, mse asc, trial asc
  Checkpoint best;
  std::size_t best_trial = 0;
};

/// Seeded uniform random search: budget independent trials, each train +
/// evaluate. Reproducible given the seed regardless of worker count.
SearchResult trial_search(const TrialSpace& space, std::size_t budget, std::uint64_t seed,
                          const TrainConfig& base, const TrainData& train_data,
                          const TrainData& test_data, double tau_um, std::size_t workers = 4);

}  // namespace jetssm
