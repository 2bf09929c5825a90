#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cpsdet/model.hpp"
#include "cpsdet/timeseries.hpp"

namespace cpsdet {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // First training stage with the tau head frozen (sigma pinned at 1).
  std::size_t tau_freeze_epochs = 20;
  std::uint64_t seed = 0;
  bool shuffle = true;
  double clip_norm = 5.0;  // global gradient-norm cap; <= 0 disables
  std::size_t checkpoint_every = 0;  // epochs between checkpoints; 0 = off
  std::string checkpoint_path;

  void validate() const;  // throws ContractError
};

struct AdamState {
  ModelParameters m;
  ModelParameters v;
  std::size_t step = 0;
};

// Per-channel affine transforms fitted on training data. Binary input
// channels (values all in {0,1}) pass through unchanged; output scales are
// standard deviations floored at 1e-8.
struct NormalizationSpec {
  std::vector<double> x_mean, x_scale;
  std::vector<double> y_mean, y_scale;
};

NormalizationSpec fit_normalization(const TimeSeries& data);

TimeSeries apply_normalization(const TimeSeries& data,
                               const NormalizationSpec& norm);

// Maps a prediction made in normalized space back to raw units
// (tau shifts by log(scale) so sigma = exp(tau) stays consistent).
Prediction denormalize_prediction(const Prediction& pred,
                                  const NormalizationSpec& norm);

// Standard bias-corrected Adam update, in place. With freeze_tau the tau
// rows of the output head are excluded entirely (parameters and moment
// accumulators stay bit-identical).
void adam_step(ModelParameters& params, const ModelParameters& grads,
               AdamState& state, const TrainConfig& config,
               bool freeze_tau, const ModelConfig& mconfig);

struct TrainResult {
  ModelParameters params;
  NormalizationSpec normalization;
  std::vector<double> loss_history;  // per-epoch mean NLL per timestep
};

// Mini-batch truncated-BPTT training. The series is split into contiguous
// per-lane chunks processed in time order with carried state; gradients are
// reduced in lane order so results are deterministic given the seeds.
// Throws DivergenceError when an epoch's loss is non-finite.
TrainResult train(const TimeSeries& data, const ModelConfig& mconfig,
                  const TrainConfig& tconfig);

struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  std::uint64_t seed = 0;  // rng seed the run started from
  ModelParameters params;
  AdamState adam;
  NormalizationSpec normalization;
  std::vector<double> loss_history;
  std::size_t completed_epochs = 0;
};

// Continues a checkpointed run on the same data; the result is bit-identical
// to the uninterrupted run.
TrainResult train_resume(const TimeSeries& data, const Checkpoint& checkpoint);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cpsdet
