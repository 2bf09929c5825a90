#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cpsdet/matrix.hpp"
#include "cpsdet/rng.hpp"

namespace cpsdet {

// Architecture of the stacked LSTM with the two-headed (mean, log-sd) output.
struct ModelConfig {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> layer_sizes = {16};  // 1 to 5 stacked layers
  std::size_t head_hidden = 16;  // units in the tanh head layer
  std::size_t t_max = 30;        // gradient truncation window
  std::size_t forecast_shift = 0;  // input at t predicts y at t + shift

  void validate() const;  // throws ContractError on an invalid config
};

// One gate (or the cell candidate): pre-activation is w*x + u*h + b.
struct GateParameters {
  Matrix w;  // hidden x layer_input
  Matrix u;  // hidden x hidden
  std::vector<double> b;
};

struct LayerParameters {
  GateParameters input_gate;
  GateParameters forget_gate;
  GateParameters output_gate;
  GateParameters candidate;
};

// All trainable values. Also used as the container for gradients, which
// share the same shapes.
struct ModelParameters {
  std::vector<LayerParameters> layers;
  Matrix head_w;  // head_hidden x top layer size, tanh activation
  std::vector<double> head_b;
  Matrix out_w;  // 2q x head_hidden; rows [0,q) produce y_hat, [q,2q) tau
  std::vector<double> out_b;
};

// Named view into one parameter array, used for initialization, the Adam
// update, serialization, and gradient checking.
struct ParameterView {
  std::string name;
  double* data;
  std::size_t size;
};

std::vector<ParameterView> parameter_views(ModelParameters& params);

struct ConstParameterView {
  std::string name;
  const double* data;
  std::size_t size;
};

std::vector<ConstParameterView> parameter_views(const ModelParameters& params);

// Per-layer cell (long-term) and hidden (short-term) state.
struct LstmState {
  std::vector<std::vector<double>> cell;
  std::vector<std::vector<double>> hidden;
};

LstmState zero_state(const ModelConfig& config);

// Per-timestep model output; sigma = exp(tau) > 0 always.
struct Prediction {
  std::vector<double> y_hat;
  std::vector<double> tau;
  std::vector<double> sigma;
};

// All-zero parameters with shapes from the config.
ModelParameters make_zero_parameters(const ModelConfig& config);

// Weights uniform in [-s, s] with s = 1/sqrt(fan-in); forget-gate biases 1;
// all other biases 0; tau output rows and biases 0 so sigma starts at 1.
ModelParameters init_parameters(const ModelConfig& config, SeededRng& rng);

// One step through the stacked cells and the output head.
std::pair<LstmState, Prediction> forward_step(const ModelParameters& params,
                                              const ModelConfig& config,
                                              const LstmState& state,
                                              const std::vector<double>& x);

struct SequenceResult {
  std::vector<Prediction> predictions;
  std::vector<LstmState> states;  // state after each step
};

SequenceResult forward_sequence(const ModelParameters& params,
                                const ModelConfig& config,
                                const std::vector<std::vector<double>>& xs,
                                const LstmState& initial);

// L = sum_i [ ((y_i - y_hat_i)/sigma_i)^2 + 2 tau_i ]
double nll_loss(const std::vector<double>& y, const Prediction& pred);

struct LossGrad {
  std::vector<double> d_y_hat;  // -2 (y_i - y_hat_i) / sigma_i^2
  std::vector<double> d_tau;    // 2 (1 - r_i^2), r_i = (y_i - y_hat_i)/sigma_i
};

LossGrad nll_loss_grad(const std::vector<double>& y, const Prediction& pred);

struct BackwardResult {
  ModelParameters gradients;  // same shapes as the parameters
  double loss = 0.0;          // summed over the window
  LstmState final_state;      // forward state after the window
};

// Exact gradient of the summed loss over one window (length <= t_max),
// treating the window-initial state as constant. xs and ys are aligned
// index-wise; any forecast shift is applied by the caller when slicing.
BackwardResult backward_tbptt(const ModelParameters& params,
                              const ModelConfig& config,
                              const std::vector<std::vector<double>>& xs,
                              const std::vector<std::vector<double>>& ys,
                              const LstmState& initial);

}  // namespace cpsdet
