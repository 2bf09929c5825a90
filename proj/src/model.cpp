#include "cpsdet/model.hpp"

#include <cmath>
#include <string>

#include "cpsdet/errors.hpp"

namespace cpsdet {

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

std::size_t layer_input_size(const ModelConfig& config, std::size_t layer) {
  return layer == 0 ? config.input_dim : config.layer_sizes[layer - 1];
}

GateParameters make_gate(std::size_t hidden, std::size_t in) {
  return GateParameters{Matrix(hidden, in), Matrix(hidden, hidden),
                        std::vector<double>(hidden, 0.0)};
}

void fill_uniform_fan_in(Matrix& m, SeededRng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(m.cols()));
  for (double& v : m.values()) v = (2.0 * rng.uniform() - 1.0) * s;
}

// Everything the backward pass needs from one forward step.
struct LayerCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> gi, gf, go, gc;  // gate activations and candidate
  std::vector<double> c, tanh_c, h;
};

struct StepCache {
  std::vector<LayerCache> layers;
  std::vector<double> head_z;
  Prediction pred;
};

void check_state_shapes(const ModelConfig& config, const LstmState& state) {
  if (state.cell.size() != config.layer_sizes.size() ||
      state.hidden.size() != config.layer_sizes.size()) {
    throw ShapeError("state layer count does not match the config");
  }
  for (std::size_t l = 0; l < config.layer_sizes.size(); ++l) {
    if (state.cell[l].size() != config.layer_sizes[l] ||
        state.hidden[l].size() != config.layer_sizes[l]) {
      throw ShapeError("state size mismatch at layer " + std::to_string(l));
    }
  }
}

Prediction run_step(const ModelParameters& params, const ModelConfig& config,
                    LstmState& state, const std::vector<double>& x,
                    StepCache* cache) {
  if (x.size() != config.input_dim) {
    throw ShapeError("input has dim " + std::to_string(x.size()) +
                     ", expected " + std::to_string(config.input_dim));
  }
  check_state_shapes(config, state);
  if (cache) cache->layers.resize(config.layer_sizes.size());

  const std::vector<double>* layer_in = &x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParameters& lp = params.layers[l];
    const std::vector<double>& h_prev = state.hidden[l];
    const std::vector<double>& c_prev = state.cell[l];
    const std::size_t n = h_prev.size();

    std::vector<double> ai = lp.input_gate.b;
    std::vector<double> af = lp.forget_gate.b;
    std::vector<double> ao = lp.output_gate.b;
    std::vector<double> ac = lp.candidate.b;
    add_matvec(lp.input_gate.w, *layer_in, ai);
    add_matvec(lp.forget_gate.w, *layer_in, af);
    add_matvec(lp.output_gate.w, *layer_in, ao);
    add_matvec(lp.candidate.w, *layer_in, ac);
    add_matvec(lp.input_gate.u, h_prev, ai);
    add_matvec(lp.forget_gate.u, h_prev, af);
    add_matvec(lp.output_gate.u, h_prev, ao);
    add_matvec(lp.candidate.u, h_prev, ac);

    std::vector<double> c_new(n), tanh_c(n), h_new(n);
    for (std::size_t k = 0; k < n; ++k) {
      ai[k] = logistic(ai[k]);
      af[k] = logistic(af[k]);
      ao[k] = logistic(ao[k]);
      ac[k] = std::tanh(ac[k]);
      c_new[k] = af[k] * c_prev[k] + ai[k] * ac[k];
      tanh_c[k] = std::tanh(c_new[k]);
      h_new[k] = ao[k] * tanh_c[k];
    }

    if (cache) {
      LayerCache& lc = cache->layers[l];
      lc.x = *layer_in;
      lc.h_prev = h_prev;
      lc.c_prev = c_prev;
      lc.gi = ai;
      lc.gf = af;
      lc.go = ao;
      lc.gc = ac;
      lc.c = c_new;
      lc.tanh_c = tanh_c;
      lc.h = h_new;
    }

    state.cell[l] = std::move(c_new);
    state.hidden[l] = std::move(h_new);
    layer_in = &state.hidden[l];
  }

  // Output head: tanh hidden layer, then an affine map to 2q channels.
  std::vector<double> z = params.head_b;
  add_matvec(params.head_w, *layer_in, z);
  for (double& v : z) v = std::tanh(v);
  std::vector<double> out = params.out_b;
  add_matvec(params.out_w, z, out);

  const std::size_t q = config.output_dim;
  Prediction pred;
  pred.y_hat.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(q));
  pred.tau.assign(out.begin() + static_cast<std::ptrdiff_t>(q), out.end());
  pred.sigma.resize(q);
  for (std::size_t i = 0; i < q; ++i) pred.sigma[i] = std::exp(pred.tau[i]);

  if (cache) {
    cache->head_z = std::move(z);
    cache->pred = pred;
  }
  return pred;
}

}  // namespace

void ModelConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw ContractError("input_dim and output_dim must be >= 1");
  }
  if (layer_sizes.empty() || layer_sizes.size() > 5) {
    throw ContractError("layer count must be between 1 and 5");
  }
  for (std::size_t n : layer_sizes) {
    if (n < 1) throw ContractError("layer sizes must be >= 1");
  }
  if (head_hidden < 1) throw ContractError("head_hidden must be >= 1");
  if (t_max < 1) throw ContractError("t_max must be >= 1");
}

std::vector<ParameterView> parameter_views(ModelParameters& params) {
  std::vector<ParameterView> views;
  auto add_matrix = [&views](const std::string& name, Matrix& m) {
    views.push_back({name, m.values().data(), m.size()});
  };
  auto add_vector = [&views](const std::string& name, std::vector<double>& v) {
    views.push_back({name, v.data(), v.size()});
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    auto add_gate = [&](const std::string& gate, GateParameters& g) {
      add_matrix(prefix + gate + ".w", g.w);
      add_matrix(prefix + gate + ".u", g.u);
      add_vector(prefix + gate + ".b", g.b);
    };
    add_gate("input_gate", params.layers[l].input_gate);
    add_gate("forget_gate", params.layers[l].forget_gate);
    add_gate("output_gate", params.layers[l].output_gate);
    add_gate("candidate", params.layers[l].candidate);
  }
  add_matrix("head.w", params.head_w);
  add_vector("head.b", params.head_b);
  add_matrix("out.w", params.out_w);
  add_vector("out.b", params.out_b);
  return views;
}

std::vector<ConstParameterView> parameter_views(const ModelParameters& params) {
  auto views = parameter_views(const_cast<ModelParameters&>(params));
  std::vector<ConstParameterView> out;
  out.reserve(views.size());
  for (auto& v : views) out.push_back({std::move(v.name), v.data, v.size});
  return out;
}

LstmState zero_state(const ModelConfig& config) {
  LstmState state;
  for (std::size_t n : config.layer_sizes) {
    state.cell.emplace_back(n, 0.0);
    state.hidden.emplace_back(n, 0.0);
  }
  return state;
}

ModelParameters make_zero_parameters(const ModelConfig& config) {
  config.validate();
  ModelParameters params;
  for (std::size_t l = 0; l < config.layer_sizes.size(); ++l) {
    const std::size_t hidden = config.layer_sizes[l];
    const std::size_t in = layer_input_size(config, l);
    params.layers.push_back(LayerParameters{
        make_gate(hidden, in), make_gate(hidden, in), make_gate(hidden, in),
        make_gate(hidden, in)});
  }
  params.head_w = Matrix(config.head_hidden, config.layer_sizes.back());
  params.head_b.assign(config.head_hidden, 0.0);
  params.out_w = Matrix(2 * config.output_dim, config.head_hidden);
  params.out_b.assign(2 * config.output_dim, 0.0);
  return params;
}

ModelParameters init_parameters(const ModelConfig& config, SeededRng& rng) {
  ModelParameters params = make_zero_parameters(config);
  for (LayerParameters& layer : params.layers) {
    for (GateParameters* gate : {&layer.input_gate, &layer.forget_gate,
                                 &layer.output_gate, &layer.candidate}) {
      fill_uniform_fan_in(gate->w, rng);
      fill_uniform_fan_in(gate->u, rng);
    }
    // +1 forget bias eases learning of long dependencies.
    for (double& b : layer.forget_gate.b) b = 1.0;
  }
  fill_uniform_fan_in(params.head_w, rng);
  // Only the y_hat rows of the output map are randomized; tau rows stay 0 so
  // every channel starts with sigma = exp(0) = 1.
  const std::size_t q = config.output_dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(params.out_w.cols()));
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t j = 0; j < params.out_w.cols(); ++j) {
      params.out_w(i, j) = (2.0 * rng.uniform() - 1.0) * s;
    }
  }
  return params;
}

std::pair<LstmState, Prediction> forward_step(const ModelParameters& params,
                                              const ModelConfig& config,
                                              const LstmState& state,
                                              const std::vector<double>& x) {
  LstmState next = state;
  Prediction pred = run_step(params, config, next, x, nullptr);
  return {std::move(next), std::move(pred)};
}

SequenceResult forward_sequence(const ModelParameters& params,
                                const ModelConfig& config,
                                const std::vector<std::vector<double>>& xs,
                                const LstmState& initial) {
  SequenceResult result;
  result.predictions.reserve(xs.size());
  result.states.reserve(xs.size());
  LstmState state = initial;
  for (const auto& x : xs) {
    result.predictions.push_back(run_step(params, config, state, x, nullptr));
    result.states.push_back(state);
  }
  return result;
}

double nll_loss(const std::vector<double>& y, const Prediction& pred) {
  if (y.size() != pred.y_hat.size()) {
    throw ShapeError("nll_loss: target dim does not match the prediction");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = (y[i] - pred.y_hat[i]) / pred.sigma[i];
    loss += r * r + 2.0 * pred.tau[i];
  }
  return loss;
}

LossGrad nll_loss_grad(const std::vector<double>& y, const Prediction& pred) {
  if (y.size() != pred.y_hat.size()) {
    throw ShapeError("nll_loss_grad: target dim does not match the prediction");
  }
  LossGrad grad;
  grad.d_y_hat.resize(y.size());
  grad.d_tau.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = (y[i] - pred.y_hat[i]) / pred.sigma[i];
    grad.d_y_hat[i] = -2.0 * r / pred.sigma[i];
    grad.d_tau[i] = 2.0 * (1.0 - r * r);
  }
  return grad;
}

BackwardResult backward_tbptt(const ModelParameters& params,
                              const ModelConfig& config,
                              const std::vector<std::vector<double>>& xs,
                              const std::vector<std::vector<double>>& ys,
                              const LstmState& initial) {
  if (xs.size() != ys.size()) {
    throw ContractError("backward_tbptt: inputs and targets must align");
  }
  if (xs.size() > config.t_max) {
    throw ContractError("backward_tbptt: window of " +
                        std::to_string(xs.size()) + " steps exceeds t_max = " +
                        std::to_string(config.t_max));
  }

  BackwardResult result;
  result.gradients = make_zero_parameters(config);
  result.final_state = initial;

  std::vector<StepCache> caches(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    run_step(params, config, result.final_state, xs[t], &caches[t]);
    result.loss += nll_loss(ys[t], caches[t].pred);
  }

  const std::size_t num_layers = config.layer_sizes.size();
  const std::size_t q = config.output_dim;
  ModelParameters& g = result.gradients;

  // Gradients flowing into each layer's (h, c) from the future.
  std::vector<std::vector<double>> dh_future(num_layers), dc_future(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    dh_future[l].assign(config.layer_sizes[l], 0.0);
    dc_future[l].assign(config.layer_sizes[l], 0.0);
  }

  for (std::size_t ti = xs.size(); ti-- > 0;) {
    const StepCache& sc = caches[ti];
    const LossGrad lg = nll_loss_grad(ys[ti], sc.pred);

    std::vector<double> du(2 * q);
    for (std::size_t i = 0; i < q; ++i) {
      du[i] = lg.d_y_hat[i];
      du[q + i] = lg.d_tau[i];
    }
    for (std::size_t i = 0; i < 2 * q; ++i) g.out_b[i] += du[i];
    add_outer(g.out_w, du, sc.head_z);

    std::vector<double> dz(config.head_hidden, 0.0);
    add_matvec_transposed(params.out_w, du, dz);
    std::vector<double> da_head(config.head_hidden);
    for (std::size_t k = 0; k < config.head_hidden; ++k) {
      da_head[k] = dz[k] * (1.0 - sc.head_z[k] * sc.head_z[k]);
    }
    const std::vector<double>& top_h = sc.layers.back().h;
    for (std::size_t k = 0; k < config.head_hidden; ++k) {
      g.head_b[k] += da_head[k];
    }
    add_outer(g.head_w, da_head, top_h);

    // Gradient arriving at each layer's hidden state from the layer above
    // (or the head) at this timestep.
    std::vector<double> dh_above(config.layer_sizes.back(), 0.0);
    add_matvec_transposed(params.head_w, da_head, dh_above);

    for (std::size_t l = num_layers; l-- > 0;) {
      const LayerCache& lc = sc.layers[l];
      const LayerParameters& lp = params.layers[l];
      LayerParameters& lg_ = g.layers[l];
      const std::size_t n = config.layer_sizes[l];

      std::vector<double> dh(n), dc(n);
      for (std::size_t k = 0; k < n; ++k) {
        dh[k] = dh_future[l][k] + dh_above[k];
      }
      std::vector<double> da_i(n), da_f(n), da_o(n), da_c(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double do_ = dh[k] * lc.tanh_c[k];
        dc[k] = dc_future[l][k] +
                dh[k] * lc.go[k] * (1.0 - lc.tanh_c[k] * lc.tanh_c[k]);
        const double di = dc[k] * lc.gc[k];
        const double df = dc[k] * lc.c_prev[k];
        const double dg = dc[k] * lc.gi[k];
        dc_future[l][k] = dc[k] * lc.gf[k];
        da_i[k] = di * lc.gi[k] * (1.0 - lc.gi[k]);
        da_f[k] = df * lc.gf[k] * (1.0 - lc.gf[k]);
        da_o[k] = do_ * lc.go[k] * (1.0 - lc.go[k]);
        da_c[k] = dg * (1.0 - lc.gc[k] * lc.gc[k]);
      }

      add_outer(lg_.input_gate.w, da_i, lc.x);
      add_outer(lg_.forget_gate.w, da_f, lc.x);
      add_outer(lg_.output_gate.w, da_o, lc.x);
      add_outer(lg_.candidate.w, da_c, lc.x);
      add_outer(lg_.input_gate.u, da_i, lc.h_prev);
      add_outer(lg_.forget_gate.u, da_f, lc.h_prev);
      add_outer(lg_.output_gate.u, da_o, lc.h_prev);
      add_outer(lg_.candidate.u, da_c, lc.h_prev);
      for (std::size_t k = 0; k < n; ++k) {
        lg_.input_gate.b[k] += da_i[k];
        lg_.forget_gate.b[k] += da_f[k];
        lg_.output_gate.b[k] += da_o[k];
        lg_.candidate.b[k] += da_c[k];
      }

      std::vector<double> dh_prev(n, 0.0);
      add_matvec_transposed(lp.input_gate.u, da_i, dh_prev);
      add_matvec_transposed(lp.forget_gate.u, da_f, dh_prev);
      add_matvec_transposed(lp.output_gate.u, da_o, dh_prev);
      add_matvec_transposed(lp.candidate.u, da_c, dh_prev);
      dh_future[l] = std::move(dh_prev);

      if (l > 0) {
        std::vector<double> dx(lc.x.size(), 0.0);
        add_matvec_transposed(lp.input_gate.w, da_i, dx);
        add_matvec_transposed(lp.forget_gate.w, da_f, dx);
        add_matvec_transposed(lp.output_gate.w, da_o, dx);
        add_matvec_transposed(lp.candidate.w, da_c, dx);
        dh_above = std::move(dx);
      }
    }
  }
  return result;
}

}  // namespace cpsdet
