#include "cpsdet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cpsdet/errors.hpp"
#include "src/model_json.hpp"

namespace cpsdet {

namespace {

using nlohmann::json;

void check_dims(const TimeSeries& data, const ModelConfig& mconfig) {
  if (data.input_dim() != mconfig.input_dim ||
      data.output_dim() != mconfig.output_dim) {
    throw ContractError(
        "series dims (" + std::to_string(data.input_dim()) + " in, " +
        std::to_string(data.output_dim()) + " out) do not match the model (" +
        std::to_string(mconfig.input_dim) + " in, " +
        std::to_string(mconfig.output_dim) + " out)");
  }
}

void accumulate(ModelParameters& total, const ModelParameters& part) {
  auto tv = parameter_views(total);
  const auto pv = parameter_views(part);
  for (std::size_t i = 0; i < tv.size(); ++i) {
    for (std::size_t k = 0; k < tv[i].size; ++k) tv[i].data[k] += pv[i].data[k];
  }
}

void scale(ModelParameters& params, double factor) {
  for (auto& view : parameter_views(params)) {
    for (std::size_t k = 0; k < view.size; ++k) view.data[k] *= factor;
  }
}

void clip_global_norm(ModelParameters& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const auto& view : parameter_views(grads)) {
    for (std::size_t k = 0; k < view.size; ++k) {
      sq += view.data[k] * view.data[k];
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) scale(grads, max_norm / norm);
}

json train_config_to_json(const TrainConfig& config) {
  json j;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["learning_rate"] = config.learning_rate;
  j["adam_beta1"] = config.adam_beta1;
  j["adam_beta2"] = config.adam_beta2;
  j["adam_eps"] = config.adam_eps;
  j["tau_freeze_epochs"] = config.tau_freeze_epochs;
  j["seed"] = config.seed;
  j["shuffle"] = config.shuffle;
  j["clip_norm"] = config.clip_norm;
  j["checkpoint_every"] = config.checkpoint_every;
  j["checkpoint_path"] = config.checkpoint_path;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig config;
  config.epochs = j.at("epochs").get<std::size_t>();
  config.batch_size = j.at("batch_size").get<std::size_t>();
  config.learning_rate = j.at("learning_rate").get<double>();
  config.adam_beta1 = j.at("adam_beta1").get<double>();
  config.adam_beta2 = j.at("adam_beta2").get<double>();
  config.adam_eps = j.at("adam_eps").get<double>();
  config.tau_freeze_epochs = j.at("tau_freeze_epochs").get<std::size_t>();
  config.seed = j.at("seed").get<std::uint64_t>();
  config.shuffle = j.at("shuffle").get<bool>();
  config.clip_norm = j.at("clip_norm").get<double>();
  config.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  config.checkpoint_path = j.at("checkpoint_path").get<std::string>();
  return config;
}

TrainResult run_training(const TimeSeries& raw, const ModelConfig& mconfig,
                         const TrainConfig& tconfig, ModelParameters params,
                         AdamState adam, NormalizationSpec norm,
                         std::vector<double> history,
                         std::size_t start_epoch) {
  const TimeSeries data = apply_normalization(raw, norm);
  if (data.length <= mconfig.forecast_shift) {
    throw ContractError("series shorter than the forecast shift");
  }
  const std::size_t usable = data.length - mconfig.forecast_shift;
  const SeededRng base(tconfig.seed);

  for (std::size_t epoch = start_epoch; epoch < tconfig.epochs; ++epoch) {
    const bool freeze = epoch < tconfig.tau_freeze_epochs;

    // With shuffle on, window boundaries rotate by a per-epoch offset so
    // batches differ between epochs; lanes stay contiguous and time-ordered
    // because state carries over within a lane.
    std::size_t offset = 0;
    if (tconfig.shuffle && usable > mconfig.t_max) {
      SeededRng epoch_rng = base.child(epoch + 1);
      offset = epoch_rng.next_u64() % mconfig.t_max;
    }
    const std::size_t span = usable - offset;
    const std::size_t lanes = std::min<std::size_t>(
        tconfig.batch_size,
        std::max<std::size_t>(1, span / std::max<std::size_t>(1, mconfig.t_max)));
    std::vector<std::size_t> pos(lanes), end(lanes);
    std::vector<LstmState> states(lanes, zero_state(mconfig));
    for (std::size_t l = 0; l < lanes; ++l) {
      pos[l] = offset + span * l / lanes;
      end[l] = offset + span * (l + 1) / lanes;
    }

    double loss_sum = 0.0;
    std::size_t steps_sum = 0;
    while (true) {
      bool any = false;
      ModelParameters grads = make_zero_parameters(mconfig);
      double batch_loss = 0.0;
      std::size_t batch_steps = 0;
      // Reduction runs in lane order, keeping results deterministic.
      for (std::size_t l = 0; l < lanes; ++l) {
        if (pos[l] >= end[l]) continue;
        any = true;
        const std::size_t wlen = std::min(mconfig.t_max, end[l] - pos[l]);
        std::vector<std::vector<double>> xs(wlen), ys(wlen);
        for (std::size_t j = 0; j < wlen; ++j) {
          xs[j] = data.x_vec(pos[l] + j);
          ys[j] = data.y_vec(pos[l] + j + mconfig.forecast_shift);
        }
        BackwardResult br = backward_tbptt(params, mconfig, xs, ys, states[l]);
        states[l] = std::move(br.final_state);
        accumulate(grads, br.gradients);
        batch_loss += br.loss;
        batch_steps += wlen;
        pos[l] += wlen;
      }
      if (!any) break;
      scale(grads, 1.0 / static_cast<double>(batch_steps));
      clip_global_norm(grads, tconfig.clip_norm);
      adam_step(params, grads, adam, tconfig, freeze, mconfig);
      loss_sum += batch_loss;
      steps_sum += batch_steps;
    }

    const double epoch_loss = loss_sum / static_cast<double>(steps_sum);
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError(epoch);
    }
    history.push_back(epoch_loss);

    if (tconfig.checkpoint_every > 0 && !tconfig.checkpoint_path.empty() &&
        (epoch + 1) % tconfig.checkpoint_every == 0) {
      save_checkpoint(tconfig.checkpoint_path,
                      Checkpoint{mconfig, tconfig, tconfig.seed, params, adam,
                                 norm, history, epoch + 1});
    }
  }
  return TrainResult{std::move(params), std::move(norm), std::move(history)};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  if (batch_size < 1) throw ContractError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ContractError("adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ContractError("adam_eps must be > 0");
  if (tau_freeze_epochs > epochs) {
    throw ContractError("tau_freeze_epochs must not exceed epochs");
  }
}

NormalizationSpec fit_normalization(const TimeSeries& data) {
  if (data.length == 0) {
    throw ContractError("cannot fit normalization on an empty series");
  }
  const std::size_t p = data.input_dim();
  const std::size_t q = data.output_dim();
  const double n = static_cast<double>(data.length);
  NormalizationSpec norm;
  norm.x_mean.assign(p, 0.0);
  norm.x_scale.assign(p, 1.0);
  norm.y_mean.assign(q, 0.0);
  norm.y_scale.assign(q, 1.0);

  for (std::size_t j = 0; j < p; ++j) {
    bool binary = true;
    double sum = 0.0;
    for (std::size_t t = 0; t < data.length; ++t) {
      const double v = data.xs[t * p + j];
      binary = binary && (v == 0.0 || v == 1.0);
      sum += v;
    }
    if (binary) continue;  // {0,1} channels pass through unscaled
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t t = 0; t < data.length; ++t) {
      const double d = data.xs[t * p + j] - mean;
      sq += d * d;
    }
    norm.x_mean[j] = mean;
    norm.x_scale[j] = std::max(std::sqrt(sq / n), 1e-8);
  }

  for (std::size_t j = 0; j < q; ++j) {
    double sum = 0.0;
    for (std::size_t t = 0; t < data.length; ++t) sum += data.ys[t * q + j];
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t t = 0; t < data.length; ++t) {
      const double d = data.ys[t * q + j] - mean;
      sq += d * d;
    }
    norm.y_mean[j] = mean;
    norm.y_scale[j] = std::max(std::sqrt(sq / n), 1e-8);
  }
  return norm;
}

TimeSeries apply_normalization(const TimeSeries& data,
                               const NormalizationSpec& norm) {
  const std::size_t p = data.input_dim();
  const std::size_t q = data.output_dim();
  if (norm.x_mean.size() != p || norm.y_mean.size() != q) {
    throw ContractError("normalization spec does not match the series dims");
  }
  TimeSeries out = data;
  for (std::size_t t = 0; t < data.length; ++t) {
    for (std::size_t j = 0; j < p; ++j) {
      out.xs[t * p + j] = (data.xs[t * p + j] - norm.x_mean[j]) / norm.x_scale[j];
    }
    for (std::size_t j = 0; j < q; ++j) {
      out.ys[t * q + j] = (data.ys[t * q + j] - norm.y_mean[j]) / norm.y_scale[j];
    }
  }
  return out;
}

Prediction denormalize_prediction(const Prediction& pred,
                                  const NormalizationSpec& norm) {
  Prediction out = pred;
  for (std::size_t i = 0; i < pred.y_hat.size(); ++i) {
    out.y_hat[i] = pred.y_hat[i] * norm.y_scale[i] + norm.y_mean[i];
    out.sigma[i] = pred.sigma[i] * norm.y_scale[i];
    out.tau[i] = pred.tau[i] + std::log(norm.y_scale[i]);
  }
  return out;
}

void adam_step(ModelParameters& params, const ModelParameters& grads,
               AdamState& state, const TrainConfig& config, bool freeze_tau,
               const ModelConfig& mconfig) {
  state.step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  auto pv = parameter_views(params);
  const auto gv = parameter_views(grads);
  auto mv = parameter_views(state.m);
  auto vv = parameter_views(state.v);

  const std::size_t q = mconfig.output_dim;
  const std::size_t tau_w_begin = q * mconfig.head_hidden;

  for (std::size_t i = 0; i < pv.size(); ++i) {
    const bool is_out_w = pv[i].name == "out.w";
    const bool is_out_b = pv[i].name == "out.b";
    for (std::size_t k = 0; k < pv[i].size; ++k) {
      if (freeze_tau && ((is_out_w && k >= tau_w_begin) || (is_out_b && k >= q))) {
        continue;  // tau head excluded: parameter and moments untouched
      }
      const double g = gv[i].data[k];
      double& m = mv[i].data[k];
      double& v = vv[i].data[k];
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      pv[i].data[k] -=
          config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

TrainResult train(const TimeSeries& data, const ModelConfig& mconfig,
                  const TrainConfig& tconfig) {
  data.validate();
  mconfig.validate();
  tconfig.validate();
  check_dims(data, mconfig);

  NormalizationSpec norm = fit_normalization(data);
  SeededRng rng(tconfig.seed);
  ModelParameters params = init_parameters(mconfig, rng);
  AdamState adam{make_zero_parameters(mconfig), make_zero_parameters(mconfig),
                 0};
  return run_training(data, mconfig, tconfig, std::move(params),
                      std::move(adam), std::move(norm), {}, 0);
}

TrainResult train_resume(const TimeSeries& data, const Checkpoint& checkpoint) {
  data.validate();
  checkpoint.model_config.validate();
  checkpoint.train_config.validate();
  check_dims(data, checkpoint.model_config);
  return run_training(data, checkpoint.model_config, checkpoint.train_config,
                      checkpoint.params, checkpoint.adam,
                      checkpoint.normalization, checkpoint.loss_history,
                      checkpoint.completed_epochs);
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "checkpoint";
  doc["seed"] = checkpoint.seed;
  doc["config"] = detail::config_to_json(checkpoint.model_config);
  doc["train_config"] = train_config_to_json(checkpoint.train_config);
  doc["parameters"] = detail::parameters_to_json(checkpoint.params);
  doc["normalization"] = detail::normalization_to_json(checkpoint.normalization);
  doc["adam"] = json{{"m", detail::parameters_to_json(checkpoint.adam.m)},
                     {"v", detail::parameters_to_json(checkpoint.adam.v)},
                     {"step", checkpoint.adam.step}};
  doc["loss_history"] = checkpoint.loss_history;
  doc["completed_epochs"] = checkpoint.completed_epochs;
  std::ofstream file(path, std::ios::binary);
  if (!file || !(file << doc.dump(2) << '\n')) {
    throw IoError("cannot write " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw IoError("cannot open " + path);
  }
  json doc;
  try {
    file >> doc;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
  Checkpoint cp;
  try {
    if (doc.at("format_version").get<int>() != 1 ||
        doc.at("kind").get<std::string>() != "checkpoint") {
      throw IoError("checkpoint " + path + ": unsupported format");
    }
    cp.seed = doc.at("seed").get<std::uint64_t>();
    cp.model_config = detail::config_from_json(doc.at("config"));
    cp.train_config = train_config_from_json(doc.at("train_config"));
    cp.model_config.validate();
    cp.params = make_zero_parameters(cp.model_config);
    detail::parameters_from_json(doc.at("parameters"), cp.params);
    cp.normalization = detail::normalization_from_json(
        doc.at("normalization"), cp.model_config.input_dim,
        cp.model_config.output_dim);
    cp.adam.m = make_zero_parameters(cp.model_config);
    cp.adam.v = make_zero_parameters(cp.model_config);
    detail::parameters_from_json(doc.at("adam").at("m"), cp.adam.m);
    detail::parameters_from_json(doc.at("adam").at("v"), cp.adam.v);
    cp.adam.step = doc.at("adam").at("step").get<std::size_t>();
    cp.loss_history = doc.at("loss_history").get<std::vector<double>>();
    cp.completed_epochs = doc.at("completed_epochs").get<std::size_t>();
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path + ": " + e.what());
  }
  return cp;
}

}  // namespace cpsdet
