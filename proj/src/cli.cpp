#include "cpsdet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpsdet/anomaly.hpp"
#include "cpsdet/data_io.hpp"
#include "cpsdet/errors.hpp"
#include "cpsdet/model.hpp"
#include "cpsdet/simulators.hpp"
#include "cpsdet/special.hpp"
#include "cpsdet/trainer.hpp"

namespace cpsdet {

namespace {

using nlohmann::json;

// Flat JSON config file: top-level keys are app flags, objects hold
// per-subcommand flags, e.g. {"simulate": {"steps": 5000, "seed": 7}}.
class ConfigJson : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json doc;
    try {
      input >> doc;
    } catch (const json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") +
                             e.what());
    }
    if (!doc.is_object()) {
      throw CLI::ConfigError("config root must be a JSON object");
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        for (const auto& [inner_key, inner_value] : value.items()) {
          items.push_back({{key}, inner_key, to_inputs(inner_value)});
        }
      } else {
        items.push_back({{}, key, to_inputs(value)});
      }
    }
    return items;
  }

 private:
  static std::vector<std::string> to_inputs(const json& value) {
    std::vector<std::string> inputs;
    if (value.is_array()) {
      for (const auto& element : value) inputs.push_back(scalar(element));
    } else {
      inputs.push_back(scalar(value));
    }
    return inputs;
  }

  static std::string scalar(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
  }
};

void print_kv(const std::string& key, const std::string& value) {
  std::cout << key << "=" << value << "\n";
}

void print_kv(const std::string& key, double value) {
  print_kv(key, format_double(value));
}

void print_kv(const std::string& key, std::size_t value) {
  print_kv(key, std::to_string(value));
}

std::vector<std::size_t> parse_layer_list(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(item, &pos);
    if (pos != item.size() || v == 0) {
      throw CLI::ValidationError("--layers",
                                 "expected comma-separated positive sizes");
    }
    sizes.push_back(v);
  }
  if (sizes.empty()) {
    throw CLI::ValidationError("--layers", "expected at least one layer size");
  }
  return sizes;
}

std::string metric_text(const std::optional<double>& value) {
  return value ? format_double(*value) : "n/a";
}

json metrics_json(const DetectionReport& report,
                  const std::optional<Threshold>& threshold) {
  json j;
  j["precision"] = report.precision ? json(*report.precision) : json(nullptr);
  j["recall"] = report.recall ? json(*report.recall) : json(nullptr);
  j["f_beta"] = report.f_beta ? json(*report.f_beta) : json(nullptr);
  j["beta"] = report.beta;
  j["tp"] = report.tp;
  j["fp"] = report.fp;
  j["tn"] = report.tn;
  j["fn"] = report.fn;
  j["threshold_r"] = threshold ? json(threshold->r) : json(nullptr);
  j["threshold_alpha"] = threshold ? json(threshold->alpha) : json(nullptr);
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file || !(file << text)) {
    throw IoError("cannot write " + path);
  }
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string scenario;
  std::size_t steps = 5000;
  std::uint64_t seed = 0;
  std::string out;
  // water tank
  double noise_coeff = 0.02;
  std::size_t anomaly_start = 0, anomaly_end = 0;  // 0,0 = scenario default
  std::string anomaly_kind = "blockage";
  double anomaly_magnitude = 0.75;
  // periodic toy
  std::size_t period = 30;
  double sd_low = 0.05, sd_high = 0.25, uniform_halfwidth = 0.2;
  // power demand
  std::size_t steps_per_day = 24;
  std::vector<std::size_t> holidays;
  double weekend_factor = 0.6;
  double seasonal_amplitude = 0.05;
  double noise_sd = 0.02;
};

int cmd_simulate(const SimulateOptions& opt) {
  SeededRng rng(opt.seed);
  TimeSeries series;
  if (opt.scenario == "watertank-normal" ||
      opt.scenario == "watertank-blockage25") {
    WaterTankParams params;
    params.noise_coeff = opt.noise_coeff;
    AnomalySchedule schedule;
    if (opt.scenario == "watertank-blockage25") {
      AnomalyEvent event;
      event.start = opt.anomaly_end > opt.anomaly_start ? opt.anomaly_start
                                                        : opt.steps * 3 / 5;
      event.end = opt.anomaly_end > opt.anomaly_start ? opt.anomaly_end
                                                      : opt.steps * 4 / 5;
      event.magnitude = opt.anomaly_magnitude;
      if (opt.anomaly_kind == "blockage") {
        event.kind = AnomalyEvent::Kind::outflow_blockage;
      } else if (opt.anomaly_kind == "sensor-offset") {
        event.kind = AnomalyEvent::Kind::sensor_offset;
      } else {
        event.kind = AnomalyEvent::Kind::sensor_scale;
      }
      schedule.push_back(event);
    }
    series = water_tank_simulate(params, opt.steps, schedule, rng);
  } else if (opt.scenario == "toy-fig3") {
    const std::size_t cycles = opt.steps / opt.period;
    if (cycles == 0) {
      throw CLI::ValidationError("--steps", "need at least one full period");
    }
    series = periodic_toy_generate(opt.period, cycles, rng, opt.sd_low,
                                   opt.sd_high, opt.uniform_halfwidth)
                 .series;
  } else {  // powerdemand-analog
    PowerDemandParams params;
    params.steps_per_day = opt.steps_per_day;
    params.days = opt.steps / opt.steps_per_day;
    if (params.days == 0) {
      throw CLI::ValidationError("--steps", "need at least one full day");
    }
    params.holiday_days = opt.holidays;
    params.weekend_factor = opt.weekend_factor;
    params.seasonal_amplitude = opt.seasonal_amplitude;
    params.noise_sd = opt.noise_sd;
    series = power_demand_generate(params, rng);
  }
  write_csv(series, opt.out);
  double fraction = 0.0;
  if (series.has_labels()) {
    std::size_t flagged = 0;
    for (auto v : series.labels) flagged += v;
    fraction = static_cast<double>(flagged) / static_cast<double>(series.length);
  }
  print_kv("steps", series.length);
  print_kv("anomaly_fraction", fraction);
  print_kv("out", opt.out);
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainOptions {
  std::string data;
  std::string out;
  std::string loss_out;
  std::string layers = "16";
  std::size_t head_hidden = 16;
  std::size_t t_max = 30;
  std::size_t forecast_shift = 0;
  TrainConfig tconfig;
  bool no_shuffle = false;
  bool tau_freeze_given = false;
  std::string resume;
};

int cmd_train(TrainOptions& opt) {
  if (!opt.tau_freeze_given) {
    opt.tconfig.tau_freeze_epochs = opt.tconfig.epochs / 5;
  } else if (opt.tconfig.tau_freeze_epochs > opt.tconfig.epochs) {
    throw CLI::ValidationError("--tau-freeze-epochs",
                               "must not exceed --epochs");
  }
  opt.tconfig.shuffle = !opt.no_shuffle;

  const TimeSeries data = read_csv(opt.data);
  TrainResult result;
  ModelConfig mconfig;
  if (!opt.resume.empty()) {
    const Checkpoint checkpoint = load_checkpoint(opt.resume);
    mconfig = checkpoint.model_config;
    result = train_resume(data, checkpoint);
  } else {
    mconfig.input_dim = data.input_dim();
    mconfig.output_dim = data.output_dim();
    mconfig.layer_sizes = parse_layer_list(opt.layers);
    mconfig.head_hidden = opt.head_hidden;
    mconfig.t_max = opt.t_max;
    mconfig.forecast_shift = opt.forecast_shift;
    mconfig.validate();
    result = train(data, mconfig, opt.tconfig);
  }

  save_model(opt.out, SavedModel{mconfig, result.params, result.normalization,
                                 opt.tconfig.seed});
  const std::string loss_path =
      opt.loss_out.empty() ? opt.out + ".loss.csv" : opt.loss_out;
  CsvTable losses;
  losses.header = {"epoch", "nll"};
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    losses.rows.push_back(
        {static_cast<double>(e), result.loss_history[e]});
  }
  write_table(losses, loss_path);

  print_kv("epochs", result.loss_history.size());
  if (!result.loss_history.empty()) {
    print_kv("initial_loss", result.loss_history.front());
    print_kv("final_loss", result.loss_history.back());
  }
  print_kv("model", opt.out);
  print_kv("loss_log", loss_path);
  return 0;
}

// ------------------------------------------------------------------ detect

struct DetectOptions {
  std::string model;
  std::string data;
  std::string out;
  std::string residuals_out;
  std::string states_out;
  double r = 4.0;
  double alpha = 0.0;
  bool r_given = false, alpha_given = false;
  double warn_r = 0.0, alarm_r = 0.0;
  bool dual = false;
  double beta = 0.1;
};

int cmd_detect(const DetectOptions& opt) {
  const SavedModel model = load_model(opt.model);
  const TimeSeries data = read_csv(opt.data);
  if (data.input_dim() != model.config.input_dim ||
      data.output_dim() != model.config.output_dim) {
    throw ShapeError("data dims (" + std::to_string(data.input_dim()) + " in, " +
                     std::to_string(data.output_dim()) +
                     " out) do not match the model");
  }

  const TimeSeries normalized = apply_normalization(data, model.normalization);
  std::vector<std::vector<double>> xs(normalized.length);
  for (std::size_t t = 0; t < normalized.length; ++t) {
    xs[t] = normalized.x_vec(t);
  }
  const SequenceResult run =
      forward_sequence(model.params, model.config, xs, zero_state(model.config));
  std::vector<Prediction> preds(run.predictions.size());
  for (std::size_t t = 0; t < run.predictions.size(); ++t) {
    preds[t] = denormalize_prediction(run.predictions[t], model.normalization);
  }
  const ResidualSeries res = residuals(data, preds);

  std::vector<std::uint8_t> flags, warn_flags, alarm_flags;
  std::optional<Threshold> threshold, warn_threshold, alarm_threshold;
  if (opt.dual) {
    warn_threshold = Threshold::from_r(opt.warn_r);
    alarm_threshold = Threshold::from_r(opt.alarm_r);
    warn_flags = classify(res, *warn_threshold);
    alarm_flags = classify(res, *alarm_threshold);
  } else {
    threshold = opt.alpha_given ? threshold_for_fp_rate(opt.alpha)
                                : Threshold::from_r(opt.r);
    flags = classify(res, *threshold);
  }

  // Report: metrics against labels when the data carries them.
  json report;
  auto build = [&](const std::vector<std::uint8_t>& f, const Threshold& thr) {
    if (data.has_labels()) {
      return metrics_json(evaluate(f, data.labels, opt.beta), thr);
    }
    DetectionReport empty;
    empty.beta = opt.beta;
    json j = metrics_json(empty, thr);
    j["tp"] = json(nullptr);
    j["fp"] = json(nullptr);
    j["tn"] = json(nullptr);
    j["fn"] = json(nullptr);
    return j;
  };
  if (opt.dual) {
    report["warn"] = build(warn_flags, *warn_threshold);
    report["alarm"] = build(alarm_flags, *alarm_threshold);
  } else {
    report = build(flags, *threshold);
  }
  write_text(opt.out, report.dump(2) + "\n");

  // Per-point residual trace.
  if (!opt.residuals_out.empty()) {
    CsvTable table;
    table.header = {"t"};
    for (const auto& name : data.y_names) table.header.push_back("yhat:" + name);
    for (const auto& name : data.y_names) table.header.push_back("sigma:" + name);
    for (const auto& name : data.y_names) table.header.push_back("r:" + name);
    if (opt.dual) {
      table.header.push_back("warn");
      table.header.push_back("alarm");
    } else {
      table.header.push_back("flag");
    }
    const std::size_t q = data.output_dim();
    for (std::size_t t = 0; t < data.length; ++t) {
      std::vector<double> row;
      row.push_back(data.time.empty() ? static_cast<double>(t) : data.time[t]);
      for (std::size_t c = 0; c < q; ++c) row.push_back(preds[t].y_hat[c]);
      for (std::size_t c = 0; c < q; ++c) row.push_back(preds[t].sigma[c]);
      for (std::size_t c = 0; c < q; ++c) row.push_back(res.at(t, c));
      if (opt.dual) {
        row.push_back(warn_flags[t]);
        row.push_back(alarm_flags[t]);
      } else {
        row.push_back(flags[t]);
      }
      table.rows.push_back(std::move(row));
    }
    write_table(table, opt.residuals_out);
  }

  // Long-term (cell) state trace for state-inspection plots.
  if (!opt.states_out.empty()) {
    CsvTable table;
    table.header = {"t"};
    for (std::size_t l = 0; l < model.config.layer_sizes.size(); ++l) {
      for (std::size_t u = 0; u < model.config.layer_sizes[l]; ++u) {
        table.header.push_back("c:" + std::to_string(l) + ":" +
                               std::to_string(u));
      }
    }
    for (std::size_t t = 0; t < run.states.size(); ++t) {
      std::vector<double> row;
      row.push_back(data.time.empty() ? static_cast<double>(t) : data.time[t]);
      for (const auto& cell : run.states[t].cell) {
        row.insert(row.end(), cell.begin(), cell.end());
      }
      table.rows.push_back(std::move(row));
    }
    write_table(table, opt.states_out);
  }

  print_kv("points", data.length);
  if (opt.dual) {
    const auto count = [](const std::vector<std::uint8_t>& f) {
      return static_cast<std::size_t>(std::count(f.begin(), f.end(), 1));
    };
    print_kv("warn_r", warn_threshold->r);
    print_kv("alarm_r", alarm_threshold->r);
    print_kv("warn_flagged", count(warn_flags));
    print_kv("alarm_flagged", count(alarm_flags));
  } else {
    const std::size_t flagged =
        static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1));
    print_kv("threshold_r", threshold->r);
    print_kv("threshold_alpha", threshold->alpha);
    print_kv("flagged", flagged);
    print_kv("fraction",
             data.length ? static_cast<double>(flagged) /
                               static_cast<double>(data.length)
                         : 0.0);
  }
  print_kv("report", opt.out);
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::string pred;
  std::string truth;
  double beta = 0.1;
  std::string out;
  std::string level = "alarm";  // flag column for dual-threshold residual files
};

int cmd_evaluate(const EvaluateOptions& opt) {
  DetectionReport report;
  std::optional<Threshold> threshold;
  if (opt.pred.size() > 5 &&
      opt.pred.compare(opt.pred.size() - 5, 5, ".json") == 0) {
    std::ifstream file(opt.pred, std::ios::binary);
    if (!file) throw IoError("cannot open " + opt.pred);
    json doc;
    try {
      file >> doc;
    } catch (const json::exception& e) {
      throw IoError("malformed report " + opt.pred + ": " + e.what());
    }
    if (doc.contains(opt.level)) doc = doc[opt.level];  // dual-mode report
    try {
      report.tp = doc.at("tp").get<std::size_t>();
      report.fp = doc.at("fp").get<std::size_t>();
      report.tn = doc.at("tn").get<std::size_t>();
      report.fn = doc.at("fn").get<std::size_t>();
      if (doc.contains("threshold_r") && doc["threshold_r"].is_number()) {
        threshold = Threshold::from_r(doc["threshold_r"].get<double>());
      }
    } catch (const json::exception& e) {
      throw IoError("report " + opt.pred + ": " + e.what());
    }
    // Rebuild the metrics from the stored counts at the requested beta.
    std::vector<std::uint8_t> predicted, truth;
    predicted.reserve(report.tp + report.fp + report.tn + report.fn);
    for (std::size_t i = 0; i < report.tp; ++i) { predicted.push_back(1); truth.push_back(1); }
    for (std::size_t i = 0; i < report.fp; ++i) { predicted.push_back(1); truth.push_back(0); }
    for (std::size_t i = 0; i < report.fn; ++i) { predicted.push_back(0); truth.push_back(1); }
    for (std::size_t i = 0; i < report.tn; ++i) { predicted.push_back(0); truth.push_back(0); }
    report = evaluate(predicted, truth, opt.beta);
  } else {
    const CsvTable table = read_table(opt.pred);
    std::size_t flag_col;
    try {
      flag_col = table.column(opt.level);
    } catch (const ContractError&) {
      flag_col = table.column("flag");
    }
    std::vector<std::uint8_t> predicted;
    predicted.reserve(table.rows.size());
    for (const auto& row : table.rows) {
      predicted.push_back(row[flag_col] != 0.0 ? 1 : 0);
    }
    const TimeSeries truth_series = read_csv(opt.truth);
    if (!truth_series.has_labels()) {
      throw ContractError("truth data " + opt.truth + " has no label column");
    }
    report = evaluate(predicted, truth_series.labels, opt.beta);
  }

  print_kv("precision", metric_text(report.precision));
  print_kv("recall", metric_text(report.recall));
  print_kv("f_beta", metric_text(report.f_beta));
  print_kv("beta", report.beta);
  if (!opt.out.empty()) {
    write_text(opt.out, metrics_json(report, threshold).dump(2) + "\n");
    print_kv("metrics", opt.out);
  }
  return 0;
}

// --------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::string layers = "8,8";
  std::size_t input_dim = 2;
  std::size_t output_dim = 2;
  std::size_t head_hidden = 8;
  std::size_t t_max = 10;
  double tolerance = 1e-4;
  double fd_step = 1e-5;
  bool corrupt = false;  // test hook: perturb one analytic gradient entry
};

int cmd_gradcheck(const GradcheckOptions& opt) {
  ModelConfig config;
  config.input_dim = opt.input_dim;
  config.output_dim = opt.output_dim;
  config.layer_sizes = parse_layer_list(opt.layers);
  config.head_hidden = opt.head_hidden;
  config.t_max = opt.t_max;
  config.validate();

  SeededRng rng(opt.seed);
  ModelParameters params = init_parameters(config, rng);
  std::vector<std::vector<double>> xs(config.t_max), ys(config.t_max);
  for (std::size_t t = 0; t < config.t_max; ++t) {
    xs[t].resize(config.input_dim);
    ys[t].resize(config.output_dim);
    for (auto& v : xs[t]) v = rng.normal(0.0, 1.0);
    for (auto& v : ys[t]) v = rng.normal(0.0, 1.0);
  }
  const LstmState initial = zero_state(config);

  BackwardResult analytic = backward_tbptt(params, config, xs, ys, initial);
  auto grad_views = parameter_views(analytic.gradients);
  if (opt.corrupt && !grad_views.empty()) {
    grad_views[0].data[0] += 0.5;
  }

  const auto window_loss = [&](const ModelParameters& p) {
    const SequenceResult run = forward_sequence(p, config, xs, initial);
    double loss = 0.0;
    for (std::size_t t = 0; t < ys.size(); ++t) {
      loss += nll_loss(ys[t], run.predictions[t]);
    }
    return loss;
  };

  double max_rel = 0.0;
  std::string worst = "none";
  auto param_views = parameter_views(params);
  for (std::size_t i = 0; i < param_views.size(); ++i) {
    for (std::size_t k = 0; k < param_views[i].size; ++k) {
      double& value = param_views[i].data[k];
      const double saved = value;
      value = saved + opt.fd_step;
      const double up = window_loss(params);
      value = saved - opt.fd_step;
      const double down = window_loss(params);
      value = saved;
      const double numeric = (up - down) / (2.0 * opt.fd_step);
      const double a = grad_views[i].data[k];
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-2});
      if (rel > max_rel) {
        max_rel = rel;
        worst = param_views[i].name + "[" + std::to_string(k) + "]";
      }
    }
  }

  print_kv("max_rel_err", max_rel);
  print_kv("worst", worst);
  print_kv("tolerance", opt.tolerance);
  if (!(max_rel < opt.tolerance)) {
    std::cerr << "gradient check failed: max relative error "
              << format_double(max_rel) << " at " << worst << "\n";
    return 5;
  }
  return 0;
}

// ------------------------------------------------------------------ report

struct ReportOptions {
  std::string residuals;
  std::string states;
  std::string out_dir;
  std::size_t bins = 60;
  double half_range = 6.0;
};

int cmd_report(const ReportOptions& opt) {
  const CsvTable table = read_table(opt.residuals);
  std::vector<std::size_t> r_cols;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j].rfind("r:", 0) == 0) r_cols.push_back(j);
  }
  if (r_cols.empty()) {
    throw ContractError("residual file " + opt.residuals +
                        " has no r:<channel> columns");
  }
  std::filesystem::create_directories(opt.out_dir);

  ResidualSeries res;
  res.length = table.rows.size();
  res.channels = r_cols.size();
  for (const auto& row : table.rows) {
    for (std::size_t j : r_cols) res.values.push_back(row[j]);
  }

  CsvTable hist;
  hist.header = {"bin_left", "bin_right", "count", "normal_density"};
  if (res.length > 0) {
    const CalibrationSummary summary =
        residual_calibration(res, opt.bins, opt.half_range);
    for (const auto& bin : summary.bins) {
      hist.rows.push_back({bin.left, bin.right,
                           static_cast<double>(bin.count),
                           bin.normal_density});
    }
    print_kv("within_1sigma", summary.within_1);
    print_kv("within_2sigma", summary.within_2);
    print_kv("within_3sigma", summary.within_3);
  }
  const std::string hist_path = opt.out_dir + "/histogram.csv";
  write_table(hist, hist_path);

  CsvTable trace;
  trace.header.push_back("t");
  for (std::size_t j : r_cols) trace.header.push_back(table.header[j]);
  const std::size_t t_col = table.column("t");
  for (const auto& row : table.rows) {
    std::vector<double> out_row{row[t_col]};
    for (std::size_t j : r_cols) out_row.push_back(row[j]);
    trace.rows.push_back(std::move(out_row));
  }
  const std::string trace_path = opt.out_dir + "/residual_trace.csv";
  write_table(trace, trace_path);

  if (!opt.states.empty()) {
    const CsvTable states = read_table(opt.states);
    write_table(states, opt.out_dir + "/state_trace.csv");
  }

  print_kv("histogram", hist_path);
  print_kv("residual_trace", trace_path);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"State-aware anomaly detection for cyber-physical time series"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<ConfigJson>());
  app.set_config("--config", "", "JSON config file (flags take precedence)");

  SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate a scenario time series as labeled CSV");
  simulate
      ->add_option("--scenario", sim.scenario, "Scenario preset")
      ->required()
      ->check(CLI::IsMember({"watertank-normal", "watertank-blockage25",
                             "toy-fig3", "powerdemand-analog"}));
  simulate->add_option("--steps", sim.steps, "Number of steps")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output CSV path")->required();
  simulate->add_option("--noise-coeff", sim.noise_coeff,
                       "Water tank noise sd per unit outflow")
      ->capture_default_str();
  simulate->add_option("--anomaly-start", sim.anomaly_start,
                       "Anomaly window start step")
      ->capture_default_str();
  simulate->add_option("--anomaly-end", sim.anomaly_end,
                       "Anomaly window end step (exclusive)")
      ->capture_default_str();
  simulate->add_option("--anomaly-kind", sim.anomaly_kind, "Anomaly kind")
      ->capture_default_str()
      ->check(CLI::IsMember({"blockage", "sensor-offset", "sensor-scale"}));
  simulate->add_option("--anomaly-magnitude", sim.anomaly_magnitude,
                       "Anomaly magnitude (blockage 0.75 = 25% flux cut)")
      ->capture_default_str();
  simulate->add_option("--period", sim.period, "Toy signal period")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--sd-low", sim.sd_low, "Toy low-noise domain sd")
      ->capture_default_str();
  simulate->add_option("--sd-high", sim.sd_high, "Toy high-noise domain sd")
      ->capture_default_str();
  simulate->add_option("--uniform-halfwidth", sim.uniform_halfwidth,
                       "Toy uniform noise half-width")
      ->capture_default_str();
  simulate->add_option("--steps-per-day", sim.steps_per_day,
                       "Power demand steps per day")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--holidays", sim.holidays,
                       "Power demand holiday day indices");
  simulate->add_option("--weekend-factor", sim.weekend_factor,
                       "Power demand weekend scaling")
      ->capture_default_str();
  simulate->add_option("--seasonal-amplitude", sim.seasonal_amplitude,
                       "Power demand seasonal modulation amplitude")
      ->capture_default_str();
  simulate->add_option("--noise-sd", sim.noise_sd, "Power demand noise sd")
      ->capture_default_str();

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on CSV data");
  train_cmd->add_option("--data", tr.data, "Training CSV")->required();
  train_cmd->add_option("--out", tr.out, "Output model path")->required();
  train_cmd->add_option("--loss-out", tr.loss_out,
                        "Per-epoch loss CSV (default <out>.loss.csv)");
  train_cmd->add_option("--layers", tr.layers,
                        "Comma-separated hidden layer sizes (1-5 layers)")
      ->capture_default_str();
  train_cmd->add_option("--head-hidden", tr.head_hidden,
                        "Units in the tanh head layer")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--t-max", tr.t_max, "Truncation window length")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--forecast-shift", tr.forecast_shift,
                        "Predict y this many steps ahead")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tr.tconfig.epochs, "Training epochs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch-size", tr.tconfig.batch_size, "Batch lanes")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tr.tconfig.learning_rate, "Learning rate")
      ->capture_default_str();
  train_cmd->add_option("--beta1", tr.tconfig.adam_beta1, "Adam beta1")
      ->capture_default_str();
  train_cmd->add_option("--beta2", tr.tconfig.adam_beta2, "Adam beta2")
      ->capture_default_str();
  train_cmd->add_option("--eps", tr.tconfig.adam_eps, "Adam epsilon")
      ->capture_default_str();
  train_cmd
      ->add_option("--tau-freeze-epochs", tr.tconfig.tau_freeze_epochs,
                   "Epochs with the tau head frozen (default 20% of epochs)")
      ->each([&tr](const std::string&) { tr.tau_freeze_given = true; });
  train_cmd->add_option("--seed", tr.tconfig.seed, "RNG seed")
      ->capture_default_str();
  train_cmd->add_flag("--no-shuffle", tr.no_shuffle,
                      "Disable per-epoch window offsets");
  train_cmd->add_option("--clip-norm", tr.tconfig.clip_norm,
                        "Global gradient norm cap (<= 0 disables)")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tr.tconfig.checkpoint_every,
                        "Write a checkpoint every N epochs (0 = off)")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint", tr.tconfig.checkpoint_path,
                        "Checkpoint path");
  train_cmd->add_option("--resume", tr.resume,
                        "Resume from a checkpoint (other model flags ignored)");

  DetectOptions det;
  CLI::App* detect = app.add_subcommand(
      "detect", "Score data against a model and emit a report");
  detect->add_option("--model", det.model, "Model file")->required();
  detect->add_option("--data", det.data, "Data CSV")->required();
  detect->add_option("--out", det.out, "Report JSON path")->required();
  detect->add_option("--residuals-out", det.residuals_out,
                     "Per-point residual CSV path");
  detect->add_option("--states-out", det.states_out,
                     "Long-term state trace CSV path");
  CLI::Option* opt_r =
      detect->add_option("--r", det.r, "Residual magnitude threshold")
          ->capture_default_str()
          ->each([&det](const std::string&) { det.r_given = true; });
  CLI::Option* opt_alpha =
      detect
          ->add_option("--alpha", det.alpha,
                       "Expected false-positive rate (sets the threshold)")
          ->each([&det](const std::string&) { det.alpha_given = true; });
  opt_r->excludes(opt_alpha);
  opt_alpha->excludes(opt_r);
  CLI::Option* opt_warn =
      detect->add_option("--warn-r", det.warn_r, "Dual mode: warning level")
          ->each([&det](const std::string&) { det.dual = true; });
  CLI::Option* opt_alarm =
      detect->add_option("--alarm-r", det.alarm_r, "Dual mode: alarm level");
  opt_warn->needs(opt_alarm);
  opt_alarm->needs(opt_warn);
  opt_warn->excludes(opt_r);
  opt_warn->excludes(opt_alpha);
  detect->add_option("--beta", det.beta, "F_beta weighting for the report")
      ->capture_default_str();

  EvaluateOptions ev;
  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "Precision/recall/F_beta from a report or residual CSV");
  evaluate_cmd
      ->add_option("--pred", ev.pred, "Report JSON or residual CSV path")
      ->required();
  evaluate_cmd->add_option("--truth", ev.truth,
                           "Labeled data CSV (required for residual input)");
  evaluate_cmd->add_option("--beta", ev.beta, "F_beta weighting")
      ->capture_default_str();
  evaluate_cmd->add_option("--out", ev.out, "Metrics JSON path");
  evaluate_cmd->add_option("--level", ev.level,
                           "Flag set to score in dual-threshold files")
      ->capture_default_str()
      ->check(CLI::IsMember({"warn", "alarm"}));

  GradcheckOptions gc;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Compare analytic gradients against finite differences");
  gradcheck->add_option("--seed", gc.seed, "RNG seed")->capture_default_str();
  gradcheck->add_option("--layers", gc.layers, "Hidden layer sizes")
      ->capture_default_str();
  gradcheck->add_option("--input-dim", gc.input_dim, "Input dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--output-dim", gc.output_dim, "Output dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--head-hidden", gc.head_hidden, "Head layer units")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--t-max", gc.t_max, "Window length")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", gc.tolerance, "Max relative error")
      ->capture_default_str();
  gradcheck->add_option("--fd-step", gc.fd_step, "Finite difference step")
      ->capture_default_str();
  gradcheck->add_flag("--corrupt", gc.corrupt,
                      "Perturb one gradient entry (negative control)");

  ReportOptions rep;
  CLI::App* report_cmd = app.add_subcommand(
      "report", "Emit plot-ready CSVs from a residual trace");
  report_cmd->add_option("--residuals", rep.residuals, "Residual CSV")
      ->required();
  report_cmd->add_option("--states", rep.states, "State trace CSV to include");
  report_cmd->add_option("--out-dir", rep.out_dir, "Output directory")
      ->required();
  report_cmd->add_option("--bins", rep.bins, "Histogram bin count")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  report_cmd->add_option("--half-range", rep.half_range,
                         "Histogram half range in sigma")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return cmd_simulate(sim);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (detect->parsed()) return cmd_detect(det);
    if (evaluate_cmd->parsed()) return cmd_evaluate(ev);
    if (gradcheck->parsed()) return cmd_gradcheck(gc);
    if (report_cmd->parsed()) return cmd_report(rep);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cpsdet
