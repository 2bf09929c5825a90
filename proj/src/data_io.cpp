#include "cpsdet/data_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "cpsdet/errors.hpp"
#include "src/model_json.hpp"

namespace cpsdet {

namespace {

using nlohmann::json;

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  double value{};
  const char* first = cell.data();
  const char* last = first + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("cell '" + std::string(cell) + "' is not a number", row,
                     col);
  }
  if (!std::isfinite(value)) {
    throw ParseError("non-finite value", row, col);
  }
  return value;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = pos + 1;
  }
  return lines;
}

ColumnSchema schema_from_header(const std::vector<std::string_view>& cells) {
  ColumnSchema schema;
  for (std::size_t j = 0; j < cells.size(); ++j) {
    const std::string_view cell = cells[j];
    ColumnSchema::Column col;
    if (cell == "t") {
      col = {ColumnSchema::Role::time, "t"};
    } else if (cell == "label") {
      col = {ColumnSchema::Role::label, "label"};
    } else if (cell.substr(0, 2) == "x:" && cell.size() > 2) {
      col = {ColumnSchema::Role::input, std::string(cell.substr(2))};
    } else if (cell.substr(0, 2) == "y:" && cell.size() > 2) {
      col = {ColumnSchema::Role::output, std::string(cell.substr(2))};
    } else {
      throw ParseError("unknown column '" + std::string(cell) +
                           "' (expected t, x:<name>, y:<name> or label)",
                       1, j + 1);
    }
    schema.columns.push_back(std::move(col));
  }
  return schema;
}

}  // namespace

void TimeSeries::validate() const {
  const std::size_t p = input_dim();
  const std::size_t q = output_dim();
  if (p == 0 || q == 0) {
    throw ContractError("time series needs at least one input and one output channel");
  }
  if (xs.size() != length * p || ys.size() != length * q) {
    throw ContractError("time series row counts do not match the channel lists");
  }
  if (!labels.empty() && labels.size() != length) {
    throw ContractError("label count does not match the series length");
  }
  if (!time.empty() && time.size() != length) {
    throw ContractError("time column length does not match the series length");
  }
  std::set<std::string> names(x_names.begin(), x_names.end());
  names.insert(y_names.begin(), y_names.end());
  if (names.size() != p + q) {
    throw ContractError("channel names must be unique");
  }
  for (double v : xs) {
    if (!std::isfinite(v)) throw ContractError("non-finite input value");
  }
  for (double v : ys) {
    if (!std::isfinite(v)) throw ContractError("non-finite output value");
  }
  for (std::size_t t = 1; t < time.size(); ++t) {
    if (!(time[t] > time[t - 1])) {
      throw ContractError("time column must be strictly increasing");
    }
  }
  for (std::uint8_t v : labels) {
    if (v > 1) throw ContractError("labels must be 0 or 1");
  }
}

void ColumnSchema::validate() const {
  std::size_t times = 0, inputs = 0, outputs = 0, label_cols = 0;
  for (const Column& col : columns) {
    switch (col.role) {
      case Role::time: ++times; break;
      case Role::input: ++inputs; break;
      case Role::output: ++outputs; break;
      case Role::label: ++label_cols; break;
    }
  }
  if (times != 1) throw ContractError("schema needs exactly one time column");
  if (inputs == 0 || outputs == 0) {
    throw ContractError("schema needs at least one input and one output column");
  }
  if (label_cols > 1) throw ContractError("schema allows at most one label column");
}

TimeSeries read_csv(const std::string& path,
                    const std::optional<ColumnSchema>& schema) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    throw ParseError("missing header row in " + path, 1, 1);
  }
  const auto header_cells = split(lines[0], ',');
  ColumnSchema cols = schema ? *schema : schema_from_header(header_cells);
  cols.validate();
  if (cols.columns.size() != header_cells.size()) {
    throw ParseError("schema has " + std::to_string(cols.columns.size()) +
                         " columns but the header has " +
                         std::to_string(header_cells.size()),
                     1, 1);
  }

  TimeSeries series;
  std::size_t time_col = 0;
  std::optional<std::size_t> label_col;
  std::vector<std::size_t> x_cols, y_cols;
  for (std::size_t j = 0; j < cols.columns.size(); ++j) {
    switch (cols.columns[j].role) {
      case ColumnSchema::Role::time:
        time_col = j;
        break;
      case ColumnSchema::Role::input:
        x_cols.push_back(j);
        series.x_names.push_back(cols.columns[j].name);
        break;
      case ColumnSchema::Role::output:
        y_cols.push_back(j);
        series.y_names.push_back(cols.columns[j].name);
        break;
      case ColumnSchema::Role::label:
        label_col = j;
        break;
    }
  }

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t row = i + 1;
    const auto cells = split(lines[i], ',');
    if (cells.size() != cols.columns.size()) {
      throw ParseError("expected " + std::to_string(cols.columns.size()) +
                           " columns, found " + std::to_string(cells.size()),
                       row, cells.size() + 1);
    }
    const double t = parse_cell(cells[time_col], row, time_col + 1);
    if (!series.time.empty() && !(t > series.time.back())) {
      throw ParseError("time column must be strictly increasing", row,
                       time_col + 1);
    }
    series.time.push_back(t);
    for (std::size_t j : x_cols) {
      series.xs.push_back(parse_cell(cells[j], row, j + 1));
    }
    for (std::size_t j : y_cols) {
      series.ys.push_back(parse_cell(cells[j], row, j + 1));
    }
    if (label_col) {
      const double v = parse_cell(cells[*label_col], row, *label_col + 1);
      if (v != 0.0 && v != 1.0) {
        throw ParseError("label must be 0 or 1", row, *label_col + 1);
      }
      series.labels.push_back(v == 1.0 ? 1 : 0);
    }
    ++series.length;
  }
  series.validate();
  return series;
}

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void write_csv(const TimeSeries& series, const std::string& path) {
  series.validate();
  std::string out = "t";
  for (const auto& name : series.x_names) out += ",x:" + name;
  for (const auto& name : series.y_names) out += ",y:" + name;
  if (series.has_labels()) out += ",label";
  out += '\n';
  for (std::size_t t = 0; t < series.length; ++t) {
    out += format_double(series.time.empty() ? static_cast<double>(t)
                                             : series.time[t]);
    for (double v : series.x_row(t)) out += ',' + format_double(v);
    for (double v : series.y_row(t)) out += ',' + format_double(v);
    if (series.has_labels()) out += series.labels[t] ? ",1" : ",0";
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file || !(file << out)) {
    throw IoError("cannot write " + path);
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw ContractError("table has no column '" + name + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_table(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    throw ParseError("missing header row in " + path, 1, 1);
  }
  CsvTable table;
  for (auto cell : split(lines[0], ',')) table.header.emplace_back(cell);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) +
                           " columns, found " + std::to_string(cells.size()),
                       i + 1, cells.size() + 1);
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      row.push_back(parse_cell(cells[j], i + 1, j + 1));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_table(const CsvTable& table, const std::string& path) {
  std::string out;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    out += (j == 0 ? "" : ",") + table.header[j];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out += ',';
      out += format_double(row[j]);
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file || !(file << out)) {
    throw IoError("cannot write " + path);
  }
}

void save_model(const std::string& path, const SavedModel& model) {
  json doc;
  doc["format_version"] = 1;
  doc["seed"] = model.seed;
  doc["config"] = detail::config_to_json(model.config);
  doc["normalization"] = detail::normalization_to_json(model.normalization);
  doc["parameters"] = detail::parameters_to_json(model.params);
  std::ofstream file(path, std::ios::binary);
  if (!file || !(file << doc.dump(2) << '\n')) {
    throw IoError("cannot write " + path);
  }
}

SavedModel load_model(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw IoError("cannot open " + path);
  }
  json doc;
  try {
    file >> doc;
  } catch (const json::exception& e) {
    throw IoError("malformed model file " + path + ": " + e.what());
  }
  if (!doc.contains("format_version") || !doc["format_version"].is_number() ||
      doc["format_version"].get<int>() != 1) {
    throw IoError("model file " + path + ": unsupported format_version");
  }
  SavedModel model;
  try {
    model.seed = doc.at("seed").get<std::uint64_t>();
    model.config = detail::config_from_json(doc.at("config"));
  } catch (const json::exception& e) {
    throw IoError("model file " + path + ": " + e.what());
  }
  model.config.validate();
  model.params = make_zero_parameters(model.config);
  detail::parameters_from_json(doc.at("parameters"), model.params);
  model.normalization = detail::normalization_from_json(
      doc.at("normalization"), model.config.input_dim,
      model.config.output_dim);
  return model;
}

namespace detail {

json config_to_json(const ModelConfig& config) {
  json j;
  j["input_dim"] = config.input_dim;
  j["output_dim"] = config.output_dim;
  j["layer_sizes"] = config.layer_sizes;
  j["head_hidden"] = config.head_hidden;
  j["t_max"] = config.t_max;
  j["forecast_shift"] = config.forecast_shift;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig config;
  config.input_dim = j.at("input_dim").get<std::size_t>();
  config.output_dim = j.at("output_dim").get<std::size_t>();
  config.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  config.head_hidden = j.at("head_hidden").get<std::size_t>();
  config.t_max = j.at("t_max").get<std::size_t>();
  config.forecast_shift = j.at("forecast_shift").get<std::size_t>();
  return config;
}

json parameters_to_json(const ModelParameters& params) {
  json j;
  for (const ConstParameterView& view : parameter_views(params)) {
    j[view.name] = std::vector<double>(view.data, view.data + view.size);
  }
  return j;
}

void parameters_from_json(const json& j, ModelParameters& params) {
  std::set<std::string> seen;
  for (const ParameterView& view : parameter_views(params)) {
    if (!j.contains(view.name) || !j[view.name].is_array()) {
      throw IoError("model file is missing parameter " + view.name);
    }
    const auto values = j[view.name].get<std::vector<double>>();
    if (values.size() != view.size) {
      throw IoError("parameter " + view.name + " has length " +
                    std::to_string(values.size()) + ", expected " +
                    std::to_string(view.size));
    }
    std::copy(values.begin(), values.end(), view.data);
    seen.insert(view.name);
  }
  for (const auto& [key, value] : j.items()) {
    if (!seen.count(key)) {
      throw IoError("model file has unexpected parameter " + key);
    }
  }
}

json normalization_to_json(const NormalizationSpec& norm) {
  json j;
  j["x_mean"] = norm.x_mean;
  j["x_scale"] = norm.x_scale;
  j["y_mean"] = norm.y_mean;
  j["y_scale"] = norm.y_scale;
  return j;
}

NormalizationSpec normalization_from_json(const json& j, std::size_t p,
                                          std::size_t q) {
  NormalizationSpec norm;
  norm.x_mean = j.at("x_mean").get<std::vector<double>>();
  norm.x_scale = j.at("x_scale").get<std::vector<double>>();
  norm.y_mean = j.at("y_mean").get<std::vector<double>>();
  norm.y_scale = j.at("y_scale").get<std::vector<double>>();
  if (norm.x_mean.size() != p || norm.x_scale.size() != p) {
    throw IoError("normalization x arrays do not match input_dim");
  }
  if (norm.y_mean.size() != q || norm.y_scale.size() != q) {
    throw IoError("normalization y arrays do not match output_dim");
  }
  return norm;
}

}  // namespace detail

}  // namespace cpsdet
