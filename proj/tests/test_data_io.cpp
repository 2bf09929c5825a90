#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "cpsdet/data_io.hpp"
#include "cpsdet/errors.hpp"
#include "cpsdet/rng.hpp"
#include "cpsdet/simulators.hpp"

using namespace cpsdet;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

TimeSeries random_series(SeededRng& rng, std::size_t length) {
  TimeSeries s;
  s.length = length;
  s.x_names = {"u", "v"};
  s.y_names = {"w"};
  for (std::size_t t = 0; t < length; ++t) {
    s.time.push_back(static_cast<double>(t) * 0.5);
    s.xs.push_back(rng.normal(0.0, 1e3));
    s.xs.push_back(rng.normal(0.0, 1e-7));
    s.ys.push_back(rng.normal(0.0, 1.0));
    s.labels.push_back(rng.uniform() < 0.2 ? 1 : 0);
  }
  return s;
}

}  // namespace

TEST_CASE("schema inference from header prefixes") {
  const std::string path = temp_path("cpsdet_io_basic.csv");
  write_file(path, "t,x:valve,y:qout,label\n0,1,0.5,0\n1,0,0.25,1\n2,0,0.125,0\n");
  const TimeSeries s = read_csv(path);
  CHECK(s.length == 3);
  CHECK(s.input_dim() == 1);
  CHECK(s.output_dim() == 1);
  CHECK(s.x_names[0] == "valve");
  CHECK(s.y_names[0] == "qout");
  CHECK(s.labels == std::vector<std::uint8_t>{0, 1, 0});
  CHECK(s.ys[1] == 0.25);
  std::filesystem::remove(path);
}

TEST_CASE("write then read round-trips bit-identically") {
  SeededRng rng(17);
  const TimeSeries original = random_series(rng, 64);
  const std::string path = temp_path("cpsdet_io_roundtrip.csv");
  write_csv(original, path);
  const TimeSeries copy = read_csv(path);
  CHECK(copy.length == original.length);
  CHECK(copy.xs == original.xs);
  CHECK(copy.ys == original.ys);
  CHECK(copy.time == original.time);
  CHECK(copy.labels == original.labels);
  CHECK(copy.x_names == original.x_names);

  // writing the re-read series reproduces the file byte for byte
  const std::string again = temp_path("cpsdet_io_roundtrip2.csv");
  write_csv(copy, again);
  CHECK(read_file(path) == read_file(again));
  std::filesystem::remove(path);
  std::filesystem::remove(again);
}

TEST_CASE("generator output survives the CSV round trip exactly") {
  WaterTankParams params;
  SeededRng rng(23);
  const TimeSeries ts = water_tank_simulate(
      params, 400, {{100, 160, AnomalyEvent::Kind::outflow_blockage, 0.75}},
      rng);
  const std::string path = temp_path("cpsdet_io_tank.csv");
  write_csv(ts, path);
  const TimeSeries copy = read_csv(path);
  CHECK(copy.xs == ts.xs);
  CHECK(copy.ys == ts.ys);
  CHECK(copy.labels == ts.labels);
  std::filesystem::remove(path);
}

TEST_CASE("write_csv emits header-only files for empty series") {
  TimeSeries s;
  s.x_names = {"a"};
  s.y_names = {"b"};
  const std::string path = temp_path("cpsdet_io_empty.csv");
  write_csv(s, path);
  CHECK(read_file(path) == "t,x:a,y:b\n");
  const TimeSeries copy = read_csv(path);
  CHECK(copy.length == 0);
  CHECK(!copy.has_labels());
  std::filesystem::remove(path);
}

TEST_CASE("unlabeled series omit the label column") {
  TimeSeries s;
  s.length = 2;
  s.x_names = {"a"};
  s.y_names = {"b"};
  s.time = {0.0, 1.0};
  s.xs = {1.0, 2.0};
  s.ys = {3.0, 4.0};
  const std::string path = temp_path("cpsdet_io_nolabel.csv");
  write_csv(s, path);
  CHECK(read_file(path).find("label") == std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("explicit column schema overrides header names") {
  const std::string path = temp_path("cpsdet_io_schema.csv");
  write_file(path, "time,cmd,reading\n0,1,0.5\n1,0,0.6\n");
  ColumnSchema schema;
  schema.columns = {{ColumnSchema::Role::time, "t"},
                    {ColumnSchema::Role::input, "cmd"},
                    {ColumnSchema::Role::output, "reading"}};
  const TimeSeries s = read_csv(path, schema);
  CHECK(s.length == 2);
  CHECK(s.x_names[0] == "cmd");
  CHECK(s.y_names[0] == "reading");
  std::filesystem::remove(path);
}

TEST_CASE("parse errors carry row and column locations") {
  const std::string path = temp_path("cpsdet_io_bad.csv");

  SUBCASE("unknown column prefix") {
    write_file(path, "t,x:a,z:b\n0,1,2\n");
    CHECK_THROWS_AS(read_csv(path), ParseError);
    try {
      read_csv(path);
    } catch (const ParseError& e) {
      CHECK(e.row == 1);
      CHECK(e.column == 3);
    }
  }

  SUBCASE("non-numeric cell") {
    write_file(path, "t,x:a,y:b\n0,1,2\n1,oops,3\n");
    try {
      read_csv(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row == 3);
      CHECK(e.column == 2);
    }
  }

  SUBCASE("non-finite cell") {
    write_file(path, "t,x:a,y:b\n0,inf,2\n");
    CHECK_THROWS_AS(read_csv(path), ParseError);
  }

  SUBCASE("non-monotone time") {
    write_file(path, "t,x:a,y:b\n0,1,2\n0,1,2\n");
    try {
      read_csv(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row == 3);
      CHECK(e.column == 1);
    }
  }

  SUBCASE("ragged row") {
    write_file(path, "t,x:a,y:b\n0,1\n");
    CHECK_THROWS_AS(read_csv(path), ParseError);
  }

  SUBCASE("non-binary label") {
    write_file(path, "t,x:a,y:b,label\n0,1,2,0.5\n");
    CHECK_THROWS_AS(read_csv(path), ParseError);
  }

  SUBCASE("missing header") {
    write_file(path, "");
    CHECK_THROWS_AS(read_csv(path), ParseError);
  }

  SUBCASE("missing output column") {
    write_file(path, "t,x:a\n0,1\n");
    CHECK_THROWS_AS(read_csv(path), ContractError);
  }

  std::filesystem::remove(path);
}

TEST_CASE("read_csv rejects a missing file with the path in the message") {
  try {
    read_csv("/nonexistent/cpsdet.csv");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/cpsdet.csv") !=
          std::string::npos);
  }
}

TEST_CASE("model files save, load and re-save byte-identically") {
  ModelConfig config;
  config.input_dim = 2;
  config.output_dim = 3;
  config.layer_sizes = {5, 4};
  config.head_hidden = 6;
  config.t_max = 12;
  SeededRng rng(31);
  ModelParameters params = init_parameters(config, rng);
  NormalizationSpec norm;
  norm.x_mean = {0.5, -2.0};
  norm.x_scale = {1.0, 3.5};
  norm.y_mean = {0.0, 1.0, -1.0};
  norm.y_scale = {1.0, 2.0, 0.25};

  const std::string path_a = temp_path("cpsdet_model_a.json");
  const std::string path_b = temp_path("cpsdet_model_b.json");
  save_model(path_a, SavedModel{config, params, norm, 31});
  const SavedModel loaded = load_model(path_a);
  CHECK(loaded.seed == 31);
  CHECK(loaded.config.layer_sizes == config.layer_sizes);
  save_model(path_b, loaded);
  CHECK(read_file(path_a) == read_file(path_b));

  // the loaded model predicts bit-identically
  const std::vector<std::vector<double>> xs(7, std::vector<double>{0.3, -0.9});
  const SequenceResult a =
      forward_sequence(params, config, xs, zero_state(config));
  const SequenceResult b =
      forward_sequence(loaded.params, loaded.config, xs, zero_state(config));
  for (std::size_t t = 0; t < xs.size(); ++t) {
    CHECK(a.predictions[t].y_hat == b.predictions[t].y_hat);
    CHECK(a.predictions[t].tau == b.predictions[t].tau);
  }
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
}

TEST_CASE("corrupted model arrays are reported by name") {
  ModelConfig config;
  config.layer_sizes = {3};
  config.head_hidden = 3;
  SeededRng rng(5);
  const ModelParameters params = init_parameters(config, rng);
  NormalizationSpec norm;
  norm.x_mean = {0.0};
  norm.x_scale = {1.0};
  norm.y_mean = {0.0};
  norm.y_scale = {1.0};
  const std::string path = temp_path("cpsdet_model_bad.json");
  save_model(path, SavedModel{config, params, norm, 1});

  std::string text = read_file(path);
  // drop one value from the first gate bias array
  const std::string needle = "\"layer0.input_gate.b\": [";
  const auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  const auto comma = text.find(',', pos + needle.size());
  text.erase(pos + needle.size(), comma - (pos + needle.size()) + 1);
  write_file(path, text);

  try {
    load_model(path);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("layer0.input_gate.b") !=
          std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("model files with a wrong version are rejected") {
  const std::string path = temp_path("cpsdet_model_version.json");
  write_file(path, "{\"format_version\": 2}");
  CHECK_THROWS_AS(load_model(path), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("csv tables round-trip numeric content") {
  CsvTable table;
  table.header = {"t", "r:a", "flag"};
  table.rows = {{0.0, -1.5, 0.0}, {1.0, 2.25, 1.0}};
  const std::string path = temp_path("cpsdet_table.csv");
  write_table(table, path);
  const CsvTable copy = read_table(path);
  CHECK(copy.header == table.header);
  CHECK(copy.rows == table.rows);
  CHECK(copy.column("r:a") == 1);
  CHECK_THROWS_AS(copy.column("missing"), ContractError);
  std::filesystem::remove(path);
}

TEST_CASE("format_double survives extreme magnitudes") {
  for (double v : {0.0, -0.0, 1.0, -1.5, 1e-300, -1e300, 0.1,
                   12345678.901234567}) {
    const std::string text = format_double(v);
    CHECK(std::stod(text) == v);
  }
}
