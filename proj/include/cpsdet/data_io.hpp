#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpsdet/model.hpp"
#include "cpsdet/timeseries.hpp"
#include "cpsdet/trainer.hpp"

namespace cpsdet {

// Reads a labeled time-series CSV. Without a schema, roles come from the
// header prefixes: `t`, `x:<name>`, `y:<name>`, `label`. Parsing is strict:
// every cell must be a finite number, the time column strictly increasing,
// labels exactly 0 or 1. Violations raise ParseError with a row/column
// location.
TimeSeries read_csv(const std::string& path,
                    const std::optional<ColumnSchema>& schema = std::nullopt);

// Canonical column order t, x:*, y:*, label; reals at full round-trip
// precision; labels as 0/1; `\n` line endings. Byte-identical for identical
// input.
void write_csv(const TimeSeries& series, const std::string& path);

// Generic numeric CSV (residual traces, histograms, loss logs).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // ContractError if absent
};

CsvTable read_table(const std::string& path);
void write_table(const CsvTable& table, const std::string& path);

// Shortest decimal form that parses back to the same bits.
std::string format_double(double v);

struct SavedModel {
  ModelConfig config;
  ModelParameters params;
  NormalizationSpec normalization;
  std::uint64_t seed = 0;
};

// Versioned JSON model file: {format_version, config, seed, parameters,
// normalization} with parameters as named row-major arrays. load_model
// validates the version and every array length, naming the offending field.
void save_model(const std::string& path, const SavedModel& model);
SavedModel load_model(const std::string& path);

}  // namespace cpsdet
