#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cpsdet {

// Aligned input/observation sequences with optional per-point anomaly
// labels. xs and ys are row-major (length x dim).
struct TimeSeries {
  std::size_t length = 0;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
  std::vector<double> time;  // strictly increasing; generators emit 0..T-1
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<std::uint8_t> labels;  // empty, or one 0/1 flag per step

  std::size_t input_dim() const { return x_names.size(); }
  std::size_t output_dim() const { return y_names.size(); }
  bool has_labels() const { return !labels.empty(); }

  std::span<const double> x_row(std::size_t t) const {
    return {xs.data() + t * input_dim(), input_dim()};
  }
  std::span<const double> y_row(std::size_t t) const {
    return {ys.data() + t * output_dim(), output_dim()};
  }
  std::vector<double> x_vec(std::size_t t) const {
    auto row = x_row(t);
    return {row.begin(), row.end()};
  }
  std::vector<double> y_vec(std::size_t t) const {
    auto row = y_row(t);
    return {row.begin(), row.end()};
  }

  // Row counts, unique names, monotone time, finite values, binary labels.
  // Throws ContractError on violation.
  void validate() const;
};

// Explicit column roles for CSV files whose headers do not use the
// t / x: / y: / label naming convention.
struct ColumnSchema {
  enum class Role { time, input, output, label };
  struct Column {
    Role role;
    std::string name;
  };
  std::vector<Column> columns;

  // Exactly one time column, at least one input and one output, at most
  // one label. Throws ContractError on violation.
  void validate() const;
};

}  // namespace cpsdet
