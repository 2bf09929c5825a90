#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpsdet/model.hpp"
#include "cpsdet/timeseries.hpp"

namespace cpsdet {

// Per-timestep, per-channel normalized residuals r = (y_hat - y) / sigma.
struct ResidualSeries {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::vector<double> values;  // length x channels, row-major

  double at(std::size_t t, std::size_t c) const {
    return values[t * channels + c];
  }
};

// A residual magnitude bound R and its expected false-positive rate
// alpha = P(|r| > R); the pair is kept consistent by construction.
struct Threshold {
  double r = 0.0;
  double alpha = 1.0;

  static Threshold from_r(double r);
  static Threshold from_alpha(double alpha);
};

struct DetectionReport {
  std::vector<std::uint8_t> flags;  // per-point classification
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision;  // absent when tp + fp == 0
  std::optional<double> recall;     // absent when tp + fn == 0
  std::optional<double> f_beta;     // absent when undefined
  double beta = 1.0;
};

ResidualSeries residuals(const TimeSeries& data,
                         const std::vector<Prediction>& preds);

// P(|r| > R) for a standard normal residual: erfc(R / sqrt(2)).
double p_value(double r);

// Inverse of p_value by bisection on [0, 40].
Threshold threshold_for_fp_rate(double alpha);

// Point anomalous iff max over channels of |r| exceeds thr.r.
std::vector<std::uint8_t> classify(const ResidualSeries& res,
                                   const Threshold& thr);

// Upper-tail chi-squared p-value of the summed squared residuals over each
// disjoint window (window x channels degrees of freedom). Trailing partial
// windows are dropped.
std::vector<double> aggregate_chi2(const ResidualSeries& res,
                                   std::size_t window);

// Precision / recall / F_beta of predicted flags against truth labels.
DetectionReport evaluate(const std::vector<std::uint8_t>& predicted,
                         const std::vector<std::uint8_t>& truth, double beta);

struct CalibrationSummary {
  double within_1 = 0.0, within_2 = 0.0, within_3 = 0.0;
  struct Bin {
    double left = 0.0, right = 0.0;
    std::size_t count = 0;
    double normal_density = 0.0;  // standard normal pdf at the bin center
  };
  std::vector<Bin> bins;  // uniform grid, edges symmetric about 0
  std::size_t total = 0;
};

// Coverage fractions and histogram counts for comparing the residual
// distribution against a standard normal. Out-of-range residuals land in
// the outermost bins.
CalibrationSummary residual_calibration(const ResidualSeries& res,
                                        std::size_t bin_count = 60,
                                        double half_range = 6.0);

// Stable-field JSON {precision, recall, f_beta, beta, tp, fp, tn, fn,
// threshold_r, threshold_alpha}; absent metrics serialize as null.
std::string report_to_json(const DetectionReport& report,
                           const Threshold& threshold);

}  // namespace cpsdet
