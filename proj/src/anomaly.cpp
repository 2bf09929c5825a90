#include "cpsdet/anomaly.hpp"

#include <cmath>
#include <string>

#include <json.hpp>

#include "cpsdet/errors.hpp"
#include "cpsdet/special.hpp"

namespace cpsdet {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;

}  // namespace

ResidualSeries residuals(const TimeSeries& data,
                         const std::vector<Prediction>& preds) {
  if (preds.size() != data.length) {
    throw ContractError("residuals: prediction count " +
                        std::to_string(preds.size()) +
                        " does not match series length " +
                        std::to_string(data.length));
  }
  const std::size_t q = data.output_dim();
  ResidualSeries res;
  res.length = data.length;
  res.channels = q;
  res.values.reserve(data.length * q);
  for (std::size_t t = 0; t < data.length; ++t) {
    if (preds[t].y_hat.size() != q) {
      throw ContractError("residuals: prediction dim mismatch at step " +
                          std::to_string(t));
    }
    const auto y = data.y_row(t);
    for (std::size_t c = 0; c < q; ++c) {
      res.values.push_back((preds[t].y_hat[c] - y[c]) / preds[t].sigma[c]);
    }
  }
  return res;
}

double p_value(double r) {
  if (r < 0.0 || !std::isfinite(r)) {
    throw DomainError("p_value: R must be finite and >= 0");
  }
  return erfc(r * kInvSqrt2);
}

Threshold Threshold::from_r(double r) {
  return Threshold{r, p_value(r)};
}

Threshold Threshold::from_alpha(double alpha) {
  return threshold_for_fp_rate(alpha);
}

Threshold threshold_for_fp_rate(double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw DomainError("threshold_for_fp_rate: alpha must lie in (0, 1]");
  }
  if (alpha == 1.0) return Threshold{0.0, 1.0};
  double lo = 0.0, hi = 40.0;
  // p_value is strictly decreasing; bisect until the bracket collapses.
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (p_value(mid) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double r = 0.5 * (lo + hi);
  return Threshold{r, alpha};
}

std::vector<std::uint8_t> classify(const ResidualSeries& res,
                                   const Threshold& thr) {
  std::vector<std::uint8_t> flags(res.length, 0);
  for (std::size_t t = 0; t < res.length; ++t) {
    for (std::size_t c = 0; c < res.channels; ++c) {
      if (std::fabs(res.at(t, c)) > thr.r) {
        flags[t] = 1;
        break;
      }
    }
  }
  return flags;
}

std::vector<double> aggregate_chi2(const ResidualSeries& res,
                                   std::size_t window) {
  if (window < 1) {
    throw ContractError("aggregate_chi2: window must be >= 1");
  }
  if (window > res.length) {
    throw ContractError("aggregate_chi2: window of " + std::to_string(window) +
                        " exceeds series length " + std::to_string(res.length));
  }
  const int dof = static_cast<int>(window * res.channels);
  std::vector<double> p_values;
  p_values.reserve(res.length / window);
  for (std::size_t start = 0; start + window <= res.length; start += window) {
    double sum = 0.0;
    for (std::size_t t = start; t < start + window; ++t) {
      for (std::size_t c = 0; c < res.channels; ++c) {
        const double r = res.at(t, c);
        sum += r * r;
      }
    }
    p_values.push_back(chi2_sf(sum, dof));
  }
  return p_values;
}

DetectionReport evaluate(const std::vector<std::uint8_t>& predicted,
                         const std::vector<std::uint8_t>& truth, double beta) {
  if (predicted.size() != truth.size()) {
    throw ContractError("evaluate: " + std::to_string(predicted.size()) +
                        " predictions vs " + std::to_string(truth.size()) +
                        " labels");
  }
  if (!(beta > 0.0)) {
    throw ContractError("evaluate: beta must be > 0");
  }
  DetectionReport report;
  report.beta = beta;
  report.flags = predicted;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred = predicted[i] != 0;
    const bool anom = truth[i] != 0;
    if (pred && anom) ++report.tp;
    else if (pred && !anom) ++report.fp;
    else if (!pred && anom) ++report.fn;
    else ++report.tn;
  }
  if (report.tp + report.fp > 0) {
    report.precision = static_cast<double>(report.tp) /
                       static_cast<double>(report.tp + report.fp);
  }
  if (report.tp + report.fn > 0) {
    report.recall = static_cast<double>(report.tp) /
                    static_cast<double>(report.tp + report.fn);
  }
  if (report.precision && report.recall) {
    const double p = *report.precision;
    const double r = *report.recall;
    const double denom = beta * beta * p + r;
    if (denom > 0.0) {
      report.f_beta = (1.0 + beta * beta) * p * r / denom;
    }
  }
  return report;
}

CalibrationSummary residual_calibration(const ResidualSeries& res,
                                        std::size_t bin_count,
                                        double half_range) {
  if (res.length == 0 || res.channels == 0) {
    throw ContractError("residual_calibration: empty residual series");
  }
  if (bin_count < 2 || !(half_range > 0.0)) {
    throw ContractError("residual_calibration: invalid histogram layout");
  }
  CalibrationSummary summary;
  summary.total = res.values.size();
  const double width = 2.0 * half_range / static_cast<double>(bin_count);
  summary.bins.resize(bin_count);
  for (std::size_t b = 0; b < bin_count; ++b) {
    summary.bins[b].left = -half_range + width * static_cast<double>(b);
    summary.bins[b].right = summary.bins[b].left + width;
    summary.bins[b].normal_density =
        normal_pdf(0.5 * (summary.bins[b].left + summary.bins[b].right));
  }
  std::size_t n1 = 0, n2 = 0, n3 = 0;
  for (double r : res.values) {
    const double a = std::fabs(r);
    if (a <= 1.0) ++n1;
    if (a <= 2.0) ++n2;
    if (a <= 3.0) ++n3;
    double idx = std::floor((r + half_range) / width);
    if (idx < 0.0) idx = 0.0;
    if (idx >= static_cast<double>(bin_count)) {
      idx = static_cast<double>(bin_count - 1);
    }
    ++summary.bins[static_cast<std::size_t>(idx)].count;
  }
  const double n = static_cast<double>(summary.total);
  summary.within_1 = static_cast<double>(n1) / n;
  summary.within_2 = static_cast<double>(n2) / n;
  summary.within_3 = static_cast<double>(n3) / n;
  return summary;
}

std::string report_to_json(const DetectionReport& report,
                           const Threshold& threshold) {
  nlohmann::json j;
  j["precision"] = report.precision ? nlohmann::json(*report.precision)
                                    : nlohmann::json(nullptr);
  j["recall"] =
      report.recall ? nlohmann::json(*report.recall) : nlohmann::json(nullptr);
  j["f_beta"] =
      report.f_beta ? nlohmann::json(*report.f_beta) : nlohmann::json(nullptr);
  j["beta"] = report.beta;
  j["tp"] = report.tp;
  j["fp"] = report.fp;
  j["tn"] = report.tn;
  j["fn"] = report.fn;
  j["threshold_r"] = threshold.r;
  j["threshold_alpha"] = threshold.alpha;
  return j.dump(2);
}

}  // namespace cpsdet
