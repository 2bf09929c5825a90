#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "cpsdet/anomaly.hpp"
#include "cpsdet/errors.hpp"
#include "cpsdet/rng.hpp"
#include "cpsdet/special.hpp"

using namespace cpsdet;

namespace {

ResidualSeries standard_normal_residuals(std::size_t n, std::size_t channels,
                                         SeededRng& rng) {
  ResidualSeries res;
  res.length = n;
  res.channels = channels;
  res.values.resize(n * channels);
  for (double& v : res.values) v = rng.normal(0.0, 1.0);
  return res;
}

TimeSeries observations(const std::vector<std::vector<double>>& ys) {
  TimeSeries s;
  s.length = ys.size();
  s.x_names = {"x"};
  s.y_names.resize(ys.empty() ? 1 : ys[0].size());
  for (std::size_t j = 0; j < s.y_names.size(); ++j) {
    s.y_names[j] = "y" + std::to_string(j);
  }
  for (std::size_t t = 0; t < ys.size(); ++t) {
    s.time.push_back(static_cast<double>(t));
    s.xs.push_back(0.0);
    for (double v : ys[t]) s.ys.push_back(v);
  }
  return s;
}

}  // namespace

TEST_CASE("residuals basic identities") {
  std::vector<Prediction> preds(3);
  std::vector<std::vector<double>> ys(3);
  for (std::size_t t = 0; t < 3; ++t) {
    preds[t].y_hat = {1.0 + static_cast<double>(t), -2.0};
    preds[t].tau = {0.0, std::log(0.5)};
    preds[t].sigma = {1.0, 0.5};
    ys[t] = preds[t].y_hat;  // zero residual
  }
  const ResidualSeries zero = residuals(observations(ys), preds);
  for (double v : zero.values) CHECK(v == 0.0);

  // y_hat - y = sigma elementwise -> all ones
  for (std::size_t t = 0; t < 3; ++t) {
    ys[t][0] = preds[t].y_hat[0] - preds[t].sigma[0];
    ys[t][1] = preds[t].y_hat[1] - preds[t].sigma[1];
  }
  const ResidualSeries ones = residuals(observations(ys), preds);
  for (double v : ones.values) CHECK(v == 1.0);
}

TEST_CASE("residuals reject misaligned inputs") {
  std::vector<Prediction> preds(2);
  preds[0].y_hat = preds[1].y_hat = {0.0};
  preds[0].sigma = preds[1].sigma = {1.0};
  preds[0].tau = preds[1].tau = {0.0};
  const TimeSeries data = observations({{0.0}, {0.0}, {0.0}});
  CHECK_THROWS_AS(residuals(data, preds), ContractError);
}

TEST_CASE("residuals of self-sampled data match the expected exceedance table") {
  // Draw y from the model's own predictive distribution; |r| exceedance
  // rates must then match P(|r| > R) for a standard normal.
  SeededRng rng(101);
  const std::size_t n = 100000;
  std::vector<Prediction> preds(n);
  std::vector<std::vector<double>> ys(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double mean = std::sin(static_cast<double>(t) * 0.01);
    const double sigma = 0.5 + 0.4 * std::cos(static_cast<double>(t) * 0.003);
    preds[t].y_hat = {mean};
    preds[t].tau = {std::log(sigma)};
    preds[t].sigma = {sigma};
    ys[t] = {rng.normal(mean, sigma)};
  }
  const ResidualSeries res = residuals(observations(ys), preds);
  const double expected[3] = {0.317, 4.6e-2, 2.7e-3};
  for (int i = 0; i < 3; ++i) {
    const double threshold = static_cast<double>(i + 1);
    std::size_t exceed = 0;
    for (double v : res.values) {
      if (std::fabs(v) > threshold) ++exceed;
    }
    const double rate = static_cast<double>(exceed) / static_cast<double>(n);
    const double sigma3 =
        3.0 * std::sqrt(expected[i] * (1.0 - expected[i]) / n);
    CHECK(std::fabs(rate - expected[i]) < sigma3 + 1e-3);
  }
}

TEST_CASE("p_value matches the published table") {
  CHECK(p_value(0.0) == 1.0);
  CHECK(p_value(1.0) == doctest::Approx(0.317).epsilon(2e-3));
  CHECK(p_value(2.0) == doctest::Approx(4.6e-2).epsilon(1e-2));
  CHECK(p_value(3.0) == doctest::Approx(2.7e-3).epsilon(1e-2));
  CHECK(p_value(4.0) == doctest::Approx(6.3e-5).epsilon(1e-2));
  CHECK(p_value(5.0) == doctest::Approx(5.7e-7).epsilon(1e-2));
  CHECK_THROWS_AS(p_value(-0.5), DomainError);
}

TEST_CASE("threshold_for_fp_rate inverts p_value") {
  CHECK(threshold_for_fp_rate(1.0).r == 0.0);
  CHECK(threshold_for_fp_rate(0.317).r == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(threshold_for_fp_rate(2.7e-3).r == doctest::Approx(3.0).epsilon(1e-3));
  for (double alpha = 1e-8; alpha <= 1.0; alpha *= 10.0) {
    const Threshold thr = threshold_for_fp_rate(alpha);
    CHECK(std::fabs(p_value(thr.r) - alpha) <= 1e-9);
  }
  CHECK_THROWS_AS(threshold_for_fp_rate(0.0), DomainError);
  CHECK_THROWS_AS(threshold_for_fp_rate(1.5), DomainError);
}

TEST_CASE("p_value is strictly decreasing") {
  double prev = p_value(0.0);
  for (double r = 0.1; r <= 8.0; r += 0.1) {
    const double v = p_value(r);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("classify flags per-point channel maxima") {
  ResidualSeries res;
  res.length = 4;
  res.channels = 2;
  res.values = {0.1, -0.2, 3.5, 0.0, -0.4, 0.3, 0.2, -4.1};
  const auto flags = classify(res, Threshold::from_r(3.0));
  CHECK(flags == std::vector<std::uint8_t>{0, 1, 0, 1});

  ResidualSeries zeros;
  zeros.length = 5;
  zeros.channels = 1;
  zeros.values.assign(5, 0.0);
  const auto none = classify(zeros, Threshold::from_r(1.0));
  CHECK(std::count(none.begin(), none.end(), 1) == 0);
}

TEST_CASE("classify at R=3 flags the expected fraction of normal noise") {
  SeededRng rng(7);
  const std::size_t n = 1000000;
  const ResidualSeries res = standard_normal_residuals(n, 1, rng);
  const auto flags = classify(res, Threshold::from_r(3.0));
  const double rate =
      static_cast<double>(std::count(flags.begin(), flags.end(), 1)) /
      static_cast<double>(n);
  const double p = 2.7e-3;
  const double sigma3 = 3.0 * std::sqrt(p * (1.0 - p) / n);
  CHECK(std::fabs(rate - p) < sigma3 + 2e-5);
}

TEST_CASE("classification is invariant under joint rescaling") {
  SeededRng rng(13);
  const std::size_t n = 500;
  std::vector<Prediction> preds(n);
  std::vector<std::vector<double>> ys(n);
  for (std::size_t t = 0; t < n; ++t) {
    preds[t].y_hat = {rng.normal(0.0, 1.0)};
    const double sigma = std::exp(rng.normal(0.0, 0.3));
    preds[t].tau = {std::log(sigma)};
    preds[t].sigma = {sigma};
    ys[t] = {preds[t].y_hat[0] + rng.normal(0.0, 2.0)};
  }
  const Threshold thr = Threshold::from_r(1.5);
  const auto base = classify(residuals(observations(ys), preds), thr);
  for (double factor : {0.5, 2.0, 7.0}) {
    std::vector<Prediction> scaled = preds;
    std::vector<std::vector<double>> ys2 = ys;
    for (std::size_t t = 0; t < n; ++t) {
      // scale the error and sigma together: y' = yhat + factor (y - yhat)
      ys2[t][0] = preds[t].y_hat[0] + factor * (ys[t][0] - preds[t].y_hat[0]);
      scaled[t].sigma[0] *= factor;
      scaled[t].tau[0] += std::log(factor);
    }
    const auto flags = classify(residuals(observations(ys2), scaled), thr);
    CHECK(flags == base);
  }
}

TEST_CASE("aggregate_chi2 identities") {
  ResidualSeries res;
  res.length = 6;
  res.channels = 1;
  res.values = {0.5, -1.5, 0.0, 2.5, -0.3, 1.1};

  SUBCASE("window 1 on one channel equals p_value") {
    const auto p = aggregate_chi2(res, 1);
    REQUIRE(p.size() == 6);
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(p[t] ==
            doctest::Approx(p_value(std::fabs(res.values[t]))).epsilon(1e-9));
    }
  }

  SUBCASE("all-zero residuals give p = 1") {
    ResidualSeries zeros;
    zeros.length = 8;
    zeros.channels = 2;
    zeros.values.assign(16, 0.0);
    for (double p : aggregate_chi2(zeros, 4)) CHECK(p == 1.0);
  }

  SUBCASE("contract errors") {
    CHECK_THROWS_AS(aggregate_chi2(res, 0), ContractError);
    CHECK_THROWS_AS(aggregate_chi2(res, 7), ContractError);
  }
}

TEST_CASE("aggregate_chi2 p-values are uniform for normal residuals") {
  SeededRng rng(23);
  const std::size_t windows = 25000;
  const std::size_t window = 4;
  const ResidualSeries res =
      standard_normal_residuals(windows * window, 1, rng);
  std::vector<double> p = aggregate_chi2(res, window);
  REQUIRE(p.size() == windows);
  std::sort(p.begin(), p.end());
  // Kolmogorov-Smirnov against U(0,1) at the 1% level
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double lo = static_cast<double>(i) / windows;
    const double hi = static_cast<double>(i + 1) / windows;
    d = std::max({d, std::fabs(p[i] - lo), std::fabs(p[i] - hi)});
  }
  const double critical = 1.628 / std::sqrt(static_cast<double>(windows));
  CHECK(d < critical);
}

TEST_CASE("evaluate reproduces the published F_beta triples") {
  // counts realizing precision 0.95, recall 0.31 exactly
  std::vector<std::uint8_t> predicted, truth;
  auto add = [&](std::size_t n, bool p, bool t) {
    for (std::size_t i = 0; i < n; ++i) {
      predicted.push_back(p ? 1 : 0);
      truth.push_back(t ? 1 : 0);
    }
  };
  add(589, true, true);
  add(31, true, false);
  add(1311, false, true);
  add(2000, false, false);
  const DetectionReport a = evaluate(predicted, truth, 0.1);
  CHECK(*a.precision == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(*a.recall == doctest::Approx(0.31).epsilon(1e-12));
  CHECK(std::round(*a.f_beta * 100.0) / 100.0 == 0.93);

  predicted.clear();
  truth.clear();
  add(799, true, true);
  add(51, true, false);
  add(3901, false, true);
  add(1000, false, false);
  const DetectionReport b = evaluate(predicted, truth, 0.1);
  CHECK(*b.precision == doctest::Approx(0.94).epsilon(1e-12));
  CHECK(*b.recall == doctest::Approx(0.17).epsilon(1e-12));
  CHECK(std::round(*b.f_beta * 100.0) / 100.0 == 0.90);
}

TEST_CASE("evaluate handles perfect and degenerate cases") {
  const std::vector<std::uint8_t> ones(10, 1), zeros(10, 0);
  const DetectionReport perfect = evaluate(ones, ones, 1.0);
  CHECK(*perfect.precision == 1.0);
  CHECK(*perfect.recall == 1.0);
  CHECK(*perfect.f_beta == 1.0);

  // no positives anywhere: precision, recall, F all absent
  const DetectionReport none = evaluate(zeros, zeros, 0.1);
  CHECK(!none.precision.has_value());
  CHECK(!none.recall.has_value());
  CHECK(!none.f_beta.has_value());

  // some predicted positives but an all-negative truth: recall absent
  std::vector<std::uint8_t> some(10, 0);
  some[3] = 1;
  const DetectionReport fp_only = evaluate(some, zeros, 0.1);
  CHECK(fp_only.precision.has_value());
  CHECK(!fp_only.recall.has_value());
  CHECK(!fp_only.f_beta.has_value());

  CHECK_THROWS_AS(evaluate(ones, std::vector<std::uint8_t>(4, 0), 0.1),
                  ContractError);
  CHECK_THROWS_AS(evaluate(ones, ones, 0.0), ContractError);
}

TEST_CASE("F_beta tends to precision and recall in the beta limits") {
  std::vector<std::uint8_t> predicted, truth;
  auto add = [&](std::size_t n, bool p, bool t) {
    for (std::size_t i = 0; i < n; ++i) {
      predicted.push_back(p ? 1 : 0);
      truth.push_back(t ? 1 : 0);
    }
  };
  add(60, true, true);
  add(40, true, false);
  add(140, false, true);
  add(100, false, false);
  const DetectionReport small = evaluate(predicted, truth, 1e-3);
  const DetectionReport large = evaluate(predicted, truth, 1e3);
  CHECK(std::fabs(*small.f_beta - *small.precision) < 1e-3);
  CHECK(std::fabs(*large.f_beta - *large.recall) < 1e-3);
}

TEST_CASE("residual_calibration coverage fractions") {
  SeededRng rng(31);
  const ResidualSeries res = standard_normal_residuals(1000000, 1, rng);
  const CalibrationSummary summary = residual_calibration(res);
  CHECK(std::fabs(summary.within_1 - 0.683) < 0.002);
  CHECK(std::fabs(summary.within_2 - (1.0 - 0.046)) < 0.002);
  CHECK(std::fabs(summary.within_3 - (1.0 - 2.7e-3)) < 0.001);

  std::size_t total = 0;
  for (const auto& bin : summary.bins) total += bin.count;
  CHECK(total == res.values.size());

  // edges symmetric about zero
  const std::size_t n = summary.bins.size();
  for (std::size_t b = 0; b < n; ++b) {
    CHECK(summary.bins[b].left ==
          doctest::Approx(-summary.bins[n - 1 - b].right).epsilon(1e-12));
  }
}

TEST_CASE("residual_calibration of all-zero residuals") {
  ResidualSeries res;
  res.length = 50;
  res.channels = 2;
  res.values.assign(100, 0.0);
  const CalibrationSummary summary = residual_calibration(res);
  CHECK(summary.within_1 == 1.0);
  CHECK(summary.within_2 == 1.0);
  CHECK(summary.within_3 == 1.0);
}

TEST_CASE("report serialization carries the stable fields") {
  std::vector<std::uint8_t> predicted{1, 0, 1, 0}, truth{1, 0, 0, 1};
  const DetectionReport report = evaluate(predicted, truth, 0.1);
  const std::string json_text = report_to_json(report, Threshold::from_r(3.0));
  for (const char* field :
       {"\"precision\"", "\"recall\"", "\"f_beta\"", "\"beta\"", "\"tp\"",
        "\"fp\"", "\"tn\"", "\"fn\"", "\"threshold_r\"", "\"threshold_alpha\""}) {
    CHECK(json_text.find(field) != std::string::npos);
  }
}
