#include "cpsdet/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "cpsdet/errors.hpp"

namespace cpsdet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

void WaterTankParams::validate() const {
  if (!(h_low >= 0.0) || !(h_low < h_high)) {
    throw ContractError("water tank: require 0 <= h_low < h_high");
  }
  if (!(a > 0.0) || !(inflow > 0.0) || !(dt > 0.0)) {
    throw ContractError("water tank: a, inflow and dt must be > 0");
  }
  if (!(h0 >= 0.0)) throw ContractError("water tank: h0 must be >= 0");
  if (!(noise_coeff >= 0.0)) {
    throw ContractError("water tank: noise_coeff must be >= 0");
  }
}

void validate_schedule(const AnomalySchedule& schedule) {
  AnomalySchedule sorted = schedule;
  std::sort(sorted.begin(), sorted.end(),
            [](const AnomalyEvent& a, const AnomalyEvent& b) {
              return a.start < b.start;
            });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].start >= sorted[i].end) {
      throw ContractError("anomaly schedule: empty interval");
    }
    if (!(sorted[i].magnitude > 0.0)) {
      throw ContractError("anomaly schedule: magnitude must be > 0");
    }
    if (i > 0 && sorted[i].start < sorted[i - 1].end) {
      throw ContractError("anomaly schedule: overlapping intervals");
    }
  }
}

TimeSeries water_tank_simulate(const WaterTankParams& params,
                               std::size_t steps,
                               const AnomalySchedule& schedule,
                               SeededRng& rng) {
  params.validate();
  validate_schedule(schedule);
  if (steps < 1) throw ContractError("water tank: steps must be >= 1");

  TimeSeries series;
  series.x_names = {"valve"};
  series.y_names = {"qout"};
  series.length = steps;
  series.time.reserve(steps);
  series.xs.reserve(steps);
  series.ys.reserve(steps);
  series.labels.assign(steps, 0);

  double h = params.h0;
  int valve = h <= params.h_low ? 1 : 0;
  for (std::size_t t = 0; t < steps; ++t) {
    if (h <= params.h_low) {
      valve = 1;
    } else if (h >= params.h_high) {
      valve = 0;
    }

    double a_eff = params.a;
    double sensor_offset = 0.0;
    double sensor_scale = 1.0;
    for (const AnomalyEvent& event : schedule) {
      if (t < event.start || t >= event.end) continue;
      series.labels[t] = 1;
      switch (event.kind) {
        case AnomalyEvent::Kind::outflow_blockage:
          a_eff *= event.magnitude;  // physical: the level responds too
          break;
        case AnomalyEvent::Kind::sensor_offset:
          sensor_offset += event.magnitude;
          break;
        case AnomalyEvent::Kind::sensor_scale:
          sensor_scale *= event.magnitude;
          break;
      }
    }

    const double q = a_eff * std::sqrt(h);
    double y = rng.normal(q, params.noise_coeff * std::fabs(q));
    y = y * sensor_scale + sensor_offset;

    series.time.push_back(static_cast<double>(t));
    series.xs.push_back(static_cast<double>(valve));
    series.ys.push_back(y);

    h = std::max(0.0, h + params.dt * (params.inflow * valve - q));
  }
  if (schedule.empty()) series.labels.clear();
  return series;
}

PeriodicToy periodic_toy_generate(std::size_t period, std::size_t cycles,
                                  SeededRng& rng, double sd_low,
                                  double sd_high, double uniform_halfwidth) {
  if (period < 4) throw ContractError("periodic toy: period must be >= 4");
  if (cycles < 1) throw ContractError("periodic toy: cycles must be >= 1");
  if (sd_low < 0.0 || sd_high < 0.0 || uniform_halfwidth < 0.0) {
    throw ContractError("periodic toy: noise levels must be >= 0");
  }

  PeriodicToy toy;
  toy.uniform_halfwidth = uniform_halfwidth;
  toy.mean_gauss.resize(period);
  toy.mean_uniform.resize(period);
  toy.sd_gauss.resize(period);
  for (std::size_t phase = 0; phase < period; ++phase) {
    const double angle = kTwoPi * static_cast<double>(phase) /
                         static_cast<double>(period);
    toy.mean_gauss[phase] = std::sin(angle);
    toy.mean_uniform[phase] = std::cos(angle);
    toy.sd_gauss[phase] = phase < period / 2 ? sd_low : sd_high;
  }

  TimeSeries& series = toy.series;
  series.x_names = {"impulse"};
  series.y_names = {"sig_gauss", "sig_uniform"};
  series.length = period * cycles;
  series.time.reserve(series.length);
  series.xs.reserve(series.length);
  series.ys.reserve(series.length * 2);
  for (std::size_t t = 0; t < series.length; ++t) {
    const std::size_t phase = t % period;
    series.time.push_back(static_cast<double>(t));
    series.xs.push_back(phase == 0 ? 1.0 : 0.0);
    series.ys.push_back(toy.mean_gauss[phase] +
                        rng.normal(0.0, toy.sd_gauss[phase]));
    series.ys.push_back(toy.mean_uniform[phase] +
                        (2.0 * rng.uniform() - 1.0) * uniform_halfwidth);
  }
  return toy;
}

void PowerDemandParams::validate() const {
  if (steps_per_day < 4) {
    throw ContractError("power demand: steps_per_day must be >= 4");
  }
  if (days < 1) throw ContractError("power demand: days must be >= 1");
  if (!(noise_sd >= 0.0)) {
    throw ContractError("power demand: noise_sd must be >= 0");
  }
  if (!(seasonal_amplitude >= 0.0) || seasonal_amplitude >= 1.0) {
    throw ContractError("power demand: seasonal_amplitude must lie in [0, 1)");
  }
  if (!(weekend_factor > 0.0)) {
    throw ContractError("power demand: weekend_factor must be > 0");
  }
  for (std::size_t day : holiday_days) {
    if (day >= days) {
      throw ContractError("power demand: holiday day " + std::to_string(day) +
                          " is outside the series");
    }
    if (day % 7 >= 5) {
      // A weekend holiday produces no detectable deviation; reject it.
      throw ContractError("power demand: holiday on day " +
                          std::to_string(day) + " falls on a weekend");
    }
  }
}

TimeSeries power_demand_generate(const PowerDemandParams& params,
                                 SeededRng& rng) {
  params.validate();
  const std::set<std::size_t> holidays(params.holiday_days.begin(),
                                       params.holiday_days.end());

  TimeSeries series;
  series.x_names = {"day_start", "week_start"};
  series.y_names = {"power"};
  const std::size_t total = params.days * params.steps_per_day;
  series.length = total;
  series.time.reserve(total);
  series.xs.reserve(total * 2);
  series.ys.reserve(total);
  if (!holidays.empty()) series.labels.assign(total, 0);

  for (std::size_t day = 0; day < params.days; ++day) {
    const std::size_t weekday = day % 7;
    const bool weekend = weekday >= 5;
    const bool holiday = holidays.count(day) > 0;
    const double day_level =
        params.base_day * ((weekend || holiday) ? params.weekend_factor : 1.0);
    for (std::size_t s = 0; s < params.steps_per_day; ++s) {
      const std::size_t t = day * params.steps_per_day + s;
      const double frac = static_cast<double>(s) /
                          static_cast<double>(params.steps_per_day);
      const bool daytime = frac >= 0.375 && frac < 0.75;
      const double base = daytime ? day_level : params.base_night;
      const double season =
          1.0 + params.seasonal_amplitude *
                    std::cos(kTwoPi * static_cast<double>(t) /
                             static_cast<double>(total));
      series.time.push_back(static_cast<double>(t));
      series.xs.push_back(s == 0 ? 1.0 : 0.0);
      series.xs.push_back(s == 0 && weekday == 0 ? 1.0 : 0.0);
      series.ys.push_back(rng.normal(base * season, params.noise_sd));
      if (!holidays.empty() && holiday) series.labels[t] = 1;
    }
  }
  return series;
}

}  // namespace cpsdet
