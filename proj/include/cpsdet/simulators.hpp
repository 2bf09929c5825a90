#pragma once

#include <cstddef>
#include <vector>

#include "cpsdet/rng.hpp"
#include "cpsdet/timeseries.hpp"

namespace cpsdet {

// Water tank with hysteresis refill valve. The outflow follows the root
// square law q_out = a * sqrt(h); observation noise is Gaussian with
// sd = noise_coeff * |q_out|. Defaults give a cycle of roughly 100 steps.
struct WaterTankParams {
  double a = 0.7;            // outflow coefficient
  double inflow = 3.5;       // fill rate while the valve is open
  double h_low = 1.0;        // valve opens at h <= h_low
  double h_high = 9.0;       // valve closes at h >= h_high
  double h0 = 4.0;           // initial level
  double noise_coeff = 0.02; // observation noise sd per unit outflow
  double dt = 0.1;

  void validate() const;  // throws ContractError
};

struct AnomalyEvent {
  enum class Kind {
    outflow_blockage,  // multiplies the effective outflow coefficient
    sensor_offset,     // adds magnitude to the observed outflow
    sensor_scale,      // multiplies the observed outflow
  };
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  Kind kind = Kind::outflow_blockage;
  double magnitude = 1.0;
};

// Non-overlapping, magnitude > 0. Throws ContractError on violation.
using AnomalySchedule = std::vector<AnomalyEvent>;
void validate_schedule(const AnomalySchedule& schedule);

// x = [valve in {0,1}], y = [observed outflow], labels mark scheduled steps.
TimeSeries water_tank_simulate(const WaterTankParams& params,
                               std::size_t steps,
                               const AnomalySchedule& schedule, SeededRng& rng);

// The two-signal periodic toy: channel 0 carries Gaussian noise whose sd
// switches between two phase domains, channel 1 uniform noise of fixed
// half-width. x is 1 at phase 0 and 0 elsewhere. Ground-truth waveforms and
// noise levels are returned for oracle tests.
struct PeriodicToy {
  TimeSeries series;
  std::vector<double> mean_gauss;    // per phase, channel 0
  std::vector<double> mean_uniform;  // per phase, channel 1
  std::vector<double> sd_gauss;      // per phase, channel 0
  double uniform_halfwidth = 0.0;
};

PeriodicToy periodic_toy_generate(std::size_t period, std::size_t cycles,
                                  SeededRng& rng, double sd_low = 0.05,
                                  double sd_high = 0.25,
                                  double uniform_halfwidth = 0.2);

// Synthetic power-demand analog: daily plateau on workdays, weekends scaled
// by weekend_factor, holidays rendered as weekend-shaped days on workday
// positions, slow sinusoidal seasonal modulation, additive Gaussian noise.
struct PowerDemandParams {
  std::size_t steps_per_day = 24;
  std::size_t days = 364;
  double base_night = 0.4;
  double base_day = 1.0;
  double weekend_factor = 0.6;
  std::vector<std::size_t> holiday_days;  // day indices, workdays only
  double noise_sd = 0.02;
  double seasonal_amplitude = 0.0;

  void validate() const;  // throws ContractError
};

// x = [day-start impulse, week-start impulse], y = [power]; labels mark all
// holiday timesteps.
TimeSeries power_demand_generate(const PowerDemandParams& params,
                                 SeededRng& rng);

}  // namespace cpsdet
