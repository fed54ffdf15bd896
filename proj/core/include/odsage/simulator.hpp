#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "odsage/calendar.hpp"
#include "odsage/logs.hpp"
#include "odsage/network.hpp"

namespace odsage {

struct DelayModel {
  double prob = 0.25;     // chance a served train carries a delay
  double mean_s = 60.0;   // exponential mean of the delay magnitude
};

// Contiguous high-disruption windows on random (line, day) combinations.
// Inside a window the delay/cancellation parameters below replace the
// baseline ones (taking the maximum of the two probabilities).
struct DisruptionModel {
  double episode_prob = 0.3;  // per line and day
  double delay_prob = 0.9;
  double delay_mean_s = 420.0;
  double cancel_prob = 0.25;
  double min_hours = 1.0;
  double max_hours = 3.0;
};

struct SimConfig {
  uint64_t seed = 42;
  int n_days = 240;
  std::vector<double> base_rates;  // per OD, all-pairs order
  std::array<double, 5> weekday_factors{1.0, 1.0, 1.0, 1.0, 1.0};
  std::array<double, kSlotsPerDay> slot_profile{};
  std::vector<int> community_assignment;  // per station
  std::vector<double> headway_min;        // per line
  DelayModel delay;
  double cancel_prob = 0.01;
  std::map<int, double> cancel_prob_per_line;  // per-line overrides
  DisruptionModel episodes;
  double reliability_elasticity = -0.4;  // <= 0; demand response to disruption
  double community_sigma = 0.5;          // shared log-demand factor scale
  double community_rho = 0.8;            // its AR(1) persistence across slots
  double per_hop_minutes = 2.5;
};

// Synthetic AFC + train-operation data. Demand for OD i in slot s of day w
// is Poisson with mean
//   base_rate_i * weekday_factor_w * slot_profile_s
//     * community_factor(origin/destination communities, day, slot)
//     * exp(reliability_elasticity * disruption_index(origin_i, slot start)).
// The community factor is a shared log-normal AR(1) process per
// (origin community, destination community) pair, which plants the
// spatial correlation the OD graphs are meant to exploit. Each day draws
// from its own (seed, day)-derived stream, so days are independent and
// the whole output is a pure function of the seed.
std::pair<TripLog, TrainLog> simulate(const SimConfig& config, const Network& net);

// Station-level disruption level over the hour before `prediction_time`:
// (mean delay of served trains)/300s + (proportion of trains cancelled).
// No trains in the window yields 0.
double disruption_index(const TrainLog& trains, int station, int64_t prediction_time);

// ----- default configuration helpers ---------------------------------------

struct DemandRateSpec {
  double mean_rate = 2.0;   // average trips per OD per interval
  double rate_sigma = 0.6;  // log-normal spread across ODs
  double hop_decay = 12.0;  // demand decay with OD hop distance
  uint64_t seed = 1;
};

// Per-OD base rates: log-normal spread, decaying with hop distance,
// rescaled so the mean over ODs equals mean_rate.
std::vector<double> default_base_rates(const Network& net, const DemandRateSpec& spec);

std::array<double, 5> default_weekday_factors();
std::array<double, kSlotsPerDay> default_slot_profile();  // morning-peak shape, mean 1

SimConfig make_default_sim_config(const GeneratedNetwork& gen, uint64_t seed, int n_days,
                                  const DemandRateSpec& rates);

}  // namespace odsage
