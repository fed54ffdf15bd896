#include "odsage/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "odsage/rng.hpp"

namespace odsage {

namespace {

void validate(const SimConfig& config, const Network& net) {
  const size_t s = net.stations().size();
  if (config.base_rates.size() != s * (s - 1))
    throw std::invalid_argument("base_rates must cover all ordered OD pairs");
  for (double r : config.base_rates)
    if (!(r >= 0.0)) throw std::invalid_argument("base rates must be >= 0");
  for (double p : config.slot_profile)
    if (!(p > 0.0)) throw std::invalid_argument("slot profile must be positive");
  for (double w : config.weekday_factors)
    if (!(w > 0.0)) throw std::invalid_argument("weekday factors must be positive");
  if (config.community_assignment.size() != s)
    throw std::invalid_argument("community assignment must cover all stations");
  if (config.headway_min.size() != net.lines().size())
    throw std::invalid_argument("headway must cover all lines");
  if (config.reliability_elasticity > 0.0)
    throw std::invalid_argument("reliability elasticity must be <= 0");
}

struct DayStationEvents {
  // Events at one station for one day, ordered by scheduled time.
  std::vector<int> event_idx;
};

double station_window_index(const TrainLog& day_events, const std::vector<int>& at_station,
                            int64_t t) {
  int total = 0, cancelled = 0, served = 0;
  double delay_sum = 0.0;
  for (int idx : at_station) {
    const TrainEvent& e = day_events[idx];
    if (e.scheduled <= t - 3600 || e.scheduled > t) continue;
    ++total;
    if (e.cancelled) {
      ++cancelled;
    } else {
      ++served;
      delay_sum += e.delay_s;
    }
  }
  if (total == 0) return 0.0;
  const double mean_delay = served > 0 ? delay_sum / served : 0.0;
  return mean_delay / 300.0 + static_cast<double>(cancelled) / total;
}

}  // namespace

double disruption_index(const TrainLog& trains, int station, int64_t prediction_time) {
  int total = 0, cancelled = 0, served = 0;
  double delay_sum = 0.0;
  for (const auto& e : trains) {
    if (e.station != station) continue;
    if (e.scheduled <= prediction_time - 3600 || e.scheduled > prediction_time) continue;
    ++total;
    if (e.cancelled) {
      ++cancelled;
    } else {
      ++served;
      delay_sum += e.delay_s;
    }
  }
  if (total == 0) return 0.0;
  const double mean_delay = served > 0 ? delay_sum / served : 0.0;
  return mean_delay / 300.0 + static_cast<double>(cancelled) / total;
}

std::pair<TripLog, TrainLog> simulate(const SimConfig& config, const Network& net) {
  validate(config, net);
  const auto ods = enumerate_all_od_pairs(net);
  const int n_stations = net.n_stations();
  const int64_t per_hop_s = static_cast<int64_t>(std::llround(config.per_hop_minutes * 60.0));

  // Static per-OD structure: hop counts, community-pair stream, boarding
  // line set at the origin.
  std::vector<int> hop_count(ods.size());
  std::vector<int> od_pair_stream(ods.size());
  std::vector<std::vector<LineDirection>> boarding(ods.size());
  std::map<std::pair<int, int>, int> pair_ids;
  for (size_t i = 0; i < ods.size(); ++i) {
    const int hops = net.hop_distance(ods[i].origin, ods[i].destination);
    hop_count[i] = hops > 0 ? hops : 1;
    const std::pair<int, int> cc{config.community_assignment[ods[i].origin],
                                 config.community_assignment[ods[i].destination]};
    auto [it, inserted] = pair_ids.insert({cc, static_cast<int>(pair_ids.size())});
    od_pair_stream[i] = it->second;
    boarding[i] = net.relevant_line_directions(ods[i], /*at_origin=*/true);
  }
  const int n_pairs = static_cast<int>(pair_ids.size());
  const double sigma = config.community_sigma;
  const double rho = config.community_rho;

  TripLog trips;
  TrainLog trains;

  for (int day = 0; day < config.n_days; ++day) {
    Rng rng(derive_seed(config.seed, 0xda9, static_cast<uint64_t>(day)));
    const int64_t svc_start = service_start_epoch(day);
    const int64_t svc_end = service_end_epoch(day);

    // Disruption episodes for this day.
    struct Episode {
      int line;
      int64_t from, to;
    };
    std::vector<Episode> episodes;
    for (size_t l = 0; l < net.lines().size(); ++l) {
      if (!rng.bernoulli(config.episodes.episode_prob)) continue;
      const double dur_h = rng.uniform(config.episodes.min_hours, config.episodes.max_hours);
      const int64_t dur = static_cast<int64_t>(dur_h * 3600.0);
      const int64_t latest = std::max<int64_t>(svc_start, svc_end - dur);
      const int64_t from = rng.uniform_i64(svc_start, latest + 1);
      episodes.push_back({static_cast<int>(l), from, from + dur});
    }
    auto in_episode = [&](int line, int64_t t) {
      for (const auto& e : episodes)
        if (e.line == line && t >= e.from && t < e.to) return true;
      return false;
    };

    // Train operations.
    TrainLog day_events;
    for (size_t l = 0; l < net.lines().size(); ++l) {
      const auto& seq = net.lines()[l].stations;
      const int64_t headway = static_cast<int64_t>(std::llround(config.headway_min[l] * 60.0));
      double base_cancel = config.cancel_prob;
      if (auto it = config.cancel_prob_per_line.find(static_cast<int>(l));
          it != config.cancel_prob_per_line.end())
        base_cancel = it->second;
      for (int dir = 0; dir < 2; ++dir) {
        for (int64_t dep = svc_start; dep < svc_end; dep += headway) {
          const bool episodic = in_episode(static_cast<int>(l), dep);
          const double p_cancel =
              episodic ? std::max(base_cancel, config.episodes.cancel_prob) : base_cancel;
          const double p_delay = episodic ? config.episodes.delay_prob : config.delay.prob;
          const double mean_delay =
              episodic ? config.episodes.delay_mean_s : config.delay.mean_s;
          const bool cancelled = rng.bernoulli(p_cancel);
          int delay_s = 0;
          if (!cancelled && rng.bernoulli(p_delay))
            delay_s = static_cast<int>(std::llround(rng.exponential(mean_delay)));
          for (size_t j = 0; j < seq.size(); ++j) {
            const int station = dir == 0 ? seq[j] : seq[seq.size() - 1 - j];
            const int64_t sched = dep + static_cast<int64_t>(j) * per_hop_s;
            if (sched >= svc_end) break;
            day_events.push_back({station, static_cast<int>(l), dir, sched, cancelled ? 0 : delay_s,
                                  cancelled});
          }
        }
      }
    }

    // Station-indexed view of the day's events, ordered by time.
    std::vector<DayStationEvents> by_station(n_stations);
    {
      std::vector<int> order(day_events.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ea = day_events[a];
        const auto& eb = day_events[b];
        if (ea.scheduled != eb.scheduled) return ea.scheduled < eb.scheduled;
        if (ea.line != eb.line) return ea.line < eb.line;
        return ea.direction < eb.direction;
      });
      for (int idx : order) by_station[day_events[idx].station].event_idx.push_back(idx);
    }

    // Disruption level per (station, slot), anchored at the slot start.
    std::vector<std::array<double, kSlotsPerDay>> dindex(n_stations);
    for (int st = 0; st < n_stations; ++st)
      for (int s = 0; s < kSlotsPerDay; ++s)
        dindex[st][s] =
            station_window_index(day_events, by_station[st].event_idx, slot_start_epoch(day, s));

    // Shared community demand factors, AR(1) across slots.
    std::vector<std::array<double, kSlotsPerDay>> factor(n_pairs);
    const double mean_correction = std::exp(-0.5 * sigma * sigma);
    for (int p = 0; p < n_pairs; ++p) {
      double z = sigma * rng.normal();
      for (int s = 0; s < kSlotsPerDay; ++s) {
        if (s > 0) z = rho * z + sigma * std::sqrt(1.0 - rho * rho) * rng.normal();
        factor[p][s] = std::exp(z) * mean_correction;
      }
    }

    // Passenger demand.
    const double wf = config.weekday_factors[weekday_of(day)];
    for (int s = 0; s < kSlotsPerDay; ++s) {
      const int64_t slot_a = slot_start_epoch(day, s);
      const int64_t slot_b = slot_end_epoch(day, s);
      for (size_t i = 0; i < ods.size(); ++i) {
        const double lam = config.base_rates[i] * wf * config.slot_profile[s] *
                           factor[od_pair_stream[i]][s] *
                           std::exp(config.reliability_elasticity * dindex[ods[i].origin][s]);
        const int count = rng.poisson(lam);
        for (int c = 0; c < count; ++c) {
          const int64_t tap_in = rng.uniform_i64(slot_a, slot_b);
          // Board the next non-cancelled train at the origin heading the
          // OD's way; its delay extends the trip.
          int delay_s = 0;
          for (int idx : by_station[ods[i].origin].event_idx) {
            const TrainEvent& e = day_events[idx];
            if (e.scheduled < tap_in || e.cancelled) continue;
            const LineDirection ld{e.line, e.direction};
            if (std::find(boarding[i].begin(), boarding[i].end(), ld) != boarding[i].end()) {
              delay_s = e.delay_s;
              break;
            }
          }
          const int64_t tap_out = tap_in + hop_count[i] * per_hop_s + delay_s;
          trips.push_back({ods[i].origin, ods[i].destination, tap_in, tap_out});
        }
      }
    }
    trains.insert(trains.end(), day_events.begin(), day_events.end());
  }

  std::sort(trips.begin(), trips.end(), [](const TripEvent& a, const TripEvent& b) {
    if (a.tap_in != b.tap_in) return a.tap_in < b.tap_in;
    if (a.origin != b.origin) return a.origin < b.origin;
    if (a.destination != b.destination) return a.destination < b.destination;
    return a.tap_out < b.tap_out;
  });
  std::sort(trains.begin(), trains.end(), [](const TrainEvent& a, const TrainEvent& b) {
    if (a.scheduled != b.scheduled) return a.scheduled < b.scheduled;
    if (a.line != b.line) return a.line < b.line;
    if (a.direction != b.direction) return a.direction < b.direction;
    return a.station < b.station;
  });
  return {std::move(trips), std::move(trains)};
}

std::vector<double> default_base_rates(const Network& net, const DemandRateSpec& spec) {
  const auto ods = enumerate_all_od_pairs(net);
  Rng rng(derive_seed(spec.seed, 0x7261746573));
  std::vector<double> rates(ods.size());
  double sum = 0.0;
  for (size_t i = 0; i < ods.size(); ++i) {
    const int hops = std::max(1, net.hop_distance(ods[i].origin, ods[i].destination));
    const double shape = std::exp(spec.rate_sigma * rng.normal());
    rates[i] = shape * std::exp(-static_cast<double>(hops) / spec.hop_decay);
    sum += rates[i];
  }
  const double scale = spec.mean_rate * static_cast<double>(ods.size()) / sum;
  for (double& r : rates) r *= scale;
  return rates;
}

std::array<double, 5> default_weekday_factors() { return {1.06, 1.0, 0.97, 1.02, 0.92}; }

std::array<double, kSlotsPerDay> default_slot_profile() {
  std::array<double, kSlotsPerDay> p{};
  double sum = 0.0;
  for (int s = 0; s < kSlotsPerDay; ++s) {
    const double x = (s - 9.5) / 3.0;  // peak around 08:10
    p[s] = 0.5 + 1.2 * std::exp(-0.5 * x * x);
    sum += p[s];
  }
  for (double& v : p) v *= kSlotsPerDay / sum;
  return p;
}

SimConfig make_default_sim_config(const GeneratedNetwork& gen, uint64_t seed, int n_days,
                                  const DemandRateSpec& rates) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.n_days = n_days;
  DemandRateSpec r = rates;
  r.seed = seed;
  cfg.base_rates = default_base_rates(gen.net, r);
  cfg.weekday_factors = default_weekday_factors();
  cfg.slot_profile = default_slot_profile();
  cfg.community_assignment = gen.station_community;
  cfg.headway_min.assign(gen.net.lines().size(), 10.0);
  return cfg;
}

}  // namespace odsage
