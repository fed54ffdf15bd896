#include "odsage/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "odsage/baselines.hpp"
#include "odsage/calendar.hpp"
#include "odsage/eval.hpp"
#include "odsage/features.hpp"
#include "odsage/io.hpp"
#include "odsage/model.hpp"
#include "odsage/simulator.hpp"

namespace odsage {

std::string scale_name(Scale s) {
  switch (s) {
    case Scale::twelve_od: return "twelve_od";
    case Scale::tiny: return "tiny";
    case Scale::full: return "full";
  }
  return "unknown";
}

Scale scale_from_name(const std::string& name) {
  if (name == "twelve_od") return Scale::twelve_od;
  if (name == "tiny") return Scale::tiny;
  if (name == "full") return Scale::full;
  throw ConfigError("invalid value for pipeline.scale: '" + name +
                    "' (expected twelve_od | tiny | full)");
}

PipelineConfig default_config(Scale scale) {
  PipelineConfig cfg;
  cfg.scale = scale;
  switch (scale) {
    case Scale::twelve_od:
      // The 12 busiest ODs of the full network.
      cfg.n_days = 120;
      cfg.mean_rate = 0.35;
      cfg.id_mode = IdMode::onehot_od;
      cfg.ablation = false;
      cfg.dump_csv = true;
      cfg.temporal_method = TemporalMethod::dtw;
      cfg.cap_od_graphs = false;
      cfg.density_q = 0.25;  // 12 vertices: keep the graphs meaningfully connected
      cfg.epochs = 12;
      cfg.gcn_epochs = 12;
      break;
    case Scale::tiny:
      cfg.n_days = 240;
      cfg.mean_rate = 2.0;
      cfg.id_mode = IdMode::signed_station;
      cfg.ablation = true;
      cfg.temporal_method = TemporalMethod::dtw;
      cfg.cap_od_graphs = false;
      cfg.epochs = 12;
      cfg.gcn_epochs = 12;
      cfg.learning_rate = 2e-3;
      break;
    case Scale::full:
      cfg.n_days = 6;
      cfg.mean_rate = 0.08;
      cfg.id_mode = IdMode::signed_station;
      cfg.ablation = false;
      cfg.temporal_method = TemporalMethod::fft;
      cfg.cap_od_graphs = true;
      cfg.temporal_series_days = 0;
      cfg.epochs = 1;
      cfg.gcn_epochs = 1;
      break;
  }
  return cfg;
}

namespace {

int to_int(const std::string& v, const std::string& path) {
  try {
    size_t pos = 0;
    const int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (...) {
    throw ConfigError("invalid value for " + path + ": '" + v + "'");
  }
}

int64_t to_i64(const std::string& v, const std::string& path) {
  try {
    size_t pos = 0;
    const int64_t out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (...) {
    throw ConfigError("invalid value for " + path + ": '" + v + "'");
  }
}

uint64_t to_u64(const std::string& v, const std::string& path) {
  try {
    size_t pos = 0;
    const uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (...) {
    throw ConfigError("invalid value for " + path + ": '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& path) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (...) {
    throw ConfigError("invalid value for " + path + ": '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& path) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid value for " + path + ": '" + v + "' (expected true|false)");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_line(PipelineConfig& cfg, const std::string& section, const std::string& key,
                       const std::string& value) {
  const std::string path = section + "." + key;
  if (section == "pipeline") {
    if (key == "scale") cfg.scale = scale_from_name(value);
    else if (key == "seed") cfg.seed = to_u64(value, path);
    else if (key == "artifact_root") cfg.artifact_root = value;
    else if (key == "threads") cfg.threads = to_int(value, path);
    else throw ConfigError("unknown config key: " + path);
  } else if (section == "network") {
    if (key == "trunk_len") cfg.trunk_len = to_int(value, path);
    else if (key == "n_lines") cfg.n_lines = to_int(value, path);
    else if (key == "finger_len") cfg.finger_len = to_int(value, path);
    else if (key == "slice_line") cfg.slice_line = to_int(value, path);
    else if (key == "slice_start") cfg.slice_start = to_int(value, path);
    else if (key == "slice_count") cfg.slice_count = to_int(value, path);
    else throw ConfigError("unknown config key: " + path);
  } else if (section == "simulate") {
    if (key == "n_days") cfg.n_days = to_int(value, path);
    else if (key == "mean_rate") cfg.mean_rate = to_double(value, path);
    else if (key == "rate_sigma") cfg.rate_sigma = to_double(value, path);
    else if (key == "hop_decay") cfg.hop_decay = to_double(value, path);
    else if (key == "headway_min") cfg.headway_min = to_double(value, path);
    else if (key == "delay_prob") cfg.delay_prob = to_double(value, path);
    else if (key == "delay_mean_s") cfg.delay_mean_s = to_double(value, path);
    else if (key == "cancel_prob") cfg.cancel_prob = to_double(value, path);
    else if (key == "episode_prob") cfg.episode_prob = to_double(value, path);
    else if (key == "episode_delay_prob") cfg.episode_delay_prob = to_double(value, path);
    else if (key == "episode_delay_mean_s") cfg.episode_delay_mean_s = to_double(value, path);
    else if (key == "episode_cancel_prob") cfg.episode_cancel_prob = to_double(value, path);
    else if (key == "episode_min_hours") cfg.episode_min_hours = to_double(value, path);
    else if (key == "episode_max_hours") cfg.episode_max_hours = to_double(value, path);
    else if (key == "reliability_elasticity") cfg.reliability_elasticity = to_double(value, path);
    else if (key == "community_sigma") cfg.community_sigma = to_double(value, path);
    else if (key == "community_rho") cfg.community_rho = to_double(value, path);
    else if (key == "per_hop_minutes") cfg.per_hop_minutes = to_double(value, path);
    else throw ConfigError("unknown config key: " + path);
  } else if (section == "features") {
    if (key == "id_mode") {
      if (value == "onehot_od") cfg.id_mode = IdMode::onehot_od;
      else if (value == "signed_station") cfg.id_mode = IdMode::signed_station;
      else throw ConfigError("invalid value for " + path + ": '" + value + "'");
    } else if (key == "ablation") cfg.ablation = to_bool(value, path);
    else if (key == "dump_csv") cfg.dump_csv = to_bool(value, path);
    else throw ConfigError("unknown config key: " + path);
  } else if (section == "graphs") {
    if (key == "temporal_method") {
      if (value == "dtw") cfg.temporal_method = TemporalMethod::dtw;
      else if (value == "fft") cfg.temporal_method = TemporalMethod::fft;
      else throw ConfigError("invalid value for " + path + ": '" + value + "'");
    } else if (key == "density_q") cfg.density_q = to_double(value, path);
    else if (key == "edge_cap") cfg.edge_cap = to_i64(value, path);
    else if (key == "cap_od_graphs") cfg.cap_od_graphs = to_bool(value, path);
    else if (key == "temporal_series_days") cfg.temporal_series_days = to_int(value, path);
    else throw ConfigError("unknown config key: " + path);
  } else if (section == "train") {
    if (key == "epochs") cfg.epochs = to_int(value, path);
    else if (key == "learning_rate") cfg.learning_rate = to_double(value, path);
    else if (key == "batch") cfg.batch = to_int(value, path);
    else if (key == "hidden_dim") cfg.hidden_dim = to_int(value, path);
    else if (key == "sample_k1") cfg.sample_k1 = to_int(value, path);
    else if (key == "sample_k2") cfg.sample_k2 = to_int(value, path);
    else if (key == "clamp_predictions") cfg.clamp_predictions = to_bool(value, path);
    else if (key == "gcn_enabled") cfg.gcn_enabled = to_bool(value, path);
    else if (key == "gcn_epochs") cfg.gcn_epochs = to_int(value, path);
    else if (key == "gcn_learning_rate") cfg.gcn_learning_rate = to_double(value, path);
    else if (key == "gcn_max_nodes") cfg.gcn_max_nodes = to_int(value, path);
    else throw ConfigError("unknown config key: " + path);
  } else if (section == "evaluate") {
    if (key == "test_fraction") cfg.test_fraction = to_double(value, path);
    else if (key == "delay_thresholds") {
      cfg.delay_thresholds.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ','))
        cfg.delay_thresholds.push_back(to_double(trim(item), path));
    } else if (key == "external_predictions") {
      cfg.external_predictions.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        const size_t eq = item.find('=');
        if (eq == std::string::npos)
          throw ConfigError("invalid value for " + path + ": expected name=path;...");
        cfg.external_predictions.push_back({trim(item.substr(0, eq)), trim(item.substr(eq + 1))});
      }
    } else throw ConfigError("unknown config key: " + path);
  } else {
    throw ConfigError("unknown config section: [" + section + "]");
  }
}

PipelineConfig load_config_file(const std::string& path) {
  const std::string text = read_text_file(path);

  // First pass: find the scale so the right preset seeds the defaults.
  std::istringstream scan(text);
  std::string line, section;
  Scale scale = Scale::tiny;
  bool scale_seen = false;
  auto each_line = [&](auto&& fn) {
    std::istringstream in(text);
    std::string l, sec;
    int line_no = 0;
    while (std::getline(in, l)) {
      ++line_no;
      l = trim(l);
      if (l.empty() || l[0] == '#' || l[0] == ';') continue;
      if (l.front() == '[') {
        if (l.back() != ']') throw ConfigError("bad section header at line " +
                                               std::to_string(line_no) + ": " + l);
        sec = trim(l.substr(1, l.size() - 2));
        continue;
      }
      const size_t eq = l.find('=');
      if (eq == std::string::npos)
        throw ConfigError("expected key = value at line " + std::to_string(line_no) + ": " + l);
      fn(sec, trim(l.substr(0, eq)), trim(l.substr(eq + 1)));
    }
  };
  each_line([&](const std::string& sec, const std::string& key, const std::string& value) {
    if (sec == "pipeline" && key == "scale") {
      scale = scale_from_name(value);
      scale_seen = true;
    }
  });
  (void)scale_seen;
  PipelineConfig cfg = default_config(scale);
  each_line([&](const std::string& sec, const std::string& key, const std::string& value) {
    apply_config_line(cfg, sec, key, value);
  });
  return cfg;
}

std::string config_to_ini(const PipelineConfig& cfg) {
  std::ostringstream out;
  out << "[pipeline]\n";
  out << "scale = " << scale_name(cfg.scale) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "artifact_root = " << cfg.artifact_root << "\n";
  out << "threads = " << cfg.threads << "\n\n";
  out << "[network]\n";
  out << "trunk_len = " << cfg.trunk_len << "\n";
  out << "n_lines = " << cfg.n_lines << "\n";
  out << "finger_len = " << cfg.finger_len << "\n";
  out << "slice_line = " << cfg.slice_line << "\n";
  out << "slice_start = " << cfg.slice_start << "\n";
  out << "slice_count = " << cfg.slice_count << "\n\n";
  out << "[simulate]\n";
  out << "n_days = " << cfg.n_days << "\n";
  out << "mean_rate = " << fmt_g(cfg.mean_rate) << "\n";
  out << "rate_sigma = " << fmt_g(cfg.rate_sigma) << "\n";
  out << "hop_decay = " << fmt_g(cfg.hop_decay) << "\n";
  out << "headway_min = " << fmt_g(cfg.headway_min) << "\n";
  out << "delay_prob = " << fmt_g(cfg.delay_prob) << "\n";
  out << "delay_mean_s = " << fmt_g(cfg.delay_mean_s) << "\n";
  out << "cancel_prob = " << fmt_g(cfg.cancel_prob) << "\n";
  out << "episode_prob = " << fmt_g(cfg.episode_prob) << "\n";
  out << "episode_delay_prob = " << fmt_g(cfg.episode_delay_prob) << "\n";
  out << "episode_delay_mean_s = " << fmt_g(cfg.episode_delay_mean_s) << "\n";
  out << "episode_cancel_prob = " << fmt_g(cfg.episode_cancel_prob) << "\n";
  out << "episode_min_hours = " << fmt_g(cfg.episode_min_hours) << "\n";
  out << "episode_max_hours = " << fmt_g(cfg.episode_max_hours) << "\n";
  out << "reliability_elasticity = " << fmt_g(cfg.reliability_elasticity) << "\n";
  out << "community_sigma = " << fmt_g(cfg.community_sigma) << "\n";
  out << "community_rho = " << fmt_g(cfg.community_rho) << "\n";
  out << "per_hop_minutes = " << fmt_g(cfg.per_hop_minutes) << "\n\n";
  out << "[features]\n";
  out << "id_mode = " << (cfg.id_mode == IdMode::onehot_od ? "onehot_od" : "signed_station")
      << "\n";
  out << "ablation = " << (cfg.ablation ? "true" : "false") << "\n";
  out << "dump_csv = " << (cfg.dump_csv ? "true" : "false") << "\n\n";
  out << "[graphs]\n";
  out << "temporal_method = " << (cfg.temporal_method == TemporalMethod::dtw ? "dtw" : "fft")
      << "\n";
  out << "density_q = " << fmt_g(cfg.density_q) << "\n";
  out << "edge_cap = " << cfg.edge_cap << "\n";
  out << "cap_od_graphs = " << (cfg.cap_od_graphs ? "true" : "false") << "\n";
  out << "temporal_series_days = " << cfg.temporal_series_days << "\n\n";
  out << "[train]\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "learning_rate = " << fmt_g(cfg.learning_rate) << "\n";
  out << "batch = " << cfg.batch << "\n";
  out << "hidden_dim = " << cfg.hidden_dim << "\n";
  out << "sample_k1 = " << cfg.sample_k1 << "\n";
  out << "sample_k2 = " << cfg.sample_k2 << "\n";
  out << "clamp_predictions = " << (cfg.clamp_predictions ? "true" : "false") << "\n";
  out << "gcn_enabled = " << (cfg.gcn_enabled ? "true" : "false") << "\n";
  out << "gcn_epochs = " << cfg.gcn_epochs << "\n";
  out << "gcn_learning_rate = " << fmt_g(cfg.gcn_learning_rate) << "\n";
  out << "gcn_max_nodes = " << cfg.gcn_max_nodes << "\n\n";
  out << "[evaluate]\n";
  out << "test_fraction = " << fmt_g(cfg.test_fraction) << "\n";
  out << "delay_thresholds = ";
  for (size_t i = 0; i < cfg.delay_thresholds.size(); ++i)
    out << (i ? "," : "") << fmt_g(cfg.delay_thresholds[i]);
  out << "\n";
  out << "external_predictions = ";
  for (size_t i = 0; i < cfg.external_predictions.size(); ++i)
    out << (i ? ";" : "") << cfg.external_predictions[i].first << "="
        << cfg.external_predictions[i].second;
  out << "\n";
  return out.str();
}

uint64_t config_hash(const PipelineConfig& cfg) { return fnv1a64(config_to_ini(cfg)); }

StagePaths StagePaths::make(const PipelineConfig& cfg) {
  StagePaths p;
  p.root = cfg.artifact_root;
  p.simulate = p.root + "/simulate";
  p.features = p.root + "/features";
  p.graphs = p.root + "/graphs";
  p.train = p.root + "/train";
  p.evaluate = p.root + "/evaluate";
  return p;
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::simulate: return "simulate";
    case Stage::features: return "features";
    case Stage::graphs: return "graphs";
    case Stage::train: return "train";
    case Stage::evaluate: return "evaluate";
  }
  return "unknown";
}

void require_artifact(const std::string& path) {
  if (!file_exists(path))
    throw MissingArtifactError("missing upstream artifact: " + path);
}

GeneratedNetwork build_network(const PipelineConfig& cfg) {
  SyntheticNetworkSpec spec;
  spec.trunk_len = cfg.trunk_len;
  spec.n_lines = cfg.n_lines;
  spec.finger_len = cfg.finger_len;
  spec.seed = cfg.seed;
  GeneratedNetwork gen = make_synthetic_network(spec);
  if (cfg.scale == Scale::tiny)
    return contiguous_subnetwork(gen, cfg.slice_line, cfg.slice_start, cfg.slice_count);
  return gen;
}

namespace {

int resolved_threads(const PipelineConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void write_manifest(const std::string& dir, const std::string& stage, const PipelineConfig& cfg,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["stage"] = stage;
  j["scale"] = scale_name(cfg.scale);
  j["seed"] = cfg.seed;
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  j["config_hash"] = hash_hex;
  auto& in = j["inputs"] = nlohmann::json::object();
  for (const auto& path : inputs) {
    char h[24];
    std::snprintf(h, sizeof(h), "%016llx", static_cast<unsigned long long>(hash_file(path)));
    in[path] = h;
  }
  j["outputs"] = outputs;
  write_text_file(dir + "/manifest.json", j.dump(2) + "\n");
}

std::string ods_to_csv(const std::vector<OdPair>& ods) {
  std::ostringstream out;
  out << "od_index,origin,destination\n";
  for (const auto& od : ods) out << od.index << ',' << od.origin << ',' << od.destination << '\n';
  return out.str();
}

// ----- simulate -------------------------------------------------------------

void run_simulate(const PipelineConfig& cfg) {
  const StagePaths paths = StagePaths::make(cfg);
  ensure_directory(paths.simulate);

  const GeneratedNetwork gen = build_network(cfg);
  SimConfig sim;
  sim.seed = cfg.seed;
  sim.n_days = cfg.n_days;
  DemandRateSpec rates{cfg.mean_rate, cfg.rate_sigma, cfg.hop_decay, cfg.seed};
  sim.base_rates = default_base_rates(gen.net, rates);
  sim.weekday_factors = default_weekday_factors();
  sim.slot_profile = default_slot_profile();
  sim.community_assignment = gen.station_community;
  sim.headway_min.assign(gen.net.lines().size(), cfg.headway_min);
  sim.delay = {cfg.delay_prob, cfg.delay_mean_s};
  sim.cancel_prob = cfg.cancel_prob;
  sim.episodes = {cfg.episode_prob,       cfg.episode_delay_prob, cfg.episode_delay_mean_s,
                  cfg.episode_cancel_prob, cfg.episode_min_hours,  cfg.episode_max_hours};
  sim.reliability_elasticity = cfg.reliability_elasticity;
  sim.community_sigma = cfg.community_sigma;
  sim.community_rho = cfg.community_rho;
  sim.per_hop_minutes = cfg.per_hop_minutes;

  const auto [trips, trains] = simulate(sim, gen.net);

  write_text_file(paths.simulate + "/stations.csv", stations_to_csv(gen.net));
  write_text_file(paths.simulate + "/lines.csv", lines_to_csv(gen.net));
  std::ostringstream comm;
  comm << "station_id,community\n";
  for (size_t i = 0; i < gen.station_community.size(); ++i)
    comm << i << ',' << gen.station_community[i] << '\n';
  write_text_file(paths.simulate + "/communities.csv", comm.str());
  write_text_file(paths.simulate + "/trips.csv", trips_to_csv(trips));
  write_text_file(paths.simulate + "/trains.csv", trains_to_csv(trains));
  write_manifest(paths.simulate, "simulate", cfg, {},
                 {"stations.csv", "lines.csv", "communities.csv", "trips.csv", "trains.csv"});
  std::cout << "simulate: " << trips.size() << " trips, " << trains.size() << " train events, "
            << gen.net.n_stations() << " stations\n";
}

// ----- shared loaders --------------------------------------------------------

Network load_network_impl(const StagePaths& paths) {
  require_artifact(paths.simulate + "/stations.csv");
  require_artifact(paths.simulate + "/lines.csv");
  return network_from_csv(paths.simulate + "/stations.csv", paths.simulate + "/lines.csv");
}

// ----- features ---------------------------------------------------------------

void run_features(const PipelineConfig& cfg) {
  const StagePaths paths = StagePaths::make(cfg);
  ensure_directory(paths.features);
  const Network net = load_network_impl(paths);
  require_artifact(paths.simulate + "/trips.csv");
  require_artifact(paths.simulate + "/trains.csv");
  const TripLog trips = trips_from_csv(paths.simulate + "/trips.csv");
  const TrainLog trains = trains_from_csv(paths.simulate + "/trains.csv");

  int n_days = 0;
  for (const auto& e : trains) n_days = std::max(n_days, day_of_epoch(e.scheduled) + 1);
  if (n_days < 2) throw std::runtime_error("logs must span at least two days");
  std::vector<int> all_days(n_days);
  for (int d = 0; d < n_days; ++d) all_days[d] = d;
  const auto [train_days, test_days] = split_days(all_days, cfg.test_fraction, cfg.seed);
  {
    nlohmann::json j;
    j["train_days"] = train_days;
    j["test_days"] = test_days;
    write_text_file(paths.features + "/split.json", j.dump(2) + "\n");
  }

  std::vector<OdPair> ods;
  if (cfg.scale == Scale::twelve_od) {
    std::set<int> train_set(train_days.begin(), train_days.end());
    TripLog train_trips;
    for (const auto& t : trips)
      if (train_set.count(day_of_epoch(t.tap_in))) train_trips.push_back(t);
    ods = enumerate_top_k_od_pairs(net, {12, &train_trips});
  } else {
    ods = enumerate_all_od_pairs(net);
  }
  write_text_file(paths.features + "/ods.csv", ods_to_csv(ods));

  std::vector<std::string> warnings;
  std::vector<std::string> outputs{"split.json", "ods.csv", "dataset.bin"};
  {
    AssembleOptions opts;
    opts.id_mode = cfg.id_mode;
    opts.include_reliability = true;
    opts.norm_days = &train_days;
    opts.warnings = &warnings;
    opts.threads = resolved_threads(cfg);
    const Dataset ds = assemble_dataset(trips, trains, ods, net, opts);
    save_dataset(ds, paths.features + "/dataset.bin");
    if (cfg.dump_csv) {
      write_text_file(paths.features + "/features.csv", dataset_features_csv(ds));
      write_text_file(paths.features + "/targets.csv", dataset_targets_csv(ds));
      outputs.push_back("features.csv");
      outputs.push_back("targets.csv");
    }
    std::cout << "features: " << ds.samples.size() << " samples, " << ds.n_ods << " ODs, F="
              << ds.feature_dim << "\n";
  }
  if (cfg.ablation) {
    AssembleOptions opts;
    opts.id_mode = cfg.id_mode;
    opts.include_reliability = false;
    opts.norm_days = &train_days;
    opts.warnings = &warnings;
    opts.threads = resolved_threads(cfg);
    const Dataset ds = assemble_dataset(trips, trains, ods, net, opts);
    save_dataset(ds, paths.features + "/dataset_norel.bin");
    outputs.push_back("dataset_norel.bin");
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  write_manifest(paths.features, "features", cfg,
                 {paths.simulate + "/trips.csv", paths.simulate + "/trains.csv"}, outputs);
}

// ----- graphs ------------------------------------------------------------------

void run_graphs(const PipelineConfig& cfg) {
  const StagePaths paths = StagePaths::make(cfg);
  ensure_directory(paths.graphs);
  const Network net = load_network_impl(paths);
  require_artifact(paths.features + "/ods.csv");
  require_artifact(paths.features + "/split.json");
  require_artifact(paths.simulate + "/trips.csv");
  const auto ods = load_ods_csv(paths.features + "/ods.csv");
  auto [train_days, test_days] = load_split(paths.features);
  const TripLog trips = trips_from_csv(paths.simulate + "/trips.csv");
  const int threads = resolved_threads(cfg);

  // Per-OD complete-demand series over (the tail of) the training days.
  std::sort(train_days.begin(), train_days.end());
  std::vector<int> series_days = train_days;
  if (cfg.temporal_series_days > 0 &&
      static_cast<int>(series_days.size()) > cfg.temporal_series_days)
    series_days.erase(series_days.begin(),
                      series_days.end() - cfg.temporal_series_days);

  const TripIndex trip_index(trips, net.n_stations());
  std::vector<std::vector<double>> series(ods.size());
  for (size_t i = 0; i < ods.size(); ++i) {
    auto& s = series[i];
    s.reserve(series_days.size() * kSlotsPerDay);
    for (int day : series_days)
      for (int slot = 0; slot < kSlotsPerDay; ++slot)
        s.push_back(trip_index.od_departures(ods[i], {day, slot}));
  }

  nlohmann::json meta;
  auto build_threshold = [&](const DistanceMatrix& d, const std::string& file,
                             const char* meta_key) {
    const double sigma = percentile_threshold(d, cfg.density_q);
    const OdGraph g = threshold_graph(d, sigma);
    write_text_file(paths.graphs + "/" + file, graph_to_csv(g, d));
    meta[meta_key] = nlohmann::json::parse(graph_metadata_json(g, "threshold", sigma));
    return g.edges.size();
  };
  auto build_cap = [&](const DistanceMatrix& d, const std::string& file, const char* meta_key) {
    const OdGraph g = cap_edges(d, cfg.edge_cap);
    write_text_file(paths.graphs + "/" + file, graph_to_csv(g, d));
    meta[meta_key] = nlohmann::json::parse(
        graph_metadata_json(g, "cap", static_cast<double>(cfg.edge_cap)));
    return g.edges.size();
  };

  size_t e_t, e_s, e_o, e_d;
  {
    const DistanceMatrix dt = temporal_distance_matrix(series, cfg.temporal_method, threads);
    e_t = build_threshold(dt, "graph_t.csv", "t");
  }
  {
    const DistanceMatrix dsm = spatial_distance_matrix(ods, net, SpatialKind::centroid, threads);
    e_s = build_threshold(dsm, "graph_s.csv", "s");
  }
  {
    const DistanceMatrix dom = spatial_distance_matrix(ods, net, SpatialKind::origin, threads);
    e_o = cfg.cap_od_graphs ? build_cap(dom, "graph_o.csv", "o")
                            : build_threshold(dom, "graph_o.csv", "o");
  }
  {
    const DistanceMatrix ddm =
        spatial_distance_matrix(ods, net, SpatialKind::destination, threads);
    e_d = cfg.cap_od_graphs ? build_cap(ddm, "graph_d.csv", "d")
                            : build_threshold(ddm, "graph_d.csv", "d");
  }
  meta["n_ods"] = ods.size();
  meta["temporal_method"] = cfg.temporal_method == TemporalMethod::dtw ? "dtw" : "fft";
  meta["series_days"] = series_days.size();
  write_text_file(paths.graphs + "/graphs_meta.json", meta.dump(2) + "\n");
  write_manifest(paths.graphs, "graphs", cfg,
                 {paths.features + "/ods.csv", paths.features + "/split.json"},
                 {"graph_t.csv", "graph_s.csv", "graph_o.csv", "graph_d.csv", "graphs_meta.json"});
  std::cout << "graphs: edges t=" << e_t << " s=" << e_s << " o=" << e_o << " d=" << e_d << "\n";
}

// ----- train --------------------------------------------------------------------

std::vector<int> train_sample_indices(const Dataset& ds, const std::vector<int>& train_days) {
  std::set<int> train_set(train_days.begin(), train_days.end());
  std::vector<int> idx;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (train_set.count(ds.samples[i].interval.day)) idx.push_back(static_cast<int>(i));
  return idx;
}

void run_train(const PipelineConfig& cfg) {
  const StagePaths paths = StagePaths::make(cfg);
  ensure_directory(paths.train);
  require_artifact(paths.features + "/dataset.bin");
  require_artifact(paths.features + "/split.json");
  const Dataset ds = load_dataset(paths.features + "/dataset.bin");
  const auto [train_days, test_days] = load_split(paths.features);
  const auto graphs = load_graph_artifacts(paths.graphs);
  const std::array<Adjacency, 4> adj{Adjacency::from(graphs[0]), Adjacency::from(graphs[1]),
                                     Adjacency::from(graphs[2]), Adjacency::from(graphs[3])};
  const GraphSet graph_set{&adj[0], &adj[1], &adj[2], &adj[3]};
  const std::vector<int> train_idx = train_sample_indices(ds, train_days);

  std::ostringstream metrics;
  metrics << "model,epoch,loss\n";
  std::vector<std::string> outputs{"model_mgraphsage.json", "ridge.json",
                                   "training_metrics.csv"};

  TrainConfig tc;
  tc.seed = cfg.seed;
  tc.epochs = cfg.epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.batch = cfg.batch;
  tc.clamp_predictions = cfg.clamp_predictions;
  tc.hidden_dim = cfg.hidden_dim;
  tc.sample_sizes = {cfg.sample_k1, cfg.sample_k2};

  {
    std::vector<double> losses;
    const MGraphSageModel model = train(ds.samples, graph_set, tc, &train_idx, &losses);
    save_checkpoint(model, paths.train + "/model_mgraphsage.json");
    for (size_t e = 0; e < losses.size(); ++e)
      metrics << "mgraphsage," << e << ',' << fmt_g(losses[e]) << '\n';
    std::cout << "train: mgraphsage final epoch loss "
              << (losses.empty() ? 0.0 : losses.back()) << "\n";
  }

  if (cfg.ablation) {
    require_artifact(paths.features + "/dataset_norel.bin");
    const Dataset ds_norel = load_dataset(paths.features + "/dataset_norel.bin");
    std::vector<double> losses;
    const MGraphSageModel model = train(ds_norel.samples, graph_set, tc, &train_idx, &losses);
    save_checkpoint(model, paths.train + "/model_mgraphsage_norel.json");
    for (size_t e = 0; e < losses.size(); ++e)
      metrics << "mgraphsage_norel," << e << ',' << fmt_g(losses[e]) << '\n';
    outputs.push_back("model_mgraphsage_norel.json");
  }

  // Ridge: lambda picked on a held-back tail of the training days, then
  // refit on the full training split.
  {
    std::vector<int> sorted_days = train_days;
    std::sort(sorted_days.begin(), sorted_days.end());
    const int n_val = std::max(1, static_cast<int>(std::llround(0.2 * sorted_days.size())));
    const std::vector<int> val_days(sorted_days.end() - n_val, sorted_days.end());
    const std::vector<int> fit_days(sorted_days.begin(), sorted_days.end() - n_val);
    const std::set<int> val_set(val_days.begin(), val_days.end());
    const std::set<int> fit_set(fit_days.begin(), fit_days.end());

    RidgeAccumulator acc_fit(ds.feature_dim);
    RidgeAccumulator acc_all(ds.feature_dim);
    for (const auto& s : ds.samples) {
      if (fit_set.count(s.interval.day)) acc_fit.add(s.features, s.targets);
      if (fit_set.count(s.interval.day) || val_set.count(s.interval.day))
        acc_all.add(s.features, s.targets);
    }
    double best_lambda = 1e-6;
    double best_rmse = -1.0;
    for (double lambda : ridge_lambda_grid()) {
      const RidgeModel m = acc_fit.solve(lambda);
      double se = 0.0;
      int64_t n = 0;
      for (const auto& s : ds.samples) {
        if (!val_set.count(s.interval.day)) continue;
        for (int r = 0; r < s.features.rows; ++r) {
          const double e = ridge_predict_one(m, s.features.row(r)) - s.targets[r];
          se += e * e;
          ++n;
        }
      }
      const double rmse = std::sqrt(se / std::max<int64_t>(1, n));
      if (best_rmse < 0.0 || rmse < best_rmse) {
        best_rmse = rmse;
        best_lambda = lambda;
      }
    }
    const RidgeModel final_model = acc_all.solve(best_lambda);
    save_ridge(final_model, paths.train + "/ridge.json");
    std::cout << "train: ridge lambda " << fmt_g(best_lambda) << " (val rmse "
              << fmt_f6(best_rmse) << ")\n";
  }

  // GCN on the temporal graph; a graph beyond the configured node limit is
  // recorded as skipped rather than failing the stage.
  if (cfg.gcn_enabled) {
    GcnConfig gc;
    gc.hidden = cfg.hidden_dim;
    gc.learning_rate = cfg.gcn_learning_rate;
    gc.epochs = cfg.gcn_epochs;
    gc.batch = cfg.batch;
    gc.max_nodes = cfg.gcn_max_nodes;
    gc.seed = cfg.seed;
    try {
      std::vector<double> losses;
      const GcnModel model = gcn_train(ds.samples, graphs[0], gc, &train_idx, &losses);
      save_gcn(model, paths.train + "/gcn.json");
      for (size_t e = 0; e < losses.size(); ++e)
        metrics << "gcn," << e << ',' << fmt_g(losses[e]) << '\n';
      outputs.push_back("gcn.json");
    } catch (const ScalabilityError& e) {
      nlohmann::json j{{"skipped", true}, {"reason", e.what()}};
      write_text_file(paths.train + "/gcn_skipped.json", j.dump(2) + "\n");
      outputs.push_back("gcn_skipped.json");
      std::cerr << "warning: " << e.what() << "; GCN baseline skipped\n";
    }
  } else {
    nlohmann::json j{{"skipped", true}, {"reason", "disabled in config"}};
    write_text_file(paths.train + "/gcn_skipped.json", j.dump(2) + "\n");
    outputs.push_back("gcn_skipped.json");
  }

  write_text_file(paths.train + "/training_metrics.csv", metrics.str());
  write_manifest(paths.train, "train", cfg,
                 {paths.features + "/dataset.bin", paths.graphs + "/graph_t.csv"}, outputs);
}

// ----- evaluate --------------------------------------------------------------------

void run_evaluate(const PipelineConfig& cfg) {
  const StagePaths paths = StagePaths::make(cfg);
  ensure_directory(paths.evaluate);
  require_artifact(paths.features + "/dataset.bin");
  require_artifact(paths.train + "/model_mgraphsage.json");
  require_artifact(paths.train + "/ridge.json");
  require_artifact(paths.simulate + "/trains.csv");

  const Network net = load_network_impl(paths);
  const Dataset ds = load_dataset(paths.features + "/dataset.bin");
  const auto ods = load_ods_csv(paths.features + "/ods.csv");
  const auto [train_days, test_days] = load_split(paths.features);
  const auto graphs = load_graph_artifacts(paths.graphs);
  const std::array<Adjacency, 4> adj{Adjacency::from(graphs[0]), Adjacency::from(graphs[1]),
                                     Adjacency::from(graphs[2]), Adjacency::from(graphs[3])};
  const GraphSet graph_set{&adj[0], &adj[1], &adj[2], &adj[3]};
  const TrainLog trains = trains_from_csv(paths.simulate + "/trains.csv");
  const TrainIndex train_index(trains, net);

  const std::set<int> test_set(test_days.begin(), test_days.end());
  std::vector<int> test_idx;
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (test_set.count(ds.samples[i].interval.day)) test_idx.push_back(static_cast<int>(i));
  if (test_idx.empty()) throw std::runtime_error("no test samples in the dataset");

  const size_t flat_size = test_idx.size() * ds.n_ods;
  std::vector<double> truth;
  truth.reserve(flat_size);
  std::vector<int64_t> prediction_times;
  prediction_times.reserve(test_idx.size());
  for (int i : test_idx) {
    const auto& s = ds.samples[i];
    truth.insert(truth.end(), s.targets.begin(), s.targets.end());
    prediction_times.push_back(s.prediction_time);
  }

  std::map<std::string, std::vector<double>> methods;

  {
    const MGraphSageModel model = load_checkpoint(paths.train + "/model_mgraphsage.json");
    std::vector<double>& out = methods["mgraphsage"];
    out.reserve(flat_size);
    for (int i : test_idx) {
      const auto pred = predict_full(model, ds.samples[i], graph_set);
      out.insert(out.end(), pred.begin(), pred.end());
    }
  }

  if (file_exists(paths.train + "/model_mgraphsage_norel.json")) {
    require_artifact(paths.features + "/dataset_norel.bin");
    const Dataset ds_norel = load_dataset(paths.features + "/dataset_norel.bin");
    const MGraphSageModel model = load_checkpoint(paths.train + "/model_mgraphsage_norel.json");
    std::vector<double>& out = methods["mgraphsage_norel"];
    out.reserve(flat_size);
    for (int i : test_idx) {
      const auto pred = predict_full(model, ds_norel.samples[i], graph_set);
      out.insert(out.end(), pred.begin(), pred.end());
    }
  }

  {
    const RidgeModel ridge = load_ridge(paths.train + "/ridge.json");
    std::vector<double>& out = methods["rr"];
    out.reserve(flat_size);
    for (int i : test_idx) {
      const auto pred = ridge_predict(ridge, ds.samples[i].features);
      out.insert(out.end(), pred.begin(), pred.end());
    }
  }

  if (file_exists(paths.train + "/gcn.json")) {
    const GcnModel gcn = load_gcn(paths.train + "/gcn.json");
    const Csr ahat = normalized_adjacency(graphs[0]);
    std::vector<double>& out = methods["gcn"];
    out.reserve(flat_size);
    for (int i : test_idx) {
      const auto pred = gcn_predict(gcn, ds.samples[i], ahat);
      out.insert(out.end(), pred.begin(), pred.end());
    }
  }

  for (const auto& [name, path] : cfg.external_predictions) {
    require_artifact(path);
    const auto table = load_external_predictions(path, ds.n_ods);
    std::vector<double>& out = methods[name];
    out.reserve(flat_size);
    for (int i : test_idx) {
      const auto& s = ds.samples[i];
      const auto it = table.find({s.interval.day, s.interval.slot});
      if (it == table.end())
        throw std::runtime_error("external predictions '" + name + "' missing day " +
                                 iso_date(s.interval.day) + " slot " +
                                 std::to_string(s.interval.slot));
      out.insert(out.end(), it->second.begin(), it->second.end());
    }
  }

  ScenarioMasks masks;
  masks.specs = standard_scenarios(cfg.delay_thresholds);
  for (const auto& spec : masks.specs) {
    const auto grid = scenario_mask(train_index, ods, net, prediction_times, spec);
    std::vector<char> flat;
    flat.reserve(flat_size);
    for (const auto& row : grid) flat.insert(flat.end(), row.begin(), row.end());
    masks.flat.push_back(std::move(flat));
  }

  const EvalReport report = build_report(methods, truth, masks);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  write_text_file(paths.evaluate + "/report.csv", report_to_csv(report));
  write_text_file(paths.evaluate + "/pvalues.csv", pvalues_to_csv(report));

  std::map<std::string, std::vector<double>> clamped;
  for (const auto& [name, pred] : methods) {
    auto& v = clamped[name];
    v.reserve(pred.size());
    for (double x : pred) v.push_back(std::max(0.0, x));
  }
  const EvalReport clamped_report = build_report(clamped, truth, masks);
  write_text_file(paths.evaluate + "/report_clamped.csv", report_to_csv(clamped_report));

  write_manifest(paths.evaluate, "evaluate", cfg,
                 {paths.features + "/dataset.bin", paths.train + "/model_mgraphsage.json",
                  paths.train + "/ridge.json"},
                 {"report.csv", "pvalues.csv", "report_clamped.csv"});

  // Human summary.
  std::cout << "evaluate: " << test_idx.size() << " test samples x " << ds.n_ods << " ODs\n";
  std::string current;
  for (const auto& row : report.rows) {
    if (row.scenario != current) {
      current = row.scenario;
      std::cout << current << "\n";
    }
    std::cout << "  " << (row.best ? "*" : " ") << ' ' << row.method << " rmse="
              << fmt_f6(row.rmse) << " mae=" << fmt_f6(row.mae) << " n=" << row.n << "\n";
  }
}

}  // namespace

Network load_network_artifacts(const StagePaths& paths) { return load_network_impl(paths); }

std::vector<OdPair> load_ods_csv(const std::string& path) {
  require_artifact(path);
  std::vector<OdPair> ods;
  for (const auto& row : read_csv_rows(path))
    ods.push_back({std::stoi(row.at(0)), std::stoi(row.at(1)), std::stoi(row.at(2))});
  return ods;
}

std::pair<std::vector<int>, std::vector<int>> load_split(const std::string& features_dir) {
  require_artifact(features_dir + "/split.json");
  const auto j = nlohmann::json::parse(read_text_file(features_dir + "/split.json"));
  return {j.at("train_days").get<std::vector<int>>(), j.at("test_days").get<std::vector<int>>()};
}

std::array<OdGraph, 4> load_graph_artifacts(const std::string& graphs_dir) {
  require_artifact(graphs_dir + "/graphs_meta.json");
  const auto meta = nlohmann::json::parse(read_text_file(graphs_dir + "/graphs_meta.json"));
  const int n = meta.at("n_ods").get<int>();
  std::array<OdGraph, 4> out;
  const std::array<std::pair<const char*, const char*>, 4> files{
      {{"t", "graph_t.csv"}, {"s", "graph_s.csv"}, {"o", "graph_o.csv"}, {"d", "graph_d.csv"}}};
  for (size_t i = 0; i < files.size(); ++i) {
    const std::string path = graphs_dir + "/" + files[i].second;
    require_artifact(path);
    const DistKind kind =
        dist_kind_from_name(meta.at(files[i].first).at("kind").get<std::string>());
    out[i] = graph_from_csv(path, n, kind);
  }
  return out;
}

void run_stage(Stage stage, const PipelineConfig& cfg) {
  switch (stage) {
    case Stage::simulate: run_simulate(cfg); return;
    case Stage::features: run_features(cfg); return;
    case Stage::graphs: run_graphs(cfg); return;
    case Stage::train: run_train(cfg); return;
    case Stage::evaluate: run_evaluate(cfg); return;
  }
}

void run_all(const PipelineConfig& cfg) {
  run_stage(Stage::simulate, cfg);
  run_stage(Stage::features, cfg);
  run_stage(Stage::graphs, cfg);
  run_stage(Stage::train, cfg);
  run_stage(Stage::evaluate, cfg);
}

}  // namespace odsage
