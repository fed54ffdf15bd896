#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "odsage/graphs.hpp"
#include "odsage/network.hpp"

namespace odsage {

enum class Scale { twelve_od, tiny, full };

std::string scale_name(Scale s);
Scale scale_from_name(const std::string& name);

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Whole-pipeline configuration. Scale presets pin the per-scale switches
// (DTW vs FFT, thresholds vs edge cap, node-ID encoding); any field can
// be overridden from the config file.
struct PipelineConfig {
  Scale scale = Scale::tiny;
  uint64_t seed = 42;
  std::string artifact_root = "artifacts";
  int threads = 0;  // 0 = hardware concurrency

  // network
  int trunk_len = 12;
  int n_lines = 6;
  int finger_len = 6;
  int slice_line = 0;   // tiny-scale contiguous slice
  int slice_start = 3;
  int slice_count = 12;

  // simulate
  int n_days = 240;
  double mean_rate = 2.0;
  double rate_sigma = 0.6;
  double hop_decay = 12.0;
  double headway_min = 10.0;
  double delay_prob = 0.25;
  double delay_mean_s = 60.0;
  double cancel_prob = 0.01;
  double episode_prob = 0.4;
  double episode_delay_prob = 0.9;
  double episode_delay_mean_s = 480.0;
  double episode_cancel_prob = 0.3;
  double episode_min_hours = 1.0;
  double episode_max_hours = 3.0;
  double reliability_elasticity = -0.8;
  double community_sigma = 0.5;
  double community_rho = 0.8;
  double per_hop_minutes = 2.5;

  // features
  IdMode id_mode = IdMode::signed_station;
  bool ablation = true;  // also assemble/train the reliability-ablated variant
  bool dump_csv = false;

  // graphs
  TemporalMethod temporal_method = TemporalMethod::dtw;
  double density_q = 0.05;
  int64_t edge_cap = 10000;
  bool cap_od_graphs = false;       // cap origin/destination graphs instead of thresholding
  int temporal_series_days = 20;    // last K training days in the DTW/FFT series; 0 = all

  // train
  int epochs = 10;
  double learning_rate = 1e-3;
  int batch = 1;
  int hidden_dim = 64;
  int sample_k1 = 10;
  int sample_k2 = 10;
  bool clamp_predictions = false;
  bool gcn_enabled = true;
  int gcn_epochs = 10;
  double gcn_learning_rate = 1e-4;
  int gcn_max_nodes = 2000;

  // evaluate
  double test_fraction = 0.25;
  std::vector<double> delay_thresholds{60.0, 180.0, 300.0};
  std::vector<std::pair<std::string, std::string>> external_predictions;  // name, path
};

PipelineConfig default_config(Scale scale);

// INI-style file with [section] headers; unknown keys are errors carrying
// the full field path.
PipelineConfig load_config_file(const std::string& path);
void apply_config_line(PipelineConfig& cfg, const std::string& section, const std::string& key,
                       const std::string& value);
std::string config_to_ini(const PipelineConfig& cfg);
uint64_t config_hash(const PipelineConfig& cfg);

struct StagePaths {
  std::string root;
  std::string simulate;
  std::string features;
  std::string graphs;
  std::string train;
  std::string evaluate;

  static StagePaths make(const PipelineConfig& cfg);
};

enum class Stage { simulate, features, graphs, train, evaluate };

std::string stage_name(Stage s);

// Runs one stage, reading upstream artifacts from disk and writing this
// stage's outputs plus a manifest. Throws MissingArtifactError naming the
// first missing upstream file.
void run_stage(Stage stage, const PipelineConfig& cfg);

void run_all(const PipelineConfig& cfg);

// The synthetic network for a configuration (the tiny scale slices the
// full network down to its contiguous window).
GeneratedNetwork build_network(const PipelineConfig& cfg);

// ----- artifact loaders (shared by the CLI, tests and downstream stages) ----

Network load_network_artifacts(const StagePaths& paths);
std::vector<OdPair> load_ods_csv(const std::string& path);
std::pair<std::vector<int>, std::vector<int>> load_split(const std::string& features_dir);

// The four graphs in (t, s, o, d) order as written by the graphs stage.
std::array<OdGraph, 4> load_graph_artifacts(const std::string& graphs_dir);

void require_artifact(const std::string& path);

}  // namespace odsage
