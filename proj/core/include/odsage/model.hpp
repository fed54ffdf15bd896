#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "odsage/features.hpp"
#include "odsage/graphs.hpp"
#include "odsage/matrix.hpp"
#include "odsage/rng.hpp"

namespace odsage {

// Sorted adjacency lists; the evaluation structure for GraphSAGE layers.
struct Adjacency {
  int n = 0;
  std::vector<std::vector<int>> neigh;

  static Adjacency from(const OdGraph& g);
};

enum class Activation { relu, identity };

struct SageLayer {
  Matrix weight;  // out_dim x in_dim
  std::vector<double> bias;
  Activation activation = Activation::relu;

  int in_dim() const { return weight.cols; }
  int out_dim() const { return weight.rows; }
};

struct SageChannel {
  SageLayer layer1;  // relu
  SageLayer layer2;  // identity; non-linearity comes after concatenation
};

// Four channels over the (t, s, o, d) graphs, two mean-aggregator layers
// each, concatenated, ReLU, then a linear head to one output per vertex.
struct MGraphSageModel {
  std::array<SageChannel, 4> channels;
  std::vector<double> head_weight;  // 4 * hidden_dim
  double head_bias = 0.0;
  int feature_dim = 0;
  int hidden_dim = 0;
  std::array<int, 2> sample_sizes{10, 10};
  bool clamp_predictions = false;
  uint64_t seed = 0;  // the training seed, recorded for provenance
};

struct TrainConfig {
  uint64_t seed = 42;
  int epochs = 10;
  double learning_rate = 1e-3;
  int batch = 1;  // prediction times per gradient step
  bool clamp_predictions = false;
  int hidden_dim = 64;
  std::array<int, 2> sample_sizes{10, 10};
};

// k neighbor draws, uniform with replacement; an isolated vertex yields k
// copies of itself.
std::vector<int> sample_neighbors(const Adjacency& g, int v, int k, Rng& rng);

// One fixed multiset of sampled neighbors per node.
struct LayerSamples {
  std::vector<std::vector<int>> per_node;
};

struct ChannelSamples {
  LayerSamples layer1, layer2;
};

using ModelSamples = std::array<ChannelSamples, 4>;

using GraphSet = std::array<const Adjacency*, 4>;  // ordered (t, s, o, d)

ModelSamples draw_samples(const GraphSet& graphs, std::array<int, 2> sample_sizes, Rng& rng);

// Mean-aggregator layer: each vertex averages its own embedding with the
// sampled multiset (or, when samples is null, with its full neighborhood),
// then applies the affine map and activation. Accumulation is done in
// sorted-id order so the result is bitwise independent of sample order.
Matrix sage_layer_forward(const Matrix& h_prev, const Adjacency& g, const SageLayer& layer,
                          const LayerSamples* samples);

// Channel forwards per the two-layer scheme, concatenation across the four
// channels, ReLU, linear head. Null samples means deterministic
// full-neighborhood evaluation.
std::vector<double> mgraphsage_forward(const Matrix& features, const GraphSet& graphs,
                                       const MGraphSageModel& model, const ModelSamples* samples);

// Sampling variant matching the training path: draws fresh neighbor
// multisets from rng, then evaluates.
std::vector<double> mgraphsage_forward(const Matrix& features, const GraphSet& graphs,
                                       const MGraphSageModel& model, Rng& rng);

struct ModelGradients {
  std::array<SageChannel, 4> channels;  // same shapes as the parameters
  std::vector<double> head_weight;
  double head_bias = 0.0;
};

// Mean-squared-error loss over vertices and its analytic gradients via
// reverse-mode differentiation, with the neighbor samples held fixed for
// the forward/backward pair.
std::pair<double, ModelGradients> loss_and_gradients(const MGraphSageModel& model,
                                                     const Matrix& features,
                                                     const GraphSet& graphs,
                                                     const std::vector<double>& targets,
                                                     const ModelSamples* samples);

std::pair<double, ModelGradients> loss_and_gradients(const MGraphSageModel& model,
                                                     const Matrix& features,
                                                     const GraphSet& graphs,
                                                     const std::vector<double>& targets,
                                                     Rng& rng);

// Glorot-uniform initialization, fully determined by the seed.
MGraphSageModel init_model(int feature_dim, const TrainConfig& config);

// Plain SGD with per-step neighbor resampling. `sample_indices` restricts
// training to a subset of the samples (e.g. the training split); null uses
// all. Per-epoch mean training loss is appended to epoch_losses when given.
MGraphSageModel train(const std::vector<SampleSet>& samples, const GraphSet& graphs,
                      const TrainConfig& config,
                      const std::vector<int>* sample_indices = nullptr,
                      std::vector<double>* epoch_losses = nullptr);

std::vector<double> predict(const MGraphSageModel& model, const SampleSet& sample,
                            const GraphSet& graphs, Rng& rng);

// Deterministic full-neighborhood evaluation.
std::vector<double> predict_full(const MGraphSageModel& model, const SampleSet& sample,
                                 const GraphSet& graphs);

// Self-describing JSON checkpoint; parameters as decimal strings that
// round-trip exactly.
void save_checkpoint(const MGraphSageModel& model, const std::string& path);
MGraphSageModel load_checkpoint(const std::string& path);

}  // namespace odsage
