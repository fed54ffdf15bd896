#include "odsage/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "odsage/io.hpp"

namespace odsage {

Adjacency Adjacency::from(const OdGraph& g) {
  Adjacency a;
  a.n = g.n;
  a.neigh.resize(g.n);
  for (const auto& [i, j] : g.edges) {
    a.neigh[i].push_back(j);
    a.neigh[j].push_back(i);
  }
  for (auto& nb : a.neigh) std::sort(nb.begin(), nb.end());
  return a;
}

std::vector<int> sample_neighbors(const Adjacency& g, int v, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("sample size must be >= 1");
  const auto& nb = g.neigh[v];
  std::vector<int> out(k);
  if (nb.empty()) {
    std::fill(out.begin(), out.end(), v);
    return out;
  }
  for (int i = 0; i < k; ++i) out[i] = nb[rng.uniform_int(static_cast<int>(nb.size()))];
  return out;
}

ModelSamples draw_samples(const GraphSet& graphs, std::array<int, 2> sample_sizes, Rng& rng) {
  ModelSamples ms;
  for (int c = 0; c < 4; ++c) {
    const Adjacency& g = *graphs[c];
    ms[c].layer1.per_node.resize(g.n);
    ms[c].layer2.per_node.resize(g.n);
    for (int v = 0; v < g.n; ++v) ms[c].layer1.per_node[v] = sample_neighbors(g, v, sample_sizes[0], rng);
    for (int v = 0; v < g.n; ++v) ms[c].layer2.per_node[v] = sample_neighbors(g, v, sample_sizes[1], rng);
  }
  return ms;
}

namespace {

// Mean of the vertex's own row and its neighbor rows (sampled multiset or
// full neighborhood), accumulated in ascending vertex-id order.
Matrix aggregate_mean(const Matrix& h, const Adjacency& g, const LayerSamples* samples) {
  Matrix out(h.rows, h.cols);
  const int cols = h.cols;
  std::vector<int> sorted;
  for (int v = 0; v < h.rows; ++v) {
    double* ov = out.row(v);
    const double* hv = h.row(v);
    std::copy(hv, hv + cols, ov);
    const std::vector<int>* list;
    if (samples != nullptr) {
      sorted = samples->per_node[v];
      std::sort(sorted.begin(), sorted.end());
      list = &sorted;
    } else {
      list = &g.neigh[v];
    }
    for (int u : *list) axpy(1.0, h.row(u), ov, cols);
    const double inv = 1.0 / (1.0 + static_cast<double>(list->size()));
    for (int j = 0; j < cols; ++j) ov[j] *= inv;
  }
  return out;
}

// Adjoint of aggregate_mean: scatters each vertex's upstream gradient to
// itself and its aggregation sources with the same 1/(1+k) weight.
Matrix aggregate_mean_backward(const Matrix& dm, const Adjacency& g, const LayerSamples* samples) {
  Matrix dh(dm.rows, dm.cols);
  const int cols = dm.cols;
  std::vector<int> sorted;
  for (int v = 0; v < dm.rows; ++v) {
    const std::vector<int>* list;
    if (samples != nullptr) {
      sorted = samples->per_node[v];
      std::sort(sorted.begin(), sorted.end());
      list = &sorted;
    } else {
      list = &g.neigh[v];
    }
    const double w = 1.0 / (1.0 + static_cast<double>(list->size()));
    const double* dv = dm.row(v);
    axpy(w, dv, dh.row(v), cols);
    for (int u : *list) axpy(w, dv, dh.row(u), cols);
  }
  return dh;
}

void affine_forward(const Matrix& m, const SageLayer& layer, Matrix& z) {
  z = Matrix(m.rows, layer.out_dim());
  gemm_nt_add(m, layer.weight, z);
  for (int v = 0; v < z.rows; ++v) {
    double* zv = z.row(v);
    for (int j = 0; j < z.cols; ++j) zv[j] += layer.bias[j];
  }
}

void relu_inplace(Matrix& m) {
  for (double& v : m.data) v = v > 0.0 ? v : 0.0;
}

struct ChannelCache {
  Matrix m1, z1, h1, m2, z2;
};

void channel_forward(const Matrix& features, const Adjacency& g, const SageChannel& ch,
                     const ChannelSamples* samples, ChannelCache& cache) {
  cache.m1 = aggregate_mean(features, g, samples ? &samples->layer1 : nullptr);
  affine_forward(cache.m1, ch.layer1, cache.z1);
  cache.h1 = cache.z1;
  if (ch.layer1.activation == Activation::relu) relu_inplace(cache.h1);
  cache.m2 = aggregate_mean(cache.h1, g, samples ? &samples->layer2 : nullptr);
  affine_forward(cache.m2, ch.layer2, cache.z2);
  if (ch.layer2.activation == Activation::relu) relu_inplace(cache.z2);
}

void validate_inputs(const Matrix& features, const GraphSet& graphs,
                     const MGraphSageModel& model) {
  if (features.cols != model.feature_dim)
    throw std::invalid_argument("channel/feature mismatch: feature width " +
                                std::to_string(features.cols) + " != model " +
                                std::to_string(model.feature_dim));
  for (const Adjacency* g : graphs) {
    if (g == nullptr) throw std::invalid_argument("channel/feature mismatch: missing graph");
    if (g->n != features.rows)
      throw std::invalid_argument("channel/feature mismatch: graph has " + std::to_string(g->n) +
                                  " vertices, features " + std::to_string(features.rows));
  }
  for (double v : features.data)
    if (!std::isfinite(v)) throw std::invalid_argument("features must be finite");
}

std::vector<double> forward_impl(const Matrix& features, const GraphSet& graphs,
                                 const MGraphSageModel& model, const ModelSamples* samples,
                                 std::array<ChannelCache, 4>* caches_out, Matrix* concat_out,
                                 bool apply_clamp = true) {
  validate_inputs(features, graphs, model);
  const int n = features.rows;
  const int h = model.hidden_dim;
  Matrix concat(n, 4 * h);
  std::array<ChannelCache, 4> local;
  auto& caches = caches_out != nullptr ? *caches_out : local;
  for (int c = 0; c < 4; ++c) {
    channel_forward(features, *graphs[c], model.channels[c],
                    samples ? &(*samples)[c] : nullptr, caches[c]);
    for (int v = 0; v < n; ++v)
      std::copy(caches[c].z2.row(v), caches[c].z2.row(v) + h, concat.row(v) + c * h);
  }
  std::vector<double> out(n);
  for (int v = 0; v < n; ++v) {
    const double* row = concat.row(v);
    double acc = model.head_bias;
    for (int j = 0; j < 4 * h; ++j) acc += (row[j] > 0.0 ? row[j] : 0.0) * model.head_weight[j];
    out[v] = acc;
  }
  if (concat_out != nullptr) *concat_out = std::move(concat);
  if (apply_clamp && model.clamp_predictions)
    for (double& v : out) v = std::max(0.0, v);
  return out;
}

ModelGradients zero_gradients(const MGraphSageModel& model) {
  ModelGradients g;
  for (int c = 0; c < 4; ++c) {
    g.channels[c].layer1.weight = Matrix(model.hidden_dim, model.feature_dim);
    g.channels[c].layer1.bias.assign(model.hidden_dim, 0.0);
    g.channels[c].layer2.weight = Matrix(model.hidden_dim, model.hidden_dim);
    g.channels[c].layer2.bias.assign(model.hidden_dim, 0.0);
  }
  g.head_weight.assign(4 * model.hidden_dim, 0.0);
  g.head_bias = 0.0;
  return g;
}

}  // namespace

Matrix sage_layer_forward(const Matrix& h_prev, const Adjacency& g, const SageLayer& layer,
                          const LayerSamples* samples) {
  if (h_prev.rows != g.n) throw std::invalid_argument("row count does not match graph");
  if (h_prev.cols != layer.in_dim()) throw std::invalid_argument("dimension mismatch");
  const Matrix m = aggregate_mean(h_prev, g, samples);
  Matrix z;
  affine_forward(m, layer, z);
  if (layer.activation == Activation::relu) relu_inplace(z);
  return z;
}

std::vector<double> mgraphsage_forward(const Matrix& features, const GraphSet& graphs,
                                       const MGraphSageModel& model, const ModelSamples* samples) {
  return forward_impl(features, graphs, model, samples, nullptr, nullptr);
}

std::vector<double> mgraphsage_forward(const Matrix& features, const GraphSet& graphs,
                                       const MGraphSageModel& model, Rng& rng) {
  const ModelSamples ms = draw_samples(graphs, model.sample_sizes, rng);
  return forward_impl(features, graphs, model, &ms, nullptr, nullptr);
}

std::pair<double, ModelGradients> loss_and_gradients(const MGraphSageModel& model,
                                                     const Matrix& features,
                                                     const GraphSet& graphs,
                                                     const std::vector<double>& targets,
                                                     const ModelSamples* samples) {
  const int n = features.rows;
  if (static_cast<int>(targets.size()) != n)
    throw std::invalid_argument("targets length must equal vertex count");
  const int h = model.hidden_dim;
  for (const auto& ch : model.channels)
    if (ch.layer1.activation != Activation::relu || ch.layer2.activation != Activation::identity)
      throw std::invalid_argument("gradients assume relu layer-1 and identity layer-2");

  std::array<ChannelCache, 4> caches;
  Matrix concat;
  // Raw (unclamped) predictions drive the loss.
  const std::vector<double> pred =
      forward_impl(features, graphs, model, samples, &caches, &concat, /*apply_clamp=*/false);

  double loss = 0.0;
  std::vector<double> dpred(n);
  for (int v = 0; v < n; ++v) {
    const double r = pred[v] - targets[v];
    loss += r * r;
    dpred[v] = 2.0 * r / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!std::isfinite(loss)) throw std::runtime_error("training diverged: non-finite loss");

  ModelGradients grads = zero_gradients(model);

  // Head and concat-ReLU backward.
  Matrix dconcat(n, 4 * h);
  for (int v = 0; v < n; ++v) {
    const double* cv = concat.row(v);
    double* dv = dconcat.row(v);
    const double dy = dpred[v];
    grads.head_bias += dy;
    for (int j = 0; j < 4 * h; ++j) {
      const double r = cv[j] > 0.0 ? cv[j] : 0.0;
      grads.head_weight[j] += dy * r;
      dv[j] = cv[j] > 0.0 ? dy * model.head_weight[j] : 0.0;
    }
  }

  for (int c = 0; c < 4; ++c) {
    const ChannelCache& cache = caches[c];
    const SageChannel& ch = model.channels[c];
    SageChannel& gch = grads.channels[c];
    const LayerSamples* s2 = samples ? &(*samples)[c].layer2 : nullptr;
    const Adjacency& g = *graphs[c];

    Matrix dz2(n, h);
    for (int v = 0; v < n; ++v)
      std::copy(dconcat.row(v) + c * h, dconcat.row(v) + (c + 1) * h, dz2.row(v));

    for (int v = 0; v < n; ++v) {
      const double* row = dz2.row(v);
      for (int j = 0; j < h; ++j) gch.layer2.bias[j] += row[j];
    }
    gemm_tn_add(dz2, cache.m2, gch.layer2.weight);

    Matrix dm2(n, h);
    gemm_nn_add(dz2, ch.layer2.weight, dm2);
    Matrix dh1 = aggregate_mean_backward(dm2, g, s2);

    // ReLU mask from layer 1's pre-activation.
    for (int v = 0; v < n; ++v) {
      const double* zv = cache.z1.row(v);
      double* dv = dh1.row(v);
      for (int j = 0; j < h; ++j)
        if (zv[j] <= 0.0) dv[j] = 0.0;
    }
    for (int v = 0; v < n; ++v) {
      const double* row = dh1.row(v);
      for (int j = 0; j < h; ++j) gch.layer1.bias[j] += row[j];
    }
    gemm_tn_add(dh1, cache.m1, gch.layer1.weight);
  }
  return {loss, std::move(grads)};
}

std::pair<double, ModelGradients> loss_and_gradients(const MGraphSageModel& model,
                                                     const Matrix& features,
                                                     const GraphSet& graphs,
                                                     const std::vector<double>& targets,
                                                     Rng& rng) {
  const ModelSamples ms = draw_samples(graphs, model.sample_sizes, rng);
  return loss_and_gradients(model, features, graphs, targets, &ms);
}

MGraphSageModel init_model(int feature_dim, const TrainConfig& config) {
  MGraphSageModel m;
  m.feature_dim = feature_dim;
  m.hidden_dim = config.hidden_dim;
  m.sample_sizes = config.sample_sizes;
  m.clamp_predictions = config.clamp_predictions;
  m.seed = config.seed;
  Rng rng(derive_seed(config.seed, 0x696e6974));
  auto glorot = [&](Matrix& w, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
  };
  const int h = config.hidden_dim;
  for (int c = 0; c < 4; ++c) {
    auto& ch = m.channels[c];
    ch.layer1.weight = Matrix(h, feature_dim);
    ch.layer1.bias.assign(h, 0.0);
    ch.layer1.activation = Activation::relu;
    glorot(ch.layer1.weight, feature_dim, h);
    ch.layer2.weight = Matrix(h, h);
    ch.layer2.bias.assign(h, 0.0);
    ch.layer2.activation = Activation::identity;
    glorot(ch.layer2.weight, h, h);
  }
  m.head_weight.resize(4 * h);
  const double bound = std::sqrt(6.0 / static_cast<double>(4 * h + 1));
  for (double& v : m.head_weight) v = rng.uniform(-bound, bound);
  m.head_bias = 0.0;
  return m;
}

namespace {

void sgd_update(MGraphSageModel& model, const ModelGradients& grads, double lr) {
  for (int c = 0; c < 4; ++c) {
    auto& ch = model.channels[c];
    const auto& gc = grads.channels[c];
    for (size_t i = 0; i < ch.layer1.weight.data.size(); ++i)
      ch.layer1.weight.data[i] -= lr * gc.layer1.weight.data[i];
    for (size_t i = 0; i < ch.layer1.bias.size(); ++i) ch.layer1.bias[i] -= lr * gc.layer1.bias[i];
    for (size_t i = 0; i < ch.layer2.weight.data.size(); ++i)
      ch.layer2.weight.data[i] -= lr * gc.layer2.weight.data[i];
    for (size_t i = 0; i < ch.layer2.bias.size(); ++i) ch.layer2.bias[i] -= lr * gc.layer2.bias[i];
  }
  for (size_t i = 0; i < model.head_weight.size(); ++i)
    model.head_weight[i] -= lr * grads.head_weight[i];
  model.head_bias -= lr * grads.head_bias;
}

void accumulate(ModelGradients& into, const ModelGradients& from, double scale) {
  for (int c = 0; c < 4; ++c) {
    for (size_t i = 0; i < into.channels[c].layer1.weight.data.size(); ++i)
      into.channels[c].layer1.weight.data[i] += scale * from.channels[c].layer1.weight.data[i];
    for (size_t i = 0; i < into.channels[c].layer1.bias.size(); ++i)
      into.channels[c].layer1.bias[i] += scale * from.channels[c].layer1.bias[i];
    for (size_t i = 0; i < into.channels[c].layer2.weight.data.size(); ++i)
      into.channels[c].layer2.weight.data[i] += scale * from.channels[c].layer2.weight.data[i];
    for (size_t i = 0; i < into.channels[c].layer2.bias.size(); ++i)
      into.channels[c].layer2.bias[i] += scale * from.channels[c].layer2.bias[i];
  }
  for (size_t i = 0; i < into.head_weight.size(); ++i)
    into.head_weight[i] += scale * from.head_weight[i];
  into.head_bias += scale * from.head_bias;
}

void fisher_yates(std::vector<int>& v, Rng& rng) {
  for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
    const int j = rng.uniform_int(i + 1);
    std::swap(v[i], v[j]);
  }
}

}  // namespace

MGraphSageModel train(const std::vector<SampleSet>& samples, const GraphSet& graphs,
                      const TrainConfig& config, const std::vector<int>* sample_indices,
                      std::vector<double>* epoch_losses) {
  if (samples.empty()) throw std::invalid_argument("training needs at least one sample");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  const int feature_dim = samples[0].features.cols;
  MGraphSageModel model = init_model(feature_dim, config);

  std::vector<int> order;
  if (sample_indices != nullptr)
    order = *sample_indices;
  else {
    order.resize(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) order[i] = static_cast<int>(i);
  }
  if (order.empty()) throw std::invalid_argument("training needs at least one sample");

  Rng rng(derive_seed(config.seed, 0x747261696e));
  const int batch = std::max(1, config.batch);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    fisher_yates(order, rng);
    double epoch_loss = 0.0;
    int n_steps = 0;
    for (size_t pos = 0; pos < order.size(); pos += batch) {
      const size_t end = std::min(order.size(), pos + batch);
      ModelGradients step_grads = zero_gradients(model);
      double step_loss = 0.0;
      const double inv = 1.0 / static_cast<double>(end - pos);
      for (size_t b = pos; b < end; ++b) {
        const SampleSet& s = samples[order[b]];
        const ModelSamples ms = draw_samples(graphs, model.sample_sizes, rng);
        auto [loss, grads] = loss_and_gradients(model, s.features, graphs, s.targets, &ms);
        accumulate(step_grads, grads, inv);
        step_loss += loss * inv;
      }
      sgd_update(model, step_grads, config.learning_rate);
      epoch_loss += step_loss;
      ++n_steps;
    }
    if (epoch_losses != nullptr) epoch_losses->push_back(epoch_loss / n_steps);
  }
  return model;
}

std::vector<double> predict(const MGraphSageModel& model, const SampleSet& sample,
                            const GraphSet& graphs, Rng& rng) {
  return mgraphsage_forward(sample.features, graphs, model, rng);
}

std::vector<double> predict_full(const MGraphSageModel& model, const SampleSet& sample,
                                 const GraphSet& graphs) {
  return mgraphsage_forward(sample.features, graphs, model, nullptr);
}

namespace {

std::string dec(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json layer_to_json(const SageLayer& layer) {
  nlohmann::json j;
  j["out"] = layer.out_dim();
  j["in"] = layer.in_dim();
  j["activation"] = layer.activation == Activation::relu ? "relu" : "identity";
  auto& w = j["weight"] = nlohmann::json::array();
  for (double v : layer.weight.data) w.push_back(dec(v));
  auto& b = j["bias"] = nlohmann::json::array();
  for (double v : layer.bias) b.push_back(dec(v));
  return j;
}

SageLayer layer_from_json(const nlohmann::json& j) {
  SageLayer layer;
  const int out = j.at("out").get<int>();
  const int in = j.at("in").get<int>();
  layer.activation =
      j.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::identity;
  layer.weight = Matrix(out, in);
  const auto& w = j.at("weight");
  if (static_cast<int>(w.size()) != out * in) throw std::runtime_error("bad checkpoint weight size");
  for (size_t i = 0; i < w.size(); ++i) layer.weight.data[i] = std::stod(w[i].get<std::string>());
  layer.bias.resize(out);
  const auto& b = j.at("bias");
  for (size_t i = 0; i < b.size(); ++i) layer.bias[i] = std::stod(b[i].get<std::string>());
  return layer;
}

}  // namespace

void save_checkpoint(const MGraphSageModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "odsage-mgraphsage-1";
  j["feature_dim"] = model.feature_dim;
  j["hidden_dim"] = model.hidden_dim;
  j["channel_order"] = "tsod";
  j["seed"] = model.seed;
  j["sample_sizes"] = {model.sample_sizes[0], model.sample_sizes[1]};
  j["clamp_predictions"] = model.clamp_predictions;
  auto& channels = j["channels"] = nlohmann::json::array();
  for (const auto& ch : model.channels) {
    nlohmann::json cj;
    cj["layer1"] = layer_to_json(ch.layer1);
    cj["layer2"] = layer_to_json(ch.layer2);
    channels.push_back(std::move(cj));
  }
  auto& head = j["head"];
  auto& hw = head["weight"] = nlohmann::json::array();
  for (double v : model.head_weight) hw.push_back(dec(v));
  head["bias"] = dec(model.head_bias);
  write_text_file(path, j.dump(2) + "\n");
}

MGraphSageModel load_checkpoint(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  if (j.at("format").get<std::string>() != "odsage-mgraphsage-1")
    throw std::runtime_error("unknown checkpoint format in " + path);
  MGraphSageModel model;
  model.feature_dim = j.at("feature_dim").get<int>();
  model.hidden_dim = j.at("hidden_dim").get<int>();
  model.sample_sizes = {j.at("sample_sizes")[0].get<int>(), j.at("sample_sizes")[1].get<int>()};
  model.seed = j.at("seed").get<uint64_t>();
  model.clamp_predictions = j.at("clamp_predictions").get<bool>();
  const auto& channels = j.at("channels");
  if (channels.size() != 4) throw std::runtime_error("checkpoint must carry four channels");
  for (int c = 0; c < 4; ++c) {
    model.channels[c].layer1 = layer_from_json(channels[c].at("layer1"));
    model.channels[c].layer2 = layer_from_json(channels[c].at("layer2"));
  }
  const auto& head = j.at("head");
  const auto& hw = head.at("weight");
  model.head_weight.resize(hw.size());
  for (size_t i = 0; i < hw.size(); ++i) model.head_weight[i] = std::stod(hw[i].get<std::string>());
  model.head_bias = std::stod(head.at("bias").get<std::string>());
  return model;
}

}  // namespace odsage
