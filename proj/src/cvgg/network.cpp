#include "fusion_mammo/cvgg/network.hpp"

#include <cmath>
#include <numeric>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/tensor/ops.hpp"
#include "fusion_mammo/util/hash.hpp"
#include "fusion_mammo/util/rng.hpp"

namespace fusion_mammo::cvgg {

Profile canonical_profile() {
  return Profile{"canonical", 255, 255, 3, {64, 128, 128}, kDeepLength, true};
}

Profile reduced_profile() {
  return Profile{"reduced", 64, 64, 3, {8, 16, 16}, kDeepLength, false};
}

Profile profile_by_name(std::string_view name) {
  if (name == "canonical") return canonical_profile();
  if (name == "reduced") return reduced_profile();
  throw ArgumentError("unknown network profile \"" + std::string(name) + "\" (expected canonical|reduced)");
}

const std::vector<CanonicalRow>& canonical_layer_table() {
  static const std::vector<CanonicalRow> table = {
      {"Conv1a", {253, 253, 64}, 1792},     {"Conv1b", {251, 251, 64}, 36928},
      {"MaxPool1", {125, 125, 64}, 0},      {"Conv2a", {123, 123, 128}, 73856},
      {"Conv2b", {121, 121, 128}, 147584},  {"MaxPool2", {60, 60, 128}, 0},
      {"Conv3a", {58, 58, 128}, 147584},    {"Conv3b", {56, 56, 128}, 147584},
      {"MaxPool3", {28, 28, 128}, 0},       {"Flatten", {100352}, 0},
      {"Dense4", {256}, 25690368},          {"DenseOut", {2}, 514},
  };
  return table;
}

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kPoolWindow = 2;
constexpr std::size_t kPoolStride = 2;

std::vector<LayerSpec> plan_layers(const Profile& p, std::size_t class_count) {
  if (p.input_height == 0 || p.input_width == 0 || p.input_channels == 0) {
    throw ConstructionError("profile " + p.name + " has an empty input shape");
  }
  std::vector<LayerSpec> layers;
  std::size_t h = p.input_height, w = p.input_width, c = p.input_channels;
  static constexpr const char* kBlockNames[3][3] = {
      {"Conv1a", "Conv1b", "MaxPool1"}, {"Conv2a", "Conv2b", "MaxPool2"}, {"Conv3a", "Conv3b", "MaxPool3"}};
  try {
    for (std::size_t block = 0; block < 3; ++block) {
      const std::size_t filters = p.block_filters[block];
      for (std::size_t i = 0; i < 2; ++i) {
        h = ops::window_output_extent(h, kKernel, 1);
        w = ops::window_output_extent(w, kKernel, 1);
        layers.push_back({kBlockNames[block][i], LayerKind::conv, {h, w, filters},
                          kKernel * kKernel * c * filters + filters, Activation::relu, kKernel, 1});
        c = filters;
      }
      h = ops::window_output_extent(h, kPoolWindow, kPoolStride);
      w = ops::window_output_extent(w, kPoolWindow, kPoolStride);
      layers.push_back({kBlockNames[block][2], LayerKind::maxpool, {h, w, c}, 0, Activation::none, kPoolWindow,
                        kPoolStride});
    }
  } catch (const Error& e) {
    throw ConstructionError("profile " + p.name + " input " + std::to_string(p.input_height) + "x" +
                            std::to_string(p.input_width) + " is too small: " + e.what());
  }
  const std::size_t flat = h * w * c;
  layers.push_back({"Flatten", LayerKind::flatten, {flat}, 0, Activation::none});
  layers.push_back({"Dense4", LayerKind::dense, {p.dense_units}, flat * p.dense_units + p.dense_units,
                    Activation::relu});
  layers.push_back({"DenseOut", LayerKind::dense, {class_count}, p.dense_units * class_count + class_count,
                    Activation::softmax});
  return layers;
}

void verify_canonical(const std::vector<LayerSpec>& layers) {
  const auto& table = canonical_layer_table();
  if (layers.size() != table.size()) {
    throw ConstructionError("canonical network must have " + std::to_string(table.size()) + " layers, built " +
                            std::to_string(layers.size()));
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& got = layers[i];
    const auto& want = table[i];
    if (got.name != want.name || got.output_shape != want.output_shape ||
        got.parameter_count != want.parameter_count) {
      throw ConstructionError("layer " + std::string(want.name) + ": built " + got.name + " " +
                              shape_to_string(got.output_shape) + " with " + std::to_string(got.parameter_count) +
                              " parameters, expected " + shape_to_string(want.output_shape) + " with " +
                              std::to_string(want.parameter_count));
    }
  }
}

void init_uniform(Tensor& t, double limit, std::uint64_t seed) {
  Rng rng(seed);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-limit, limit));
}

}  // namespace

CvggNetwork CvggNetwork::build_uninitialized(const Profile& profile, std::size_t class_count, std::uint64_t seed) {
  if (class_count != 2) {
    throw ConstructionError("only two-class heads are supported, got " + std::to_string(class_count));
  }
  CvggNetwork net;
  net.profile_ = profile;
  net.class_count_ = class_count;
  net.seed_ = seed;
  net.layers_ = plan_layers(profile, class_count);
  if (profile.canonical) verify_canonical(net.layers_);

  std::size_t in_channels = profile.input_channels;
  std::size_t flat = 0;
  for (const auto& layer : net.layers_) {
    if (layer.kind == LayerKind::conv) {
      const std::size_t filters = layer.output_shape[2];
      net.weights_.emplace_back(Shape{kKernel, kKernel, in_channels, filters});
      net.biases_.emplace_back(Shape{filters});
      in_channels = filters;
    } else if (layer.kind == LayerKind::flatten) {
      flat = layer.output_shape[0];
    } else if (layer.kind == LayerKind::dense) {
      const std::size_t units = layer.output_shape[0];
      net.weights_.emplace_back(Shape{flat, units});
      net.biases_.emplace_back(Shape{units});
      flat = units;
    }
  }
  return net;
}

CvggNetwork CvggNetwork::build(const Profile& profile, std::size_t class_count, std::uint64_t seed) {
  CvggNetwork net = build_uninitialized(profile, class_count, seed);
  // Fan-in scaled uniform (He) weights, zero biases, one stream per tensor.
  for (std::size_t i = 0; i < net.weights_.size(); ++i) {
    const Shape& s = net.weights_[i].shape();
    const std::size_t fan_in = s.size() == 4 ? s[0] * s[1] * s[2] : s[0];
    init_uniform(net.weights_[i], std::sqrt(6.0 / static_cast<double>(fan_in)), mix_seed(seed, i));
  }
  return net;
}

Shape CvggNetwork::input_shape() const {
  return {profile_.input_height, profile_.input_width, profile_.input_channels};
}

std::size_t CvggNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.parameter_count;
  return n;
}

std::vector<Tensor*> CvggNetwork::parameters() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

std::vector<const Tensor*> CvggNetwork::parameters() const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

std::vector<std::string> CvggNetwork::parameter_names() const {
  std::vector<std::string> names;
  for (const auto& layer : layers_) {
    if (layer.kind == LayerKind::conv || layer.kind == LayerKind::dense) {
      names.push_back(layer.name + ".weights");
      names.push_back(layer.name + ".bias");
    }
  }
  return names;
}

void CvggNetwork::check_input(const Tensor& batch) const {
  const Shape in = input_shape();
  const Shape& s = batch.shape();
  const bool single = s.size() == 3 && s == in;
  const bool batched = s.size() == 4 && Shape(s.begin() + 1, s.end()) == in;
  if (!single && !batched) {
    throw DimensionError("network expects " + shape_to_string(in) + " or (B," + shape_to_string(in).substr(1) +
                         ", got " + shape_to_string(s));
  }
}

Tensor CvggNetwork::run_to_features(const Tensor& batch) const {
  check_input(batch);
  Tensor x = batch;
  std::size_t p = 0;
  for (const auto& layer : layers_) {
    switch (layer.kind) {
      case LayerKind::conv:
        x = ops::relu_forward(ops::conv2d_forward(x, weights_[p], biases_[p]));
        ++p;
        break;
      case LayerKind::maxpool:
        x = ops::maxpool2d_forward(x, layer.window, layer.stride).output;
        break;
      case LayerKind::flatten:
        x = x.rank() == 4 ? x.reshaped({x.dim(0), x.size() / x.dim(0)}) : x.reshaped({x.size()});
        break;
      case LayerKind::dense:
        // Stop at the feature layer; DenseOut is applied by forward().
        return ops::relu_forward(ops::dense_forward(x, weights_[p], biases_[p]));
    }
  }
  throw ConstructionError("network has no dense layer");
}

Tensor CvggNetwork::dense_features(const Tensor& batch) const { return run_to_features(batch); }

Tensor CvggNetwork::forward(const Tensor& batch) const {
  const Tensor features = run_to_features(batch);
  const std::size_t out = weights_.size() - 1;
  return ops::softmax_forward(ops::dense_forward(features, weights_[out], biases_[out]));
}

FeatureVector CvggNetwork::extract_dense_features(const Tensor& image) const {
  if (image.rank() != 3) {
    throw DimensionError("extract_dense_features expects one (H,W,C) image, got " + shape_to_string(image.shape()));
  }
  const Tensor f = run_to_features(image);
  return FeatureVector(FeatureTag::deep, std::vector<float>(f.data().begin(), f.data().end()));
}

CvggNetwork::GraphOutputs CvggNetwork::build_graph(ComputeGraph& graph, NodeId input) {
  check_input(graph.value(input));
  NodeId x = input;
  NodeId features = input;
  std::size_t p = 0;
  for (const auto& layer : layers_) {
    switch (layer.kind) {
      case LayerKind::conv:
        x = graph.relu(graph.conv2d(x, graph.parameter(weights_[p]), graph.parameter(biases_[p])));
        ++p;
        break;
      case LayerKind::maxpool:
        x = graph.maxpool2d(x, layer.window, layer.stride);
        break;
      case LayerKind::flatten:
        x = graph.flatten(x);
        break;
      case LayerKind::dense: {
        const NodeId z = graph.dense(x, graph.parameter(weights_[p]), graph.parameter(biases_[p]));
        ++p;
        if (layer.activation == Activation::relu) {
          x = graph.relu(z);
          features = x;
        } else {
          x = graph.softmax(z);
        }
        break;
      }
    }
  }
  return {features, x};
}

std::uint64_t CvggNetwork::fingerprint() const {
  Fnv1a h;
  h.update(profile_.name);
  h.update(std::to_string(class_count_));
  for (const Tensor* t : parameters()) h.update_values(t->data());
  return h.digest();
}

std::vector<double> train(CvggNetwork& net, std::span<const LabeledImage> train_set, const TrainConfig& cfg) {
  std::vector<std::size_t> labels(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) labels[i] = train_set[i].label;
  return train(net, labels, [&](std::size_t i) { return train_set[i].image; }, cfg);
}

std::vector<double> train(CvggNetwork& net, std::span<const std::size_t> labels, const ImageLoader& load,
                          const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw ArgumentError("train: epochs and batch_size must be >= 1");
  if (labels.empty()) throw ArgumentError("train: empty training set");
  const Shape in = net.input_shape();
  std::vector<std::size_t> class_counts(net.class_count(), 0);
  for (std::size_t label : labels) {
    if (label >= net.class_count()) throw ArgumentError("train: label " + std::to_string(label) + " out of range");
    ++class_counts[label];
  }
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    if (class_counts[c] == 0) {
      throw ArgumentError("train: class " + std::to_string(c) + " has no samples; both classes are required");
    }
  }

  auto params = net.parameters();
  AdamState adam(params, cfg.adam);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t image_size = shape_size(in);

  std::vector<double> history;
  history.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      Tensor batch(Shape{count, in[0], in[1], in[2]});
      std::vector<std::size_t> batch_labels(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t index = order[start + i];
        const Tensor image = load(index);
        if (image.shape() != in) {
          throw DimensionError("train: image " + shape_to_string(image.shape()) + " does not match input " +
                               shape_to_string(in));
        }
        std::copy(image.data().begin(), image.data().end(), batch.data().begin() + i * image_size);
        batch_labels[i] = labels[index];
      }
      for (Tensor* p : params) p->ensure_grad(), p->zero_grad();
      ComputeGraph graph;
      const auto outputs = net.build_graph(graph, graph.input(std::move(batch)));
      const NodeId loss = graph.cross_entropy(outputs.probs, std::move(batch_labels));
      graph.backward(loss);
      adam_step(params, adam);
      loss_sum += static_cast<double>(graph.value(loss)[0]) * static_cast<double>(count);
    }
    const double mean = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(mean)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1));
    history.push_back(mean);
  }
  for (Tensor* p : params) p->clear_grad();
  return history;
}

}  // namespace fusion_mammo::cvgg
