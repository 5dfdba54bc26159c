#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fusion_mammo/features/feature_vector.hpp"
#include "fusion_mammo/tensor/adam.hpp"
#include "fusion_mammo/tensor/graph.hpp"
#include "fusion_mammo/tensor/tensor.hpp"

namespace fusion_mammo::cvgg {

enum class LayerKind { conv, maxpool, flatten, dense };
enum class Activation { none, relu, softmax };

struct LayerSpec {
  std::string name;
  LayerKind kind;
  Shape output_shape;
  std::size_t parameter_count = 0;
  Activation activation = Activation::none;
  std::size_t window = 0;  // kernel size for conv, pooling window for maxpool
  std::size_t stride = 1;
};

/// Input geometry and widths. The canonical profile is the 255x255x3,
/// 64/128/128-filter network; the reduced profile exists for fast tests and
/// keeps the 256-unit feature layer.
struct Profile {
  std::string name;
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::size_t input_channels = 3;
  std::array<std::size_t, 3> block_filters{};
  std::size_t dense_units = kDeepLength;
  bool canonical = false;
};

Profile canonical_profile();
Profile reduced_profile();
/// "canonical" or "reduced"; ArgumentError otherwise.
Profile profile_by_name(std::string_view name);

/// Expected (name, output shape, parameter count) of every canonical layer.
struct CanonicalRow {
  const char* name;
  Shape output_shape;
  std::size_t parameter_count;
};
const std::vector<CanonicalRow>& canonical_layer_table();
inline constexpr std::size_t kCanonicalParameterCount = 26'246'210;

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  AdamConfig adam{};
};

struct LabeledImage {
  Tensor image;  // (H,W,C) matching the network input
  std::size_t label;
};

class CvggNetwork {
 public:
  /// Builds the 12-layer network. In canonical mode every computed shape and
  /// parameter count is checked against the canonical table and a mismatch
  /// throws ConstructionError naming the layer.
  static CvggNetwork build(const Profile& profile, std::size_t class_count = 2, std::uint64_t seed = 0);

  const Profile& profile() const { return profile_; }
  std::size_t class_count() const { return class_count_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  Shape input_shape() const;

  std::size_t parameter_count() const;
  std::size_t trainable_layer_count() const { return weights_.size(); }

  /// Declaration order: for each trainable layer, weights then bias.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;

  /// (B,H,W,C) -> (B,classes) or (H,W,C) -> (classes); rows are softmax distributions.
  Tensor forward(const Tensor& batch) const;
  /// Post-ReLU activations of the 256-unit dense layer, (B,256) or (256).
  Tensor dense_features(const Tensor& batch) const;
  FeatureVector extract_dense_features(const Tensor& image) const;

  struct GraphOutputs {
    NodeId features;
    NodeId probs;
  };
  /// Records the forward pass on a graph with parameters bound by reference.
  GraphOutputs build_graph(ComputeGraph& graph, NodeId input);

  /// Hash over profile, class count, and every parameter bit.
  std::uint64_t fingerprint() const;

 private:
  friend CvggNetwork deserialize_network(std::span<const std::byte> bytes);
  static CvggNetwork build_uninitialized(const Profile& profile, std::size_t class_count, std::uint64_t seed);
  void check_input(const Tensor& batch) const;
  Tensor run_to_features(const Tensor& batch) const;

  Profile profile_;
  std::size_t class_count_ = 2;
  std::uint64_t seed_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

/// Returns the mean cross-entropy of each epoch. Parameters are updated in
/// place; sample order is reshuffled each epoch from cfg.seed.
std::vector<double> train(CvggNetwork& net, std::span<const LabeledImage> train_set, const TrainConfig& cfg);

/// Streaming variant: images are fetched by index when a batch needs them,
/// so the training split never has to fit in memory at once.
using ImageLoader = std::function<Tensor(std::size_t)>;
std::vector<double> train(CvggNetwork& net, std::span<const std::size_t> labels, const ImageLoader& load,
                          const TrainConfig& cfg);

// Model file: "CVGG", u16 version, u32-length JSON header, then every
// parameter tensor as little-endian float32 in declaration order.
inline constexpr std::uint16_t kModelFormatVersion = 1;
std::vector<std::byte> serialize_network(const CvggNetwork& net);
CvggNetwork deserialize_network(std::span<const std::byte> bytes);
void save_network(const CvggNetwork& net, const std::filesystem::path& path);
CvggNetwork load_network(const std::filesystem::path& path);

}  // namespace fusion_mammo::cvgg
