#include <cmath>
#include <string>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/ml/trees.hpp"

namespace fusion_mammo::ml {

std::size_t DecisionTree::leaf_index(std::span<const float> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return i;
}

std::size_t DecisionTree::leaf_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes) n += node.is_leaf() ? 1 : 0;
  return n;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

void DecisionTree::validate(std::size_t feature_count) const {
  if (nodes.empty()) throw FormatError("tree has no nodes");
  // Children always follow their parent, so one forward pass sees each
  // node's parent before the node itself.
  std::vector<int> parents(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const TreeNode& n = nodes[i];
    if (i > 0 && parents[i] != 1) {
      throw FormatError("tree node " + std::to_string(i) + " has " + std::to_string(parents[i]) + " parents");
    }
    if (n.is_leaf()) {
      if (n.feature != -1 || n.left != -1 || n.right != -1) throw FormatError("malformed leaf " + std::to_string(i));
      continue;
    }
    if (static_cast<std::size_t>(n.feature) >= feature_count) {
      throw FormatError("tree node " + std::to_string(i) + " splits on feature " + std::to_string(n.feature) +
                        " of " + std::to_string(feature_count));
    }
    for (std::int32_t child : {n.left, n.right}) {
      if (child <= static_cast<std::int32_t>(i) || static_cast<std::size_t>(child) >= nodes.size()) {
        throw FormatError("tree node " + std::to_string(i) + " has invalid child " + std::to_string(child));
      }
      ++parents[static_cast<std::size_t>(child)];
    }
    if (n.left == n.right) throw FormatError("tree node " + std::to_string(i) + " has identical children");
  }
}

void TreeEnsemble::validate() const {
  if (mode == EnsembleMode::boosted) {
    if (!(learning_rate > 0.0) || !(lambda >= 0.0) || !(gamma >= 0.0)) {
      throw ArgumentError("boosted ensemble requires eta > 0, lambda >= 0, gamma >= 0");
    }
  }
  for (const auto& t : trees) t.validate(feature_count);
}

float split_threshold(float lo, float hi) {
  const float mid = static_cast<float>((static_cast<double>(lo) + static_cast<double>(hi)) * 0.5);
  return mid < hi ? mid : lo;
}

// ----------------------------------------------------------- persistence --

namespace {
constexpr const char* kTreeMagic = "TREE";
}

std::vector<std::byte> serialize_ensemble(const TreeEnsemble& e) {
  io::ByteWriter out;
  out.put_magic(kTreeMagic);
  out.put(kTreeFormatVersion);
  out.put(static_cast<std::uint8_t>(e.mode));
  out.put(static_cast<std::uint8_t>(e.objective));
  out.put(static_cast<std::uint32_t>(e.feature_count));
  out.put(static_cast<std::uint32_t>(e.tree_count));
  out.put(static_cast<std::int64_t>(e.max_depth == kUnlimitedDepth ? -1 : static_cast<std::int64_t>(e.max_depth)));
  out.put(e.seed);
  out.put(e.learning_rate);
  out.put(e.lambda);
  out.put(e.gamma);
  out.put(e.base_score);
  out.put(static_cast<std::uint32_t>(e.trees.size()));
  for (const auto& t : e.trees) {
    out.put(static_cast<std::int64_t>(t.max_depth == kUnlimitedDepth ? -1 : static_cast<std::int64_t>(t.max_depth)));
    out.put(static_cast<std::uint32_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
      out.put(n.feature);
      out.put(n.threshold);
      out.put(n.left);
      out.put(n.right);
      out.put(n.value);
    }
  }
  return out.release();
}

TreeEnsemble deserialize_ensemble(std::span<const std::byte> bytes) {
  io::ByteReader in(bytes, "tree ensemble");
  in.expect_magic(kTreeMagic);
  if (const auto v = in.get<std::uint16_t>(); v != kTreeFormatVersion) {
    in.fail("unsupported format version " + std::to_string(v));
  }
  TreeEnsemble e;
  const auto mode = in.get<std::uint8_t>();
  const auto objective = in.get<std::uint8_t>();
  if (mode > 1 || objective > 1) in.fail("unknown mode/objective");
  e.mode = static_cast<EnsembleMode>(mode);
  e.objective = static_cast<BoostObjective>(objective);
  e.feature_count = in.get<std::uint32_t>();
  e.tree_count = in.get<std::uint32_t>();
  const auto depth = in.get<std::int64_t>();
  e.max_depth = depth < 0 ? kUnlimitedDepth : static_cast<std::size_t>(depth);
  e.seed = in.get<std::uint64_t>();
  e.learning_rate = in.get<double>();
  e.lambda = in.get<double>();
  e.gamma = in.get<double>();
  e.base_score = in.get<double>();
  const auto trees = in.get<std::uint32_t>();
  constexpr std::size_t kNodeBytes = 4 + 4 + 4 + 4 + 8;
  for (std::uint32_t t = 0; t < trees; ++t) {
    DecisionTree tree;
    const auto tree_depth = in.get<std::int64_t>();
    tree.max_depth = tree_depth < 0 ? kUnlimitedDepth : static_cast<std::size_t>(tree_depth);
    const auto count = in.get<std::uint32_t>();
    if (static_cast<std::size_t>(count) * kNodeBytes > in.remaining()) in.fail("truncated node array");
    tree.nodes.resize(count);
    for (auto& n : tree.nodes) {
      n.feature = in.get<std::int32_t>();
      n.threshold = in.get<float>();
      n.left = in.get<std::int32_t>();
      n.right = in.get<std::int32_t>();
      n.value = in.get<double>();
    }
    e.trees.push_back(std::move(tree));
  }
  in.expect_end();
  try {
    e.validate();
  } catch (const ArgumentError& err) {
    throw FormatError(std::string("tree ensemble: ") + err.what());
  }
  return e;
}

void save_ensemble(const TreeEnsemble& ensemble, const std::filesystem::path& path) {
  io::write_file(path, serialize_ensemble(ensemble));
}

TreeEnsemble load_ensemble(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw StateError("ensemble file " + path.string() + " does not exist");
  return deserialize_ensemble(io::read_file(path));
}

}  // namespace fusion_mammo::ml
