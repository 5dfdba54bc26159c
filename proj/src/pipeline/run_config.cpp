#include "fusion_mammo/pipeline/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <functional>
#include <sstream>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/util/hash.hpp"

namespace fusion_mammo::pipeline {
namespace {

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ArgumentError("config key " + std::string(key) + ": expected a non-negative integer, got \"" +
                        std::string(v) + "\"");
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    throw ArgumentError("config key " + std::string(key) + ": expected a number, got \"" + s + "\"");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ArgumentError("config key " + std::string(key) + ": expected true or false, got \"" + std::string(v) + "\"");
}

std::size_t to_depth(std::string_view key, std::string_view v) {
  return v == "unlimited" ? ml::kUnlimitedDepth : static_cast<std::size_t>(to_u64(key, v));
}

std::string from_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string from_depth(std::size_t d) { return d == ml::kUnlimitedDepth ? "unlimited" : std::to_string(d); }

struct Key {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"dataset.csv", "comma-separated case description CSV files",
       [](RunConfig& c, std::string_view, std::string_view v) {
         c.csv_paths.clear();
         std::string item;
         std::istringstream in{std::string(v)};
         while (std::getline(in, item, ',')) {
           if (!trim(item).empty()) c.csv_paths.emplace_back(trim(item));
         }
       },
       [](const RunConfig& c) {
         std::string out;
         for (const auto& p : c.csv_paths) out += (out.empty() ? "" : ",") + p.generic_string();
         return out;
       }},
      {"dataset.image_root", "directory the CSV image paths are relative to",
       [](RunConfig& c, std::string_view, std::string_view v) { c.image_root = std::string(v); },
       [](const RunConfig& c) { return c.image_root.generic_string(); }},
      {"dataset.synthetic_n", "generate this many synthetic images instead of ingesting (0 = off)",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.synthetic_n = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.synthetic_n); }},
      {"dataset.synthetic_seed", "seed of the synthetic generator",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.synthetic_seed = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.synthetic_seed); }},
      {"dataset.split_policy", "patient_grouped or stratified",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "patient_grouped") {
           c.split_policy = SplitPolicy::patient_grouped;
         } else if (v == "stratified") {
           c.split_policy = SplitPolicy::stratified;
         } else {
           throw ArgumentError("config key " + std::string(k) + ": expected patient_grouped or stratified");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.split_policy == SplitPolicy::patient_grouped ? "patient_grouped" : "stratified");
       }},
      {"dataset.test_fraction", "held-out fraction for seeded splits",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.test_fraction = to_double(k, v); },
       [](const RunConfig& c) { return from_double(c.test_fraction); }},
      {"dataset.published_split", "use train/test split information from the CSVs when present",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.published_split = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.published_split ? "true" : "false"); }},
      {"dataset.subset", "keep a seeded label-stratified subset of this many images (0 = all)",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.subset = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.subset); }},
      {"run.seed", "master seed for splits, initialisation, shuffling and classifiers",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"cnn.profile", "canonical (255x255 input) or reduced (64x64 input)",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v != "canonical" && v != "reduced") {
           throw ArgumentError("config key " + std::string(k) + ": expected canonical or reduced");
         }
         c.profile = std::string(v);
       },
       [](const RunConfig& c) { return c.profile; }},
      {"cnn.epochs", "training epochs",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.epochs = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.epochs); }},
      {"cnn.batch_size", "mini-batch size",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.batch_size = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.batch_size); }},
      {"cnn.learning_rate", "Adam learning rate",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.learning_rate = to_double(k, v); },
       [](const RunConfig& c) { return from_double(c.learning_rate); }},
      {"features.set", "deep (256 values) or fused (2816 values)",
       [](RunConfig& c, std::string_view, std::string_view v) { c.feature_set = parse_feature_set(v); },
       [](const RunConfig& c) { return std::string(to_string(c.feature_set)); }},
      {"classifier.kind", "knn, rf or xgb",
       [](RunConfig& c, std::string_view, std::string_view v) { c.classifier = parse_classifier(v); },
       [](const RunConfig& c) { return std::string(to_string(c.classifier)); }},
      {"knn.k", "number of neighbours",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.knn.k = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.knn.k); }},
      {"knn.weighting", "inverse_distance or uniform",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         if (v == "inverse_distance") {
           c.knn.weighting = ml::KnnWeighting::inverse_distance;
         } else if (v == "uniform") {
           c.knn.weighting = ml::KnnWeighting::uniform;
         } else {
           throw ArgumentError("config key " + std::string(k) + ": expected inverse_distance or uniform");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.knn.weighting == ml::KnnWeighting::uniform ? "uniform" : "inverse_distance");
       }},
      {"knn.standardize", "z-score features before measuring distance",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.knn.standardize = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.knn.standardize ? "true" : "false"); }},
      {"rf.trees", "number of trees",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.forest.trees = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.forest.trees); }},
      {"rf.max_depth", "maximum tree depth or unlimited",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.forest.max_depth = to_depth(k, v); },
       [](const RunConfig& c) { return from_depth(c.forest.max_depth); }},
      {"rf.max_features", "features tried per split (0 = floor(sqrt(d)))",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.forest.max_features = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.forest.max_features); }},
      {"rf.bootstrap", "draw a bootstrap sample per tree",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.forest.bootstrap = to_bool(k, v); },
       [](const RunConfig& c) { return std::string(c.forest.bootstrap ? "true" : "false"); }},
      {"xgb.rounds", "boosting rounds",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.boost.rounds = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.boost.rounds); }},
      {"xgb.max_depth", "maximum tree depth",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.boost.max_depth = to_u64(k, v); },
       [](const RunConfig& c) { return std::to_string(c.boost.max_depth); }},
      {"xgb.learning_rate", "shrinkage eta",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.boost.learning_rate = to_double(k, v); },
       [](const RunConfig& c) { return from_double(c.boost.learning_rate); }},
      {"xgb.lambda", "L2 penalty on leaf weights",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.boost.lambda = to_double(k, v); },
       [](const RunConfig& c) { return from_double(c.boost.lambda); }},
      {"xgb.gamma", "minimum gain per split (leaf penalty)",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.boost.gamma = to_double(k, v); },
       [](const RunConfig& c) { return from_double(c.boost.gamma); }},
  };
  return table;
}

}  // namespace

std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::rf: return "rf";
    case ClassifierKind::xgb: return "xgb";
  }
  return "?";
}

std::string_view to_string(FeatureSet s) { return s == FeatureSet::deep ? "deep" : "fused"; }

ClassifierKind parse_classifier(std::string_view name) {
  if (name == "knn") return ClassifierKind::knn;
  if (name == "rf") return ClassifierKind::rf;
  if (name == "xgb") return ClassifierKind::xgb;
  throw ArgumentError("unknown classifier \"" + std::string(name) + "\" (expected knn, rf or xgb)");
}

FeatureSet parse_feature_set(std::string_view name) {
  if (name == "deep") return FeatureSet::deep;
  if (name == "fused") return FeatureSet::fused;
  throw ArgumentError("unknown feature set \"" + std::string(name) + "\" (expected deep or fused)");
}

const std::vector<std::pair<std::string, std::string>>& run_config_keys() {
  static const auto list = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : keys()) out.emplace_back(k.name, k.help);
    return out;
  }();
  return list;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(cfg, key, trim(value));
      return;
    }
  }
  throw ArgumentError("unknown config key \"" + std::string(key) + "\"");
}

RunConfig parse_run_config(std::string_view text, std::string_view source) {
  RunConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ArgumentError(where + ": expected key = value");
    try {
      apply_setting(cfg, trim(std::string_view(line).substr(0, eq)), std::string_view(line).substr(eq + 1));
    } catch (const ArgumentError& e) {
      throw ArgumentError(where + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw StateError("config file " + path.string() + " does not exist");
  return parse_run_config(io::read_text_file(path), path.string());
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  return out;
}

std::string config_fingerprint(const RunConfig& cfg) { return to_hex(fnv1a(to_text(cfg))); }

}  // namespace fusion_mammo::pipeline
