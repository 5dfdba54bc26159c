#include <doctest.h>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/pipeline/run_config.hpp"
#include "support/fixtures.hpp"

using namespace fusion_mammo;
using namespace fusion_mammo::pipeline;

TEST_SUITE("run_config") {

TEST_CASE("unknown keys and bad values are named") {
  try {
    parse_run_config("cnn.epochs = 3\nxgb.depth = 4\n", "a.conf");
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("xgb.depth") != std::string::npos);
    CHECK(msg.find("a.conf:2") != std::string::npos);
  }
  try {
    parse_run_config("knn.k = many\n");
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("knn.k") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config("just words\n"), ArgumentError);
  CHECK_THROWS_AS(parse_run_config("classifier.kind = svm\n"), ArgumentError);
}

TEST_CASE("comments, blanks and values parse") {
  const auto cfg = parse_run_config(
      "# a comment\n\ncnn.profile = reduced  # trailing\nclassifier.kind = rf\nfeatures.set = deep\n"
      "xgb.learning_rate = 0.25\nknn.weighting = uniform\ndataset.csv = a.csv,b.csv\n");
  CHECK(cfg.profile == "reduced");
  CHECK(cfg.classifier == ClassifierKind::rf);
  CHECK(cfg.feature_set == FeatureSet::deep);
  CHECK(cfg.boost.learning_rate == 0.25);
  CHECK(cfg.knn.weighting == ml::KnnWeighting::uniform);
  REQUIRE(cfg.csv_paths.size() == 2);
  CHECK(cfg.csv_paths[1] == "b.csv");
}

TEST_CASE("defaults") {
  const RunConfig cfg;
  CHECK(cfg.knn.k == 5);
  CHECK(cfg.knn.weighting == ml::KnnWeighting::inverse_distance);
  CHECK(cfg.forest.trees == 100);
  CHECK(cfg.forest.max_depth == ml::kUnlimitedDepth);
  CHECK(cfg.boost.rounds == 200);
  CHECK(cfg.boost.max_depth == 6);
  CHECK(cfg.boost.learning_rate == 0.1);
  CHECK(cfg.boost.lambda == 1.0);
  CHECK(cfg.boost.gamma == 0.0);
}

TEST_CASE("canonical text round trips and covers every key") {
  RunConfig cfg;
  apply_setting(cfg, "cnn.epochs", "3");
  apply_setting(cfg, "rf.max_depth", "12");
  apply_setting(cfg, "dataset.image_root", "/data/cbis");
  apply_setting(cfg, "xgb.lambda", "0.1");
  const auto text = to_text(cfg);
  CHECK(to_text(parse_run_config(text)) == text);
  CHECK(config_fingerprint(parse_run_config(text)) == config_fingerprint(cfg));
  for (const auto& [key, help] : run_config_keys()) CHECK(text.find(key + " = ") != std::string::npos);
  CHECK(to_text(parse_run_config(to_text(RunConfig{}))) == to_text(RunConfig{}));
}

TEST_CASE("later settings win") {
  const auto cfg = parse_run_config("knn.k = 3\nknn.k = 9\n");
  CHECK(cfg.knn.k == 9);
  RunConfig c2 = cfg;
  apply_setting(c2, "knn.k", "1");
  CHECK(c2.knn.k == 1);
  CHECK(config_fingerprint(c2) != config_fingerprint(cfg));
}

TEST_CASE("missing config file is a state error") {
  testing::TempDir dir("cfg");
  CHECK_THROWS_AS(load_run_config(dir / "none.conf"), StateError);
  io::write_text_file(dir / "a.conf", "cnn.epochs = 2\n");
  CHECK(load_run_config(dir / "a.conf").epochs == 2);
}

TEST_CASE("shipped configurations parse") {
  const std::filesystem::path root = FUSION_MAMMO_SOURCE_DIR;
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(root / "configs")) {
    if (entry.path().extension() != ".conf") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_run_config(entry.path()));
    ++count;
  }
  CHECK(count >= 7);
}

}  // TEST_SUITE
