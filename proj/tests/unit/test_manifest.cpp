#include <doctest.h>

#include <map>
#include <set>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/pipeline/manifest.hpp"
#include "support/fixtures.hpp"

using namespace fusion_mammo;
using namespace fusion_mammo::pipeline;

namespace {

const char* kHeader = "patient_id,left or right breast,image view,pathology,image file path\n";

/// n patients with two views each; labels alternate by patient.
std::string simple_csv(std::size_t patients) {
  std::string s = kHeader;
  for (std::size_t p = 0; p < patients; ++p) {
    for (const char* view : {"CC", "MLO"}) {
      s += "P" + std::to_string(p) + ",LEFT," + view + "," + (p % 2 ? "MALIGNANT" : "BENIGN") + ",img/" +
           std::to_string(p) + "_" + view + ".dcm\n";
    }
  }
  return s;
}

IngestOptions options_for(const testing::TempDir& dir, const std::string& csv_name, const std::string& text) {
  io::write_text_file(dir / csv_name, text);
  IngestOptions o;
  o.csv_paths = {dir / csv_name};
  o.image_root = dir.path();
  o.verify_images = false;
  o.seed = 3;
  return o;
}

}  // namespace

TEST_SUITE("manifest") {

TEST_CASE("CSV reader handles quotes, CRLF and embedded newlines") {
  const auto t = parse_csv("a,b,c\r\n1,\"x,\"\"y\"\"\",3\r\n4,\"multi\nline\",6\n");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.rows[0][1] == "x,\"y\"");
  CHECK(t.rows[1][1] == "multi\nline");
  CHECK(csv_escape("x,\"y\"") == "\"x,\"\"y\"\"\"");
  CHECK(t.column({"B"}) == 1);
  CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), DataError);
  CHECK_THROWS_AS(parse_csv("a,b\n\"open,2\n"), DataError);
}

TEST_CASE("pathology, view and laterality parsing") {
  CHECK(parse_pathology("MALIGNANT") == 1);
  CHECK(parse_pathology(" benign ") == 0);
  CHECK(parse_pathology("BENIGN_WITHOUT_CALLBACK") == 0);
  try {
    parse_pathology("UNSURE");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("\"UNSURE\"") != std::string::npos);
  }
  CHECK(parse_view("MLO") == View::mlo);
  CHECK(parse_laterality("RIGHT") == Laterality::right);
  CHECK_THROWS_AS(parse_view("XX"), DataError);
}

TEST_CASE("unknown pathology is quoted with its row") {
  testing::TempDir dir("mf");
  const auto o = options_for(dir, "cases.csv", std::string(kHeader) + "P1,LEFT,CC,MAYBE,a.dcm\n");
  try {
    ingest_dataset(o);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("\"MAYBE\"") != std::string::npos);
    CHECK(msg.find("row 2") != std::string::npos);
  }
}

TEST_CASE("empty CSV and missing files are ingestion errors") {
  testing::TempDir dir("mf");
  CHECK_THROWS_AS(ingest_dataset(options_for(dir, "cases.csv", kHeader)), IngestionError);
  IngestOptions o;
  o.csv_paths = {dir / "nope.csv"};
  try {
    ingest_dataset(o);
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("nope.csv") != std::string::npos);
  }
  auto with_images = options_for(dir, "cases.csv", simple_csv(2));
  with_images.verify_images = true;
  try {
    ingest_dataset(with_images);
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("4 image file(s) missing") != std::string::npos);
    CHECK(msg.find("0_CC.png") != std::string::npos);
  }
}

TEST_CASE("seeded split is 80/20, stratified and patient grouped") {
  testing::TempDir dir("mf");
  const auto manifest = ingest_dataset(options_for(dir, "cases.csv", simple_csv(50)));
  REQUIRE(manifest.records.size() == 100);
  CHECK(manifest.count(Split::test) == 20);
  CHECK(manifest.fraction(Split::test) == doctest::Approx(0.2));
  std::size_t test_malignant = 0;
  std::map<std::string, std::set<Split>> splits_of;
  for (const auto& r : manifest.records) {
    splits_of[r.patient_id].insert(r.split);
    if (r.split == Split::test && r.label == 1) ++test_malignant;
  }
  CHECK(test_malignant == 10);
  for (const auto& [patient, splits] : splits_of) CHECK(splits.size() == 1);
  CHECK(manifest.records[0].image_id == "img/0_CC.png");
  const auto again = ingest_dataset(options_for(dir, "cases.csv", simple_csv(50)));
  CHECK(again.fingerprint() == manifest.fingerprint());
}

TEST_CASE("per-image policy may separate a patient's views") {
  testing::TempDir dir("mf");
  auto o = options_for(dir, "cases.csv", simple_csv(50));
  o.policy = SplitPolicy::stratified;
  const auto manifest = ingest_dataset(o);
  CHECK(manifest.count(Split::test) == 20);
}

TEST_CASE("rows naming the same image merge, malignant winning") {
  testing::TempDir dir("mf");
  const std::string csv = std::string(kHeader) + "P1,LEFT,CC,BENIGN,a.dcm\nP1,LEFT,CC,MALIGNANT,a.dcm\n" +
                          "P2,LEFT,CC,BENIGN,b.dcm\nP3,LEFT,CC,MALIGNANT,c.dcm\nP4,LEFT,CC,BENIGN,d.dcm\n";
  const auto manifest = ingest_dataset(options_for(dir, "cases.csv", csv));
  REQUIRE(manifest.records.size() == 4);
  CHECK(manifest.records[0].label == 1);
  const std::string bad = std::string(kHeader) + "P1,LEFT,CC,BENIGN,a.dcm\nP9,LEFT,CC,BENIGN,a.dcm\n";
  CHECK_THROWS_AS(ingest_dataset(options_for(dir, "bad.csv", bad)), DataError);
}

TEST_CASE("manifest text round trip") {
  testing::TempDir dir("mf");
  auto manifest = ingest_dataset(options_for(dir, "cases.csv", simple_csv(10)));
  save_manifest(manifest, dir / "manifest.csv");
  const auto back = load_manifest(dir / "manifest.csv");
  CHECK(back.records == manifest.records);
  CHECK(back.fingerprint() == manifest.fingerprint());
  CHECK_THROWS_AS(load_manifest(dir / "missing.csv"), StateError);
  CHECK_THROWS_AS(manifest_from_csv("a,b\n1,2\n"), FormatError);
}

TEST_CASE("subsample keeps label proportions") {
  testing::TempDir dir("mf");
  const auto manifest = ingest_dataset(options_for(dir, "cases.csv", simple_csv(50)));
  const auto small = subsample(manifest, 40, 4);
  CHECK(small.records.size() == 40);
  std::size_t malignant = 0;
  for (const auto& r : small.records) malignant += static_cast<std::size_t>(r.label);
  CHECK(malignant == 20);
  CHECK(subsample(manifest, 40, 4).records == small.records);
}

TEST_CASE("CBIS-style layout ingests with the published split") {
  testing::TempDir dir("cbis");
  const auto fx = testing::write_cbis_fixture(dir.path(), 20, 5);
  IngestOptions o;
  o.csv_paths = fx.csvs;
  o.image_root = fx.root;
  const auto manifest = ingest_dataset(o);
  CHECK(manifest.records.size() == 20);
  // Patients 4 and 9 are in the test CSV.
  CHECK(manifest.count(Split::test) == 4);
  bool merged_note = false, published_note = false;
  for (const auto& n : manifest.notes) {
    merged_note = merged_note || n.find("duplicate") != std::string::npos;
    published_note = published_note || n.find("CSV files") != std::string::npos;
  }
  CHECK(merged_note);
  CHECK(published_note);
  for (const auto& r : manifest.records) CHECK(std::filesystem::exists(manifest.resolve(r)));
  // Without the published split a seeded 80/20 split is used instead.
  o.use_published_split = false;
  CHECK(ingest_dataset(o).count(Split::test) == 4);
}

}  // TEST_SUITE
