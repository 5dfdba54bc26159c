#pragma once

#include <unistd.h>

#include <cctype>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/pipeline/image_io.hpp"
#include "fusion_mammo/pipeline/synth.hpp"
#include "fusion_mammo/tensor/tensor.hpp"
#include "fusion_mammo/util/rng.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "t") {
    static std::uint64_t counter = 0;
    fusion_mammo::Rng rng(fusion_mammo::mix_seed(static_cast<std::uint64_t>(::getpid()), counter++));
    path_ = fs::temp_directory_path() /
            ("fusion_mammo_" + std::string(tag) + "_" + std::to_string(rng.next_u64() % 1000000000ull));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline fusion_mammo::Tensor random_tensor(fusion_mammo::Shape shape, std::uint64_t seed, double lo = -1.0,
                                          double hi = 1.0) {
  fusion_mammo::Tensor t(std::move(shape));
  fusion_mammo::Rng rng(seed);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

inline std::string read_text(const fs::path& p) { return fusion_mammo::io::read_text_file(p); }

inline std::vector<std::byte> read_bytes(const fs::path& p) { return fusion_mammo::io::read_file(p); }

/// Mock of the CBIS-DDSM layout: two mass case-description CSVs with the
/// published column names, DICOM-style paths whose .png sibling exists, and
/// images at mammogram-like aspect ratios (not 255x255) stored as 16-bit.
/// Every patient has a CC and an MLO view of one breast; one image carries
/// two abnormality rows.
struct CbisFixture {
  fs::path root;
  std::vector<fs::path> csvs;
  std::size_t images = 0;
};

inline CbisFixture write_cbis_fixture(const fs::path& root, std::size_t images, std::uint64_t seed) {
  namespace pl = fusion_mammo::pipeline;
  CbisFixture fx;
  fx.root = root;
  fs::create_directories(root);
  const std::string header =
      "patient_id,breast_density,left or right breast,image view,abnormality id,abnormality type,mass shape,"
      "mass margins,assessment,pathology,subtlety,image file path,cropped image file path,ROI mask file path\n";
  std::string train_csv = header, test_csv = header;
  fusion_mammo::Rng rng(seed);
  const std::size_t patients = images / 2;
  for (std::size_t p = 0; p < patients; ++p) {
    const int label = static_cast<int>(p % 2);
    const char* pathology = label == 1 ? "MALIGNANT" : (p % 4 == 0 ? "BENIGN_WITHOUT_CALLBACK" : "BENIGN");
    const bool test = p % 5 == 4;
    const std::string side = rng.uniform() < 0.5 ? "LEFT" : "RIGHT";
    char pid[32];
    std::snprintf(pid, sizeof pid, "P_%05zu", p);
    for (const char* view : {"CC", "MLO"}) {
      const std::string dir = std::string(test ? "Mass-Test_" : "Mass-Training_") + pid + "_" + side + "_" + view;
      const std::string rel = dir + "/1.3.6.1.4.1.9590/000000.dcm";
      fs::create_directories(root / dir / "1.3.6.1.4.1.9590");
      const auto base = pl::render_synthetic_image(label, fusion_mammo::mix_seed(seed, fx.images));
      const std::size_t w = 200 + rng.below(120), h = 280 + rng.below(160);
      pl::write_png(root / dir / "1.3.6.1.4.1.9590/000000.png", pl::resize_bilinear(base, w, h), 16);
      std::string row = std::string(pid) + ",2," + side + "," + view + ",1,mass,OVAL,CIRCUMSCRIBED,3," + pathology +
                        ",4," + rel + ",crop/" + rel + ",roi/" + rel + "\n";
      // Second abnormality on the same image: merged during ingestion.
      if (p == 0) row += std::string(pid) + ",2," + side + "," + view + ",2,mass,ROUND,OBSCURED,3," + pathology +
                         ",4," + rel + ",crop2/" + rel + ",roi2/" + rel + "\n";
      (test ? test_csv : train_csv) += row;
      ++fx.images;
    }
  }
  fx.csvs = {root / "mass_case_description_train_set.csv", root / "mass_case_description_test_set.csv"};
  fusion_mammo::io::write_text_file(fx.csvs[0], train_csv);
  fusion_mammo::io::write_text_file(fx.csvs[1], test_csv);
  return fx;
}

/// Minimal XML well-formedness check: one root element, properly nested
/// and closed tags, quoted attributes, no stray '<' or bare '&'.
inline bool xml_well_formed(std::string_view text, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why != nullptr) *why = msg;
    return false;
  };
  std::vector<std::string> stack;
  bool root_seen = false;
  std::size_t i = 0;
  auto is_name = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' || c == '.'; };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '&') {
      const auto semi = text.find(';', i);
      if (semi == std::string_view::npos || semi - i > 8) return fail("bare '&' at " + std::to_string(i));
      i = semi + 1;
      continue;
    }
    if (c != '<') {
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(c))) return fail("text outside the root element");
      ++i;
      continue;
    }
    if (text.substr(i, 4) == "<!--") {
      const auto end = text.find("-->", i + 4);
      if (end == std::string_view::npos) return fail("unterminated comment");
      i = end + 3;
      continue;
    }
    if (text.substr(i, 2) == "<?") {
      const auto end = text.find("?>", i + 2);
      if (end == std::string_view::npos) return fail("unterminated declaration");
      i = end + 2;
      continue;
    }
    const bool closing = i + 1 < text.size() && text[i + 1] == '/';
    std::size_t j = i + (closing ? 2 : 1);
    const std::size_t name_start = j;
    while (j < text.size() && is_name(text[j])) ++j;
    const std::string name(text.substr(name_start, j - name_start));
    if (name.empty()) return fail("tag without a name at " + std::to_string(i));
    if (closing) {
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j >= text.size() || text[j] != '>') return fail("malformed closing tag </" + name);
      if (stack.empty() || stack.back() != name) return fail("mismatched </" + name + ">");
      stack.pop_back();
      i = j + 1;
      continue;
    }
    // attributes
    bool self_closing = false;
    for (;;) {
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j >= text.size()) return fail("unterminated tag <" + name);
      if (text[j] == '>') break;
      if (text[j] == '/' && j + 1 < text.size() && text[j + 1] == '>') {
        self_closing = true;
        ++j;
        break;
      }
      const std::size_t a = j;
      while (j < text.size() && is_name(text[j])) ++j;
      if (j == a) return fail("bad attribute in <" + name);
      if (j >= text.size() || text[j] != '=') return fail("attribute without value in <" + name);
      ++j;
      if (j >= text.size() || (text[j] != '"' && text[j] != '\'')) return fail("unquoted attribute in <" + name);
      const char q = text[j];
      const auto end = text.find(q, j + 1);
      if (end == std::string_view::npos) return fail("unterminated attribute in <" + name);
      if (text.substr(j + 1, end - j - 1).find('<') != std::string_view::npos) return fail("'<' in attribute");
      j = end + 1;
    }
    if (stack.empty()) {
      if (root_seen) return fail("second root element <" + name + ">");
      root_seen = true;
    }
    if (!self_closing) stack.push_back(name);
    i = j + 1;
  }
  if (!stack.empty()) return fail("unclosed <" + stack.back() + ">");
  if (!root_seen) return fail("no root element");
  return true;
}

}  // namespace testing
