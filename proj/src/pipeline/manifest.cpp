#include "fusion_mammo/pipeline/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/pipeline/image_io.hpp"
#include "fusion_mammo/util/hash.hpp"
#include "fusion_mammo/util/rng.hpp"

namespace fusion_mammo::pipeline {
namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string header_key(std::string_view s) {
  std::string out;
  for (char c : trim(s)) {
    out.push_back(c == '_' || c == '-' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string format_offenders(const std::vector<std::string>& items) {
  constexpr std::size_t kShown = 20;
  std::string out;
  for (std::size_t i = 0; i < std::min(items.size(), kShown); ++i) out += "\n  " + items[i];
  if (items.size() > kShown) out += "\n  ... and " + std::to_string(items.size() - kShown) + " more";
  return out;
}

}  // namespace

std::string_view to_string(View v) { return v == View::cc ? "CC" : "MLO"; }
std::string_view to_string(Laterality l) { return l == Laterality::left ? "L" : "R"; }
std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::size_t DatasetManifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [s](const ManifestRecord& r) { return r.split == s; }));
}

double DatasetManifest::fraction(Split s) const {
  return records.empty() ? 0.0 : static_cast<double>(count(s)) / static_cast<double>(records.size());
}

std::filesystem::path DatasetManifest::resolve(const ManifestRecord& r) const {
  if (r.image_path.is_absolute()) return r.image_path;
  std::filesystem::path root = image_root;
  if (root.is_relative()) root = base_dir / root;
  return root / r.image_path;
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == s) out.push_back(i);
  }
  return out;
}

std::uint64_t DatasetManifest::fingerprint() const {
  Fnv1a h;
  for (const auto& r : records) {
    h.update(r.image_id).update("\x1f").update(r.patient_id).update("\x1f");
    h.update(to_string(r.view)).update(to_string(r.laterality)).update(r.image_path.generic_string());
    h.update(r.label ? "1" : "0").update(to_string(r.split)).update("\x1e");
  }
  return h.digest();
}

// ------------------------------------------------------------------ CSV --

std::size_t CsvTable::column(std::initializer_list<std::string_view> aliases) const {
  for (std::string_view alias : aliases) {
    const std::string want = header_key(alias);
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header_key(header[i]) == want) return i;
    }
  }
  return std::string::npos;
}

CsvTable parse_csv(std::string_view text, std::string_view source) {
  CsvTable table;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1, row_line = 1;

  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
    const bool blank = row.size() == 1 && row[0].empty();
    if (!blank) {
      if (table.header.empty()) {
        table.header = std::move(row);
      } else if (row.size() != table.header.size()) {
        throw DataError(std::string(source) + ": line " + std::to_string(row_line) + " has " +
                        std::to_string(row.size()) + " fields, header has " + std::to_string(table.header.size()));
      } else {
        table.rows.push_back(std::move(row));
      }
    }
    row.clear();
  };

  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          throw DataError(std::string(source) + ": stray quote on line " + std::to_string(line));
        }
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        row_line = ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw DataError(std::string(source) + ": unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return table;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

int parse_pathology(std::string_view text) {
  const std::string v = upper(trim(text));
  if (v == "MALIGNANT") return 1;
  if (v == "BENIGN" || v == "BENIGN_WITHOUT_CALLBACK") return 0;
  throw DataError("unknown pathology \"" + std::string(text) + "\"");
}

View parse_view(std::string_view text) {
  const std::string v = upper(trim(text));
  if (v == "CC") return View::cc;
  if (v == "MLO") return View::mlo;
  throw DataError("unknown image view \"" + std::string(text) + "\"");
}

Laterality parse_laterality(std::string_view text) {
  const std::string v = upper(trim(text));
  if (v == "L" || v == "LEFT") return Laterality::left;
  if (v == "R" || v == "RIGHT") return Laterality::right;
  throw DataError("unknown laterality \"" + std::string(text) + "\"");
}

// ------------------------------------------------------------- ingestion --

namespace {

std::optional<Split> parse_split(std::string_view text) {
  const std::string v = upper(trim(text));
  if (v == "TRAIN" || v == "TRAINING") return Split::train;
  if (v == "TEST" || v == "TESTING") return Split::test;
  return std::nullopt;
}

std::optional<Split> split_from_filename(const std::filesystem::path& p) {
  std::string name = upper(p.filename().string());
  if (name.find("TEST") != std::string::npos) return Split::test;
  if (name.find("TRAIN") != std::string::npos) return Split::train;
  return std::nullopt;
}

std::string normalize_image_path(std::string_view raw) {
  std::string p = trim(raw);
  std::replace(p.begin(), p.end(), '\\', '/');
  if (p.size() > 4) {
    const std::string ext = upper(std::string_view(p).substr(p.size() - 4));
    if (ext == ".DCM") p = p.substr(0, p.size() - 4) + ".png";
  }
  return p;
}

}  // namespace

DatasetManifest ingest_dataset(const IngestOptions& options) {
  if (options.csv_paths.empty()) throw IngestionError("no CSV files given");
  std::vector<std::string> missing;
  for (const auto& p : options.csv_paths) {
    if (!std::filesystem::is_regular_file(p)) missing.push_back(p.string());
  }
  if (!missing.empty()) throw IngestionError("missing CSV file(s):" + format_offenders(missing));

  DatasetManifest manifest;
  manifest.image_root = std::filesystem::absolute(options.image_root).lexically_normal();
  std::map<std::string, std::size_t> by_path;
  std::vector<std::optional<Split>> published;
  std::size_t merged = 0;

  for (const auto& csv_path : options.csv_paths) {
    const std::string source = csv_path.string();
    const CsvTable table = parse_csv(io::read_text_file(csv_path), source);
    const std::size_t c_patient = table.column({"patient_id", "patient id", "patient"});
    const std::size_t c_view = table.column({"image view", "view"});
    const std::size_t c_side = table.column({"left or right breast", "laterality", "side"});
    const std::size_t c_path = table.column({"image file path", "image_path", "path", "file"});
    const std::size_t c_label = table.column({"pathology", "label"});
    const std::size_t c_split = table.column({"split"});
    std::vector<std::string> absent;
    if (c_patient == std::string::npos) absent.emplace_back("patient_id");
    if (c_view == std::string::npos) absent.emplace_back("image view");
    if (c_side == std::string::npos) absent.emplace_back("left or right breast");
    if (c_path == std::string::npos) absent.emplace_back("image file path");
    if (c_label == std::string::npos) absent.emplace_back("pathology");
    if (!absent.empty()) {
      std::string names;
      for (const auto& a : absent) names += (names.empty() ? "" : ", ") + a;
      throw IngestionError(source + ": missing required column(s): " + names);
    }
    const auto file_split = split_from_filename(csv_path);

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const std::string where = source + " row " + std::to_string(r + 2);
      ManifestRecord rec;
      rec.image_id = normalize_image_path(row[c_path]);
      if (rec.image_id.empty()) throw DataError(where + ": empty image path");
      rec.image_path = rec.image_id;
      rec.patient_id = trim(row[c_patient]);
      try {
        rec.view = parse_view(row[c_view]);
        rec.laterality = parse_laterality(row[c_side]);
        rec.label = parse_pathology(row[c_label]);
      } catch (const DataError& e) {
        throw DataError(where + ": " + e.what());
      }
      std::optional<Split> split = file_split;
      if (c_split != std::string::npos) split = parse_split(row[c_split]);

      if (auto it = by_path.find(rec.image_id); it != by_path.end()) {
        ManifestRecord& prior = manifest.records[it->second];
        if (prior.patient_id != rec.patient_id || prior.view != rec.view || prior.laterality != rec.laterality) {
          throw DataError(where + ": image " + rec.image_id + " listed with conflicting patient/view/laterality");
        }
        prior.label = std::max(prior.label, rec.label);
        if (published[it->second] != split) published[it->second] = std::nullopt;
        ++merged;
        continue;
      }
      by_path.emplace(rec.image_id, manifest.records.size());
      manifest.records.push_back(std::move(rec));
      published.push_back(split);
    }
  }
  if (manifest.records.empty()) throw IngestionError("CSV input contains no records; empty manifests are rejected");
  if (merged > 0) {
    manifest.notes.push_back(std::to_string(merged) + " duplicate image rows merged (malignant if any row is)");
  }

  if (options.verify_images) {
    std::vector<std::string> absent, unreadable;
    for (const auto& r : manifest.records) {
      const auto path = manifest.resolve(r);
      if (!std::filesystem::is_regular_file(path)) {
        absent.push_back(path.string());
      } else if (!png_header_readable(path)) {
        unreadable.push_back(path.string());
      }
    }
    if (!absent.empty()) {
      throw IngestionError(std::to_string(absent.size()) + " image file(s) missing:" + format_offenders(absent));
    }
    if (!unreadable.empty()) {
      throw DataError(std::to_string(unreadable.size()) + " unreadable PNG file(s):" + format_offenders(unreadable));
    }
  }

  const bool all_published =
      std::all_of(published.begin(), published.end(), [](const auto& s) { return s.has_value(); });
  if (options.use_published_split && all_published) {
    for (std::size_t i = 0; i < published.size(); ++i) manifest.records[i].split = *published[i];
    manifest.notes.emplace_back("split taken from the CSV files");
  } else {
    assign_split(manifest, options.seed, options.test_fraction, options.policy);
  }
  return manifest;
}

void assign_split(DatasetManifest& manifest, std::uint64_t seed, double test_fraction, SplitPolicy policy) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ArgumentError("test fraction must lie in (0,1)");
  // Groups in order of first appearance; a group is one patient, or one image.
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (policy == SplitPolicy::patient_grouped) {
      auto [it, fresh] = group_of.emplace(manifest.records[i].patient_id, groups.size());
      if (fresh) groups.emplace_back();
      groups[it->second].push_back(i);
    } else {
      groups.push_back({i});
    }
  }
  for (int stratum = 0; stratum < 2; ++stratum) {
    std::vector<std::size_t> members;
    std::size_t images = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      int label = 0;
      for (std::size_t i : groups[g]) label = std::max(label, manifest.records[i].label);
      if (label == stratum) {
        members.push_back(g);
        images += groups[g].size();
      }
    }
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(stratum)));
    rng.shuffle(std::span(members));
    const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(images)));
    std::size_t in_test = 0;
    for (std::size_t g : members) {
      const Split s = in_test < target ? Split::test : Split::train;
      if (s == Split::test) in_test += groups[g].size();
      for (std::size_t i : groups[g]) manifest.records[i].split = s;
    }
  }
  std::ostringstream note;
  note << "seeded " << (policy == SplitPolicy::patient_grouped ? "patient-grouped" : "per-image")
       << " stratified split, test fraction " << test_fraction << ", seed " << seed;
  manifest.notes.push_back(note.str());
}

DatasetManifest subsample(const DatasetManifest& manifest, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("subsample size must be positive");
  if (n >= manifest.records.size()) return manifest;
  std::vector<std::size_t> keep;
  std::size_t per_label[2] = {0, 0};
  for (const auto& r : manifest.records) ++per_label[r.label];
  std::size_t taken = 0;
  for (int label = 0; label < 2; ++label) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
      if (manifest.records[i].label == label) members.push_back(i);
    }
    Rng rng(mix_seed(seed, 100 + static_cast<std::uint64_t>(label)));
    rng.shuffle(std::span(members));
    std::size_t quota = label == 0 ? static_cast<std::size_t>(std::llround(
                                         static_cast<double>(n) * static_cast<double>(per_label[0]) /
                                         static_cast<double>(manifest.records.size())))
                                   : n - taken;
    quota = std::min(quota, members.size());
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota));
    taken += quota;
  }
  std::sort(keep.begin(), keep.end());
  DatasetManifest out;
  out.image_root = manifest.image_root;
  out.base_dir = manifest.base_dir;
  out.notes = manifest.notes;
  for (std::size_t i : keep) out.records.push_back(manifest.records[i]);
  out.notes.push_back("subsampled to " + std::to_string(out.records.size()) + " records, seed " +
                      std::to_string(seed));
  return out;
}

// ----------------------------------------------------------- persistence --

std::string manifest_to_csv(const DatasetManifest& manifest) {
  std::string out = "# image_root=" + manifest.image_root.generic_string() + "\n";
  for (const auto& note : manifest.notes) out += "# note=" + note + "\n";
  out += "image_id,patient_id,view,laterality,image_path,label,split\n";
  for (const auto& r : manifest.records) {
    out += csv_escape(r.image_id) + ',' + csv_escape(r.patient_id) + ',' + std::string(to_string(r.view)) + ',' +
           std::string(to_string(r.laterality)) + ',' + csv_escape(r.image_path.generic_string()) + ',' +
           (r.label ? "malignant" : "benign") + ',' + std::string(to_string(r.split)) + '\n';
  }
  return out;
}

DatasetManifest manifest_from_csv(std::string_view text, std::string_view source) {
  DatasetManifest manifest;
  // Leading '#' lines carry the root and notes.
  while (!text.empty() && text.front() == '#') {
    const std::size_t eol = text.find('\n');
    const std::string_view line = text.substr(0, eol);
    if (line.starts_with("# image_root=")) manifest.image_root = std::string(line.substr(13));
    if (line.starts_with("# note=")) manifest.notes.emplace_back(line.substr(7));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
  }
  const CsvTable table = parse_csv(text, source);
  const std::size_t cols[] = {table.column({"image_id"}), table.column({"patient_id"}), table.column({"view"}),
                              table.column({"laterality"}), table.column({"image_path"}), table.column({"label"}),
                              table.column({"split"})};
  for (std::size_t c : cols) {
    if (c == std::string::npos) throw FormatError(std::string(source) + ": not a manifest (missing columns)");
  }
  std::set<std::string> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    ManifestRecord rec;
    rec.image_id = row[cols[0]];
    rec.patient_id = row[cols[1]];
    rec.view = parse_view(row[cols[2]]);
    rec.laterality = parse_laterality(row[cols[3]]);
    rec.image_path = row[cols[4]];
    rec.label = parse_pathology(row[cols[5]]);
    const auto split = parse_split(row[cols[6]]);
    if (!split) throw FormatError(std::string(source) + ": bad split \"" + row[cols[6]] + "\"");
    rec.split = *split;
    if (!seen.insert(rec.image_id).second) {
      throw FormatError(std::string(source) + ": duplicate image id " + rec.image_id);
    }
    manifest.records.push_back(std::move(rec));
  }
  if (manifest.records.empty()) throw IngestionError(std::string(source) + ": manifest has no records");
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  io::write_text_file(path, manifest_to_csv(manifest));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw StateError("manifest " + path.string() + " does not exist");
  DatasetManifest m = manifest_from_csv(io::read_text_file(path), path.string());
  m.base_dir = path.parent_path();
  return m;
}

}  // namespace fusion_mammo::pipeline
