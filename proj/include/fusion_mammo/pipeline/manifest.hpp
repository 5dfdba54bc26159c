#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fusion_mammo::pipeline {

enum class View { cc, mlo };
enum class Laterality { left, right };
enum class Split { train, test };

std::string_view to_string(View v);
std::string_view to_string(Laterality l);
std::string_view to_string(Split s);

struct ManifestRecord {
  std::string image_id;  // unique; the image path relative to the image root
  std::string patient_id;
  View view = View::cc;
  Laterality laterality = Laterality::left;
  std::filesystem::path image_path;  // absolute, or relative to the manifest's root
  int label = 0;                     // 0 benign, 1 malignant
  Split split = Split::train;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  /// As stored; a relative root is taken relative to base_dir.
  std::filesystem::path image_root;
  /// Directory of the manifest file when loaded; not persisted.
  std::filesystem::path base_dir;
  std::vector<ManifestRecord> records;
  /// Human-readable notes from ingestion (split source, merged duplicates).
  std::vector<std::string> notes;

  std::size_t count(Split s) const;
  double fraction(Split s) const;
  std::filesystem::path resolve(const ManifestRecord& r) const;
  std::vector<std::size_t> indices(Split s) const;
  /// Hash of every record field, in order.
  std::uint64_t fingerprint() const;
};

// ------------------------------------------------------------------ CSV --

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends,
/// newlines inside quotes. Rows with a different field count than the
/// header raise DataError with the line number.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of the first header matching any alias (case-insensitive, with
  /// '_' and ' ' treated alike), or npos.
  std::size_t column(std::initializer_list<std::string_view> aliases) const;
};

CsvTable parse_csv(std::string_view text, std::string_view source = "csv");
std::string csv_escape(std::string_view field);

/// MALIGNANT -> 1; BENIGN and BENIGN_WITHOUT_CALLBACK -> 0 (case-insensitive,
/// surrounding whitespace ignored). Anything else is a DataError quoting it.
int parse_pathology(std::string_view text);
View parse_view(std::string_view text);
Laterality parse_laterality(std::string_view text);

// ------------------------------------------------------------- ingestion --

enum class SplitPolicy {
  /// Seeded 80/20 split stratified by label; patients never straddle splits.
  patient_grouped,
  /// Seeded 80/20 split stratified by label, per image.
  stratified,
};

struct IngestOptions {
  std::vector<std::filesystem::path> csv_paths;
  std::filesystem::path image_root;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  SplitPolicy policy = SplitPolicy::patient_grouped;
  /// Use split information from the CSVs (a `split` column or train/test in
  /// the file name) when every record carries it.
  bool use_published_split = true;
  bool verify_images = true;
};

/// Builds a manifest from CBIS-DDSM style case description CSVs.
/// Rows sharing an image path are merged (malignant if any row is).
/// DICOM paths are mapped to the .png file next to them.
/// IngestionError: missing CSV or image files (offenders listed), zero records.
/// DataError: unknown pathology/view/laterality, unreadable PNG header.
DatasetManifest ingest_dataset(const IngestOptions& options);

/// Assigns train/test in place; deterministic in (records, seed, policy).
void assign_split(DatasetManifest& manifest, std::uint64_t seed, double test_fraction, SplitPolicy policy);

/// Keeps a seeded, label-stratified subset of at most n records per split
/// proportion; used for desk-scale runs on large datasets.
DatasetManifest subsample(const DatasetManifest& manifest, std::size_t n, std::uint64_t seed);

// ----------------------------------------------------------- persistence --

/// CSV with columns image_id,patient_id,view,laterality,image_path,label,split
/// preceded by a `# image_root=` line.
std::string manifest_to_csv(const DatasetManifest& manifest);
DatasetManifest manifest_from_csv(std::string_view text, std::string_view source = "manifest");
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
/// StateError when the file does not exist.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace fusion_mammo::pipeline
