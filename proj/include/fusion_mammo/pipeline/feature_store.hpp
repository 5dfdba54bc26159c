#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fusion_mammo/features/feature_vector.hpp"

namespace fusion_mammo::pipeline {

struct Provenance {
  std::string extractor_version;
  /// Fingerprint of the network that produced deep (and fused) vectors; 0
  /// for handcrafted descriptors.
  std::uint64_t network_fingerprint = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct StoredFeature {
  FeatureVector vector;
  Provenance provenance;
};

inline constexpr const char* kHogExtractorVersion = "hog-9bin-16px-v1";
inline constexpr const char* kLbpExtractorVersion = "lbp-8n-r1-v1";
inline constexpr const char* kDeepExtractorVersion = "cvgg-dense4-relu-v1";
inline constexpr const char* kFusedExtractorVersion = "fused-deep-hog-lbp-v1";

/// Append-only feature store in a directory:
///   features.dat  "FEAT", u16 version, then records
///                 (u64 id hash, u16+id, u8 tag, u16+extractor, u64 network
///                 fingerprint, u32 length, float32 values)
///   features.idx  "FIDX", u16 version, u64 covered data size, u32 count,
///                 entries (u64 id hash, u8 tag, u64 record offset) sorted
/// A later record for the same (image id, tag) supersedes the earlier one.
/// Writes are serialized by an internal mutex.
class FeatureStore {
 public:
  /// Creates an empty store when the directory holds none.
  static FeatureStore open_or_create(const std::filesystem::path& dir);
  /// StateError when no store exists; FormatError when the index is missing
  /// or inconsistent with the data file.
  static FeatureStore open(const std::filesystem::path& dir);

  FeatureStore(FeatureStore&& other) noexcept;
  FeatureStore& operator=(FeatureStore&&) = delete;
  ~FeatureStore();

  /// Returns false (and writes nothing) when an identical record is already
  /// the current one for this key.
  bool put(const std::string& image_id, const FeatureVector& vector, const Provenance& provenance);
  std::optional<StoredFeature> get(const std::string& image_id, FeatureTag tag) const;
  bool contains(const std::string& image_id, FeatureTag tag) const;
  std::size_t count(FeatureTag tag) const;
  /// Rewrites the index; also called from the destructor.
  void flush();

  const std::filesystem::path& directory() const { return dir_; }
  static std::filesystem::path data_path(const std::filesystem::path& dir) { return dir / "features.dat"; }
  static std::filesystem::path index_path(const std::filesystem::path& dir) { return dir / "features.idx"; }

 private:
  FeatureStore() = default;
  void load_index();
  StoredFeature read_record(std::uint64_t offset, const std::string* expect_id, FeatureTag expect_tag,
                            std::string* id_out = nullptr) const;

  using Key = std::pair<std::string, std::uint8_t>;
  std::filesystem::path dir_;
  std::map<Key, std::uint64_t> offsets_;
  std::uint64_t data_size_ = 0;
  bool dirty_ = false;
  mutable std::mutex mutex_;
  mutable std::ifstream reader_;
};

}  // namespace fusion_mammo::pipeline
