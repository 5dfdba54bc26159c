#include "fusion_mammo/pipeline/feature_store.hpp"

#include <algorithm>
#include <array>
#include <tuple>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/io/binary.hpp"
#include "fusion_mammo/util/hash.hpp"

namespace fusion_mammo::pipeline {
namespace {

constexpr const char* kDataMagic = "FEAT";
constexpr const char* kIndexMagic = "FIDX";
constexpr std::uint16_t kStoreVersion = 1;
constexpr std::uint64_t kDataHeaderSize = 6;

std::vector<std::byte> encode_record(const std::string& id, const FeatureVector& v, const Provenance& p) {
  io::ByteWriter out;
  out.put(fnv1a(id));
  out.put_string16(id);
  out.put(static_cast<std::uint8_t>(v.tag()));
  out.put_string16(p.extractor_version);
  out.put(p.network_fingerprint);
  out.put(static_cast<std::uint32_t>(v.size()));
  out.put_floats(v.values());
  return out.release();
}

}  // namespace

FeatureStore::FeatureStore(FeatureStore&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  dir_ = std::move(other.dir_);
  offsets_ = std::move(other.offsets_);
  data_size_ = other.data_size_;
  dirty_ = other.dirty_;
  other.dirty_ = false;
  other.dir_.clear();
}

FeatureStore::~FeatureStore() {
  if (dir_.empty()) return;
  try {
    flush();
  } catch (...) {
    // Index stays at its last flushed state; data records remain appended.
  }
}

FeatureStore FeatureStore::open_or_create(const std::filesystem::path& dir) {
  const bool has_data = std::filesystem::exists(data_path(dir));
  const bool has_index = std::filesystem::exists(index_path(dir));
  if (!has_data && !has_index) {
    std::filesystem::create_directories(dir);
    io::ByteWriter header;
    header.put_magic(kDataMagic);
    header.put(kStoreVersion);
    io::write_file(data_path(dir), header.bytes());
    FeatureStore store;
    store.dir_ = dir;
    store.data_size_ = kDataHeaderSize;
    store.dirty_ = true;
    store.flush();
    return store;
  }
  return open(dir);
}

FeatureStore FeatureStore::open(const std::filesystem::path& dir) {
  const bool has_data = std::filesystem::exists(data_path(dir));
  const bool has_index = std::filesystem::exists(index_path(dir));
  if (!has_data && !has_index) {
    throw StateError("no feature store in " + dir.string() + "; run the extract stage first");
  }
  if (!has_index) throw FormatError("feature store " + dir.string() + ": index file features.idx is missing");
  if (!has_data) throw FormatError("feature store " + dir.string() + ": data file features.dat is missing");
  FeatureStore store;
  store.dir_ = dir;
  store.load_index();
  return store;
}

void FeatureStore::load_index() {
  const auto actual_size = static_cast<std::uint64_t>(std::filesystem::file_size(data_path(dir_)));
  {
    std::ifstream data(data_path(dir_), std::ios::binary);
    std::array<std::byte, kDataHeaderSize> head{};
    data.read(reinterpret_cast<char*>(head.data()), head.size());
    io::ByteReader in(std::span<const std::byte>(head.data(), static_cast<std::size_t>(data.gcount())), "feature data");
    in.expect_magic(kDataMagic);
    if (const auto v = in.get<std::uint16_t>(); v != kStoreVersion) in.fail("unsupported version " + std::to_string(v));
  }
  const auto bytes = io::read_file(index_path(dir_));
  io::ByteReader in(bytes, "feature index");
  in.expect_magic(kIndexMagic);
  if (const auto v = in.get<std::uint16_t>(); v != kStoreVersion) in.fail("unsupported version " + std::to_string(v));
  data_size_ = in.get<std::uint64_t>();
  if (data_size_ > actual_size || data_size_ < kDataHeaderSize) {
    in.fail("index covers " + std::to_string(data_size_) + " bytes but the data file has " +
            std::to_string(actual_size));
  }
  const auto count = in.get<std::uint32_t>();
  if (static_cast<std::size_t>(count) * 17 > in.remaining()) in.fail("truncated entry table");
  std::vector<std::tuple<std::uint64_t, std::uint8_t, std::uint64_t>> entries(count);
  for (auto& [hash, tag, offset] : entries) {
    hash = in.get<std::uint64_t>();
    tag = in.get<std::uint8_t>();
    offset = in.get<std::uint64_t>();
    if (tag > static_cast<std::uint8_t>(FeatureTag::fused)) in.fail("unknown tag " + std::to_string(tag));
    if (offset < kDataHeaderSize || offset >= data_size_) in.fail("entry offset outside the data file");
  }
  in.expect_end();
  for (const auto& [hash, tag, offset] : entries) {
    std::string id;
    read_record(offset, nullptr, static_cast<FeatureTag>(tag), &id);
    if (fnv1a(id) != hash) throw FormatError("feature index: id hash mismatch at offset " + std::to_string(offset));
    offsets_[{id, tag}] = offset;
  }
  // Records appended after the last index write are not trusted.
  data_size_ = actual_size;
}

StoredFeature FeatureStore::read_record(std::uint64_t offset, const std::string* expect_id, FeatureTag expect_tag,
                                        std::string* id_out) const {
  if (!reader_.is_open()) reader_.open(data_path(dir_), std::ios::binary);
  reader_.clear();
  reader_.seekg(static_cast<std::streamoff>(offset));
  auto read_exact = [&](std::size_t n) {
    std::vector<std::byte> buf(n);
    reader_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(reader_.gcount()) != n) {
      throw FormatError("feature data: truncated record at offset " + std::to_string(offset));
    }
    return buf;
  };
  auto head = read_exact(10);
  io::ByteReader h(head, "feature record");
  const auto hash = h.get<std::uint64_t>();
  const auto id_len = h.get<std::uint16_t>();
  const auto id_bytes = read_exact(id_len);
  const std::string id(reinterpret_cast<const char*>(id_bytes.data()), id_bytes.size());
  if (fnv1a(id) != hash) throw FormatError("feature record at offset " + std::to_string(offset) + ": hash mismatch");
  if (expect_id != nullptr && *expect_id != id) {
    throw FormatError("feature record at offset " + std::to_string(offset) + " belongs to " + id);
  }
  auto mid = read_exact(3);
  io::ByteReader m(mid, "feature record");
  const auto tag = m.get<std::uint8_t>();
  const auto ext_len = m.get<std::uint16_t>();
  if (tag != static_cast<std::uint8_t>(expect_tag)) {
    throw FormatError("feature record for " + id + ": stored tag " + std::to_string(tag) + ", index says " +
                      std::string(to_string(expect_tag)));
  }
  const auto ext_bytes = read_exact(ext_len);
  auto tail = read_exact(12);
  io::ByteReader t(tail, "feature record");
  Provenance prov;
  prov.extractor_version.assign(reinterpret_cast<const char*>(ext_bytes.data()), ext_bytes.size());
  prov.network_fingerprint = t.get<std::uint64_t>();
  const auto length = t.get<std::uint32_t>();
  if (length != expected_length(expect_tag)) {
    throw FormatError("feature record for " + id + ": tag " + std::string(to_string(expect_tag)) + " with length " +
                      std::to_string(length) + ", expected " + std::to_string(expected_length(expect_tag)));
  }
  const auto raw = read_exact(static_cast<std::size_t>(length) * sizeof(float));
  std::vector<float> values(length);
  io::ByteReader v(raw, "feature record");
  v.get_floats(values);
  if (id_out != nullptr) *id_out = id;
  return {FeatureVector(expect_tag, std::move(values)), std::move(prov)};
}

bool FeatureStore::put(const std::string& image_id, const FeatureVector& vector, const Provenance& provenance) {
  if (image_id.empty() || image_id.size() > 0xFFFF) throw ArgumentError("feature store: bad image id length");
  std::lock_guard lock(mutex_);
  const Key key{image_id, static_cast<std::uint8_t>(vector.tag())};
  if (auto it = offsets_.find(key); it != offsets_.end()) {
    const StoredFeature current = read_record(it->second, &image_id, vector.tag());
    if (current.vector == vector && current.provenance == provenance) return false;
  }
  const auto bytes = encode_record(image_id, vector, provenance);
  {
    std::ofstream out(data_path(dir_), std::ios::binary | std::ios::app);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StateError("cannot append to " + data_path(dir_).string());
  }
  offsets_[key] = data_size_;
  data_size_ += bytes.size();
  dirty_ = true;
  return true;
}

std::optional<StoredFeature> FeatureStore::get(const std::string& image_id, FeatureTag tag) const {
  std::lock_guard lock(mutex_);
  const auto it = offsets_.find({image_id, static_cast<std::uint8_t>(tag)});
  if (it == offsets_.end()) return std::nullopt;
  return read_record(it->second, &image_id, tag);
}

bool FeatureStore::contains(const std::string& image_id, FeatureTag tag) const {
  std::lock_guard lock(mutex_);
  return offsets_.contains({image_id, static_cast<std::uint8_t>(tag)});
}

std::size_t FeatureStore::count(FeatureTag tag) const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(offsets_.begin(), offsets_.end(), [tag](const auto& kv) {
    return kv.first.second == static_cast<std::uint8_t>(tag);
  }));
}

void FeatureStore::flush() {
  std::lock_guard lock(mutex_);
  if (!dirty_) return;
  std::vector<std::tuple<std::uint64_t, std::uint8_t, std::uint64_t>> entries;
  entries.reserve(offsets_.size());
  for (const auto& [key, offset] : offsets_) entries.emplace_back(fnv1a(key.first), key.second, offset);
  std::sort(entries.begin(), entries.end());
  io::ByteWriter out;
  out.put_magic(kIndexMagic);
  out.put(kStoreVersion);
  out.put(data_size_);
  out.put(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [hash, tag, offset] : entries) {
    out.put(hash);
    out.put(tag);
    out.put(offset);
  }
  io::write_file(index_path(dir_), out.bytes());
  dirty_ = false;
}

}  // namespace fusion_mammo::pipeline
