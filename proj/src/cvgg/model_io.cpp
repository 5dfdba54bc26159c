#include <json.hpp>

#include "fusion_mammo/cvgg/network.hpp"
#include "fusion_mammo/error.hpp"
#include "fusion_mammo/io/binary.hpp"

namespace fusion_mammo::cvgg {
namespace {

constexpr const char* kMagic = "CVGG";

std::string_view kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

nlohmann::json header_for(const CvggNetwork& net) {
  const Profile& p = net.profile();
  nlohmann::json header;
  header["profile"] = {
      {"name", p.name},
      {"input", {p.input_height, p.input_width, p.input_channels}},
      {"block_filters", p.block_filters},
      {"dense_units", p.dense_units},
      {"canonical", p.canonical},
  };
  header["class_count"] = net.class_count();
  header["seed"] = net.seed();
  auto& layers = header["layers"] = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    layers.push_back({{"name", layer.name},
                      {"kind", kind_name(layer.kind)},
                      {"output_shape", layer.output_shape},
                      {"parameters", layer.parameter_count}});
  }
  auto& tensors = header["tensors"] = nlohmann::json::array();
  const auto names = net.parameter_names();
  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors.push_back({{"name", names[i]}, {"shape", params[i]->shape()}});
  }
  return header;
}

}  // namespace

std::vector<std::byte> serialize_network(const CvggNetwork& net) {
  io::ByteWriter out;
  out.put_magic(kMagic);
  out.put(kModelFormatVersion);
  out.put_string32(header_for(net).dump());
  for (const Tensor* t : net.parameters()) out.put_floats(t->data());
  return out.release();
}

CvggNetwork deserialize_network(std::span<const std::byte> bytes) {
  io::ByteReader in(bytes, "cvgg model");
  in.expect_magic(kMagic);
  const auto version = in.get<std::uint16_t>();
  if (version != kModelFormatVersion) {
    in.fail("unsupported format version " + std::to_string(version));
  }
  const std::string header_text = in.get_string32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    in.fail(std::string("unreadable header: ") + e.what());
  }

  CvggNetwork net;
  try {
    const auto& jp = header.at("profile");
    Profile profile;
    profile.name = jp.at("name").get<std::string>();
    const auto input = jp.at("input").get<std::vector<std::size_t>>();
    if (input.size() != 3) in.fail("profile input must have 3 extents");
    profile.input_height = input[0];
    profile.input_width = input[1];
    profile.input_channels = input[2];
    profile.block_filters = jp.at("block_filters").get<std::array<std::size_t, 3>>();
    profile.dense_units = jp.at("dense_units").get<std::size_t>();
    profile.canonical = jp.at("canonical").get<bool>();
    net = CvggNetwork::build_uninitialized(profile, header.at("class_count").get<std::size_t>(),
                                           header.at("seed").get<std::uint64_t>());

    const auto& tensors = header.at("tensors");
    auto params = net.parameters();
    if (tensors.size() != params.size()) {
      in.fail("header lists " + std::to_string(tensors.size()) + " tensors, network has " +
              std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (tensors[i].at("shape").get<Shape>() != params[i]->shape()) {
        in.fail("tensor " + tensors[i].at("name").get<std::string>() + " shape does not match the rebuilt network");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    in.fail(std::string("malformed header: ") + e.what());
  } catch (const ConstructionError& e) {
    in.fail(std::string("header describes an invalid network: ") + e.what());
  }

  for (Tensor* t : net.parameters()) in.get_floats(t->data());
  in.expect_end();
  return net;
}

void save_network(const CvggNetwork& net, const std::filesystem::path& path) {
  io::write_file(path, serialize_network(net));
}

CvggNetwork load_network(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw StateError("model file " + path.string() + " does not exist");
  return deserialize_network(io::read_file(path));
}

}  // namespace fusion_mammo::cvgg
