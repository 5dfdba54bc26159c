#include "fusion_mammo/pipeline/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fusion_mammo/error.hpp"
#include "fusion_mammo/io/binary.hpp"

namespace fusion_mammo::pipeline {
namespace {

// libpng reports errors by longjmp. The decoding helpers below keep every
// object with a destructor alive across the setjmp point and report failure
// through this context; exceptions are thrown only after libpng is torn down.
struct PngContext {
  char message[256] = "unknown libpng error";
  std::span<const std::byte> input;
  std::size_t offset = 0;
  std::vector<std::byte>* output = nullptr;
};

void on_error(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<PngContext*>(png_get_error_ptr(png));
  std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void on_read(png_structp png, png_bytep out, png_size_t length) {
  auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
  if (ctx->offset + length > ctx->input.size()) png_error(png, "unexpected end of file");
  std::memcpy(out, ctx->input.data() + ctx->offset, length);
  ctx->offset += length;
}

void on_write(png_structp png, png_bytep data, png_size_t length) {
  auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
  const auto* p = reinterpret_cast<const std::byte*>(data);
  ctx->output->insert(ctx->output->end(), p, p + length);
}

void on_flush(png_structp) {}

struct Decoded {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int bit_depth = 0;
  std::vector<unsigned char> rows;
};

bool decode(PngContext& ctx, Decoded& out, bool header_only) {
  if (ctx.input.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(ctx.input.data()), 0, 8) != 0) {
    std::snprintf(ctx.message, sizeof(ctx.message), "not a PNG file");
    return false;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, on_error, on_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> row_pointers;
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &ctx, on_read);
  png_read_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  if (header_only) {
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
  }
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (color_type & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (png_get_channels(png, info) != 1) png_error(png, "could not convert to a single channel");
  const std::size_t stride = png_get_rowbytes(png, info);
  out.rows.resize(stride * out.height);
  row_pointers.resize(out.height);
  for (std::size_t y = 0; y < out.height; ++y) row_pointers[y] = out.rows.data() + y * stride;
  png_read_image(png, row_pointers.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode(PngContext& ctx, const GrayImage& image, int bit_depth, std::vector<unsigned char>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, on_error, on_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> row_pointers(image.height());
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &ctx, on_write, on_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()),
               bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = image.width() * static_cast<std::size_t>(bit_depth / 8);
  for (std::size_t y = 0; y < image.height(); ++y) row_pointers[y] = rows.data() + y * stride;
  png_write_image(png, row_pointers.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

std::vector<std::byte> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return bytes;
}

}  // namespace

GrayImage read_png(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  PngContext ctx;
  ctx.input = bytes;
  Decoded decoded;
  if (!decode(ctx, decoded, false)) {
    throw DataError("unreadable image " + path.string() + ": " + ctx.message);
  }
  const std::size_t n = static_cast<std::size_t>(decoded.width) * decoded.height;
  std::vector<float> pixels(n);
  if (decoded.bit_depth == 16) {
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = (static_cast<unsigned>(decoded.rows[2 * i]) << 8) | decoded.rows[2 * i + 1];
      pixels[i] = static_cast<float>(v / 65535.0);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) pixels[i] = static_cast<float>(decoded.rows[i] / 255.0);
  }
  return GrayImage(decoded.width, decoded.height, std::move(pixels));
}

bool png_header_readable(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::vector<char> head(4096);
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  PngContext ctx;
  ctx.input = std::as_bytes(std::span(head));
  Decoded decoded;
  return decode(ctx, decoded, true) && decoded.width > 0 && decoded.height > 0;
}

void write_png(const std::filesystem::path& path, const GrayImage& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ArgumentError("write_png: bit depth must be 8 or 16");
  if (image.width() == 0 || image.height() == 0) throw DimensionError("write_png: empty image");
  const double max_level = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<unsigned char> rows(image.pixels().size() * static_cast<std::size_t>(bit_depth / 8));
  for (std::size_t i = 0; i < image.pixels().size(); ++i) {
    const auto level = static_cast<unsigned>(std::lround(std::clamp(image.pixels()[i], 0.0f, 1.0f) * max_level));
    if (bit_depth == 16) {
      rows[2 * i] = static_cast<unsigned char>(level >> 8);
      rows[2 * i + 1] = static_cast<unsigned char>(level & 0xFF);
    } else {
      rows[i] = static_cast<unsigned char>(level);
    }
  }
  std::vector<std::byte> encoded;
  PngContext ctx;
  ctx.output = &encoded;
  if (!encode(ctx, image, bit_depth, rows)) throw DataError("cannot encode " + path.string() + ": " + ctx.message);
  io::write_file(path, encoded);
}

GrayImage resize_bilinear(const GrayImage& image, std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw DimensionError("resize_bilinear: zero target size");
  if (image.width() == 0 || image.height() == 0) throw DimensionError("resize_bilinear: empty source image");
  if (width == image.width() && height == image.height()) return image;
  const double sx = static_cast<double>(image.width()) / static_cast<double>(width);
  const double sy = static_cast<double>(image.height()) / static_cast<double>(height);
  const double max_x = static_cast<double>(image.width() - 1);
  const double max_y = static_cast<double>(image.height() - 1);
  std::vector<float> out(width * height);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = image.at(x0, y0) * (1.0 - wx) + image.at(x1, y0) * wx;
      const double bottom = image.at(x0, y1) * (1.0 - wx) + image.at(x1, y1) * wx;
      out[y * width + x] = std::clamp(static_cast<float>(top * (1.0 - wy) + bottom * wy), 0.0f, 1.0f);
    }
  }
  return GrayImage(width, height, std::move(out));
}

Tensor to_rgb_tensor(const GrayImage& image) {
  Tensor t(Shape{image.height(), image.width(), 3});
  auto data = t.data();
  const auto pixels = image.pixels();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    data[3 * i] = data[3 * i + 1] = data[3 * i + 2] = pixels[i];
  }
  return t;
}

PreprocessedImage load_and_preprocess(const std::filesystem::path& path) {
  GrayImage gray = resize_bilinear(read_png(path), kImageSize, kImageSize);
  Tensor rgb = to_rgb_tensor(gray);
  return {std::move(gray), std::move(rgb)};
}

Tensor network_input(const GrayImage& gray255, const cvgg::Profile& profile) {
  return to_rgb_tensor(resize_bilinear(gray255, profile.input_width, profile.input_height));
}

}  // namespace fusion_mammo::pipeline
