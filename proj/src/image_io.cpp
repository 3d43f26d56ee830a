#include "visor/image_io.hpp"

#include <png.h>
#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace visor {

namespace {

void on_write(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void on_error(png_structp, png_const_charp msg) { throw Error(std::string("png: ") + msg); }
void on_warning(png_structp, png_const_charp) {}

struct ReadCursor {
  const Bytes* src;
  std::size_t pos;
};

void on_read(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->src->size()) png_error(png, "truncated stream");
  std::memcpy(data, cur->src->data() + cur->pos, len);
  cur->pos += len;
}

Bytes encode(int width, int height, int bit_depth, int color_type, const std::vector<png_bytep>& rows) {
  Bytes out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, on_write, nullptr);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

Bytes encode_png(const RgbImage& image) {
  std::vector<png_bytep> rows(image.height());
  auto* base = const_cast<std::uint8_t*>(image.bytes().data());
  for (int r = 0; r < image.height(); ++r) rows[r] = base + static_cast<std::size_t>(r) * image.width() * 3;
  return encode(image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, rows);
}

Bytes encode_depth_png(const DepthImage& depth) {
  const auto h = static_cast<int>(depth.rows());
  const auto w = static_cast<int>(depth.cols());
  std::vector<std::uint16_t> mm(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = std::round(depth(r, c) * 1000.0);
      mm[static_cast<std::size_t>(r) * w + c] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
    }
  }
  std::vector<png_bytep> rows(h);
  for (int r = 0; r < h; ++r) rows[r] = reinterpret_cast<png_bytep>(mm.data() + static_cast<std::size_t>(r) * w);
  return encode(w, h, 16, PNG_COLOR_TYPE_GRAY, rows);
}

RgbImage decode_png(const Bytes& data) {
  if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw Error("png: bad signature");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&data, 0};
  RgbImage image;
  try {
    png_set_read_fn(png, &cursor, on_read);
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int color_type = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    image = RgbImage(w, h);
    std::vector<png_bytep> rows(h);
    for (int r = 0; r < h; ++r) rows[r] = image.bytes().data() + static_cast<std::size_t>(r) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

std::string base64_encode(const Bytes& data) {
  const std::size_t len = sodium_base64_encoded_len(data.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, data.data(), data.size(), sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);
  return out;
}

Bytes base64_decode(const std::string& text) {
  Bytes out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error("malformed base64 payload");
  }
  out.resize(len);
  return out;
}

void write_file(const std::filesystem::path& path, const Bytes& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, Bytes(text.begin(), text.end()));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

}  // namespace visor
