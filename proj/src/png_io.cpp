#include "gift/png_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>

namespace gift {

namespace {

struct MemWriter {
  std::vector<unsigned char>* out;
};

void pngWriteCallback(png_structp png, png_bytep data, png_size_t len) {
  auto* w = static_cast<MemWriter*>(png_get_io_ptr(png));
  w->out->insert(w->out->end(), data, data + len);
}

struct MemReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

void pngReadCallback(png_structp png, png_bytep out, png_size_t len) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + len > r->size) png_error(png, "read past end of PNG buffer");
  std::memcpy(out, r->data + r->pos, len);
  r->pos += len;
}

std::vector<unsigned char> toBytes(const FaceImage& img) {
  validateImage(img);
  const int h = img.height(), w = img.width();
  std::vector<unsigned char> bytes(static_cast<std::size_t>(h) * w * 3);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<unsigned char>(std::lround(img.pixels[static_cast<std::int64_t>(i)] * 255.0));
  return bytes;
}

}  // namespace

std::vector<unsigned char> encodePng(const FaceImage& img) {
  std::vector<unsigned char> bytes = toBytes(img);
  const int h = img.height(), w = img.width();

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  std::vector<unsigned char> out;
  MemWriter writer{&out};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write error");
  }
  png_set_write_fn(png, &writer, pngWriteCallback, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = bytes.data() + static_cast<std::size_t>(y) * w * 3;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

FaceImage decodePng(const unsigned char* data, std::size_t size) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  MemReader reader{data, size, 0};
  std::vector<unsigned char> bytes;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("malformed PNG data");
  }
  png_set_read_fn(png, &reader, pngReadCallback);
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  int bitDepth = png_get_bit_depth(png, info);
  int colorType = png_get_color_type(png, info);
  // Normalize everything to 8-bit RGB.
  if (colorType == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (colorType == PNG_COLOR_TYPE_GRAY && bitDepth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bitDepth == 16) png_set_strip_16(png);
  if (colorType == PNG_COLOR_TYPE_GRAY || colorType == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  bytes.resize(static_cast<std::size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensord px({static_cast<int>(h), static_cast<int>(w), 3});
  for (std::int64_t i = 0; i < px.numel(); ++i)
    px[i] = bytes[static_cast<std::size_t>(i)] / 255.0;
  FaceImage img{std::move(px)};
  validateImage(img);
  return img;
}

void savePng(const FaceImage& img, const std::filesystem::path& path) {
  std::vector<unsigned char> blob = encodePng(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

FaceImage loadPng(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decodePng(blob.data(), blob.size());
}

}  // namespace gift
