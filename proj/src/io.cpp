// Copyright 2026 The densflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "densflow/io.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include "json.hpp"

namespace densflow {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    if (mode[0] == 'r' && !fs::exists(path)) {
      throw Error(ErrorCode::kFileNotFound, path.string());
    }
    throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  }
  return f;
}

// Rows are handed over fully encoded (big-endian for 16-bit samples).
void write_png(const fs::path& path, int width, int height, int bit_depth,
               int color_type, const std::vector<std::uint8_t>& rows,
               std::size_t row_bytes) {
  FilePtr file = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoFailure, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoFailure, "libpng write failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(rows.data() + r * row_bytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) {
    throw Error(ErrorCode::kIoFailure, "flush failed: " + path.string());
  }
}

}  // namespace

void write_png_gray8(const fs::path& path, const Grid<std::uint8_t>& image) {
  std::vector<std::uint8_t> rows(image.data().begin(), image.data().end());
  write_png(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY, rows,
            static_cast<std::size_t>(image.width()));
}

void write_png_gray16(const fs::path& path, const Grid<std::uint16_t>& image) {
  std::vector<std::uint8_t> rows(image.size() * 2);
  for (std::size_t i = 0; i < image.size(); ++i) {
    rows[2 * i] = static_cast<std::uint8_t>(image[i] >> 8);
    rows[2 * i + 1] = static_cast<std::uint8_t>(image[i] & 0xff);
  }
  write_png(path, image.width(), image.height(), 16, PNG_COLOR_TYPE_GRAY, rows,
            static_cast<std::size_t>(image.width()) * 2);
}

void write_png_rgb8(const fs::path& path, const Grid<Rgb>& image) {
  std::vector<std::uint8_t> rows(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    for (int k = 0; k < 3; ++k) rows[3 * i + k] = image[i][k];
  }
  write_png(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, rows,
            static_cast<std::size_t>(image.width()) * 3);
}

Grid<std::uint16_t> read_png_gray16(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::kBadMagic, "not a PNG file: " + path.string());
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIoFailure, "libpng init failed");
  }
  // Declared before setjmp so longjmp never skips a destructor.
  std::vector<std::uint8_t> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kCorruptFile, "libpng read failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kCorruptFile,
                "expected 8/16-bit grayscale PNG: " + path.string());
  }
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  rows.resize(row_bytes * height);
  for (png_uint_32 r = 0; r < height; ++r) {
    png_read_row(png, rows.data() + r * row_bytes, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Grid<std::uint16_t> out(static_cast<int>(height), static_cast<int>(width));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = depth == 16
                 ? static_cast<std::uint16_t>((rows[2 * i] << 8) | rows[2 * i + 1])
                 : rows[i];
  }
  return out;
}

std::string rle_to_json(const std::vector<RleMask>& masks, int height,
                        int width) {
  nlohmann::ordered_json doc;
  doc["height"] = height;
  doc["width"] = width;
  auto instances = nlohmann::ordered_json::array();
  for (const RleMask& m : masks) {
    nlohmann::ordered_json inst;
    inst["id"] = m.id;
    auto runs = nlohmann::ordered_json::array();
    for (const Run& r : m.runs) runs.push_back({r.start, r.length});
    inst["runs"] = std::move(runs);
    instances.push_back(std::move(inst));
  }
  doc["instances"] = std::move(instances);
  return doc.dump();
}

LabelMap label_map_from_rle_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    const int height = doc.at("height").get<int>();
    const int width = doc.at("width").get<int>();
    std::vector<RleMask> masks;
    for (const auto& inst : doc.at("instances")) {
      RleMask m;
      m.id = inst.at("id").get<LabelId>();
      for (const auto& run : inst.at("runs")) {
        m.runs.push_back(
            Run{run.at(0).get<std::uint64_t>(), run.at(1).get<std::uint64_t>()});
      }
      masks.push_back(std::move(m));
    }
    return decode_rle(masks, height, width);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("bad RLE JSON: ") + e.what());
  }
}

fs::path save_label_map(const LabelMap& map, const fs::path& dir,
                        const std::string& stem) {
  if (max_label(map) <= 0xffff) {
    Grid<std::uint16_t> img(map.height(), map.width());
    for (std::size_t i = 0; i < map.size(); ++i) {
      img[i] = static_cast<std::uint16_t>(map[i]);
    }
    fs::path path = dir / (stem + ".png");
    write_png_gray16(path, img);
    return path;
  }
  fs::path path = dir / (stem + ".json");
  write_text_file(path, rle_to_json(encode_rle(map), map.height(), map.width()));
  return path;
}

LabelMap load_label_map(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png") {
    const auto img = read_png_gray16(path);
    LabelMap map(img.height(), img.width());
    for (std::size_t i = 0; i < img.size(); ++i) map[i] = img[i];
    return map;
  }
  if (ext == ".json") return label_map_from_rle_json(read_text_file(path));
  throw Error(ErrorCode::kInvalidArgument,
              "unsupported label map extension: " + path.string());
}

bool is_label_map_file(const fs::path& path) {
  const auto name = path.filename().string();
  const auto ext = path.extension().string();
  if (ext == ".png") return true;
  if (ext != ".json") return false;
  return name != "manifest.json" && !name.ends_with(".scene.json") &&
         !name.ends_with(".manifest.json");
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!fs::exists(path)) throw Error(ErrorCode::kFileNotFound, path.string());
    throw Error(ErrorCode::kIoFailure, "cannot read " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_file_bytes(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path.string());
}

void write_text_file(const fs::path& path, const std::string& text) {
  write_file_bytes(path, text.data(), text.size());
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoFailure, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return sha256_hex(bytes.data(), bytes.size());
}

}  // namespace densflow
