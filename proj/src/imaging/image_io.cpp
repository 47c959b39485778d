#include "pyrexpose/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "pyrexpose/error.hpp"

namespace pyrexpose {

namespace fs = std::filesystem;

std::uint8_t quantize8(float v) {
  const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

namespace {

std::vector<std::uint8_t> interleave8(const Image& img) {
  std::vector<std::uint8_t> px(img.plane_size() * 3);
  for (int c = 0; c < 3; ++c) {
    auto p = img.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) px[i * 3 + c] = quantize8(p[i]);
  }
  return px;
}

Image deinterleave8(int h, int w, const std::uint8_t* px) {
  Image img(h, w);
  for (int c = 0; c < 3; ++c) {
    auto p = img.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = px[i * 3 + c] / 255.0f;
  }
  return img;
}

Image finish_png_read(png_image& image, const std::string& what) {
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError(what + ": PNG decode failed: " + msg);
  }
  return deinterleave8(static_cast<int>(image.height), static_cast<int>(image.width), px.data());
}

// Next whitespace-delimited PPM header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

Image load_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  if (ppm_token(in) != "P6") throw IoError(path.string() + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(ppm_token(in));
    h = std::stoi(ppm_token(in));
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError(path.string() + ": unsupported PPM dimensions or maxval");
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (in.gcount() != static_cast<std::streamsize>(px.size())) throw IoError(path.string() + ": truncated PPM data");
  return deinterleave8(h, w, px.data());
}

void save_ppm(const Image& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  const auto px = interleave8(img);
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

}  // namespace

Image load_image(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError(path.string() + ": cannot open");
  char magic[8] = {};
  probe.read(magic, 8);
  if (probe.gcount() >= 2 && magic[0] == 'P' && magic[1] == '6') {
    probe.close();
    return load_ppm(path);
  }
  if (probe.gcount() == 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(magic), 0, 8) == 0) {
    probe.close();
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
      throw IoError(path.string() + ": PNG header unreadable: " + image.message);
    }
    return finish_png_read(image, path.string());
  }
  throw IoError(path.string() + ": unsupported image format (expected PNG or P6 PPM)");
}

void save_image(const Image& img, const fs::path& path) {
  if (img.empty()) throw InvalidInput("save_image: empty image");
  const std::string ext = lower_ext(path);
  if (ext == ".ppm") {
    save_ppm(img, path);
    return;
  }
  if (ext != ".png") throw IoError(path.string() + ": unsupported output extension '" + ext + "'");
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string() + ": write failed");
}

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) throw InvalidInput("encode_png: empty image");
  const auto px = interleave8(img);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, px.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("decode_png: missing PNG signature");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("decode_png: ") + image.message);
  }
  return finish_png_read(image, "decode_png");
}

}  // namespace pyrexpose
