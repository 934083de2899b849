#include <png.h>

#include <cctype>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "reid/vision.hpp"

namespace reid {

namespace {

std::string lower_ext(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

RawFrame read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error("cannot read PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RawFrame frame(image.width, image.height);
  if (!png_image_finish_read(&image, nullptr, frame.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  return frame;
}

// Next whitespace-delimited token of a PNM header, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

RawFrame read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  const auto magic = pnm_token(in);
  if (magic != "P6" && magic != "P3") throw std::runtime_error("'" + path.string() + "' is not a P3/P6 PPM file");
  const auto w = std::stoul(pnm_token(in));
  const auto h = std::stoul(pnm_token(in));
  const auto maxval = std::stoul(pnm_token(in));
  if (maxval == 0 || maxval > 255) throw std::runtime_error("'" + path.string() + "': only 8-bit PPM is supported");
  RawFrame frame(w, h);
  if (magic == "P6") {
    in.read(reinterpret_cast<char*>(frame.rgb.data()), static_cast<std::streamsize>(frame.rgb.size()));
    if (!in) throw std::runtime_error("'" + path.string() + "': truncated pixel data");
  } else {
    for (auto& v : frame.rgb) {
      const auto tok = pnm_token(in);
      if (tok.empty()) throw std::runtime_error("'" + path.string() + "': truncated pixel data");
      v = static_cast<std::uint8_t>(std::stoul(tok));
    }
  }
  if (maxval != 255) {
    for (auto& v : frame.rgb) v = static_cast<std::uint8_t>((v * 255u + maxval / 2) / maxval);
  }
  return frame;
}

}  // namespace

RawFrame::RawFrame(std::size_t w, std::size_t h) : width(w), height(h), rgb(3 * w * h, 0) {}

void validate_frame(const RawFrame& frame) {
  if (frame.width < 8 || frame.height < 8) {
    throw std::invalid_argument("frame must be at least 8x8, got " + std::to_string(frame.width) + "x" +
                                std::to_string(frame.height));
  }
  if (frame.rgb.size() != 3 * frame.width * frame.height) {
    throw std::invalid_argument("frame pixel buffer does not match its dimensions");
  }
}

RawFrame read_image(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  RawFrame frame;
  if (ext == ".png") {
    frame = read_png(path);
  } else if (ext == ".ppm" || ext == ".pnm") {
    frame = read_ppm(path);
  } else {
    throw std::runtime_error("unsupported image format '" + path.string() + "'");
  }
  validate_frame(frame);
  return frame;
}

void write_png(const std::filesystem::path& path, const RawFrame& frame) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(frame.width);
  image.height = static_cast<png_uint_32>(frame.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, frame.rgb.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

void write_ppm(const std::filesystem::path& path, const RawFrame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "P6\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()), static_cast<std::streamsize>(frame.rgb.size()));
}

}  // namespace reid
