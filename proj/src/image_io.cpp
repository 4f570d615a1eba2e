#include "aberrex/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cctype>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>

#include "aberrex/error.hpp"

namespace aberrex {
namespace {

std::uint32_t quantize(float v, std::uint32_t max_value) {
  const double scaled = std::clamp(static_cast<double>(v), 0.0, 1.0) * max_value;
  return static_cast<std::uint32_t>(std::floor(scaled + 0.5));
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

PlanarImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError(path.string(), "cannot open");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           nullptr, nullptr);
  if (!png) throw IoError(path.string(), "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError(path.string(), "libpng init failed");
  }
  // Rows are allocated before setjmp so longjmp never skips a destructor.
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string(), "corrupt or truncated PNG");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int bits = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3)
    throw IoError(path.string(), "unsupported PNG channel layout");
  PlanarImage out(height, width, channels);
  const double scale = bits == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = rows[y];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t i = static_cast<std::size_t>(x) * channels + c;
        double v;
        if (bits == 16) {
          std::uint16_t s;
          std::memcpy(&s, row + 2 * i, 2);
          v = s;
        } else {
          v = row[i];
        }
        out.at(c, y, x) = static_cast<float>(v * scale);
      }
    }
  }
  return out;
}

void write_png(const PlanarImage& image, const std::filesystem::path& path,
               int bit_depth) {
  if (image.channels() != 1 && image.channels() != 3)
    throw IoError(path.string(), "PNG needs 1 or 3 channels");
  const int channels = image.channels();
  const int bytes = bit_depth / 8;
  const std::size_t stride =
      static_cast<std::size_t>(image.width()) * channels * bytes;
  std::vector<std::uint8_t> buffer(stride * image.height());
  const std::uint32_t max_value = bit_depth == 16 ? 65535u : 255u;
  for (int y = 0; y < image.height(); ++y) {
    std::uint8_t* row = buffer.data() + stride * y;
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::uint32_t q = quantize(image.at(c, y, x), max_value);
        const std::size_t i = (static_cast<std::size_t>(x) * channels + c) * bytes;
        if (bytes == 2) {
          row[i] = static_cast<std::uint8_t>(q >> 8);  // PNG is big-endian
          row[i + 1] = static_cast<std::uint8_t>(q & 0xff);
        } else {
          row[i] = static_cast<std::uint8_t>(q);
        }
      }
    }
  }
  std::vector<png_bytep> rows(image.height());
  for (int y = 0; y < image.height(); ++y) rows[y] = buffer.data() + stride * y;

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError(path.string(), "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string(), "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string(), "PNG write failed");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width(), image.height(), bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::string& name) {
  std::string token;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(ch);
  }
  if (token.empty()) throw IoError(name, "truncated header");
  return token;
}

int parse_dimension(const std::string& token, const std::string& name) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size() || v <= 0) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw IoError(name, "bad header field '" + token + "'");
  }
}

PlanarImage read_pnm(std::istream& in, const std::string& name) {
  const std::string magic = header_token(in, name);
  const int channels = magic == "P6" ? 3 : magic == "P5" ? 1 : 0;
  if (channels == 0) throw IoError(name, "unsupported PNM variant " + magic);
  const int width = parse_dimension(header_token(in, name), name);
  const int height = parse_dimension(header_token(in, name), name);
  const int max_value = parse_dimension(header_token(in, name), name);
  if (max_value > 65535) throw IoError(name, "maxval above 65535");
  const int bytes = max_value > 255 ? 2 : 1;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height *
                                channels * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError(name, "truncated pixel data");
  PlanarImage out(height, width, channels);
  const double scale = 1.0 / max_value;
  std::size_t i = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c, ++i) {
        const double v = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
        out.at(c, y, x) = static_cast<float>(v * scale);
      }
  return out;
}

void write_pnm(const PlanarImage& image, const std::filesystem::path& path,
               int bit_depth) {
  if (image.channels() != 1 && image.channels() != 3)
    throw IoError(path.string(), "PNM needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  const std::uint32_t max_value = bit_depth == 16 ? 65535u : 255u;
  out << (image.channels() == 3 ? "P6" : "P5") << '\n'
      << image.width() << ' ' << image.height() << '\n'
      << max_value << '\n';
  std::vector<std::uint8_t> raw;
  raw.reserve(image.plane_size() * image.channels() * (bit_depth / 8));
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c) {
        const std::uint32_t q = quantize(image.at(c, y, x), max_value);
        if (bit_depth == 16) raw.push_back(static_cast<std::uint8_t>(q >> 8));
        raw.push_back(static_cast<std::uint8_t>(q & 0xff));
      }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

enum class Format { png, pnm, pfm, unknown };

Format sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open");
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  if (in.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return Format::png;
  if (in.gcount() >= 2 && sig[0] == 'P') {
    if (sig[1] == '5' || sig[1] == '6') return Format::pnm;
    if (sig[1] == 'F' || sig[1] == 'f') return Format::pfm;
  }
  return Format::unknown;
}

}  // namespace

PlanarImage read_pfm(std::istream& in, const std::string& name) {
  const std::string magic = header_token(in, name);
  const int channels = magic == "PF" ? 3 : magic == "Pf" ? 1 : 0;
  if (channels == 0) throw IoError(name, "not a PFM stream");
  const int width = parse_dimension(header_token(in, name), name);
  const int height = parse_dimension(header_token(in, name), name);
  double scale;
  try {
    scale = std::stod(header_token(in, name));
  } catch (const std::exception&) {
    throw IoError(name, "bad PFM scale");
  }
  if (scale == 0.0) throw IoError(name, "bad PFM scale");
  const bool little = scale < 0;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint32_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count * 4));
  if (in.gcount() != static_cast<std::streamsize>(count * 4))
    throw IoError(name, "truncated pixel data");
  const bool swap = little != (std::endian::native == std::endian::little);
  PlanarImage out(height, width, channels);
  std::size_t i = 0;
  // PFM stores rows bottom to top.
  for (int y = height - 1; y >= 0; --y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c, ++i) {
        std::uint32_t bits = raw[i];
        if (swap) bits = __builtin_bswap32(bits);
        out.at(c, y, x) = std::bit_cast<float>(bits);
      }
  if (!all_finite(out.data())) throw IoError(name, "non-finite sample in PFM");
  return out;
}

void write_pfm(std::ostream& out, const PlanarImage& image) {
  if (image.channels() != 1 && image.channels() != 3)
    throw InvalidInput("PFM needs 1 or 3 channels");
  out << (image.channels() == 3 ? "PF" : "Pf") << '\n'
      << image.width() << ' ' << image.height() << '\n'
      << "-1.0\n";
  std::vector<std::uint32_t> raw;
  raw.reserve(image.plane_size() * image.channels());
  for (int y = image.height() - 1; y >= 0; --y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(image.at(c, y, x));
        if constexpr (std::endian::native == std::endian::big)
          bits = __builtin_bswap32(bits);
        raw.push_back(bits);
      }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * 4));
}

PlanarImage read_image(const std::filesystem::path& path) {
  switch (sniff(path)) {
    case Format::png:
      return read_png(path);
    case Format::pnm: {
      std::ifstream in(path, std::ios::binary);
      return read_pnm(in, path.string());
    }
    case Format::pfm: {
      std::ifstream in(path, std::ios::binary);
      return read_pfm(in, path.string());
    }
    case Format::unknown:
      break;
  }
  throw IoError(path.string(), "unsupported image format");
}

void write_image(const PlanarImage& image, const std::filesystem::path& path,
                 WriteOptions options) {
  if (options.bit_depth != 8 && options.bit_depth != 16)
    throw InvalidInput("bit depth must be 8 or 16");
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") {
    write_png(image, path, options.bit_depth);
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    write_pnm(image, path, options.bit_depth);
  } else if (ext == ".pfm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    write_pfm(out, image);
    if (!out) throw IoError(path.string(), "write failed");
  } else {
    throw IoError(path.string(), "unsupported output extension '" + ext + "'");
  }
}

}  // namespace aberrex
