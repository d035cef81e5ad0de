#include "topoconv/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "topoconv/errors.hpp"

namespace topoconv {

Tensor GrayImage::to_unit_tensor() const {
  std::vector<double> v(pixels.size());
  std::transform(pixels.begin(), pixels.end(), v.begin(), [](std::uint8_t p) { return p / 255.0; });
  return Tensor(Shape{height, width}, std::move(v));
}

BinaryMask GrayImage::to_mask() const {
  std::vector<std::uint8_t> bits(pixels.size());
  std::transform(pixels.begin(), pixels.end(), bits.begin(), [](std::uint8_t p) { return p >= 128 ? 1 : 0; });
  return BinaryMask(height, width, std::move(bits));
}

GrayImage GrayImage::from_unit(std::size_t height, std::size_t width, std::span<const double> values) {
  if (values.size() != height * width) throw ShapeError("GrayImage: value count does not match H*W");
  GrayImage img{height, width, std::vector<std::uint8_t>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  return img;
}

GrayImage GrayImage::from_mask(const BinaryMask& mask) {
  GrayImage img{mask.height(), mask.width(), std::vector<std::uint8_t>(mask.size())};
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask.bits()[i] ? 255 : 0;
  return img;
}

namespace {

// Reads the next header token, skipping whitespace and `#` comments.
std::string next_token(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  if (start == pos) throw IoError("PGM: truncated header");
  return s.substr(start, pos - start);
}

std::size_t parse_dim(const std::string& token) {
  try {
    std::size_t used = 0;
    const long v = std::stol(token, &used);
    if (used != token.size() || v <= 0) throw IoError("PGM: bad header value '" + token + "'");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw IoError("PGM: bad header value '" + token + "'");
  }
}

}  // namespace

GrayImage parse_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  if (next_token(bytes, pos) != "P5") throw IoError("PGM: only binary P5 files are supported");
  GrayImage img;
  img.width = parse_dim(next_token(bytes, pos));
  img.height = parse_dim(next_token(bytes, pos));
  const std::size_t maxval = parse_dim(next_token(bytes, pos));
  if (maxval > 255) throw IoError("PGM: only 8-bit images are supported");
  ++pos;  // single whitespace byte before the raster
  const std::size_t n = img.width * img.height;
  if (bytes.size() < pos + n) throw IoError("PGM: truncated raster");
  img.pixels.assign(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + n));
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::lround(255.0 * p / static_cast<double>(maxval)));
  }
  return img;
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_pgm(bytes);
}

std::string encode_pgm(const GrayImage& image, const std::vector<std::string>& comments) {
  std::ostringstream os;
  os << "P5\n";
  for (const auto& c : comments) {
    std::string line = c;
    std::replace(line.begin(), line.end(), '\n', ' ');
    os << "# " << line << '\n';
  }
  os << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  return os.str();
}

void write_pgm(const std::string& path, const GrayImage& image, const std::vector<std::string>& comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const auto bytes = encode_pgm(image, comments);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace topoconv
