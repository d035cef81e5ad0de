#include "topoconv/harness/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "topoconv/errors.hpp"
#include "topoconv/pgm.hpp"
#include "topoconv/version.hpp"

namespace topoconv::harness {

std::string to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::ring:
      return "ring";
    case StructureKind::curve:
      return "curve";
    case StructureKind::blobs:
      return "blobs";
  }
  return "?";
}

StructureKind structure_kind_from_string(const std::string& s) {
  if (s == "ring") return StructureKind::ring;
  if (s == "curve") return StructureKind::curve;
  if (s == "blobs") return StructureKind::blobs;
  throw ValidationError("unknown structure kind '" + s + "'");
}

std::string to_string(KindMix mix) {
  switch (mix) {
    case KindMix::ring:
      return "ring";
    case KindMix::curve:
      return "curve";
    case KindMix::blobs:
      return "blobs";
    case KindMix::ring_curve:
      return "ring+curve";
    case KindMix::mix:
      return "mix";
  }
  return "?";
}

KindMix kind_mix_from_string(const std::string& s) {
  if (s == "ring") return KindMix::ring;
  if (s == "curve") return KindMix::curve;
  if (s == "blobs") return KindMix::blobs;
  if (s == "ring+curve") return KindMix::ring_curve;
  if (s == "mix") return KindMix::mix;
  throw ValidationError("unknown dataset kind '" + s + "' (expected ring|curve|blobs|ring+curve|mix)");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void draw_ring(BinaryMask& mask, std::mt19937_64& rng) {
  const double h = static_cast<double>(mask.height()), w = static_cast<double>(mask.width());
  const double max_r = std::min(h, w) / 2.0 - 2.0;
  const double r_out = uniform(rng, std::min(6.0, max_r), max_r);
  const double thickness = uniform(rng, 2.0, 3.5);
  const double r_in = std::max(2.0, r_out - thickness);
  const double cy = uniform(rng, r_out + 1.0, h - 2.0 - r_out);
  const double cx = uniform(rng, r_out + 1.0, w - 2.0 - r_out);
  for (std::size_t y = 0; y < mask.height(); ++y)
    for (std::size_t x = 0; x < mask.width(); ++x) {
      const double d = std::hypot(static_cast<double>(y) - cy, static_cast<double>(x) - cx);
      if (d >= r_in && d <= r_out) mask.set(y, x, true);
    }
}

void stamp(BinaryMask& mask, long y, long x, int brush) {
  for (long dy = 0; dy < brush; ++dy)
    for (long dx = 0; dx < brush; ++dx) {
      const long py = y + dy, px = x + dx;
      if (py >= 0 && px >= 0 && py < static_cast<long>(mask.height()) && px < static_cast<long>(mask.width())) {
        mask.set(static_cast<std::size_t>(py), static_cast<std::size_t>(px), true);
      }
    }
}

void draw_curve(BinaryMask& mask, std::mt19937_64& rng) {
  const double h = static_cast<double>(mask.height()), w = static_cast<double>(mask.width());
  const int paths = uniform_int(rng, 1, 2);
  for (int k = 0; k < paths; ++k) {
    const int brush = uniform_int(rng, 1, 2);
    double y = uniform(rng, 3.0, h - 4.0), x = uniform(rng, 3.0, w - 4.0);
    double heading = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const int steps = uniform_int(rng, static_cast<int>(0.6 * h), static_cast<int>(1.2 * h));
    std::normal_distribution<double> turn(0.0, 0.25);
    long cy = std::lround(y), cx = std::lround(x);
    stamp(mask, cy, cx, brush);
    for (int s = 0; s < steps; ++s) {
      heading += turn(rng);
      const double ny = y + std::sin(heading), nx = x + std::cos(heading);
      if (ny < 1.0 || nx < 1.0 || ny > h - 3.0 || nx > w - 3.0) {
        heading += std::numbers::pi;  // turn back at the frame
        continue;
      }
      y = ny;
      x = nx;
      const long ty = std::lround(y), tx = std::lround(x);
      // 4-connected steps so a 1 px path is one 4-component.
      while (cx != tx) {
        cx += tx > cx ? 1 : -1;
        stamp(mask, cy, cx, brush);
      }
      while (cy != ty) {
        cy += ty > cy ? 1 : -1;
        stamp(mask, cy, cx, brush);
      }
    }
  }
}

void draw_blobs(BinaryMask& mask, std::mt19937_64& rng) {
  const long h = static_cast<long>(mask.height()), w = static_cast<long>(mask.width());
  const int wanted = uniform_int(rng, 1, 3);
  // Keep-out map: blob pixels dilated by 2 so distinct blobs never touch.
  BinaryMask reserved(mask.height(), mask.width());
  int placed = 0;
  for (int attempt = 0; attempt < 200 && placed < wanted; ++attempt) {
    const double a = uniform(rng, 2.0, std::min(h, w) / 5.0), b = uniform(rng, 2.0, std::min(h, w) / 5.0);
    const double theta = uniform(rng, 0.0, std::numbers::pi);
    const double r = std::max(a, b);
    const double cy = uniform(rng, r + 1.0, static_cast<double>(h) - r - 2.0);
    const double cx = uniform(rng, r + 1.0, static_cast<double>(w) - r - 2.0);
    const double ct = std::cos(theta), st = std::sin(theta);
    std::vector<std::pair<long, long>> pixels;
    bool clash = false;
    for (long y = 0; y < h && !clash; ++y)
      for (long x = 0; x < w; ++x) {
        const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
        const double u = (dx * ct + dy * st) / a, v = (-dx * st + dy * ct) / b;
        if (u * u + v * v > 1.0) continue;
        if (reserved.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x))) {
          clash = true;
          break;
        }
        pixels.emplace_back(y, x);
      }
    if (clash || pixels.empty()) continue;
    for (auto [y, x] : pixels) {
      mask.set(static_cast<std::size_t>(y), static_cast<std::size_t>(x), true);
      for (long dy = -2; dy <= 2; ++dy)
        for (long dx = -2; dx <= 2; ++dx) {
          const long ry = y + dy, rx = x + dx;
          if (ry >= 0 && rx >= 0 && ry < h && rx < w) reserved.set(static_cast<std::size_t>(ry), static_cast<std::size_t>(rx), true);
        }
    }
    ++placed;
  }
}

}  // namespace

SynthSample generate_sample(StructureKind kind, std::size_t height, std::size_t width, double noise_sigma,
                            std::uint64_t seed) {
  if (height < 16 || width < 16) throw ValidationError("synthetic samples need H, W >= 16");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  std::mt19937_64 rng(seed);
  BinaryMask mask(height, width);
  switch (kind) {
    case StructureKind::ring:
      draw_ring(mask, rng);
      break;
    case StructureKind::curve:
      draw_curve(mask, rng);
      break;
    case StructureKind::blobs:
      draw_blobs(mask, rng);
      break;
  }
  Tensor image(Shape{1, height, width});
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double clean = 0.1 + 0.7 * mask.bits()[i];
    image[i] = std::clamp(clean + noise_sigma * noise(rng), 0.0, 1.0);
  }
  return SynthSample{std::move(image), std::move(mask), kind, seed};
}

std::vector<SynthSample> generate_dataset(std::size_t n, KindMix mix, std::size_t height, std::size_t width,
                                          double noise_sigma, std::uint64_t seed) {
  std::vector<SynthSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    StructureKind kind = StructureKind::ring;
    switch (mix) {
      case KindMix::ring:
        kind = StructureKind::ring;
        break;
      case KindMix::curve:
        kind = StructureKind::curve;
        break;
      case KindMix::blobs:
        kind = StructureKind::blobs;
        break;
      case KindMix::ring_curve:
        kind = i % 2 == 0 ? StructureKind::ring : StructureKind::curve;
        break;
      case KindMix::mix:
        kind = static_cast<StructureKind>(i % 3);
        break;
    }
    out.push_back(generate_sample(kind, height, width, noise_sigma, splitmix64(seed * 1000003ULL + i)));
  }
  return out;
}

namespace {

Tensor stack(const std::vector<SynthSample>& samples, const std::vector<std::size_t>& indices, bool masks) {
  if (indices.empty()) throw ValidationError("stack: empty selection");
  const auto& first = samples.at(indices.front());
  const std::size_t h = first.mask.height(), w = first.mask.width();
  Tensor out(Shape{indices.size(), 1, h, w});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = samples.at(indices[k]);
    if (s.mask.height() != h || s.mask.width() != w) throw ShapeError("stack: samples differ in size");
    for (std::size_t p = 0; p < h * w; ++p) out[k * h * w + p] = masks ? s.mask.bits()[p] : s.image[p];
  }
  return out;
}

std::string indexed_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu.pgm", prefix, i);
  return buf;
}

}  // namespace

Tensor stack_images(const std::vector<SynthSample>& samples, const std::vector<std::size_t>& indices) {
  return stack(samples, indices, false);
}

Tensor stack_masks(const std::vector<SynthSample>& samples, const std::vector<std::size_t>& indices) {
  return stack(samples, indices, true);
}

void save_dataset(const std::string& dir, const std::vector<SynthSample>& samples, const nlohmann::json& meta) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  nlohmann::json index = meta;
  const std::vector<std::string> comments{"topoconv " + std::string(kVersion), meta.dump()};
  index["samples"] = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::size_t h = s.mask.height(), w = s.mask.width();
    const auto img_name = indexed_name("img", i), msk_name = indexed_name("msk", i);
    write_pgm((fs::path(dir) / img_name).string(), GrayImage::from_unit(h, w, s.image.data()), comments);
    write_pgm((fs::path(dir) / msk_name).string(), GrayImage::from_mask(s.mask), comments);
    index["samples"].push_back({{"image", img_name}, {"mask", msk_name}, {"kind", to_string(s.kind)}, {"seed", s.seed}});
  }
  std::ofstream out(fs::path(dir) / "index.json");
  if (!out) throw IoError("cannot write index.json in " + dir);
  out << index.dump(2) << '\n';
}

std::vector<SynthSample> load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "index.json");
  if (!in) throw IoError("no index.json in " + dir);
  nlohmann::json index;
  try {
    in >> index;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("index.json: ") + e.what());
  }
  std::vector<SynthSample> out;
  for (const auto& entry : index.at("samples")) {
    const auto img = read_pgm((fs::path(dir) / entry.at("image").get<std::string>()).string());
    const auto msk = read_pgm((fs::path(dir) / entry.at("mask").get<std::string>()).string());
    if (img.height != msk.height || img.width != msk.width) throw IoError("image/mask size mismatch in " + dir);
    SynthSample s;
    s.image = img.to_unit_tensor().reshaped(Shape{1, img.height, img.width});
    s.mask = msk.to_mask();
    s.kind = structure_kind_from_string(entry.value("kind", std::string("ring")));
    s.seed = entry.value("seed", std::uint64_t{0});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace topoconv::harness
