#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topoconv/metrics.hpp"
#include "topoconv/tensor.hpp"

namespace topoconv::harness {

enum class StructureKind { ring, curve, blobs };

// Which structure kinds a dataset cycles through, by sample index.
enum class KindMix { ring, curve, blobs, ring_curve, mix };

std::string to_string(StructureKind kind);
StructureKind structure_kind_from_string(const std::string& s);
std::string to_string(KindMix mix);
KindMix kind_mix_from_string(const std::string& s);

struct SynthSample {
  Tensor image;  // [1,H,W] in [0,1]
  BinaryMask mask;
  StructureKind kind = StructureKind::ring;
  std::uint64_t seed = 0;
};

/// One noisy sample. The mask is the exact drawn support; the image is
/// 0.1 + 0.7 * mask plus N(0, noise_sigma) noise, clamped to [0,1].
///  - ring:  one annulus fully inside the frame, (b0, b1) = (1, 1)
///  - curve: one or two smooth random-walk paths, 1 or 2 px wide
///  - blobs: 1..3 filled ellipses at least 2 px apart, b0 = count, b1 = 0
SynthSample generate_sample(StructureKind kind, std::size_t height, std::size_t width, double noise_sigma,
                            std::uint64_t seed);

/// Deterministic in (n, mix, height, width, noise_sigma, seed). height and width must be >= 16.
std::vector<SynthSample> generate_dataset(std::size_t n, KindMix mix, std::size_t height, std::size_t width,
                                          double noise_sigma, std::uint64_t seed);

/// Stacks the images (or masks) of the selected samples into [k,1,H,W].
Tensor stack_images(const std::vector<SynthSample>& samples, const std::vector<std::size_t>& indices);
Tensor stack_masks(const std::vector<SynthSample>& samples, const std::vector<std::size_t>& indices);

// img_%04d.pgm / msk_%04d.pgm plus index.json. Images are stored 8-bit. `meta`
// is merged into index.json and written, with the version, as PGM comments.
void save_dataset(const std::string& dir, const std::vector<SynthSample>& samples, const nlohmann::json& meta);
std::vector<SynthSample> load_dataset(const std::string& dir);

}  // namespace topoconv::harness
