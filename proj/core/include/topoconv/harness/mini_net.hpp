#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "topoconv/conform_conv.hpp"
#include "topoconv/ops.hpp"

namespace topoconv::harness {

enum class BottleneckKind { conv, deform, conform };

std::string to_string(BottleneckKind kind);
BottleneckKind bottleneck_kind_from_string(const std::string& s);

struct NetConfig {
  std::size_t enc1_channels = 8;
  std::size_t enc2_channels = 16;
  BottleneckKind bottleneck = BottleneckKind::conform;
  // Number of bottleneck blocks; the first `special_layers` use `bottleneck`, the rest plain conv.
  std::size_t bottleneck_depth = 1;
  std::size_t special_layers = 1;
  TpgConfig tpg;
  SampleSource sample_source = SampleSource::input;
  bool zero_init_head = false;

  void validate() const;
};

/// Conv + batch norm + ReLU with its own parameters.
struct ConvBlock {
  ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kernel = 3);
  Var forward(const Var& x, NormMode mode);

  Parameter weight;
  Parameter bias;
  BatchNorm bn;
};

/// Two-level encoder/decoder:
///   enc1 conv(1->c1) @HxW, 2x2 max pool, enc2 conv(c1->c2) @H/2,
///   bottleneck blocks (c2->c2), nearest 2x upsample, concat enc1 skip,
///   dec1 conv(c2+c1->c1), dec2 conv(c1->c1), 1x1 head + sigmoid.
///
/// Every bottleneck block owns a ConformLayer; a conv block simply ignores
/// its offset branch. Weight initialization draws the same random numbers for
/// every bottleneck kind, so networks that differ only in kind start from the
/// same function.
class MiniNet {
 public:
  MiniNet(NetConfig cfg, std::uint64_t seed);

  MiniNet(const MiniNet&) = delete;
  MiniNet& operator=(const MiniNet&) = delete;
  MiniNet(MiniNet&&) = default;
  MiniNet& operator=(MiniNet&&) = default;

  const NetConfig& config() const noexcept { return cfg_; }

  // images [N,1,H,W], H and W even -> probabilities [N,1,H,W].
  Var forward(Tape& tape, const Tensor& images, NormMode mode);
  Tensor predict(const Tensor& images);

  std::vector<NamedParameter> parameters();
  std::vector<BatchNorm*> norms();
  std::vector<ConformLayer*> bottleneck_layers();

 private:
  BottleneckKind block_kind(std::size_t i) const;

  NetConfig cfg_;
  std::unique_ptr<ConvBlock> enc1_, enc2_, dec1_, dec2_;
  std::vector<std::unique_ptr<ConformLayer>> bottleneck_;
  Parameter head_weight_;
  Parameter head_bias_;
};

}  // namespace topoconv::harness
