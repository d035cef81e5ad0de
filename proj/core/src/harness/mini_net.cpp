#include "topoconv/harness/mini_net.hpp"

#include <cmath>
#include <random>

#include "topoconv/errors.hpp"

namespace topoconv::harness {

std::string to_string(BottleneckKind kind) {
  switch (kind) {
    case BottleneckKind::conv:
      return "conv";
    case BottleneckKind::deform:
      return "deform";
    case BottleneckKind::conform:
      return "conform";
  }
  return "?";
}

BottleneckKind bottleneck_kind_from_string(const std::string& s) {
  if (s == "conv") return BottleneckKind::conv;
  if (s == "deform") return BottleneckKind::deform;
  if (s == "conform") return BottleneckKind::conform;
  throw ValidationError("unknown bottleneck '" + s + "' (expected conv|deform|conform)");
}

void NetConfig::validate() const {
  if (enc1_channels == 0 || enc2_channels == 0) throw ValidationError("net: channel widths must be positive");
  if (bottleneck_depth == 0) throw ValidationError("net: bottleneck_depth must be >= 1");
  if (special_layers > bottleneck_depth) throw ValidationError("net: special_layers exceeds bottleneck_depth");
  tpg.validate();
}

namespace {

// He-uniform: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
void he_uniform(Parameter& p, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p.value.data()) v = dist(rng);
}

}  // namespace

ConvBlock::ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kernel)
    : weight(Tensor(Shape{out_channels, in_channels, kernel, kernel})),
      bias(Tensor(Shape{out_channels})),
      bn(out_channels) {}

Var ConvBlock::forward(const Var& x, NormMode mode) {
  Tape& tape = *x.tape();
  const int pad = static_cast<int>((weight.value.dim(2) - 1) / 2);
  return relu(batch_norm(conv2d(x, tape.param(weight), tape.param(bias), pad), bn, mode));
}

MiniNet::MiniNet(NetConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      head_weight_(Tensor(Shape{1, cfg_.enc1_channels, 1, 1})),
      head_bias_(Tensor(Shape{1})) {
  cfg_.validate();
  const std::size_t c1 = cfg_.enc1_channels, c2 = cfg_.enc2_channels;
  enc1_ = std::make_unique<ConvBlock>(1, c1);
  enc2_ = std::make_unique<ConvBlock>(c1, c2);
  for (std::size_t i = 0; i < cfg_.bottleneck_depth; ++i) {
    bottleneck_.push_back(std::make_unique<ConformLayer>(c2, c2, cfg_.tpg, cfg_.sample_source));
  }
  dec1_ = std::make_unique<ConvBlock>(c2 + c1, c1);
  dec2_ = std::make_unique<ConvBlock>(c1, c1);

  std::mt19937_64 rng(seed);
  he_uniform(enc1_->weight, 1 * 9, rng);
  he_uniform(enc2_->weight, c1 * 9, rng);
  for (auto& layer : bottleneck_) he_uniform(layer->weight, c2 * 9, rng);
  he_uniform(dec1_->weight, (c2 + c1) * 9, rng);
  he_uniform(dec2_->weight, c1 * 9, rng);
  if (!cfg_.zero_init_head) he_uniform(head_weight_, c1, rng);
}

BottleneckKind MiniNet::block_kind(std::size_t i) const {
  return i < cfg_.special_layers ? cfg_.bottleneck : BottleneckKind::conv;
}

Var MiniNet::forward(Tape& tape, const Tensor& images, NormMode mode) {
  if (images.rank() != 4 || images.dim(1) != 1) {
    throw ShapeError("MiniNet: expected [N,1,H,W] images, got " + shape_to_string(images.shape()));
  }
  Var x = tape.constant(images);
  Var e1 = enc1_->forward(x, mode);
  Var h = enc2_->forward(max_pool2(e1), mode);
  for (std::size_t i = 0; i < bottleneck_.size(); ++i) {
    ConformLayer& layer = *bottleneck_[i];
    switch (block_kind(i)) {
      case BottleneckKind::conv:
        h = relu(batch_norm(conv2d(h, tape.param(layer.weight), tape.param(layer.bias), 1), layer.bn, mode));
        break;
      case BottleneckKind::deform:
        h = deformable_forward(layer, h, mode);
        break;
      case BottleneckKind::conform:
        h = conformable_forward(layer, h, mode);
        break;
    }
  }
  Var d = concat_channels(upsample_nearest2(h), e1);
  d = dec2_->forward(dec1_->forward(d, mode), mode);
  return sigmoid(conv2d(d, tape.param(head_weight_), tape.param(head_bias_), 0));
}

Tensor MiniNet::predict(const Tensor& images) {
  Tape tape;
  return forward(tape, images, NormMode::eval).value();
}

std::vector<NamedParameter> MiniNet::parameters() {
  std::vector<NamedParameter> out;
  auto add_block = [&](const std::string& name, ConvBlock& b) {
    out.push_back({name + ".weight", &b.weight});
    out.push_back({name + ".bias", &b.bias});
    out.push_back({name + ".bn_gamma", &b.bn.gamma});
    out.push_back({name + ".bn_beta", &b.bn.beta});
  };
  add_block("enc1", *enc1_);
  add_block("enc2", *enc2_);
  for (std::size_t i = 0; i < bottleneck_.size(); ++i) {
    auto params = bottleneck_[i]->parameters("bottleneck" + std::to_string(i) + ".");
    out.insert(out.end(), params.begin(), params.end());
  }
  add_block("dec1", *dec1_);
  add_block("dec2", *dec2_);
  out.push_back({"head.weight", &head_weight_});
  out.push_back({"head.bias", &head_bias_});
  return out;
}

std::vector<BatchNorm*> MiniNet::norms() {
  std::vector<BatchNorm*> out{&enc1_->bn, &enc2_->bn};
  for (auto& layer : bottleneck_) out.push_back(&layer->bn);
  out.push_back(&dec1_->bn);
  out.push_back(&dec2_->bn);
  return out;
}

std::vector<ConformLayer*> MiniNet::bottleneck_layers() {
  std::vector<ConformLayer*> out;
  for (auto& layer : bottleneck_) out.push_back(layer.get());
  return out;
}

}  // namespace topoconv::harness
