#include "topoconv/harness/checkpoint.hpp"

#include <filesystem>
#include <map>
#include <fstream>
#include <sstream>

#include "topoconv/errors.hpp"
#include "topoconv/version.hpp"

namespace topoconv::harness {

namespace {

struct Entry {
  std::string name;
  Tensor* tensor;
};

// Running statistics live in std::vectors; they round-trip through scratch tensors.
struct NormBuffers {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;
};

NormBuffers norm_buffers(MiniNet& net) {
  NormBuffers b;
  const auto norms = net.norms();
  for (std::size_t i = 0; i < norms.size(); ++i) {
    const auto& bn = *norms[i];
    const Shape s{bn.running_mean.size()};
    b.names.push_back("bn" + std::to_string(i) + ".running_mean");
    b.tensors.emplace_back(s, bn.running_mean);
    b.names.push_back("bn" + std::to_string(i) + ".running_var");
    b.tensors.emplace_back(s, bn.running_var);
  }
  return b;
}

}  // namespace

void save_checkpoint(const std::string& dir, MiniNet& net, const RunConfig& config,
                     const std::vector<double>& loss_curve) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

  std::vector<Entry> entries;
  for (auto& p : net.parameters()) entries.push_back({p.name, &p.param->value});
  auto buffers = norm_buffers(net);
  for (std::size_t i = 0; i < buffers.names.size(); ++i) entries.push_back({buffers.names[i], &buffers.tensors[i]});

  std::ostringstream blob;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : entries) {
    const auto offset = static_cast<std::size_t>(blob.tellp());
    write_tnsr(blob, *e.tensor);
    tensors.push_back({{"name", e.name},
                       {"shape", e.tensor->shape()},
                       {"offset", offset},
                       {"bytes", static_cast<std::size_t>(blob.tellp()) - offset}});
  }
  std::vector<bool> has_stats;
  for (auto* bn : net.norms()) has_stats.push_back(bn->has_batch_stats);

  nlohmann::json manifest{{"format", "topoconv-checkpoint"},
                          {"version", std::string(kVersion)},
                          {"seed", config.train.seed},
                          {"config", config.to_json()},
                          {"tensors", std::move(tensors)},
                          {"bn_has_batch_stats", has_stats},
                          {"loss_curve", loss_curve}};

  std::ofstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  const auto bytes = blob.str();
  bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  std::ofstream man(fs::path(dir) / "manifest.json");
  man << manifest.dump(2) << '\n';
  if (!bin || !man) throw IoError("failed writing checkpoint to " + dir);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream man(fs::path(dir) / "manifest.json");
  if (!man) throw IoError("no manifest.json in " + dir);
  nlohmann::json manifest;
  try {
    man >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest.json: ") + e.what());
  }
  if (manifest.value("format", "") != "topoconv-checkpoint") throw IoError(dir + " is not a topoconv checkpoint");

  RunConfig config = RunConfig::from_json(manifest.at("config"));
  MiniNet net(config.train.net, config.train.seed);

  std::ifstream bin(fs::path(dir) / "params.bin", std::ios::binary);
  if (!bin) throw IoError("no params.bin in " + dir);
  std::stringstream raw;
  raw << bin.rdbuf();
  const std::string bytes = raw.str();

  std::map<std::string, Tensor> stored;
  for (const auto& t : manifest.at("tensors")) {
    const auto offset = t.at("offset").get<std::size_t>();
    if (offset > bytes.size()) throw IoError("params.bin: offset past end of file");
    std::istringstream in(bytes.substr(offset, t.at("bytes").get<std::size_t>()));
    stored.emplace(t.at("name").get<std::string>(), read_tnsr(in));
  }
  auto take = [&](const std::string& name, const Shape& shape) -> Tensor {
    auto it = stored.find(name);
    if (it == stored.end()) throw IoError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != shape) throw IoError("checkpoint tensor '" + name + "' has the wrong shape");
    return it->second;
  };

  for (auto& p : net.parameters()) p.param->value = take(p.name, p.param->value.shape());
  const auto norms = net.norms();
  const auto has_stats = manifest.at("bn_has_batch_stats").get<std::vector<bool>>();
  for (std::size_t i = 0; i < norms.size(); ++i) {
    auto& bn = *norms[i];
    const Shape s{bn.running_mean.size()};
    bn.running_mean = take("bn" + std::to_string(i) + ".running_mean", s).storage();
    bn.running_var = take("bn" + std::to_string(i) + ".running_var", s).storage();
    bn.has_batch_stats = i < has_stats.size() && has_stats[i];
  }
  return LoadedCheckpoint{std::move(net), std::move(config), std::move(manifest)};
}

}  // namespace topoconv::harness
