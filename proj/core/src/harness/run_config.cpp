#include "topoconv/harness/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "topoconv/errors.hpp"

namespace topoconv::harness {

void TrainConfig::validate() const {
  if (epochs == 0) throw ValidationError("train.epochs must be positive");
  if (batch_size == 0) throw ValidationError("train.batch_size must be positive");
  if (!(adam.learning_rate >= 0.0)) throw ValidationError("train.learning_rate must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ValidationError("train.adam_beta1/adam_beta2 must lie in [0,1)");
  }
  if (!(adam.eps > 0.0)) throw ValidationError("train.adam_eps must be positive");
  if (data.height < 16 || data.width < 16 || data.height % 2 || data.width % 2) {
    throw ValidationError("data.height/width must be even and >= 16");
  }
  if (data.n_train == 0) throw ValidationError("data.n_train must be positive");
  if (!(data.noise_sigma >= 0.0)) throw ValidationError("data.noise_sigma must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("eval.threshold must lie in (0,1)");
  net.validate();
}

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: bad value for '" + where + "." + key + "'");
  }
}

const char* pool_name(PoolMode m) { return m == PoolMode::max ? "max" : "mean"; }
const char* source_name(SampleSource s) { return s == SampleSource::input ? "input" : "posterior"; }

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig rc;
  TrainConfig& t = rc.train;
  reject_unknown(j, "", {"seed", "train", "net", "tpg", "data", "eval", "ablation"});
  read(j, "seed", t.seed, "");

  if (j.contains("train")) {
    const auto& s = j["train"];
    reject_unknown(s, "train", {"epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps"});
    read(s, "epochs", t.epochs, "train");
    read(s, "batch_size", t.batch_size, "train");
    read(s, "learning_rate", t.adam.learning_rate, "train");
    read(s, "adam_beta1", t.adam.beta1, "train");
    read(s, "adam_beta2", t.adam.beta2, "train");
    read(s, "adam_eps", t.adam.eps, "train");
  }

  bool special_given = false;
  if (j.contains("net")) {
    const auto& s = j["net"];
    reject_unknown(s, "net", {"enc1_channels", "enc2_channels", "bottleneck", "bottleneck_depth", "special_layers",
                              "sample_source", "zero_init_head"});
    read(s, "enc1_channels", t.net.enc1_channels, "net");
    read(s, "enc2_channels", t.net.enc2_channels, "net");
    std::string kind = to_string(t.net.bottleneck);
    read(s, "bottleneck", kind, "net");
    t.net.bottleneck = bottleneck_kind_from_string(kind);
    read(s, "bottleneck_depth", t.net.bottleneck_depth, "net");
    special_given = s.contains("special_layers");
    read(s, "special_layers", t.net.special_layers, "net");
    std::string source = source_name(t.net.sample_source);
    read(s, "sample_source", source, "net");
    if (source != "input" && source != "posterior") throw ValidationError("config: net.sample_source must be input|posterior");
    t.net.sample_source = source == "input" ? SampleSource::input : SampleSource::posterior;
    read(s, "zero_init_head", t.net.zero_init_head, "net");
  }
  if (!special_given) t.net.special_layers = t.net.bottleneck_depth;

  if (j.contains("tpg")) {
    const auto& s = j["tpg"];
    reject_unknown(s, "tpg", {"tau0", "pool_mode", "gaussian_sigma", "connectivity", "use_filtering", "use_dilation",
                              "use_aggregation"});
    auto& g = t.net.tpg;
    read(s, "tau0", g.tau0, "tpg");
    std::string pool = pool_name(g.pool_mode);
    read(s, "pool_mode", pool, "tpg");
    if (pool != "max" && pool != "mean") throw ValidationError("config: tpg.pool_mode must be max|mean");
    g.pool_mode = pool == "max" ? PoolMode::max : PoolMode::mean;
    read(s, "gaussian_sigma", g.gaussian_sigma, "tpg");
    int conn = static_cast<int>(g.connectivity);
    read(s, "connectivity", conn, "tpg");
    if (conn != 4 && conn != 8) throw ValidationError("config: tpg.connectivity must be 4 or 8");
    g.connectivity = static_cast<Connectivity>(conn);
    read(s, "use_filtering", g.use_filtering, "tpg");
    read(s, "use_dilation", g.use_dilation, "tpg");
    read(s, "use_aggregation", g.use_aggregation, "tpg");
  }

  if (j.contains("data")) {
    const auto& s = j["data"];
    reject_unknown(s, "data", {"kind", "height", "width", "n_train", "n_test", "noise_sigma"});
    std::string kind = to_string(t.data.kind);
    read(s, "kind", kind, "data");
    t.data.kind = kind_mix_from_string(kind);
    read(s, "height", t.data.height, "data");
    read(s, "width", t.data.width, "data");
    read(s, "n_train", t.data.n_train, "data");
    read(s, "n_test", t.data.n_test, "data");
    read(s, "noise_sigma", t.data.noise_sigma, "data");
  }

  if (j.contains("eval")) {
    reject_unknown(j["eval"], "eval", {"threshold"});
    read(j["eval"], "threshold", t.threshold, "eval");
  }

  if (j.contains("ablation")) {
    reject_unknown(j["ablation"], "ablation", {"seeds"});
    read(j["ablation"], "seeds", rc.ablation_seeds, "ablation");
    if (rc.ablation_seeds.empty()) throw ValidationError("config: ablation.seeds must not be empty");
  }

  t.validate();
  return rc;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  const TrainConfig& t = train;
  return json{{"seed", t.seed},
              {"train",
               {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.adam.learning_rate},
                {"adam_beta1", t.adam.beta1},
                {"adam_beta2", t.adam.beta2},
                {"adam_eps", t.adam.eps}}},
              {"net",
               {{"enc1_channels", t.net.enc1_channels},
                {"enc2_channels", t.net.enc2_channels},
                {"bottleneck", to_string(t.net.bottleneck)},
                {"bottleneck_depth", t.net.bottleneck_depth},
                {"special_layers", t.net.special_layers},
                {"sample_source", source_name(t.net.sample_source)},
                {"zero_init_head", t.net.zero_init_head}}},
              {"tpg",
               {{"tau0", t.net.tpg.tau0},
                {"pool_mode", pool_name(t.net.tpg.pool_mode)},
                {"gaussian_sigma", t.net.tpg.gaussian_sigma},
                {"connectivity", static_cast<int>(t.net.tpg.connectivity)},
                {"use_filtering", t.net.tpg.use_filtering},
                {"use_dilation", t.net.tpg.use_dilation},
                {"use_aggregation", t.net.tpg.use_aggregation}}},
              {"data",
               {{"kind", to_string(t.data.kind)},
                {"height", t.data.height},
                {"width", t.data.width},
                {"n_train", t.data.n_train},
                {"n_test", t.data.n_test},
                {"noise_sigma", t.data.noise_sigma}}},
              {"eval", {{"threshold", t.threshold}}},
              {"ablation", {{"seeds", ablation_seeds}}}};
}

}  // namespace topoconv::harness
