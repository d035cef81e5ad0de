// topoconv command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation or
// assertion failure.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "topoconv/cubical_ph.hpp"
#include "topoconv/errors.hpp"
#include "topoconv/gradcheck_suite.hpp"
#include "topoconv/harness/ablation.hpp"
#include "topoconv/harness/checkpoint.hpp"
#include "topoconv/harness/run_config.hpp"
#include "topoconv/harness/synth_data.hpp"
#include "topoconv/harness/trainer.hpp"
#include "topoconv/metrics.hpp"
#include "topoconv/pgm.hpp"
#include "topoconv/tpg.hpp"
#include "topoconv/version.hpp"

namespace {

using namespace topoconv;
using nlohmann::json;

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kValidation = 3 };

json provenance(const std::string& command, const json& config) {
  return {{"tool", "topoconv"}, {"version", std::string(kVersion)}, {"command", command}, {"config", config}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

harness::RunConfig load_config(const std::string& path) {
  return path.empty() ? harness::RunConfig::from_json(json::object()) : harness::RunConfig::load(path);
}

std::vector<std::string> pgm_comments(const json& meta) { return {"topoconv " + std::string(kVersion), meta.dump()}; }

struct PhArgs {
  std::string image, out;
  double tau0 = 0.0;
  int connectivity = 4;
};

int run_ph(const PhArgs& a) {
  if (a.tau0 < 0) throw ValidationError("--tau0 must be non-negative");
  const auto img = read_pgm(a.image);
  const auto t = img.to_unit_tensor();
  const ScalarMap map(img.height, img.width, {t.data().begin(), t.data().end()});
  const auto conn = a.connectivity == 8 ? Connectivity::eight : Connectivity::four;
  const auto pd = compute_ph0(map, conn);
  const auto kept = filter_generators(pd, pairs_to_generators(pd), a.tau0);

  PersistenceDiagram out;
  for (const auto& p : pd.pairs) {
    if (p.essential || p.persistence() > a.tau0) out.pairs.push_back(p);
  }
  write_text(a.out, to_csv(out));
  json cfg{{"image", a.image}, {"tau0", a.tau0}, {"connectivity", a.connectivity}};
  json meta = provenance("ph", cfg);
  meta["pairs_total"] = pd.pairs.size();
  meta["pairs_written"] = out.pairs.size();
  meta["generators_kept"] = kept.entries.size();
  write_json(a.out + ".meta.json", meta);
  return kOk;
}

struct PriorArgs {
  std::string image, config, out, dilated;
};

int run_prior(const PriorArgs& a) {
  const auto cfg = load_config(a.config);
  const auto& tpg = cfg.train.net.tpg;
  tpg.validate();
  const auto img = read_pgm(a.image);
  const auto phi = img.to_unit_tensor().reshaped(Shape{1, 1, img.height, img.width});
  const auto maps = compute_prior(phi, tpg);
  const auto comments = pgm_comments(provenance("prior", {{"image", a.image}, {"run", cfg.to_json()}}));
  write_pgm(a.out, GrayImage::from_unit(img.height, img.width, maps.prior.data()), comments);
  if (!a.dilated.empty()) {
    write_pgm(a.dilated, GrayImage::from_unit(img.height, img.width, maps.dilated.data()), comments);
  }
  return kOk;
}

struct MetricsArgs {
  std::string pred, gt, out;
  double threshold = 0.5;
};

int run_metrics(const MetricsArgs& a) {
  const auto gt_img = read_pgm(a.gt);
  const auto gt = gt_img.to_mask();
  Tensor prob;
  if (std::filesystem::path(a.pred).extension() == ".tnsr") {
    prob = load_tnsr(a.pred);
  } else {
    prob = read_pgm(a.pred).to_unit_tensor();
  }
  if (prob.size() != gt.height() * gt.width()) {
    throw ValidationError("prediction has " + std::to_string(prob.size()) + " values, ground truth " +
                          std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  const auto report = evaluate_pair(prob.data(), gt, a.threshold);
  json j = provenance("metrics", {{"pred", a.pred}, {"gt", a.gt}, {"threshold", a.threshold}});
  j["report"] = report.to_json();
  write_json(a.out, j);
  return kOk;
}

struct GenArgs {
  std::size_t n = 0, height = 32, width = 32;
  std::string kind = "mix", out;
  std::uint64_t seed = 0;
  double noise = 0.1;
};

int run_gen_data(const GenArgs& a) {
  const auto mix = harness::kind_mix_from_string(a.kind);
  if (a.n == 0) throw ValidationError("--n must be positive");
  if (a.noise < 0) throw ValidationError("--noise must be non-negative");
  const auto samples = harness::generate_dataset(a.n, mix, a.height, a.width, a.noise, a.seed);
  json cfg{{"n", a.n}, {"kind", a.kind}, {"seed", a.seed}, {"height", a.height}, {"width", a.width}, {"noise", a.noise}};
  harness::save_dataset(a.out, samples, provenance("gen-data", cfg));
  return kOk;
}

struct TrainArgs {
  std::string config, data, out;
};

int run_train(const TrainArgs& a) {
  const auto cfg = load_config(a.config);
  const auto samples = harness::load_dataset(a.data);
  if (samples.empty()) throw ValidationError("dataset " + a.data + " is empty");
  auto result = harness::train(cfg.train, samples);
  spdlog::info("trained {} epochs, loss {:.6f} -> {:.6f}", result.epoch_loss.size(), result.epoch_loss.front(),
               result.epoch_loss.back());
  harness::save_checkpoint(a.out, result.net, cfg, result.epoch_loss);
  return kOk;
}

struct EvalArgs {
  std::string ckpt, data, out;
};

int run_eval(const EvalArgs& a) {
  auto ckpt = harness::load_checkpoint(a.ckpt);
  const auto samples = harness::load_dataset(a.data);
  if (samples.empty()) throw ValidationError("dataset " + a.data + " is empty");
  const auto result = harness::evaluate(ckpt.net, samples, ckpt.config.train.threshold);
  json j = provenance("eval", ckpt.config.to_json());
  j["checkpoint"] = a.ckpt;
  j["data"] = a.data;
  j["result"] = harness::to_json(result);
  write_json(a.out, j);
  return kOk;
}

struct AblateArgs {
  std::string config, out, groups = "both";
};

int run_ablate(const AblateArgs& a) {
  const auto cfg = load_config(a.config);
  auto groups = harness::AblationGroups::both;
  if (a.groups == "components") groups = harness::AblationGroups::components;
  if (a.groups == "layers") groups = harness::AblationGroups::conform_layers;
  const auto table = harness::ablation_suite(cfg, groups);
  json j = provenance("ablate", cfg.to_json());
  j["groups"] = a.groups;
  j["table"] = table.to_json();
  write_json(a.out, j);
  return kOk;
}

struct GradcheckArgs {
  std::uint64_t seed = 7;
  std::string out;
};

int run_gradcheck(const GradcheckArgs& a) {
  const auto cases = run_gradcheck_suite(a.seed);
  bool ok = true;
  json rows = json::array();
  for (const auto& c : cases) {
    ok = ok && c.report.passed;
    std::printf("%-4s %-18s max_rel_error=%.3e tolerance=%.0e\n", c.report.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.report.max_rel_error, c.report.tolerance);
    json params = json::array();
    for (const auto& e : c.report.entries) {
      params.push_back({{"name", e.name}, {"max_abs_error", e.max_abs_error}, {"rel_error", e.rel_error}});
    }
    rows.push_back({{"name", c.name},
                    {"passed", c.report.passed},
                    {"max_rel_error", c.report.max_rel_error},
                    {"tolerance", c.report.tolerance},
                    {"parameters", params}});
  }
  if (!a.out.empty()) {
    json j = provenance("gradcheck", {{"seed", a.seed}});
    j["passed"] = ok;
    j["checks"] = rows;
    write_json(a.out, j);
  }
  return ok ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topology-aware conformable convolution toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging to stderr");

  PhArgs ph;
  auto* ph_cmd = app.add_subcommand("ph", "0-dim persistence diagram of a PGM image");
  ph_cmd->add_option("image", ph.image, "Input PGM")->required();
  ph_cmd->add_option("--tau0", ph.tau0, "Keep non-essential pairs with persistence > tau0");
  ph_cmd->add_option("--connectivity", ph.connectivity, "Pixel adjacency")->check(CLI::IsMember({4, 8}));
  ph_cmd->add_option("--out", ph.out, "Output CSV")->required();

  PriorArgs prior;
  auto* prior_cmd = app.add_subcommand("prior", "Topological prior and dilated prior of a PGM image");
  prior_cmd->add_option("image", prior.image, "Input PGM")->required();
  prior_cmd->add_option("--config", prior.config, "Run config JSON (tpg section is used)");
  prior_cmd->add_option("--out", prior.out, "Binary prior PGM")->required();
  prior_cmd->add_option("--dilated", prior.dilated, "Dilated prior PGM");

  MetricsArgs metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "Segmentation and topology metrics for one prediction");
  metrics_cmd->add_option("pred", metrics.pred, "Prediction PGM or probability TNSR")->required();
  metrics_cmd->add_option("gt", metrics.gt, "Ground-truth mask PGM")->required();
  metrics_cmd->add_option("--threshold", metrics.threshold, "Binarization threshold");
  metrics_cmd->add_option("--out", metrics.out, "Output JSON")->required();

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--n", gen.n, "Number of samples")->required();
  gen_cmd->add_option("--kind", gen.kind, "ring|curve|blobs|ring+curve|mix");
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed");
  gen_cmd->add_option("--height", gen.height, "Image height (>= 16)");
  gen_cmd->add_option("--width", gen.width, "Image width (>= 16)");
  gen_cmd->add_option("--noise", gen.noise, "Gaussian noise sigma");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a MiniNet on a dataset directory");
  train_cmd->add_option("--config", train.config, "Run config JSON");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint directory")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset directory");
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--out", eval.out, "Output JSON")->required();

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Component and conform-layer ablations");
  ablate_cmd->add_option("--config", ablate.config, "Run config JSON");
  ablate_cmd->add_option("--groups", ablate.groups, "components|layers|both")
      ->check(CLI::IsMember({"components", "layers", "both"}));
  ablate_cmd->add_option("--out", ablate.out, "Output JSON")->required();

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc_cmd->add_option("--seed", gc.seed, "Sampling seed");
  gc_cmd->add_option("--out", gc.out, "Optional JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("topoconv"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*ph_cmd) return run_ph(ph);
    if (*prior_cmd) return run_prior(prior);
    if (*metrics_cmd) return run_metrics(metrics);
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*ablate_cmd) return run_ablate(ablate);
    if (*gc_cmd) return run_gradcheck(gc);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kUsage;
}
