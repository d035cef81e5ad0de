#include "topoconv/harness/ablation.hpp"

#include <spdlog/spdlog.h>

#include "topoconv/errors.hpp"
#include "topoconv/harness/trainer.hpp"

namespace topoconv::harness {

ExperimentResult run_experiment(const TrainConfig& cfg) {
  cfg.validate();
  const auto& d = cfg.data;
  auto all = generate_dataset(d.n_train + d.n_test, d.kind, d.height, d.width, d.noise_sigma, cfg.seed);
  std::vector<SynthSample> test(std::make_move_iterator(all.begin() + static_cast<long>(d.n_train)),
                                std::make_move_iterator(all.end()));
  all.resize(d.n_train);
  if (test.empty()) throw ValidationError("run_experiment: data.n_test must be positive");

  auto trained = train(cfg, all);
  ExperimentResult result;
  result.epoch_loss = std::move(trained.epoch_loss);
  result.test = evaluate(trained.net, test, cfg.threshold).mean;
  for (auto* layer : trained.net.bottleneck_layers()) {
    result.trace.aggregated += layer->trace.aggregated;
    result.trace.blocked += layer->trace.blocked;
  }
  return result;
}

const AblationRow& AblationTable::row(const std::string& group, const std::string& name) const {
  for (const auto& r : rows) {
    if (r.group == group && r.name == name) return r;
  }
  throw std::out_of_range("ablation table has no row " + group + "/" + name);
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      runs.push_back({{"seed", r.seeds[i]},
                      {"metrics", r.runs[i].test.to_json()},
                      {"final_loss", r.runs[i].epoch_loss.empty() ? 0.0 : r.runs[i].epoch_loss.back()},
                      {"tpg_aggregated_calls", r.runs[i].trace.aggregated},
                      {"tpg_blocked_calls", r.runs[i].trace.blocked}});
    }
    out.push_back({{"group", r.group}, {"name", r.name}, {"settings", r.settings}, {"mean", r.mean.to_json()},
                   {"runs", std::move(runs)}});
  }
  return out;
}

namespace {

AblationRow run_row(std::string group, std::string name, const TrainConfig& cfg,
                    const std::vector<std::uint64_t>& seeds) {
  AblationRow row;
  row.group = std::move(group);
  row.name = std::move(name);
  row.seeds = seeds;
  row.settings = {{"bottleneck", to_string(cfg.net.bottleneck)},
                  {"bottleneck_depth", cfg.net.bottleneck_depth},
                  {"special_layers", cfg.net.special_layers},
                  {"use_filtering", cfg.net.tpg.use_filtering},
                  {"use_dilation", cfg.net.tpg.use_dilation},
                  {"use_aggregation", cfg.net.tpg.use_aggregation}};
  std::vector<MetricsReport> reports;
  for (auto seed : seeds) {
    TrainConfig c = cfg;
    c.seed = seed;
    spdlog::info("ablation {}/{} seed {}", row.group, row.name, seed);
    row.runs.push_back(run_experiment(c));
    reports.push_back(row.runs.back().test);
  }
  row.mean = mean_report(reports);
  return row;
}

}  // namespace

AblationTable ablation_suite(const RunConfig& base, AblationGroups groups) {
  AblationTable table;
  const auto& seeds = base.ablation_seeds;
  if (groups != AblationGroups::conform_layers) {
    TrainConfig cfg = base.train;
    cfg.net.bottleneck = BottleneckKind::conform;
    cfg.net.special_layers = cfg.net.bottleneck_depth;
    auto& tpg = cfg.net.tpg;
    tpg.use_filtering = tpg.use_dilation = tpg.use_aggregation = true;
    table.rows.push_back(run_row("components", "all", cfg, seeds));
    auto variant = [&](const char* name, bool TpgConfig::*flag) {
      TrainConfig c = cfg;
      c.net.tpg.*flag = false;
      table.rows.push_back(run_row("components", name, c, seeds));
    };
    variant("no_filtering", &TpgConfig::use_filtering);
    variant("no_dilation", &TpgConfig::use_dilation);
    variant("no_aggregation", &TpgConfig::use_aggregation);
  }
  if (groups != AblationGroups::components) {
    for (std::size_t k = 0; k <= 3; ++k) {
      TrainConfig cfg = base.train;
      cfg.net.bottleneck = BottleneckKind::conform;
      cfg.net.bottleneck_depth = 3;
      cfg.net.special_layers = k;
      table.rows.push_back(run_row("conform_layers", std::to_string(k), cfg, seeds));
    }
  }
  return table;
}

}  // namespace topoconv::harness
