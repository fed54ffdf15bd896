#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "odsage/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"odsage - OD demand forecasting pipeline for urban rail"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string scale_str;
  uint64_t seed = 0;
  int threads = -1;
  app.add_option("--config", config_path, "Pipeline configuration file (INI)");
  app.add_option("--scale", scale_str, "Scale preset: twelve_od | tiny | full");
  auto* seed_opt = app.add_option("--seed", seed, "Seed override");
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* cmd_simulate = app.add_subcommand("simulate", "Generate trip and train logs");
  auto* cmd_features = app.add_subcommand("features", "Assemble feature datasets");
  auto* cmd_graphs = app.add_subcommand("graphs", "Build the four OD-pair graphs");
  auto* cmd_train = app.add_subcommand("train", "Train mGraphSAGE and baselines");
  auto* cmd_evaluate = app.add_subcommand("evaluate", "Score models and write reports");
  auto* cmd_all = app.add_subcommand("all", "Run the whole pipeline");
  auto* cmd_show = app.add_subcommand("show-config", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    odsage::PipelineConfig cfg;
    if (!config_path.empty()) {
      cfg = odsage::load_config_file(config_path);
      if (!scale_str.empty() && odsage::scale_from_name(scale_str) != cfg.scale) {
        std::cerr << "error: --scale conflicts with the scale in " << config_path << "\n";
        return kExitUsage;
      }
    } else {
      cfg = odsage::default_config(scale_str.empty() ? odsage::Scale::tiny
                                                     : odsage::scale_from_name(scale_str));
    }
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (threads >= 0) cfg.threads = threads;
    if (const char* root = std::getenv("ODSAGE_ARTIFACT_ROOT"); root != nullptr && *root != '\0')
      cfg.artifact_root = root;

    if (cmd_show->parsed()) {
      std::cout << odsage::config_to_ini(cfg);
      return kExitOk;
    }
    if (cmd_all->parsed()) {
      odsage::run_all(cfg);
      return kExitOk;
    }
    if (cmd_simulate->parsed()) odsage::run_stage(odsage::Stage::simulate, cfg);
    if (cmd_features->parsed()) odsage::run_stage(odsage::Stage::features, cfg);
    if (cmd_graphs->parsed()) odsage::run_stage(odsage::Stage::graphs, cfg);
    if (cmd_train->parsed()) odsage::run_stage(odsage::Stage::train, cfg);
    if (cmd_evaluate->parsed()) odsage::run_stage(odsage::Stage::evaluate, cfg);
    return kExitOk;
  } catch (const odsage::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const odsage::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
