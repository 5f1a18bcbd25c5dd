#include <iostream>

#include "CLI11.hpp"
#include "iscr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Interactive spoken content retrieval: data generation, joint training, evaluation and serving"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run configuration (JSON)");
    sub->add_option("--set", overrides, "override a config value, e.g. --set training.seed=3")->take_all();
  };

  std::string preset_name = "desk";
  auto* init = app.add_subcommand("init-config", "print a complete configuration for a preset");
  init->add_option("--preset", preset_name, "desk | full");

  auto* gen = app.add_subcommand("gen", "write the planted synthetic corpus");
  auto* train = app.add_subcommand("train", "jointly train manager and simulator over the configured trials");
  auto* eval = app.add_subcommand("eval", "evaluate saved managers on their test folds");
  auto* compare = app.add_subcommand("compare", "KL and entropy of rule, trained and human choices");
  auto* serve = app.add_subcommand("serve", "run the session service");
  for (auto* s : {gen, train, eval, compare, serve}) common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? iscr::kExitOk : iscr::kExitUsage;
  }

  try {
    if (init->parsed()) return iscr::cmd_init_config(preset_name, std::cout);
    iscr::RunConfig cfg = config_path.empty() ? iscr::desk_preset() : iscr::load_config(config_path);
    cfg = iscr::apply_overrides(cfg, overrides);
    if (gen->parsed()) return iscr::cmd_gen(cfg, std::cout);
    if (train->parsed()) return iscr::cmd_train(cfg, std::cout);
    if (eval->parsed()) return iscr::cmd_eval(cfg, std::cout);
    if (compare->parsed()) return iscr::cmd_compare(cfg, std::cout);
    if (serve->parsed()) return iscr::cmd_serve(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "iscr: " << e.what() << "\n";
    return iscr::exit_code_for(e);
  }
  return iscr::kExitUsage;
}
