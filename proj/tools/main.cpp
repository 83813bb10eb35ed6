// motionprior: data generation, training, sampling, fitting, evaluation and
// gradient self-checks from one binary.
#include "commands.hpp"
#include "config.hpp"

#include "motionprior/error.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <functional>
#include <iostream>

using namespace motionprior;

int main(int argc, char** argv) {
  CLI::App app{"motion prior toolkit"};
  app.require_subcommand(1);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the merged config and exit");

  struct Command {
    const char* name;
    const char* help;
    std::function<nlohmann::json()> defaults;
    std::function<int(const nlohmann::json&)> run;
  };
  std::vector<Command> cmds{
      {"gen-data", "generate and split a synthetic dataset", cli::gen_data_defaults, cli::cmd_gen_data},
      {"train", "train the motion model and the initial-state GMM", cli::train_defaults, cli::cmd_train},
      {"sample", "roll the learned prior out from recorded initial states", cli::sample_defaults, cli::cmd_sample},
      {"fit", "fit a motion to an observation problem file", cli::fit_defaults, cli::cmd_fit},
      {"eval", "score motions against ground truth", cli::eval_defaults, cli::cmd_eval},
      {"check", "finite-difference gradient sweep", cli::check_defaults, cli::cmd_check},
      {"make-obs", "synthesize an observation of a motion file as a fit problem", cli::make_obs_defaults,
       cli::cmd_make_obs},
  };
  std::vector<std::string> configs(cmds.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    CLI::App* sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    sub->add_option("-c,--config", configs[i], "JSON config file");
    sub->allow_extras();
    subs.push_back(sub);
    sub->footer("Any config key can be overridden with --key value (nested keys as a.b).");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  for (std::size_t i = 0; i < cmds.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const Command& c = cmds[i];
    std::vector<std::string> extras = subs[i]->remaining();
    if (const auto it = std::find(extras.begin(), extras.end(), "--print-config"); it != extras.end()) {
      print_config = true;
      extras.erase(it);
    }
    try {
      const nlohmann::json cfg = cli::build_config(c.defaults(), configs[i], extras);
      if (print_config) {
        std::cout << cfg.dump(2) << "\n";
        return 0;
      }
      return c.run(cfg);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return e.is_numeric() ? 3 : 2;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 2;
}
