// Command-line driver for training, attribution and the desk-scale experiments.

#include <CLI11.hpp>

#include <iostream>

#include "samif/config.hpp"
#include "samif/errors.hpp"
#include "samif/experiments.hpp"
#include "samif/report.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDivergence = 3, kIoError = 4 };

struct CommonFlags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string estimator;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "flat key = value config file");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&flags](const std::uint64_t& s) { flags.seed = s; flags.has_seed = true; }, "experiment seed");
  cmd->add_option("--estimator", flags.estimator, "if-fast | hif | gif")
      ->check(CLI::IsMember({"if-fast", "hif", "gif"}));
  cmd->add_option("--set", flags.overrides, "extra key=value assignments");
}

samif::ExperimentConfig build_config(const CommonFlags& flags) {
  samif::ExperimentConfig cfg = flags.config.empty() ? samif::ExperimentConfig{}
                                                      : samif::ExperimentConfig::load(flags.config);
  for (const auto& kv : flags.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw samif::InvalidConfig("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!flags.out.empty()) cfg.out = flags.out;
  if (flags.has_seed) cfg.sam.seed = flags.seed;
  if (!flags.estimator.empty()) cfg.estimator = samif::parse_estimator(flags.estimator);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAM training with influence attribution"};
  app.require_subcommand(1);

  using Command = samif::Report (*)(const samif::ExperimentConfig&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands{
      {"train", "train with SAM and record the trajectory", samif::cmd_train},
      {"attribute", "influence score for every training row", samif::cmd_attribute},
      {"valuate", "remove the most valuable rows and track accuracy", samif::cmd_valuate},
      {"detect-noise", "flip labels and find them by ascending influence score", samif::cmd_detect_noise},
      {"trace", "helpful and harmful training rows for misclassified test rows", samif::cmd_trace},
      {"edit", "remove rows by editing the parameters and compare with retraining", samif::cmd_edit},
      {"calibrate", "compare influence scores with leave-one-out retraining", samif::cmd_calibrate},
  };
  std::vector<CommonFlags> flags(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    add_common(app.add_subcommand(std::get<0>(commands[i]), std::get<1>(commands[i])), flags[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!app.got_subcommand(std::get<0>(commands[i]))) continue;
    try {
      const samif::ExperimentConfig cfg = build_config(flags[i]);
      const samif::Report report = std::get<2>(commands[i])(cfg);
      for (const auto& path : samif::emit_report(report, cfg.out)) std::cout << path.string() << '\n';
      return kOk;
    } catch (const samif::DivergenceError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kDivergence;
    } catch (const samif::FormatError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kIoError;
    } catch (const std::filesystem::filesystem_error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kIoError;
    } catch (const samif::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kConfigError;
    }
  }
  return kConfigError;
}
