#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlihf/rlihf.h"

namespace {

int exit_code(rlihf_status s) {
  switch (s) {
    case RLIHF_OK: return 0;
    case RLIHF_ERR_CONFIG: return 2;
    case RLIHF_PARTIAL: return 3;
    default: return 1;
  }
}

int fail(rlihf_status s) {
  std::fprintf(stderr, "rlihf: %s: %s\n", rlihf_status_name(s), rlihf_last_error());
  return exit_code(s);
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
  bool print = false;
};

void add_config_args(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config,-c", args.path, "JSON config file (defaults when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--set,-s", args.overrides, "Override a field, e.g. --set alpha=0.3")->take_all();
  cmd->add_flag("--print-config", args.print, "Print the resolved config before running");
}

rlihf_status load(const ConfigArgs& args, rlihf_config** out) {
  std::vector<const char*> ov;
  for (const auto& o : args.overrides) ov.push_back(o.c_str());
  if (args.path.empty()) return rlihf_config_parse("{}", ov.data(), ov.size(), out);
  return rlihf_config_load(args.path.c_str(), ov.data(), ov.size(), out);
}

void print_config(const rlihf_config* cfg) {
  char* text = nullptr;
  if (rlihf_config_to_json(cfg, &text) == RLIHF_OK) {
    std::printf("%s\n", text);
    rlihf_string_free(text);
  }
}

void print_summary_header() {
  std::printf("success_rate_mean,success_rate_std,path_eff_mean,path_eff_std,"
              "mean_collision_mean,mean_collision_std,return_mean\n");
}

void print_summary(const rlihf_summary& s) {
  std::printf("%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", s.success_rate_mean, s.success_rate_std, s.path_eff_mean,
              s.path_eff_std, s.mean_collision_mean, s.mean_collision_std, s.return_mean);
}

int print_report(rlihf_status s, rlihf_report* report, const char* problem_label) {
  if (report) {
    for (size_t i = 0; i < rlihf_report_problem_count(report); ++i) {
      std::fprintf(stderr, "%s: %s\n", problem_label, rlihf_report_problem(report, i));
    }
    std::printf("%s\n", rlihf_report_root(report));
    rlihf_report_free(report);
  }
  if (s != RLIHF_OK) return fail(s);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement learning with simulated error-related feedback"};
  app.require_subcommand(1);
  app.set_version_flag("--version", rlihf_version());

  ConfigArgs train_args, sweep_args, loso_args, check_args;
  int workers = 0;
  bool force = false;

  auto* train = app.add_subcommand("train", "Train a single run");
  add_config_args(train, train_args);
  train->add_flag("--force", force, "Re-run even if the run directory is complete");
  train->add_option("--workers", workers, "Ignored for single runs");

  auto* sweep = app.add_subcommand("sweep", "Alpha sweep with sparse baseline");
  add_config_args(sweep, sweep_args);
  sweep->add_flag("--force", force, "Re-run completed cells");
  sweep->add_option("--workers", workers, "Parallel cells (default: RLIHF_WORKERS or 1)");

  auto* loso = app.add_subcommand("loso", "Per-subject evaluation against shared sparse baselines");
  add_config_args(loso, loso_args);
  loso->add_flag("--force", force, "Re-run completed cells");
  loso->add_option("--workers", workers, "Parallel cells (default: RLIHF_WORKERS or 1)");

  std::string eval_dir;
  int eval_episodes = 100;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run's checkpoint");
  eval->add_option("--dir,-d", eval_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--episodes,-n", eval_episodes, "Evaluation episodes")->check(CLI::PositiveNumber);

  std::string export_dir;
  auto* plots = app.add_subcommand("export-plots", "Write plot-ready curve tables");
  plots->add_option("--dir,-d", export_dir, "Sweep or loso directory")->required()->check(CLI::ExistingDirectory);

  auto* check = app.add_subcommand("validate-config", "Resolve and validate a config");
  add_config_args(check, check_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*eval) {
    rlihf_summary s{};
    const rlihf_status st = rlihf_eval(eval_dir.c_str(), eval_episodes, &s);
    if (st != RLIHF_OK) return fail(st);
    print_summary_header();
    print_summary(s);
    return 0;
  }
  if (*plots) {
    rlihf_report* report = nullptr;
    const rlihf_status st = rlihf_export_plots(export_dir.c_str(), &report);
    if (report) {
      for (size_t i = 0; i < rlihf_report_item_count(report); ++i) std::printf("%s\n", rlihf_report_item(report, i));
      for (size_t i = 0; i < rlihf_report_problem_count(report); ++i) {
        std::fprintf(stderr, "missing: %s\n", rlihf_report_problem(report, i));
      }
      rlihf_report_free(report);
    }
    return st == RLIHF_OK ? 0 : fail(st);
  }

  const ConfigArgs& args = *train ? train_args : *sweep ? sweep_args : *loso ? loso_args : check_args;
  rlihf_config* cfg = nullptr;
  if (const rlihf_status st = load(args, &cfg); st != RLIHF_OK) return fail(st);
  if (args.print || *check) print_config(cfg);

  int code = 0;
  if (*train) {
    rlihf_summary s{};
    char* dir = nullptr;
    const rlihf_status st = rlihf_train(cfg, force ? 1 : 0, &s, &dir);
    if (st != RLIHF_OK) {
      code = fail(st);
    } else {
      std::fprintf(stderr, "%s %s\n", s.skipped ? "reused" : "wrote", dir);
      print_summary_header();
      print_summary(s);
    }
    rlihf_string_free(dir);
  } else if (*sweep || *loso) {
    rlihf_report* report = nullptr;
    const rlihf_status st = *sweep ? rlihf_sweep(cfg, workers, force ? 1 : 0, &report)
                                   : rlihf_loso(cfg, workers, force ? 1 : 0, &report);
    code = print_report(st, report, "failed");
  }
  rlihf_config_free(cfg);
  return code;
}
