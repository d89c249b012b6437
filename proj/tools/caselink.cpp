// Copyright (c) 2026, The CaseLink Authors
// SPDX-License-Identifier: Apache-2.0
//
// caselink: stage-by-stage driver for the retrieval pipeline.
//
//   caselink [--config FILE] [--set key=value]... [--dry-run] <stage|all>
//   caselink verify
//   caselink compare RUN_DIR_A RUN_DIR_B [--k 5]
//   caselink gradcheck [--op NAME] [--trials N] [--seed S]
//   caselink config            print the resolved configuration

#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "caselink/caselink.hpp"

namespace {

int report_error(const std::exception& e, int code) {
  std::cerr << "caselink: " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CaseLink legal case retrieval pipeline"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  bool dry_run = false;
  app.add_option("-c,--config", config_file, "flat key = value configuration file");
  app.add_option("-s,--set", overrides, "override a configuration key (key=value); repeatable")->take_all();
  app.add_flag("--dry-run", dry_run, "print the resolved plan without running");

  std::vector<std::pair<std::string, CLI::App*>> stage_cmds;
  for (auto s : caselink::all_stages()) {
    const auto name = caselink::to_string(s);
    stage_cmds.emplace_back(name, app.add_subcommand(name, "run the " + name + " stage"));
  }
  auto* all_cmd = app.add_subcommand("all", "run ingest through evaluate");
  auto* verify_cmd = app.add_subcommand("verify", "check every recorded stage against its hashes");
  auto* config_cmd = app.add_subcommand("config", "print the resolved configuration");

  auto* compare_cmd = app.add_subcommand("compare", "compare two run directories");
  std::string run_a, run_b;
  int compare_k = 5;
  std::size_t compare_subsets = 5;
  double compare_alpha = 0.05;
  compare_cmd->add_option("run_a", run_a)->required();
  compare_cmd->add_option("run_b", run_b)->required();
  compare_cmd->add_option("--k", compare_k);
  compare_cmd->add_option("--subsets", compare_subsets);
  compare_cmd->add_option("--alpha", compare_alpha);

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::string grad_op;
  int grad_trials = 10;
  std::uint64_t grad_seed = 7;
  grad_cmd->add_option("--op", grad_op, "single op to check (default: all)");
  grad_cmd->add_option("--trials", grad_trials);
  grad_cmd->add_option("--seed", grad_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (grad_cmd->parsed()) {
      const auto ops = grad_op.empty() ? caselink::gradcheck_ops() : std::vector<std::string>{grad_op};
      bool ok = true;
      for (const auto& op : ops) {
        const auto r = caselink::check_gradients(op, grad_trials, grad_seed);
        std::cout << std::left << std::setw(18) << op << " scalars=" << r.scalars_checked << " max_rel_err=" << std::scientific
                  << std::setprecision(3) << r.max_rel_error << std::defaultfloat << (r.passed() ? "  ok" : "  FAIL") << "\n";
        ok = ok && r.passed();
      }
      return ok ? 0 : 1;
    }
    if (compare_cmd->parsed()) {
      const auto r = caselink::compare_runs(run_a, run_b, compare_k, compare_subsets, compare_alpha);
      std::cout << r.to_json().dump(2) << "\n";
      return 0;
    }
  } catch (const caselink::ConfigError& e) {
    return report_error(e, 3);
  } catch (const std::exception& e) {
    return report_error(e, 1);
  }

  caselink::Config config;
  try {
    config = caselink::Config::layered(config_file.empty() ? std::nullopt : std::optional<caselink::fs::path>(config_file),
                                       overrides);
  } catch (const std::exception& e) {
    return report_error(e, 3);
  }

  try {
    caselink::Pipeline pipeline(config);
    if (config_cmd->parsed()) {
      for (const auto& [k, v] : config.values()) std::cout << k << " = " << v << "  # " << config.origin(k) << "\n";
      return 0;
    }
    if (verify_cmd->parsed()) {
      const auto problems = pipeline.verify();
      for (const auto& [stage, p] : problems) std::cerr << stage << ": " << p << "\n";
      if (problems.empty()) std::cout << "all recorded stages verified\n";
      return problems.empty() ? 0 : 2;
    }
    if (all_cmd->parsed()) {
      // Upstream stages are planned, not run, so later stages report them as missing.
      if (dry_run) {
        for (auto s : caselink::pipeline_stages()) pipeline.run(s, true);
        return 0;
      }
      const auto r = pipeline.run_all();
      if (r.exit_code != 0) std::cerr << "caselink: " << r.message << "\n";
      return r.exit_code;
    }
    for (const auto& [name, cmd] : stage_cmds) {
      if (!cmd->parsed()) continue;
      const auto r = pipeline.run(caselink::parse_stage(name), dry_run);
      if (r.exit_code != 0) std::cerr << "caselink: " << r.message << "\n";
      return r.exit_code;
    }
  } catch (const caselink::ConfigError& e) {
    return report_error(e, 3);
  } catch (const std::exception& e) {
    return report_error(e, 1);
  }
  return 1;
}
