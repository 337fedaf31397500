#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dopt/commands.hpp"

namespace {

void add_instance_flags(CLI::App* cmd, dopt::CommonArgs& args,
                        bool require_budget) {
  cmd->add_option("--model", args.model, "model kind: linear or quadratic")
      ->capture_default_str();
  cmd->add_option("--factors", args.factors, "number of factors F")
      ->capture_default_str();
  cmd->add_option("--levels", args.levels, "levels per factor L")
      ->capture_default_str();
  auto* budget =
      cmd->add_option("--budget", args.budget, "experiment budget s");
  if (require_budget) {
    budget->required();
  }
  cmd->add_option("--out", args.out,
                  "write the report to this file instead of stdout");
  cmd->add_option("--seed", args.seed, "random seed")->capture_default_str();
  cmd->add_option(
         "--threads", args.threads,
         "worker threads; 0 takes DOPT_THREADS, then the hardware count")
      ->capture_default_str();
}

void add_bound_flags(CLI::App* cmd, dopt::CommonArgs& args) {
  cmd->add_option("--rounds", args.rounds, "pool growth rounds before stopping")
      ->capture_default_str();
  cmd->add_option("--topk", args.topk, "oracle candidates added per round")
      ->capture_default_str();
  cmd->add_option("--eps-kw", args.eps_kw,
                  "relative Kiefer-Wolfowitz stopping tolerance")
      ->capture_default_str();
}

void add_search_flags(CLI::App* cmd, dopt::CommonArgs& args) {
  cmd->add_option("--eps-imp", args.eps_imp,
                  "relative improvement threshold for exchange moves")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"D-optimal design toolkit for implicit factor grids"};
  app.require_subcommand(1);

  dopt::CommonArgs args;
  dopt::VerifyArgs vargs;

  CLI::App* local = app.add_subcommand(
      "local-search", "integer design by exchange local search");
  add_instance_flags(local, args, true);
  add_search_flags(local, args);

  CLI::App* bound = app.add_subcommand(
      "bound", "certified upper bound by row generation");
  add_instance_flags(bound, args, true);
  add_bound_flags(bound, args);

  CLI::App* solve =
      app.add_subcommand("solve", "exact solve by branch and bound");
  add_instance_flags(solve, args, true);
  add_bound_flags(solve, args);
  add_search_flags(solve, args);
  solve->add_option("--node-cap", args.node_cap,
                    "stop after exploring this many nodes")
      ->capture_default_str();
  solve->add_option("--time-cap", args.time_cap,
                    "stop after this many seconds; 0 = unlimited")
      ->capture_default_str();

  CLI::App* verify = app.add_subcommand(
      "verify", "cross-check the fast paths against reference scans");
  add_instance_flags(verify, args, false);
  add_bound_flags(verify, args);
  add_search_flags(verify, args);
  verify->add_option("--certificate", vargs.certificate_file,
                     "check a saved certificate against every grid row");
  verify->add_option("--design", vargs.design_file,
                     "recompute the objective of a saved design");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dopt::kExitBadInput;
  }

  std::string output;
  std::string error;
  int code = 0;
  if (app.got_subcommand(local)) {
    code = dopt::run_local_search(args, output, error);
  } else if (app.got_subcommand(bound)) {
    code = dopt::run_bound(args, output, error);
  } else if (app.got_subcommand(solve)) {
    code = dopt::run_solve(args, output, error);
  } else {
    vargs.common = args;
    code = dopt::run_verify(vargs, output, error);
  }

  if (!output.empty()) {
    if (args.out.empty()) {
      std::cout << output;
    } else {
      std::ofstream file(args.out, std::ios::binary);
      file << output;
      if (!file) {
        std::cerr << "error: cannot write " << args.out << "\n";
        return dopt::kExitBadInput;
      }
    }
  }
  if (!error.empty()) {
    std::cerr << "error: " << error << "\n";
  }
  return code;
}
