#pragma once

#include <cstdint>
#include <string>

#include "dopt/types.hpp"

namespace dopt {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitUnproven = 4;

struct CommonArgs {
  std::string model = "linear";
  int factors = 2;
  int levels = 2;
  std::int64_t budget = 0;  // 0 lets verify pick row_dim + 2
  std::string out;          // empty = stdout
  std::uint64_t seed = 0;
  int threads = 0;
  std::int64_t rounds = 50;
  int topk = 5;
  Scalar eps_kw = 1e-6;
  Scalar eps_imp = 1e-8;
  std::int64_t node_cap = 100'000;
  Scalar time_cap = 0;
};

struct VerifyArgs {
  CommonArgs common;
  std::string certificate_file;
  std::string design_file;
};

// Each command fills `output` with its JSON (or check report) and `error`
// with a one-line diagnostic on failure, and returns an exit code. Pure
// functions of their arguments, so tests can compare output bytes directly.
int run_local_search(const CommonArgs& args, std::string& output,
                     std::string& error);
int run_bound(const CommonArgs& args, std::string& output, std::string& error);
int run_solve(const CommonArgs& args, std::string& output, std::string& error);
int run_verify(const VerifyArgs& args, std::string& output, std::string& error);

}  // namespace dopt
