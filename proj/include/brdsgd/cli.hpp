#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace brdsgd::cli {

enum class CommandKind { Run, Pair, Sweep, Bounds, Check };

struct Command {
  CommandKind kind = CommandKind::Run;
  std::filesystem::path config;
  std::filesystem::path out_root;  // --out, else $BRDSGD_OUT, else ./out

  // pair, and sweep in pair mode
  std::optional<int> agent;
  std::optional<int> index;
  std::uint64_t replacement = 0;

  // sweep
  std::string axis;
  std::vector<std::string> values;
  unsigned workers = 0;

  // bounds
  std::string theorem;
  std::filesystem::path inputs;
  std::filesystem::path weights;  // CSV matrix; supplies beta and chi
  std::vector<std::pair<std::string, double>> overrides;  // flag name -> value
  std::int64_t k = 0;
  std::optional<std::int64_t> k_max;
  std::int64_t k_step = 1;
  std::filesystem::path output;  // empty: stdout

  // check
  std::string rule = "ios";
  int trials = 10000;
  std::uint64_t seed = 1;
  int honest = 8;
  int byzantine = 2;
  std::string graph = "complete";
  double p = 0.7;
  int dim = 3;
};

// Bad command line. exit_code is 2, or 0 for --help.
class UsageError : public std::runtime_error {
 public:
  UsageError(std::string message, int exit_code)
      : std::runtime_error(std::move(message)), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

Command parse_args(int argc, const char* const* argv);

// 0 on success, 1 when the library reports an error.
int execute(const Command& cmd, std::ostream& out, std::ostream& err);

// parse_args + execute with usage errors reported on err.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace brdsgd::cli
