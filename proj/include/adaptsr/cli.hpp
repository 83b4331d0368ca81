#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "adaptsr/error.hpp"
#include "adaptsr/serialize.hpp"

namespace adaptsr::cli {

enum class Command { quality, gate, calibrate, guard, sweep, pareto, simulate, loso_eval };

std::string_view to_string(Command command) noexcept;
std::optional<Command> parse_command(std::string_view name);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitIo = 4;

/// IoFailure maps to kExitIo, every other error to kExitData.
int exit_code_for(Errc code) noexcept;

/// Resolved invocation. `effective` holds every config key that applies to the
/// command, with defaults filled in; it is echoed verbatim into the report and
/// can be passed back through --config to repeat the run.
struct RunConfig {
  Command command = Command::gate;
  Json effective;
  std::filesystem::path out_dir = ".";
  int threads = 0;
};

/// `args` excludes the program name. Diagnostics go to `err`, help and the list
/// of written files to `out`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace adaptsr::cli
