#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo::cli {

enum class FlagKind { value, multi, flag, positional, positional_multi };

/// One accepted command-line flag. `subcommand` is empty for flags every
/// subcommand accepts; `config_key` names the run setting the flag sets.
struct FlagSpec {
  std::string_view subcommand;
  std::string_view name;  // "--epochs", or the positional's name
  FlagKind kind;
  std::string_view config_key;
  std::string_view help;
};

struct SubcommandSpec {
  std::string_view name;
  std::string_view help;
};

const std::vector<SubcommandSpec>& subcommands();
const std::vector<FlagSpec>& flag_registry();
/// Registry entries accepted by one subcommand, common flags included.
std::vector<FlagSpec> flags_for(std::string_view subcommand);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitState = 3;
inline constexpr int kExitNumeric = 4;
int exit_code_for(ErrorKind kind);

/// Runs one invocation; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fusion_mammo::cli
