#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rlms {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;   // bad flags, config, checkpoint mismatch
inline constexpr int kExitData = 2;     // unreadable or unusable images
inline constexpr int kExitNumeric = 3;  // training went non-finite
inline constexpr int kExitGradient = 4; // gradcheck failure

// `args` excludes the program name: {"stylize", "--ckpt", "m.ckpt", ...}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rlms
