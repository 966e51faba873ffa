#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include "surgraw/provider.hpp"

namespace surgraw::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kInvalidInput = 2;
inline constexpr int kConfigError = 3;
inline constexpr int kProviderFailure = 4;

// "mock" (scripted; HashChoice when no script is given) or "live" (reads
// SURGRAW_API_BASE / SURGRAW_API_KEY, wrapped in the default retry policy).
std::shared_ptr<provider::Provider> make_provider(const std::string& name,
                                                  const std::optional<std::string>& mock_script,
                                                  std::uint64_t seed);

// Subcommands: ask, bench run, corpus index, serve.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace surgraw::cli
