#ifndef SIBDEP_HARNESS_HPP
#define SIBDEP_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"

namespace sibdep::harness {

enum ExitCode : int { kSuccess = 0, kDomainError = 1, kUsageError = 2 };

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Hash of everything that determines a result file's numbers: the config
/// document, the command, and its effective parameters (seed included).
std::string config_hash(const nlohmann::json& document, const std::string& command,
                        const nlohmann::json& params);

/// Shortest form that still carries 17 significant digits, '.' separator,
/// independent of the global locale.
std::string format_double(double v);

/// Command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sibdep::harness

#endif  // SIBDEP_HARNESS_HPP
