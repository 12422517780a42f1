#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "socdbg/error.hpp"

namespace socdbg {

/// The child could not be started or talked to. Distinct from anything the
/// child itself reports.
class InfrastructureError : public Error {
 public:
  using Error::Error;
};

struct ProcessLimits {
  std::optional<long> address_space_mb = 1024;
  std::optional<long> cpu_seconds;
  std::optional<long> file_size_kb = 0;
  std::optional<long> open_files = 64;
};

struct ProcessRequest {
  std::vector<std::string> argv;
  std::string stdin_data;
  std::vector<std::string> env;  // "KEY=value"; nothing is inherited
  std::optional<std::filesystem::path> cwd;
  std::chrono::milliseconds deadline{5000};
  ProcessLimits limits;
  std::size_t max_output_bytes = 8 << 20;
};

struct ProcessResult {
  std::string stdout_data;
  std::string stderr_data;
  std::optional<int> exit_code;
  std::optional<int> signal;
  bool timed_out = false;
  bool output_truncated = false;
  std::chrono::milliseconds elapsed{0};
};

/// Runs argv[0], which must be a path, in its own process group and kills the
/// whole group at the deadline.
ProcessResult run_process(const ProcessRequest& request);

/// First executable named `name` on the caller's PATH; `name` itself if it
/// already contains a slash.
std::optional<std::filesystem::path> find_executable(const std::string& name);

}  // namespace socdbg
