#include "socdbg/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <string_view>

namespace socdbg {

namespace {

struct Pipe {
  int fd[2] = {-1, -1};
  Pipe() {
    if (::pipe2(fd, O_CLOEXEC) != 0) throw InfrastructureError(std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (fd[0] >= 0) ::close(fd[0]);
    fd[0] = -1;
  }
  void close_write() {
    if (fd[1] >= 0) ::close(fd[1]);
    fd[1] = -1;
  }
};

void set_limit(int resource, std::optional<long> value, long scale) {
  if (!value) return;
  rlimit rl;
  rl.rlim_cur = rl.rlim_max = static_cast<rlim_t>(*value) * static_cast<rlim_t>(scale);
  ::setrlimit(resource, &rl);
}

// Only async-signal-safe calls from here on: the parent may be multithreaded.
[[noreturn]] void child(const ProcessRequest& req, char* const* argv, char* const* envp, Pipe& in, Pipe& out,
                        Pipe& err) {
  ::setpgid(0, 0);
  ::dup2(in.fd[0], STDIN_FILENO);
  ::dup2(out.fd[1], STDOUT_FILENO);
  ::dup2(err.fd[1], STDERR_FILENO);
  if (req.cwd && ::chdir(req.cwd->c_str()) != 0) _exit(126);
  set_limit(RLIMIT_AS, req.limits.address_space_mb, 1024L * 1024L);
  set_limit(RLIMIT_CPU, req.limits.cpu_seconds, 1);
  set_limit(RLIMIT_FSIZE, req.limits.file_size_kb, 1024);
  set_limit(RLIMIT_NOFILE, req.limits.open_files, 1);
  rlimit core{0, 0};
  ::setrlimit(RLIMIT_CORE, &core);
  ::execve(argv[0], argv, envp);
  _exit(127);
}

}  // namespace

std::optional<std::filesystem::path> find_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    if (::access(name.c_str(), X_OK) == 0) return std::filesystem::path(name);
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  std::string_view rest = path ? path : "/usr/local/bin:/usr/bin:/bin";
  while (!rest.empty()) {
    const auto colon = rest.find(':');
    const auto dir = rest.substr(0, colon);
    if (!dir.empty()) {
      auto candidate = std::filesystem::path(dir) / name;
      if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    }
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return std::nullopt;
}

ProcessResult run_process(const ProcessRequest& req) {
  // A child that exits before reading its input must not take us down with it.
  static const bool sigpipe_ignored = (::signal(SIGPIPE, SIG_IGN), true);
  (void)sigpipe_ignored;
  if (req.argv.empty()) throw InfrastructureError("empty command");
  if (::access(req.argv[0].c_str(), X_OK) != 0) {
    throw InfrastructureError("cannot execute " + req.argv[0] + ": " + std::strerror(errno));
  }
  std::vector<char*> argv;
  for (const auto& a : req.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  std::vector<char*> envp;
  for (const auto& e : req.env) envp.push_back(const_cast<char*>(e.c_str()));
  envp.push_back(nullptr);

  Pipe in, out, err;
  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) throw InfrastructureError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) child(req, argv.data(), envp.data(), in, out, err);

  // Also set from the parent so the kill below cannot race the child's setpgid.
  ::setpgid(pid, pid);
  in.close_read();
  out.close_write();
  err.close_write();
  ::fcntl(in.fd[1], F_SETFL, O_NONBLOCK);

  ProcessResult result;
  std::size_t written = 0;
  if (req.stdin_data.empty()) in.close_write();
  const auto deadline = start + req.deadline;
  char buf[65536];

  while (out.fd[0] >= 0 || err.fd[0] >= 0) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      break;
    }
    pollfd fds[3];
    int n = 0;
    int idx_in = -1, idx_out = -1, idx_err = -1;
    if (in.fd[1] >= 0) fds[idx_in = n++] = {in.fd[1], POLLOUT, 0};
    if (out.fd[0] >= 0) fds[idx_out = n++] = {out.fd[0], POLLIN, 0};
    if (err.fd[0] >= 0) fds[idx_err = n++] = {err.fd[0], POLLIN, 0};
    const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;
    if (::poll(fds, n, static_cast<int>(wait)) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (idx_in >= 0 && (fds[idx_in].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t w = ::write(in.fd[1], req.stdin_data.data() + written, req.stdin_data.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      if (w < 0 && errno != EAGAIN) in.close_write();
      if (written == req.stdin_data.size()) in.close_write();
    }
    auto drain = [&](int idx, Pipe& p, std::string& sink) {
      if (idx < 0 || !(fds[idx].revents & (POLLIN | POLLHUP | POLLERR))) return;
      const ssize_t r = ::read(p.fd[0], buf, sizeof buf);
      if (r <= 0) {
        if (r < 0 && errno == EINTR) return;
        p.close_read();
        return;
      }
      const std::size_t room = req.max_output_bytes > sink.size() ? req.max_output_bytes - sink.size() : 0;
      if (static_cast<std::size_t>(r) > room) result.output_truncated = true;
      sink.append(buf, std::min(room, static_cast<std::size_t>(r)));
    };
    drain(idx_out, out, result.stdout_data);
    drain(idx_err, err, result.stderr_data);
  }

  if (result.timed_out) ::kill(-pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  // Grandchildren may still hold the group; they have no business outliving us.
  ::kill(-pid, SIGKILL);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) result.signal = WTERMSIG(status);
  result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return result;
}

}  // namespace socdbg
