#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "autoform/error.hpp"

namespace autoform {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string output;  // stdout and stderr interleaved
  std::int64_t elapsed_ms = 0;
};

/// Runs argv[0] (PATH lookup) with `cwd`, capturing merged output. Kills the
/// process group after `timeout`. Throws ConfigError when the program cannot
/// be started at all.
inline ProcessResult run_process(const std::vector<std::string>& argv,
                                 const std::filesystem::path& cwd,
                                 std::chrono::milliseconds timeout) {
  if (argv.empty()) throw ConfigError("empty command line");
  int out_pipe[2];
  int err_pipe[2];  // reports exec failure; closed on successful exec
  if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0) {
    throw ConfigError(std::string("pipe failed: ") + std::strerror(errno));
  }
  const auto started = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) throw ConfigError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(out_pipe[1], STDERR_FILENO);
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) {
      int e = errno;
      (void)!::write(err_pipe[1], &e, sizeof e);
      ::_exit(127);
    }
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    int e = errno;
    (void)!::write(err_pipe[1], &e, sizeof e);
    ::_exit(127);
  }
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  int exec_errno = 0;
  ssize_t got = ::read(err_pipe[0], &exec_errno, sizeof exec_errno);
  ::close(err_pipe[0]);
  if (got == static_cast<ssize_t>(sizeof exec_errno)) {
    ::close(out_pipe[0]);
    ::waitpid(pid, nullptr, 0);
    throw ConfigError("cannot start '" + argv[0] + "' in " + cwd.string() + ": " +
                      std::strerror(exec_errno));
  }

  ProcessResult result;
  const auto deadline = started + timeout;
  char buf[4096];
  bool open = true;
  while (open) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      ::kill(-pid, SIGKILL);
      break;
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd pfd{out_pipe[0], POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 1000)));
    if (rc < 0 && errno != EINTR) break;
    if (rc > 0) {
      ssize_t n = ::read(out_pipe[0], buf, sizeof buf);
      if (n > 0) {
        result.output.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || (n < 0 && errno != EINTR && errno != EAGAIN)) {
        open = false;
      }
    }
  }
  ::close(out_pipe[0]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (!result.timed_out) {
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  }
  result.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - started)
                          .count();
  return result;
}

}  // namespace autoform
