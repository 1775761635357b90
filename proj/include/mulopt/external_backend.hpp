#pragma once

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <string>
#include <unordered_map>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "mulopt/cost.hpp"
#include "mulopt/design.hpp"
#include "mulopt/error.hpp"

namespace mulopt {

inline constexpr double kDefaultBackendTimeoutSecs = 600.0;

// Timeout from MULOPT_BACKEND_TIMEOUT_SECS, falling back to `fallback`.
inline double backend_timeout_from_env(double fallback = kDefaultBackendTimeoutSecs) {
  if (const char* env = std::getenv("MULOPT_BACKEND_TIMEOUT_SECS")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0) return v;
  }
  return fallback;
}

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

namespace detail {

// Runs argv without a shell, capturing stdout and stderr. Kills the child and
// throws BackendTimeout once `timeout_secs` elapse.
inline ProcessResult run_process(const std::vector<std::string>& argv, double timeout_secs) {
  int out_pipe[2], err_pipe[2];
  if (pipe(out_pipe) != 0) throw BackendFailure("pipe() failed");
  if (pipe(err_pipe) != 0) {
    close(out_pipe[0]);
    close(out_pipe[1]);
    throw BackendFailure("pipe() failed");
  }
  const pid_t pid = fork();
  if (pid < 0) throw BackendFailure("fork() failed");
  if (pid == 0) {
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    const std::string msg = "cannot execute " + argv[0] + "\n";
    [[maybe_unused]] auto n = write(STDERR_FILENO, msg.data(), msg.size());
    _exit(127);
  }
  close(out_pipe[1]);
  close(err_pipe[1]);

  ProcessResult result;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_secs));
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  std::string* sinks[2] = {&result.out, &result.err};
  int open_fds = 2;
  bool timed_out = false;
  char buf[4096];
  while (open_fds > 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    const int ready = poll(fds, 2, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int k = 0; k < 2; ++k) {
      if (fds[k].fd < 0 || !(fds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const ssize_t n = read(fds[k].fd, buf, sizeof buf);
      if (n > 0) {
        sinks[k]->append(buf, static_cast<std::size_t>(n));
      } else {
        close(fds[k].fd);
        fds[k].fd = -1;
        --open_fds;
      }
    }
  }
  for (auto& fd : fds)
    if (fd.fd >= 0) close(fd.fd);
  if (timed_out) {
    kill(pid, SIGKILL);
    waitpid(pid, nullptr, 0);
    throw BackendTimeout(argv[0] + " exceeded " + std::to_string(timeout_secs) + " s");
  }
  int status = 0;
  waitpid(pid, &status, 0);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

class TempFile {
 public:
  explicit TempFile(const std::string& contents) {
    auto pattern = (std::filesystem::temp_directory_path() / "mulopt-design-XXXXXX.json").string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    const int fd = mkstemps(buf.data(), 5);
    if (fd < 0) throw IoError("cannot create temporary design file");
    path_ = buf.data();
    const char* p = contents.data();
    std::size_t left = contents.size();
    while (left > 0) {
      const ssize_t n = write(fd, p, left);
      if (n <= 0) {
        close(fd);
        throw IoError("cannot write " + path_);
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    close(fd);
  }
  ~TempFile() { std::remove(path_.c_str()); }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace detail

// Parses {"scenarios":[{"area":..,"delay":..,"power":..},...]}.
inline CostReport parse_backend_output(const std::string& text) {
  CostReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& s : j.at("scenarios"))
      report.scenarios.push_back(
          {s.at("area").get<double>(), s.at("delay").get<double>(), s.at("power").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw BackendFailure(std::string("malformed backend output: ") + e.what());
  }
  validate_report(report);
  return report;
}

// Cost backend that shells out to an external synthesis wrapper:
//   argv = [command, <design.json>], stdout = scenario JSON, exit 0.
// Results are cached by design content hash; concurrent requests for the same
// design share one invocation.
class ExternalBackend final : public CostBackend {
 public:
  explicit ExternalBackend(std::string command, double timeout_secs = backend_timeout_from_env())
      : command_(std::move(command)), timeout_secs_(timeout_secs) {}

  CostReport evaluate(const DesignDoc& design) override {
    const auto key = content_hash(design);
    std::promise<CostReport> promise;
    std::shared_future<CostReport> future;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = cache_.find(key);
      if (it != cache_.end()) {
        future = it->second;
      } else {
        future = promise.get_future().share();
        cache_.emplace(key, future);
        owner = true;
      }
    }
    if (owner) {
      try {
        promise.set_value(invoke(design));
      } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        cache_.erase(key);
      }
    }
    return future.get();
  }

  std::string name() const override { return command_; }
  int invocations() const { return invocations_.load(); }

 private:
  CostReport invoke(const DesignDoc& design) {
    ++invocations_;
    detail::TempFile file(design_to_string(design));
    const auto result = detail::run_process({command_, file.path()}, timeout_secs_);
    if (result.exit_code != 0)
      throw BackendFailure(command_ + " exited with status " + std::to_string(result.exit_code) +
                           ": " + result.err);
    try {
      return parse_backend_output(result.out);
    } catch (const BackendFailure& e) {
      throw BackendFailure(std::string(e.what()) + (result.err.empty() ? "" : "; stderr: " + result.err));
    }
  }

  std::string command_;
  double timeout_secs_;
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::shared_future<CostReport>> cache_;
  std::atomic<int> invocations_{0};
};

// Single-shot helper matching the subprocess contract.
inline CostReport external_cost(const DesignDoc& design, const std::string& command,
                                double timeout_secs = backend_timeout_from_env()) {
  ExternalBackend backend(command, timeout_secs);
  return backend.evaluate(design);
}

}  // namespace mulopt
