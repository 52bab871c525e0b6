#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "wrangle/errors.hpp"
#include "wrangle/sandbox.hpp"

extern char** environ;

namespace wrangle {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kStderrCap = 16 * 1024;
constexpr std::chrono::milliseconds kExitGrace{2000};

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    reset();
    fd_ = std::exchange(o.fd_, -1);
    return *this;
  }
  ~Fd() { reset(); }
  int get() const noexcept { return fd_; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

struct Pipe {
  Fd read;
  Fd write;
};

Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw SandboxLaunchError(std::string("pipe: ") + std::strerror(errno));
  }
  return Pipe{Fd(fds[0]), Fd(fds[1])};
}

class TempSnippetFile {
 public:
  explicit TempSnippetFile(const std::string& source) {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "wrangle-snippet-XXXXXX.py").string();
    const int fd = ::mkstemps(pattern.data(), 3);
    if (fd < 0) throw SandboxLaunchError(std::string("mkstemps: ") + std::strerror(errno));
    ::close(fd);
    path_ = pattern;
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    out << source;
    if (!out) throw SandboxLaunchError("cannot write snippet file " + path_.string());
  }
  ~TempSnippetFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempSnippetFile(const TempSnippetFile&) = delete;
  TempSnippetFile& operator=(const TempSnippetFile&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

// Owns the runner process; kills it if still running on destruction.
class Child {
 public:
  explicit Child(pid_t pid) : pid_(pid) {}
  ~Child() {
    if (pid_ > 0 && !reaped_) {
      ::kill(pid_, SIGKILL);
      wait_blocking();
    }
  }
  Child(const Child&) = delete;
  Child& operator=(const Child&) = delete;

  void kill_now() {
    if (!reaped_) ::kill(pid_, SIGKILL);
  }
  std::optional<int> try_wait() {
    if (reaped_) return status_;
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      reaped_ = true;
      status_ = status;
      return status_;
    }
    return std::nullopt;
  }
  int wait_blocking() {
    if (reaped_) return status_;
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    reaped_ = true;
    status_ = status;
    return status_;
  }
  // Waits up to `grace`, then kills.
  int wait_for(std::chrono::milliseconds grace) {
    const auto until = Clock::now() + grace;
    while (Clock::now() < until) {
      if (auto st = try_wait()) return *st;
      ::usleep(1000);
    }
    kill_now();
    return wait_blocking();
  }

 private:
  pid_t pid_;
  bool reaped_ = false;
  int status_ = 0;
};

int exit_code(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

bool is_fatal_line(std::string_view line, std::string& message) {
  try {
    const auto doc = nlohmann::json::parse(line);
    if (!doc.is_object() || doc.contains("id") || doc.contains("ready")) return false;
    for (const char* key : {"fatal", "error"}) {
      if (doc.contains(key)) {
        message = doc[key].is_string() ? doc[key].get<std::string>() : doc[key].dump();
        return true;
      }
    }
  } catch (const nlohmann::json::exception&) {
  }
  return false;
}

// Line-oriented reader over the runner's stdout and stderr.
class RunnerIo {
 public:
  RunnerIo(Fd in, Fd out, Fd err) : in_(std::move(in)), out_(std::move(out)), err_(std::move(err)) {
    ::fcntl(in_.get(), F_SETFL, ::fcntl(in_.get(), F_GETFL) | O_NONBLOCK);
  }

  void queue_input(std::string data) { pending_ += data; }
  void close_input_when_drained() { close_after_drain_ = true; }
  void close_input() {
    pending_.clear();
    in_.reset();
  }
  bool stdout_eof() const noexcept { return out_eof_; }
  const std::string& stderr_text() const noexcept { return stderr_; }

  // Pumps I/O until a complete stdout line is available, stdout hits EOF, or
  // the deadline passes. Returns the line if one is available.
  std::optional<std::string> next_line(Clock::time_point deadline, bool& timed_out) {
    timed_out = false;
    while (true) {
      if (auto line = take_line()) return line;
      if (out_eof_) return std::nullopt;
      const auto now = Clock::now();
      if (now >= deadline) {
        timed_out = true;
        return std::nullopt;
      }
      pump(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now));
    }
  }

 private:
  std::optional<std::string> take_line() {
    const auto nl = stdout_buf_.find('\n');
    if (nl == std::string::npos) {
      if (out_eof_ && !stdout_buf_.empty()) {
        std::string rest = std::move(stdout_buf_);
        stdout_buf_.clear();
        return rest;
      }
      return std::nullopt;
    }
    std::string line = stdout_buf_.substr(0, nl);
    stdout_buf_.erase(0, nl + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  void pump(std::chrono::milliseconds budget) {
    if (close_after_drain_ && pending_.empty()) in_.reset();
    pollfd fds[3];
    nfds_t n = 0;
    int out_idx = -1;
    int err_idx = -1;
    int in_idx = -1;
    if (!out_eof_) {
      out_idx = static_cast<int>(n);
      fds[n++] = pollfd{out_.get(), POLLIN, 0};
    }
    if (err_.get() >= 0) {
      err_idx = static_cast<int>(n);
      fds[n++] = pollfd{err_.get(), POLLIN, 0};
    }
    if (in_.get() >= 0 && !pending_.empty()) {
      in_idx = static_cast<int>(n);
      fds[n++] = pollfd{in_.get(), POLLOUT, 0};
    }
    const int timeout = static_cast<int>(std::clamp<long long>(budget.count(), 1, 100));
    const int ready = ::poll(fds, n, timeout);
    if (ready < 0) {
      if (errno == EINTR) return;
      throw SandboxError(std::string("poll: ") + std::strerror(errno));
    }
    char buf[65536];
    if (out_idx >= 0 && (fds[out_idx].revents & (POLLIN | POLLHUP | POLLERR))) {
      const ssize_t r = ::read(out_.get(), buf, sizeof buf);
      if (r > 0) {
        stdout_buf_.append(buf, static_cast<std::size_t>(r));
      } else if (r == 0 || (errno != EAGAIN && errno != EINTR)) {
        out_eof_ = true;
      }
    }
    if (err_idx >= 0 && (fds[err_idx].revents & (POLLIN | POLLHUP | POLLERR))) {
      const ssize_t r = ::read(err_.get(), buf, sizeof buf);
      if (r > 0) {
        if (stderr_.size() < kStderrCap) stderr_.append(buf, static_cast<std::size_t>(r));
      } else if (r == 0 || (errno != EAGAIN && errno != EINTR)) {
        err_.reset();
      }
    }
    if (in_idx >= 0 && (fds[in_idx].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t w = ::write(in_.get(), pending_.data(), pending_.size());
      if (w > 0) {
        pending_.erase(0, static_cast<std::size_t>(w));
      } else if (w < 0 && errno != EAGAIN && errno != EINTR) {
        // The runner closed its stdin; whatever it wrote will explain why.
        pending_.clear();
        in_.reset();
      }
    }
  }

  Fd in_;
  Fd out_;
  Fd err_;
  std::string pending_;
  bool close_after_drain_ = false;
  std::string stdout_buf_;
  bool out_eof_ = false;
  std::string stderr_;
};

std::string diagnostics(const RunnerIo& io) {
  const auto& err = io.stderr_text();
  if (err.empty()) return "";
  return " (stderr: " + err.substr(0, 500) + ")";
}

}  // namespace

SubprocessExecutor::SubprocessExecutor(SubprocessOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) throw SandboxLaunchError("sandbox runner command is empty");
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

std::vector<ResultMessage> SubprocessExecutor::run_session(const std::string& source,
                                                           std::span<const RowMessage> rows) {
  TempSnippetFile snippet(source);

  std::vector<std::string> args = options_.command;
  args.insert(args.end(), {"--snippet-file", snippet.path().string(), "--batch-timeout-ms",
                           std::to_string(options_.batch_timeout.count())});
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  Pipe in = make_pipe();
  Pipe out = make_pipe();
  Pipe err = make_pipe();

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in.read.get(), STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out.write.get(), STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err.write.get(), STDERR_FILENO);
  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw SandboxLaunchError("cannot start runner '" + options_.command.front() +
                             "': " + std::strerror(rc));
  }
  Child child(pid);
  in.read.reset();
  out.write.reset();
  err.write.reset();
  RunnerIo io(std::move(in.write), std::move(out.read), std::move(err.read));

  // Handshake.
  bool timed_out = false;
  auto line = io.next_line(Clock::now() + options_.handshake_timeout, timed_out);
  if (timed_out) {
    child.kill_now();
    throw SandboxLaunchError("runner sent no ready line within " +
                             std::to_string(options_.handshake_timeout.count()) + " ms");
  }
  std::string fatal;
  if (!line) {
    const int code = exit_code(child.wait_for(kExitGrace));
    if (code == 2) throw SnippetLoadError("snippet failed to load" + diagnostics(io));
    throw SandboxLaunchError("runner exited with code " + std::to_string(code) +
                             " before the handshake" + diagnostics(io));
  }
  if (is_fatal_line(*line, fatal)) throw SnippetLoadError("snippet failed to load: " + fatal);
  int protocol = 0;
  try {
    protocol = decode_ready(*line);
  } catch (const ProtocolError& e) {
    throw SandboxLaunchError(std::string("malformed handshake: ") + e.what());
  }
  if (protocol != kProtocolVersion) {
    throw SandboxLaunchError("runner speaks protocol " + std::to_string(protocol) + ", expected " +
                             std::to_string(kProtocolVersion));
  }

  // Session.
  const auto batches = std::max<std::size_t>(1, (rows.size() + 999) / 1000);
  const auto deadline = Clock::now() + options_.batch_timeout * static_cast<long long>(batches);
  std::string payload;
  for (const auto& row : rows) {
    payload += encode_row(row);
    payload.push_back('\n');
  }
  io.queue_input(std::move(payload));
  io.close_input_when_drained();

  std::vector<ResultMessage> results;
  results.reserve(rows.size());
  while (results.size() < rows.size()) {
    line = io.next_line(deadline, timed_out);
    if (timed_out) {
      child.kill_now();
      child.wait_blocking();
      throw SandboxTimeout("runner exceeded its " + std::to_string(options_.batch_timeout.count()) +
                           " ms batch budget after " + std::to_string(results.size()) + " of " +
                           std::to_string(rows.size()) + " rows");
    }
    if (!line) {
      io.close_input();
      const int code = exit_code(child.wait_for(kExitGrace));
      if (code == 2) throw SnippetLoadError("snippet failed to load" + diagnostics(io));
      throw ProtocolError("runner exited with code " + std::to_string(code) + " after " +
                          std::to_string(results.size()) + " of " + std::to_string(rows.size()) +
                          " results" + diagnostics(io));
    }
    if (line->empty()) continue;
    if (is_fatal_line(*line, fatal)) throw SnippetLoadError("snippet failed to load: " + fatal);
    ResultMessage result = decode_result(*line);
    const std::uint64_t expected = rows[results.size()].id;
    if (result.id != expected) {
      throw ProtocolError("runner answered id " + std::to_string(result.id) + ", expected " +
                          std::to_string(expected));
    }
    results.push_back(std::move(result));
  }

  io.close_input();
  const int code = exit_code(child.wait_for(kExitGrace));
  if (code == 3) throw ProtocolError("runner reported a protocol violation" + diagnostics(io));
  return results;
}

}  // namespace wrangle
