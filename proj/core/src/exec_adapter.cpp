// NDJSON adapter over a child process's stdin/stdout (POSIX).

#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "vqashap/adapter.hpp"
#include "vqashap/errors.hpp"

namespace vqashap {

namespace {

using Clock = std::chrono::steady_clock;

class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  // nullopt on end of stream; throws kTimeout when the deadline passes.
  std::optional<std::string> read_line(std::optional<Clock::time_point> deadline) {
    for (;;) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      if (eof_) return std::nullopt;
      int timeout_ms = -1;
      if (deadline) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            *deadline - Clock::now());
        if (left.count() <= 0) {
          throw Error(ErrorCode::kTimeout, "adapter did not answer in time");
        }
        timeout_ms = static_cast<int>(left.count());
      }
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, timeout_ms);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kIo, "poll on adapter pipe failed");
      }
      if (ready == 0) continue;  // re-check the deadline
      char chunk[4096];
      const ssize_t n = ::read(fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kIo, "read from adapter failed");
      }
      if (n == 0) {
        eof_ = true;
        if (!buffer_.empty()) {
          std::string line = std::move(buffer_);
          buffer_.clear();
          return line;
        }
        return std::nullopt;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
  bool eof_ = false;
};

class ExecAdapter final : public Adapter {
 public:
  ExecAdapter(const std::string& command, const AdapterOptions& options)
      : options_(options) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
      throw Error(ErrorCode::kIo, "cannot create adapter pipes");
    }
    pid_ = ::fork();
    if (pid_ < 0) throw Error(ErrorCode::kIo, "cannot fork adapter process");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      const std::string shell_command = "exec " + command;
      ::execl("/bin/sh", "sh", "-c", shell_command.c_str(),
              static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    reader_.emplace(read_fd_);
  }

  ~ExecAdapter() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    // Give the child a moment to exit on EOF before killing it.
    int status = 0;
    bool reaped = false;
    for (int i = 0; i < 100 && !reaped; ++i) {
      reaped = ::waitpid(pid_, &status, WNOHANG) == pid_;
      if (!reaped) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!reaped) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    if (reader_thread_.joinable()) reader_thread_.join();
    ::close(read_fd_);
  }

  AdapterHandshake handshake() override {
    std::lock_guard lock(handshake_mutex_);
    if (caps_) return *caps_;
    write_line(encode_hello());
    auto line = reader_->read_line(Clock::now() + options_.handshake_timeout);
    if (!line) {
      throw Error(ErrorCode::kProtocol, "adapter exited before the handshake");
    }
    caps_ = parse_capabilities(*line);
    reader_thread_ = std::thread([this] { read_loop(); });
    return *caps_;
  }

  EvaluateResponse evaluate(const EvaluateRequest& request) override {
    if (!caps_) handshake();
    std::future<EvaluateResponse> future;
    {
      std::lock_guard lock(pending_mutex_);
      if (closed_) throw Error(ErrorCode::kProtocol, closed_reason_);
      auto [it, inserted] = pending_.try_emplace(request.request_id);
      if (!inserted) {
        throw Error(ErrorCode::kProtocol,
                    "duplicate in-flight request id " + request.request_id);
      }
      future = it->second.get_future();
    }
    write_line(encode_request(request));
    if (future.wait_for(options_.request_timeout) != std::future_status::ready) {
      std::lock_guard lock(pending_mutex_);
      pending_.erase(request.request_id);
      throw Error(ErrorCode::kTimeout,
                  "adapter did not answer request " + request.request_id);
    }
    return future.get();
  }

 private:
  void write_line(const std::string& line) {
    std::lock_guard lock(write_mutex_);
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kIo, "adapter process closed its input");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void read_loop() {
    std::string reason = "adapter process exited";
    try {
      while (auto line = reader_->read_line(std::nullopt)) {
        if (line->empty()) continue;
        EvaluateResponse response = parse_response(*line);
        std::lock_guard lock(pending_mutex_);
        auto it = pending_.find(response.request_id);
        if (it == pending_.end()) continue;  // timed out earlier
        it->second.set_value(std::move(response));
        pending_.erase(it);
      }
    } catch (const std::exception& e) {
      reason = std::string("adapter stream broken: ") + e.what();
    }
    std::lock_guard lock(pending_mutex_);
    closed_ = true;
    closed_reason_ = reason;
    for (auto& [id, promise] : pending_) {
      promise.set_exception(
          std::make_exception_ptr(Error(ErrorCode::kProtocol, reason)));
    }
    pending_.clear();
  }

  AdapterOptions options_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::optional<LineReader> reader_;
  std::thread reader_thread_;

  std::mutex handshake_mutex_;
  std::optional<AdapterHandshake> caps_;
  std::mutex write_mutex_;
  std::mutex pending_mutex_;
  std::map<std::string, std::promise<EvaluateResponse>> pending_;
  bool closed_ = false;
  std::string closed_reason_;
};

}  // namespace

std::unique_ptr<Adapter> make_exec_adapter(const std::string& command,
                                           const AdapterOptions& options) {
  return std::make_unique<ExecAdapter>(command, options);
}

}  // namespace vqashap
