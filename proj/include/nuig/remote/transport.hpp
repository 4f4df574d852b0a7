#pragma once

#include <chrono>
#include <csignal>
#include <cstring>
#include <memory>
#include <string>
#include <string_view>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "nuig/error.hpp"

namespace nuig::remote {

/// Bidirectional line channel. Lines are sent and received without the
/// trailing newline.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(std::string_view line) = 0;
  virtual std::string receive_line(std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

namespace detail {

[[noreturn]] inline void transport_fail(const std::string& what) {
  fail(ErrorKind::transport, what + (errno ? std::string(": ") + std::strerror(errno) : std::string()));
}

/// Buffered newline reader over a file descriptor with a poll timeout.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  std::string read_line(std::chrono::milliseconds timeout, const std::string& peer) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        errno = 0;
        transport_fail("timed out waiting for " + peer);
      }
      pollfd p{fd_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        transport_fail("poll failed on " + peer);
      }
      if (rc == 0) continue;
      char chunk[4096];
      const ssize_t got = ::read(fd_, chunk, sizeof chunk);
      if (got < 0) {
        if (errno == EINTR) continue;
        transport_fail("read failed on " + peer);
      }
      if (got == 0) {
        errno = 0;
        transport_fail(peer + " closed the connection");
      }
      buffer_.append(chunk, static_cast<std::size_t>(got));
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

inline void write_all(int fd, std::string_view data, bool socket, const std::string& peer) {
  while (!data.empty()) {
    const ssize_t n = socket ? ::send(fd, data.data(), data.size(), MSG_NOSIGNAL) : ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      transport_fail("write failed on " + peer);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace detail

/// Runs `/bin/sh -c command` and talks to it over its standard streams.
/// SIGPIPE is ignored process-wide once a child transport is created so a
/// dead provider surfaces as a transport error instead of killing the engine.
class ChildProcessTransport final : public Transport {
 public:
  explicit ChildProcessTransport(std::string command) : command_(std::move(command)) {
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) detail::transport_fail("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      detail::transport_fail("pipe failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) detail::transport_fail("fork failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    reader_ = std::make_unique<detail::LineReader>(read_fd_);
  }

  ChildProcessTransport(const ChildProcessTransport&) = delete;
  ChildProcessTransport& operator=(const ChildProcessTransport&) = delete;

  ~ChildProcessTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    // give the provider a moment to exit on EOF, then kill it
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    int status = 0;
    while (::waitpid(pid_, &status, WNOHANG) == 0) {
      if (std::chrono::steady_clock::now() > deadline) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        break;
      }
      ::usleep(1000);
    }
    if (read_fd_ >= 0) ::close(read_fd_);
  }

  void send_line(std::string_view line) override {
    std::string framed(line);
    framed += '\n';
    detail::write_all(write_fd_, framed, false, describe());
  }

  std::string receive_line(std::chrono::milliseconds timeout) override {
    return reader_->read_line(timeout, describe());
  }

  std::string describe() const override { return "provider process '" + command_ + "'"; }

 private:
  std::string command_;
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::unique_ptr<detail::LineReader> reader_;
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(std::string host, std::string port) : host_(std::move(host)), port_(std::move(port)) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    if (const int rc = ::getaddrinfo(host_.c_str(), port_.c_str(), &hints, &found); rc != 0) {
      errno = 0;
      detail::transport_fail("cannot resolve " + describe() + ": " + ::gai_strerror(rc));
    }
    for (addrinfo* a = found; a; a = a->ai_next) {
      fd_ = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
      if (fd_ < 0) continue;
      if (::connect(fd_, a->ai_addr, a->ai_addrlen) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(found);
    if (fd_ < 0) detail::transport_fail("cannot connect to " + describe());
    reader_ = std::make_unique<detail::LineReader>(fd_);
  }

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send_line(std::string_view line) override {
    std::string framed(line);
    framed += '\n';
    detail::write_all(fd_, framed, true, describe());
  }

  std::string receive_line(std::chrono::milliseconds timeout) override {
    return reader_->read_line(timeout, describe());
  }

  std::string describe() const override { return "tcp provider " + host_ + ":" + port_; }

 private:
  std::string host_, port_;
  int fd_ = -1;
  std::unique_ptr<detail::LineReader> reader_;
};

/// Parses "stdio:<command>" or "tcp:<host>:<port>".
inline std::unique_ptr<Transport> open_transport(std::string_view endpoint) {
  if (endpoint.starts_with("stdio:")) {
    const auto cmd = endpoint.substr(6);
    if (cmd.empty()) fail(ErrorKind::config, "stdio endpoint needs a command");
    return std::make_unique<ChildProcessTransport>(std::string(cmd));
  }
  if (endpoint.starts_with("tcp:")) {
    const auto rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == rest.size()) {
      fail(ErrorKind::config, "tcp endpoint must be tcp:<host>:<port>");
    }
    return std::make_unique<TcpTransport>(std::string(rest.substr(0, colon)), std::string(rest.substr(colon + 1)));
  }
  fail(ErrorKind::config, "unknown endpoint '" + std::string(endpoint) + "' (expected stdio:<cmd> or tcp:<host>:<port>)");
}

}  // namespace nuig::remote
