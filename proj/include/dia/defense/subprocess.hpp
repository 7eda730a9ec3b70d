// Copyright 2026 The DIA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include "dia/defense/detector.hpp"
#include "dia/defense/protocol.hpp"

namespace dia {

struct SubprocessOptions {
  std::vector<std::string> argv;
  double timeout_s = 10.0;
};

// A detector plugin running as a child process. The child's stdin and stdout
// are both bound to one end of a socketpair. Calls are serialized; after a
// timeout or crash the channel is broken and every later call fails.
class SubprocessDetector : public DetectorChannel {
 public:
  explicit SubprocessDetector(SubprocessOptions options)
      : options_(std::move(options)) {
    if (options_.argv.empty()) {
      throw ValidationError("detector", "empty detector command");
    }
    Spawn();
    try {
      std::lock_guard lock(mu_);
      detector_id_ =
          protocol::ParseHelloResponse(Exchange(protocol::EncodeHello()));
    } catch (...) {
      Shutdown();
      throw;
    }
  }

  ~SubprocessDetector() override { Shutdown(); }

  SubprocessDetector(const SubprocessDetector&) = delete;
  SubprocessDetector& operator=(const SubprocessDetector&) = delete;

  const std::string& detector_id() const override { return detector_id_; }

  DetectorScore Score(const ProbeImage& probe) override {
    std::lock_guard lock(mu_);
    std::string line =
        Exchange(protocol::EncodeScoreRequest(probe.probe_id, probe.uri));
    return protocol::ParseScoreResponse(line, probe.probe_id, detector_id_);
  }

 private:
  void Spawn() {
    int fds[2];
    if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
      throw DetectorError(DetectorErrorKind::kCrash, "socketpair failed");
    }
    std::vector<char*> args;
    for (auto& a : options_.argv) args.push_back(a.data());
    args.push_back(nullptr);
    pid_ = fork();
    if (pid_ < 0) {
      close(fds[0]);
      close(fds[1]);
      throw DetectorError(DetectorErrorKind::kCrash, "fork failed");
    }
    if (pid_ == 0) {
      dup2(fds[1], STDIN_FILENO);
      dup2(fds[1], STDOUT_FILENO);
      close(fds[0]);
      close(fds[1]);
      execvp(args[0], args.data());
      _exit(127);
    }
    close(fds[1]);
    fd_ = fds[0];
  }

  void Fail(DetectorErrorKind kind, const std::string& message) {
    broken_ = true;
    throw DetectorError(kind, options_.argv[0] + ": " + message);
  }

  std::string Exchange(const std::string& request) {
    if (broken_) {
      throw DetectorError(DetectorErrorKind::kCrash,
                          options_.argv[0] + ": channel is broken");
    }
    std::string out = request + "\n";
    std::size_t sent = 0;
    while (sent < out.size()) {
      ssize_t n = send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) Fail(DetectorErrorKind::kCrash, "write failed");
      sent += static_cast<std::size_t>(n);
    }
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration<double>(options_.timeout_s);
    while (true) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) Fail(DetectorErrorKind::kTimeout, "no response");
      pollfd p{fd_, POLLIN, 0};
      int rc = poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc == 0) Fail(DetectorErrorKind::kTimeout, "no response");
      char chunk[4096];
      ssize_t n = recv(fd_, chunk, sizeof(chunk), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) Fail(DetectorErrorKind::kCrash, "detector exited");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void Shutdown() {
    if (fd_ >= 0) {
      shutdown(fd_, SHUT_WR);
      close(fd_);
      fd_ = -1;
    }
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          return;
        }
        usleep(10000);
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  SubprocessOptions options_;
  std::string detector_id_;
  std::mutex mu_;
  pid_t pid_ = -1;
  int fd_ = -1;
  bool broken_ = false;
  std::string buffer_;
};

}  // namespace dia
