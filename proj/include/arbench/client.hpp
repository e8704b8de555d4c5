#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "arbench/error.hpp"
#include "arbench/wire.hpp"

namespace arbench {

class ConnectError : public Error {
 public:
  using Error::Error;
};

/// Blocking line-oriented client for the robot server protocol.
class Client {
 public:
  static Client connect(const wire::Address& address, std::chrono::milliseconds timeout = std::chrono::seconds(2));

  Client(Client&& other) noexcept;
  Client& operator=(Client&& other) noexcept;
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;
  ~Client();

  void send(const wire::ClientMessage& message);
  void send_line(const std::string& line);
  /// Next server message, or nullopt on timeout. Throws ConnectError once the
  /// server has closed the connection and no buffered line remains.
  std::optional<wire::ServerMessage> receive(std::chrono::milliseconds timeout);
  std::optional<std::string> receive_line(std::chrono::milliseconds timeout);
  void close();

 private:
  explicit Client(int fd) : fd_(fd) {}
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace arbench
