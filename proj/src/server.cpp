#include "arbench/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

namespace arbench {

struct Server::Connection {
  ClientId id = 0;
  int fd = -1;
  std::mutex write_mutex;
  std::atomic<bool> open{true};
};

namespace {

sockaddr_in resolve_ipv4(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &result); rc != 0 || result == nullptr) {
    throw Error("cannot resolve host '" + host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, result->ai_addr, sizeof(addr));
  ::freeaddrinfo(result);
  addr.sin_port = htons(port);
  return addr;
}

}  // namespace

Server::Server(Session session, ServerOptions options) : session_(std::move(session)), options_(std::move(options)) {}

Server::~Server() { stop(); }

void Server::start() {
  if (running_) return;
  const sockaddr_in addr = resolve_ipv4(options_.host, options_.port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string reason = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error("cannot listen on " + options_.host + ":" + std::to_string(options_.port) + ": " + reason);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);

  running_ = true;
  simulation_thread_ = std::thread([this] { simulation_loop(); });
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  if (simulation_thread_.joinable()) simulation_thread_.join();
  if (accept_thread_.joinable()) accept_thread_.join();
  {
    std::lock_guard<std::mutex> lock(session_mutex_);
    deliver({{std::nullopt, session_.state()}});
  }
  std::vector<std::thread> readers;
  {
    std::lock_guard<std::mutex> lock(connections_mutex_);
    for (auto& [id, c] : connections_) ::shutdown(c->fd, SHUT_RDWR);
    readers.swap(reader_threads_);
  }
  for (auto& t : readers) t.join();
  {
    std::lock_guard<std::mutex> lock(connections_mutex_);
    for (auto& [id, c] : connections_) ::close(c->fd);
    connections_.clear();
  }
  ::close(listen_fd_);
  listen_fd_ = -1;
}

wire::State Server::state() const {
  std::lock_guard<std::mutex> lock(session_mutex_);
  return session_.state();
}

Workspace Server::workspace() const {
  std::lock_guard<std::mutex> lock(session_mutex_);
  return session_.workspace();
}

void Server::accept_loop() {
  while (running_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof(yes));
    timeval send_timeout{1, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &send_timeout, sizeof(send_timeout));

    auto connection = std::make_shared<Connection>();
    connection->fd = fd;
    {
      std::lock_guard<std::mutex> lock(connections_mutex_);
      connection->id = next_client_++;
      connections_[connection->id] = connection;
    }
    {
      std::lock_guard<std::mutex> lock(session_mutex_);
      session_.connect(connection->id);
    }
    std::lock_guard<std::mutex> lock(connections_mutex_);
    reader_threads_.emplace_back([this, connection] { read_loop(connection); });
  }
}

void Server::read_loop(std::shared_ptr<Connection> connection) {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(connection->fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    std::vector<Inbound> lines;
    for (auto nl = buffer.find('\n', start); nl != std::string::npos; nl = buffer.find('\n', start)) {
      std::string line = buffer.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lines.push_back({connection->id, std::move(line)});
      start = nl + 1;
    }
    buffer.erase(0, start);
    if (!lines.empty()) {
      std::lock_guard<std::mutex> lock(inbound_mutex_);
      for (auto& l : lines) inbound_.push_back(std::move(l));
    }
  }
  connection->open = false;
  std::lock_guard<std::mutex> lock(inbound_mutex_);
  inbound_.push_back({connection->id, {}, true});
}

void Server::send_to(Connection& connection, const std::string& line) {
  if (!connection.open) return;
  std::lock_guard<std::mutex> lock(connection.write_mutex);
  const char* data = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::send(connection.fd, data, left, MSG_NOSIGNAL);
    if (n <= 0) {
      connection.open = false;
      ::shutdown(connection.fd, SHUT_RDWR);
      return;
    }
    data += n;
    left -= static_cast<std::size_t>(n);
  }
}

void Server::deliver(const std::vector<Outgoing>& messages) {
  if (messages.empty()) return;
  std::vector<std::shared_ptr<Connection>> targets;
  {
    std::lock_guard<std::mutex> lock(connections_mutex_);
    for (const auto& [id, c] : connections_) targets.push_back(c);
  }
  for (const auto& m : messages) {
    const std::string line = wire::encode(m.message) + "\n";
    for (const auto& c : targets) {
      if (!m.to || *m.to == c->id) send_to(*c, line);
    }
  }
}

void Server::simulation_loop() {
  using Clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(session_.tick_period()));
  auto next = Clock::now();
  while (running_) {
    std::vector<Inbound> batch;
    {
      std::lock_guard<std::mutex> lock(inbound_mutex_);
      batch.swap(inbound_);
    }
    {
      std::lock_guard<std::mutex> lock(session_mutex_);
      for (const auto& in : batch) {
        if (in.disconnected) {
          session_.disconnect(in.client);
          std::lock_guard<std::mutex> clock(connections_mutex_);
          if (auto it = connections_.find(in.client); it != connections_.end()) {
            ::close(it->second->fd);
            connections_.erase(it);
          }
          continue;
        }
        deliver(session_.handle_line(in.client, in.line));
      }
      deliver(session_.tick());
    }
    if (options_.realtime) {
      next += period;
      const auto now = Clock::now();
      if (next < now - 10 * period) next = now;  // fell far behind; do not burst
      std::this_thread::sleep_until(next);
    }
  }
}

}  // namespace arbench
