#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "arbench/session.hpp"

namespace arbench {

struct ServerOptions {
  std::string host = "127.0.0.1";
  /// 0 picks an ephemeral port; see Server::port().
  std::uint16_t port = 7878;
  /// Pace ticks against the wall clock. Disabled, the loop runs as fast as it can.
  bool realtime = true;
};

/// TCP front end of a Session: one reader thread per client feeds an inbound
/// queue, and a single simulation thread owns the session, applies queued
/// messages, ticks, and fans replies and state out to the clients.
class Server {
 public:
  Server(Session session, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts the threads; throws Error on bind failure.
  void start();
  /// Broadcasts a final state, closes every connection and joins the threads.
  void stop();
  bool running() const { return running_; }
  std::uint16_t port() const { return port_; }

  /// Snapshot of the session taken under the loop's lock.
  wire::State state() const;
  Workspace workspace() const;

 private:
  struct Connection;
  struct Inbound {
    ClientId client;
    std::string line;
    bool disconnected = false;
  };

  void accept_loop();
  void read_loop(std::shared_ptr<Connection> connection);
  void simulation_loop();
  void deliver(const std::vector<Outgoing>& messages);
  void send_to(Connection& connection, const std::string& line);

  mutable std::mutex session_mutex_;
  Session session_;
  ServerOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};

  std::mutex connections_mutex_;
  std::map<ClientId, std::shared_ptr<Connection>> connections_;
  ClientId next_client_ = 1;

  std::mutex inbound_mutex_;
  std::vector<Inbound> inbound_;

  std::thread accept_thread_;
  std::thread simulation_thread_;
  std::vector<std::thread> reader_threads_;
};

}  // namespace arbench
