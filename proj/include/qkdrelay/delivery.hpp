#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <utility>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "qkdrelay/qkdsim.hpp"

namespace qkdrelay::delivery {

// Line-delimited JSON key delivery shaped after ETSI GS QKD 014.
//
//   {"verb":"STATUS"}
//   {"verb":"ENC_KEYS","number":1,"size":256}
//   {"verb":"DEC_KEYS","key_ids":["..."]}
//
// Optional "node" selects the answering endpoint (defaults to the service's
// node) and "peer" the pool shared with that peer (defaults to the only one).
// Replies are {"keys":[{"key_ID":uuid,"key":base64}]}, a status object, or
// {"error":<ErrorCode name>,"message":...}.
class KeyDeliveryService {
 public:
  explicit KeyDeliveryService(std::string default_node) : default_node_(std::move(default_node)) {}

  // The pool must outlive the service.
  void add_pool(qkdsim::KeyPool& pool);
  const std::string& default_node() const noexcept { return default_node_; }

  std::string handle(std::string_view request_line);

 private:
  qkdsim::KeyPool& select(const std::string& node, const std::string* peer);

  std::string default_node_;
  std::vector<qkdsim::KeyPool*> pools_;
  std::mutex mutex_;
};

// Blocking TCP front end: one request line in, one response line out.
class KeyDeliveryServer {
 public:
  // Binds immediately; throws AddressInUse when the address is taken.
  // Port 0 picks an ephemeral port.
  KeyDeliveryServer(KeyDeliveryService& service, const std::string& host, std::uint16_t port);
  ~KeyDeliveryServer();
  KeyDeliveryServer(const KeyDeliveryServer&) = delete;
  KeyDeliveryServer& operator=(const KeyDeliveryServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }

  // Serves until stop() is called.
  void run();
  void start();  // run() on a background thread
  void stop();

 private:
  void serve_client(int fd);

  KeyDeliveryService& service_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
  std::mutex clients_mutex_;
  std::vector<std::thread> clients_;
  std::vector<int> open_fds_;
};

// Splits "host:port".
std::pair<std::string, std::uint16_t> parse_address(std::string_view addr);

// Minimal blocking client used by tests and the CLI: sends one line and
// returns the reply line.
class KeyDeliveryClient {
 public:
  KeyDeliveryClient(const std::string& host, std::uint16_t port);
  ~KeyDeliveryClient();
  KeyDeliveryClient(const KeyDeliveryClient&) = delete;
  KeyDeliveryClient& operator=(const KeyDeliveryClient&) = delete;

  std::string request(std::string_view line);

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace qkdrelay::delivery
