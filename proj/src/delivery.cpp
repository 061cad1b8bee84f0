#include "qkdrelay/delivery.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <json.hpp>

#include "qkdrelay/encoding.hpp"
#include "qkdrelay/error.hpp"

namespace qkdrelay::delivery {

using nlohmann::json;

namespace {

json keys_reply(const std::vector<qkdsim::DeliveredKey>& keys) {
  json arr = json::array();
  for (const auto& k : keys) {
    arr.push_back({{"key_ID", k.key_id}, {"key", encoding::base64_encode(k.key.bytes())}});
  }
  return {{"keys", arr}};
}

json error_reply(std::string_view code, const std::string& message) {
  return {{"error", std::string(code)}, {"message", message}};
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = (host == "localhost") ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::InvalidArgument, "cannot parse IPv4 address '" + host + "'");
  }
  return addr;
}

}  // namespace

void KeyDeliveryService::add_pool(qkdsim::KeyPool& pool) {
  std::lock_guard lock(mutex_);
  pools_.push_back(&pool);
}

qkdsim::KeyPool& KeyDeliveryService::select(const std::string& node, const std::string* peer) {
  qkdsim::KeyPool* found = nullptr;
  for (auto* pool : pools_) {
    if (!pool->has_endpoint(node)) continue;
    if (peer != nullptr && pool->peer_of(node) != *peer) continue;
    if (found != nullptr) {
      throw Error(ErrorCode::InvalidArgument, "node '" + node + "' has several peers; name one with \"peer\"");
    }
    found = pool;
  }
  if (found == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "no key store for node '" + node + "'" +
                                                (peer != nullptr ? " and peer '" + *peer + "'" : std::string()));
  }
  return *found;
}

std::string KeyDeliveryService::handle(std::string_view request_line) {
  json reply;
  try {
    const auto req = json::parse(request_line);
    const auto verb = req.at("verb").get<std::string>();
    const auto node = req.value("node", default_node_);
    std::string peer;
    const bool has_peer = req.contains("peer");
    if (has_peer) peer = req.at("peer").get<std::string>();

    std::lock_guard lock(mutex_);
    auto& pool = select(node, has_peer ? &peer : nullptr);
    if (verb == "STATUS") {
      const auto st = pool.status(node);
      reply = {{"source_KME_ID", node},
               {"target_KME_ID", pool.peer_of(node)},
               {"stored_key_count", st.stored_key_count},
               {"key_size_bits", st.key_size_bits},
               {"capacity", st.capacity}};
    } else if (verb == "ENC_KEYS") {
      const auto number = req.value("number", std::size_t{1});
      const auto size = req.value("size", qkdsim::kBlockBits);
      reply = keys_reply(pool.get_enc_keys(node, number, size));
    } else if (verb == "DEC_KEYS") {
      const auto ids = req.at("key_ids").get<std::vector<std::string>>();
      reply = keys_reply(pool.get_dec_keys(node, ids));
    } else {
      reply = error_reply("UnknownVerb", "unknown verb '" + verb + "'");
    }
  } catch (const Error& e) {
    reply = error_reply(to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    reply = error_reply("ParseError", e.what());
  }
  return reply.dump();
}

// --- server ------------------------------------------------------------------

KeyDeliveryServer::KeyDeliveryServer(KeyDeliveryService& service, const std::string& host, std::uint16_t port)
    : service_(service) {
  auto addr = resolve(host, port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int err = errno;
    ::close(listen_fd_);
    if (err == EADDRINUSE) {
      throw Error(ErrorCode::AddressInUse, host + ":" + std::to_string(port) + " is already in use");
    }
    throw std::runtime_error(std::string("bind: ") + std::strerror(err));
  }
  if (::listen(listen_fd_, 16) != 0) {
    ::close(listen_fd_);
    throw std::runtime_error(std::string("listen: ") + std::strerror(errno));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

KeyDeliveryServer::~KeyDeliveryServer() { stop(); }

void KeyDeliveryServer::run() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    std::lock_guard lock(clients_mutex_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    clients_.emplace_back([this, fd] { serve_client(fd); });
  }
}

void KeyDeliveryServer::start() {
  thread_ = std::thread([this] { run(); });
}

void KeyDeliveryServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (thread_.joinable()) thread_.join();
  std::vector<std::thread> clients;
  {
    std::lock_guard lock(clients_mutex_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    clients.swap(clients_);
  }
  for (auto& t : clients) {
    if (t.joinable()) t.join();
  }
}

void KeyDeliveryServer::serve_client(int fd) {
  std::string buffer;
  char chunk[4096];
  while (true) {
    const auto n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    bool ok = true;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const auto line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (line.empty()) continue;
      ok = send_all(fd, service_.handle(line) + "\n");
      if (!ok) break;
    }
    if (!ok) break;
  }
  std::lock_guard lock(clients_mutex_);
  std::erase(open_fds_, fd);
  ::close(fd);
}

std::pair<std::string, std::uint16_t> parse_address(std::string_view addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "address must be HOST:PORT");
  const auto port_text = std::string(addr.substr(colon + 1));
  std::size_t used = 0;
  unsigned long port = 0;
  try {
    port = std::stoul(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port > 65535) throw Error(ErrorCode::InvalidArgument, "bad port in '" + std::string(addr) + "'");
  return {std::string(addr.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

// --- client ------------------------------------------------------------------

KeyDeliveryClient::KeyDeliveryClient(const std::string& host, std::uint16_t port) {
  auto addr = resolve(host, port);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0 || ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int err = errno;
    if (fd_ >= 0) ::close(fd_);
    throw std::runtime_error(std::string("connect: ") + std::strerror(err));
  }
}

KeyDeliveryClient::~KeyDeliveryClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string KeyDeliveryClient::request(std::string_view line) {
  std::string out(line);
  out += '\n';
  if (!send_all(fd_, out)) throw std::runtime_error("send failed");
  char chunk[4096];
  std::size_t nl;
  while ((nl = buffer_.find('\n')) == std::string::npos) {
    const auto n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n <= 0) throw std::runtime_error("connection closed before a reply arrived");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
  auto reply = buffer_.substr(0, nl);
  buffer_.erase(0, nl + 1);
  return reply;
}

}  // namespace qkdrelay::delivery
