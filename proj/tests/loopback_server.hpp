#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <functional>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "usddps/usdp_protocol.hpp"

namespace testing {

// Single-threaded USDP peer on 127.0.0.1 for client tests. The handler maps
// each received frame to the raw bytes to send back; nullopt closes the
// connection without answering.
class LoopbackServer {
 public:
  using Handler =
      std::function<std::optional<std::vector<std::uint8_t>>(const usddps::usdp::Frame&)>;

  explicit LoopbackServer(Handler handler) : handler_(std::move(handler)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd_, 8) != 0)
      throw std::runtime_error("bind/listen");
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { run(); });
  }

  ~LoopbackServer() {
    stop_ = true;
    thread_.join();
    ::close(listen_fd_);
  }

  int port() const { return port_; }
  usddps::usdp::Endpoint endpoint() const {
    return usddps::usdp::Endpoint::parse("127.0.0.1:" + std::to_string(port_));
  }
  int connections() const { return connections_; }
  int requests() const { return requests_; }

 private:
  bool wait_readable(int fd) {
    while (!stop_) {
      pollfd p{fd, POLLIN, 0};
      if (::poll(&p, 1, 20) > 0) return true;
    }
    return false;
  }

  void run() {
    while (wait_readable(listen_fd_)) {
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      ++connections_;
      usddps::usdp::Socket conn(fd);
      try {
        while (wait_readable(fd)) {
          const usddps::usdp::Frame f = usddps::usdp::read_frame(conn);
          ++requests_;
          const auto reply = handler_(f);
          if (!reply) break;
          conn.send_all(*reply);
        }
      } catch (const std::exception&) {
      }
    }
  }

  Handler handler_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<int> connections_{0};
  std::atomic<int> requests_{0};
  std::thread thread_;
};

// Replies with score = -x, bit-exact in float.
inline std::optional<std::vector<std::uint8_t>> echo_negated(const usddps::usdp::Frame& f) {
  auto req = usddps::usdp::decode_request(f.payload);
  for (float& v : req.samples) v = -v;
  return usddps::usdp::encode_response(req.samples);
}

}  // namespace testing
