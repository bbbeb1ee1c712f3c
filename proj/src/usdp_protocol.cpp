#include "usddps/usdp_protocol.hpp"

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <sys/un.h>
#include <unistd.h>
#include <fcntl.h>

#include <cerrno>
#include <cstring>

namespace usddps::usdp {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[at + i];
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[at + i];
  return v;
}

std::vector<std::uint8_t> frame(MessageType type, std::size_t payload_size) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + payload_size);
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(type));
  put_u32(out, static_cast<std::uint32_t>(payload_size));
  return out;
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
  put_u32(out, static_cast<std::uint32_t>(values.size()));
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

// Parses "L u32 | L x f32" starting at payload offset `at`.
std::vector<float> get_floats(std::span<const std::uint8_t> payload, std::size_t at) {
  if (payload.size() < at + 4)
    throw ProtocolError("payload too short for sample count", kHeaderSize + payload.size());
  const std::uint32_t n = get_u32(payload, at);
  at += 4;
  if (payload.size() - at != static_cast<std::size_t>(n) * 4)
    throw ProtocolError("sample count " + std::to_string(n) +
                            " does not match payload size " +
                            std::to_string(payload.size()),
                        kHeaderSize + at - 4);
  std::vector<float> out(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t bits = get_u32(payload, at + 4 * i);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

[[noreturn]] void throw_errno(const std::string& what) {
  const int err = errno;
  if (err == EAGAIN || err == EWOULDBLOCK || err == ETIMEDOUT)
    throw TimeoutError(what + ": timed out");
  throw TransportError(what + ": " + std::strerror(err));
}

}  // namespace

std::vector<std::uint8_t> encode_request(double sigma, std::span<const float> samples) {
  auto out = frame(MessageType::kRequest, 12 + 4 * samples.size());
  std::uint64_t bits;
  std::memcpy(&bits, &sigma, 8);
  put_u64(out, bits);
  put_floats(out, samples);
  return out;
}

std::vector<std::uint8_t> encode_response(std::span<const float> score) {
  auto out = frame(MessageType::kResponse, 4 + 4 * score.size());
  put_floats(out, score);
  return out;
}

std::vector<std::uint8_t> encode_error(std::string_view message) {
  auto out = frame(MessageType::kError, message.size());
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

FrameHeader decode_header(std::span<const std::uint8_t> header) {
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= header.size()) throw ProtocolError("truncated frame header", i);
    if (header[i] != static_cast<std::uint8_t>(kMagic[i]))
      throw ProtocolError("bad magic", i);
  }
  if (header.size() < kHeaderSize)
    throw ProtocolError("truncated frame header", header.size());
  if (header[4] != kVersion)
    throw ProtocolError("unsupported version " + std::to_string(header[4]), 4);
  const std::uint8_t type = header[5];
  if (type < 1 || type > 3)
    throw ProtocolError("unknown message type " + std::to_string(type), 5);
  const std::uint32_t length = get_u32(header, 6);
  if (length > kMaxPayload)
    throw ProtocolError("payload length " + std::to_string(length) + " too large", 6);
  return {static_cast<MessageType>(type), length};
}

ScoreRequest decode_request(std::span<const std::uint8_t> payload) {
  if (payload.size() < 12)
    throw ProtocolError("request payload too short", kHeaderSize + payload.size());
  const std::uint64_t bits = get_u64(payload, 0);
  ScoreRequest req;
  std::memcpy(&req.sigma, &bits, 8);
  req.samples = get_floats(payload, 8);
  return req;
}

std::vector<float> decode_response(std::span<const std::uint8_t> payload) {
  return get_floats(payload, 0);
}

std::string decode_error(std::span<const std::uint8_t> payload) {
  return std::string(payload.begin(), payload.end());
}

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (text.find('/') == std::string::npos && colon != std::string::npos &&
      colon > 0 && colon + 1 < text.size()) {
    const std::string port = text.substr(colon + 1);
    if (port.find_first_not_of("0123456789") == std::string::npos) {
      Endpoint e{Kind::kTcp, text.substr(0, colon), std::stoi(port), {}};
      if (e.port <= 0 || e.port > 65535)
        throw InvalidInput("endpoint port out of range: " + text);
      return e;
    }
  }
  if (text.empty()) throw InvalidInput("empty score endpoint");
  return Endpoint{Kind::kUnix, {}, 0, text};
}

std::string Endpoint::to_string() const {
  return kind == Kind::kTcp ? host + ":" + std::to_string(port) : path;
}

Socket::~Socket() { close(); }

Socket::Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::set_timeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

namespace {

// Non-blocking connect bounded by `timeout`, then back to blocking mode.
void connect_with_timeout(int fd, const sockaddr* addr, socklen_t len,
                          std::chrono::milliseconds timeout, const std::string& name) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  if (::connect(fd, addr, len) != 0) {
    if (errno != EINPROGRESS) throw_errno("connect to " + name);
    pollfd p{fd, POLLOUT, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (ready == 0) throw TimeoutError("connect to " + name + ": timed out");
    if (ready < 0) throw_errno("connect to " + name);
    int err = 0;
    socklen_t err_len = sizeof err;
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &err_len);
    if (err != 0) {
      errno = err;
      throw_errno("connect to " + name);
    }
  }
  ::fcntl(fd, F_SETFL, flags);
}

}  // namespace

Socket Socket::connect(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  const std::string name = endpoint.to_string();
  if (endpoint.kind == Endpoint::Kind::kUnix) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (endpoint.path.size() >= sizeof addr.sun_path)
      throw InvalidInput("socket path too long: " + endpoint.path);
    std::strncpy(addr.sun_path, endpoint.path.c_str(), sizeof addr.sun_path - 1);
    Socket s(::socket(AF_UNIX, SOCK_STREAM, 0));
    if (!s.valid()) throw_errno("socket");
    connect_with_timeout(s.fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr,
                         timeout, name);
    s.set_timeout(timeout);
    return s;
  }
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(endpoint.host.c_str(),
                               std::to_string(endpoint.port).c_str(), &hints, &res);
  if (rc != 0) throw TransportError("resolve " + name + ": " + ::gai_strerror(rc));
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    try {
      connect_with_timeout(s.fd_, ai->ai_addr, ai->ai_addrlen, timeout, name);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    ::freeaddrinfo(res);
    s.set_timeout(timeout);
    return s;
  }
  ::freeaddrinfo(res);
  throw TransportError(last_error);
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

void Socket::recv_exact(std::span<std::uint8_t> bytes) {
  std::size_t got = 0;
  while (got < bytes.size()) {
    const ssize_t n = ::recv(fd_, bytes.data() + got, bytes.size() - got, 0);
    if (n == 0) throw TransportError("connection closed by peer");
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("recv");
    }
    got += static_cast<std::size_t>(n);
  }
}

Frame read_frame(Socket& socket) {
  std::uint8_t header[kHeaderSize];
  socket.recv_exact(header);
  Frame f{decode_header(header), {}};
  f.payload.resize(f.header.payload_length);
  socket.recv_exact(f.payload);
  return f;
}

}  // namespace usddps::usdp
