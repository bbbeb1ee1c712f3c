#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "usddps/errors.hpp"

// USDP: length-prefixed binary framing for remote score evaluation.
//
//   frame    = "USDP" | version u8 (=1) | type u8 | payload length u32 LE | payload
//   request  = sigma f64 LE | L u32 LE | L x f32 LE          (type 1)
//   response = L u32 LE | L x f32 LE                          (type 2)
//   error    = UTF-8 message                                  (type 3)
namespace usddps::usdp {

inline constexpr char kMagic[4] = {'U', 'S', 'D', 'P'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

enum class MessageType : std::uint8_t { kRequest = 1, kResponse = 2, kError = 3 };

// Malformed bytes. offset() is relative to the start of the frame.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::size_t offset)
      : Error(what + " at frame byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Connection could not be established or was lost.
class TransportError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

// The peer answered with an error frame.
class ServerError : public Error {
 public:
  using Error::Error;
};

struct FrameHeader {
  MessageType type;
  std::uint32_t payload_length;
};

struct ScoreRequest {
  double sigma;
  std::vector<float> samples;
};

std::vector<std::uint8_t> encode_request(double sigma, std::span<const float> samples);
std::vector<std::uint8_t> encode_response(std::span<const float> score);
std::vector<std::uint8_t> encode_error(std::string_view message);

FrameHeader decode_header(std::span<const std::uint8_t> header);
ScoreRequest decode_request(std::span<const std::uint8_t> payload);
std::vector<float> decode_response(std::span<const std::uint8_t> payload);
std::string decode_error(std::span<const std::uint8_t> payload);

// Endpoint: "host:port" for TCP, otherwise a filesystem socket path.
struct Endpoint {
  enum class Kind { kTcp, kUnix } kind;
  std::string host;
  int port = 0;
  std::string path;

  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

// Blocking stream socket with per-operation timeouts.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept;
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void close();
  void set_timeout(std::chrono::milliseconds timeout);
  void send_all(std::span<const std::uint8_t> bytes);
  void recv_exact(std::span<std::uint8_t> bytes);

 private:
  int fd_ = -1;
};

struct Frame {
  FrameHeader header;
  std::vector<std::uint8_t> payload;
};

// Reads one complete frame; ProtocolError for bad headers, TransportError if
// the stream ends early.
Frame read_frame(Socket& socket);

}  // namespace usddps::usdp
