#include "usddps/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "usddps/errors.hpp"

namespace usddps {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void seek(std::size_t p) { pos_ = p; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw IoError(std::string("truncated WAV file: expected ") + what, pos_);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = bytes_[pos_] | (bytes_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::string tag(const char* what) {
    need(4, what);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + 4);
    pos_ += 4;
    return s;
  }
  const unsigned char* data() const { return bytes_.data() + pos_; }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back(v >> 8);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

MultiChannelWaveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  Reader r(std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {}));

  if (r.tag("RIFF tag") != "RIFF") throw IoError("not a RIFF file", 0);
  r.u32("RIFF size");
  if (r.tag("WAVE tag") != "WAVE") throw IoError("RIFF type is not WAVE", 8);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    const std::size_t chunk_pos = r.pos();
    const std::string id = r.tag("chunk id");
    const std::uint32_t size = r.u32("chunk size");
    const std::size_t body = r.pos();
    if (id == "fmt ") {
      if (size < 16) throw IoError("fmt chunk too small", chunk_pos);
      format = r.u16("format tag");
      channels = r.u16("channel count");
      rate = r.u32("sample rate");
      r.u32("byte rate");
      r.u16("block align");
      bits = r.u16("bits per sample");
      if (format == kFormatExtensible) {
        if (size < 40) throw IoError("extensible fmt chunk too small", chunk_pos);
        r.u16("cbSize");
        r.u16("valid bits");
        r.u32("channel mask");
        format = r.u16("sub-format");
      }
      have_fmt = true;
      r.need(size, "fmt chunk body");
      r.seek(body + size + (size & 1));
    } else if (id == "data") {
      if (!have_fmt) throw IoError("data chunk before fmt chunk", chunk_pos);
      if (channels == 0) throw IoError("zero channels", chunk_pos);
      if (rate == 0) throw IoError("zero sample rate", chunk_pos);
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32)
        throw IoError("unsupported encoding (format " + std::to_string(format) +
                          ", " + std::to_string(bits) + " bits)",
                      chunk_pos);
      const std::size_t width = bits / 8;
      const std::size_t frame_bytes = width * channels;
      r.need(size, "data chunk body");
      if (size % frame_bytes != 0)
        throw IoError("data size is not a whole number of frames", chunk_pos + 4);
      const std::size_t frames = size / frame_bytes;
      if (frames == 0) throw IoError("no samples in data chunk", chunk_pos);
      RealMatrix samples(channels, static_cast<Eigen::Index>(frames));
      const unsigned char* p = r.data();
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < channels; ++c, p += width) {
          double v;
          if (pcm16) {
            std::int16_t s;
            std::memcpy(&s, p, 2);
            v = s / 32768.0;
          } else {
            float s;
            std::memcpy(&s, p, 4);
            v = s;
          }
          samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(f)) = v;
        }
      }
      return MultiChannelWaveform(std::move(samples), static_cast<int>(rate));
    } else {
      r.need(size, "chunk body");
      r.seek(body + size + (size & 1));
      if (r.remaining() == 0) throw IoError("no data chunk", r.pos());
    }
  }
}

void write_wav(const std::string& path, const MultiChannelWaveform& x,
               WavEncoding encoding) {
  const std::uint16_t channels = static_cast<std::uint16_t>(x.channels());
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint32_t frames = static_cast<std::uint32_t>(x.length());
  const std::uint32_t data_bytes = frames * channels * (bits / 8);

  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(x.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(x.sample_rate()) * channels * (bits / 8));
  put_u16(out, channels * (bits / 8));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  const RealMatrix& s = x.samples();
  for (Eigen::Index f = 0; f < x.length(); ++f) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      if (encoding == WavEncoding::kPcm16) {
        const double scaled = std::round(std::clamp(s(c, f), -1.0, 1.0) * 32768.0);
        const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put_u16(out, static_cast<std::uint16_t>(v));
      } else {
        const float v = static_cast<float>(s(c, f));
        std::uint32_t bits32;
        std::memcpy(&bits32, &v, 4);
        put_u32(out, bits32);
      }
    }
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write failed for " + path);
}

}  // namespace usddps
