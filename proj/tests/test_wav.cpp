#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "usddps/errors.hpp"
#include "usddps/wav.hpp"

using namespace usddps;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("usddps_wav_" + name)).string();
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_tag(std::vector<std::uint8_t>& b, const char* t) { b.insert(b.end(), t, t + 4); }

std::vector<std::uint8_t> pcm16_file(int channels, int rate, const std::vector<std::int16_t>& s) {
  std::vector<std::uint8_t> b;
  put_tag(b, "RIFF");
  put_u32(b, static_cast<std::uint32_t>(36 + 2 * s.size()));
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put_u32(b, 16);
  put_u16(b, 1);
  put_u16(b, static_cast<std::uint16_t>(channels));
  put_u32(b, static_cast<std::uint32_t>(rate));
  put_u32(b, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(b, static_cast<std::uint16_t>(channels * 2));
  put_u16(b, 16);
  put_tag(b, "data");
  put_u32(b, static_cast<std::uint32_t>(2 * s.size()));
  for (auto v : s) put_u16(b, static_cast<std::uint16_t>(v));
  return b;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& b) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("float32 round trip") {
  std::mt19937_64 rng(1);
  RealMatrix m(3, 257);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::normal_distribution<>(0, 0.3)(rng);
  const MultiChannelWaveform x(m, 16000);
  const std::string path = temp_path("f32.wav");
  write_wav(path, x);
  const MultiChannelWaveform y = read_wav(path);
  CHECK(y.channels() == 3);
  CHECK(y.length() == 257);
  CHECK(y.sample_rate() == 16000);
  CHECK((y.samples() - x.samples()).cwiseAbs().maxCoeff() < 1e-7);
  std::filesystem::remove(path);
}

TEST_CASE("pcm16 round trip") {
  RealMatrix m(2, 5);
  m << 0.0, 0.5, -0.5, 0.25, -1.0, 0.125, -0.125, 0.75, 0.001, 0.999;
  const std::string path = temp_path("pcm.wav");
  write_wav(path, MultiChannelWaveform(m, 8000), WavEncoding::kPcm16);
  const MultiChannelWaveform y = read_wav(path);
  CHECK(y.sample_rate() == 8000);
  CHECK((y.samples() - m).cwiseAbs().maxCoeff() <= 1.0 / 32768.0);
  std::filesystem::remove(path);
}

TEST_CASE("hand-built pcm16 file decodes interleaved samples") {
  const std::string path = temp_path("hand.wav");
  write_bytes(path, pcm16_file(2, 16000, {16384, -32768, 0, 8192}));
  const MultiChannelWaveform y = read_wav(path);
  CHECK(y.channels() == 2);
  CHECK(y.length() == 2);
  CHECK(y.samples()(0, 0) == 0.5);
  CHECK(y.samples()(1, 0) == -1.0);
  CHECK(y.samples()(0, 1) == 0.0);
  CHECK(y.samples()(1, 1) == 0.25);
  std::filesystem::remove(path);
}

TEST_CASE("malformed files report byte offsets") {
  const std::string path = temp_path("bad.wav");
  SUBCASE("bad riff tag") {
    auto b = pcm16_file(1, 16000, {1, 2});
    b[0] = 'X';
    write_bytes(path, b);
    try {
      read_wav(path);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.position() == 0);
    }
  }
  SUBCASE("bad wave tag") {
    auto b = pcm16_file(1, 16000, {1, 2});
    b[8] = 'X';
    write_bytes(path, b);
    try {
      read_wav(path);
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(e.position() == 8);
    }
  }
  SUBCASE("truncated data") {
    auto b = pcm16_file(1, 16000, {1, 2, 3, 4});
    b.resize(b.size() - 3);
    write_bytes(path, b);
    CHECK_THROWS_AS(read_wav(path), IoError);
  }
  SUBCASE("unsupported encoding") {
    auto b = pcm16_file(1, 16000, {1, 2});
    b[34] = 24;  // bits per sample
    write_bytes(path, b);
    CHECK_THROWS_AS(read_wav(path), IoError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_wav(temp_path("does_not_exist.wav")), IoError); }
  std::filesystem::remove(path);
}
