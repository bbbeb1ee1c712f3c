#include "usddps/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "usddps/errors.hpp"
#include "usddps/fft.hpp"

namespace usddps {

namespace {

constexpr double kLn1000 = 6.907755278982137;  // 60 dB in nepers of amplitude

std::mt19937_64 stream(std::uint64_t seed, int channel, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(channel), purpose};
  return std::mt19937_64(seq);
}

enum Purpose : std::uint32_t { kRir = 1, kNoise = 2, kSurrogate = 3 };

int next_pow2(Eigen::Index n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Scales h[1..] so the samples after the direct path carry `energy`.
void set_tail_energy(Waveform& h, Eigen::Index direct, double energy) {
  const Eigen::Index n = h.size() - direct - 1;
  if (n <= 0) return;
  auto tail = h.segment(direct + 1, n);
  const double current = tail.squaredNorm();
  if (current > 0.0) tail *= std::sqrt(energy / current);
}

}  // namespace

std::string to_string(RirKind kind) {
  return kind == RirKind::kExpDecaySubband ? "exp_decay_subband" : "dense_gaussian_tail";
}

RirKind parse_rir_kind(const std::string& text) {
  if (text == "exp_decay_subband") return RirKind::kExpDecaySubband;
  if (text == "dense_gaussian_tail") return RirKind::kDenseGaussianTail;
  throw InvalidInput("unknown rir_kind '" + text +
                     "' (expected exp_decay_subband or dense_gaussian_tail)");
}

void SceneSpec::validate() const {
  if (n_channels < 1) throw InvalidInput("scene: n_channels must be >= 1");
  if (!(t60 >= 0.05 && t60 <= 2.0)) throw InvalidInput("scene: t60 must lie in [0.05, 2.0] s");
  if (std::isnan(snr_db) || snr_db == -INFINITY)
    throw InvalidInput("scene: snr_db must be a number or +inf");
  if (!direct_delays.empty()) {
    if (static_cast<int>(direct_delays.size()) != n_channels)
      throw InvalidInput("scene: need one direct delay per channel");
    if (direct_delays[0] != 0) throw InvalidInput("scene: channel 1 delay must be 0");
    for (int d : direct_delays)
      if (d < 0) throw InvalidInput("scene: delays must be >= 0");
  }
  if (sample_rate <= 0) throw InvalidInput("scene: sample_rate must be positive");
  if (n_bands < 2) throw InvalidInput("scene: n_bands must be >= 2");
}

int SceneSpec::delay(int channel) const {
  return direct_delays.empty() ? 0 : direct_delays.at(channel);
}

double tail_energy(double t60) { return std::pow(t60 / 0.6, 4.0); }

double decay_for_t60(double t60, const StftConfig& cfg, int sample_rate) {
  return kLn1000 * cfg.hop_size() / (t60 * sample_rate);
}

RirParams sample_rir_params(const SceneSpec& spec, int channel, const StftConfig& cfg) {
  spec.validate();
  auto rng = stream(spec.seed, channel, kRir);
  const double hop_seconds = static_cast<double>(cfg.hop_size()) / spec.sample_rate;
  const double alpha = decay_for_t60(spec.t60, cfg, spec.sample_rate);
  const int min_frames = 2 * cfg.fft_size() / cfg.hop_size() - 1;
  const int frames =
      std::max(min_frames, static_cast<int>(std::ceil(spec.t60 / hop_seconds)) + 4);
  RirParams p;
  p.band_centers = log_band_centers(spec.n_bands, cfg.num_bins());
  p.log_weights = Eigen::VectorXd::Zero(spec.n_bands);
  p.decays.resize(spec.n_bands);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  for (int b = 0; b < spec.n_bands; ++b) p.decays[b] = alpha * jitter(rng);
  p.phase.resize(frames, cfg.num_bins());
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  for (Eigen::Index i = 0; i < p.phase.size(); ++i) p.phase.data()[i] = u(rng);
  return p;
}

Waveform sample_rir(const SceneSpec& spec, int channel) {
  spec.validate();
  if (channel < 0 || channel >= spec.n_channels)
    throw InvalidInput("sample_rir: channel out of range");
  const int delay = spec.delay(channel);
  Waveform body;
  if (spec.rir_kind == RirKind::kExpDecaySubband) {
    const StftConfig cfg = StftConfig::for_sample_rate(spec.sample_rate);
    const RirParams p = sample_rir_params(spec, channel, cfg);
    const SubbandFilter h = to_filter(p, cfg);
    body = istft({h.taps, cfg, cfg.signal_length_for(h.n_taps())});
  } else {
    auto rng = stream(spec.seed, channel, kRir);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto length = static_cast<Eigen::Index>(std::ceil(1.2 * spec.t60 * spec.sample_rate)) + 1;
    const double rate = kLn1000 / (spec.t60 * spec.sample_rate);
    body.resize(length);
    body[0] = 0.0;
    for (Eigen::Index n = 1; n < length; ++n)
      body[n] = normal(rng) * std::exp(-rate * static_cast<double>(n));
  }
  body[0] = 0.0;
  set_tail_energy(body, 0, tail_energy(spec.t60));
  body[0] = 1.0;
  Waveform h = Waveform::Zero(body.size() + delay);
  h.segment(delay, body.size()) = body;
  return h;
}

Waveform convolve_truncated(const Waveform& x, const Waveform& h) {
  const Eigen::Index length = x.size();
  if (length == 0 || h.size() == 0) return Waveform::Zero(length);
  const int n = next_pow2(length + h.size() - 1);
  RealFft fft(n);
  std::vector<Complex> fx(fft.num_bins()), fh(fft.num_bins());
  fft.forward({x.data(), static_cast<std::size_t>(length)}, fx);
  fft.forward({h.data(), static_cast<std::size_t>(h.size())}, fh);
  for (std::size_t k = 0; k < fx.size(); ++k) fx[k] *= fh[k] / static_cast<double>(n);
  std::vector<double> out(n);
  fft.inverse(fx, out);
  return Eigen::Map<const Waveform>(out.data(), length);
}

Scene make_scene(const Waveform& clean, const SceneSpec& spec) {
  spec.validate();
  if (clean.size() == 0) throw InvalidInput("make_scene: clean signal is empty");
  std::vector<Waveform> rirs;
  RealMatrix y(spec.n_channels, clean.size());
  for (int c = 0; c < spec.n_channels; ++c) {
    Waveform h = sample_rir(spec, c);
    Waveform reverberant = convolve_truncated(clean, h);
    if (std::isfinite(spec.snr_db)) {
      auto rng = stream(spec.seed, c, kNoise);
      std::normal_distribution<double> normal(0.0, 1.0);
      Waveform noise(clean.size());
      for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = normal(rng);
      const double signal_power = reverberant.squaredNorm();
      const double noise_power = noise.squaredNorm();
      if (signal_power > 0.0)
        reverberant += noise * std::sqrt(signal_power / noise_power *
                                         std::pow(10.0, -spec.snr_db / 10.0));
    }
    y.row(c) = reverberant.transpose();
    rirs.push_back(std::move(h));
  }
  Waveform direct = clean * rirs[0][0];
  return {MultiChannelWaveform(std::move(y), spec.sample_rate), std::move(direct),
          std::move(rirs)};
}

Waveform speech_surrogate(Eigen::Index length, double sample_rate, std::uint64_t seed) {
  if (length < 2) throw InvalidInput("speech_surrogate: length must be >= 2");
  auto rng = stream(seed, 0, kSurrogate);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = next_pow2(length);
  std::vector<double> white(n);
  for (double& v : white) v = normal(rng);
  RealFft fft(n);
  std::vector<Complex> spec(fft.num_bins());
  fft.forward(white, spec);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) spec[k] /= std::sqrt(static_cast<double>(k));
  std::vector<double> pink(n);
  fft.inverse(spec, pink);
  Waveform x(length);
  for (Eigen::Index i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double envelope = 0.1 + 0.9 * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * 4.0 * t));
    x[i] = pink[i] * envelope;
  }
  return rescale_to_std(x, 0.05);
}

}  // namespace usddps
